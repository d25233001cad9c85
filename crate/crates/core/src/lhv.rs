//! Constructive common-cause explanations: mixtures of deterministic
//! strategies, single-setting constructions, one-way-communication models,
//! and local-polytope membership via linear programming.

use serde::{Deserialize, Serialize};

use crate::correlations::CorrelationTable;
use crate::error::{Error, Result};
use crate::numeric::{solve_lp, LinearProgram, LpOutcome, Sense};

/// Mixture weights must reach 1 within this.
const WEIGHT_TOL: f64 = 1e-12;
/// Remote marginals must be setting-independent within this for the
/// constructive builders to apply.
const MARGINAL_TOL: f64 = 1e-9;
/// Default ceiling on enumerated deterministic strategies.
pub const DEFAULT_STRATEGY_CAP: u64 = 1_000_000;

/// One hidden-variable value: a deterministic response per local setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    /// Outcome index for each setting x.
    pub response_a: Vec<usize>,
    /// Outcome index for each setting y.
    pub response_b: Vec<usize>,
}

/// A common-cause model: a weighted mixture of deterministic strategies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalModel {
    pub components: Vec<(f64, DeterministicStrategy)>,
}

/// Which side's strategy may read the remote setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommDirection {
    AReceivesFromB,
    BReceivesFromA,
}

/// A strategy for one-way-communication models. Both responses are stored as
/// full (own setting, remote setting) matrices; the sending side's matrix
/// must be constant along the remote coordinate, which `CommModel::predict`
/// enforces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStrategy {
    /// Outcome for side A indexed `[x][y]`.
    pub response_a: Vec<Vec<usize>>,
    /// Outcome for side B indexed `[y][x]`.
    pub response_b: Vec<Vec<usize>>,
}

/// A mixture of communication strategies with a fixed direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommModel {
    pub direction: CommDirection,
    pub components: Vec<(f64, CommStrategy)>,
}

fn check_weights<T>(components: &[(f64, T)]) -> Result<()> {
    if components.is_empty() {
        return Err(Error::Shape("model has no components".into()));
    }
    let mut sum = 0.0;
    for (w, _) in components {
        if !(*w > 0.0) {
            return Err(Error::Domain(format!(
                "component weight {w} is not positive"
            )));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::Domain(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

impl LocalModel {
    /// Validates weights (positive, summing to 1 within 1e-12) and uniform
    /// strategy shapes.
    pub fn new(components: Vec<(f64, DeterministicStrategy)>) -> Result<Self> {
        check_weights(&components)?;
        let nx = components[0].1.response_a.len();
        let ny = components[0].1.response_b.len();
        if components
            .iter()
            .any(|(_, s)| s.response_a.len() != nx || s.response_b.len() != ny)
        {
            return Err(Error::Shape("strategies disagree on setting counts".into()));
        }
        Ok(LocalModel { components })
    }

    pub fn settings_a(&self) -> usize {
        self.components[0].1.response_a.len()
    }

    pub fn settings_b(&self) -> usize {
        self.components[0].1.response_b.len()
    }

    /// The table this mixture produces:
    /// `P(a,b|x,y) = sum of weights of strategies answering (a,b)`.
    pub fn predict(&self, outcomes_a: usize, outcomes_b: usize) -> Result<CorrelationTable> {
        let nx = self.settings_a();
        let ny = self.settings_b();
        let mut probs = vec![0.0; nx * ny * outcomes_a * outcomes_b];
        for (w, s) in &self.components {
            for (x, &a) in s.response_a.iter().enumerate() {
                for (y, &b) in s.response_b.iter().enumerate() {
                    if a >= outcomes_a || b >= outcomes_b {
                        return Err(Error::Shape(format!(
                            "strategy outcome ({a}, {b}) outside {outcomes_a}x{outcomes_b} alphabets"
                        )));
                    }
                    probs[((x * ny + y) * outcomes_a + a) * outcomes_b + b] += w;
                }
            }
        }
        CorrelationTable::new(nx, ny, outcomes_a, outcomes_b, probs)
    }
}

impl CommModel {
    /// Validates weights, shapes, and that the sending side's responses never
    /// depend on the remote setting.
    pub fn new(direction: CommDirection, components: Vec<(f64, CommStrategy)>) -> Result<Self> {
        check_weights(&components)?;
        let model = CommModel {
            direction,
            components,
        };
        let (nx, ny) = model.shape()?;
        for (_, s) in &model.components {
            for x in 0..nx {
                for y in 0..ny {
                    match direction {
                        CommDirection::AReceivesFromB => {
                            if s.response_b[y][x] != s.response_b[y][0] {
                                return Err(Error::Domain(
                                    "sending side B must answer independently of x".into(),
                                ));
                            }
                        }
                        CommDirection::BReceivesFromA => {
                            if s.response_a[x][y] != s.response_a[x][0] {
                                return Err(Error::Domain(
                                    "sending side A must answer independently of y".into(),
                                ));
                            }
                        }
                    }
                }
            }
        }
        Ok(model)
    }

    fn shape(&self) -> Result<(usize, usize)> {
        let first = &self.components[0].1;
        let nx = first.response_a.len();
        let ny = first.response_b.len();
        for (_, s) in &self.components {
            if s.response_a.len() != nx
                || s.response_b.len() != ny
                || s.response_a.iter().any(|row| row.len() != ny)
                || s.response_b.iter().any(|row| row.len() != nx)
            {
                return Err(Error::Shape("strategies disagree on setting counts".into()));
            }
        }
        Ok((nx, ny))
    }

    /// The table this mixture produces.
    pub fn predict(&self, outcomes_a: usize, outcomes_b: usize) -> Result<CorrelationTable> {
        let (nx, ny) = self.shape()?;
        let mut probs = vec![0.0; nx * ny * outcomes_a * outcomes_b];
        for (w, s) in &self.components {
            for x in 0..nx {
                for y in 0..ny {
                    let a = s.response_a[x][y];
                    let b = s.response_b[y][x];
                    if a >= outcomes_a || b >= outcomes_b {
                        return Err(Error::Shape(format!(
                            "strategy outcome ({a}, {b}) outside {outcomes_a}x{outcomes_b} alphabets"
                        )));
                    }
                    probs[((x * ny + y) * outcomes_a + a) * outcomes_b + b] += w;
                }
            }
        }
        CorrelationTable::new(nx, ny, outcomes_a, outcomes_b, probs)
    }
}

/// Average of side B's outcome marginal over all x at fixed y, erroring when
/// the marginal actually varies with x beyond `MARGINAL_TOL`.
fn x_independent_marginal_b(table: &CorrelationTable, y: usize) -> Result<Vec<f64>> {
    let nx = table.settings_a();
    let reference = table.marginal_b(0, y)?;
    let mut avg = vec![0.0; reference.len()];
    for x in 0..nx {
        let m = table.marginal_b(x, y)?;
        for (b, p) in m.iter().enumerate() {
            if (p - reference[b]).abs() > MARGINAL_TOL {
                return Err(Error::NotExplainable(format!(
                    "side B's marginal at y={y} depends on x ({} vs {} at b={b}): \
                     the data signals from A to B and no common-cause model exists",
                    reference[b], p
                )));
            }
            avg[b] += p / nx as f64;
        }
    }
    Ok(avg)
}

/// Mirror of `x_independent_marginal_b`.
fn y_independent_marginal_a(table: &CorrelationTable, x: usize) -> Result<Vec<f64>> {
    let ny = table.settings_b();
    let reference = table.marginal_a(x, 0)?;
    let mut avg = vec![0.0; reference.len()];
    for y in 0..ny {
        let m = table.marginal_a(x, y)?;
        for (a, p) in m.iter().enumerate() {
            if (p - reference[a]).abs() > MARGINAL_TOL {
                return Err(Error::NotExplainable(format!(
                    "side A's marginal at x={x} depends on y ({} vs {} at a={a}): \
                     the data signals from B to A and no common-cause model exists",
                    reference[a], p
                )));
            }
            avg[a] += p / ny as f64;
        }
    }
    Ok(avg)
}

/// Builds an explicit common-cause model for a table with a single setting on
/// one side. The hidden variable is `(b, a_1, ..., a_|X|)` weighted by
/// `P(b) * prod_x P(a_x | x, b)` (mirrored when side A has the single
/// setting). Total on its domain: every table whose fixed-side marginal is
/// independent of the scanned side's setting is reproduced within 1e-12.
pub fn build_single_setting_model(table: &CorrelationTable) -> Result<LocalModel> {
    if table.settings_b() == 1 {
        build_single_setting_b(table)
    } else if table.settings_a() == 1 {
        build_single_setting_a(table)
    } else {
        Err(Error::Domain(format!(
            "the single-setting construction needs one side fixed; table is {}x{}",
            table.settings_a(),
            table.settings_b()
        )))
    }
}

fn build_single_setting_b(table: &CorrelationTable) -> Result<LocalModel> {
    let nx = table.settings_a();
    let na = table.outcomes_a();
    let pb = x_independent_marginal_b(table, 0)?;
    let mut components = Vec::new();
    for (b, &pb_b) in pb.iter().enumerate() {
        if pb_b <= 0.0 {
            continue;
        }
        // Conditional response distributions P(a | x, b) for this b.
        let mut cond = vec![vec![0.0; na]; nx];
        for (x, row) in cond.iter_mut().enumerate() {
            for (a, slot) in row.iter_mut().enumerate() {
                *slot = table.prob(x, 0, a, b)? / pb_b;
            }
        }
        // Odometer over the support of prod_x P(a_x | x, b).
        let supports: Vec<Vec<usize>> = cond
            .iter()
            .map(|row| (0..na).filter(|a| row[*a] > 0.0).collect())
            .collect();
        if supports.iter().any(|s| s.is_empty()) {
            continue;
        }
        let mut idx = vec![0usize; nx];
        loop {
            let mut weight = pb_b;
            let mut response_a = Vec::with_capacity(nx);
            for (x, &k) in idx.iter().enumerate() {
                let a = supports[x][k];
                weight *= cond[x][a];
                response_a.push(a);
            }
            if weight > 0.0 {
                components.push((
                    weight,
                    DeterministicStrategy {
                        response_a,
                        response_b: vec![b],
                    },
                ));
            }
            // Advance the odometer.
            let mut pos = 0;
            loop {
                if pos == nx {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < supports[pos].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == nx {
                break;
            }
        }
    }
    normalize_components(&mut components);
    LocalModel::new(components)
}

fn build_single_setting_a(table: &CorrelationTable) -> Result<LocalModel> {
    let ny = table.settings_b();
    let nb = table.outcomes_b();
    let pa = y_independent_marginal_a(table, 0)?;
    let mut components = Vec::new();
    for (a, &pa_a) in pa.iter().enumerate() {
        if pa_a <= 0.0 {
            continue;
        }
        let mut cond = vec![vec![0.0; nb]; ny];
        for (y, row) in cond.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                *slot = table.prob(0, y, a, b)? / pa_a;
            }
        }
        let supports: Vec<Vec<usize>> = cond
            .iter()
            .map(|row| (0..nb).filter(|b| row[*b] > 0.0).collect())
            .collect();
        if supports.iter().any(|s| s.is_empty()) {
            continue;
        }
        let mut idx = vec![0usize; ny];
        loop {
            let mut weight = pa_a;
            let mut response_b = Vec::with_capacity(ny);
            for (y, &k) in idx.iter().enumerate() {
                let b = supports[y][k];
                weight *= cond[y][b];
                response_b.push(b);
            }
            if weight > 0.0 {
                components.push((
                    weight,
                    DeterministicStrategy {
                        response_a: vec![a],
                        response_b,
                    },
                ));
            }
            let mut pos = 0;
            loop {
                if pos == ny {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] < supports[pos].len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == ny {
                break;
            }
        }
    }
    normalize_components(&mut components);
    LocalModel::new(components)
}

fn normalize_components<T>(components: &mut [(f64, T)]) {
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if total > 0.0 && total != 1.0 {
        for (w, _) in components.iter_mut() {
            *w /= total;
        }
    }
}

/// Builds a one-way-communication model via the chain rule
/// `P(a,b|x,y) = P(b|y) * P(a|b,x,y)` (direction `AReceivesFromB`; mirrored
/// otherwise). The hidden variable fixes the sender's outcome for every own
/// setting and the receiver's outcome for every (own, remote) setting pair.
/// Precondition: the sender's marginal must not depend on the receiver's
/// setting; violations mean even one-way communication cannot explain the
/// data.
pub fn build_comm_model(table: &CorrelationTable, direction: CommDirection) -> Result<CommModel> {
    match direction {
        CommDirection::AReceivesFromB => build_comm_a_receives(table),
        CommDirection::BReceivesFromA => build_comm_b_receives(table),
    }
}

fn build_comm_a_receives(table: &CorrelationTable) -> Result<CommModel> {
    let nx = table.settings_a();
    let ny = table.settings_b();
    let na = table.outcomes_a();
    let nb = table.outcomes_b();
    // Sender marginals P(b|y), x-independent by precondition.
    let mut pb = Vec::with_capacity(ny);
    for y in 0..ny {
        pb.push(x_independent_marginal_b(table, y)?);
    }
    // Receiver conditionals P(a | x, y, b).
    let mut cond = vec![vec![vec![vec![0.0; na]; nb]; ny]; nx];
    for x in 0..nx {
        for y in 0..ny {
            for b in 0..nb {
                if pb[y][b] <= 0.0 {
                    continue;
                }
                for a in 0..na {
                    cond[x][y][b][a] = table.prob(x, y, a, b)? / pb[y][b];
                }
            }
        }
    }
    // Hidden variable: (b_y for each y) x (a_{x,y} for each x,y), weights
    // multiplying the per-coordinate distributions. Enumerate supports with
    // an odometer over all ny + nx*ny coordinates.
    let b_supports: Vec<Vec<usize>> = pb
        .iter()
        .map(|row| (0..nb).filter(|b| row[*b] > 0.0).collect())
        .collect();
    if b_supports.iter().any(|s| s.is_empty()) {
        return Err(Error::Domain("a setting row has no outcome support".into()));
    }
    let mut size_guard = 1f64;
    for s in &b_supports {
        size_guard *= s.len() as f64;
    }
    size_guard *= (na as f64).powi((nx * ny) as i32);
    if size_guard > DEFAULT_STRATEGY_CAP as f64 {
        return Err(Error::TooLarge(format!(
            "communication model would enumerate ~{size_guard:.0} components"
        )));
    }

    let mut components: Vec<(f64, CommStrategy)> = Vec::new();
    let mut b_idx = vec![0usize; ny];
    'outer: loop {
        let b_choice: Vec<usize> = (0..ny).map(|y| b_supports[y][b_idx[y]]).collect();
        let mut base_weight = 1.0;
        for y in 0..ny {
            base_weight *= pb[y][b_choice[y]];
        }
        if base_weight > 0.0 {
            // Inner odometer over a_{x,y} supports given the chosen b per y.
            let a_supports: Vec<Vec<usize>> = (0..nx * ny)
                .map(|k| {
                    let (x, y) = (k / ny, k % ny);
                    (0..na)
                        .filter(|a| cond[x][y][b_choice[y]][*a] > 0.0)
                        .collect()
                })
                .collect();
            if a_supports.iter().all(|s| !s.is_empty()) {
                let mut a_idx = vec![0usize; nx * ny];
                loop {
                    let mut weight = base_weight;
                    let mut response_a = vec![vec![0usize; ny]; nx];
                    for (k, &j) in a_idx.iter().enumerate() {
                        let (x, y) = (k / ny, k % ny);
                        let a = a_supports[k][j];
                        weight *= cond[x][y][b_choice[y]][a];
                        response_a[x][y] = a;
                    }
                    if weight > 0.0 {
                        let response_b = (0..ny).map(|y| vec![b_choice[y]; nx]).collect();
                        components.push((
                            weight,
                            CommStrategy {
                                response_a,
                                response_b,
                            },
                        ));
                    }
                    let mut pos = 0;
                    loop {
                        if pos == nx * ny {
                            break;
                        }
                        a_idx[pos] += 1;
                        if a_idx[pos] < a_supports[pos].len() {
                            break;
                        }
                        a_idx[pos] = 0;
                        pos += 1;
                    }
                    if pos == nx * ny {
                        break;
                    }
                }
            }
        }
        let mut pos = 0;
        loop {
            if pos == ny {
                break 'outer;
            }
            b_idx[pos] += 1;
            if b_idx[pos] < b_supports[pos].len() {
                break;
            }
            b_idx[pos] = 0;
            pos += 1;
        }
    }
    normalize_components(&mut components);
    CommModel::new(CommDirection::AReceivesFromB, components)
}

fn build_comm_b_receives(table: &CorrelationTable) -> Result<CommModel> {
    // Mirror by transposing the table, building the A-receives model, and
    // transposing the strategies back.
    let transposed = CorrelationTable::from_fn(
        table.settings_b(),
        table.settings_a(),
        table.outcomes_b(),
        table.outcomes_a(),
        |y, x, b, a| table.prob(x, y, a, b).expect("in range"),
    )?;
    let mirrored = build_comm_a_receives(&transposed)?;
    let components = mirrored
        .components
        .into_iter()
        .map(|(w, s)| {
            (
                w,
                CommStrategy {
                    response_a: s.response_b,
                    response_b: s.response_a,
                },
            )
        })
        .collect();
    CommModel::new(CommDirection::BReceivesFromA, components)
}

/// Result of a local-polytope membership test.
#[derive(Debug, Clone)]
pub enum Membership {
    /// The table is a mixture of deterministic strategies; here is one.
    Feasible(LocalModel),
    /// No mixture exists; here is a separating functional.
    Infeasible(InfeasibilityCertificate),
}

/// A hyperplane separating the table from the local polytope:
/// `coefficients . strategy <= threshold` for every deterministic strategy
/// while `coefficients . table > threshold`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    /// One coefficient per table cell, in flat table order.
    pub coefficients: Vec<f64>,
    pub threshold: f64,
    pub value_on_table: f64,
    /// Recomputed maximum over all deterministic strategies (self-check).
    pub max_over_strategies: f64,
}

/// Index arithmetic for the lexicographic strategy enumeration: strategy
/// `s = ia * nb^ny + ib`, with `response_a(x) = (ia / na^x) % na` and the
/// same little-endian digit rule for `ib`.
fn strategy_responses(
    s: u64,
    nx: usize,
    ny: usize,
    na: usize,
    nb: usize,
) -> (Vec<usize>, Vec<usize>) {
    let b_count = (nb as u64).pow(ny as u32);
    let (mut ia, mut ib) = (s / b_count, s % b_count);
    let mut ra = Vec::with_capacity(nx);
    for _ in 0..nx {
        ra.push((ia % na as u64) as usize);
        ia /= na as u64;
    }
    let mut rb = Vec::with_capacity(ny);
    for _ in 0..ny {
        rb.push((ib % nb as u64) as usize);
        ib /= nb as u64;
    }
    (ra, rb)
}

/// Tests whether the table is a mixture of deterministic strategies, using
/// the default strategy cap.
pub fn local_polytope_membership(table: &CorrelationTable) -> Result<Membership> {
    local_polytope_membership_capped(table, DEFAULT_STRATEGY_CAP)
}

/// As `local_polytope_membership` with an explicit cap on the number of
/// enumerated strategies.
pub fn local_polytope_membership_capped(table: &CorrelationTable, cap: u64) -> Result<Membership> {
    let nx = table.settings_a();
    let ny = table.settings_b();
    let na = table.outcomes_a();
    let nb = table.outcomes_b();
    let count = (na as f64).powi(nx as i32) * (nb as f64).powi(ny as i32);
    if count > cap as f64 {
        return Err(Error::TooLarge(format!(
            "instance too large: {count:.0} deterministic strategies exceed the cap of {cap}"
        )));
    }
    let n_strat = count as u64;
    let n_cells = nx * ny * na * nb;

    // Equality row per cell plus one normalization row; variables are the
    // strategy weights.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(n_cells + 1);
    let flat = table.flat();
    let mut cell_matrix = vec![vec![0.0; n_strat as usize]; n_cells];
    for s in 0..n_strat {
        let (ra, rb) = strategy_responses(s, nx, ny, na, nb);
        for (x, &a) in ra.iter().enumerate() {
            for (y, &b) in rb.iter().enumerate() {
                let cell = ((x * ny + y) * na + a) * nb + b;
                cell_matrix[cell][s as usize] = 1.0;
            }
        }
    }
    for (cell, coeffs) in cell_matrix.into_iter().enumerate() {
        rows.push((coeffs, Sense::Eq, flat[cell]));
    }
    rows.push((vec![1.0; n_strat as usize], Sense::Eq, 1.0));

    let lp = LinearProgram::new(vec![0.0; n_strat as usize], rows);
    match solve_lp(&lp)? {
        LpOutcome::Optimal { x, .. } => {
            let mut components = Vec::new();
            for (s, w) in x.iter().enumerate() {
                if *w > 1e-12 {
                    let (response_a, response_b) = strategy_responses(s as u64, nx, ny, na, nb);
                    components.push((
                        *w,
                        DeterministicStrategy {
                            response_a,
                            response_b,
                        },
                    ));
                }
            }
            normalize_components(&mut components);
            Ok(Membership::Feasible(LocalModel::new(components)?))
        }
        LpOutcome::Infeasible { farkas } => {
            // farkas covers the cell rows then the normalization row; the
            // separating functional is its negation, rescaled to unit
            // max-magnitude for a stable, readable certificate.
            let mut coefficients: Vec<f64> = farkas[..n_cells].iter().map(|v| -v).collect();
            let mut threshold = farkas[n_cells];
            let scale = coefficients.iter().map(|c| c.abs()).fold(0.0, f64::max);
            if scale > 0.0 {
                for c in coefficients.iter_mut() {
                    *c /= scale;
                }
                threshold /= scale;
            }
            let value_on_table: f64 = coefficients.iter().zip(flat).map(|(c, p)| c * p).sum();
            let mut max_over_strategies = f64::NEG_INFINITY;
            for s in 0..n_strat {
                let (ra, rb) = strategy_responses(s, nx, ny, na, nb);
                let mut v = 0.0;
                for (x, &a) in ra.iter().enumerate() {
                    for (y, &b) in rb.iter().enumerate() {
                        v += coefficients[((x * ny + y) * na + a) * nb + b];
                    }
                }
                max_over_strategies = max_over_strategies.max(v);
            }
            Ok(Membership::Infeasible(InfeasibilityCertificate {
                coefficients,
                threshold,
                value_on_table,
                max_over_strategies,
            }))
        }
        LpOutcome::Unbounded => unreachable!("feasibility problem with zero objective"),
    }
}
