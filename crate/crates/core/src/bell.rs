//! Bell expressions over correlators: CHSH, the chained family, local bounds
//! by strategy enumeration, quantum values, and critical visibilities.

use serde::{Deserialize, Serialize};

use crate::correlations::CorrelationTable;
use crate::error::{Error, Result};
use crate::numeric::minimize_free;

/// Largest number of deterministic strategies enumeration will touch.
pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;

/// A linear expression over binary correlators with a declared local bound.
/// Construction re-derives the bound by enumeration, so a stored expression
/// is always consistent with its own certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BellExpression {
    pub name: String,
    /// Correlator coefficients indexed `[x][y]`.
    pub coefficients: Vec<Vec<f64>>,
    /// Maximum of the expression over local deterministic strategies.
    pub declared_local_bound: f64,
}

impl BellExpression {
    /// Validates shape, requires at least one nonzero coefficient, and checks
    /// the declared bound against enumeration within 1e-9.
    pub fn new(
        name: impl Into<String>,
        coefficients: Vec<Vec<f64>>,
        declared_local_bound: f64,
    ) -> Result<Self> {
        Self::new_capped(name, coefficients, declared_local_bound, DEFAULT_ENUM_CAP)
    }

    /// As `new` with an explicit cap on the validating enumeration.
    pub fn new_capped(
        name: impl Into<String>,
        coefficients: Vec<Vec<f64>>,
        declared_local_bound: f64,
        cap: u64,
    ) -> Result<Self> {
        let expr = BellExpression {
            name: name.into(),
            coefficients,
            declared_local_bound,
        };
        let ny = expr.settings_b();
        if expr.settings_a() == 0 || ny == 0 {
            return Err(Error::Shape("expression needs at least one setting".into()));
        }
        if expr.coefficients.iter().any(|row| row.len() != ny) {
            return Err(Error::Shape("ragged coefficient matrix".into()));
        }
        if !expr.coefficients.iter().flatten().any(|c| *c != 0.0) {
            return Err(Error::Domain("all coefficients are zero".into()));
        }
        let (enumerated, _, _) = local_bound_with_witness_capped(&expr, cap)?;
        if (enumerated - declared_local_bound).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "declared local bound {declared_local_bound} disagrees with enumeration {enumerated}"
            )));
        }
        Ok(expr)
    }

    pub fn settings_a(&self) -> usize {
        self.coefficients.len()
    }

    pub fn settings_b(&self) -> usize {
        self.coefficients.first().map_or(0, |r| r.len())
    }
}

/// The CHSH expression `E(0,0) + E(0,1) + E(1,0) - E(1,1)`, local bound 2.
pub fn chsh() -> BellExpression {
    BellExpression::new("CHSH", vec![vec![1.0, 1.0], vec![1.0, -1.0]], 2.0)
        .expect("CHSH is a valid expression")
}

/// The n-setting chained expression: `E(x_i, y_i)` and `E(x_{i+1}, y_i)`
/// enter positively and the wrap-around term `E(x_0, y_{n-1})` negatively;
/// local bound `2n - 2`. For n = 2 this is CHSH up to relabeling x.
pub fn chained_expression(n: usize) -> Result<BellExpression> {
    chained_expression_capped(n, DEFAULT_ENUM_CAP)
}

/// As `chained_expression` with an explicit cap on the validating
/// enumeration.
pub fn chained_expression_capped(n: usize, cap: u64) -> Result<BellExpression> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "chained expression needs n >= 2, got {n}"
        )));
    }
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        c[i][i] = 1.0;
    }
    for i in 0..n - 1 {
        c[i + 1][i] = 1.0;
    }
    c[0][n - 1] = -1.0;
    BellExpression::new_capped(format!("chained-{n}"), c, (2 * n - 2) as f64, cap)
}

/// `sum c_xy E(x,y)` on a binary-outcome table of matching shape.
pub fn evaluate(expr: &BellExpression, table: &CorrelationTable) -> Result<f64> {
    if expr.settings_a() != table.settings_a() || expr.settings_b() != table.settings_b() {
        return Err(Error::Shape(format!(
            "expression is {}x{} but table is {}x{}",
            expr.settings_a(),
            expr.settings_b(),
            table.settings_a(),
            table.settings_b()
        )));
    }
    let mut total = 0.0;
    for (x, row) in expr.coefficients.iter().enumerate() {
        for (y, c) in row.iter().enumerate() {
            if *c != 0.0 {
                total += c * table.correlator(x, y)?;
            }
        }
    }
    Ok(total)
}

/// `sum c_xy a_x b_y` for explicit +/-1 responses per setting.
pub fn evaluate_signs(expr: &BellExpression, a: &[i8], b: &[i8]) -> f64 {
    let mut total = 0.0;
    for (x, row) in expr.coefficients.iter().enumerate() {
        for (y, c) in row.iter().enumerate() {
            total += c * f64::from(a[x]) * f64::from(b[y]);
        }
    }
    total
}

/// `sum c_xy cos(alpha_x + beta_y)`: the expression value on the ideal
/// fringe-form quantum correlators at the given phases.
pub fn evaluate_phases(expr: &BellExpression, alphas: &[f64], betas: &[f64]) -> Result<f64> {
    if alphas.len() != expr.settings_a() || betas.len() != expr.settings_b() {
        return Err(Error::Shape(
            "phase list lengths must match settings".into(),
        ));
    }
    let mut total = 0.0;
    for (x, row) in expr.coefficients.iter().enumerate() {
        for (y, c) in row.iter().enumerate() {
            total += c * (alphas[x] + betas[y]).cos();
        }
    }
    Ok(total)
}

/// Maximum of the expression over all deterministic +/-1 strategies.
pub fn local_bound_by_enumeration(expr: &BellExpression) -> Result<f64> {
    local_bound_with_witness(expr).map(|(bound, _, _)| bound)
}

/// Enumeration with the maximizing strategy. Strategies are scanned in a
/// fixed lexicographic order (bit x of the A-index gives `a_x`, 0 mapping to
/// +1), so the reported witness is the lexicographically first argmax.
pub fn local_bound_with_witness(expr: &BellExpression) -> Result<(f64, Vec<i8>, Vec<i8>)> {
    local_bound_with_witness_capped(expr, DEFAULT_ENUM_CAP)
}

/// As `local_bound_with_witness`, refusing instances whose strategy count
/// exceeds `cap`.
pub fn local_bound_with_witness_capped(
    expr: &BellExpression,
    cap: u64,
) -> Result<(f64, Vec<i8>, Vec<i8>)> {
    let nx = expr.settings_a();
    let ny = expr.settings_b();
    if nx >= 63 || ny >= 63 {
        return Err(Error::TooLarge("too many settings to enumerate".into()));
    }
    let count = (1u64 << nx).saturating_mul(1u64 << ny);
    if count > cap {
        return Err(Error::TooLarge(format!(
            "{count} deterministic strategies exceed the cap of {cap}"
        )));
    }
    let signs = |index: u64, len: usize| -> Vec<i8> {
        (0..len)
            .map(|k| if index >> k & 1 == 0 { 1 } else { -1 })
            .collect()
    };
    let mut best = f64::NEG_INFINITY;
    let mut best_a = Vec::new();
    let mut best_b = Vec::new();
    for ia in 0..1u64 << nx {
        let a = signs(ia, nx);
        for ib in 0..1u64 << ny {
            let b = signs(ib, ny);
            let v = evaluate_signs(expr, &a, &b);
            if v > best {
                best = v;
                best_a = a.clone();
                best_b = b;
            }
        }
    }
    Ok((best, best_a, best_b))
}

/// Quantum maximum of the chained expression: `2n cos(pi / 2n)`.
pub fn quantum_chained_value(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "chained family needs n >= 2, got {n}"
        )));
    }
    let n = n as f64;
    Ok(2.0 * n * (std::f64::consts::PI / (2.0 * n)).cos())
}

/// Visibility at which `V * quantum value` meets the local bound `2n - 2`.
pub fn critical_visibility(n: usize) -> Result<f64> {
    Ok((2.0 * n as f64 - 2.0) / quantum_chained_value(n)?)
}

/// Phases attaining the chained quantum maximum on fringe-form correlators
/// `E = cos(alpha_x + beta_y)`: every positive term contributes
/// `cos(pi/2n)` and the wrap-around term `cos(pi - pi/2n)`.
pub fn chain_phases(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "chained family needs n >= 2, got {n}"
        )));
    }
    let theta = std::f64::consts::PI / (2.0 * n as f64);
    let alphas = (0..n).map(|i| -2.0 * i as f64 * theta).collect();
    let betas = (0..n).map(|j| (2.0 * j as f64 + 1.0) * theta).collect();
    Ok((alphas, betas))
}

/// Maximizes `evaluate_phases` over all phases by seeded pattern search;
/// returns the best value and the phases attaining it. Deterministic given
/// `(budget, seed)`.
pub fn optimize_phase_value(
    expr: &BellExpression,
    budget: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let nx = expr.settings_a();
    let ny = expr.settings_b();
    let dims = nx + ny;
    let (point, neg) = minimize_free(
        |p| {
            let mut total = 0.0;
            for (x, row) in expr.coefficients.iter().enumerate() {
                for (y, c) in row.iter().enumerate() {
                    total += c * (p[x] + p[nx + y]).cos();
                }
            }
            -total
        },
        dims,
        budget,
        seed,
    );
    Ok((-neg, point[..nx].to_vec(), point[nx..].to_vec()))
}
