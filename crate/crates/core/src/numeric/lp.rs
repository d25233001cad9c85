//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Solves `maximize c·x` subject to mixed-sense rows `A_i·x {<=,=,>=} b_i`,
//! `x >= 0`, and optional per-variable upper bounds. Reports primal and dual
//! solutions for optimal instances and a Farkas multiplier vector for
//! infeasible ones.
//!
//! Certificate conventions (all over the reported row order: user rows first,
//! then one internal row per finite upper bound, in variable order):
//! * dual `u` of an optimal solve: `u_i >= 0` for `<=` rows, `u_i <= 0` for
//!   `>=` rows, free for `=` rows; `sum_i u_i b_i` equals the optimal value
//!   and `sum_i u_i A_ij >= c_j` for every variable, both within 1e-7.
//! * Farkas vector `y` of an infeasible solve: `y_i >= 0` for `<=` rows,
//!   `y_i <= 0` for `>=` rows, free for `=` rows; `sum_i y_i A_ij >= 0` for
//!   every variable and `sum_i y_i b_i < 0`, exhibiting the contradiction.

use crate::error::{Error, Result};

/// Feasibility tolerance: phase one must reach an artificial sum below this.
const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for pivot selection.
const RC_TOL: f64 = 1e-9;
/// Pivot elements smaller than this are treated as zero in the ratio test.
const PIVOT_TOL: f64 = 1e-9;
/// Safety cap on simplex pivots; Bland's rule terminates long before this on
/// any instance this crate builds.
const MAX_PIVOTS: usize = 1_000_000;

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// `maximize c·x` subject to `rows`, `x >= 0`, and optional upper bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Objective coefficients, one per variable; the solver maximizes.
    pub maximize: Vec<f64>,
    /// Constraint rows `(coefficients, sense, rhs)`.
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
    /// Per-variable upper bounds; `None` means unbounded above. All variables
    /// are implicitly `>= 0`.
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    /// Program with default bounds (`x >= 0`, no upper bounds).
    pub fn new(maximize: Vec<f64>, rows: Vec<(Vec<f64>, Sense, f64)>) -> Self {
        let n = maximize.len();
        LinearProgram {
            maximize,
            rows,
            upper: vec![None; n],
        }
    }
}

/// Result of a solve. Vectors follow the row order documented at module level.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        dual: Vec<f64>,
        value: f64,
    },
    Infeasible {
        farkas: Vec<f64>,
    },
    Unbounded,
}

/// Solves the program; errors on inconsistent dimensions or non-finite data.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.maximize.len();
    if lp.upper.len() != n {
        return Err(Error::Shape(format!(
            "bounds length {} does not match {} variables",
            lp.upper.len(),
            n
        )));
    }
    for (i, (coeffs, _, rhs)) in lp.rows.iter().enumerate() {
        if coeffs.len() != n {
            return Err(Error::Shape(format!(
                "row {} has {} coefficients, expected {}",
                i,
                coeffs.len(),
                n
            )));
        }
        if !rhs.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("row {i} contains non-finite data")));
        }
    }
    if lp.maximize.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("objective contains non-finite data".into()));
    }

    // Materialize upper bounds as extra `x_j <= u` rows after the user rows.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = lp.rows.clone();
    for (j, u) in lp.upper.iter().enumerate() {
        if let Some(u) = *u {
            if !u.is_finite() || u < 0.0 {
                return Err(Error::Domain(format!(
                    "upper bound for variable {j} must be finite and nonnegative"
                )));
            }
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, Sense::Le, u));
        }
    }
    Tableau::build(&lp.maximize, &rows)?.solve()
}

/// Dense simplex tableau. Columns: `n` structural, then one slack/surplus per
/// inequality row, then one artificial per row that needs one. The artificial
/// columns double as readable unit columns for recovering duals.
struct Tableau {
    n_struct: usize,
    n_rows: usize,
    /// `rows[i]` holds the constraint coefficients; `rhs[i]` the right side.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Column index of the basic variable for each row.
    basis: Vec<usize>,
    /// First artificial column index; columns at or beyond this never enter
    /// the basis in phase two.
    art_start: usize,
    /// Artificial column for each row, when one was created.
    art_col: Vec<Option<usize>>,
    /// Slack (+1) or surplus (-1) column for each row, when one exists:
    /// `(column, sign)`.
    slack_col: Vec<Option<(usize, f64)>>,
    /// +1 if the row kept its original orientation, -1 if it was negated to
    /// make the right side nonnegative.
    flip: Vec<f64>,
    /// Rows proved redundant during phase one; excluded from pivoting and
    /// assigned zero duals.
    dead: Vec<bool>,
    maximize: Vec<f64>,
}

impl Tableau {
    fn build(maximize: &[f64], rows_in: &[(Vec<f64>, Sense, f64)]) -> Result<Tableau> {
        let n = maximize.len();
        let m = rows_in.len();
        // First pass: orientation flips and column counts.
        let mut flip = vec![1.0; m];
        let mut sense = Vec::with_capacity(m);
        for (i, (_, s, rhs)) in rows_in.iter().enumerate() {
            let (s, f) = if *rhs < 0.0 {
                let flipped = match s {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
                (flipped, -1.0)
            } else {
                (*s, 1.0)
            };
            flip[i] = f;
            sense.push(s);
        }
        let n_slack = sense.iter().filter(|s| **s != Sense::Eq).count();
        // Artificials: Ge and Eq rows need one; Le rows start basic on their
        // slack.
        let n_art = sense.iter().filter(|s| **s != Sense::Le).count();
        let art_start = n + n_slack;
        let n_cols = art_start + n_art;

        let mut rows = vec![vec![0.0; n_cols]; m];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![0usize; m];
        let mut art_col = vec![None; m];
        let mut slack_col = vec![None; m];
        let mut next_slack = n;
        let mut next_art = art_start;
        for i in 0..m {
            let (coeffs, _, b) = &rows_in[i];
            for j in 0..n {
                rows[i][j] = flip[i] * coeffs[j];
            }
            rhs[i] = flip[i] * *b;
            match sense[i] {
                Sense::Le => {
                    rows[i][next_slack] = 1.0;
                    slack_col[i] = Some((next_slack, 1.0));
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Sense::Ge => {
                    rows[i][next_slack] = -1.0;
                    slack_col[i] = Some((next_slack, -1.0));
                    next_slack += 1;
                    rows[i][next_art] = 1.0;
                    art_col[i] = Some(next_art);
                    basis[i] = next_art;
                    next_art += 1;
                }
                Sense::Eq => {
                    rows[i][next_art] = 1.0;
                    art_col[i] = Some(next_art);
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        Ok(Tableau {
            n_struct: n,
            n_rows: m,
            rows,
            rhs,
            basis,
            art_start,
            art_col,
            slack_col,
            flip,
            dead: vec![false; m],
            maximize: maximize.to_vec(),
        })
    }

    fn n_cols(&self) -> usize {
        if self.n_rows == 0 {
            self.n_struct
        } else {
            self.rows[0].len()
        }
    }

    /// Reduced costs `c_j - c_B^T B^{-1} A_j` for the given column costs.
    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut rc = costs.to_vec();
        for i in 0..self.n_rows {
            if self.dead[i] {
                continue;
            }
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                for j in 0..rc.len() {
                    rc[j] -= cb * self.rows[i][j];
                }
            }
        }
        rc
    }

    /// Runs simplex minimizing `costs` over columns `< allowed_end`; returns
    /// false when an unbounded ray is detected.
    fn run(&mut self, costs: &[f64], allowed_end: usize) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            let rc = self.reduced_costs(costs);
            // Bland: entering column is the lowest-index improving one.
            let mut entering = None;
            for (j, rc_j) in rc.iter().enumerate().take(allowed_end) {
                if *rc_j < -RC_TOL && !self.is_basic(j) {
                    entering = Some(j);
                    break;
                }
            }
            let Some(e) = entering else {
                return Ok(true);
            };
            // Ratio test; ties broken by smallest basis column index (Bland).
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.n_rows {
                if self.dead[i] {
                    continue;
                }
                let a = self.rows[i][e];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || ((ratio - lr).abs() <= 1e-12 && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((l, _)) = leave else {
                return Ok(false);
            };
            self.pivot(l, e);
        }
        Err(Error::Domain("simplex exceeded its pivot cap".into()))
    }

    fn is_basic(&self, col: usize) -> bool {
        (0..self.n_rows).any(|i| !self.dead[i] && self.basis[i] == col)
    }

    fn pivot(&mut self, l: usize, e: usize) {
        let piv = self.rows[l][e];
        let inv = 1.0 / piv;
        for v in self.rows[l].iter_mut() {
            *v *= inv;
        }
        self.rhs[l] *= inv;
        for i in 0..self.n_rows {
            if i == l || self.dead[i] {
                continue;
            }
            let factor = self.rows[i][e];
            if factor != 0.0 {
                for j in 0..self.rows[i].len() {
                    self.rows[i][j] -= factor * self.rows[l][j];
                }
                self.rhs[i] -= factor * self.rhs[l];
            }
        }
        self.basis[l] = e;
    }

    fn solve(mut self) -> Result<LpOutcome> {
        let n_cols = self.n_cols();

        // Phase one: minimize the sum of artificials.
        let has_artificials = self.art_start < n_cols;
        if has_artificials {
            let mut costs = vec![0.0; n_cols];
            for c in costs.iter_mut().skip(self.art_start) {
                *c = 1.0;
            }
            let bounded = self.run(&costs, n_cols)?;
            debug_assert!(bounded, "phase one objective is bounded below by zero");
            let infeas: f64 = (0..self.n_rows)
                .filter(|&i| !self.dead[i] && self.basis[i] >= self.art_start)
                .map(|i| self.rhs[i])
                .sum();
            if infeas > FEAS_TOL {
                return Ok(LpOutcome::Infeasible {
                    farkas: self.recover_multipliers(&costs),
                });
            }
            self.evict_artificials();
        }

        // Phase two: minimize the negated objective over non-artificial
        // columns.
        let mut costs = vec![0.0; n_cols];
        for j in 0..self.n_struct {
            costs[j] = -self.maximize[j];
        }
        let bounded = self.run(&costs, self.art_start)?;
        if !bounded {
            return Ok(LpOutcome::Unbounded);
        }

        let mut x = vec![0.0; self.n_struct];
        for i in 0..self.n_rows {
            if !self.dead[i] && self.basis[i] < self.n_struct {
                x[self.basis[i]] = self.rhs[i];
            }
        }
        let value: f64 = self.maximize.iter().zip(&x).map(|(c, v)| c * v).sum();
        let dual = self.recover_multipliers(&costs);
        Ok(LpOutcome::Optimal { x, dual, value })
    }

    /// Pivots remaining basic artificials out after phase one; rows with no
    /// eligible pivot column are redundant and marked dead.
    fn evict_artificials(&mut self) {
        for i in 0..self.n_rows {
            if self.dead[i] || self.basis[i] < self.art_start {
                continue;
            }
            let mut pivot_col = None;
            for j in 0..self.art_start {
                if self.rows[i][j].abs() > 1e-7 && !self.is_basic(j) {
                    pivot_col = Some(j);
                    break;
                }
            }
            match pivot_col {
                Some(j) => self.pivot(i, j),
                None => self.dead[i] = true,
            }
        }
    }

    /// Reads the simplex multipliers `y` for the current basis from the unit
    /// columns created at build time, then maps them back to user row order
    /// and orientation. Both phases minimize, so the reported user-facing
    /// multipliers (duals of the maximization, or Farkas combinations with
    /// `sum y_i b_i < 0`) are the negated, flip-corrected internal values.
    fn recover_multipliers(&self, costs: &[f64]) -> Vec<f64> {
        let rc = self.reduced_costs(costs);
        let mut out = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            if self.dead[i] {
                continue;
            }
            // y_i = c_k - rc_k for any column k whose original content was the
            // unit vector e_i (slack: cost 0, sign s; artificial: e_i).
            let y = if let Some(col) = self.art_col[i] {
                costs[col] - rc[col]
            } else if let Some((col, sign)) = self.slack_col[i] {
                sign * (costs[col] - rc[col])
            } else {
                0.0
            };
            out[i] = -self.flip[i] * y;
        }
        out
    }
}
