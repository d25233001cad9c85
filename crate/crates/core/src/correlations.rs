//! Finite-alphabet conditional probability tables `P(a,b|x,y)`, their
//! marginals, correlators, and no-signaling checks.
//!
//! Outcome index convention, fixed across the whole crate and the file
//! formats: for binary alphabets, index 0 maps to the +1 outcome and index 1
//! to the -1 outcome.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-(x,y) blocks must sum to 1 within this before exact renormalization.
const NORM_TOL: f64 = 1e-9;
/// Entries may undershoot zero by at most this much before being clamped.
const NEG_CLAMP: f64 = -1e-12;

/// Conditional outcome distribution over finite settings and outcomes.
/// Immutable after construction; every (x,y) block is exactly normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    settings_a: usize,
    settings_b: usize,
    outcomes_a: usize,
    outcomes_b: usize,
    /// Flat row-major probabilities indexed by `((x*ny + y)*na + a)*nb + b`.
    probs: Vec<f64>,
}

/// One no-signaling violation: the named side's outcome marginal changes with
/// the other side's setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalingViolation {
    /// Side whose marginal moved: "a" or "b".
    pub side: char,
    /// The violating side's own (fixed) setting.
    pub own_setting: usize,
    /// The two remote settings whose marginals disagree.
    pub remote_settings: (usize, usize),
    /// Largest absolute marginal difference observed.
    pub max_deviation: f64,
}

impl CorrelationTable {
    /// Builds a table from flat probabilities in the documented index order,
    /// validating shape, nonnegativity, and per-(x,y) normalization, then
    /// renormalizing each block exactly.
    pub fn new(
        settings_a: usize,
        settings_b: usize,
        outcomes_a: usize,
        outcomes_b: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        Self::build(settings_a, settings_b, outcomes_a, outcomes_b, probs, true)
    }

    /// Shared constructor; `renormalize: false` keeps entries bit-identical
    /// (used on the file-load path so round-trips are exact), while still
    /// enforcing every invariant within tolerance.
    fn build(
        settings_a: usize,
        settings_b: usize,
        outcomes_a: usize,
        outcomes_b: usize,
        mut probs: Vec<f64>,
        renormalize: bool,
    ) -> Result<Self> {
        if settings_a < 1 || settings_b < 1 {
            return Err(Error::Shape("need at least one setting per side".into()));
        }
        if outcomes_a < 2 || outcomes_b < 2 {
            return Err(Error::Shape("need at least two outcomes per side".into()));
        }
        let expect = settings_a * settings_b * outcomes_a * outcomes_b;
        if probs.len() != expect {
            return Err(Error::Shape(format!(
                "expected {} probabilities, got {}",
                expect,
                probs.len()
            )));
        }
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < NEG_CLAMP || *p > 1.0 + 1e-9 {
                return Err(Error::Domain(format!("probability {p} out of range")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let block = outcomes_a * outcomes_b;
        for xy in 0..settings_a * settings_b {
            let slice = &mut probs[xy * block..(xy + 1) * block];
            let sum: f64 = slice.iter().sum();
            if (sum - 1.0).abs() > NORM_TOL {
                return Err(Error::Domain(format!(
                    "block (x={}, y={}) sums to {}, expected 1",
                    xy / settings_b,
                    xy % settings_b,
                    sum
                )));
            }
            if renormalize && sum != 1.0 {
                for p in slice.iter_mut() {
                    *p /= sum;
                }
            }
        }
        Ok(CorrelationTable {
            settings_a,
            settings_b,
            outcomes_a,
            outcomes_b,
            probs,
        })
    }

    /// Builds a table by evaluating `f(x, y, a, b)` over the full shape.
    pub fn from_fn<F>(
        settings_a: usize,
        settings_b: usize,
        outcomes_a: usize,
        outcomes_b: usize,
        mut f: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize, usize, usize) -> f64,
    {
        let mut probs = Vec::with_capacity(settings_a * settings_b * outcomes_a * outcomes_b);
        for x in 0..settings_a {
            for y in 0..settings_b {
                for a in 0..outcomes_a {
                    for b in 0..outcomes_b {
                        probs.push(f(x, y, a, b));
                    }
                }
            }
        }
        CorrelationTable::new(settings_a, settings_b, outcomes_a, outcomes_b, probs)
    }

    /// The Popescu-Rohrlich box: `P(a,b|x,y) = 1/2` when the +/- outcomes
    /// satisfy `a XOR b = x AND y`, else 0. Maximally nonlocal yet
    /// no-signaling; its CHSH value is 4.
    pub fn pr_box() -> Self {
        CorrelationTable::from_fn(
            2,
            2,
            2,
            2,
            |x, y, a, b| {
                if (a ^ b) == (x & y) {
                    0.5
                } else {
                    0.0
                }
            },
        )
        .expect("the PR box is a valid table")
    }

    pub fn settings_a(&self) -> usize {
        self.settings_a
    }

    pub fn settings_b(&self) -> usize {
        self.settings_b
    }

    pub fn outcomes_a(&self) -> usize {
        self.outcomes_a
    }

    pub fn outcomes_b(&self) -> usize {
        self.outcomes_b
    }

    fn idx(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.settings_b + y) * self.outcomes_a + a) * self.outcomes_b + b
    }

    fn check_settings(&self, x: usize, y: usize) -> Result<()> {
        if x >= self.settings_a || y >= self.settings_b {
            return Err(Error::Index(format!(
                "setting pair ({x}, {y}) out of range for {}x{} table",
                self.settings_a, self.settings_b
            )));
        }
        Ok(())
    }

    /// `P(a,b|x,y)`; errors when any index is out of range.
    pub fn prob(&self, x: usize, y: usize, a: usize, b: usize) -> Result<f64> {
        self.check_settings(x, y)?;
        if a >= self.outcomes_a || b >= self.outcomes_b {
            return Err(Error::Index(format!(
                "outcome pair ({a}, {b}) out of range for {}x{} alphabets",
                self.outcomes_a, self.outcomes_b
            )));
        }
        Ok(self.probs[self.idx(x, y, a, b)])
    }

    /// Raw flat probabilities in the documented index order.
    pub fn flat(&self) -> &[f64] {
        &self.probs
    }

    /// Distribution of side A's outcome under settings (x, y).
    pub fn marginal_a(&self, x: usize, y: usize) -> Result<Vec<f64>> {
        self.check_settings(x, y)?;
        let mut out = vec![0.0; self.outcomes_a];
        for (a, slot) in out.iter_mut().enumerate() {
            for b in 0..self.outcomes_b {
                *slot += self.probs[self.idx(x, y, a, b)];
            }
        }
        Ok(out)
    }

    /// Distribution of side B's outcome under settings (x, y).
    pub fn marginal_b(&self, x: usize, y: usize) -> Result<Vec<f64>> {
        self.check_settings(x, y)?;
        let mut out = vec![0.0; self.outcomes_b];
        for (b, slot) in out.iter_mut().enumerate() {
            for a in 0..self.outcomes_a {
                *slot += self.probs[self.idx(x, y, a, b)];
            }
        }
        Ok(out)
    }

    /// Checks that each side's marginal is independent of the remote setting
    /// within `tol`; returns all violations, worst deviation first.
    pub fn no_signaling_check_with_tol(&self, tol: f64) -> Vec<SignalingViolation> {
        let mut violations = Vec::new();
        // Side A's marginal must not depend on y.
        for x in 0..self.settings_a {
            let reference = self.marginal_a(x, 0).expect("in range");
            for y in 1..self.settings_b {
                let m = self.marginal_a(x, y).expect("in range");
                let dev = max_abs_diff(&reference, &m);
                if dev > tol {
                    violations.push(SignalingViolation {
                        side: 'a',
                        own_setting: x,
                        remote_settings: (0, y),
                        max_deviation: dev,
                    });
                }
            }
        }
        // Side B's marginal must not depend on x.
        for y in 0..self.settings_b {
            let reference = self.marginal_b(0, y).expect("in range");
            for x in 1..self.settings_a {
                let m = self.marginal_b(x, y).expect("in range");
                let dev = max_abs_diff(&reference, &m);
                if dev > tol {
                    violations.push(SignalingViolation {
                        side: 'b',
                        own_setting: y,
                        remote_settings: (0, x),
                        max_deviation: dev,
                    });
                }
            }
        }
        violations.sort_by(|u, v| v.max_deviation.total_cmp(&u.max_deviation));
        violations
    }

    /// `no_signaling_check_with_tol` at the construction tolerance 1e-9.
    pub fn no_signaling_check(&self) -> Vec<SignalingViolation> {
        self.no_signaling_check_with_tol(NORM_TOL)
    }

    /// Binary correlator `E(x,y) = P(00) + P(11) - P(01) - P(10)` under the
    /// 0 -> +1, 1 -> -1 outcome convention. Errors on non-binary alphabets.
    pub fn correlator(&self, x: usize, y: usize) -> Result<f64> {
        if self.outcomes_a != 2 || self.outcomes_b != 2 {
            return Err(Error::Shape(
                "correlators require binary outcomes on both sides".into(),
            ));
        }
        self.check_settings(x, y)?;
        Ok(
            self.probs[self.idx(x, y, 0, 0)] + self.probs[self.idx(x, y, 1, 1)]
                - self.probs[self.idx(x, y, 0, 1)]
                - self.probs[self.idx(x, y, 1, 0)],
        )
    }

    /// Largest absolute entrywise difference between two same-shape tables.
    pub fn max_abs_difference(&self, other: &CorrelationTable) -> Result<f64> {
        if self.settings_a != other.settings_a
            || self.settings_b != other.settings_b
            || self.outcomes_a != other.outcomes_a
            || self.outcomes_b != other.outcomes_b
        {
            return Err(Error::Shape("tables have different shapes".into()));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max))
    }
}

fn max_abs_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// On-disk table format: nested probabilities indexed `[x][y][a][b]`.
/// Round-trips bit-exactly through JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableFile {
    pub settings_a: usize,
    pub settings_b: usize,
    pub outcomes_a: usize,
    pub outcomes_b: usize,
    pub probs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<&CorrelationTable> for TableFile {
    fn from(t: &CorrelationTable) -> Self {
        let probs = (0..t.settings_a)
            .map(|x| {
                (0..t.settings_b)
                    .map(|y| {
                        (0..t.outcomes_a)
                            .map(|a| {
                                (0..t.outcomes_b)
                                    .map(|b| t.probs[t.idx(x, y, a, b)])
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        TableFile {
            settings_a: t.settings_a,
            settings_b: t.settings_b,
            outcomes_a: t.outcomes_a,
            outcomes_b: t.outcomes_b,
            probs,
        }
    }
}

impl TryFrom<&TableFile> for CorrelationTable {
    type Error = Error;

    fn try_from(f: &TableFile) -> Result<CorrelationTable> {
        let mut flat =
            Vec::with_capacity(f.settings_a * f.settings_b * f.outcomes_a * f.outcomes_b);
        if f.probs.len() != f.settings_a {
            return Err(Error::Shape("probs outer length != settings_a".into()));
        }
        for row_x in &f.probs {
            if row_x.len() != f.settings_b {
                return Err(Error::Shape("probs[x] length != settings_b".into()));
            }
            for row_y in row_x {
                if row_y.len() != f.outcomes_a {
                    return Err(Error::Shape("probs[x][y] length != outcomes_a".into()));
                }
                for row_a in row_y {
                    if row_a.len() != f.outcomes_b {
                        return Err(Error::Shape("probs[x][y][a] length != outcomes_b".into()));
                    }
                    flat.extend_from_slice(row_a);
                }
            }
        }
        CorrelationTable::build(
            f.settings_a,
            f.settings_b,
            f.outcomes_a,
            f.outcomes_b,
            flat,
            false,
        )
    }
}

impl CorrelationTable {
    /// Serializes in the on-disk nested format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TableFile::from(self)).expect("tables always serialize")
    }

    /// Parses the on-disk nested format, revalidating all invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text)?;
        CorrelationTable::try_from(&file)
    }
}
