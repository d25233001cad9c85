//! Monte Carlo simulation of time-bin coincidences and fringe scans.

use serde::{Deserialize, Serialize};

use super::FransonConfig;
use crate::correlations::CorrelationTable;
use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// Pairs per deterministic RNG chunk. Chunk `i` always uses the substream
/// `RngStream::new(seed, i)`, so results never depend on how chunks are
/// distributed over workers.
const CHUNK: u64 = 1 << 16;

/// Detection slot relative to the coincidence midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Early,
    Central,
    Late,
}

/// One simulated pair. `None` detection fields model photons lost to
/// detector inefficiency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub x: usize,
    pub y: usize,
    pub slot_a: Option<Slot>,
    pub slot_b: Option<Slot>,
    pub outcome_a: Option<i8>,
    pub outcome_b: Option<i8>,
    /// True iff both detections landed in the matched central slot.
    pub kept: bool,
}

/// Aggregated kept-coincidence statistics for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Configuration echo, including the seed.
    pub config: FransonConfig,
    /// Kept-coincidence counts indexed `[x][y][a][b]`, outcome index 0
    /// meaning +1 and 1 meaning -1.
    pub counts: Vec<Vec<[[u64; 2]; 2]>>,
    pub total_pairs: u64,
    pub kept_pairs: u64,
    pub kept_fraction: f64,
}

impl RunSummary {
    /// Empirical kept-subensemble table: per-(x,y) relative frequencies.
    /// Errors when some setting pair kept no coincidences.
    pub fn kept_table(&self) -> Result<CorrelationTable> {
        let nx = self.counts.len();
        let ny = self.counts[0].len();
        let mut probs = vec![0.0; nx * ny * 4];
        for (x, row) in self.counts.iter().enumerate() {
            for (y, cell) in row.iter().enumerate() {
                let total: u64 = cell.iter().flatten().sum();
                if total == 0 {
                    return Err(Error::EmptyCell(format!(
                        "no kept coincidences at settings ({x}, {y})"
                    )));
                }
                for a in 0..2 {
                    for b in 0..2 {
                        probs[((x * ny + y) * 2 + a) * 2 + b] = cell[a][b] as f64 / total as f64;
                    }
                }
            }
        }
        CorrelationTable::new(nx, ny, 2, 2, probs)
    }
}

/// Everything deterministic about one simulated pair, computed from the
/// fixed eight-draw sequence so the stream stays aligned whatever happens.
fn simulate_pair(config: &FransonConfig, rng: &mut RngStream) -> RunRecord {
    let nx = config.phases_a.len() as u64;
    let ny = config.phases_b.len() as u64;
    let x = rng.next_below(nx) as usize;
    let y = rng.next_below(ny) as usize;
    let path_a_long = rng.next_f64() < 0.5;
    let path_b_long = rng.next_f64() < 0.5;
    let detected_a = rng.next_f64() < config.detector_efficiency;
    let detected_b = rng.next_f64() < config.detector_efficiency;
    let sign_a: i8 = if rng.next_f64() < 0.5 { 1 } else { -1 };
    let u = rng.next_f64();

    let paths_equal = path_a_long == path_b_long;
    // Equal paths are indistinguishable and interfere: both photons land in
    // the central slot. A long/short mismatch shifts one detection a full
    // arm imbalance away from the other, into a side peak.
    let (slot_a, slot_b) = if paths_equal {
        (Slot::Central, Slot::Central)
    } else if path_a_long {
        (Slot::Late, Slot::Early)
    } else {
        (Slot::Early, Slot::Late)
    };

    let outcome_a = sign_a;
    let outcome_b = if paths_equal {
        // Kept-subensemble correlations: E = V cos(phi_A + phi_B).
        let e = config.visibility * (config.phases_a[x] + config.phases_b[y]).cos();
        let p_equal = (1.0 + e) / 2.0;
        if u < p_equal {
            sign_a
        } else {
            -sign_a
        }
    } else {
        // Side peaks carry no interference: independent fair outcome.
        if u < 0.5 {
            1
        } else {
            -1
        }
    };

    let kept = paths_equal && detected_a && detected_b;
    RunRecord {
        x,
        y,
        slot_a: detected_a.then_some(slot_a),
        slot_b: detected_b.then_some(slot_b),
        outcome_a: detected_a.then_some(outcome_a),
        outcome_b: detected_b.then_some(outcome_b),
        kept,
    }
}

fn empty_counts(nx: usize, ny: usize) -> Vec<Vec<[[u64; 2]; 2]>> {
    vec![vec![[[0u64; 2]; 2]; ny]; nx]
}

fn accumulate(counts: &mut [Vec<[[u64; 2]; 2]>], kept: &mut u64, r: &RunRecord) {
    if r.kept {
        *kept += 1;
        let a = if r.outcome_a == Some(1) { 0 } else { 1 };
        let b = if r.outcome_b == Some(1) { 0 } else { 1 };
        counts[r.x][r.y][a][b] += 1;
    }
}

fn simulate_chunk(
    config: &FransonConfig,
    chunk_idx: u64,
    pairs: u64,
) -> (Vec<Vec<[[u64; 2]; 2]>>, u64) {
    let mut rng = RngStream::new(config.seed, chunk_idx);
    let mut counts = empty_counts(config.phases_a.len(), config.phases_b.len());
    let mut kept = 0u64;
    for _ in 0..pairs {
        let r = simulate_pair(config, &mut rng);
        accumulate(&mut counts, &mut kept, &r);
    }
    (counts, kept)
}

/// Runs the full Monte Carlo across `workers` threads. The RNG is chunked,
/// so the summary is bit-identical for every worker count.
pub fn simulate_run(config: &FransonConfig, workers: usize) -> Result<RunSummary> {
    config.validate()?;
    let workers = workers.max(1);
    let n_chunks = config.n_pairs.div_ceil(CHUNK);
    let chunk_pairs = |idx: u64| -> u64 {
        if idx + 1 == n_chunks {
            config.n_pairs - idx * CHUNK
        } else {
            CHUNK
        }
    };

    let mut merged = empty_counts(config.phases_a.len(), config.phases_b.len());
    let mut kept_total = 0u64;
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers as u64 {
            let config = &config;
            handles.push(scope.spawn(move || {
                // Worker w takes chunks w, w + workers, w + 2*workers, ...;
                // merging is associative commutative counting, so the
                // assignment does not affect the result.
                let mut counts = empty_counts(config.phases_a.len(), config.phases_b.len());
                let mut kept = 0u64;
                let mut idx = w;
                while idx < n_chunks {
                    let (c, k) = simulate_chunk(config, idx, chunk_pairs(idx));
                    for (dst_row, src_row) in counts.iter_mut().zip(c) {
                        for (dst, src) in dst_row.iter_mut().zip(src_row) {
                            for a in 0..2 {
                                for b in 0..2 {
                                    dst[a][b] += src[a][b];
                                }
                            }
                        }
                    }
                    kept += k;
                    idx += workers as u64;
                }
                (counts, kept)
            }));
        }
        for handle in handles {
            let (counts, kept) = handle.join().expect("simulation worker panicked");
            for (dst_row, src_row) in merged.iter_mut().zip(counts) {
                for (dst, src) in dst_row.iter_mut().zip(src_row) {
                    for a in 0..2 {
                        for b in 0..2 {
                            dst[a][b] += src[a][b];
                        }
                    }
                }
            }
            kept_total += kept;
        }
    });

    Ok(RunSummary {
        config: config.clone(),
        counts: merged,
        total_pairs: config.n_pairs,
        kept_pairs: kept_total,
        kept_fraction: kept_total as f64 / config.n_pairs as f64,
    })
}

/// Single-threaded variant that also returns the first `max_records`
/// per-pair records. The summary is identical to `simulate_run`'s.
pub fn simulate_records(
    config: &FransonConfig,
    max_records: usize,
) -> Result<(Vec<RunRecord>, RunSummary)> {
    config.validate()?;
    let n_chunks = config.n_pairs.div_ceil(CHUNK);
    let mut records = Vec::with_capacity(max_records.min(config.n_pairs as usize));
    let mut counts = empty_counts(config.phases_a.len(), config.phases_b.len());
    let mut kept = 0u64;
    for idx in 0..n_chunks {
        let pairs = if idx + 1 == n_chunks {
            config.n_pairs - idx * CHUNK
        } else {
            CHUNK
        };
        let mut rng = RngStream::new(config.seed, idx);
        for _ in 0..pairs {
            let r = simulate_pair(config, &mut rng);
            accumulate(&mut counts, &mut kept, &r);
            if records.len() < max_records {
                records.push(r);
            }
        }
    }
    let summary = RunSummary {
        config: config.clone(),
        counts,
        total_pairs: config.n_pairs,
        kept_pairs: kept,
        kept_fraction: kept as f64 / config.n_pairs as f64,
    };
    Ok((records, summary))
}

/// One scanned phase point of a fringe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub phase_a_rad: f64,
    pub n_kept: u64,
    /// Kept coincidences with equal outcomes.
    pub n_equal: u64,
    pub n_unequal: u64,
    /// Empirical correlator (n_equal - n_unequal) / n_kept.
    pub e_hat: f64,
}

/// Simulates the configured run (side B fixed to its single phase) and
/// reduces it to one fringe point per scanned A phase.
pub fn scan_fringe(config: &FransonConfig, workers: usize) -> Result<Vec<FringePoint>> {
    if config.phases_b.len() != 1 {
        return Err(Error::Config(format!(
            "a fringe scan needs exactly one fixed phase on side B, got {}",
            config.phases_b.len()
        )));
    }
    let summary = simulate_run(config, workers)?;
    Ok(fringe_from_summary(&summary))
}

/// Reduces an existing run summary (side B fixed to its single phase) to one
/// fringe point per scanned A phase, without re-simulating.
pub fn fringe_from_summary(summary: &RunSummary) -> Vec<FringePoint> {
    summary
        .counts
        .iter()
        .enumerate()
        .map(|(x, row)| {
            let cell = &row[0];
            let n_equal = cell[0][0] + cell[1][1];
            let n_unequal = cell[0][1] + cell[1][0];
            let n_kept = n_equal + n_unequal;
            FringePoint {
                phase_a_rad: summary.config.phases_a[x],
                n_kept,
                n_equal,
                n_unequal,
                e_hat: if n_kept == 0 {
                    0.0
                } else {
                    (n_equal as f64 - n_unequal as f64) / n_kept as f64
                },
            }
        })
        .collect()
}

/// Writes fringe points as CSV with the documented column set.
pub fn write_fringe_csv(points: &[FringePoint], mut out: impl std::io::Write) -> Result<()> {
    writeln!(out, "phase_a_rad,n_kept,n_equal,n_unequal,e_hat")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.phase_a_rad, p.n_kept, p.n_equal, p.n_unequal, p.e_hat
        )?;
    }
    Ok(())
}

/// Least-squares amplitude of `e_hat ~ A cos(phase_a + phase_b)`:
/// `A = sum(e c) / sum(c^2)` over the scanned points.
pub fn fit_fringe(points: &[FringePoint], phase_b: f64) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for p in points {
        let c = (p.phase_a_rad + phase_b).cos();
        num += p.e_hat * c;
        den += c * c;
    }
    if den == 0.0 {
        return Err(Error::Domain(
            "all scanned phases sit at fringe zeros; amplitude is undetermined".into(),
        ));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::franson::quantum_postselected_table;

    fn scan_config(visibility: f64, n_pairs: u64) -> FransonConfig {
        let mut c = FransonConfig::ideal(
            1.2e-9,
            (0..32)
                .map(|k| k as f64 * std::f64::consts::TAU / 32.0)
                .collect(),
            vec![0.0],
            n_pairs,
            0xF2A9,
        );
        c.visibility = visibility;
        c
    }

    #[test]
    fn ideal_run_keeps_half_the_pairs() {
        let config = FransonConfig::ideal(1.2e-9, vec![0.0], vec![0.0], 1_000_000, 42);
        let summary = simulate_run(&config, 4).unwrap();
        // Equal-path probability is exactly 1/2; 3 sigma of the kept
        // fraction at n = 1e6 is 0.0015.
        assert!((summary.kept_fraction - 0.5).abs() < 0.002);
    }

    #[test]
    fn aligned_phases_correlate_perfectly_when_ideal() {
        let config = FransonConfig::ideal(1.2e-9, vec![0.5], vec![-0.5], 100_000, 9);
        let summary = simulate_run(&config, 2).unwrap();
        let t = summary.kept_table().unwrap();
        // V = 1 and cos = 1: unequal outcomes are impossible, not merely rare.
        assert_eq!(summary.counts[0][0][0][1], 0);
        assert_eq!(summary.counts[0][0][1][0], 0);
        assert_eq!(t.correlator(0, 0).unwrap(), 1.0);
    }

    #[test]
    fn same_seed_gives_identical_summaries() {
        let config = scan_config(0.9, 200_000);
        let s1 = simulate_run(&config, 3).unwrap();
        let s2 = simulate_run(&config, 3).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn worker_count_does_not_change_the_summary() {
        let config = scan_config(0.9, 150_000);
        let s1 = simulate_run(&config, 1).unwrap();
        let s4 = simulate_run(&config, 4).unwrap();
        assert_eq!(s1, s4);
        let (_, sr) = simulate_records(&config, 10).unwrap();
        assert_eq!(s1, sr);
    }

    #[test]
    fn detector_inefficiency_thins_the_kept_fraction() {
        let mut config = FransonConfig::ideal(1.2e-9, vec![0.0], vec![0.0], 400_000, 5);
        config.detector_efficiency = 0.8;
        let summary = simulate_run(&config, 2).unwrap();
        // Expected kept fraction 0.5 * 0.8^2 = 0.32; 4 sigma at n = 4e5 is
        // about 0.003.
        assert!((summary.kept_fraction - 0.32).abs() < 0.003);
    }

    #[test]
    fn records_match_slot_semantics() {
        let config = FransonConfig::ideal(1.2e-9, vec![0.1, 0.7], vec![0.2], 5_000, 31);
        let (records, summary) = simulate_records(&config, 5_000).unwrap();
        assert_eq!(records.len(), 5_000);
        let mut kept_seen = 0u64;
        for r in &records {
            if r.kept {
                kept_seen += 1;
                assert_eq!(r.slot_a, Some(Slot::Central));
                assert_eq!(r.slot_b, Some(Slot::Central));
                assert!(r.outcome_a.is_some() && r.outcome_b.is_some());
            }
            if let (Some(sa), Some(sb)) = (r.slot_a, r.slot_b) {
                match (sa, sb) {
                    (Slot::Central, Slot::Central) => {}
                    (Slot::Early, Slot::Late) | (Slot::Late, Slot::Early) => {
                        assert!(!r.kept, "side-peak pairs must be discarded");
                    }
                    other => panic!("impossible slot pair {other:?}"),
                }
            }
        }
        assert_eq!(kept_seen, summary.kept_pairs);
    }

    #[test]
    fn zero_pairs_is_rejected() {
        let mut config = FransonConfig::ideal(1.2e-9, vec![0.0], vec![0.0], 1, 0);
        config.n_pairs = 0;
        assert!(simulate_run(&config, 1).is_err());
    }

    #[test]
    fn kept_frequencies_track_the_quantum_table() {
        let mut config = FransonConfig::ideal(
            1.2e-9,
            vec![0.0, std::f64::consts::FRAC_PI_2, 1.1],
            vec![0.3, 2.0],
            300_000,
            77,
        );
        config.visibility = 0.85;
        let summary = simulate_run(&config, 4).unwrap();
        let quantum = quantum_postselected_table(&config).unwrap();
        for (x, row) in summary.counts.iter().enumerate() {
            for (y, cell) in row.iter().enumerate() {
                let total: u64 = cell.iter().flatten().sum();
                for a in 0..2 {
                    for b in 0..2 {
                        let p = quantum.prob(x, y, a, b).unwrap();
                        let freq = cell[a][b] as f64 / total as f64;
                        let sigma = (p * (1.0 - p) / total as f64).sqrt();
                        assert!(
                            (freq - p).abs() <= 4.0 * sigma + 1e-12,
                            "cell ({x},{y},{a},{b}): freq {freq} vs p {p} (sigma {sigma})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn fringe_scan_fits_the_configured_visibility() {
        let config = scan_config(0.95, 640_000);
        let points = scan_fringe(&config, 4).unwrap();
        assert_eq!(points.len(), 32);
        let amplitude = fit_fringe(&points, 0.0).unwrap();
        assert!(
            (amplitude - 0.95).abs() < 0.01,
            "fitted amplitude {amplitude}"
        );
        // Residuals stay within statistical scatter: RMS < 5 * mean sigma.
        let mut rms = 0.0;
        let mut var = 0.0;
        for p in &points {
            let r = p.e_hat - amplitude * p.phase_a_rad.cos();
            rms += r * r;
            var += (1.0 - p.e_hat * p.e_hat).max(1e-12) / p.n_kept as f64;
        }
        let rms = (rms / points.len() as f64).sqrt();
        let sigma = (var / points.len() as f64).sqrt();
        assert!(rms < 5.0 * sigma, "rms {rms} vs sigma {sigma}");
    }

    #[test]
    fn zero_visibility_fringe_is_flat() {
        let config = scan_config(0.0, 320_000);
        let points = scan_fringe(&config, 4).unwrap();
        for p in &points {
            let sigma = 1.0 / (p.n_kept as f64).sqrt();
            assert!(
                p.e_hat.abs() < 3.0 * sigma,
                "phase {}: e_hat {} vs 3 sigma {}",
                p.phase_a_rad,
                p.e_hat,
                3.0 * sigma
            );
        }
    }

    #[test]
    fn fringe_scan_requires_single_remote_phase() {
        let mut config = scan_config(0.9, 1_000);
        config.phases_b = vec![0.0, 1.0];
        assert!(scan_fringe(&config, 1).is_err());
    }

    #[test]
    fn fringe_csv_has_documented_columns() {
        let points = vec![
            FringePoint {
                phase_a_rad: 0.0,
                n_kept: 10,
                n_equal: 9,
                n_unequal: 1,
                e_hat: 0.8,
            },
            FringePoint {
                phase_a_rad: 0.5,
                n_kept: 8,
                n_equal: 4,
                n_unequal: 4,
                e_hat: 0.0,
            },
        ];
        let mut buf = Vec::new();
        write_fringe_csv(&points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "phase_a_rad,n_kept,n_equal,n_unequal,e_hat"
        );
        assert_eq!(lines.next().unwrap(), "0,10,9,1,0.8");
        assert_eq!(lines.next().unwrap(), "0.5,8,4,4,0");
    }

    #[test]
    fn fitted_fringe_admits_an_exact_local_model() {
        // The end-to-end single-setting demonstration: simulate a scan with
        // one fixed remote phase, fit the fringe amplitude, build the
        // fitted table, and reproduce it exactly with an explicit
        // common-cause model. Eight phases keep the model's strategy
        // product (2 * 2^8 components) small.
        let mut config = scan_config(0.9, 320_000);
        config.phases_a = (0..8)
            .map(|k| k as f64 * std::f64::consts::TAU / 8.0)
            .collect();
        let points = scan_fringe(&config, 4).unwrap();
        let amplitude = fit_fringe(&points, 0.0).unwrap();
        let phases: Vec<f64> = points.iter().map(|p| p.phase_a_rad).collect();
        let fitted = CorrelationTable::from_fn(phases.len(), 1, 2, 2, |x, _, a, b| {
            let sign = if a == b { 1.0 } else { -1.0 };
            (1.0 + sign * amplitude * phases[x].cos()) / 4.0
        })
        .unwrap();
        let model = crate::lhv::build_single_setting_model(&fitted).unwrap();
        let back = model.predict(2, 2).unwrap();
        assert!(fitted.max_abs_difference(&back).unwrap() < 1e-9);
    }
}
