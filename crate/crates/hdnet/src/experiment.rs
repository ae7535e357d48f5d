//! Evaluation protocol: splits, single runs, and parameter sweeps.
//!
//! The protocol is transductive. Every node of the graph participates in
//! encoding, held-out nodes included: their codes exist and their presence
//! shapes their neighbors' aggregates. What held-out nodes never do is
//! donate outcomes; the match pool is built strictly from in-sample units,
//! so an out-of-sample estimate can only consult in-sample factuals.
//!
//! One experiment seed fans out to independent child seeds for the encoder,
//! the role vectors, tie-breaking, and the split. Changing, say, the split
//! fraction therefore never perturbs the encoder, and two runs with the
//! same seed agree bit for bit.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{GenConfig, NetDataset};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_in_sample, estimate_out_of_sample, EffectEstimate, MatchConfig, MatchPool,
};
use crate::graphenc::{encode_graph, HopDepth, RoleVectors};
use crate::hv::Hypervector;
use crate::metrics::{eps_ate, eps_pehe};
use crate::rhpt::RhptEncoder;
use crate::rng::{derive_seed, HdRng};

/// Experiment-level child seed tags. Disjoint from the generation stage
/// tags on purpose: a dataset and a run may share a seed without any
/// stream colliding.
const ENCODER_TAG: u64 = 101;
const ROLES_TAG: u64 = 102;
const TIES_TAG: u64 = 103;
const SPLIT_TAG: u64 = 104;

/// An in-sample / held-out partition of unit ids, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub in_sample: Vec<u32>,
    pub out_sample: Vec<u32>,
}

/// Partition 0..n by shuffling and holding out round(fraction * n) units.
/// Both sides must end up nonempty.
pub fn make_split(n: usize, fraction: f64, seed: u64) -> Result<Split> {
    if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
        return Err(Error::param(
            "fraction",
            format!("held-out fraction must lie in [0, 1], got {fraction}"),
        ));
    }
    let out_n = (fraction * n as f64).round() as usize;
    if out_n == 0 || out_n >= n {
        return Err(Error::DegenerateSplit {
            reason: format!("{out_n} held-out of {n} units leaves an empty side"),
        });
    }
    let mut ids: Vec<u32> = (0..n as u32).collect();
    let mut rng = HdRng::from_seed(seed);
    // Fisher-Yates, back to front; pinned so splits are portable.
    use rand::Rng;
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    let mut out_sample: Vec<u32> = ids[..out_n].to_vec();
    let mut in_sample: Vec<u32> = ids[out_n..].to_vec();
    out_sample.sort_unstable();
    in_sample.sort_unstable();
    Ok(Split {
        in_sample,
        out_sample,
    })
}

/// Everything a single run needs besides the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunParams {
    /// Code dimension.
    pub beta: usize,
    /// Hyperplane offset scale; None applies the auto rule (three times the
    /// largest covariate row norm).
    pub lambda: Option<f64>,
    pub depth: HopDepth,
    pub match_config: MatchConfig,
    /// Held-out fraction of units.
    pub split_fraction: f64,
    /// Master seed; encoder, roles, tie-breaking and split all derive from
    /// it independently.
    pub seed: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            beta: 10_000,
            lambda: None,
            depth: HopDepth::Two,
            match_config: MatchConfig::default(),
            split_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Metrics and timings of one run, flat for serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub d: usize,
    pub beta: usize,
    pub lambda: f64,
    pub depth: u8,
    pub k: usize,
    pub weighting: String,
    pub split_fraction: f64,
    pub seed: u64,
    pub in_sample_units: usize,
    pub out_sample_units: usize,
    pub ate_true: f64,
    pub eps_ate_in: f64,
    pub eps_pehe_in: f64,
    pub eps_ate_out: f64,
    pub eps_pehe_out: f64,
    pub encode_ms: f64,
    pub match_ms: f64,
    pub total_ms: f64,
}

fn subset_by_ids(values: &[f64], ids: &[u32]) -> Vec<f64> {
    ids.iter().map(|&i| values[i as usize]).collect()
}

/// Covariate encoding plus graph contextualization, exactly as a full run
/// performs it: same child seeds, same tie streams. The returned encoder
/// carries the resolved lambda.
pub fn build_codes(
    ds: &NetDataset,
    beta: usize,
    lambda: Option<f64>,
    depth: HopDepth,
    seed: u64,
) -> Result<(RhptEncoder, RoleVectors, Vec<Hypervector>)> {
    if beta == 0 {
        return Err(Error::param("beta", "code dimension must be positive"));
    }
    if ds.is_empty() {
        return Err(Error::param("dataset", "dataset has no units"));
    }
    let d = ds.x[0].len();
    let lambda = match lambda {
        Some(l) => l,
        None => RhptEncoder::auto_lambda(&ds.x),
    };
    let encoder = RhptEncoder::new(d, beta, lambda, derive_seed(seed, ENCODER_TAG))?;
    let r = encoder.encode_batch(&ds.x)?;
    let mut role_rng = HdRng::from_seed(derive_seed(seed, ROLES_TAG));
    let roles = RoleVectors::generate(&mut role_rng, beta)?;
    let z = encode_graph(&ds.graph, &r, &roles, depth, derive_seed(seed, TIES_TAG))?;
    Ok((encoder, roles, z))
}

/// Encode, split, match, and score one dataset. Returns the report plus the
/// in-sample and out-of-sample estimates (ids inside each estimate).
pub fn run_experiment(
    ds: &NetDataset,
    params: &RunParams,
) -> Result<(EvalReport, EffectEstimate, EffectEstimate)> {
    params.match_config.validate()?;
    let n = ds.len();
    let t_start = Instant::now();

    let (encoder, _roles, z) =
        build_codes(ds, params.beta, params.lambda, params.depth, params.seed)?;
    let d = encoder.input_dim();
    let lambda = encoder.lambda();
    let encode_ms = t_start.elapsed().as_secs_f64() * 1e3;

    let split = make_split(n, params.split_fraction, derive_seed(params.seed, SPLIT_TAG))?;

    let t_match = Instant::now();
    let pool = MatchPool::new(
        split.in_sample.clone(),
        split.in_sample.iter().map(|&i| z[i as usize].clone()).collect(),
        split.in_sample.iter().map(|&i| ds.treated[i as usize]).collect(),
        split.in_sample.iter().map(|&i| ds.y_factual[i as usize]).collect(),
    )?;
    let est_in = estimate_in_sample(&pool, &params.match_config)?;
    let queries: Vec<(u32, crate::hv::Hypervector)> = split
        .out_sample
        .iter()
        .map(|&i| (i, z[i as usize].clone()))
        .collect();
    let est_out = estimate_out_of_sample(&pool, &queries, &params.match_config)?;
    let match_ms = t_match.elapsed().as_secs_f64() * 1e3;

    let true_in = subset_by_ids(&ds.ite_true, &split.in_sample);
    let true_out = subset_by_ids(&ds.ite_true, &split.out_sample);
    let report = EvalReport {
        n,
        d,
        beta: params.beta,
        lambda,
        depth: params.depth.as_u8(),
        k: params.match_config.k,
        weighting: params.match_config.weighting.to_string(),
        split_fraction: params.split_fraction,
        seed: params.seed,
        in_sample_units: split.in_sample.len(),
        out_sample_units: split.out_sample.len(),
        ate_true: ds.ite_true.iter().sum::<f64>() / n as f64,
        eps_ate_in: eps_ate(&est_in.ite_hat, &true_in)?,
        eps_pehe_in: eps_pehe(&est_in.ite_hat, &true_in)?,
        eps_ate_out: eps_ate(&est_out.ite_hat, &true_out)?,
        eps_pehe_out: eps_pehe(&est_out.ite_hat, &true_out)?,
        encode_ms,
        match_ms,
        total_ms: t_start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((report, est_in, est_out))
}

/// One sweep cell: a dataset configuration evaluated at one hop depth.
/// The config's own seed is ignored; each run stamps its run seed in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub label: String,
    pub config: GenConfig,
    pub depth: HopDepth,
}

/// Per-run metric row. Deliberately excludes timings so identical sweeps
/// produce identical rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: String,
    pub seed: u64,
    pub eps_ate_in: f64,
    pub eps_pehe_in: f64,
    pub eps_ate_out: f64,
    pub eps_pehe_out: f64,
}

/// Per-run wall-clock row, reported separately from the metrics.
#[derive(Debug, Clone)]
pub struct TimingRow {
    pub cell: String,
    pub seed: u64,
    pub encode_ms: f64,
    pub match_ms: f64,
    pub total_ms: f64,
}

/// Per-cell mean and standard error of each metric across seeds.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub cell: String,
    pub runs: usize,
    pub eps_ate_in_mean: f64,
    pub eps_ate_in_se: f64,
    pub eps_pehe_in_mean: f64,
    pub eps_pehe_in_se: f64,
    pub eps_ate_out_mean: f64,
    pub eps_ate_out_se: f64,
    pub eps_pehe_out_mean: f64,
    pub eps_pehe_out_se: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub timings: Vec<TimingRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Mean and standard error (sample sd over sqrt(runs); zero for one run).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Run every cell at every seed. Row order is cells outer, seeds inner.
/// Each run regenerates its dataset with the run seed stamped into the
/// cell config and evaluates with the same seed as experiment master, so a
/// sweep is a pure function of (cells, seeds, base parameters).
pub fn sweep(cells: &[SweepCell], seeds: &[u64], base: &RunParams) -> Result<SweepOutcome> {
    if cells.is_empty() {
        return Err(Error::param("cells", "nothing to sweep"));
    }
    if seeds.is_empty() {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    let mut rows = Vec::with_capacity(cells.len() * seeds.len());
    let mut timings = Vec::with_capacity(cells.len() * seeds.len());
    let mut aggregates = Vec::with_capacity(cells.len());
    for cell in cells {
        let mut cell_metrics: [Vec<f64>; 4] = Default::default();
        for &seed in seeds {
            let mut cfg = cell.config.clone();
            cfg.seed = seed;
            let ds = crate::datagen::generate(&cfg)?;
            let params = RunParams {
                depth: cell.depth,
                seed,
                ..base.clone()
            };
            let (report, _, _) = run_experiment(&ds, &params)?;
            rows.push(SweepRow {
                cell: cell.label.clone(),
                seed,
                eps_ate_in: report.eps_ate_in,
                eps_pehe_in: report.eps_pehe_in,
                eps_ate_out: report.eps_ate_out,
                eps_pehe_out: report.eps_pehe_out,
            });
            timings.push(TimingRow {
                cell: cell.label.clone(),
                seed,
                encode_ms: report.encode_ms,
                match_ms: report.match_ms,
                total_ms: report.total_ms,
            });
            cell_metrics[0].push(report.eps_ate_in);
            cell_metrics[1].push(report.eps_pehe_in);
            cell_metrics[2].push(report.eps_ate_out);
            cell_metrics[3].push(report.eps_pehe_out);
        }
        let [a_in, p_in, a_out, p_out] = &cell_metrics;
        let (eps_ate_in_mean, eps_ate_in_se) = mean_and_se(a_in);
        let (eps_pehe_in_mean, eps_pehe_in_se) = mean_and_se(p_in);
        let (eps_ate_out_mean, eps_ate_out_se) = mean_and_se(a_out);
        let (eps_pehe_out_mean, eps_pehe_out_se) = mean_and_se(p_out);
        aggregates.push(AggregateRow {
            cell: cell.label.clone(),
            runs: seeds.len(),
            eps_ate_in_mean,
            eps_ate_in_se,
            eps_pehe_in_mean,
            eps_pehe_in_se,
            eps_ate_out_mean,
            eps_ate_out_se,
            eps_pehe_out_mean,
            eps_pehe_out_se,
        });
    }
    Ok(SweepOutcome {
        rows,
        timings,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GraphModel};

    fn quick_config(seed: u64) -> GenConfig {
        GenConfig {
            n: 120,
            d: 20,
            sparsity: 4,
            graph_model: GraphModel::ErdosRenyi {
                expected_degree: 5.0,
            },
            seed,
            ..GenConfig::default()
        }
    }

    fn quick_params(seed: u64) -> RunParams {
        RunParams {
            beta: 512,
            seed,
            ..RunParams::default()
        }
    }

    #[test]
    fn split_sizes_are_exact_and_disjoint() {
        let split = make_split(100, 0.2, 5).unwrap();
        assert_eq!(split.out_sample.len(), 20);
        assert_eq!(split.in_sample.len(), 80);
        let mut all: Vec<u32> = split
            .in_sample
            .iter()
            .chain(&split.out_sample)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<u32>>());

        // Rounding, not truncation.
        let split = make_split(10, 0.25, 5).unwrap();
        assert_eq!(split.out_sample.len(), 3);
        let split = make_split(10, 0.24, 5).unwrap();
        assert_eq!(split.out_sample.len(), 2);
    }

    #[test]
    fn split_is_deterministic_in_seed() {
        let a = make_split(50, 0.2, 9).unwrap();
        let b = make_split(50, 0.2, 9).unwrap();
        let c = make_split(50, 0.2, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_splits_are_errors() {
        assert!(matches!(
            make_split(10, 0.0, 0),
            Err(Error::DegenerateSplit { .. })
        ));
        assert!(matches!(
            make_split(10, 1.0, 0),
            Err(Error::DegenerateSplit { .. })
        ));
        assert!(make_split(10, 0.02, 0).is_err()); // rounds to zero held-out
        assert!(make_split(10, 1.5, 0).is_err());
    }

    #[test]
    fn run_experiment_is_deterministic() {
        let ds = generate(&quick_config(1)).unwrap();
        let (ra, ia, oa) = run_experiment(&ds, &quick_params(7)).unwrap();
        let (rb, ib, ob) = run_experiment(&ds, &quick_params(7)).unwrap();
        assert_eq!(ia.ite_hat, ib.ite_hat);
        assert_eq!(oa.ite_hat, ob.ite_hat);
        assert_eq!(ra.eps_pehe_in, rb.eps_pehe_in);
        assert_eq!(ra.eps_ate_out, rb.eps_ate_out);
        // Different experiment seed, same dataset: different split, hence
        // different estimates.
        let (_, ic, _) = run_experiment(&ds, &quick_params(8)).unwrap();
        assert_ne!(ia.ids, ic.ids);
    }

    #[test]
    fn report_counts_match_split() {
        let ds = generate(&quick_config(2)).unwrap();
        let (report, est_in, est_out) = run_experiment(&ds, &quick_params(3)).unwrap();
        assert_eq!(report.n, 120);
        assert_eq!(report.out_sample_units, 24); // round(0.2 * 120)
        assert_eq!(report.in_sample_units, 96);
        assert_eq!(est_in.ids.len(), 96);
        assert_eq!(est_out.ids.len(), 24);
        assert!(report.lambda > 0.0);
        assert_eq!(report.depth, 2);
    }

    #[test]
    fn factual_identity_holds_in_sample() {
        let ds = generate(&quick_config(4)).unwrap();
        let (_, est_in, _) = run_experiment(&ds, &quick_params(5)).unwrap();
        for (row, &id) in est_in.ids.iter().enumerate() {
            let i = id as usize;
            if ds.treated[i] {
                assert_eq!(est_in.y1_hat[row], ds.y_factual[i]);
            } else {
                assert_eq!(est_in.y0_hat[row], ds.y_factual[i]);
            }
        }
    }

    #[test]
    fn mean_and_se_hand_case() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        // Sample sd is 1, so the standard error is 1/sqrt(3).
        assert!((se - 1.0 / 3.0f64.sqrt()).abs() < 1e-12);
        let (m1, se1) = mean_and_se(&[5.0]);
        assert_eq!((m1, se1), (5.0, 0.0));
    }

    #[test]
    fn sweep_rows_are_deterministic_and_ordered() {
        let cells = vec![
            SweepCell {
                label: "a".into(),
                config: quick_config(0),
                depth: HopDepth::Zero,
            },
            SweepCell {
                label: "b".into(),
                config: quick_config(0),
                depth: HopDepth::Two,
            },
        ];
        let base = quick_params(0);
        let out1 = sweep(&cells, &[11, 12], &base).unwrap();
        let out2 = sweep(&cells, &[11, 12], &base).unwrap();
        assert_eq!(out1.rows, out2.rows);
        let labels: Vec<&str> = out1.rows.iter().map(|r| r.cell.as_str()).collect();
        assert_eq!(labels, vec!["a", "a", "b", "b"]);
        assert_eq!(out1.aggregates.len(), 2);
        assert_eq!(out1.aggregates[0].runs, 2);
        assert_eq!(out1.timings.len(), 4);
    }

    #[test]
    fn sweep_rejects_empty_inputs() {
        let base = quick_params(0);
        assert!(sweep(&[], &[1], &base).is_err());
        let cells = vec![SweepCell {
            label: "a".into(),
            config: quick_config(0),
            depth: HopDepth::Zero,
        }];
        assert!(sweep(&cells, &[], &base).is_err());
    }

    #[test]
    fn exact_duplicate_donors_give_zero_error_with_k1() {
        // Hand-built pool: each held-out unit has an exact code twin in each
        // arm carrying the true potential outcome. With k = 1 the twin gets
        // weight one, the imputation is exact, and both metrics are zero.
        let mut rng = HdRng::from_seed(9);
        let mut codes = Vec::new();
        let mut treated = Vec::new();
        let mut y = Vec::new();
        let mut truth = Vec::new();
        let mut queries = Vec::new();
        for i in 0..10u32 {
            let code = crate::hv::Hypervector::random(&mut rng, 128).unwrap();
            let y1 = i as f64 + 0.5;
            let y0 = i as f64 * 0.25;
            codes.push(code.clone());
            treated.push(true);
            y.push(y1);
            codes.push(code.clone());
            treated.push(false);
            y.push(y0);
            truth.push(y1 - y0);
            queries.push((100 + i, code));
        }
        let ids: Vec<u32> = (0..codes.len() as u32).collect();
        let pool = MatchPool::new(ids, codes, treated, y).unwrap();
        let cfg = MatchConfig {
            k: 1,
            ..MatchConfig::default()
        };
        let est = estimate_out_of_sample(&pool, &queries, &cfg).unwrap();
        assert_eq!(eps_pehe(&est.ite_hat, &truth).unwrap(), 0.0);
        assert_eq!(eps_ate(&est.ite_hat, &truth).unwrap(), 0.0);
    }
}
