//! Naive reference implementations of the packed pipeline.
//!
//! Everything here works on dense -1/+1 arrays and plain f64 loops, written
//! for obviousness rather than speed. Draw order and accumulation order
//! mirror the production code exactly, so agreement is required bit for bit;
//! any divergence is a bug in the fast path.

#![allow(dead_code)]

use hdnet::datagen::{generate, GenConfig, GraphModel, NetDataset};
use hdnet::estimator::{MatchConfig, Weighting};
use hdnet::experiment::{build_codes, make_split, run_experiment, RunParams};
use hdnet::graph::Graph;
use hdnet::graphenc::{HopDepth, RoleVectors};
use hdnet::hv::Hypervector;
use hdnet::rhpt::RhptEncoder;
use hdnet::rng::{derive_seed, HdRng};

pub fn pack(components: &[i8]) -> Hypervector {
    Hypervector::from_components(components).expect("valid components")
}

pub fn ref_bind(a: &[i8], b: &[i8]) -> Vec<i8> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn ref_hamming_count(a: &[i8], b: &[i8]) -> u64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

pub fn ref_hamming(a: &[i8], b: &[i8]) -> f64 {
    ref_hamming_count(a, b) as f64 / a.len() as f64
}

/// Majority sign per component; zero sums consume one tie bit each, in
/// ascending component order.
pub fn ref_bundle(terms: &[Vec<i8>], rng: &mut HdRng) -> Vec<i8> {
    assert!(!terms.is_empty());
    let dim = terms[0].len();
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        let sum: i32 = terms.iter().map(|t| i32::from(t[j])).sum();
        let sign = match sum.cmp(&0) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => -1,
            std::cmp::Ordering::Equal => {
                if rng.tie_bit() {
                    1
                } else {
                    -1
                }
            }
        };
        out.push(sign);
    }
    out
}

/// sign(Qx + gamma) with sign(0) = +1, in-order dot product then offset.
pub fn ref_rhpt(enc: &RhptEncoder, x: &[f64]) -> Vec<i8> {
    let d = enc.input_dim();
    let mut out = Vec::with_capacity(enc.code_dim());
    for j in 0..enc.code_dim() {
        let row = &enc.normals()[j * d..(j + 1) * d];
        let mut acc = 0.0f64;
        for (q, v) in row.iter().zip(x) {
            acc += q * v;
        }
        acc += enc.offsets()[j];
        out.push(if acc >= 0.0 { 1 } else { -1 });
    }
    out
}

/// Unpacked mirror of graph encoding, with the same stage-keyed tie streams
/// (stages 1, 2, 3 under the tie seed, keyed by node index).
pub fn ref_encode_graph(
    graph: &Graph,
    r: &[Vec<i8>],
    roles: &RoleVectors,
    depth: HopDepth,
    tie_seed: u64,
) -> Vec<Vec<i8>> {
    if depth == HopDepth::Zero {
        return r.to_vec();
    }
    let n = graph.node_count();
    let root = HdRng::from_seed(tie_seed);
    let psi0 = roles.psi0.to_components();
    let psi1 = roles.psi1.to_components();
    let psi2 = roles.psi2.to_components();

    let h1: Vec<Option<Vec<i8>>> = (0..n as u32)
        .map(|i| {
            let neigh = graph.neighbors(i);
            if neigh.is_empty() {
                return None;
            }
            let terms: Vec<Vec<i8>> = neigh.iter().map(|&j| r[j as usize].clone()).collect();
            Some(ref_bundle(&terms, &mut root.child(1).child(u64::from(i))))
        })
        .collect();

    let h2: Vec<Option<Vec<i8>>> = (0..n as u32)
        .map(|i| {
            if depth != HopDepth::Two {
                return None;
            }
            let neigh = graph.neighbors(i);
            if neigh.is_empty() {
                return None;
            }
            let terms: Vec<Vec<i8>> = neigh
                .iter()
                .map(|&j| h1[j as usize].clone().expect("neighbor has a 1-hop aggregate"))
                .collect();
            Some(ref_bundle(&terms, &mut root.child(2).child(u64::from(i))))
        })
        .collect();

    (0..n)
        .map(|i| {
            let mut terms = vec![ref_bind(&psi0, &r[i])];
            if let Some(h1_i) = &h1[i] {
                terms.push(ref_bind(&psi1, h1_i));
            }
            if let Some(h2_i) = &h2[i] {
                terms.push(ref_bind(&psi2, h2_i));
            }
            ref_bundle(&terms, &mut root.child(3).child(i as u64))
        })
        .collect()
}

/// Unpacked donor pool: parallel columns, one row per eligible unit.
pub struct RefPool {
    pub ids: Vec<u32>,
    pub codes: Vec<Vec<i8>>,
    pub treated: Vec<bool>,
    pub outcomes: Vec<f64>,
}

/// Weighted donor-outcome average from an exhaustive scan of one arm:
/// sort by (count, id), keep k, weight, normalize by the in-order sum.
pub fn ref_impute(pool: &RefPool, query: &[i8], arm: bool, cfg: &MatchConfig) -> f64 {
    let dim = pool.codes[0].len() as f64;
    let mut scored: Vec<(usize, u64)> = (0..pool.ids.len())
        .filter(|&p| pool.treated[p] == arm)
        .map(|p| (p, ref_hamming_count(query, &pool.codes[p])))
        .collect();
    assert!(!scored.is_empty(), "empty arm");
    scored.sort_by_key(|&(p, count)| (count, pool.ids[p]));
    scored.truncate(cfg.k.min(scored.len()));
    let raw: Vec<f64> = scored
        .iter()
        .map(|&(_, count)| match cfg.weighting {
            Weighting::InverseDistance => 1.0 / (count as f64 / dim + cfg.epsilon),
            Weighting::Uniform => 1.0,
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let mut acc = 0.0f64;
    for (&(p, _), w) in scored.iter().zip(&raw) {
        acc += w / total * pool.outcomes[p];
    }
    acc
}

pub struct RefEstimate {
    pub y1_hat: Vec<f64>,
    pub y0_hat: Vec<f64>,
    pub ite_hat: Vec<f64>,
    pub ate_hat: f64,
}

fn ref_assemble(y1_hat: Vec<f64>, y0_hat: Vec<f64>) -> RefEstimate {
    let ite_hat: Vec<f64> = y1_hat.iter().zip(&y0_hat).map(|(a, b)| a - b).collect();
    let ate_hat = ite_hat.iter().sum::<f64>() / ite_hat.len() as f64;
    RefEstimate {
        y1_hat,
        y0_hat,
        ite_hat,
        ate_hat,
    }
}

/// Factual side verbatim, counterfactual imputed from the opposite arm.
pub fn ref_in_sample(pool: &RefPool, cfg: &MatchConfig) -> RefEstimate {
    let mut y1 = Vec::with_capacity(pool.ids.len());
    let mut y0 = Vec::with_capacity(pool.ids.len());
    for i in 0..pool.ids.len() {
        let counterfactual = ref_impute(pool, &pool.codes[i], !pool.treated[i], cfg);
        if pool.treated[i] {
            y1.push(pool.outcomes[i]);
            y0.push(counterfactual);
        } else {
            y1.push(counterfactual);
            y0.push(pool.outcomes[i]);
        }
    }
    ref_assemble(y1, y0)
}

pub fn ref_out_of_sample(pool: &RefPool, queries: &[Vec<i8>], cfg: &MatchConfig) -> RefEstimate {
    let mut y1 = Vec::with_capacity(queries.len());
    let mut y0 = Vec::with_capacity(queries.len());
    for code in queries {
        y1.push(ref_impute(pool, code, true, cfg));
        y0.push(ref_impute(pool, code, false, cfg));
    }
    ref_assemble(y1, y0)
}

pub fn ref_eps_ate(ite_hat: &[f64], ite_true: &[f64]) -> f64 {
    let n = ite_hat.len() as f64;
    (ite_hat.iter().sum::<f64>() / n - ite_true.iter().sum::<f64>() / n).abs()
}

pub fn ref_eps_pehe(ite_hat: &[f64], ite_true: &[f64]) -> f64 {
    let n = ite_hat.len() as f64;
    let sum_sq: f64 = ite_hat
        .iter()
        .zip(ite_true)
        .map(|(h, t)| (h - t) * (h - t))
        .sum();
    (sum_sq / n).sqrt()
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // Tied values share the average of the ranks they span.
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks[i] = rank;
        }
        start = end + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Small dataset for pipeline oracle checks.
pub fn small_dataset(seed: u64, n: usize) -> NetDataset {
    let cfg = GenConfig {
        n,
        d: 6,
        sparsity: 2,
        graph_model: GraphModel::ErdosRenyi {
            expected_degree: 3.0,
        },
        seed,
        ..GenConfig::default()
    };
    generate(&cfg).expect("small config generates")
}

/// Run the full production pipeline on a small instance and demand bit-exact
/// agreement with the unpacked references at every stage: covariate codes,
/// graph codes, both estimates, and the error metrics.
pub fn assert_pipeline_matches_reference(
    ds: &NetDataset,
    run_seed: u64,
    beta: usize,
    depth: HopDepth,
    k: usize,
) {
    let n = ds.len();
    let match_config = MatchConfig {
        k,
        ..MatchConfig::default()
    };
    let params = RunParams {
        beta,
        lambda: None,
        depth,
        match_config,
        split_fraction: 0.2,
        seed: run_seed,
    };
    let (report, est_in, est_out) = run_experiment(ds, &params).expect("run succeeds");
    let (encoder, roles, z) = build_codes(ds, beta, None, depth, run_seed).expect("encode");

    let r_ref: Vec<Vec<i8>> = ds.x.iter().map(|x| ref_rhpt(&encoder, x)).collect();
    let r_prod = encoder.encode_batch(&ds.x).expect("batch encode");
    for (i, (reference, produced)) in r_ref.iter().zip(&r_prod).enumerate() {
        assert_eq!(pack(reference), *produced, "covariate code of node {i}");
    }

    // Stage 103 is the tie stream tag a run derives for graph encoding.
    let z_ref = ref_encode_graph(&ds.graph, &r_ref, &roles, depth, derive_seed(run_seed, 103));
    for (i, (reference, produced)) in z_ref.iter().zip(&z).enumerate() {
        assert_eq!(pack(reference), *produced, "unit code of node {i}");
    }

    // Stage 104 seeds the split.
    let split = make_split(n, params.split_fraction, derive_seed(run_seed, 104)).expect("split");
    let pool = RefPool {
        ids: split.in_sample.clone(),
        codes: split.in_sample.iter().map(|&i| z_ref[i as usize].clone()).collect(),
        treated: split.in_sample.iter().map(|&i| ds.treated[i as usize]).collect(),
        outcomes: split.in_sample.iter().map(|&i| ds.y_factual[i as usize]).collect(),
    };
    let want_in = ref_in_sample(&pool, &params.match_config);
    assert_eq!(est_in.ids, split.in_sample);
    assert_eq!(est_in.y1_hat, want_in.y1_hat, "in-sample treated outcomes");
    assert_eq!(est_in.y0_hat, want_in.y0_hat, "in-sample control outcomes");
    assert_eq!(est_in.ite_hat, want_in.ite_hat);
    assert_eq!(est_in.ate_hat, want_in.ate_hat);

    let queries: Vec<Vec<i8>> = split
        .out_sample
        .iter()
        .map(|&i| z_ref[i as usize].clone())
        .collect();
    let want_out = ref_out_of_sample(&pool, &queries, &params.match_config);
    assert_eq!(est_out.ids, split.out_sample);
    assert_eq!(est_out.y1_hat, want_out.y1_hat, "held-out treated outcomes");
    assert_eq!(est_out.y0_hat, want_out.y0_hat, "held-out control outcomes");
    assert_eq!(est_out.ite_hat, want_out.ite_hat);
    assert_eq!(est_out.ate_hat, want_out.ate_hat);

    let true_in: Vec<f64> = split.in_sample.iter().map(|&i| ds.ite_true[i as usize]).collect();
    let true_out: Vec<f64> = split.out_sample.iter().map(|&i| ds.ite_true[i as usize]).collect();
    assert_eq!(report.eps_ate_in, ref_eps_ate(&want_in.ite_hat, &true_in));
    assert_eq!(report.eps_pehe_in, ref_eps_pehe(&want_in.ite_hat, &true_in));
    assert_eq!(report.eps_ate_out, ref_eps_ate(&want_out.ite_hat, &true_out));
    assert_eq!(report.eps_pehe_out, ref_eps_pehe(&want_out.ite_hat, &true_out));
}
