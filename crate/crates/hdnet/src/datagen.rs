//! Synthetic networked datasets with known causal ground truth.
//!
//! Units carry sparse nonnegative covariates on a random graph. A scalar
//! structural score mixes each unit's own covariates with the total
//! covariate mass of its one-hop neighborhood and its exact two-hop ring,
//! all projected onto one hidden direction:
//!
//!   s_i = k0_i <x_i, w> + k1_i sum_{j in N1(i)} <x_j, w>
//!                       + k2_i sum_{j in N2(i)} <x_j, w>
//!
//! The same score drives both treatment assignment (through a standardized
//! logistic propensity) and the baseline outcome, so confounding is exactly
//! as strong as the k dials say. k1 and k2 control how much of it lives in
//! the network: a k1 = k2 = 0 dataset is estimable from covariates alone,
//! while large k1 hides confounding one hop away where covariate matching
//! cannot see it.
//!
//! Covariates and edges can optionally share latent community structure:
//! each node belongs to one of `communities` groups, its nonzero covariate
//! coordinates concentrate on the group's coordinate block with probability
//! `community_coord_bias`, and a `homophily` fraction of its edges stays
//! within the group. This mirrors real social networks, where proximity in
//! covariate space and in the graph are both driven by shared communities.
//! Without it, i.i.d. sparse covariates make all pairwise distances
//! concentrate and nearest-neighbor matching degenerates to noise; with it,
//! a unit's code pins down its community while the composition of its
//! neighborhood stays visible only to the hop aggregates.
//!
//! Both potential outcomes share one noise draw per unit and `ite_true` is
//! stored as the exact difference y1 - y0, so the identity holds bit for
//! bit, not up to rounding.
//!
//! Everything is a pure function of the config, including its seed. Each
//! generation stage draws from its own child stream in a pinned order, so
//! adding stages or retrying treatment assignment never shifts another
//! stage's draws.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::HdRng;

/// Stage tags for the generation streams.
const GRAPH_TAG: u64 = 1;
const COVARIATES_TAG: u64 = 2;
const DIRECTIONS_TAG: u64 = 3;
const KAPPAS_TAG: u64 = 4;
const TREATMENT_TAG: u64 = 5;
const NOISE_TAG: u64 = 6;
const COMMUNITIES_TAG: u64 = 7;

/// Treatment redraws allowed before giving up on a config whose propensities
/// keep emptying an arm.
const MAX_TREATMENT_ATTEMPTS: u32 = 8;

/// A per-node dial: either one shared constant or i.i.d. uniform draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSpec {
    Fixed(f64),
    Range { lo: f64, hi: f64 },
}

impl KappaSpec {
    pub fn validate(&self, name: &str) -> Result<()> {
        match *self {
            KappaSpec::Fixed(v) => {
                if !v.is_finite() {
                    return Err(Error::param(name, "fixed value must be finite"));
                }
            }
            KappaSpec::Range { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(Error::param(
                        name,
                        format!("range [{lo}, {hi}] must be finite with lo <= hi"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// One draw. `Fixed` consumes nothing from `rng`, so switching one dial
    /// between fixed and range never shifts another dial's stream.
    fn sample(&self, rng: &mut HdRng) -> f64 {
        match *self {
            KappaSpec::Fixed(v) => v,
            KappaSpec::Range { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphModel {
    /// Each unordered pair is an edge independently with probability
    /// expected_degree / (n - 1).
    ErdosRenyi { expected_degree: f64 },
    /// Growth with preferential attachment: every new node brings
    /// `edges_per_node` edges to existing nodes chosen proportionally to
    /// degree. Produces heavy-tailed degrees.
    PreferentialAttachment { edges_per_node: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of units.
    pub n: usize,
    /// Covariate dimension.
    pub d: usize,
    /// Nonzero covariate coordinates per unit.
    pub sparsity: usize,
    pub graph_model: GraphModel,
    /// Latent communities shared by covariates and edges. 0 disables the
    /// structure entirely; otherwise at least 2 and at most d.
    pub communities: usize,
    /// Probability that a nonzero covariate coordinate lands in the node's
    /// community block rather than anywhere. Requires communities > 0.
    pub community_coord_bias: f64,
    /// Expected fraction of a node's edges that stay inside its community.
    /// Requires communities > 0 and the pairwise graph model.
    pub homophily: f64,
    /// Own-covariate confounding strength.
    pub kappa0: KappaSpec,
    /// One-hop network confounding strength.
    pub kappa1: KappaSpec,
    /// Two-hop network confounding strength.
    pub kappa2: KappaSpec,
    /// Standard deviation of the shared outcome noise.
    pub noise_sd: f64,
    /// Scale of the heterogeneous treatment effect.
    pub effect_scale: f64,
    /// Propensities are clipped into [clip, 1 - clip].
    pub overlap_clip: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n: 1000,
            d: 100,
            sparsity: 10,
            graph_model: GraphModel::ErdosRenyi {
                expected_degree: 8.0,
            },
            communities: 0,
            community_coord_bias: 0.0,
            homophily: 0.0,
            kappa0: KappaSpec::Fixed(10.0),
            kappa1: KappaSpec::Fixed(1.0),
            kappa2: KappaSpec::Fixed(0.0),
            noise_sd: 0.1,
            effect_scale: 5.0,
            overlap_clip: 0.05,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", "need at least two units"));
        }
        if self.d == 0 {
            return Err(Error::param("d", "covariate dimension must be positive"));
        }
        if self.sparsity == 0 || self.sparsity > self.d {
            return Err(Error::param(
                "sparsity",
                format!("must be in 1..={}, got {}", self.d, self.sparsity),
            ));
        }
        match self.graph_model {
            GraphModel::ErdosRenyi { expected_degree } => {
                if !expected_degree.is_finite()
                    || expected_degree < 0.0
                    || expected_degree > (self.n - 1) as f64
                {
                    return Err(Error::param(
                        "expected_degree",
                        format!("must be in [0, n - 1], got {expected_degree}"),
                    ));
                }
            }
            GraphModel::PreferentialAttachment { edges_per_node } => {
                if edges_per_node == 0 || edges_per_node >= self.n {
                    return Err(Error::param(
                        "edges_per_node",
                        format!("must be in 1..n, got {edges_per_node}"),
                    ));
                }
            }
        }
        if self.communities == 1 || self.communities > self.d {
            return Err(Error::param(
                "communities",
                format!("must be 0 or in 2..={}, got {}", self.d, self.communities),
            ));
        }
        if !(0.0..=1.0).contains(&self.community_coord_bias) {
            return Err(Error::param(
                "community_coord_bias",
                "must lie in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return Err(Error::param("homophily", "must lie in [0, 1]"));
        }
        if self.communities == 0 && (self.community_coord_bias != 0.0 || self.homophily != 0.0) {
            return Err(Error::param(
                "communities",
                "community_coord_bias and homophily need communities > 0",
            ));
        }
        if self.communities > 0 {
            match self.graph_model {
                GraphModel::ErdosRenyi { expected_degree } => {
                    // Within-community edge probability must stay a probability.
                    let within_others = (self.n - 1) as f64 / self.communities as f64;
                    if self.homophily * expected_degree > within_others {
                        return Err(Error::param(
                            "homophily",
                            "communities too small to carry the requested within-community degree",
                        ));
                    }
                }
                GraphModel::PreferentialAttachment { .. } => {
                    if self.homophily != 0.0 {
                        return Err(Error::param(
                            "homophily",
                            "needs the pairwise graph model",
                        ));
                    }
                }
            }
        }
        self.kappa0.validate("kappa0")?;
        self.kappa1.validate("kappa1")?;
        self.kappa2.validate("kappa2")?;
        if !self.noise_sd.is_finite() || self.noise_sd < 0.0 {
            return Err(Error::param("noise_sd", "must be finite and nonnegative"));
        }
        if !self.effect_scale.is_finite() {
            return Err(Error::param("effect_scale", "must be finite"));
        }
        if !(self.overlap_clip > 0.0 && self.overlap_clip < 0.5) {
            return Err(Error::param(
                "overlap_clip",
                format!("must lie strictly between 0 and 0.5, got {}", self.overlap_clip),
            ));
        }
        Ok(())
    }

    /// Named preset mimicking the confounding profile of a social-network
    /// benchmark family: homophilous communities drive both who connects to
    /// whom and which covariates a unit carries. `blogcatalog_like` keeps
    /// one-hop confounding mild (k1 ~ U(0.5, 1)); `flickr_like` lets it
    /// dominate (k1 ~ U(0.5, 3)). Both draw k0 ~ U(5, 10) and
    /// k2 ~ U(0.01, 0.05) per node.
    pub fn preset(name: &str, seed: u64) -> Result<GenConfig> {
        let kappa1 = match name {
            "blogcatalog_like" => KappaSpec::Range { lo: 0.5, hi: 1.0 },
            "flickr_like" => KappaSpec::Range { lo: 0.5, hi: 3.0 },
            other => return Err(Error::UnknownPreset(other.into())),
        };
        Ok(GenConfig {
            n: 3000,
            d: 100,
            sparsity: 10,
            graph_model: GraphModel::ErdosRenyi {
                expected_degree: 36.0,
            },
            communities: 10,
            community_coord_bias: 0.9,
            homophily: 0.8,
            kappa0: KappaSpec::Range { lo: 5.0, hi: 10.0 },
            kappa1,
            kappa2: KappaSpec::Range { lo: 0.01, hi: 0.05 },
            noise_sd: 0.1,
            effect_scale: 5.0,
            overlap_clip: 0.05,
            seed,
        })
    }

    /// Names accepted by [`GenConfig::preset`].
    pub fn preset_names() -> &'static [&'static str] {
        &["blogcatalog_like", "flickr_like"]
    }

    /// One-hop dial family for sweeps: the preset's community shape with all
    /// dials pinned (k0 = 10, k2 = 0) so only the one-hop strength moves.
    pub fn dial(kappa1: f64, seed: u64) -> GenConfig {
        let mut cfg = GenConfig::preset("blogcatalog_like", seed)
            .expect("built-in preset name");
        cfg.kappa0 = KappaSpec::Fixed(10.0);
        cfg.kappa1 = KappaSpec::Fixed(kappa1);
        cfg.kappa2 = KappaSpec::Fixed(0.0);
        cfg
    }
}

/// A generated dataset. Column i across all vectors describes unit i; unit
/// ids are the indices 0..n.
#[derive(Debug, Clone)]
pub struct NetDataset {
    pub x: Vec<Vec<f64>>,
    pub graph: Graph,
    pub treated: Vec<bool>,
    pub y_factual: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub ite_true: Vec<f64>,
    pub propensity: Vec<f64>,
}

impl NetDataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Per-node (k0, k1, k2) draws. Each dial reads its own child stream of
/// `rng` (tags 0, 1, 2), node-major within the dial.
pub fn sample_kappas(cfg: &GenConfig, rng: &HdRng) -> Result<Vec<[f64; 3]>> {
    cfg.validate()?;
    let specs = [cfg.kappa0, cfg.kappa1, cfg.kappa2];
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(3);
    for (idx, spec) in specs.iter().enumerate() {
        let mut stream = rng.child(idx as u64);
        columns.push((0..cfg.n).map(|_| spec.sample(&mut stream)).collect());
    }
    Ok((0..cfg.n)
        .map(|i| [columns[0][i], columns[1][i], columns[2][i]])
        .collect())
}

/// One community label per node, uniform over 0..communities. Empty when the
/// structure is disabled.
fn sample_communities(cfg: &GenConfig, rng: &mut HdRng) -> Vec<u32> {
    if cfg.communities == 0 {
        return Vec::new();
    }
    (0..cfg.n)
        .map(|_| rng.random_range(0..cfg.communities) as u32)
        .collect()
}

/// Coordinate block owned by community g: contiguous ranges that partition
/// 0..d across all communities, sizes differing by at most one.
fn block_bounds(d: usize, communities: usize, g: u32) -> (usize, usize) {
    let g = g as usize;
    (g * d / communities, (g + 1) * d / communities)
}

fn sample_erdos_renyi(
    n: usize,
    p_same: f64,
    p_diff: f64,
    communities: &[u32],
    rng: &mut HdRng,
) -> Result<Graph> {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            let p = if communities.is_empty() || communities[u as usize] == communities[v as usize]
            {
                p_same
            } else {
                p_diff
            };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

fn sample_preferential_attachment(n: usize, m: usize, rng: &mut HdRng) -> Result<Graph> {
    // Growth scheme: the first new node connects to all m seed nodes; each
    // later node picks m distinct targets by sampling the endpoint list of
    // existing edges (degree-proportional), rejecting duplicates.
    let mut edges = Vec::with_capacity((n - m) * m);
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * (n - m) * m);
    let mut targets: Vec<u32> = (0..m as u32).collect();
    for source in m as u32..n as u32 {
        for &t in &targets {
            edges.push((source, t));
            endpoints.push(t);
            endpoints.push(source);
        }
        let mut next: Vec<u32> = Vec::with_capacity(m);
        while next.len() < m {
            let pick = endpoints[rng.random_range(0..endpoints.len())];
            if !next.contains(&pick) {
                next.push(pick);
            }
        }
        targets = next;
    }
    Graph::from_edges(n, &edges)
}

fn sample_graph(cfg: &GenConfig, communities: &[u32], rng: &mut HdRng) -> Result<Graph> {
    match cfg.graph_model {
        GraphModel::ErdosRenyi { expected_degree } => {
            let n1 = (cfg.n - 1) as f64;
            let (p_same, p_diff) = if communities.is_empty() {
                let p = (expected_degree / n1).min(1.0);
                (p, p)
            } else {
                // Split the expected degree so a `homophily` fraction of it
                // falls on same-community pairs. Pair counts use the expected
                // community sizes under uniform assignment.
                let c = cfg.communities as f64;
                let p_same = (cfg.homophily * expected_degree * c / n1).min(1.0);
                let p_diff = if cfg.communities > 1 {
                    ((1.0 - cfg.homophily) * expected_degree * c / (n1 * (c - 1.0))).min(1.0)
                } else {
                    0.0
                };
                (p_same, p_diff)
            };
            sample_erdos_renyi(cfg.n, p_same, p_diff, communities, rng)
        }
        GraphModel::PreferentialAttachment { edges_per_node } => {
            sample_preferential_attachment(cfg.n, edges_per_node, rng)
        }
    }
}

/// Sparse nonnegative covariates: `sparsity` distinct coordinates per node,
/// values uniform on (0, 1), then L1-normalized so every unit carries the
/// same total mass. With communities, each coordinate choice lands in the
/// node's block with probability `community_coord_bias`; a full block falls
/// back to a uniform choice so the loop stays bounded.
fn sample_covariates(cfg: &GenConfig, communities: &[u32], rng: &mut HdRng) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(cfg.n);
    let mut indices: Vec<usize> = (0..cfg.d).collect();
    let mut chosen = vec![false; cfg.d];
    for node in 0..cfg.n {
        let mut picks = Vec::with_capacity(cfg.sparsity);
        if communities.is_empty() {
            // Partial Fisher-Yates: the first `sparsity` entries become the
            // chosen coordinates.
            for t in 0..cfg.sparsity {
                let j = rng.random_range(t..cfg.d);
                indices.swap(t, j);
            }
            picks.extend_from_slice(&indices[..cfg.sparsity]);
        } else {
            let (lo, hi) = block_bounds(cfg.d, cfg.communities, communities[node]);
            let mut in_block = 0usize;
            for _ in 0..cfg.sparsity {
                // The bias draw always happens, so the stream advances the
                // same way whether or not the block is already full.
                let from_block = rng.random_bool(cfg.community_coord_bias) && in_block < hi - lo;
                let idx = loop {
                    let idx = if from_block {
                        rng.random_range(lo..hi)
                    } else {
                        rng.random_range(0..cfg.d)
                    };
                    if !chosen[idx] {
                        break idx;
                    }
                };
                chosen[idx] = true;
                if (lo..hi).contains(&idx) {
                    in_block += 1;
                }
                picks.push(idx);
            }
            for &idx in &picks {
                chosen[idx] = false;
            }
        }
        let mut row = vec![0.0f64; cfg.d];
        let mut total = 0.0f64;
        for &idx in &picks {
            let v: f64 = rng.random_range(0.0..1.0);
            row[idx] = v;
            total += v;
        }
        if total > 0.0 {
            for v in &mut row {
                *v /= total;
            }
        }
        rows.push(row);
    }
    rows
}

fn unit_normal_direction(d: usize, rng: &mut HdRng) -> Result<Vec<f64>> {
    let mut w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Internal("degenerate confounding direction".into()));
    }
    for v in &mut w {
        *v /= norm;
    }
    Ok(w)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Linearly interpolated quantile of sorted values (type-7 rule).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Generate a dataset. Pure in the config: equal configs, equal datasets.
pub fn generate(cfg: &GenConfig) -> Result<NetDataset> {
    cfg.validate()?;
    let root = HdRng::from_seed(cfg.seed);

    let communities = sample_communities(cfg, &mut root.child(COMMUNITIES_TAG));
    let graph = sample_graph(cfg, &communities, &mut root.child(GRAPH_TAG))?;
    let x = sample_covariates(cfg, &communities, &mut root.child(COVARIATES_TAG));

    let mut directions = root.child(DIRECTIONS_TAG);
    let w_confound = unit_normal_direction(cfg.d, &mut directions)?;
    let w_effect = unit_normal_direction(cfg.d, &mut directions)?;

    let kappas = sample_kappas(cfg, &root.child(KAPPAS_TAG))?;

    // Projections of every unit once; neighborhood terms are sums of them.
    let p_own: Vec<f64> = x.iter().map(|row| dot(row, &w_confound)).collect();
    let e_own: Vec<f64> = x.iter().map(|row| dot(row, &w_effect)).collect();

    let n = cfg.n;
    let mut scores = Vec::with_capacity(n);
    for i in 0..n as u32 {
        let one_hop: f64 = graph.neighbors(i).iter().map(|&j| p_own[j as usize]).sum();
        let two_hop: f64 = graph
            .two_hop_exact(i)
            .iter()
            .map(|&j| p_own[j as usize])
            .sum();
        let [k0, k1, k2] = kappas[i as usize];
        scores.push(k0 * p_own[i as usize] + k1 * one_hop + k2 * two_hop);
    }

    // Standardized logistic propensities: median-centered, IQR-scaled.
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let median = quantile_sorted(&sorted, 0.5);
    let iqr = {
        let spread = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        if spread.is_finite() && spread > 1e-12 {
            spread
        } else {
            1.0
        }
    };
    let propensity: Vec<f64> = scores
        .iter()
        .map(|&s| {
            logistic((s - median) / iqr).clamp(cfg.overlap_clip, 1.0 - cfg.overlap_clip)
        })
        .collect();

    // Draw treatments; redraw from a fresh attempt stream if an arm comes
    // out empty (possible for tiny n).
    let treatment_root = root.child(TREATMENT_TAG);
    let mut treated: Option<Vec<bool>> = None;
    for attempt in 0..MAX_TREATMENT_ATTEMPTS {
        let mut stream = treatment_root.child(u64::from(attempt));
        let draw: Vec<bool> = propensity.iter().map(|&p| stream.random_bool(p)).collect();
        let ones = draw.iter().filter(|&&t| t).count();
        if ones > 0 && ones < n {
            treated = Some(draw);
            break;
        }
    }
    let treated = treated.ok_or(Error::DegenerateTreatment {
        attempts: MAX_TREATMENT_ATTEMPTS,
    })?;

    let mut noise_stream = root.child(NOISE_TAG);
    let noise: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut noise_stream);
            z * cfg.noise_sd
        })
        .collect();

    // One shared noise draw per unit, and ite_true stored as the literal
    // float difference of the potential outcomes: y1 - y0 == ite_true holds
    // bit for bit, so a perfect estimator scores an exact zero error.
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    let mut ite_true = Vec::with_capacity(n);
    for i in 0..n {
        let base = scores[i] + noise[i];
        let effect = cfg.effect_scale * e_own[i];
        y0.push(base);
        y1.push(base + effect);
        ite_true.push(y1[i] - y0[i]);
    }
    let y_factual: Vec<f64> = (0..n).map(|i| if treated[i] { y1[i] } else { y0[i] }).collect();

    for (name, col) in [("y0", &y0), ("y1", &y1), ("propensity", &propensity)] {
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("generated column {name}"),
            });
        }
    }

    Ok(NetDataset {
        x,
        graph,
        treated,
        y_factual,
        y0,
        y1,
        ite_true,
        propensity,
    })
}
