//! Counterfactual imputation by nearest-neighbor matching in code space.
//!
//! A [`MatchPool`] holds the units whose factual outcomes may be consulted:
//! their codes, treatment flags, and observed outcomes. It never carries
//! counterfactual or ground-truth columns, so anything estimated from a pool
//! is leakage-free by construction.
//!
//! For a query code, [`knn_arm`] scans one treatment arm exhaustively and
//! keeps the k nearest donors by Hamming distance, ties broken by ascending
//! unit id. Selection compares exact disagreement counts, so there is no
//! floating-point ambiguity in who gets matched. [`impute`] averages donor
//! outcomes under the configured weighting; the estimators assemble imputed
//! potential outcomes into per-unit effects.
//!
//! In-sample estimation keeps each unit's factual side verbatim and imputes
//! only the opposite arm; a unit never donates to itself because donors come
//! from the arm it does not belong to.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hv::Hypervector;

/// Donor outcome weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weight 1 / (distance + epsilon), normalized over the donor set.
    /// Near-duplicates dominate; an exact code match concentrates almost all
    /// weight.
    InverseDistance,
    /// Equal weights 1 / k.
    Uniform,
}

impl std::fmt::Display for Weighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Weighting::InverseDistance => write!(f, "inverse_distance"),
            Weighting::Uniform => write!(f, "uniform"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Donors per imputation.
    pub k: usize,
    pub weighting: Weighting,
    /// Additive floor inside inverse-distance weights; keeps the weight of
    /// an exact match finite.
    pub epsilon: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            k: 5,
            weighting: Weighting::InverseDistance,
            epsilon: 1e-9,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "need at least one donor"));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::param(
                "epsilon",
                format!("must be finite and positive, got {}", self.epsilon),
            ));
        }
        Ok(())
    }
}

/// Units eligible to donate factual outcomes.
#[derive(Debug, Clone)]
pub struct MatchPool {
    ids: Vec<u32>,
    codes: Vec<Hypervector>,
    treated: Vec<bool>,
    outcomes: Vec<f64>,
    /// Positions of control units, then treated units, each ascending.
    arm_positions: [Vec<u32>; 2],
}

impl MatchPool {
    /// Build a pool from parallel columns. Ids must be distinct (they are
    /// the deterministic tie-breaker), outcomes finite, codes of one common
    /// dimension.
    pub fn new(
        ids: Vec<u32>,
        codes: Vec<Hypervector>,
        treated: Vec<bool>,
        outcomes: Vec<f64>,
    ) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::param("pool", "pool must contain at least one unit"));
        }
        for (name, len) in [
            ("codes", codes.len()),
            ("treated", treated.len()),
            ("outcomes", outcomes.len()),
        ] {
            if len != n {
                return Err(Error::param(
                    name,
                    format!("column length {len} does not match {n} ids"),
                ));
            }
        }
        let dim = codes[0].dim();
        if codes.iter().any(|c| c.dim() != dim) {
            return Err(Error::param("codes", "codes must share one dimension"));
        }
        if outcomes.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                context: "pool outcomes".into(),
            });
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::param("ids", "unit ids must be distinct"));
        }
        let mut arm_positions = [Vec::new(), Vec::new()];
        for (pos, &t) in treated.iter().enumerate() {
            arm_positions[usize::from(t)].push(pos as u32);
        }
        Ok(MatchPool {
            ids,
            codes,
            treated,
            outcomes,
            arm_positions,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn code_dim(&self) -> usize {
        self.codes[0].dim()
    }

    /// Number of units in the given arm.
    pub fn arm_size(&self, treated: bool) -> usize {
        self.arm_positions[usize::from(treated)].len()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn codes(&self) -> &[Hypervector] {
        &self.codes
    }

    pub fn treated(&self) -> &[bool] {
        &self.treated
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }
}

/// One selected donor, in selection order (nearest first).
#[derive(Debug, Clone, PartialEq)]
pub struct Donor {
    pub id: u32,
    /// Normalized Hamming distance to the query.
    pub distance: f64,
    /// Normalized outcome weight; donor weights sum to one.
    pub weight: f64,
}

/// Positions of the (up to) k nearest arm members with their disagreement
/// counts, ordered by (count, id) ascending.
fn knn_positions(
    pool: &MatchPool,
    query: &Hypervector,
    treated: bool,
    cfg: &MatchConfig,
) -> Result<Vec<(u32, u64)>> {
    cfg.validate()?;
    if query.dim() != pool.code_dim() {
        return Err(Error::DimensionMismatch {
            left: pool.code_dim(),
            right: query.dim(),
        });
    }
    let arm = &pool.arm_positions[usize::from(treated)];
    if arm.is_empty() {
        return Err(Error::EmptyArm {
            arm: u8::from(treated),
        });
    }
    if arm.len() < cfg.k {
        log::warn!(
            "arm {} has only {} donors, fewer than k = {}; using all of them",
            u8::from(treated),
            arm.len(),
            cfg.k
        );
    }
    let mut scored: Vec<(u32, u64)> = Vec::with_capacity(arm.len());
    for &pos in arm {
        let count = query.hamming_count(&pool.codes[pos as usize])?;
        scored.push((pos, count));
    }
    let key = |&(pos, count): &(u32, u64)| (count, pool.ids[pos as usize]);
    let k = cfg.k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by_key(k - 1, key);
        scored.truncate(k);
    }
    scored.sort_unstable_by_key(key);
    Ok(scored)
}

/// Normalized donor weights for selected (position, count) pairs. Raw
/// weights are computed in donor order and normalized by their in-order sum;
/// this arithmetic is part of the contract.
fn donor_weights(pool: &MatchPool, selected: &[(u32, u64)], cfg: &MatchConfig) -> Vec<f64> {
    let dim = pool.code_dim() as f64;
    let raw: Vec<f64> = selected
        .iter()
        .map(|&(_, count)| match cfg.weighting {
            Weighting::InverseDistance => 1.0 / (count as f64 / dim + cfg.epsilon),
            Weighting::Uniform => 1.0,
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// The k nearest donors to `query` within one treatment arm.
pub fn knn_arm(
    pool: &MatchPool,
    query: &Hypervector,
    treated: bool,
    cfg: &MatchConfig,
) -> Result<Vec<Donor>> {
    let selected = knn_positions(pool, query, treated, cfg)?;
    let weights = donor_weights(pool, &selected, cfg);
    let dim = pool.code_dim() as f64;
    Ok(selected
        .iter()
        .zip(weights)
        .map(|(&(pos, count), weight)| Donor {
            id: pool.ids[pos as usize],
            distance: count as f64 / dim,
            weight,
        })
        .collect())
}

/// Weighted donor-outcome average: the imputed potential outcome of `query`
/// under the given arm.
pub fn impute(
    pool: &MatchPool,
    query: &Hypervector,
    treated: bool,
    cfg: &MatchConfig,
) -> Result<f64> {
    let selected = knn_positions(pool, query, treated, cfg)?;
    let weights = donor_weights(pool, &selected, cfg);
    let mut acc = 0.0f64;
    for (&(pos, _), w) in selected.iter().zip(&weights) {
        acc += w * pool.outcomes[pos as usize];
    }
    Ok(acc)
}

/// Per-unit effect estimates plus their average.
#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub ids: Vec<u32>,
    pub y1_hat: Vec<f64>,
    pub y0_hat: Vec<f64>,
    pub ite_hat: Vec<f64>,
    pub ate_hat: f64,
}

fn assemble(ids: Vec<u32>, y1_hat: Vec<f64>, y0_hat: Vec<f64>) -> EffectEstimate {
    let ite_hat: Vec<f64> = y1_hat
        .iter()
        .zip(&y0_hat)
        .map(|(y1, y0)| y1 - y0)
        .collect();
    let ate_hat = ite_hat.iter().sum::<f64>() / ite_hat.len() as f64;
    EffectEstimate {
        ids,
        y1_hat,
        y0_hat,
        ite_hat,
        ate_hat,
    }
}

/// Estimate effects for the pool's own units. The factual side of every
/// unit is copied verbatim from its observed outcome; only the opposite arm
/// is imputed.
pub fn estimate_in_sample(pool: &MatchPool, cfg: &MatchConfig) -> Result<EffectEstimate> {
    cfg.validate()?;
    let rows: Vec<(f64, f64)> = (0..pool.len())
        .into_par_iter()
        .map(|i| {
            let counterfactual = impute(pool, &pool.codes[i], !pool.treated[i], cfg)?;
            Ok(if pool.treated[i] {
                (pool.outcomes[i], counterfactual)
            } else {
                (counterfactual, pool.outcomes[i])
            })
        })
        .collect::<Result<_>>()?;
    let (y1, y0) = rows.into_iter().unzip();
    Ok(assemble(pool.ids.clone(), y1, y0))
}

/// Estimate effects for units outside the pool: both potential outcomes are
/// imputed from pool donors. Queries are (unit id, code) pairs.
pub fn estimate_out_of_sample(
    pool: &MatchPool,
    queries: &[(u32, Hypervector)],
    cfg: &MatchConfig,
) -> Result<EffectEstimate> {
    cfg.validate()?;
    if queries.is_empty() {
        return Err(Error::param("queries", "no units to estimate"));
    }
    let rows: Vec<(f64, f64)> = queries
        .par_iter()
        .map(|(_, code)| {
            let y1 = impute(pool, code, true, cfg)?;
            let y0 = impute(pool, code, false, cfg)?;
            Ok((y1, y0))
        })
        .collect::<Result<_>>()?;
    let (y1, y0) = rows.into_iter().unzip();
    let ids = queries.iter().map(|(id, _)| *id).collect();
    Ok(assemble(ids, y1, y0))
}
