//! Network-aware unit codes.
//!
//! Each node i starts from its covariate code r_i. Neighborhood context is
//! folded in by hop aggregation: the 1-hop aggregate h1_i bundles the codes
//! of i's neighbors, and the 2-hop aggregate h2_i bundles the finalized
//! 1-hop aggregates of i's neighbors. The final code binds a distinct role
//! vector to each term and bundles them:
//!
//!   z_i = (psi0 x r_i) (+) (psi1 x h1_i) (+) (psi2 x h2_i)
//!
//! Role vectors are generated once and shared by all nodes; binding keeps
//! the three terms mutually quasi-orthogonal so matching can read ego,
//! 1-hop, and 2-hop similarity out of one Hamming distance. Terms for
//! missing aggregates (isolated nodes) are simply dropped.
//!
//! All tie-breaking randomness is drawn from streams keyed by node identity
//! and pipeline stage, never from a shared sequential stream. Two
//! consequences, both load-bearing: encoding a graph is independent of node
//! evaluation order (so it parallelizes deterministically), and relabeling
//! nodes while carrying their keys along permutes the output codes
//! bit-for-bit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hv::{BundleAccumulator, Hypervector};
use crate::rng::HdRng;

/// Stage tags for tie-break stream derivation.
const HOP1_TAG: u64 = 1;
const HOP2_TAG: u64 = 2;
const COMBINE_TAG: u64 = 3;

/// How many hops of network context enter a node's code.
///
/// `Zero` bypasses the network entirely (z_i = r_i, bit for bit), `One`
/// adds bundled neighbor codes, `Two` adds iterated neighbor aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopDepth {
    Zero,
    One,
    Two,
}

impl HopDepth {
    pub fn as_u8(self) -> u8 {
        match self {
            HopDepth::Zero => 0,
            HopDepth::One => 1,
            HopDepth::Two => 2,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(HopDepth::Zero),
            1 => Ok(HopDepth::One),
            2 => Ok(HopDepth::Two),
            other => Err(Error::param("depth", format!("hop depth must be 0, 1 or 2, got {other}"))),
        }
    }
}

impl std::fmt::Display for HopDepth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// The three role vectors bound to the ego, 1-hop and 2-hop terms. Generated
/// once per encoder and shared across every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleVectors {
    pub psi0: Hypervector,
    pub psi1: Hypervector,
    pub psi2: Hypervector,
}

impl RoleVectors {
    /// Draw three independent random roles; consumes exactly three vectors
    /// worth of draws from `rng`.
    pub fn generate(rng: &mut HdRng, dim: usize) -> Result<Self> {
        Ok(RoleVectors {
            psi0: Hypervector::random(rng, dim)?,
            psi1: Hypervector::random(rng, dim)?,
            psi2: Hypervector::random(rng, dim)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.psi0.dim()
    }

    pub fn validate(&self) -> Result<()> {
        for psi in [&self.psi1, &self.psi2] {
            if psi.dim() != self.psi0.dim() {
                return Err(Error::DimensionMismatch {
                    left: self.psi0.dim(),
                    right: psi.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Bundle of neighbor codes of node i, or None when i is isolated.
/// `rng` is consumed only for bundling tie-breaks.
pub fn aggregate_1hop(
    graph: &Graph,
    r: &[Hypervector],
    i: u32,
    rng: &mut HdRng,
) -> Result<Option<Hypervector>> {
    check_codes(graph, r)?;
    let neigh = graph.neighbors(i);
    if neigh.is_empty() {
        return Ok(None);
    }
    let mut acc = BundleAccumulator::new(r[0].dim())?;
    for &j in neigh {
        acc.add(&r[j as usize])?;
    }
    Ok(Some(acc.finalize(rng)?))
}

/// Bundle of the finalized 1-hop aggregates of i's neighbors, or None when
/// i is isolated. Every neighbor of a non-isolated node has a 1-hop
/// aggregate (it has at least i as a neighbor); a missing one indicates a
/// broken pipeline and is an error.
pub fn aggregate_2hop(
    graph: &Graph,
    h1: &[Option<Hypervector>],
    i: u32,
    rng: &mut HdRng,
) -> Result<Option<Hypervector>> {
    if h1.len() != graph.node_count() {
        return Err(Error::LengthMismatch {
            expected: graph.node_count(),
            got: h1.len(),
        });
    }
    let neigh = graph.neighbors(i);
    if neigh.is_empty() {
        return Ok(None);
    }
    let dim = match h1.iter().flatten().next() {
        Some(h) => h.dim(),
        None => {
            return Err(Error::Internal(
                "2-hop aggregation requested but no 1-hop aggregates exist".into(),
            ))
        }
    };
    let mut acc = BundleAccumulator::new(dim)?;
    for &j in neigh {
        let hj = h1[j as usize].as_ref().ok_or_else(|| {
            Error::Internal(format!(
                "node {i} has neighbor {j} without a 1-hop aggregate"
            ))
        })?;
        acc.add(hj)?;
    }
    Ok(Some(acc.finalize(rng)?))
}

/// Combine a node's own code with its hop aggregates at the requested depth.
///
/// Depth zero returns `r_i` unchanged without touching `rng`. At positive
/// depths, available terms are role-bound and bundled; absent aggregates of
/// an isolated node are dropped. A present 1-hop aggregate with a missing
/// 2-hop aggregate at depth two (or vice versa) cannot arise from a correct
/// pipeline and is an error.
pub fn encode_node(
    r_i: &Hypervector,
    h1_i: Option<&Hypervector>,
    h2_i: Option<&Hypervector>,
    roles: &RoleVectors,
    depth: HopDepth,
    rng: &mut HdRng,
) -> Result<Hypervector> {
    if depth == HopDepth::Zero {
        return Ok(r_i.clone());
    }
    roles.validate()?;
    let mut terms = vec![roles.psi0.bind(r_i)?];
    if let Some(h1) = h1_i {
        terms.push(roles.psi1.bind(h1)?);
    }
    if depth == HopDepth::Two {
        match (h1_i, h2_i) {
            (Some(_), None) => {
                return Err(Error::Internal(
                    "node has a 1-hop aggregate but no 2-hop aggregate at depth two".into(),
                ))
            }
            (None, Some(_)) => {
                return Err(Error::Internal(
                    "isolated node unexpectedly has a 2-hop aggregate".into(),
                ))
            }
            (Some(_), Some(h2)) => terms.push(roles.psi2.bind(h2)?),
            (None, None) => {}
        }
    }
    Hypervector::bundle(&terms, rng)
}

/// Encode every node of a graph, keying tie-break streams by node index.
pub fn encode_graph(
    graph: &Graph,
    r: &[Hypervector],
    roles: &RoleVectors,
    depth: HopDepth,
    tie_seed: u64,
) -> Result<Vec<Hypervector>> {
    let keys: Vec<u64> = (0..graph.node_count() as u64).collect();
    encode_graph_keyed(graph, r, roles, depth, tie_seed, &keys)
}

/// Encode every node, with caller-supplied tie-break keys.
///
/// Node i draws its stage-s tie bits from the stream `(tie_seed, s, keys[i])`.
/// Carrying keys through a node relabeling therefore permutes the output
/// exactly: encode(P(graph), P(r), keys o P^-1) = P(encode(graph, r, keys)).
pub fn encode_graph_keyed(
    graph: &Graph,
    r: &[Hypervector],
    roles: &RoleVectors,
    depth: HopDepth,
    tie_seed: u64,
    keys: &[u64],
) -> Result<Vec<Hypervector>> {
    let n = graph.node_count();
    check_codes(graph, r)?;
    if keys.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: keys.len(),
        });
    }
    if depth == HopDepth::Zero {
        return Ok(r.to_vec());
    }
    roles.validate()?;
    if n > 0 && roles.dim() != r[0].dim() {
        return Err(Error::DimensionMismatch {
            left: roles.dim(),
            right: r[0].dim(),
        });
    }
    let root = HdRng::from_seed(tie_seed);

    let h1: Vec<Option<Hypervector>> = (0..n as u32)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(HOP1_TAG).child(keys[i as usize]);
            aggregate_1hop(graph, r, i, &mut rng)
        })
        .collect::<Result<_>>()?;

    let h2: Vec<Option<Hypervector>> = if depth == HopDepth::Two {
        (0..n as u32)
            .into_par_iter()
            .map(|i| {
                let mut rng = root.child(HOP2_TAG).child(keys[i as usize]);
                aggregate_2hop(graph, &h1, i, &mut rng)
            })
            .collect::<Result<_>>()?
    } else {
        vec![None; n]
    };

    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(COMBINE_TAG).child(keys[i]);
            let h2_i = if depth == HopDepth::Two {
                h2[i].as_ref()
            } else {
                None
            };
            encode_node(&r[i], h1[i].as_ref(), h2_i, roles, depth, &mut rng)
        })
        .collect()
}

fn check_codes(graph: &Graph, r: &[Hypervector]) -> Result<()> {
    if r.len() != graph.node_count() {
        return Err(Error::LengthMismatch {
            expected: graph.node_count(),
            got: r.len(),
        });
    }
    if let Some(first) = r.first() {
        for v in r {
            if v.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    left: first.dim(),
                    right: v.dim(),
                });
            }
        }
    }
    Ok(())
}
