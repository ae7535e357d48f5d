//! Covariate encoding by random hyperplane tessellation.
//!
//! An encoder holds `beta` random affine hyperplanes in R^d: normal vectors
//! with i.i.d. standard normal entries and offsets uniform on [-lambda,
//! lambda]. A point x maps to the bipolar vector of hyperplane sides,
//! sign(Qx + gamma), with sign(0) = +1. Nearby points cross few hyperplanes,
//! so normalized Hamming distance between codes grows monotonically with
//! Euclidean distance in expectation; that is the only property matching
//! relies on.
//!
//! Encoding is deterministic given (d, beta, lambda, seed). The offset scale
//! matters: hyperplanes with |offset| beyond the data radius never separate
//! two data points. [`RhptEncoder::auto_lambda`] applies the rule of three
//! times the largest row norm, which keeps a useful fraction of hyperplanes
//! cutting through the data while covering its full extent.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hv::Hypervector;
use crate::rng::HdRng;

/// Child stream tags for parameter sampling.
const NORMALS_TAG: u64 = 1;
const OFFSETS_TAG: u64 = 2;

/// A frozen random hyperplane tessellation of R^d into `beta` half-space
/// indicators.
#[derive(Debug, Clone)]
pub struct RhptEncoder {
    d: usize,
    beta: usize,
    lambda: f64,
    seed: u64,
    /// Row-major beta x d hyperplane normals.
    q: Vec<f64>,
    /// Per-hyperplane offsets, length beta.
    gamma: Vec<f64>,
}

impl RhptEncoder {
    /// Sample a fresh tessellation. The parameter map is frozen: a given
    /// (d, beta, lambda, seed) yields the same hyperplanes everywhere.
    pub fn new(d: usize, beta: usize, lambda: f64, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "input dimension must be positive"));
        }
        if beta == 0 {
            return Err(Error::param("beta", "code dimension must be positive"));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::param(
                "lambda",
                format!("offset scale must be finite and nonnegative, got {lambda}"),
            ));
        }
        let root = HdRng::from_seed(seed);

        let mut normals = root.child(NORMALS_TAG);
        let mut q = Vec::with_capacity(beta * d);
        for _ in 0..beta * d {
            let z: f64 = StandardNormal.sample(&mut normals);
            q.push(z);
        }

        let mut offsets = root.child(OFFSETS_TAG);
        let gamma = if lambda == 0.0 {
            vec![0.0; beta]
        } else {
            (0..beta)
                .map(|_| offsets.random_range(-lambda..lambda))
                .collect()
        };

        Ok(RhptEncoder {
            d,
            beta,
            lambda,
            seed,
            q,
            gamma,
        })
    }

    /// Rebuild an encoder from explicit parameters (persistence, and tests
    /// that pin specific hyperplanes such as all-zero offsets).
    pub fn from_parts(
        d: usize,
        beta: usize,
        lambda: f64,
        seed: u64,
        q: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "input dimension must be positive"));
        }
        if beta == 0 {
            return Err(Error::param("beta", "code dimension must be positive"));
        }
        if q.len() != beta * d {
            return Err(Error::LengthMismatch {
                expected: beta * d,
                got: q.len(),
            });
        }
        if gamma.len() != beta {
            return Err(Error::LengthMismatch {
                expected: beta,
                got: gamma.len(),
            });
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::param("lambda", "offset scale must be finite and nonnegative"));
        }
        if q.iter().chain(gamma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "encoder parameters".into(),
            });
        }
        Ok(RhptEncoder {
            d,
            beta,
            lambda,
            seed,
            q,
            gamma,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn code_dim(&self) -> usize {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn normals(&self) -> &[f64] {
        &self.q
    }

    pub fn offsets(&self) -> &[f64] {
        &self.gamma
    }

    /// Offset scale rule: three times the largest row L2 norm. Returns 0.0
    /// for empty or all-zero input, which degenerates to hyperplanes through
    /// the origin.
    pub fn auto_lambda(rows: &[Vec<f64>]) -> f64 {
        let max_sq = rows
            .iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0f64, f64::max);
        3.0 * max_sq.sqrt()
    }

    /// Code of a single point: component j is +1 exactly when
    /// q_j . x + gamma_j >= 0.
    pub fn encode(&self, x: &[f64]) -> Result<Hypervector> {
        if x.len() != self.d {
            return Err(Error::LengthMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "encode input".into(),
            });
        }
        let mut bits = vec![false; self.beta];
        for (j, bit) in bits.iter_mut().enumerate() {
            let row = &self.q[j * self.d..(j + 1) * self.d];
            // Accumulation order is part of the contract: in-order dot
            // product, then the offset. Keep it bit-for-bit reproducible.
            let mut acc = 0.0f64;
            for (qv, xv) in row.iter().zip(x) {
                acc += qv * xv;
            }
            acc += self.gamma[j];
            *bit = acc >= 0.0;
        }
        let components: Vec<i8> = bits.iter().map(|&b| if b { 1 } else { -1 }).collect();
        Hypervector::from_components(&components)
    }

    /// Codes for a batch of points, parallelized across rows. Output order
    /// matches input order and each row equals [`RhptEncoder::encode`] on it.
    pub fn encode_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Hypervector>> {
        rows.par_iter().map(|r| self.encode(r)).collect()
    }
}

/// Optional preprocessing: z-score every column in place. Constant columns
/// are centered only, never divided by a zero spread. Population variance,
/// since the rows are the whole dataset, not a sample from it.
pub fn standardize_columns(rows: &mut [Vec<f64>]) {
    let n = rows.len();
    if n == 0 {
        return;
    }
    let d = rows[0].len();
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let sd = (rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for row in rows.iter_mut() {
            row[j] -= mean;
            if sd > 0.0 {
                row[j] /= sd;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_zero_means_unit_spread() {
        let mut rows = vec![vec![1.0, 5.0, 7.0], vec![3.0, 5.0, 1.0], vec![5.0, 5.0, 4.0]];
        standardize_columns(&mut rows);
        for j in 0..3 {
            let mean: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
        }
        // Varying columns get unit variance; the constant column collapses
        // to zeros instead of dividing by zero.
        for j in [0usize, 2] {
            let var: f64 = rows.iter().map(|r| r[j] * r[j]).sum::<f64>() / 3.0;
            assert!((var - 1.0).abs() < 1e-12, "column {j} variance {var}");
        }
        assert!(rows.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RhptEncoder::new(0, 8, 1.0, 0).is_err());
        assert!(RhptEncoder::new(3, 0, 1.0, 0).is_err());
        assert!(RhptEncoder::new(3, 8, -1.0, 0).is_err());
        assert!(RhptEncoder::new(3, 8, f64::NAN, 0).is_err());
        assert!(RhptEncoder::from_parts(2, 2, 1.0, 0, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(RhptEncoder::from_parts(2, 2, 1.0, 0, vec![0.0; 4], vec![0.0; 1]).is_err());
        assert!(RhptEncoder::from_parts(2, 2, 1.0, 0, vec![f64::NAN; 4], vec![0.0; 2]).is_err());
    }

    #[test]
    fn same_seed_same_code() {
        let a = RhptEncoder::new(5, 256, 2.0, 9).unwrap();
        let b = RhptEncoder::new(5, 256, 2.0, 9).unwrap();
        let x = vec![0.1, -0.3, 0.0, 0.7, 0.2];
        assert_eq!(a.encode(&x).unwrap(), b.encode(&x).unwrap());
        assert_eq!(a.normals(), b.normals());
        assert_eq!(a.offsets(), b.offsets());
    }

    #[test]
    fn zero_input_with_zero_offsets_is_all_plus_one() {
        // sign(0) = +1 on every hyperplane.
        let enc = RhptEncoder::new(4, 100, 0.0, 3).unwrap();
        let code = enc.encode(&[0.0; 4]).unwrap();
        assert!(code.to_components().iter().all(|&c| c == 1));
    }

    #[test]
    fn encode_matches_explicit_signs() {
        // One hyperplane at a time with hand-picked parameters.
        let q = vec![1.0, -2.0, 0.5, 0.0, 0.0, 1.0];
        let gamma = vec![0.25, -0.3];
        let enc = RhptEncoder::from_parts(3, 2, 1.0, 0, q, gamma).unwrap();
        let code = enc.encode(&[1.0, 0.5, 0.0]).unwrap();
        // Row 0: 1.0 - 1.0 + 0.0 + 0.25 = 0.25 >= 0.
        // Row 1: 0.0 + 0.0 + 0.0 - 0.3 < 0.
        assert_eq!(code.to_components(), vec![1, -1]);
    }

    #[test]
    fn batch_equals_loop() {
        let enc = RhptEncoder::new(6, 128, 1.5, 21).unwrap();
        let mut rng = HdRng::from_seed(4);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let batch = enc.encode_batch(&rows).unwrap();
        for (row, code) in rows.iter().zip(&batch) {
            assert_eq!(enc.encode(row).unwrap(), *code);
        }
    }

    #[test]
    fn offsets_respect_lambda() {
        let enc = RhptEncoder::new(3, 512, 0.75, 5).unwrap();
        assert!(enc.offsets().iter().all(|g| g.abs() <= 0.75));
        // Spread over the range rather than clustered at zero.
        let wide = enc.offsets().iter().filter(|g| g.abs() > 0.375).count();
        assert!(wide > 150, "only {wide} of 512 offsets in the outer half");
    }

    #[test]
    fn auto_lambda_is_three_times_max_norm() {
        let rows = vec![vec![3.0, 4.0], vec![0.0, 1.0]];
        assert_eq!(RhptEncoder::auto_lambda(&rows), 15.0);
        assert_eq!(RhptEncoder::auto_lambda(&[]), 0.0);
    }

    #[test]
    fn distance_grows_with_separation() {
        // Codes of nearby points differ less than codes of far points.
        let enc = RhptEncoder::new(2, 2048, 3.0, 8).unwrap();
        let origin = enc.encode(&[0.0, 0.0]).unwrap();
        let near = enc.encode(&[0.05, 0.0]).unwrap();
        let far = enc.encode(&[0.9, 0.0]).unwrap();
        let d_near = origin.hamming(&near).unwrap();
        let d_far = origin.hamming(&far).unwrap();
        assert!(d_near < d_far, "near {d_near} vs far {d_far}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let enc = RhptEncoder::new(3, 16, 1.0, 0).unwrap();
        assert!(enc.encode(&[0.0; 2]).is_err());
        assert!(enc.encode(&[0.0, f64::INFINITY, 0.0]).is_err());
    }
}
