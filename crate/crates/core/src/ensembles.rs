//! Seedable Gaussian and Bernoulli sensing matrices.
//!
//! Every trial is generated from its own ChaCha8 stream: the key is derived
//! from `base_seed` and the stream id is `trial_index`. Entries are laid out
//! column-major and entry `e` consumes the `e`-th 64-bit word of the stream,
//! so any trial (and any prefix of its columns) can be regenerated in
//! isolation and results do not depend on thread count or scheduling.
//!
//! Entries are pre-scaled: Gaussian entries have variance `1/m` and Bernoulli
//! entries are exactly `+-1/sqrt(m)`. This is the matrix `(1/sqrt(m)) A` for a
//! unit-variance `A`; Gaussian columns are not renormalized.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Distribution of the IID matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Bernoulli,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "bernoulli" => Ok(Family::Bernoulli),
            other => Err(Error::InvalidInput(format!(
                "unknown ensemble family '{other}' (expected gaussian or bernoulli)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
        })
    }
}

/// Random matrix ensemble: family, `m x n` shape and the seed all trials derive from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct EnsembleSpec {
    family: Family,
    m: usize,
    n: usize,
    base_seed: u64,
}

impl EnsembleSpec {
    pub fn new(family: Family, m: usize, n: usize, base_seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidInput(format!(
                "ensemble dimensions must be positive, got m={m}, n={n}"
            )));
        }
        Ok(Self {
            family,
            m,
            n,
            base_seed,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Rows (measurements).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Columns (block length).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    /// Same ensemble with a different column count.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.family, self.m, n, self.base_seed)
    }
}

/// One realization of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub data: DMatrix<f64>,
    pub spec: EnsembleSpec,
    pub trial_index: u64,
}

/// The ChaCha8 stream for `(seed, stream)`, positioned at word 0.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in `(0, 1]` from the top 53 bits of a word.
#[inline]
fn open_unit(word: u64) -> f64 {
    ((word >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `[0, 1)` from the top 53 bits of a word.
#[inline]
fn closed_unit(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fills `out` with IID entries of `family` scaled by `scale`, drawing one
/// word per entry from `rng`.
///
/// Gaussian pairs `(2j, 2j+1)` come from the basic Box-Muller transform of
/// words `2j` and `2j+1` (cosine branch first); a trailing odd entry uses the
/// cosine branch of its pair and discards the partner word.
pub fn fill_entries(rng: &mut ChaCha8Rng, family: Family, scale: f64, out: &mut [f64]) {
    match family {
        Family::Bernoulli => {
            for x in out.iter_mut() {
                let w = rng.next_u64();
                *x = if w >> 63 == 0 { scale } else { -scale };
            }
        }
        Family::Gaussian => {
            for pair in out.chunks_mut(2) {
                let u1 = open_unit(rng.next_u64());
                let u2 = closed_unit(rng.next_u64());
                let r = (-2.0 * u1.ln()).sqrt();
                let (s, c) = (TAU * u2).sin_cos();
                pair[0] = scale * r * c;
                if let Some(second) = pair.get_mut(1) {
                    *second = scale * r * s;
                }
            }
        }
    }
}

/// First `ncols` columns of trial `trial_index`.
///
/// Identical to the corresponding columns of [`sample_matrix`], since the
/// column-major prefix of the stream is shared.
pub fn sample_columns(spec: &EnsembleSpec, trial_index: u64, ncols: usize) -> DMatrix<f64> {
    let mut rng = stream_rng(spec.base_seed, trial_index);
    let mut data = vec![0.0; spec.m * ncols];
    fill_entries(
        &mut rng,
        spec.family,
        1.0 / (spec.m as f64).sqrt(),
        &mut data,
    );
    DMatrix::from_vec(spec.m, ncols, data)
}

/// Full `m x n` realization for `trial_index`.
pub fn sample_matrix(spec: &EnsembleSpec, trial_index: u64) -> MatrixSample {
    MatrixSample {
        data: sample_columns(spec, trial_index, spec.n),
        spec: *spec,
        trial_index,
    }
}

/// Row outer products of `a_sub` scaled by `scale`: `X_i[l][w] = scale^2 a_il a_iw`.
///
/// Their sum equals `scale^2 * a_sub^T a_sub`; each is PSD with rank at most one.
pub fn row_outer_products(a_sub: &DMatrix<f64>, scale: f64) -> Vec<DMatrix<f64>> {
    let k = a_sub.ncols();
    (0..a_sub.nrows())
        .map(|i| {
            let row: Vec<f64> = (0..k).map(|j| scale * a_sub[(i, j)]).collect();
            DMatrix::from_fn(k, k, |l, w| row[l] * row[w])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: Family, m: usize, n: usize, seed: u64) -> EnsembleSpec {
        EnsembleSpec::new(family, m, n, seed).unwrap()
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(EnsembleSpec::new(Family::Gaussian, 0, 3, 1).is_err());
        assert!(EnsembleSpec::new(Family::Bernoulli, 3, 0, 1).is_err());
    }

    #[test]
    fn bernoulli_columns_have_unit_norm() {
        let s = spec(Family::Bernoulli, 4, 9, 11);
        let a = sample_matrix(&s, 0).data;
        for c in a.column_iter() {
            assert_eq!(c.norm_squared(), 1.0);
            assert!(c.iter().all(|&x| x == 0.5 || x == -0.5));
        }
    }

    #[test]
    fn regeneration_is_bit_exact() {
        for family in [Family::Gaussian, Family::Bernoulli] {
            let s = spec(family, 5, 7, 7);
            let a = sample_matrix(&s, 3);
            let b = sample_matrix(&s, 3);
            assert_eq!(a, b);
            assert_ne!(a.data, sample_matrix(&s, 4).data);
        }
    }

    #[test]
    fn column_prefix_matches_full_matrix() {
        for family in [Family::Gaussian, Family::Bernoulli] {
            // odd m makes the prefix end mid Box-Muller pair
            let s = spec(family, 5, 8, 99);
            let full = sample_matrix(&s, 12).data;
            for c in 1..=8 {
                let pre = sample_columns(&s, 12, c);
                assert_eq!(pre, full.columns(0, c).clone_owned());
            }
        }
    }

    #[test]
    fn row_outer_products_of_identity() {
        let a = DMatrix::<f64>::identity(2, 2);
        let x = row_outer_products(&a, 1.0);
        assert_eq!(x[0], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(x[1], DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn bernoulli_outer_product_diagonal_is_one_over_k() {
        let (m, k) = (12, 3);
        let s = spec(Family::Bernoulli, m, k, 5);
        let a = sample_columns(&s, 0, k);
        let scale = (m as f64 / k as f64).sqrt();
        for x in row_outer_products(&a, scale) {
            for d in 0..k {
                assert!((x[(d, d)] - 1.0 / k as f64).abs() < 1e-15);
            }
            for v in x.iter() {
                assert!(v.abs() <= 1.0 / k as f64 + 1e-15);
            }
        }
    }
}
