//! Dense symmetric positive-definite matrices with incremental rank-1 updates.
//!
//! [`SpdMatrix`] holds a regularized design matrix `V = λI + Σ x xᵀ` together
//! with its inverse and log-determinant. Rank-1 updates use the
//! Sherman–Morrison identity; every [`REFRESH_INTERVAL`] updates the inverse
//! and log-determinant are recomputed from `V` through a Cholesky
//! factorization so that floating-point drift cannot accumulate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of Sherman–Morrison updates between full Cholesky refreshes.
pub const REFRESH_INTERVAL: u32 = 256;

/// Smallest admissible value of `1 + xᵀV⁻¹x` in a rank-1 update.
const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix dimension must be at least 1")]
    ZeroDimension,
    #[error("regularizer must be positive and finite, got {0}")]
    InvalidRegularizer(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("vector contains a non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("rank-1 update denominator {0:e} below numerical floor")]
    Breakdown(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Regularized design matrix with a maintained inverse and log-determinant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    dim: usize,
    lambda: f64,
    v: Vec<f64>,
    v_inv: Vec<f64>,
    log_det: f64,
    update_count: u64,
    #[serde(default)]
    since_refresh: u32,
}

impl SpdMatrix {
    /// Creates `λI` of the given dimension.
    pub fn new(dim: usize, lambda: f64) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::ZeroDimension);
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(LinalgError::InvalidRegularizer(lambda));
        }
        let mut v = vec![0.0; dim * dim];
        let mut v_inv = vec![0.0; dim * dim];
        for i in 0..dim {
            v[i * dim + i] = lambda;
            v_inv[i * dim + i] = 1.0 / lambda;
        }
        Ok(Self {
            dim,
            lambda,
            v,
            v_inv,
            log_det: dim as f64 * lambda.ln(),
            update_count: 0,
            since_refresh: 0,
        })
    }

    /// Builds `λI + Σ wᵢ xᵢ xᵢᵀ` in one pass and inverts it by Cholesky.
    ///
    /// The weights are multiplicities (a context observed `w` times), so the
    /// resulting `update_count` is their sum.
    pub fn from_weighted_outer<'a, I>(dim: usize, lambda: f64, rows: I) -> Result<Self, LinalgError>
    where
        I: IntoIterator<Item = (&'a [f64], u64)>,
    {
        let mut m = Self::new(dim, lambda)?;
        let mut count = 0u64;
        for (x, w) in rows {
            check_vector(dim, x)?;
            let wf = w as f64;
            for i in 0..dim {
                let xi = x[i] * wf;
                if xi == 0.0 {
                    continue;
                }
                let row = &mut m.v[i * dim..(i + 1) * dim];
                for (vij, &xj) in row.iter_mut().zip(x) {
                    *vij += xi * xj;
                }
            }
            count += w;
        }
        m.symmetrize_v();
        m.update_count = count;
        if count > 0 {
            m.refresh()?;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Row-major entries of `V`.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Row-major entries of the maintained inverse.
    pub fn v_inv(&self) -> &[f64] {
        &self.v_inv
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Applies `V ← V + x xᵀ`, updating the inverse and log-determinant.
    pub fn rank1_update(&mut self, x: &[f64]) -> Result<(), LinalgError> {
        check_vector(self.dim, x)?;
        let d = self.dim;
        let u = self.mul_inv(x);
        let q: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
        let denom = 1.0 + q;
        if denom < DENOMINATOR_FLOOR || !denom.is_finite() {
            return Err(LinalgError::Breakdown(denom));
        }
        for i in 0..d {
            let xi = x[i];
            let ui = u[i] / denom;
            let vrow = &mut self.v[i * d..(i + 1) * d];
            let irow = &mut self.v_inv[i * d..(i + 1) * d];
            for j in 0..d {
                vrow[j] += xi * x[j];
                irow[j] -= ui * u[j];
            }
        }
        self.log_det += q.max(0.0).ln_1p();
        self.update_count += 1;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh()?;
        }
        Ok(())
    }

    /// `xᵀ V⁻¹ x`, clamped at zero.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64, LinalgError> {
        check_len(self.dim, x)?;
        Ok(self.quad_form_unchecked(x))
    }

    pub(crate) fn quad_form_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut total = 0.0;
        for i in 0..d {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = &self.v_inv[i * d..(i + 1) * d];
            let dot: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            total += xi * dot;
        }
        total.max(0.0)
    }

    /// Solves `V θ = b` using the maintained inverse.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(self.dim, b)?;
        Ok(self.mul_inv(b))
    }

    /// Recomputes the inverse and log-determinant from `V` by Cholesky.
    pub fn refresh(&mut self) -> Result<(), LinalgError> {
        let chol = cholesky(&self.v, self.dim).ok_or(LinalgError::NotPositiveDefinite)?;
        self.log_det = 2.0 * (0..self.dim).map(|i| chol[i * self.dim + i].ln()).sum::<f64>();
        self.v_inv = cholesky_inverse(&chol, self.dim);
        self.since_refresh = 0;
        Ok(())
    }

    fn mul_inv(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                self.v_inv[i * d..(i + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn symmetrize_v(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (self.v[i * d + j] + self.v[j * d + i]);
                self.v[i * d + j] = avg;
                self.v[j * d + i] = avg;
            }
        }
    }
}

fn check_len(dim: usize, x: &[f64]) -> Result<(), LinalgError> {
    if x.len() != dim {
        return Err(LinalgError::DimensionMismatch {
            expected: dim,
            actual: x.len(),
        });
    }
    Ok(())
}

fn check_vector(dim: usize, x: &[f64]) -> Result<(), LinalgError> {
    check_len(dim, x)?;
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite(i));
    }
    Ok(())
}

/// Lower-triangular Cholesky factor of a row-major SPD matrix.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Inverse of `L Lᵀ` given the Cholesky factor `L`; the result is exactly symmetric.
fn cholesky_inverse(l: &[f64], n: usize) -> Vec<f64> {
    // L⁻¹ by forward substitution, then (L Lᵀ)⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = vec![0.0; n * n];
    for col in 0..n {
        for i in col..n {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                sum -= l[i * n + k] * linv[k * n + col];
            }
            linv[i * n + col] = sum / l[i * n + i];
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = 0.0;
            for k in i..n {
                sum += linv[k * n + i] * linv[k * n + j];
            }
            inv[i * n + j] = sum;
            inv[j * n + i] = sum;
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gauss-Jordan inverse with partial pivoting, independent of the Cholesky path.
    fn gauss_jordan_inverse(a: &[f64], n: usize) -> Vec<f64> {
        let mut m = a.to_vec();
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            inv[i * n + i] = 1.0;
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))
                .unwrap();
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
            let p = m[col * n + col];
            for k in 0..n {
                m[col * n + k] /= p;
                inv[col * n + k] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = m[r * n + col];
                    for k in 0..n {
                        m[r * n + k] -= f * m[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
        inv
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn init_identity_and_scaled() {
        let m = SpdMatrix::new(2, 1.0).unwrap();
        assert_eq!(m.v(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.v_inv(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.log_det(), 0.0);

        let m = SpdMatrix::new(3, 2.0).unwrap();
        for i in 0..3 {
            assert_eq!(m.v_inv()[i * 3 + i], 0.5);
        }
        assert!((m.log_det() - 3.0 * 2f64.ln()).abs() < 1e-15);

        let m = SpdMatrix::new(1, 0.25).unwrap();
        assert_eq!(m.quad_form(&[1.0]).unwrap(), 4.0);
    }

    #[test]
    fn init_rejects_bad_arguments() {
        assert_eq!(SpdMatrix::new(0, 1.0), Err(LinalgError::ZeroDimension));
        assert!(matches!(
            SpdMatrix::new(2, 0.0),
            Err(LinalgError::InvalidRegularizer(_))
        ));
        assert!(matches!(
            SpdMatrix::new(2, -1.0),
            Err(LinalgError::InvalidRegularizer(_))
        ));
    }

    #[test]
    fn rank1_update_matches_hand_inverse() {
        let mut m = SpdMatrix::new(2, 1.0).unwrap();
        m.rank1_update(&[1.0, 0.0]).unwrap();
        assert_eq!(m.v(), &[2.0, 0.0, 0.0, 1.0]);
        assert!(max_abs_diff(m.v_inv(), &[0.5, 0.0, 0.0, 1.0]) < 1e-15);
        assert!((m.log_det() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(m.update_count(), 1);

        let before = m.clone();
        m.rank1_update(&[0.0, 0.0]).unwrap();
        assert_eq!(m.v(), before.v());
        assert_eq!(m.v_inv(), before.v_inv());
        assert_eq!(m.log_det(), before.log_det());
        assert_eq!(m.update_count(), 2);
    }

    #[test]
    fn rank1_update_errors() {
        let mut m = SpdMatrix::new(2, 1.0).unwrap();
        assert!(matches!(
            m.rank1_update(&[1.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        assert_eq!(m.rank1_update(&[1.0, f64::NAN]), Err(LinalgError::NonFinite(1)));
        assert_eq!(
            m.rank1_update(&[f64::INFINITY, 0.0]),
            Err(LinalgError::NonFinite(0))
        );
        assert_eq!(m.update_count(), 0);
    }

    #[test]
    fn maintained_inverse_tracks_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = SpdMatrix::new(4, 1.0).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            m.rank1_update(&x).unwrap();
        }
        let direct = gauss_jordan_inverse(m.v(), 4);
        assert!(max_abs_diff(m.v_inv(), &direct) < 1e-9);
    }

    #[test]
    fn quad_form_examples() {
        let m = SpdMatrix::new(2, 1.0).unwrap();
        assert_eq!(m.quad_form(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(m.quad_form(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            m.quad_form(&[1.0, 2.0, 3.0]),
            Err(LinalgError::DimensionMismatch { .. })
        ));

        let mut m = SpdMatrix::new(3, 1.0).unwrap();
        let x = [0.0, 1.0, 0.0];
        for _ in 0..10 {
            m.rank1_update(&x).unwrap();
        }
        assert!(m.quad_form(&x).unwrap() <= 0.1);
    }

    #[test]
    fn solve_examples() {
        let m = SpdMatrix::new(2, 2.0).unwrap();
        assert_eq!(m.solve(&[4.0, 6.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(m.solve(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let mut m = SpdMatrix::new(2, 1.0).unwrap();
        m.rank1_update(&[1.0, 0.0]).unwrap();
        let x = m.solve(&[1.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        assert!(m.solve(&[1.0]).is_err());
    }

    #[test]
    fn weighted_outer_matches_incremental() {
        let rows: Vec<(Vec<f64>, u64)> = vec![
            (vec![1.0, 0.5, -0.2], 3),
            (vec![0.0, 2.0, 1.0], 1),
            (vec![-0.3, 0.1, 0.9], 2),
        ];
        let batch =
            SpdMatrix::from_weighted_outer(3, 0.5, rows.iter().map(|(x, w)| (x.as_slice(), *w)))
                .unwrap();
        let mut inc = SpdMatrix::new(3, 0.5).unwrap();
        for (x, w) in &rows {
            for _ in 0..*w {
                inc.rank1_update(x).unwrap();
            }
        }
        assert_eq!(batch.update_count(), 6);
        assert!(max_abs_diff(batch.v(), inc.v()) < 1e-12);
        assert!(max_abs_diff(batch.v_inv(), inc.v_inv()) < 1e-10);
        assert!((batch.log_det() - inc.log_det()).abs() < 1e-10);
    }

    #[test]
    fn refresh_happens_periodically() {
        let mut m = SpdMatrix::new(2, 1.0).unwrap();
        for _ in 0..REFRESH_INTERVAL {
            m.rank1_update(&[0.3, -0.7]).unwrap();
        }
        assert_eq!(m.since_refresh, 0);
        let direct = gauss_jordan_inverse(m.v(), 2);
        assert!(max_abs_diff(m.v_inv(), &direct) < 1e-12);
    }
}
