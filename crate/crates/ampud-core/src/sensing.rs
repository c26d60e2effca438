//! Seeded Gaussian measurement operators.
//!
//! The matrix `A` has i.i.d. `N(0, 1/M)` entries, giving unit-norm columns
//! in expectation. Columns are generated from per-column streams of the
//! matrix seed, so `A` is never stored on disk and can either be cached in
//! memory or regenerated on every product; the two modes run the identical
//! arithmetic and return bit-identical results.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;
use crate::rng::Stream;

/// Dimensions, noise level, and matrix seed of the linear system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSystem {
    rows: usize,
    cols: usize,
    sigma_z_sq: f64,
    matrix_seed: u64,
}

impl MeasurementSystem {
    pub fn new(rows: usize, cols: usize, sigma_z_sq: f64, matrix_seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CoreError::InvalidParameter("dimensions must be >= 1"));
        }
        if !(sigma_z_sq >= 0.0) {
            return Err(CoreError::InvalidParameter("sigma_z_sq must be >= 0"));
        }
        Ok(MeasurementSystem {
            rows,
            cols,
            sigma_z_sq,
            matrix_seed,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Measurement rate `R = M / N`.
    pub fn rate(&self) -> f64 {
        self.rows as f64 / self.cols as f64
    }

    pub fn sigma_z_sq(&self) -> f64 {
        self.sigma_z_sq
    }

    pub fn matrix_seed(&self) -> u64 {
        self.matrix_seed
    }

    /// Writes column `j` of `A` into `buf`.
    pub fn fill_column(&self, j: usize, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.rows);
        let mut rng = Stream::new(self.matrix_seed).derive(j as u64).rng();
        let scale = 1.0 / math::sqrt(self.rows as f64);
        let mut i = 0;
        while i + 1 < self.rows {
            let (a, b) = rng.normal_pair();
            buf[i] = a * scale;
            buf[i + 1] = b * scale;
            i += 2;
        }
        if i < self.rows {
            buf[i] = rng.normal_pair().0 * scale;
        }
    }

    /// `y = A x + z` with the noise drawn from `noise_seed`.
    pub fn measure(&self, x: &[f64], noise_seed: u64) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(CoreError::ShapeMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        let op = MatrixOperator::streaming(*self);
        let mut y = op.apply(x);
        if self.sigma_z_sq > 0.0 {
            let sd = math::sqrt(self.sigma_z_sq);
            let mut rng = Stream::new(noise_seed).rng();
            for v in y.iter_mut() {
                *v += sd * rng.normal();
            }
        }
        Ok(y)
    }
}

/// Anything that can apply `A` and `A^T`; AMP only needs these two products.
pub trait SensingOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, r: &[f64]) -> Vec<f64>;
}

/// Seeded Gaussian matrix, either cached dense (column-major) or regenerated
/// column by column on each product.
pub enum MatrixOperator {
    Dense {
        sys: MeasurementSystem,
        columns: Vec<f64>,
    },
    Streaming {
        sys: MeasurementSystem,
    },
}

impl MatrixOperator {
    /// Caches the dense matrix when it fits in `budget_bytes`, otherwise
    /// falls back to regeneration. Both modes are bit-identical.
    pub fn new(sys: MeasurementSystem, budget_bytes: usize) -> Self {
        let needed = sys.rows * sys.cols * core::mem::size_of::<f64>();
        if needed <= budget_bytes {
            Self::dense(sys)
        } else {
            Self::streaming(sys)
        }
    }

    pub fn dense(sys: MeasurementSystem) -> Self {
        let mut columns = vec![0.0; sys.rows * sys.cols];
        for j in 0..sys.cols {
            sys.fill_column(j, &mut columns[j * sys.rows..(j + 1) * sys.rows]);
        }
        MatrixOperator::Dense { sys, columns }
    }

    pub fn streaming(sys: MeasurementSystem) -> Self {
        MatrixOperator::Streaming { sys }
    }

    pub fn system(&self) -> &MeasurementSystem {
        match self {
            MatrixOperator::Dense { sys, .. } => sys,
            MatrixOperator::Streaming { sys } => sys,
        }
    }
}

impl SensingOperator for MatrixOperator {
    fn rows(&self) -> usize {
        self.system().rows
    }

    fn cols(&self) -> usize {
        self.system().cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let sys = *self.system();
        debug_assert_eq!(x.len(), sys.cols);
        let mut y = vec![0.0; sys.rows];
        match self {
            MatrixOperator::Dense { columns, .. } => {
                for (j, &c) in x.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let col = &columns[j * sys.rows..(j + 1) * sys.rows];
                    for (yi, &aij) in y.iter_mut().zip(col) {
                        *yi += c * aij;
                    }
                }
            }
            MatrixOperator::Streaming { .. } => {
                let mut col = vec![0.0; sys.rows];
                for (j, &c) in x.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    sys.fill_column(j, &mut col);
                    for (yi, &aij) in y.iter_mut().zip(&col) {
                        *yi += c * aij;
                    }
                }
            }
        }
        y
    }

    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let sys = *self.system();
        debug_assert_eq!(r.len(), sys.rows);
        let mut out = vec![0.0; sys.cols];
        match self {
            MatrixOperator::Dense { columns, .. } => {
                for (j, o) in out.iter_mut().enumerate() {
                    let col = &columns[j * sys.rows..(j + 1) * sys.rows];
                    let mut acc = 0.0;
                    for (&aij, &ri) in col.iter().zip(r) {
                        acc += aij * ri;
                    }
                    *o = acc;
                }
            }
            MatrixOperator::Streaming { .. } => {
                let mut col = vec![0.0; sys.rows];
                for (j, o) in out.iter_mut().enumerate() {
                    sys.fill_column(j, &mut col);
                    let mut acc = 0.0;
                    for (&aij, &ri) in col.iter().zip(r) {
                        acc += aij * ri;
                    }
                    *o = acc;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_zero_noise_gives_zero() {
        let sys = MeasurementSystem::new(50, 20, 0.0, 9).unwrap();
        let y = sys.measure(&vec![0.0; 20], 1).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_noise_energy_concentrates() {
        let sys = MeasurementSystem::new(100_000, 1, 1.0, 9).unwrap();
        let y = sys.measure(&[0.0], 4).unwrap();
        let energy = math::mean_square(&y);
        assert!((energy - 1.0).abs() < 0.02, "energy {energy}");
    }

    #[test]
    fn rate_is_exact() {
        let sys = MeasurementSystem::new(4000, 10000, 0.0075, 9).unwrap();
        assert_eq!(sys.rate(), 0.4);
    }

    #[test]
    fn measure_is_deterministic() {
        let sys = MeasurementSystem::new(40, 80, 0.3, 123).unwrap();
        let x: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = sys.measure(&x, 7).unwrap();
        let b = sys.measure(&x, 7).unwrap();
        assert_eq!(a, b);
        let c = sys.measure(&x, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn measure_rejects_wrong_length() {
        let sys = MeasurementSystem::new(10, 20, 0.1, 1).unwrap();
        assert!(matches!(
            sys.measure(&[0.0; 19], 0),
            Err(CoreError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn column_norms_near_unit() {
        let sys = MeasurementSystem::new(2000, 300, 0.0, 77).unwrap();
        let mut col = vec![0.0; 2000];
        let mut total = 0.0;
        for j in 0..300 {
            sys.fill_column(j, &mut col);
            total += col.iter().map(|&v| v * v).sum::<f64>();
        }
        let mean_norm_sq = total / 300.0;
        assert!((mean_norm_sq - 1.0).abs() < 0.05, "mean ||col||^2 {mean_norm_sq}");
    }

    #[test]
    fn dense_and_streaming_agree_bitwise() {
        let sys = MeasurementSystem::new(37, 53, 0.0, 5).unwrap();
        let dense = MatrixOperator::dense(sys);
        let streaming = MatrixOperator::streaming(sys);
        let x: Vec<f64> = (0..53)
            .map(|i| if i % 7 == 0 { 0.0 } else { (i as f64).cos() })
            .collect();
        let r: Vec<f64> = (0..37).map(|i| (i as f64 * 1.3).sin()).collect();
        assert_eq!(dense.apply(&x), streaming.apply(&x));
        assert_eq!(dense.apply_transpose(&r), streaming.apply_transpose(&r));
    }

    #[test]
    fn budget_selects_mode() {
        let sys = MeasurementSystem::new(10, 10, 0.0, 1).unwrap();
        assert!(matches!(
            MatrixOperator::new(sys, 10 * 10 * 8),
            MatrixOperator::Dense { .. }
        ));
        assert!(matches!(
            MatrixOperator::new(sys, 10 * 10 * 8 - 1),
            MatrixOperator::Streaming { .. }
        ));
    }
}
