//! Short-time DCT: frame-wise orthonormal DCT-II with window, point count,
//! and hop all equal, so the transform is an orthonormal change of basis and
//! the inverse is its transpose.

use ampud_core::sensing::{MatrixOperator, SensingOperator};
use anyhow::{ensure, Result};

pub struct ShortTimeDct {
    window: usize,
    /// Row-major `window x window` forward DCT-II basis.
    basis: Vec<f64>,
}

impl ShortTimeDct {
    /// `window`, point count, and hop must agree for invertibility; the
    /// standard configuration is 32/32/32.
    pub fn new(window: usize, n_points: usize, hop: usize) -> Result<Self> {
        ensure!(window >= 1, "window must be >= 1");
        ensure!(
            window == n_points && window == hop,
            "window ({window}), points ({n_points}), and hop ({hop}) must be equal"
        );
        let w = window;
        let mut basis = vec![0.0; w * w];
        for k in 0..w {
            let c = if k == 0 {
                (1.0 / w as f64).sqrt()
            } else {
                (2.0 / w as f64).sqrt()
            };
            for j in 0..w {
                basis[k * w + j] =
                    c * (std::f64::consts::PI * k as f64 * (2 * j + 1) as f64 / (2 * w) as f64)
                        .cos();
            }
        }
        Ok(ShortTimeDct { window: w, basis })
    }

    pub fn standard() -> Self {
        Self::new(32, 32, 32).expect("standard parameters are valid")
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Length after zero-padding to a whole number of frames.
    pub fn padded_len(&self, len: usize) -> usize {
        len.div_ceil(self.window) * self.window
    }

    /// Frame-wise forward transform. The tail is zero-padded when the input
    /// length is not a multiple of the window; coefficients are concatenated
    /// frame after frame.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure!(!x.is_empty(), "empty input");
        let w = self.window;
        let padded = self.padded_len(x.len());
        let mut out = vec![0.0; padded];
        for (frame, out_frame) in out.chunks_mut(w).enumerate() {
            let start = frame * w;
            let end = (start + w).min(x.len());
            let mut buf = vec![0.0; w];
            buf[..end - start].copy_from_slice(&x[start..end]);
            for k in 0..w {
                let row = &self.basis[k * w..(k + 1) * w];
                out_frame[k] = row.iter().zip(&buf).map(|(&b, &v)| b * v).sum();
            }
        }
        Ok(out)
    }

    /// Inverse transform (transpose of the forward basis), truncated to
    /// `orig_len`.
    pub fn inverse(&self, theta: &[f64], orig_len: usize) -> Result<Vec<f64>> {
        ensure!(!theta.is_empty(), "empty input");
        ensure!(
            theta.len() % self.window == 0,
            "coefficient length {} is not a multiple of the window {}",
            theta.len(),
            self.window
        );
        ensure!(orig_len <= theta.len(), "orig_len exceeds coefficient length");
        let w = self.window;
        let mut out = vec![0.0; theta.len()];
        for (frame, coef) in theta.chunks(w).enumerate() {
            let out_frame = &mut out[frame * w..(frame + 1) * w];
            for j in 0..w {
                let mut acc = 0.0;
                for k in 0..w {
                    acc += self.basis[k * w + j] * coef[k];
                }
                out_frame[j] = acc;
            }
        }
        out.truncate(orig_len);
        Ok(out)
    }
}

/// Measurement operator in the coefficient domain: `Phi = A W` applied as
/// two operators, never materialized as a product. `W` is the inverse
/// short-time DCT (synthesis) and `W^T = W^{-1}` the analysis transform.
pub struct DctComposedOperator {
    pub a: MatrixOperator,
    pub dct: ShortTimeDct,
}

impl SensingOperator for DctComposedOperator {
    fn rows(&self) -> usize {
        self.a.rows()
    }

    fn cols(&self) -> usize {
        self.a.cols()
    }

    fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let x = self
            .dct
            .inverse(theta, theta.len())
            .expect("coefficient length fixed by construction");
        self.a.apply(&x)
    }

    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let v = self.a.apply_transpose(r);
        self.dct.forward(&v).expect("length fixed by construction")
    }
}
