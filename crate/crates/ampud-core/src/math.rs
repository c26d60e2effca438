//! Scalar math shims and Gaussian-density helpers.
//!
//! With the `std` feature the intrinsic float methods are used; without it
//! everything routes through `libm` so the crate stays `no_std`-clean.

#[cfg(any(feature = "std", test))]
mod imp {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline(always)]
    pub fn log10(x: f64) -> f64 {
        x.log10()
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline(always)]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline(always)]
    pub fn tanh(x: f64) -> f64 {
        x.tanh()
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    #[inline(always)]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
}

#[cfg(not(any(feature = "std", test)))]
mod imp {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline(always)]
    pub fn log10(x: f64) -> f64 {
        libm::log10(x)
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline(always)]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline(always)]
    pub fn tanh(x: f64) -> f64 {
        libm::tanh(x)
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    #[inline(always)]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
}

pub use imp::*;

pub const PI: f64 = core::f64::consts::PI;
pub const TAU: f64 = core::f64::consts::TAU;
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Density of `N(x; mu, var)`. Requires `var > 0`.
#[inline]
pub fn gaussian_pdf(x: f64, mu: f64, var: f64) -> f64 {
    let d = x - mu;
    exp(-0.5 * d * d / var) / sqrt(TAU * var)
}

/// Log-density of `N(x; mu, var)`. Requires `var > 0`.
#[inline]
pub fn gaussian_log_pdf(x: f64, mu: f64, var: f64) -> f64 {
    let d = x - mu;
    -0.5 * (d * d / var + ln(var) + LN_2PI)
}

/// Mean of a slice; 0 for an empty slice.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance of a slice.
pub fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Mean of squared entries.
pub fn mean_square(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|&x| x * x).sum::<f64>() / v.len() as f64
}

/// Mean squared difference between two equal-length slices.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64
}

/// Median of a slice (average of the two middle order statistics for even
/// lengths). Copies and sorts internally.
pub fn median(v: &[f64]) -> f64 {
    debug_assert!(!v.is_empty());
    let mut s = alloc::vec::Vec::from(v);
    s.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_at_zero() {
        assert!((gaussian_pdf(0.0, 0.0, 1.0) - 0.3989422804014327).abs() < 1e-15);
    }

    #[test]
    fn log_pdf_matches_pdf() {
        for &(x, mu, var) in &[(0.3, -1.0, 0.5), (2.0, 0.0, 4.0), (-5.0, 1.0, 0.01)] {
            let direct = gaussian_pdf(x, mu, var);
            let via_log = exp(gaussian_log_pdf(x, mu, var));
            assert!((direct - via_log).abs() <= 1e-14 * direct.max(1e-300));
        }
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }
}
