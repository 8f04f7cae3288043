//! Estimator kernel: interestingness functionals over a vector of group
//! values, their gradients, and delta-method confidence intervals.
//!
//! Everything here is generic over [`Real`] so the kernel can run in `f32`
//! or `f64`; the engine itself uses `f64` (see the crate-root aliases).
//!
//! Conventions, used consistently by callers:
//!
//! * `variance` is the sample variance over groups (Bessel, divide by G-1).
//! * `skewness` and `kurtosis` are built from population central moments
//!   m2, m3, m4 (divide by G): skewness = m3 / m2^(3/2), kurtosis =
//!   m4 / m2^2 - 3. Scoring takes |skewness|; the kernel keeps the sign
//!   because the confidence interval lives on the signed value.
//! * Gradients are the exact partial derivatives of those expressions,
//!   validated against central differences in the tests. Degenerate inputs
//!   (fewer than two groups, zero m2) yield `None` rather than NaN.

use crate::num::{two_sided_z, Real};

/// Which interestingness functional to apply over group values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Interestingness {
    Variance,
    Skewness,
    Kurtosis,
}

impl Interestingness {
    /// Signed functional value; `None` when undefined for the input.
    pub fn apply<R: Real>(self, y: &[R]) -> Option<R> {
        match self {
            Interestingness::Variance => variance_h(y),
            Interestingness::Skewness => skewness_h(y),
            Interestingness::Kurtosis => kurtosis_h(y),
        }
    }

    /// Gradient of the functional at `y`; `None` when undefined.
    pub fn gradient<R: Real>(self, y: &[R]) -> Option<Vec<R>> {
        match self {
            Interestingness::Variance => {
                if y.len() < 2 {
                    None
                } else {
                    Some(variance_grad(y))
                }
            }
            Interestingness::Skewness => skewness_grad(y),
            Interestingness::Kurtosis => kurtosis_grad(y),
        }
    }

    /// The score is the absolute value for skewness, the raw value otherwise.
    pub fn score_of<R: Real>(self, h: R) -> R {
        match self {
            Interestingness::Skewness => h.abs(),
            _ => h,
        }
    }
}

impl std::fmt::Display for Interestingness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Interestingness::Variance => "variance",
            Interestingness::Skewness => "skewness",
            Interestingness::Kurtosis => "kurtosis",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Interestingness {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "variance" => Ok(Interestingness::Variance),
            "skewness" => Ok(Interestingness::Skewness),
            "kurtosis" => Ok(Interestingness::Kurtosis),
            other => Err(format!(
                "unknown interestingness '{other}' (expected variance, skewness or kurtosis)"
            )),
        }
    }
}

fn mean<R: Real>(y: &[R]) -> R {
    let n = R::from_usize(y.len()).unwrap();
    y.iter().fold(R::zero(), |a, &v| a + v) / n
}

/// Sample variance over groups: sum (y_s - mean)^2 / (G - 1).
pub fn variance_h<R: Real>(y: &[R]) -> Option<R> {
    let g = y.len();
    if g < 2 {
        return None;
    }
    let m = mean(y);
    let ss = y.iter().fold(R::zero(), |a, &v| a + (v - m) * (v - m));
    Some(ss / R::from_usize(g - 1).unwrap())
}

/// d variance / d y_s = 2 (y_s - mean) / (G - 1).
pub fn variance_grad<R: Real>(y: &[R]) -> Vec<R> {
    let g = R::from_usize(y.len() - 1).unwrap();
    let m = mean(y);
    let two = R::from_f64_lossy(2.0);
    y.iter().map(|&v| two * (v - m) / g).collect()
}

/// Population central moments (m2, m3, m4), each divided by G.
pub fn central_moments<R: Real>(y: &[R]) -> (R, R, R) {
    let n = R::from_usize(y.len()).unwrap();
    let m = mean(y);
    let (mut m2, mut m3, mut m4) = (R::zero(), R::zero(), R::zero());
    for &v in y {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Population skewness m3 / m2^(3/2); `None` if G < 2 or m2 = 0.
pub fn skewness_h<R: Real>(y: &[R]) -> Option<R> {
    if y.len() < 2 {
        return None;
    }
    let (m2, m3, _) = central_moments(y);
    if m2 <= R::zero() {
        return None;
    }
    Some(m3 / m2.powf(R::from_f64_lossy(1.5)))
}

/// Gradient of skewness. Uses d m2/d y_s = 2 d_s / G and
/// d m3/d y_s = 3 (d_s^2 - m2) / G with d_s = y_s - mean.
pub fn skewness_grad<R: Real>(y: &[R]) -> Option<Vec<R>> {
    if y.len() < 2 {
        return None;
    }
    let (m2, m3, _) = central_moments(y);
    if m2 <= R::zero() {
        return None;
    }
    let g = R::from_usize(y.len()).unwrap();
    let m = mean(y);
    let p15 = m2.powf(R::from_f64_lossy(1.5));
    let p25 = m2.powf(R::from_f64_lossy(2.5));
    let three = R::from_f64_lossy(3.0);
    Some(
        y.iter()
            .map(|&v| {
                let d = v - m;
                let dm3 = three * (d * d - m2) / g;
                let dm2 = R::from_f64_lossy(2.0) * d / g;
                dm3 / p15 - R::from_f64_lossy(1.5) * m3 / p25 * dm2
            })
            .collect(),
    )
}

/// Excess kurtosis m4 / m2^2 - 3; `None` if G < 2 or m2 = 0.
pub fn kurtosis_h<R: Real>(y: &[R]) -> Option<R> {
    if y.len() < 2 {
        return None;
    }
    let (m2, _, m4) = central_moments(y);
    if m2 <= R::zero() {
        return None;
    }
    Some(m4 / (m2 * m2) - R::from_f64_lossy(3.0))
}

/// Gradient of excess kurtosis, via d m4/d y_s = 4 (d_s^3 - m3) / G.
pub fn kurtosis_grad<R: Real>(y: &[R]) -> Option<Vec<R>> {
    if y.len() < 2 {
        return None;
    }
    let (m2, m3, m4) = central_moments(y);
    if m2 <= R::zero() {
        return None;
    }
    let g = R::from_usize(y.len()).unwrap();
    let m = mean(y);
    let m2sq = m2 * m2;
    let m2cu = m2sq * m2;
    let four = R::from_f64_lossy(4.0);
    Some(
        y.iter()
            .map(|&v| {
                let d = v - m;
                let dm4 = four * (d * d * d - m3) / g;
                let dm2 = R::from_f64_lossy(2.0) * d / g;
                dm4 / m2sq - R::from_f64_lossy(2.0) * m4 / m2cu * dm2
            })
            .collect(),
    )
}

/// A two-sided confidence interval around a point estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ci<R> {
    pub point: R,
    pub lo: R,
    pub hi: R,
    /// Half-width; zero when every group variance is zero.
    pub eps: R,
}

/// Delta-method interval for g(Ybar) where the group means Ybar_s carry
/// independent sampling variances.
///
/// `se2[s]` must be the variance of the s-th group mean, i.e. the group's
/// sample variance already divided by the number of consumed samples for
/// that group. The half-width is z_(1-alpha/2) * sqrt(sum se2_s * grad_s^2),
/// which shrinks like 1/sqrt(r) as samples accumulate.
pub fn delta_ci<R: Real>(point: R, grad: &[R], se2: &[R], alpha: f64) -> Ci<R> {
    debug_assert_eq!(grad.len(), se2.len());
    let tau2 = grad
        .iter()
        .zip(se2)
        .fold(R::zero(), |a, (&g, &v)| a + v * g * g);
    let z = R::from_f64_lossy(two_sided_z(alpha));
    let eps = z * tau2.max(R::zero()).sqrt();
    Ci {
        point,
        lo: point - eps,
        hi: point + eps,
        eps,
    }
}
