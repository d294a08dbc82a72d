//! Principal branch of the Lambert W function on [-1/e, 0].

use crate::error::{domain, Result};

const INV_E: f64 = 0.367_879_441_171_442_3;

/// W0(y) for y in [-1/e, 0], the solution w in [-1, 0] of w e^w = y.
///
/// Arguments within 1e-15 below -1/e are treated as the branch point.
pub fn lambert_w0(y: f64) -> Result<f64> {
    if !(y <= 0.0 && y >= -INV_E - 1e-15) {
        return domain(format!("lambert_w0 needs y in [-1/e, 0], got {y}"));
    }
    let offset = (1.0 + std::f64::consts::E * y).max(0.0);
    Ok(w0_with_offset(y, offset).0)
}

/// W0(y) together with 1 + W0(y), given `offset = 1 + e*y` computed by the
/// caller as accurately as it can. Near the branch point 1 + W carries more
/// precision than W.
pub(crate) fn w0_with_offset(y: f64, offset: f64) -> (f64, f64) {
    if y == 0.0 {
        return (0.0, 1.0);
    }
    if offset <= 0.0 {
        return (-1.0, 0.0);
    }
    let p = (2.0 * offset).sqrt();
    if p < 1e-2 {
        // Branch-point series in p = sqrt(2(1 + e y)); truncation error is
        // below 1e-16 here.
        let t = p
            * (1.0
                + p * (-1.0 / 3.0
                    + p * (11.0 / 72.0
                        + p * (-43.0 / 540.0 + p * (769.0 / 17280.0 + p * (-221.0 / 8505.0))))));
        return (-1.0 + t, t);
    }
    let mut w = if y > -0.25 {
        y * (1.0 - y * (1.0 - 1.5 * y))
    } else {
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    };
    for _ in 0..50 {
        let ew = w.exp();
        let f = w * ew - y;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 2.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    let w = w.clamp(-1.0, 0.0);
    (w, 1.0 + w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(y: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0f64, 0.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m * m.exp() > y {
                hi = m
            } else {
                lo = m
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert_eq!(lambert_w0(-(-1.0f64).exp()).unwrap(), -1.0);
        assert!(lambert_w0(-INV_E - 1e-16).is_ok());
        assert!(lambert_w0(-0.4).is_err());
        assert!(lambert_w0(0.1).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn matches_bisection() {
        let w = lambert_w0(-0.1).unwrap();
        assert!((w - bisect(-0.1)).abs() < 1e-14);
        assert!((w + 0.111_832_559_158_962_9).abs() < 1e-14);
        for k in 1..100 {
            let y = -INV_E * k as f64 / 100.0;
            assert!((lambert_w0(y).unwrap() - bisect(y)).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn identity_on_dense_sample() {
        for k in 0..=10_000 {
            let y = -INV_E * k as f64 / 10_000.0;
            let w = lambert_w0(y).unwrap();
            assert!((-1.0..=0.0).contains(&w));
            assert!((w * w.exp() - y).abs() <= 1e-13 * y.abs().max(1e-300), "y={y}");
        }
    }

    #[test]
    fn tiny_arguments() {
        for y in [-1e-300, -1e-100, -1e-20, -1e-8] {
            let w = lambert_w0(y).unwrap();
            assert!((w - y).abs() <= 2.0 * y * y + 1e-300);
        }
    }
}
