use serde::{Deserialize, Serialize};

use super::equilibria::{classify, Equilibrium, Provenance};
use super::{f_weight, field, ratio, ModelParams};
use crate::error::{invalid, Result, UrnError};

/// Bisection on `[a, b]` for a sign change of `f`, run to machine precision.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa_neg = f(a) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == fa_neg {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn require_subcritical(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.p >= 0.5 {
        return invalid(format!("p must be below 1/2, got {}", params.p));
    }
    Ok(())
}

/// Root of `-u + (1-p) ratio(u) + p/2` in `[0, 1/2)`.
pub fn solve_um(params: &ModelParams, tol: f64) -> Result<f64> {
    require_subcritical(params)?;
    if tol.is_nan() || tol <= 0.0 {
        return invalid("tol must be positive");
    }
    let (m, p) = (params.m, params.p);
    if p == 0.0 {
        return Ok(0.0);
    }
    let g = |u: f64| -u + (1.0 - p) * ratio(m, u) + p / 2.0;
    let dg = |u: f64| -1.0 + m as f64 * (1.0 - p) * f_weight(m, u);
    // g is convex on [0, 1/2] with g(1/2) = 0; its minimiser separates the two zeros
    let t_star = bisect(dg, 0.0, 0.5);
    let u = bisect(g, 0.0, t_star);
    if g(u).abs() >= tol {
        return Err(UrnError::NotFound(format!(
            "residual {} above tolerance {tol}",
            g(u).abs()
        )));
    }
    Ok(u)
}

/// Right-hand side of the equivalent threshold `u_m < rhs` for strict stability of `(u_m, 1-u_m)`.
pub fn umphp_rhs(params: &ModelParams) -> f64 {
    let (m, p) = (params.m as f64, params.p);
    0.5 - 0.5 * ((m - 1.0) * (1.0 - p) / (m - 1.0 + p + m * p - m * p * p)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityMargin {
    pub u: f64,
    /// `lambda_+(u_m, 1-u_m)`; negative means strictly stable.
    pub margin: f64,
    pub rhs: f64,
    /// Whether `sign(margin) = sign(u_m - rhs)`, counting values within 1e-12 of zero as agreeing.
    pub agree: bool,
}

pub fn um_stability_margin(params: &ModelParams) -> Result<StabilityMargin> {
    let u = solve_um(params, 1e-13)?;
    let (m, p) = (params.m as f64, params.p);
    let margin = -1.0 + m * p + m * (1.0 - p) * f_weight(params.m, u);
    let rhs = umphp_rhs(params);
    let agree = margin.abs() < 1e-12 || (u - rhs).abs() < 1e-12 || (margin < 0.0) == (u < rhs);
    Ok(StabilityMargin {
        u,
        margin,
        rhs,
        agree,
    })
}

/// `g1(t) = t - (1-p) ratio(t)`.
pub fn g1(params: &ModelParams, t: f64) -> f64 {
    t - (1.0 - params.p) * ratio(params.m, t)
}

/// `g2(z) = p ratio(z)`.
pub fn g2(params: &ModelParams, z: f64) -> f64 {
    params.p * ratio(params.m, z)
}

fn dg1(params: &ModelParams, t: f64) -> f64 {
    1.0 - params.m as f64 * (1.0 - params.p) * f_weight(params.m, t)
}

/// Minimiser of `g1` on `[1/2, 1]`.
fn g1_argmin(params: &ModelParams) -> f64 {
    if dg1(params, 0.5) >= 0.0 {
        0.5
    } else {
        bisect(|t| dg1(params, t), 0.5, 1.0)
    }
}

/// The branch `y = h(z)` of `g1(y) = g2(z)` with `y` above the minimiser of `g1`.
pub fn h_of_z(params: &ModelParams, z: f64) -> Result<f64> {
    require_subcritical(params)?;
    if !(z > 0.5 - 1e-3 / 2.0 && z <= 1.0) {
        return Err(UrnError::Domain(format!("z = {z} outside (1/2 - eps, 1]")));
    }
    if z == 1.0 {
        return Ok(1.0);
    }
    let t0 = g1_argmin(params);
    let target = g2(params, z);
    if target < g1(params, t0) {
        return Err(UrnError::Domain(format!(
            "g2({z}) lies below the minimum of g1"
        )));
    }
    Ok(bisect(|y| g1(params, y) - target, t0, 1.0))
}

/// `h'(z) = p m f(z) / (1 - m (1-p) f(h(z)))`.
pub fn h_derivative(params: &ModelParams, z: f64) -> Result<f64> {
    let h = h_of_z(params, z)?;
    Ok(params.p * params.m as f64 * f_weight(params.m, z) / dg1(params, h))
}

/// `g3(z) = g1(2z - h(z)) - g2(z)`.
pub fn g3(params: &ModelParams, z: f64) -> Result<f64> {
    let h = h_of_z(params, z)?;
    Ok(g1(params, 2.0 * z - h) - g2(params, z))
}

pub fn g3_derivative(params: &ModelParams, z: f64) -> Result<f64> {
    let h = h_of_z(params, z)?;
    let hp = h_derivative(params, z)?;
    Ok(dg1(params, 2.0 * z - h) * (2.0 - hp) - params.m as f64 * params.p * f_weight(params.m, z))
}

/// Equilibrium `s_m = (2 z_m - h(z_m), h(z_m))` from the root of `g3` on
/// `(1/2 + delta, 3/4 - delta)`; `delta` defaults to `min(1/2 - p, p) / 4`.
pub fn solve_sm(params: &ModelParams, delta: Option<f64>) -> Result<Equilibrium> {
    require_subcritical(params)?;
    let p = params.p;
    if p == 0.0 {
        return invalid("p must be positive");
    }
    let limit = (0.5 - p).min(p) / 2.0;
    let delta = delta.unwrap_or(limit / 2.0);
    if !(delta > 0.0 && delta < limit) {
        return invalid(format!("delta must lie in (0, {limit})"));
    }
    let (lo, hi) = (0.5 + delta, 0.75 - delta);
    let (a, b) = (g3(params, lo)?, g3(params, hi)?);
    if (a < 0.0) == (b < 0.0) {
        return Err(UrnError::NotFound(format!(
            "g3 has no sign change on ({lo}, {hi}) for m = {}",
            params.m
        )));
    }
    let z = bisect(|z| g3(params, z).unwrap_or(f64::NAN), lo, hi);
    let h = h_of_z(params, z)?;
    let (x, y) = (2.0 * z - h, h);
    let (f1, f2) = field(params, x, y);
    if f1.hypot(f2) > 1e-9 {
        return Err(UrnError::NotFound(format!(
            "field residual {} at s_m",
            f1.hypot(f2)
        )));
    }
    Ok(classify(params, [x, y], Provenance::Bisection))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::StabilityClass;

    fn mp(m: u32, p: f64) -> ModelParams {
        ModelParams::new(m, p).unwrap()
    }

    #[test]
    fn um_values() {
        assert_eq!(solve_um(&mp(4, 0.0), 1e-12).unwrap(), 0.0);
        assert!((solve_um(&mp(2, 0.18), 1e-12).unwrap() - 0.1).abs() < 1e-12);
        let u3 = solve_um(&mp(3, 0.1), 1e-12).unwrap();
        assert!((u3 - 0.05013229457878133).abs() < 1e-12);
        for k in 1..50 {
            let p = k as f64 / 100.0;
            let closed = (1.0 - (1.0 - 2.0 * p).sqrt()) / 2.0;
            assert!((solve_um(&mp(2, p), 1e-12).unwrap() - closed).abs() < 1e-10);
        }
        assert!(solve_um(&mp(2, 0.5), 1e-12).is_err());
        assert!(solve_um(&mp(2, 0.6), 1e-12).is_err());
    }

    #[test]
    fn margin_signs() {
        for m in [2, 3, 5, 9] {
            for k in 1..50 {
                let s = um_stability_margin(&mp(m, k as f64 / 100.0)).unwrap();
                assert!(s.agree, "m={m} p={}: {s:?}", k as f64 / 100.0);
            }
            let tiny = um_stability_margin(&mp(m, 1e-6)).unwrap();
            assert!((tiny.margin + 1.0).abs() < 1e-4);
        }
        let crit = 1.0 - std::f64::consts::SQRT_2 / 2.0;
        assert!(um_stability_margin(&mp(2, crit - 1e-4)).unwrap().margin < 0.0);
        assert!(um_stability_margin(&mp(2, crit + 1e-4)).unwrap().margin > 0.0);
    }

    #[test]
    fn h_properties() {
        let pr = mp(10, 0.3);
        assert_eq!(h_of_z(&pr, 1.0).unwrap(), 1.0);
        for k in 1..10 {
            let z = 0.5 + k as f64 / 20.0;
            let h = h_of_z(&pr, z).unwrap();
            assert!(h > z, "z={z} h={h}");
            assert!((g1(&pr, h) - g2(&pr, z)).abs() < 1e-12);
            let e = 1e-6;
            let fd = (h_of_z(&pr, z + e).unwrap() - h_of_z(&pr, z - e).unwrap()) / (2.0 * e);
            assert!((fd - h_derivative(&pr, z).unwrap()).abs() < 1e-4);
        }
        assert!(h_of_z(&pr, 0.3).is_err());
    }

    #[test]
    fn g3_derivative_matches_differences() {
        let pr = mp(20, 0.3);
        for z in [0.56, 0.6, 0.68] {
            let e = 1e-6;
            let fd = (g3(&pr, z + e).unwrap() - g3(&pr, z - e).unwrap()) / (2.0 * e);
            assert!((fd - g3_derivative(&pr, z).unwrap()).abs() < 1e-4);
        }
    }

    #[test]
    fn sm_approaches_the_corner() {
        let oracle = [(10, 7.9e-4), (20, 1.76e-6), (30, 3.6e-9), (40, 7.5e-12)];
        let mut prev = f64::INFINITY;
        for (m, want) in oracle {
            let s = solve_sm(&mp(m, 0.3), None).unwrap();
            let dist = (s.location[0] - 0.3).hypot(s.location[1] - 1.0);
            assert!((dist / want - 1.0).abs() < 0.05, "m={m}: {dist}");
            assert!(dist < prev);
            prev = dist;
            assert_eq!(s.class, StabilityClass::StrictlyStable);
        }
        assert!(solve_sm(&mp(4, 0.3), None).is_err());
        assert!(solve_sm(&mp(30, 0.3), Some(0.2)).is_err());
    }
}
