//! The planar mean-field system `dx/dt = F(x, y)` of the two-urn model with
//! `W(n) = n^m`: vector field, Lyapunov potential, Jacobian spectrum,
//! equilibria and the special solvers for the non-dominated equilibria.

mod equilibria;
mod inequalities;
mod solvers;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::fmt_f64;

pub use equilibria::{
    find_equilibria, scan_equilibria, write_equilibria_csv, Equilibrium, EquilibriumScan,
    Provenance, StabilityClass, DEAD_BAND,
};
pub use inequalities::{beta, beta_violations, lemma_quotient, lemma_violations};
pub use solvers::{
    g1, g2, g3, g3_derivative, h_derivative, h_of_z, solve_sm, solve_um, um_stability_margin,
    umphp_rhs, StabilityMargin,
};

/// Absolute tolerance of the `G` quadrature.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub m: u32,
    pub p: f64,
}

impl ModelParams {
    pub fn new(m: u32, p: f64) -> Result<Self> {
        let params = ModelParams { m, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return invalid(format!("m must be at least 2, got {}", self.m));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return invalid(format!("p must lie in [0, 1], got {}", self.p));
        }
        Ok(())
    }

    fn mf(&self) -> f64 {
        self.m as f64
    }
}

/// `t^m / (t^m + (1-t)^m)` as `1 / (1 + exp(m (ln(1-t) - ln t)))`.
pub fn ratio(m: u32, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else if t == 0.5 {
        0.5
    } else {
        1.0 / (1.0 + (m as f64 * ((-t).ln_1p() - t.ln())).exp())
    }
}

/// `t^(m-1) (1-t)^(m-1) / (t^m + (1-t)^m)^2`; `d ratio / dt = m f`.
pub fn f_weight(m: u32, t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let t = if t > 0.5 { 1.0 - t } else { t };
    let s = t / (1.0 - t);
    let sm1 = s.powi(m as i32 - 1);
    let denom = (1.0 - t) * (1.0 + sm1 * s);
    sm1 / (denom * denom)
}

pub fn field(params: &ModelParams, x: f64, y: f64) -> (f64, f64) {
    let (m, p) = (params.m, params.p);
    let mid = ratio(m, (x + y) / 2.0);
    (
        (1.0 - p) * (ratio(m, x) - x) + p * (mid - x),
        (1.0 - p) * (ratio(m, y) - y) + p * (mid - y),
    )
}

/// `[[J11, J12], [J12, J22]]`.
pub fn jacobian(params: &ModelParams, x: f64, y: f64) -> [[f64; 2]; 2] {
    let (m, p) = (params.mf(), params.p);
    let off = m * p / 2.0 * f_weight(params.m, (x + y) / 2.0);
    [
        [-1.0 + m * (1.0 - p) * f_weight(params.m, x) + off, off],
        [off, -1.0 + m * (1.0 - p) * f_weight(params.m, y) + off],
    ]
}

/// `(lambda_-, lambda_+)` of the symmetric Jacobian.
pub fn eigenvalues(params: &ModelParams, x: f64, y: f64) -> (f64, f64) {
    let j = jacobian(params, x, y);
    let mean = (j[0][0] + j[1][1]) / 2.0;
    let half = (j[0][0] - j[1][1]) / 2.0;
    let rad = half.hypot(j[0][1]);
    (mean - rad, mean + rad)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Subdivision levels below which the error estimate is not trusted.
const MIN_LEVEL: u32 = 5;
const MAX_LEVEL: u32 = 48;

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    level: u32,
) -> f64 {
    let m = (a + b) / 2.0;
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // a coarse pair can agree by accident; only trust the estimate after a few splits
    if level >= MAX_LEVEL || (level >= MIN_LEVEL && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, level + 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, level + 1)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f((a + b) / 2.0), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, 0)
}

/// `G(t) = int_0^t ratio(u) du`.
pub fn g_potential(m: u32, t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    // ratio has its steep part at 1/2; splitting there keeps the subdivision shallow
    if t <= 0.5 {
        integrate(|u| ratio(m, u), 0.0, t, QUAD_TOL / 2.0)
    } else {
        integrate(|u| ratio(m, u), 0.0, 0.5, QUAD_TOL / 4.0)
            + integrate(|u| ratio(m, u), 0.5, t, QUAD_TOL / 4.0)
    }
}

/// `L(x, y) = (1-p) G(x) + (1-p) G(y) + 2p G((x+y)/2) - (x^2 + y^2)/2`, so that `grad L = F`.
pub fn lyapunov(params: &ModelParams, x: f64, y: f64) -> f64 {
    let (m, p) = (params.m, params.p);
    (1.0 - p) * (g_potential(m, x) + g_potential(m, y)) + 2.0 * p * g_potential(m, (x + y) / 2.0)
        - (x * x + y * y) / 2.0
}

/// Closed forms of `L` for `m = 2` and `m = 3`.
pub fn lyapunov_closed(m: u32, p: f64, x: f64, y: f64) -> Result<f64> {
    let ln2 = std::f64::consts::LN_2;
    match m {
        2 => Ok((1.0 - p) / 4.0 * (x * x + (1.0 - x).powi(2)).ln()
            + (1.0 - p) / 4.0 * (y * y + (1.0 - y).powi(2)).ln()
            + p / 2.0 * ((x + y).powi(2) + (2.0 - x - y).powi(2)).ln()
            - p * ln2
            - x * x / 2.0
            + x / 2.0
            - y * y / 2.0
            + y / 2.0),
        3 => Ok((1.0 - p) / 9.0
            * ((x.powi(3) + (1.0 - x).powi(3)).ln() + (y.powi(3) + (1.0 - y).powi(3)).ln())
            + 2.0 * p / 9.0 * ((x + y).powi(3) + (2.0 - x - y).powi(3)).ln()
            - 2.0 * p / 3.0 * ln2
            - (4.0 + p) / 12.0 * x * x
            - (4.0 + p) / 12.0 * y * y
            + p * x * y / 6.0
            + (x + y) / 3.0),
        _ => invalid(format!("closed form only for m = 2 or 3, got {m}")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub lyapunov: Vec<f64>,
}

fn clamp_unit(v: [f64; 2]) -> [f64; 2] {
    [v[0].clamp(0.0, 1.0), v[1].clamp(0.0, 1.0)]
}

/// Classical RK4 on `[0, T]` with step `dt`, clamped to the unit square.
pub fn flow(params: &ModelParams, x0: f64, y0: f64, t_end: f64, dt: f64) -> Result<FlowTrajectory> {
    params.validate()?;
    if !(0.0..=1.0).contains(&x0) || !(0.0..=1.0).contains(&y0) {
        return invalid("initial point must lie in [0, 1]^2");
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return invalid("dt must be positive and T nonnegative");
    }
    let steps = (t_end / dt).ceil() as usize;
    let rhs = |v: [f64; 2]| {
        let (a, b) = field(params, v[0], v[1]);
        [a, b]
    };
    let mut v = [x0, y0];
    let mut out = FlowTrajectory {
        times: vec![0.0],
        states: vec![v],
        lyapunov: vec![lyapunov(params, x0, y0)],
    };
    for k in 1..=steps {
        let h = (t_end - (k - 1) as f64 * dt).min(dt);
        let k1 = rhs(v);
        let k2 = rhs(clamp_unit([v[0] + h / 2.0 * k1[0], v[1] + h / 2.0 * k1[1]]));
        let k3 = rhs(clamp_unit([v[0] + h / 2.0 * k2[0], v[1] + h / 2.0 * k2[1]]));
        let k4 = rhs(clamp_unit([v[0] + h * k3[0], v[1] + h * k3[1]]));
        v = clamp_unit([
            v[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            v[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]);
        out.times.push((k as f64 * dt).min(t_end));
        out.states.push(v);
        out.lyapunov.push(lyapunov(params, v[0], v[1]));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub x: f64,
    pub y: f64,
    pub f1: f64,
    pub f2: f64,
}

/// `resolution x resolution` uniform grid over `[0, 1]^2`, rows ordered by `x` then `y`.
pub fn sample_field(params: &ModelParams, resolution: usize) -> Result<Vec<FieldSample>> {
    params.validate()?;
    if resolution < 2 {
        return invalid("resolution must be at least 2");
    }
    let step = 1.0 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let (x, y) = (i as f64 * step, j as f64 * step);
            let (f1, f2) = field(params, x, y);
            out.push(FieldSample { x, y, f1, f2 });
        }
    }
    Ok(out)
}

pub fn write_field_csv<W: Write>(rows: &[FieldSample], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x,y,F1,F2")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_f64(r.f1),
            fmt_f64(r.f2)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(m: u32, p: f64) -> ModelParams {
        ModelParams::new(m, p).unwrap()
    }

    #[test]
    fn field_examples() {
        for m in [2, 3, 7, 60] {
            for p in [0.0, 0.3, 1.0] {
                for t in [0.0, 0.5, 1.0] {
                    assert_eq!(field(&mp(m, p), t, t), (0.0, 0.0));
                }
            }
        }
        let (f1, f2) = field(&mp(2, 0.0), 0.75, 0.25);
        assert!((f1 - 0.15).abs() < 1e-15 && (f2 + 0.15).abs() < 1e-15);
        assert!(ModelParams::new(1, 0.5).is_err());
        assert!(ModelParams::new(2, 1.5).is_err());
    }

    #[test]
    fn f_weight_examples() {
        for m in [2, 3, 10, 200] {
            assert!((f_weight(m, 0.5) - 1.0).abs() < 1e-15);
            assert_eq!(f_weight(m, 0.0), 0.0);
            assert_eq!(f_weight(m, 1.0), 0.0);
            for t in [0.01, 0.2, 0.37] {
                assert!(
                    (f_weight(m, t) - f_weight(m, 1.0 - t)).abs()
                        <= 1e-12 * f_weight(m, t).max(1e-300)
                );
            }
        }
        // raw formula at m = 3, t = 0.3
        let t: f64 = 0.3;
        let raw = (t * (1.0 - t)).powi(2) / (t.powi(3) + (1.0 - t).powi(3)).powi(2);
        assert!((f_weight(3, t) - raw).abs() < 1e-15);
    }

    #[test]
    fn jacobian_and_eigenvalues() {
        for m in [2u32, 3, 6] {
            let pr = mp(m, 0.3);
            let mf = m as f64;
            let j = jacobian(&pr, 0.5, 0.5);
            assert!((j[0][0] - (-1.0 + mf * 0.7 + mf * 0.15)).abs() < 1e-14);
            assert!((j[0][1] - mf * 0.15).abs() < 1e-14);
            let (lm, lp) = eigenvalues(&pr, 0.5, 0.5);
            assert!((lp - (mf - 1.0)).abs() < 1e-12);
            assert!((lm - (mf * 0.7 - 1.0)).abs() < 1e-12);
            assert!((eigenvalues(&pr, 0.0, 0.0).1 + 1.0).abs() < 1e-15);
        }
        let pr = mp(3, 0.4);
        let h = 1e-6;
        for (x, y) in [(0.2, 0.7), (0.55, 0.45), (0.9, 0.1)] {
            let j = jacobian(&pr, x, y);
            let (a, b) = field(&pr, x + h, y);
            let (c, d) = field(&pr, x - h, y);
            assert!(((a - c) / (2.0 * h) - j[0][0]).abs() < 1e-5);
            assert!(((b - d) / (2.0 * h) - j[1][0]).abs() < 1e-5);
        }
    }

    #[test]
    fn lyapunov_matches_closed_forms() {
        for (x, y, p) in [(0.3, 0.7, 0.2), (0.9, 0.1, 0.5), (0.05, 0.6, 0.8)] {
            for m in [2, 3] {
                let q = lyapunov(&mp(m, p), x, y);
                let c = lyapunov_closed(m, p, x, y).unwrap();
                assert!((q - c).abs() < 1e-9, "m={m}: {q} vs {c}");
            }
        }
        assert_eq!(lyapunov(&mp(5, 0.3), 0.0, 0.0), 0.0);
        assert!(lyapunov_closed(2, 0.3, 0.0, 0.0).unwrap().abs() < 1e-15);
        assert!(lyapunov_closed(4, 0.3, 0.1, 0.1).is_err());
    }

    #[test]
    fn quadrature_on_known_integrals() {
        let v = integrate(|u| u.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        // G for m = 2: t/2 + ln(t^2 + (1-t)^2)/4
        for t in [0.1f64, 0.5, 0.77, 1.0] {
            let exact = t / 2.0 + (t * t + (1.0 - t) * (1.0 - t)).ln() / 4.0;
            assert!((g_potential(2, t) - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn flow_properties() {
        let pr = mp(3, 0.3);
        let still = flow(&pr, 0.5, 0.5, 5.0, 0.01).unwrap();
        assert!(still
            .states
            .iter()
            .all(|s| (s[0] - 0.5).abs() < 1e-8 && (s[1] - 0.5).abs() < 1e-8));
        let diag = flow(&pr, 0.3, 0.3, 10.0, 0.01).unwrap();
        assert!(diag.states.iter().all(|s| (s[0] - s[1]).abs() < 1e-10));
        let path = flow(&pr, 0.2, 0.9, 10.0, 0.01).unwrap();
        assert!(path.lyapunov.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert_eq!(path.times.len(), 1001);
    }

    #[test]
    fn field_grid() {
        let rows = sample_field(&mp(3, 0.5), 3).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!((rows[0].f1, rows[0].f2), (0.0, 0.0));
        assert_eq!((rows[8].f1, rows[8].f2), (0.0, 0.0));
        assert!(sample_field(&mp(3, 0.5), 1).is_err());
        let mut buf = Vec::new();
        write_field_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 10);
    }
}
