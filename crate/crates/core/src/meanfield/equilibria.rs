use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{eigenvalues, field, jacobian, ModelParams};
use crate::error::{invalid, Result};
use crate::io::fmt_f64;

/// `|lambda_+|` below this is reported as nonstrict stability and flagged.
pub const DEAD_BAND: f64 = 1e-9;
const NEWTON_ITERS: usize = 100;
const BOUNDARY: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    StrictlyStable,
    Stable,
    Unstable,
}

impl StabilityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityClass::StrictlyStable => "strictly_stable",
            StabilityClass::Stable => "stable",
            StabilityClass::Unstable => "unstable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ExactKnown,
    NewtonRefined,
    Bisection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub location: [f64; 2],
    pub residual: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub class: StabilityClass,
    pub provenance: Provenance,
    /// Set when `lambda_+` fell inside the dead band.
    pub review: bool,
}

impl AsRef<[f64]> for Equilibrium {
    fn as_ref(&self) -> &[f64] {
        &self.location
    }
}

pub(crate) fn classify(
    params: &ModelParams,
    location: [f64; 2],
    provenance: Provenance,
) -> Equilibrium {
    let [x, y] = location;
    let (f1, f2) = field(params, x, y);
    let (lambda_minus, lambda_plus) = eigenvalues(params, x, y);
    let review = lambda_plus.abs() < DEAD_BAND;
    let class = if review {
        StabilityClass::Stable
    } else if lambda_plus < 0.0 {
        StabilityClass::StrictlyStable
    } else {
        StabilityClass::Unstable
    };
    Equilibrium {
        location,
        residual: f1.hypot(f2),
        lambda_minus,
        lambda_plus,
        class,
        provenance,
        review,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumScan {
    pub params: ModelParams,
    pub grid_n: usize,
    pub tol: f64,
    pub equilibria: Vec<Equilibrium>,
    /// Grid cells on which both components change sign.
    pub seeds: usize,
    pub newton_failures: usize,
    /// Converged boundary points not in the exact set.
    pub boundary_dropped: usize,
}

fn known_points(p: f64) -> Vec<[f64; 2]> {
    if p == 0.0 {
        let v = [0.0, 0.5, 1.0];
        v.iter()
            .flat_map(|&x| v.iter().map(move |&y| [x, y]))
            .collect()
    } else {
        vec![[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]]
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn norm(v: (f64, f64)) -> f64 {
    v.0.hypot(v.1)
}

/// Damped Newton clamped to the unit square, iterated until the residual stops decreasing.
fn newton(params: &ModelParams, seed: [f64; 2], tol: f64) -> Option<[f64; 2]> {
    let mut v = seed;
    let mut fv = field(params, v[0], v[1]);
    for _ in 0..NEWTON_ITERS {
        let n0 = norm(fv);
        if n0 == 0.0 {
            break;
        }
        let j = jacobian(params, v[0], v[1]);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !det.is_normal() {
            return None;
        }
        let dx = -(j[1][1] * fv.0 - j[0][1] * fv.1) / det;
        let dy = -(j[0][0] * fv.1 - j[1][0] * fv.0) / det;
        let mut lam = 1.0;
        let (cand, fc) = loop {
            let c = [
                (v[0] + lam * dx).clamp(0.0, 1.0),
                (v[1] + lam * dy).clamp(0.0, 1.0),
            ];
            let fc = field(params, c[0], c[1]);
            if norm(fc) < n0 || lam < 1e-6 {
                break (c, fc);
            }
            lam *= 0.5;
        };
        if norm(fc) >= n0 {
            break;
        }
        v = cand;
        fv = fc;
    }
    (norm(fv) < tol).then_some(v)
}

/// Grid-seeded Newton scan for the zeros of the field.
pub fn scan_equilibria(params: &ModelParams, grid_n: usize, tol: f64) -> Result<EquilibriumScan> {
    params.validate()?;
    if grid_n < 64 {
        return invalid(format!("grid must be at least 64, got {grid_n}"));
    }
    if !(tol > 0.0 && tol < 1e-3) {
        return invalid("tol must lie in (0, 1e-3)");
    }
    let step = 1.0 / grid_n as f64;
    let nodes: Vec<Vec<(f64, f64)>> = (0..=grid_n)
        .map(|i| {
            (0..=grid_n)
                .map(|j| field(params, i as f64 * step, j as f64 * step))
                .collect()
        })
        .collect();
    let brackets = |vals: [f64; 4]| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    };
    let known = known_points(params.p);
    let mut found: Vec<Equilibrium> = known
        .iter()
        .map(|&k| classify(params, k, Provenance::ExactKnown))
        .collect();
    let (mut seeds, mut newton_failures, mut boundary_dropped) = (0, 0, 0);
    let radius = 10.0 * tol;
    for i in 0..grid_n {
        for j in 0..grid_n {
            let c = [
                nodes[i][j],
                nodes[i + 1][j],
                nodes[i][j + 1],
                nodes[i + 1][j + 1],
            ];
            if !brackets(c.map(|v| v.0)) || !brackets(c.map(|v| v.1)) {
                continue;
            }
            seeds += 1;
            let Some(v) = newton(
                params,
                [(i as f64 + 0.5) * step, (j as f64 + 0.5) * step],
                tol,
            ) else {
                newton_failures += 1;
                continue;
            };
            let on_boundary = v.iter().any(|&t| !(BOUNDARY..=1.0 - BOUNDARY).contains(&t));
            if on_boundary {
                if !known.iter().any(|&k| dist(k, v) < 1e-6) {
                    boundary_dropped += 1;
                }
                continue;
            }
            if found.iter().any(|e| dist(e.location, v) < radius) {
                continue;
            }
            found.push(classify(params, v, Provenance::NewtonRefined));
        }
    }
    found.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap());
    Ok(EquilibriumScan {
        params: *params,
        grid_n,
        tol,
        equilibria: found,
        seeds,
        newton_failures,
        boundary_dropped,
    })
}

/// Zeros of the field on `[0, 1]^2`, sorted by location.
pub fn find_equilibria(params: &ModelParams, grid_n: usize, tol: f64) -> Result<Vec<Equilibrium>> {
    Ok(scan_equilibria(params, grid_n, tol)?.equilibria)
}

/// Columns `x, y, lambda_minus, lambda_plus, class`.
pub fn write_equilibria_csv<W: Write>(rows: &[Equilibrium], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x,y,lambda_minus,lambda_plus,class")?;
    for e in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(e.location[0]),
            fmt_f64(e.location[1]),
            fmt_f64(e.lambda_minus),
            fmt_f64(e.lambda_plus),
            e.class.as_str()
        )?;
    }
    Ok(())
}
