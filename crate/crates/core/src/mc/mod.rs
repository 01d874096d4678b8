//! Seeded Monte Carlo ensembles over the simulators.
//!
//! Run `i` of an ensemble uses the seed `derive_seed(master, i)` and nothing
//! else, so results do not depend on the thread count and are reduced in run
//! index order.

mod config;

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctime::EmbeddingState;
use crate::error::{invalid, Result};
use crate::io::fmt_f64;
use crate::meanfield::{scan_equilibria, EquilibriumScan, ModelParams, StabilityClass};
use crate::reinforcement::ReinforcementSeq;
use crate::rng::derive_seed;
use crate::stats::wilson_interval;
use crate::urn_sim::{
    classify_limit, cube_corners, detect_monopoly, run, simplex_vertices, LimitLabel, Monopoly,
    MultiColorState, SequentialState, UrnProcess, UrnState,
};

pub use config::{EnsembleConfig, ModelConfig, ScanConfig, SCHEMA_VERSION};

/// Grid and Newton tolerance used when an ensemble computes its own equilibria.
pub const EQUILIBRIUM_GRID: usize = 128;
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub count: u64,
    pub trials: u64,
    pub frequency: f64,
    pub interval: (f64, f64),
}

impl Frequency {
    pub fn new(count: u64, trials: u64, level: f64) -> Result<Self> {
        Ok(Frequency {
            count,
            trials,
            frequency: count as f64 / trials as f64,
            interval: wilson_interval(count, trials, level)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub location: Vec<f64>,
    /// Mean-field class when the targets are equilibria.
    pub class: Option<StabilityClass>,
    pub dominating: bool,
    pub hits: Frequency,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_index: u64,
    pub seed: u64,
    pub label: LimitLabel,
    pub monopoly: Option<Monopoly>,
    pub final_state: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: EnsembleConfig,
    pub targets: Vec<TargetSummary>,
    pub unresolved: u64,
    pub domination: Frequency,
    /// Runs won by each color; `monopoly.count` is their sum.
    pub monopoly_by_color: Vec<u64>,
    pub monopoly: Frequency,
    pub runs: Vec<RunOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}

impl McReport {
    /// Columns `run_index, seed, label, x_final, y_final`.
    pub fn write_runs_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "run_index,seed,label,x_final,y_final")?;
        for r in &self.runs {
            let label = match r.label {
                LimitLabel::Target(k) => format!("target_{k}"),
                LimitLabel::Unresolved => "unresolved".to_string(),
            };
            let coord = |i: usize| {
                r.final_state
                    .get(i)
                    .map(|&v| fmt_f64(v))
                    .unwrap_or_default()
            };
            writeln!(
                w,
                "{},{},{label},{},{}",
                r.run_index,
                r.seed,
                coord(0),
                coord(1)
            )?;
        }
        Ok(())
    }
}

struct Target {
    location: Vec<f64>,
    class: Option<StabilityClass>,
    dominating: bool,
}

fn all_equal(v: &[f64], x: f64) -> bool {
    v.iter().all(|&t| t == x)
}

fn corner_targets(dim: usize) -> Vec<Target> {
    cube_corners(dim)
        .into_iter()
        .map(|c| Target {
            dominating: all_equal(&c, 0.0) || all_equal(&c, 1.0),
            location: c,
            class: None,
        })
        .collect()
}

fn targets_for(
    config: &EnsembleConfig,
    precomputed: Option<&EquilibriumScan>,
) -> Result<Vec<Target>> {
    match &config.model {
        ModelConfig::Ium {
            m: Some(m), p, d, ..
        } if *d == 2 => {
            let params = ModelParams::new(*m, *p)?;
            let owned;
            let scan = match precomputed {
                Some(s) if s.params != params => {
                    return invalid(format!(
                        "equilibria were computed for m = {}, p = {} but the ensemble uses m = {m}, p = {p}",
                        s.params.m, s.params.p
                    ))
                }
                Some(s) => s,
                None => {
                    owned = scan_equilibria(&params, EQUILIBRIUM_GRID, EQUILIBRIUM_TOL)?;
                    &owned
                }
            };
            Ok(scan
                .equilibria
                .iter()
                .map(|e| Target {
                    location: e.location.to_vec(),
                    class: Some(e.class),
                    dominating: all_equal(&e.location, 0.0) || all_equal(&e.location, 1.0),
                })
                .collect())
        }
        _ if precomputed.is_some() => {
            invalid("precomputed equilibria apply only to two-urn polynomial models")
        }
        ModelConfig::Ium { d, .. } => Ok(corner_targets(*d)),
        ModelConfig::Sequential { .. } => Ok(corner_targets(2)),
        ModelConfig::Multicolor { nc, .. } | ModelConfig::Embedding { nc, .. } => {
            Ok(simplex_vertices(*nc)
                .into_iter()
                .map(|v| Target {
                    location: v,
                    class: None,
                    dominating: true,
                })
                .collect())
        }
    }
}

fn build(
    model: &ModelConfig,
    seq: &Arc<ReinforcementSeq>,
    seed: u64,
) -> Result<Box<dyn UrnProcess + Send>> {
    Ok(match model {
        ModelConfig::Ium { d, p, b0, r0, .. } => {
            let ones = vec![1; *d];
            Box::new(UrnState::init(
                *d,
                b0.as_deref().unwrap_or(&ones),
                r0.as_deref().unwrap_or(&ones),
                *p,
                seq.clone(),
                seed,
            )?)
        }
        ModelConfig::Multicolor { nc, d, a, .. } => {
            let ones = vec![1; *nc];
            Box::new(MultiColorState::init(
                *nc,
                a.as_deref().unwrap_or(&ones),
                *d,
                seq.clone(),
                seed,
            )?)
        }
        ModelConfig::Sequential { b0, r0, .. } => Box::new(SequentialState::init(
            b0.unwrap_or([1, 1]),
            r0.unwrap_or([1, 1]),
            seq.clone(),
            seed,
        )?),
        ModelConfig::Embedding {
            nc, d, a, schedule, ..
        } => {
            let ones = vec![1; *nc];
            Box::new(EmbeddingState::with_options(
                *nc,
                a.as_deref().unwrap_or(&ones),
                *d,
                seq.clone(),
                seed,
                schedule.unwrap_or_default(),
                false,
            )?)
        }
    })
}

/// Ensemble with targets computed from the configuration.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<McReport> {
    run_ensemble_with(config, None)
}

/// Ensemble classified against `equilibria`, which must match the model's `(m, p)`.
pub fn run_ensemble_with(
    config: &EnsembleConfig,
    equilibria: Option<&EquilibriumScan>,
) -> Result<McReport> {
    let start = Instant::now();
    config.validate()?;
    let seq = Arc::new(config.model.sequence()?);
    let targets = targets_for(config, equilibria)?;
    let locations: Vec<&[f64]> = targets.iter().map(|t| t.location.as_slice()).collect();
    // surfaces invalid model parameters before any parallel work
    build(&config.model, &seq, 0)?;
    let record_every = config.record_every();
    let window = config.window();
    let runs = (0..config.n_runs)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(config.seed, i);
            let mut state = build(&config.model, &seq, seed)?;
            let traj = run(state.as_mut(), config.n_steps, record_every)?;
            let monopoly = window
                .map(|w| detect_monopoly(&traj.increments, w))
                .transpose()?;
            Ok(RunOutcome {
                run_index: i,
                seed,
                label: classify_limit(&traj, &locations, config.radius)?,
                monopoly,
                final_state: traj.final_proportions().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = config.n_runs;
    let mut hits = vec![0u64; targets.len()];
    let mut unresolved = 0;
    let mut monopoly_by_color = vec![0u64; seq_colors(&config.model)];
    for r in &runs {
        match r.label {
            LimitLabel::Target(k) => hits[k] += 1,
            LimitLabel::Unresolved => unresolved += 1,
        }
        if let Some(Monopoly::Color(c)) = r.monopoly {
            monopoly_by_color[c] += 1;
        }
    }
    let dominated = targets
        .iter()
        .zip(&hits)
        .filter(|(t, _)| t.dominating)
        .map(|(_, h)| h)
        .sum();
    let summaries = targets
        .into_iter()
        .zip(&hits)
        .map(|(t, &h)| {
            Ok(TargetSummary {
                location: t.location,
                class: t.class,
                dominating: t.dominating,
                hits: Frequency::new(h, n, config.level)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McReport {
        config: config.clone(),
        targets: summaries,
        unresolved,
        domination: Frequency::new(dominated, n, config.level)?,
        monopoly: Frequency::new(monopoly_by_color.iter().sum(), n, config.level)?,
        monopoly_by_color,
        runs,
        runtime_secs: Some(start.elapsed().as_secs_f64()),
    })
}

fn seq_colors(model: &ModelConfig) -> usize {
    match model {
        ModelConfig::Multicolor { nc, .. } | ModelConfig::Embedding { nc, .. } => *nc,
        _ => 2,
    }
}

/// Frequency of runs in which a single color received every ball of the final window.
pub fn estimate_monopoly_prob(config: &EnsembleConfig) -> Result<Frequency> {
    if config.n_steps == 0 {
        return invalid("monopoly needs at least one step");
    }
    Ok(run_ensemble(config)?.monopoly)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub m: u32,
    pub threshold: f64,
    pub p: Vec<f64>,
    pub domination: Vec<Frequency>,
    /// Smallest grid value whose domination frequency reaches `threshold`;
    /// an empirical proxy, not the critical parameter itself.
    pub p_threshold: Option<f64>,
}

impl PhaseCurve {
    /// Columns `p, count, trials, frequency, lo, hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "p,count,trials,frequency,lo,hi")?;
        for (p, f) in self.p.iter().zip(&self.domination) {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(*p),
                f.count,
                f.trials,
                fmt_f64(f.frequency),
                fmt_f64(f.interval.0),
                fmt_f64(f.interval.1)
            )?;
        }
        Ok(())
    }
}

/// Domination frequency of the two-urn model with `W(n) = n^m` over `p_grid`.
/// Every grid point reuses `base` with `m` and `p` substituted, including its master seed.
pub fn scan_p(m: u32, p_grid: &[f64], base: &EnsembleConfig, threshold: f64) -> Result<PhaseCurve> {
    if p_grid.is_empty() {
        return invalid("p grid is empty");
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return invalid("threshold must lie in (0, 1]");
    }
    let ModelConfig::Ium { d, b0, r0, .. } = &base.model else {
        return invalid("scan requires the interacting urn model");
    };
    let mut domination = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let mut cfg = base.clone();
        cfg.model = ModelConfig::Ium {
            d: *d,
            p,
            m: Some(m),
            seq: None,
            b0: b0.clone(),
            r0: r0.clone(),
        };
        domination.push(run_ensemble(&cfg)?.domination);
    }
    let p_threshold = p_grid
        .iter()
        .zip(&domination)
        .filter(|(_, f)| f.frequency >= threshold)
        .map(|(&p, _)| p)
        .fold(None, |acc: Option<f64>, p| {
            Some(acc.map_or(p, |a| a.min(p)))
        });
    Ok(PhaseCurve {
        m,
        threshold,
        p: p_grid.to_vec(),
        domination,
        p_threshold,
    })
}

/// Runs a [`ScanConfig`].
pub fn run_scan(config: &ScanConfig) -> Result<PhaseCurve> {
    config.validate()?;
    scan_p(config.m, &config.p_grid, &config.base, config.threshold)
}
