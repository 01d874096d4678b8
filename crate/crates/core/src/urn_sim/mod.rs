//! Discrete-time urn simulators: the interacting urn mechanism, the
//! multi-color single urn, the sequential two-urn process and the pathwise
//! coupling between the first and the last.

mod coupled;
mod ium;
mod multicolor;
mod sequential;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::fmt_f64;

pub use coupled::{run_coupled, CoupledRun};
pub use ium::{Draw, UrnState};
pub use multicolor::MultiColorState;
pub use sequential::SequentialState;

/// Color index of black balls in two-color models.
pub const BLACK: usize = 0;
/// Color index of red balls in two-color models.
pub const RED: usize = 1;

/// Common surface of the simulators, used by [`run`] and the ensemble harness.
pub trait UrnProcess {
    /// Advance by one step (one sub-step for the sequential process).
    fn step(&mut self) -> Result<()>;
    /// Steps taken so far.
    fn time(&self) -> u64;
    /// Number of colors tracked by the increment log.
    fn n_colors(&self) -> usize;
    /// Total count of color `c` over all urns.
    fn color_total(&self, c: usize) -> u64;
    fn proportions(&self) -> Vec<f64>;
    fn counts(&self) -> Vec<u64>;
    fn count_labels(&self) -> Vec<String>;
    fn seed(&self) -> u64;
}

/// Last step at which each color received a ball.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncrementLog {
    pub n_steps: u64,
    pub last_increment: Vec<Option<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monopoly {
    /// Only this color was added over the window.
    Color(usize),
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitLabel {
    /// Index into the target list passed to [`classify_limit`].
    Target(usize),
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<u64>,
    pub proportions: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub count_labels: Vec<String>,
    pub increments: IncrementLog,
    pub seed: u64,
    #[serde(default)]
    pub monopoly: Option<Monopoly>,
    #[serde(default)]
    pub limit: Option<LimitLabel>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_proportions(&self) -> &[f64] {
        self.proportions.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_step(&self) -> u64 {
        self.steps.last().copied().unwrap_or(0)
    }

    /// Columns `step, x_1..x_d`.
    pub fn write_proportions_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.proportions.first().map(Vec::len).unwrap_or(0);
        write!(w, "step")?;
        for i in 1..=d {
            write!(w, ",x_{i}")?;
        }
        writeln!(w)?;
        for (s, row) in self.steps.iter().zip(&self.proportions) {
            write!(w, "{s}")?;
            for v in row {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Columns `step` followed by the simulator's count labels.
    pub fn write_counts_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "step")?;
        for l in &self.count_labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for (s, row) in self.steps.iter().zip(&self.counts) {
            write!(w, "{s}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Incremental trajectory builder shared by [`run`] and the coupled runner.
pub(crate) struct Recorder {
    totals: Vec<u64>,
    last: Vec<Option<u64>>,
    traj: Trajectory,
}

impl Recorder {
    pub(crate) fn new<P: UrnProcess + ?Sized>(state: &P) -> Self {
        let nc = state.n_colors();
        Recorder {
            totals: (0..nc).map(|c| state.color_total(c)).collect(),
            last: vec![None; nc],
            traj: Trajectory {
                steps: vec![state.time()],
                proportions: vec![state.proportions()],
                counts: vec![state.counts()],
                count_labels: state.count_labels(),
                increments: IncrementLog {
                    n_steps: 0,
                    last_increment: Vec::new(),
                },
                seed: state.seed(),
                monopoly: None,
                limit: None,
            },
        }
    }

    /// Note the increments of step `k` and sample if `sample` is set.
    pub(crate) fn observe<P: UrnProcess + ?Sized>(&mut self, state: &P, k: u64, sample: bool) {
        for (c, t) in self.totals.iter_mut().enumerate() {
            let now = state.color_total(c);
            if now != *t {
                self.last[c] = Some(k);
                *t = now;
            }
        }
        if sample {
            self.traj.steps.push(state.time());
            self.traj.proportions.push(state.proportions());
            self.traj.counts.push(state.counts());
        }
    }

    pub(crate) fn finish(mut self, n_steps: u64) -> Trajectory {
        self.traj.increments = IncrementLog {
            n_steps,
            last_increment: self.last,
        };
        self.traj
    }
}

/// Advance `state` by `n_steps`, sampling at step 0, every `record_every`
/// steps and at the final step.
pub fn run<P: UrnProcess + ?Sized>(
    state: &mut P,
    n_steps: u64,
    record_every: u64,
) -> Result<Trajectory> {
    if record_every == 0 {
        return invalid("record_every must be at least 1");
    }
    let mut rec = Recorder::new(state);
    for k in 1..=n_steps {
        state.step()?;
        rec.observe(state, k, k % record_every == 0 || k == n_steps);
    }
    Ok(rec.finish(n_steps))
}

/// Finite-horizon monopoly proxy: a color wins if no other color received a
/// ball during the final `window` steps.
pub fn detect_monopoly(log: &IncrementLog, window: u64) -> Result<Monopoly> {
    if window == 0 || window > log.n_steps {
        return invalid(format!("window {window} must lie in 1..={}", log.n_steps));
    }
    let cutoff = log.n_steps - window;
    let active: Vec<usize> = log
        .last_increment
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, Some(s) if *s > cutoff))
        .map(|(c, _)| c)
        .collect();
    Ok(match active.as_slice() {
        [c] => Monopoly::Color(*c),
        _ => Monopoly::None,
    })
}

/// Default monopoly window: the final 20% of the steps, at least one step.
pub fn default_window(n_steps: u64) -> u64 {
    (n_steps / 5).max(1)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Label of the target nearest to the final sample, provided the last quarter
/// of samples stays within `radius` of it.
pub fn classify_limit<T: AsRef<[f64]>>(
    traj: &Trajectory,
    targets: &[T],
    radius: f64,
) -> Result<LimitLabel> {
    if targets.is_empty() {
        return invalid("no targets to classify against");
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return invalid("radius must be positive");
    }
    let Some(last) = traj.proportions.last() else {
        return Ok(LimitLabel::Unresolved);
    };
    if targets.iter().any(|t| t.as_ref().len() != last.len()) {
        return invalid(format!(
            "target dimension does not match the trajectory dimension {}",
            last.len()
        ));
    }
    if traj.final_step() == traj.steps[0] {
        return Ok(LimitLabel::Unresolved);
    }
    let (best, _) = targets
        .iter()
        .enumerate()
        .map(|(i, t)| (i, distance(last, t.as_ref())))
        .fold(
            (0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    let target = targets[best].as_ref();
    let tail_start = traj.len() * 3 / 4;
    let confined = traj.proportions[tail_start..]
        .iter()
        .all(|x| distance(x, target) <= radius);
    Ok(if confined {
        LimitLabel::Target(best)
    } else {
        LimitLabel::Unresolved
    })
}

/// Vertices of the probability simplex in `dim` dimensions.
pub fn simplex_vertices(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Corners `{0,1}^dim`, in binary order with the first coordinate most significant.
pub fn cube_corners(dim: usize) -> Vec<Vec<f64>> {
    (0..1usize << dim)
        .map(|k| {
            (0..dim)
                .map(|j| ((k >> (dim - 1 - j)) & 1) as f64)
                .collect()
        })
        .collect()
}
