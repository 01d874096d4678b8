//! Continuous-time embedding of the multi-color urn with time delays.
//!
//! A walker sits on one vertex with `Nc` loops. Each loop carries an
//! exponential timer; when one rings the walker crosses that loop. Timer rates
//! are refreshed only every `d` jumps, to `W(Z_{kd}(i))`, and a refresh keeps
//! the unit-exponential mass each timer has left. Sampling the visit counts at
//! the refresh jumps reproduces the discrete urn that adds `d` balls per step.

mod law;

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, UrnError};
use crate::io::fmt_f64;
use crate::reinforcement::ReinforcementSeq;
use crate::rng::{stream, UrnRng};
use crate::urn_sim::UrnProcess;

pub use law::{compare_laws, sample_discrete, sample_embedded, LawSamples, MIN_SAMPLES};

/// Tolerated negative remaining mass before it counts as a numerical fault.
const MASS_TOL: f64 = 1e-12;

/// When timer rates are brought up to date.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefreshSchedule {
    /// Every `d` jumps (the construction proper).
    #[default]
    Delayed,
    /// After every jump regardless of `d`; does not embed the `d`-ball urn.
    EveryJump,
}

/// Stretch of a timer's life at one rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Count at which the rate was evaluated: the rate is `W(arg)`.
    pub arg: u64,
    pub rate: f64,
    /// Unit-exponential mass consumed at this rate.
    pub mass: f64,
}

#[derive(Clone, Debug)]
struct Timer {
    /// Remaining unit-exponential mass.
    mass: f64,
    xi: f64,
    rate: f64,
    arg: u64,
    /// Run time since the last refresh.
    elapsed: f64,
    /// `Z(i)` when the timer was launched.
    visit: u64,
    start: f64,
    /// Total run time so far.
    held: f64,
    segments: Vec<Segment>,
}

/// A timer that has rung.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletedTimer {
    pub visit: u64,
    pub start: f64,
    pub end: f64,
    /// Run time accumulated jump by jump; equals `end - start` up to rounding.
    pub held: f64,
    pub xi: f64,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Jump number `n >= 1`.
    pub index: u64,
    pub tau: f64,
    pub edge: usize,
    pub z: Vec<u64>,
    pub refresh: bool,
}

/// Term `b_l / W(n - l)` of a holding-time decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaTerm {
    pub ell: u64,
    pub rate: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, Default)]
struct EventLog {
    jumps: Vec<JumpEvent>,
    /// Per edge, indexed by `visit - a_i`.
    completed: Vec<Vec<CompletedTimer>>,
    /// `Z_{kd}` for `k = 0, 1, ...`.
    snapshots: Vec<Vec<u64>>,
}

#[derive(Clone, Debug)]
pub struct EmbeddingState {
    a: Vec<u64>,
    z: Vec<u64>,
    d: u64,
    n: u64,
    tau: f64,
    seq: Arc<ReinforcementSeq>,
    seed: u64,
    rng: UrnRng,
    schedule: RefreshSchedule,
    timers: Vec<Timer>,
    refresh_z: Vec<u64>,
    log: Option<EventLog>,
}

impl EmbeddingState {
    /// Construction with the delayed schedule and a full event log.
    pub fn init(
        nc: usize,
        a: &[u64],
        d: u64,
        seq: Arc<ReinforcementSeq>,
        seed: u64,
    ) -> Result<Self> {
        Self::with_options(nc, a, d, seq, seed, RefreshSchedule::Delayed, true)
    }

    pub fn with_options(
        nc: usize,
        a: &[u64],
        d: u64,
        seq: Arc<ReinforcementSeq>,
        seed: u64,
        schedule: RefreshSchedule,
        keep_log: bool,
    ) -> Result<Self> {
        if nc < 2 {
            return invalid("need at least two edges");
        }
        if a.len() != nc {
            return invalid(format!("initial counts must have length Nc = {nc}"));
        }
        if d == 0 {
            return invalid("d must be at least 1");
        }
        for (i, &ai) in a.iter().enumerate() {
            if seq.weight(ai)?.is_zero() {
                return invalid(format!("edge {} starts with zero rate W({ai})", i + 1));
            }
        }
        let mut state = EmbeddingState {
            a: a.to_vec(),
            z: a.to_vec(),
            d,
            n: 0,
            tau: 0.0,
            seq,
            seed,
            rng: stream(seed),
            schedule,
            timers: Vec::with_capacity(nc),
            refresh_z: a.to_vec(),
            log: keep_log.then(|| EventLog {
                jumps: Vec::new(),
                completed: vec![Vec::new(); nc],
                snapshots: vec![a.to_vec()],
            }),
        };
        for &ai in a {
            let t = state.new_timer(ai, ai)?;
            state.timers.push(t);
        }
        Ok(state)
    }

    fn new_timer(&mut self, arg: u64, visit: u64) -> Result<Timer> {
        let rate = self.seq.weight(arg)?.value();
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(UrnError::ConditionViolation(format!(
                "rate W({arg}) = {rate} is not a positive finite number"
            )));
        }
        let xi: f64 = self.rng.sample(Exp1);
        Ok(Timer {
            mass: xi,
            xi,
            rate,
            arg,
            elapsed: 0.0,
            visit,
            start: self.tau,
            held: 0.0,
            segments: if self.log.is_some() {
                vec![Segment {
                    arg,
                    rate,
                    mass: 0.0,
                }]
            } else {
                Vec::new()
            },
        })
    }

    pub fn nc(&self) -> usize {
        self.z.len()
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn jumps(&self) -> u64 {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn z(&self) -> &[u64] {
        &self.z
    }

    pub fn schedule(&self) -> RefreshSchedule {
        self.schedule
    }

    /// Current `(remaining mass, rate)` per edge.
    pub fn timers(&self) -> Vec<(f64, f64)> {
        self.timers.iter().map(|t| (t.mass, t.rate)).collect()
    }

    /// Run time of each timer since the last refresh.
    pub fn elapsed_since_refresh(&self) -> Vec<f64> {
        self.timers.iter().map(|t| t.elapsed).collect()
    }

    /// Replace the remaining masses (for deterministic scenarios in tests and tools).
    pub fn set_masses(&mut self, masses: &[f64]) -> Result<()> {
        if masses.len() != self.nc() || masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return invalid("one positive finite mass per edge is required");
        }
        for (t, &m) in self.timers.iter_mut().zip(masses) {
            t.mass = m;
            t.xi = m;
        }
        Ok(())
    }

    fn is_refresh(&self, n: u64) -> bool {
        match self.schedule {
            RefreshSchedule::Delayed => n.is_multiple_of(self.d),
            RefreshSchedule::EveryJump => true,
        }
    }

    /// Ring the next timer, cross its edge and re-arm it.
    pub fn advance_to_next_jump(&mut self) -> Result<JumpEvent> {
        let mut edge = usize::MAX;
        let mut dt = f64::INFINITY;
        for (i, t) in self.timers.iter().enumerate() {
            let rem = t.mass / t.rate;
            if rem < dt {
                dt = rem;
                edge = i;
            }
        }
        if edge == usize::MAX {
            return Err(UrnError::ConditionViolation("no timer can ring".into()));
        }
        self.tau += dt;
        for (i, t) in self.timers.iter_mut().enumerate() {
            let used = if i == edge { t.mass } else { t.rate * dt };
            t.mass -= used;
            t.elapsed += dt;
            t.held += dt;
            if let Some(s) = t.segments.last_mut() {
                s.mass += used;
            }
            if t.mass < -MASS_TOL {
                return Err(UrnError::Internal(format!(
                    "negative remaining mass {} on edge {}",
                    t.mass,
                    i + 1
                )));
            }
            t.mass = t.mass.max(0.0);
        }
        self.z[edge] += 1;
        self.n += 1;
        let rung = self.timers[edge].clone();
        if let Some(log) = self.log.as_mut() {
            log.completed[edge].push(CompletedTimer {
                visit: rung.visit,
                start: rung.start,
                end: self.tau,
                held: rung.held,
                xi: rung.xi,
                segments: rung.segments,
            });
            if self.n.is_multiple_of(self.d) {
                log.snapshots.push(self.z.clone());
            }
        }
        let refresh = self.is_refresh(self.n);
        if refresh {
            self.refresh_z.copy_from_slice(&self.z);
            self.refresh_except(Some(edge))?;
        }
        // Launched at a refresh boundary: rate from the fresh snapshot.
        let arg = self.refresh_z[edge];
        let visit = self.z[edge];
        self.timers[edge] = self.new_timer(arg, visit)?;
        let event = JumpEvent {
            index: self.n,
            tau: self.tau,
            edge,
            z: self.z.clone(),
            refresh,
        };
        if let Some(log) = self.log.as_mut() {
            log.jumps.push(event.clone());
        }
        Ok(event)
    }

    /// Bring every timer to rate `W(Z(i))`, keeping its remaining mass.
    ///
    /// Called automatically at refresh jumps; calling it again is a no-op.
    pub fn refresh_rates(&mut self) -> Result<()> {
        if self.schedule == RefreshSchedule::Delayed && !self.n.is_multiple_of(self.d) {
            return invalid(format!(
                "refresh requested at jump {} with d = {}",
                self.n, self.d
            ));
        }
        self.refresh_z.copy_from_slice(&self.z);
        self.refresh_except(None)
    }

    fn refresh_except(&mut self, skip: Option<usize>) -> Result<()> {
        for i in 0..self.timers.len() {
            if Some(i) == skip {
                continue;
            }
            let arg = self.z[i];
            let t = &self.timers[i];
            if t.mass < -MASS_TOL {
                return Err(UrnError::Internal(format!(
                    "negative remaining mass on edge {}",
                    i + 1
                )));
            }
            if t.arg == arg {
                self.timers[i].elapsed = 0.0;
                continue;
            }
            let rate = self.seq.weight(arg)?.value();
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(UrnError::ConditionViolation(format!(
                    "rate W({arg}) = {rate} is not a positive finite number"
                )));
            }
            let keep = self.log.is_some();
            let t = &mut self.timers[i];
            t.rate = rate;
            t.arg = arg;
            t.elapsed = 0.0;
            if keep {
                t.segments.push(Segment {
                    arg,
                    rate,
                    mass: 0.0,
                });
            }
        }
        Ok(())
    }

    /// Advance until `Z_{kd}` is reached and return it.
    pub fn run_to_refresh(&mut self, k: u64) -> Result<Vec<u64>> {
        let target = k * self.d;
        if self.n > target {
            return invalid(format!("already past jump {target}"));
        }
        while self.n < target {
            self.advance_to_next_jump()?;
        }
        Ok(self.z.clone())
    }

    fn log(&self) -> Result<&EventLog> {
        self.log
            .as_ref()
            .ok_or_else(|| UrnError::InvalidArgument("event log is disabled for this state".into()))
    }

    pub fn events(&self) -> Result<&[JumpEvent]> {
        Ok(&self.log()?.jumps)
    }

    /// `Z_{kd}` from the log; `k = 0` gives the initial counts.
    pub fn extract_discrete(&self, k: u64) -> Result<Vec<u64>> {
        self.log()?
            .snapshots
            .get(k as usize)
            .cloned()
            .ok_or_else(|| UrnError::InvalidArgument(format!("Z_kd for k = {k} not reached yet")))
    }

    fn completed(&self, edge: usize, n: u64) -> Result<&CompletedTimer> {
        if edge >= self.nc() {
            return invalid(format!("edge index {edge} out of range"));
        }
        let a = self.a[edge];
        let log = self.log()?;
        n.checked_sub(a)
            .and_then(|j| log.completed[edge].get(j as usize))
            .ok_or_else(|| {
                UrnError::InvalidArgument(format!("sigma_{}({}) not realized", n + 1, edge + 1))
            })
    }

    /// Visit time `sigma_n(edge)`: `0` at `n = a_edge`, then the time `Z(edge)` reached `n`.
    pub fn sigma(&self, edge: usize, n: u64) -> Result<f64> {
        if edge < self.nc() && n == self.a[edge] {
            return Ok(0.0);
        }
        let prev = n
            .checked_sub(1)
            .ok_or_else(|| UrnError::InvalidArgument("n must be positive".into()))?;
        Ok(self.completed(edge, prev)?.end)
    }

    /// `sigma_{n+1}(edge) - sigma_n(edge)`.
    pub fn holding_time(&self, edge: usize, n: u64) -> Result<f64> {
        Ok(self.completed(edge, n)?.held)
    }

    /// Unit-exponential mass `b_l` spent at rate `W(n - l)` by the timer that
    /// ran from `sigma_n(edge)` to `sigma_{n+1}(edge)`, sorted by `l`.
    pub fn sigma_decomposition(&self, edge: usize, n: u64) -> Result<Vec<SigmaTerm>> {
        let c = self.completed(edge, n)?;
        let mut terms: Vec<SigmaTerm> = Vec::new();
        for s in &c.segments {
            let ell = n.checked_sub(s.arg).ok_or_else(|| {
                UrnError::Internal(format!("rate argument {} exceeds visit {n}", s.arg))
            })?;
            match terms.iter_mut().find(|t| t.ell == ell) {
                Some(t) => t.mass += s.mass,
                None => terms.push(SigmaTerm {
                    ell,
                    rate: s.rate,
                    mass: s.mass,
                }),
            }
        }
        terms.sort_by_key(|t| t.ell);
        Ok(terms)
    }

    /// The exponential draw behind `sigma_{n+1}(edge) - sigma_n(edge)`.
    pub fn timer_mass(&self, edge: usize, n: u64) -> Result<f64> {
        Ok(self.completed(edge, n)?.xi)
    }

    /// Columns `jump_index, tau, edge, Z_1..Z_Nc, refresh_flag`; edges are 1-based.
    pub fn write_event_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let log = self.log()?;
        write!(w, "jump_index,tau,edge")?;
        for i in 1..=self.nc() {
            write!(w, ",Z_{i}")?;
        }
        writeln!(w, ",refresh_flag")?;
        for e in &log.jumps {
            write!(w, "{},{},{}", e.index, fmt_f64(e.tau), e.edge + 1)?;
            for z in &e.z {
                write!(w, ",{z}")?;
            }
            writeln!(w, ",{}", u8::from(e.refresh))?;
        }
        Ok(())
    }
}

impl UrnProcess for EmbeddingState {
    fn step(&mut self) -> Result<()> {
        self.advance_to_next_jump().map(|_| ())
    }

    fn time(&self) -> u64 {
        self.n
    }

    fn n_colors(&self) -> usize {
        self.nc()
    }

    fn color_total(&self, c: usize) -> u64 {
        self.z[c]
    }

    fn proportions(&self) -> Vec<f64> {
        let total: u64 = self.z.iter().sum();
        self.z.iter().map(|&c| c as f64 / total as f64).collect()
    }

    fn counts(&self) -> Vec<u64> {
        self.z.clone()
    }

    fn count_labels(&self) -> Vec<String> {
        (1..=self.nc()).map(|i| format!("Z_{i}")).collect()
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}
