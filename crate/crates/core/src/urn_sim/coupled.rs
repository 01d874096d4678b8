use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ium::draw;
use super::{Recorder, SequentialState, Trajectory, UrnState};
use crate::error::{invalid, Result};
use crate::reinforcement::ReinforcementSeq;
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledRun {
    /// IUM path, one sample per step.
    pub ium: Trajectory,
    /// Sequential path sampled at even sub-steps `2n`.
    pub sequential: Trajectory,
    /// Pairs `(n, i)` with `R~_{2n}(i) < R_n(i)` or `B~_{2n}(i) > B_n(i)`.
    pub violations: u64,
}

/// IUM (d = 2) and the sequential process on shared coins and uniforms.
///
/// Step `n+1` draws `eta(1), U(1), eta(2), U(2)` from the stream; the IUM uses
/// all four, the sequential process uses `U(1)` at sub-step `2n+1` and `U(2)`
/// at sub-step `2n+2`.
pub fn run_coupled(
    b0: [u64; 2],
    r0: [u64; 2],
    p: f64,
    seq: Arc<ReinforcementSeq>,
    seed: u64,
    n_steps: u64,
    record_every: u64,
) -> Result<CoupledRun> {
    if record_every == 0 {
        return invalid("record_every must be at least 1");
    }
    let reach = b0.iter().chain(&r0).sum::<u64>() + 2 * n_steps;
    if !seq.is_non_decreasing(reach)? {
        return invalid("coupling requires a non-decreasing sequence");
    }
    let mut ium = UrnState::init(2, &b0, &r0, p, seq.clone(), seed)?;
    let mut sq = SequentialState::init(b0, r0, seq, seed)?;
    let mut rng = stream(seed);
    let mut rec_ium = Recorder::new(&ium);
    let mut rec_seq = Recorder::new(&sq);
    let mut violations = 0;
    for k in 1..=n_steps {
        let draws = [draw(&mut rng, p), draw(&mut rng, p)];
        ium.step_with_draws(&draws)?;
        sq.step_with_uniform(draws[0].u)?;
        rec_seq.observe(&sq, 2 * k - 1, false);
        sq.step_with_uniform(draws[1].u)?;
        let sample = k % record_every == 0 || k == n_steps;
        rec_ium.observe(&ium, k, sample);
        rec_seq.observe(&sq, 2 * k, sample);
        for i in 0..2 {
            if sq.red()[i] < ium.red()[i] || sq.black()[i] > ium.black()[i] {
                violations += 1;
            }
        }
    }
    Ok(CoupledRun {
        ium: rec_ium.finish(n_steps),
        sequential: rec_seq.finish(2 * n_steps),
        violations,
    })
}

impl CoupledRun {
    /// Columns `step, B_1, B_2, R_1, R_2, Bt_1, Bt_2, Rt_1, Rt_2, violations`;
    /// the sequential counts are taken at sub-step `2 * step`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,B_1,B_2,R_1,R_2,Bt_1,Bt_2,Rt_1,Rt_2,violations")?;
        for ((s, a), b) in self
            .ium
            .steps
            .iter()
            .zip(&self.ium.counts)
            .zip(&self.sequential.counts)
        {
            write!(w, "{s}")?;
            for v in a.iter().chain(b) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", self.violations)?;
        }
        Ok(())
    }
}
