use std::sync::Arc;

use rand::Rng;

use super::UrnProcess;
use crate::error::{invalid, Result};
use crate::reinforcement::{draw_probability, ReinforcementSeq};
use crate::rng::{stream, UrnRng};

/// Random inputs for one urn in one step: the interaction coin `eta` and the
/// uniform `u` that decides the color (black iff `u < P(black)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Draw {
    pub eta: bool,
    pub u: f64,
}

/// Interacting urn mechanism with `d` urns of black and red balls.
#[derive(Clone, Debug)]
pub struct UrnState {
    b: Vec<u64>,
    r: Vec<u64>,
    b0: Vec<u64>,
    r0: Vec<u64>,
    n: u64,
    p: f64,
    seq: Arc<ReinforcementSeq>,
    seed: u64,
    rng: UrnRng,
    draws: Vec<Draw>,
}

impl UrnState {
    pub fn init(
        d: usize,
        b0: &[u64],
        r0: &[u64],
        p: f64,
        seq: Arc<ReinforcementSeq>,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 {
            return invalid("need at least one urn");
        }
        if b0.len() != d || r0.len() != d {
            return invalid(format!("initial counts must have length d = {d}"));
        }
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("p must lie in [0, 1], got {p}"));
        }
        if b0.iter().zip(r0).any(|(b, r)| b + r == 0) {
            return invalid("every urn needs at least one ball");
        }
        let bs: u64 = b0.iter().sum();
        let rs: u64 = r0.iter().sum();
        if seq.weight(bs)?.is_zero() || seq.weight(rs)?.is_zero() {
            return invalid("a color pool has zero weight at n = 0");
        }
        if p < 1.0 {
            for (i, (&b, &r)) in b0.iter().zip(r0).enumerate() {
                if seq.weight(b)?.is_zero() && seq.weight(r)?.is_zero() {
                    return invalid(format!("urn {} has zero total weight at n = 0", i + 1));
                }
            }
        }
        Ok(UrnState {
            b: b0.to_vec(),
            r: r0.to_vec(),
            b0: b0.to_vec(),
            r0: r0.to_vec(),
            n: 0,
            p,
            seq,
            seed,
            rng: stream(seed),
            draws: vec![Draw { eta: false, u: 0.0 }; d],
        })
    }

    pub fn d(&self) -> usize {
        self.b.len()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn black(&self) -> &[u64] {
        &self.b
    }

    pub fn red(&self) -> &[u64] {
        &self.r
    }

    pub fn initial_black(&self) -> &[u64] {
        &self.b0
    }

    pub fn initial_red(&self) -> &[u64] {
        &self.r0
    }

    pub fn black_total(&self) -> u64 {
        self.b.iter().sum()
    }

    pub fn red_total(&self) -> u64 {
        self.r.iter().sum()
    }

    pub fn seq(&self) -> &ReinforcementSeq {
        &self.seq
    }

    /// `P(black added to urn i)` given the interaction coin.
    pub fn black_probability(&self, i: usize, eta: bool) -> Result<f64> {
        if eta {
            draw_probability(
                self.seq.weight(self.black_total())?,
                self.seq.weight(self.red_total())?,
            )
        } else {
            draw_probability(self.seq.weight(self.b[i])?, self.seq.weight(self.r[i])?)
        }
    }

    /// Draw inputs for the next step from the stream: per urn, `eta` then `u`.
    pub fn next_draws(&mut self) -> Vec<Draw> {
        (0..self.d()).map(|_| draw(&mut self.rng, self.p)).collect()
    }

    /// Synchronous update from explicit draws; every urn sees the time-n counts.
    pub fn step_with_draws(&mut self, draws: &[Draw]) -> Result<()> {
        if draws.len() != self.d() {
            return invalid("one draw per urn is required");
        }
        let mut global = None;
        let mut black = vec![false; self.d()];
        for (i, dr) in draws.iter().enumerate() {
            let prob = if dr.eta {
                match global {
                    Some(g) => g,
                    None => {
                        let g = self.black_probability(i, true)?;
                        global = Some(g);
                        g
                    }
                }
            } else {
                self.black_probability(i, false)?
            };
            black[i] = dr.u < prob;
        }
        for (i, is_black) in black.into_iter().enumerate() {
            if is_black {
                self.b[i] += 1;
            } else {
                self.r[i] += 1;
            }
        }
        self.n += 1;
        Ok(())
    }
}

pub(crate) fn draw(rng: &mut UrnRng, p: f64) -> Draw {
    let eta = rng.random::<f64>() < p;
    let u = rng.random::<f64>();
    Draw { eta, u }
}

impl UrnProcess for UrnState {
    fn step(&mut self) -> Result<()> {
        let mut draws = std::mem::take(&mut self.draws);
        for dr in draws.iter_mut() {
            *dr = draw(&mut self.rng, self.p);
        }
        let out = self.step_with_draws(&draws);
        self.draws = draws;
        out
    }

    fn time(&self) -> u64 {
        self.n
    }

    fn n_colors(&self) -> usize {
        2
    }

    fn color_total(&self, c: usize) -> u64 {
        if c == 0 {
            self.black_total()
        } else {
            self.red_total()
        }
    }

    /// `B_n(i) / (n + B_0(i) + R_0(i))`.
    fn proportions(&self) -> Vec<f64> {
        (0..self.d())
            .map(|i| self.b[i] as f64 / (self.n + self.b0[i] + self.r0[i]) as f64)
            .collect()
    }

    fn counts(&self) -> Vec<u64> {
        self.b.iter().chain(&self.r).copied().collect()
    }

    fn count_labels(&self) -> Vec<String> {
        let d = self.d();
        (1..=d)
            .map(|i| format!("B_{i}"))
            .chain((1..=d).map(|i| format!("R_{i}")))
            .collect()
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}
