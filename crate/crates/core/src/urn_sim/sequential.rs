use std::sync::Arc;

use rand::Rng;

use super::UrnProcess;
use crate::error::{invalid, Result};
use crate::reinforcement::{draw_probability, ReinforcementSeq};
use crate::rng::{stream, UrnRng};

/// Two urns updated alternately. Sub-step `2n+1` adds to urn 1 against the
/// red total `R~*_{2n}`; sub-step `2n+2` adds to urn 2 against `R~*_{2n+1}`.
#[derive(Clone, Debug)]
pub struct SequentialState {
    b: [u64; 2],
    r: [u64; 2],
    sub: u64,
    seq: Arc<ReinforcementSeq>,
    seed: u64,
    rng: UrnRng,
}

impl SequentialState {
    pub fn init(b0: [u64; 2], r0: [u64; 2], seq: Arc<ReinforcementSeq>, seed: u64) -> Result<Self> {
        if b0[0] + r0[0] == 0 || b0[1] + r0[1] == 0 {
            return invalid("every urn needs at least one ball");
        }
        let rs = r0[0] + r0[1];
        for (i, &b) in b0.iter().enumerate() {
            if seq.weight(b)?.is_zero() && seq.weight(rs)?.is_zero() {
                return invalid(format!("urn {} has zero total weight at n = 0", i + 1));
            }
        }
        Ok(SequentialState {
            b: b0,
            r: r0,
            sub: 0,
            seq,
            seed,
            rng: stream(seed),
        })
    }

    pub fn black(&self) -> [u64; 2] {
        self.b
    }

    pub fn red(&self) -> [u64; 2] {
        self.r
    }

    pub fn red_total(&self) -> u64 {
        self.r[0] + self.r[1]
    }

    /// Sub-steps taken so far.
    pub fn sub_steps(&self) -> u64 {
        self.sub
    }

    /// Urn updated by the next sub-step (0 or 1).
    pub fn next_urn(&self) -> usize {
        (self.sub % 2) as usize
    }

    /// Black probability of the next sub-step from the current counts.
    pub fn black_probability(&self) -> Result<f64> {
        let i = self.next_urn();
        draw_probability(
            self.seq.weight(self.b[i])?,
            self.seq.weight(self.red_total())?,
        )
    }

    pub fn step_with_uniform(&mut self, u: f64) -> Result<()> {
        let i = self.next_urn();
        if u < self.black_probability()? {
            self.b[i] += 1;
        } else {
            self.r[i] += 1;
        }
        self.sub += 1;
        Ok(())
    }
}

impl UrnProcess for SequentialState {
    fn step(&mut self) -> Result<()> {
        let u = self.rng.random::<f64>();
        self.step_with_uniform(u)
    }

    fn time(&self) -> u64 {
        self.sub
    }

    fn n_colors(&self) -> usize {
        2
    }

    fn color_total(&self, c: usize) -> u64 {
        if c == 0 {
            self.b[0] + self.b[1]
        } else {
            self.red_total()
        }
    }

    /// Per-urn black fraction `B~(i) / (B~(i) + R~(i))`.
    fn proportions(&self) -> Vec<f64> {
        (0..2)
            .map(|i| self.b[i] as f64 / (self.b[i] + self.r[i]) as f64)
            .collect()
    }

    fn counts(&self) -> Vec<u64> {
        vec![self.b[0], self.b[1], self.r[0], self.r[1]]
    }

    fn count_labels(&self) -> Vec<String> {
        ["B_1", "B_2", "R_1", "R_2"].map(String::from).to_vec()
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}
