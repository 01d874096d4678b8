use std::sync::Arc;

use rand::Rng;

use super::UrnProcess;
use crate::error::{invalid, Result, UrnError};
use crate::reinforcement::ReinforcementSeq;
use crate::rng::{stream, UrnRng};

/// Single urn with `Nc` colors; each step adds `d` balls drawn multinomially
/// with probabilities `W(N(i)) / sum_j W(N(j))` frozen for the step.
#[derive(Clone, Debug)]
pub struct MultiColorState {
    counts: Vec<u64>,
    a: Vec<u64>,
    d: u64,
    n: u64,
    seq: Arc<ReinforcementSeq>,
    seed: u64,
    rng: UrnRng,
    cumulative: Vec<f64>,
}

impl MultiColorState {
    pub fn init(
        nc: usize,
        a: &[u64],
        d: u64,
        seq: Arc<ReinforcementSeq>,
        seed: u64,
    ) -> Result<Self> {
        if nc < 2 {
            return invalid("need at least two colors");
        }
        if a.len() != nc {
            return invalid(format!("initial counts must have length Nc = {nc}"));
        }
        if d == 0 {
            return invalid("d must be at least 1");
        }
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0 {
                return invalid(format!(
                    "initial count of color {} must be at least 1",
                    i + 1
                ));
            }
            if seq.weight(ai)?.is_zero() {
                return invalid(format!("color {} starts with zero weight", i + 1));
            }
        }
        Ok(MultiColorState {
            counts: a.to_vec(),
            a: a.to_vec(),
            d,
            n: 0,
            seq,
            seed,
            rng: stream(seed),
            cumulative: vec![0.0; nc],
        })
    }

    pub fn nc(&self) -> usize {
        self.counts.len()
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn initial(&self) -> &[u64] {
        &self.a
    }

    pub fn color_counts(&self) -> &[u64] {
        &self.counts
    }

    /// Draw probabilities for the next step.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let ln: Vec<f64> = self
            .counts
            .iter()
            .map(|&c| {
                self.seq.weight(c).map(|w| {
                    if w.is_zero() {
                        f64::NEG_INFINITY
                    } else {
                        w.ln()
                    }
                })
            })
            .collect::<Result<_>>()?;
        let top = ln.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(UrnError::ConditionViolation(
                "all color weights are zero".into(),
            ));
        }
        let raw: Vec<f64> = ln.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|r| r / total).collect())
    }

    /// Add the `d` balls of one step from explicit uniforms (categorical
    /// inversion over the frozen probabilities, colors in index order).
    pub fn step_with_uniforms(&mut self, uniforms: &[f64]) -> Result<()> {
        if uniforms.len() as u64 != self.d {
            return invalid("one uniform per added ball is required");
        }
        let probs = self.probabilities()?;
        let mut acc = 0.0;
        for (c, p) in self.cumulative.iter_mut().zip(&probs) {
            acc += p;
            *c = acc;
        }
        let last = self.nc() - 1;
        let mut added = vec![0u64; self.nc()];
        for &u in uniforms {
            let k = self.cumulative[..last]
                .iter()
                .position(|&c| u < c)
                .unwrap_or(last);
            // a color with zero probability is never chosen, even at the boundary
            let k = if probs[k] > 0.0 {
                k
            } else {
                probs.iter().rposition(|&p| p > 0.0).unwrap()
            };
            added[k] += 1;
        }
        for (c, a) in self.counts.iter_mut().zip(added) {
            *c += a;
        }
        self.n += 1;
        Ok(())
    }
}

impl UrnProcess for MultiColorState {
    fn step(&mut self) -> Result<()> {
        let us: Vec<f64> = (0..self.d).map(|_| self.rng.random::<f64>()).collect();
        self.step_with_uniforms(&us)
    }

    fn time(&self) -> u64 {
        self.n
    }

    fn n_colors(&self) -> usize {
        self.nc()
    }

    fn color_total(&self, c: usize) -> u64 {
        self.counts[c]
    }

    fn proportions(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        self.counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect()
    }

    fn counts(&self) -> Vec<u64> {
        self.counts.clone()
    }

    fn count_labels(&self) -> Vec<String> {
        (1..=self.nc()).map(|i| format!("N_{i}")).collect()
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> Arc<ReinforcementSeq> {
        Arc::new(ReinforcementSeq::monomial(3).unwrap())
    }

    #[test]
    fn equal_counts_are_uniform() {
        let s = MultiColorState::init(4, &[3, 3, 3, 3], 2, cube(), 0).unwrap();
        for p in s.probabilities().unwrap() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn conservation() {
        let mut s = MultiColorState::init(3, &[1, 2, 1], 3, cube(), 5).unwrap();
        for _ in 0..500 {
            s.step().unwrap();
        }
        assert_eq!(s.color_counts().iter().sum::<u64>(), 4 + 3 * 500);
    }

    #[test]
    fn zero_initial_count_rejected() {
        assert!(MultiColorState::init(2, &[0, 1], 1, cube(), 0).is_err());
        assert!(MultiColorState::init(1, &[1], 1, cube(), 0).is_err());
    }

    #[test]
    fn two_colors_one_ball_is_the_single_urn() {
        let s = MultiColorState::init(
            2,
            &[3, 1],
            1,
            Arc::new(ReinforcementSeq::monomial(2).unwrap()),
            0,
        )
        .unwrap();
        assert!((s.probabilities().unwrap()[0] - 0.9).abs() < 1e-15);
    }
}
