use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;

use super::{EmbeddingState, RefreshSchedule};
use crate::error::{invalid, Result};
use crate::reinforcement::ReinforcementSeq;
use crate::rng::derive_seed;
use crate::stats::{chi_square_homogeneity, ks_two_sample, TestReport};
use crate::urn_sim::{MultiColorState, UrnProcess};

/// Smallest sample accepted by [`compare_laws`].
pub const MIN_SAMPLES: usize = 100;
/// Outcome sets larger than this are compared through a scalar functional.
const MAX_CATEGORIES: usize = 64;

/// Count vectors at several refresh indices, `by_k[j][s]` for `ks[j]` and sample `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct LawSamples {
    pub ks: Vec<u64>,
    pub by_k: Vec<Vec<Vec<u64>>>,
}

fn check_ks(ks: &[u64]) -> Result<()> {
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("k values must be non-empty and increasing");
    }
    Ok(())
}

fn transpose(ks: &[u64], runs: Vec<Vec<Vec<u64>>>) -> LawSamples {
    let mut by_k = vec![Vec::with_capacity(runs.len()); ks.len()];
    for run in runs {
        for (j, z) in run.into_iter().enumerate() {
            by_k[j].push(z);
        }
    }
    LawSamples {
        ks: ks.to_vec(),
        by_k,
    }
}

/// `Z_{kd}` from independent embeddings; sample `s` uses seed `derive_seed(master, s)`.
#[allow(clippy::too_many_arguments)]
pub fn sample_embedded(
    nc: usize,
    a: &[u64],
    d: u64,
    seq: &Arc<ReinforcementSeq>,
    master: u64,
    samples: usize,
    ks: &[u64],
    schedule: RefreshSchedule,
) -> Result<LawSamples> {
    check_ks(ks)?;
    EmbeddingState::with_options(nc, a, d, seq.clone(), 0, schedule, false)?;
    let runs = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut e = EmbeddingState::with_options(
                nc,
                a,
                d,
                seq.clone(),
                derive_seed(master, s),
                schedule,
                false,
            )?;
            ks.iter()
                .map(|&k| e.run_to_refresh(k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(transpose(ks, runs))
}

/// `N_k` from independent discrete multi-color urns adding `d` balls per step.
pub fn sample_discrete(
    nc: usize,
    a: &[u64],
    d: u64,
    seq: &Arc<ReinforcementSeq>,
    master: u64,
    samples: usize,
    ks: &[u64],
) -> Result<LawSamples> {
    check_ks(ks)?;
    MultiColorState::init(nc, a, d, seq.clone(), 0)?;
    let runs = (0..samples as u64)
        .into_par_iter()
        .map(|s| {
            let mut u = MultiColorState::init(nc, a, d, seq.clone(), derive_seed(master, s))?;
            let mut out = Vec::with_capacity(ks.len());
            for &k in ks {
                while u.time() < k {
                    u.step()?;
                }
                out.push(u.color_counts().to_vec());
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(transpose(ks, runs))
}

/// Two-sample test of equal laws: chi-square on small outcome sets, otherwise
/// Kolmogorov–Smirnov on the first color's share.
pub fn compare_laws(a: &[Vec<u64>], b: &[Vec<u64>]) -> Result<TestReport> {
    if a.len() < MIN_SAMPLES || b.len() < MIN_SAMPLES {
        return invalid(format!("each sample needs at least {MIN_SAMPLES} draws"));
    }
    let outcomes: BTreeSet<&Vec<u64>> = a.iter().chain(b).collect();
    if outcomes.len() <= MAX_CATEGORIES {
        return chi_square_homogeneity(a, b);
    }
    let share = |v: &Vec<u64>| v[0] as f64 / v.iter().sum::<u64>() as f64;
    let xa: Vec<f64> = a.iter().map(share).collect();
    let xb: Vec<f64> = b.iter().map(share).collect();
    ks_two_sample(&xa, &xb)
}
