//! Finite-horizon checks of the asymptotic conditions on `W`.
//!
//! The conditions are statements about infinite tails, so every verdict here
//! is a labeled heuristic: analytic tail bounds where the rule admits them,
//! plateau detection on running suprema otherwise.

use serde::{Deserialize, Serialize};

use super::formula::{ln_abs_diff, ln_add, Tail};
use super::ReinforcementSeq;
use crate::error::{invalid, Result, UrnError};

/// Relative change of a running sup over the last decade that still counts as a plateau.
pub const PLATEAU_REL: f64 = 1e-6;
/// Relative growth over the last decade that counts as unbounded.
const GROWTH_FAIL: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Summable,
    VariationBound,
    RemainderBound,
    RemRatio,
    SquaredRemRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: Condition,
    pub horizon: u64,
    /// Finite; saturates at `f64::MAX` when the quantity overflows.
    pub estimate: f64,
    pub verdict: Verdict,
    /// Bound on the part of the quantity not summed explicitly, if one is known.
    pub tail_bound: Option<f64>,
    /// How the verdict was reached.
    pub basis: String,
}

impl ConditionVerdict {
    fn new(
        condition: Condition,
        horizon: u64,
        ln_estimate: f64,
        verdict: Verdict,
        basis: &str,
    ) -> Self {
        ConditionVerdict {
            condition,
            horizon,
            estimate: saturating_exp(ln_estimate),
            verdict,
            tail_bound: None,
            basis: basis.to_string(),
        }
    }
}

fn saturating_exp(ln: f64) -> f64 {
    let v = ln.exp();
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderEstimate {
    pub n: u64,
    pub horizon: u64,
    /// `sum_{i=n}^{horizon} 1/W(i)`.
    pub partial: f64,
    /// Closed-form value or upper bound for `sum_{i > horizon} 1/W(i)`.
    pub tail: Option<f64>,
    pub estimate: f64,
    pub ln_estimate: f64,
    /// `partial <= Rem(n) <= estimate` is guaranteed.
    pub guaranteed: bool,
}

fn first_index(seq: &ReinforcementSeq) -> u64 {
    seq.domain_start().max(1)
}

/// `ln sum_{i=k}^{horizon} W(i)^-power (+ tail)` for `k` in `start..=horizon`,
/// indexed by `k - start`.
fn ln_suffix_sums(
    seq: &ReinforcementSeq,
    start: u64,
    horizon: u64,
    power: f64,
) -> Result<(Vec<f64>, Option<Tail>)> {
    let tail = seq.tail_from(horizon + 1, power);
    let mut acc = tail.map(|t| t.ln).unwrap_or(f64::NEG_INFINITY);
    let len = (horizon + 1 - start) as usize;
    let mut out = vec![0.0; len];
    for k in (start..=horizon).rev() {
        acc = ln_add(acc, -power * seq.ln_eval(k)?);
        out[(k - start) as usize] = acc;
    }
    Ok((out, tail))
}

/// `Rem(n) = sum_{i >= n} 1/W(i)`, summed to `horizon` plus a closed-form tail.
pub fn remainder(seq: &ReinforcementSeq, n: u64, horizon: u64) -> Result<RemainderEstimate> {
    if horizon < n {
        return invalid("horizon must be at least n");
    }
    if seq.divergent(1.0) == Some(true) {
        return Err(UrnError::ConditionViolation(
            "sum of 1/W(n) diverges".into(),
        ));
    }
    let from = n.max(seq.domain_start());
    let mut ln_partial = f64::NEG_INFINITY;
    for i in (from..=horizon).rev() {
        ln_partial = ln_add(ln_partial, -seq.ln_eval(i)?);
    }
    let tail = seq.tail_from(horizon + 1, 1.0);
    let ln_estimate = match tail {
        Some(t) => ln_add(ln_partial, t.ln),
        None => ln_partial,
    };
    Ok(RemainderEstimate {
        n,
        horizon,
        partial: ln_partial.exp(),
        tail: tail.map(|t| t.ln.exp()),
        estimate: ln_estimate.exp(),
        ln_estimate,
        guaranteed: tail.is_some(),
    })
}

/// `sum_{n >= 1} 1/W(n) < infinity`.
pub fn check_strong(seq: &ReinforcementSeq, horizon: u64, tol: f64) -> Result<ConditionVerdict> {
    if horizon < 10 {
        return invalid("horizon must be at least 10");
    }
    let start = first_index(seq);
    let mut ln_partial = f64::NEG_INFINITY;
    for i in start..=horizon {
        ln_partial = ln_add(ln_partial, -seq.ln_eval(i)?);
    }
    let c = Condition::Summable;
    if seq.divergent(1.0) == Some(true) {
        return Ok(ConditionVerdict::new(
            c,
            horizon,
            ln_partial,
            Verdict::Fails,
            "analytic: divergent rule",
        ));
    }
    if let Some(tail) = seq.tail_from(horizon + 1, 1.0) {
        let bound = tail.ln.exp();
        let verdict = if bound <= tol {
            Verdict::Holds
        } else {
            Verdict::Inconclusive
        };
        let mut v = ConditionVerdict::new(
            c,
            horizon,
            ln_add(ln_partial, tail.ln),
            verdict,
            "partial sum + tail bound",
        );
        v.tail_bound = Some(bound);
        return Ok(v);
    }
    // No tail bound: look for a linear-growth divergence certificate over the last decade.
    let lo = (horizon / 10).max(start);
    let growth_hi = seq.ln_eval(horizon)? - (horizon as f64).ln();
    let growth_lo = seq.ln_eval(lo)? - (lo as f64).ln();
    let verdict = if growth_hi <= growth_lo + 0.01f64.ln_1p() {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    Ok(ConditionVerdict::new(
        c,
        horizon,
        ln_partial,
        verdict,
        "truncated partial sum",
    ))
}

/// Running sup of `ln_values` (indexed from `start`), judged by a plateau over the last decade.
fn plateau_verdict(ln_values: &[f64], start: u64, horizon: u64) -> (f64, Verdict) {
    let decade = (horizon / 10).max(start);
    let early = ln_values[..=(decade - start) as usize]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let all = ln_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !all.is_finite() {
        return (all, Verdict::Fails);
    }
    let rel = -(early - all).exp_m1();
    let verdict = if rel < PLATEAU_REL {
        Verdict::Holds
    } else if rel > GROWTH_FAIL {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    (all, verdict)
}

/// `sup_n W(n) sum_{k >= n} |1/W(k) - 1/W(k+1)|`.
pub fn check_variation_bound(seq: &ReinforcementSeq, horizon: u64) -> Result<ConditionVerdict> {
    let start = first_index(seq);
    if horizon < 10 * start {
        return invalid("horizon too short for a plateau check");
    }
    let ln_w: Vec<f64> = (start..=horizon + 1)
        .map(|k| seq.ln_eval(k))
        .collect::<Result<_>>()?;
    // Non-decreasing closed forms telescope: the tail past the horizon is 1/W(horizon+1).
    let exact_tail = seq.monotone_by_construction();
    let mut acc = if exact_tail {
        -ln_w[(horizon + 1 - start) as usize]
    } else {
        f64::NEG_INFINITY
    };
    let mut ln_est = vec![0.0; (horizon + 1 - start) as usize];
    for k in (start..=horizon).rev() {
        let i = (k - start) as usize;
        acc = ln_add(acc, ln_abs_diff(-ln_w[i], -ln_w[i + 1]));
        ln_est[i] = ln_w[i] + acc;
    }
    let (sup, verdict) = plateau_verdict(&ln_est, start, horizon);
    let basis = if exact_tail {
        "telescoping tail + plateau"
    } else {
        "truncated sum + plateau"
    };
    Ok(ConditionVerdict::new(
        Condition::VariationBound,
        horizon,
        sup,
        verdict,
        basis,
    ))
}

/// `sup_n W(n) Rem(n)`.
pub fn check_remainder_bound(seq: &ReinforcementSeq, horizon: u64) -> Result<ConditionVerdict> {
    let start = first_index(seq);
    if horizon < 10 * start {
        return invalid("horizon too short for a plateau check");
    }
    if seq.divergent(1.0) == Some(true) {
        return Ok(ConditionVerdict::new(
            Condition::RemainderBound,
            horizon,
            f64::INFINITY,
            Verdict::Fails,
            "analytic: divergent rule",
        ));
    }
    let (ln_rem, tail) = ln_suffix_sums(seq, start, horizon, 1.0)?;
    let ln_est: Vec<f64> = (start..=horizon)
        .zip(&ln_rem)
        .map(|(k, r)| seq.ln_eval(k).map(|lw| lw + r))
        .collect::<Result<_>>()?;
    let (sup, verdict) = plateau_verdict(&ln_est, start, horizon);
    let basis = if tail.is_some() {
        "tail bound + plateau"
    } else {
        "truncated sum + plateau"
    };
    let mut v = ConditionVerdict::new(Condition::RemainderBound, horizon, sup, verdict, basis);
    v.tail_bound = tail.map(|t| t.ln.exp());
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdremOptions {
    /// Dilation factors `K`, increasing.
    pub k_list: Vec<u64>,
    /// Level below which a ratio counts as having reached 0.
    pub threshold: f64,
}

impl Default for MdremOptions {
    fn default() -> Self {
        MdremOptions {
            k_list: vec![2, 4, 8, 16, 32],
            threshold: 0.05,
        }
    }
}

/// `lim_K limsup_n Rem(Kn)/Rem(n) = 0` and `sum_{i>=n} W(i)^-2 / Rem(n)^2 -> 0`.
pub fn check_mdrem_conditions(
    seq: &ReinforcementSeq,
    horizon: u64,
    options: &MdremOptions,
) -> Result<(ConditionVerdict, ConditionVerdict)> {
    let start = first_index(seq);
    if options.k_list.is_empty() || options.k_list.iter().any(|&k| k < 2) {
        return invalid("k_list needs factors >= 2");
    }
    if options.k_list.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("k_list must be increasing");
    }
    let k_max = *options.k_list.last().unwrap();
    if horizon < 100 * k_max * start {
        return invalid("horizon too short for the requested dilation factors");
    }
    if seq.divergent(1.0) == Some(true) {
        let fail =
            |c| ConditionVerdict::new(c, horizon, 0.0, Verdict::Fails, "analytic: divergent rule");
        return Ok((fail(Condition::RemRatio), fail(Condition::SquaredRemRatio)));
    }
    let (ln_rem, tail) = ln_suffix_sums(seq, start, horizon, 1.0)?;
    let (ln_sq, _) = ln_suffix_sums(seq, start, horizon, 2.0)?;
    let at = |v: &Vec<f64>, n: u64| v[(n - start) as usize];

    let mut limsups = Vec::with_capacity(options.k_list.len());
    for &k in &options.k_list {
        let hi = horizon / k;
        let lo = (hi / 10).max(start);
        let sup = (lo..=hi)
            .map(|n| at(&ln_rem, k * n) - at(&ln_rem, n))
            .fold(f64::NEG_INFINITY, f64::max);
        limsups.push(sup.exp());
    }
    let last = *limsups.last().unwrap();
    let shrinking = limsups.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let rem_verdict = if shrinking && last <= options.threshold {
        Verdict::Holds
    } else if last > GROWTH_FAIL {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    let basis = if tail.is_some() {
        "limsup over last decade per K"
    } else {
        "limsup over last decade per K (truncated)"
    };
    let mut rem =
        ConditionVerdict::new(Condition::RemRatio, horizon, last.ln(), rem_verdict, basis);
    rem.tail_bound = tail.map(|t| t.ln.exp());

    let n_b = horizon / 2;
    let n_a = (n_b / 10).max(start);
    let ratio = |n: u64| (at(&ln_sq, n) - 2.0 * at(&ln_rem, n)).exp();
    let (r_a, r_b) = (ratio(n_a), ratio(n_b));
    let sq_verdict = if r_b <= options.threshold && r_b <= 0.5 * r_a {
        Verdict::Holds
    } else if r_b > options.threshold && r_b >= 0.9 * r_a {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    let sq = ConditionVerdict::new(
        Condition::SquaredRemRatio,
        horizon,
        r_b.ln(),
        sq_verdict,
        "ratio decay over last decade",
    );
    Ok((rem, sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reinforcement::Formula;

    fn n_log2() -> ReinforcementSeq {
        ReinforcementSeq::table(
            &[],
            Some(Formula::PolyLog {
                coeff: 1.0,
                power: 1.0,
                log_power: 2.0,
                shift: 2.0,
            }),
        )
        .unwrap()
    }

    #[test]
    fn remainder_of_inverse_squares() {
        // Oracle: pi^2/6 minus the exact partial sum is tiny; the integral tail closes it.
        let sq = ReinforcementSeq::monomial(2).unwrap();
        let r = remainder(&sq, 1, 100_000).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 6.0;
        assert!(r.guaranteed);
        assert!(r.partial <= exact && exact <= r.estimate);
        assert!((r.estimate - exact).abs() < 1e-9);
    }

    #[test]
    fn remainder_of_geometric() {
        let two = ReinforcementSeq::exponential(2.0).unwrap();
        for k in [0u64, 1, 5, 40] {
            let r = remainder(&two, k, k + 50).unwrap();
            assert!((r.estimate / 2f64.powi(1 - k as i32) - 1.0).abs() < 1e-12);
        }
        let far = remainder(&two, 3000, 3100).unwrap();
        assert!((far.ln_estimate - (1.0 - 3000.0) * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn remainder_of_harmonic_is_violation() {
        let lin = ReinforcementSeq::monomial(1).unwrap();
        assert!(matches!(
            remainder(&lin, 1, 100),
            Err(UrnError::ConditionViolation(_))
        ));
    }

    #[test]
    fn strong_reinforcement_examples() {
        let sq = check_strong(&ReinforcementSeq::monomial(2).unwrap(), 1_000_000, 1e-3).unwrap();
        assert_eq!(sq.verdict, Verdict::Holds);
        assert!((sq.estimate - 1.6449340668).abs() < 1e-6);
        let lin = check_strong(&ReinforcementSeq::monomial(1).unwrap(), 10_000, 1e-3).unwrap();
        assert_eq!(lin.verdict, Verdict::Fails);
        let slow = check_strong(&n_log2(), 10_000, 1e-3).unwrap();
        assert_ne!(slow.verdict, Verdict::Fails);
        assert!(slow.tail_bound.unwrap() > 1e-3);
        // linear table without tail bound: divergence certificate
        let lin_tab =
            ReinforcementSeq::table(&(0..=200).map(|n| n as f64).collect::<Vec<_>>(), None)
                .unwrap();
        assert_eq!(
            check_strong(&lin_tab, 200, 1e-3).unwrap().verdict,
            Verdict::Fails
        );
        let no_tail =
            ReinforcementSeq::table(&(0..=200).map(|n| (n * n) as f64).collect::<Vec<_>>(), None)
                .unwrap();
        assert_eq!(
            check_strong(&no_tail, 200, 1e-3).unwrap().verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn variation_bound_examples() {
        let cubic =
            check_variation_bound(&ReinforcementSeq::monomial(3).unwrap(), 100_000).unwrap();
        assert!((cubic.estimate - 1.0).abs() < 1e-6, "{}", cubic.estimate);
        assert_eq!(cubic.verdict, Verdict::Holds);
        let quartic =
            check_variation_bound(&ReinforcementSeq::interleaved_quartic(), 100_000).unwrap();
        assert_eq!(quartic.verdict, Verdict::Holds, "{quartic:?}");
        assert!(quartic.estimate.is_finite());
        let alt = ReinforcementSeq::table(
            &[],
            Some(Formula::Interleaved {
                even: Box::new(Formula::Exponential {
                    rho: 4.0,
                    scale: 1.0,
                }),
                odd: Box::new(Formula::Exponential {
                    rho: 0.25,
                    scale: 0.5,
                }),
            }),
        )
        .unwrap();
        let v = check_variation_bound(&alt, 10_000).unwrap();
        assert_eq!(v.verdict, Verdict::Fails);
        assert!(v.estimate.is_finite());
    }

    #[test]
    fn remainder_bound_examples() {
        let ex2 =
            check_remainder_bound(&ReinforcementSeq::interleaved_exponential(), 100_000).unwrap();
        assert_eq!(ex2.verdict, Verdict::Holds, "{ex2:?}");
        // n = 2j: e^j * (sum_{i>=j} e^-i + sum_{i>=j} e^(1-i)) = (1+e)/(1-1/e)
        let e = std::f64::consts::E;
        assert!((ex2.estimate - (1.0 + e) / (1.0 - 1.0 / e)).abs() < 1e-9);
        let two =
            check_remainder_bound(&ReinforcementSeq::exponential(2.0).unwrap(), 10_000).unwrap();
        assert!((two.estimate - 2.0).abs() < 1e-9);
        assert_eq!(two.verdict, Verdict::Holds);
        let sq = check_remainder_bound(&ReinforcementSeq::monomial(2).unwrap(), 100_000).unwrap();
        assert_eq!(sq.verdict, Verdict::Fails);
        assert!(sq.estimate > 0.5 * 100_000.0);
    }

    #[test]
    fn mdrem_examples() {
        let opts = MdremOptions::default();
        let (rem, sq) =
            check_mdrem_conditions(&ReinforcementSeq::monomial(3).unwrap(), 1_000_000, &opts)
                .unwrap();
        assert_eq!(rem.verdict, Verdict::Holds);
        assert!((rem.estimate - 1.0 / 1024.0).abs() < 1e-4);
        assert_eq!(sq.verdict, Verdict::Holds);
        let (rem2, sq2) =
            check_mdrem_conditions(&ReinforcementSeq::exponential(2.0).unwrap(), 100_000, &opts)
                .unwrap();
        assert_eq!(rem2.verdict, Verdict::Holds);
        assert!(rem2.estimate < 1e-100);
        // sum 4^-i / (sum 2^-i)^2 = 1/3, never vanishes
        assert!((sq2.estimate - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(sq2.verdict, Verdict::Fails);
        let nlog = ReinforcementSeq::table(
            &[],
            Some(Formula::PolyLog {
                coeff: 1.0,
                power: 1.0,
                log_power: 2.0,
                shift: 0.0,
            }),
        )
        .unwrap();
        let (rem3, _) = check_mdrem_conditions(&nlog, 1_000_000, &opts).unwrap();
        assert_eq!(rem3.verdict, Verdict::Fails);
    }
}
