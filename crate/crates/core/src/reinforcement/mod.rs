//! Reinforcement sequences `W(n)` and numerical checks of the summability and
//! bounded-variation conditions that the monopoly results rely on.

mod conditions;
mod formula;
mod weight;

pub use conditions::{
    check_mdrem_conditions, check_remainder_bound, check_strong, check_variation_bound, remainder,
    Condition, ConditionVerdict, MdremOptions, RemainderEstimate, Verdict,
};
pub use formula::{Formula, Tail};
pub use weight::{draw_probability, Weight, LINEAR_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, UrnError};

/// How far past the table a tail rule is checked for positivity on construction.
const TAIL_PROBE: u64 = 1000;
/// Search window for the first positive value of a tail-only table.
const DOMAIN_SEARCH: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqKind {
    Polynomial,
    Exponential,
    Table,
}

/// A positive weight sequence. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeqSpec", into = "SeqSpec")]
pub struct ReinforcementSeq {
    kind: SeqKind,
    /// Explicit prefix `W(0), W(1), ...` (table kind only).
    values: Vec<f64>,
    rule: Option<Formula>,
    domain_start: u64,
}

/// Wire form: `{"kind": ..., "coeffs": [...], "rho": ..., "table": [...], "tail": {...}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeqSpec {
    pub kind: SeqKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<Formula>,
}

impl TryFrom<SeqSpec> for ReinforcementSeq {
    type Error = UrnError;

    fn try_from(spec: SeqSpec) -> Result<Self> {
        match spec.kind {
            SeqKind::Polynomial => {
                if spec.rho.is_some() || spec.table.is_some() || spec.tail.is_some() {
                    return invalid("polynomial sequence takes only `coeffs`");
                }
                let coeffs = spec
                    .coeffs
                    .ok_or_else(|| UrnError::InvalidArgument("missing `coeffs`".into()))?;
                ReinforcementSeq::polynomial(&coeffs)
            }
            SeqKind::Exponential => {
                if spec.coeffs.is_some() || spec.table.is_some() || spec.tail.is_some() {
                    return invalid("exponential sequence takes only `rho`");
                }
                let rho = spec
                    .rho
                    .ok_or_else(|| UrnError::InvalidArgument("missing `rho`".into()))?;
                ReinforcementSeq::exponential(rho)
            }
            SeqKind::Table => {
                if spec.coeffs.is_some() || spec.rho.is_some() {
                    return invalid("table sequence takes only `table` and `tail`");
                }
                ReinforcementSeq::table(&spec.table.unwrap_or_default(), spec.tail)
            }
        }
    }
}

impl From<ReinforcementSeq> for SeqSpec {
    fn from(seq: ReinforcementSeq) -> SeqSpec {
        match (seq.kind, seq.rule) {
            (SeqKind::Polynomial, Some(Formula::Polynomial { coeffs })) => SeqSpec {
                kind: SeqKind::Polynomial,
                coeffs: Some(coeffs),
                rho: None,
                table: None,
                tail: None,
            },
            (SeqKind::Exponential, Some(Formula::Exponential { rho, .. })) => SeqSpec {
                kind: SeqKind::Exponential,
                coeffs: None,
                rho: Some(rho),
                table: None,
                tail: None,
            },
            (_, rule) => SeqSpec {
                kind: SeqKind::Table,
                coeffs: None,
                rho: None,
                table: Some(seq.values),
                tail: rule,
            },
        }
    }
}

impl ReinforcementSeq {
    /// `W(n) = a_0 + a_1 n + ... + a_m n^m` with `a_m > 0`, `a_i >= 0`.
    pub fn polynomial(coeffs: &[f64]) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return invalid("polynomial coefficients must be finite");
        }
        if coeffs.iter().any(|&c| c < 0.0) {
            return invalid("polynomial coefficients must be nonnegative");
        }
        let Some(m) = Formula::polynomial_degree(coeffs) else {
            return invalid("polynomial needs a positive leading coefficient");
        };
        let coeffs = coeffs[..=m].to_vec();
        let domain_start = if coeffs[0] > 0.0 { 0 } else { 1 };
        Ok(ReinforcementSeq {
            kind: SeqKind::Polynomial,
            values: Vec::new(),
            rule: Some(Formula::Polynomial { coeffs }),
            domain_start,
        })
    }

    /// `W(n) = n^m`.
    pub fn monomial(m: u32) -> Result<Self> {
        let mut coeffs = vec![0.0; m as usize + 1];
        coeffs[m as usize] = 1.0;
        Self::polynomial(&coeffs)
    }

    /// `W(n) = rho^n`, `rho > 1`.
    pub fn exponential(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 1.0) {
            return invalid(format!("exponential ratio must exceed 1, got {rho}"));
        }
        Ok(ReinforcementSeq {
            kind: SeqKind::Exponential,
            values: Vec::new(),
            rule: Some(Formula::Exponential { rho, scale: 1.0 }),
            domain_start: 0,
        })
    }

    /// Explicit prefix followed by an optional closed-form tail rule.
    ///
    /// Without a tail, evaluation past the table is an error.
    pub fn table(values: &[f64], tail: Option<Formula>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("table values must be finite and nonnegative");
        }
        let mut seq = ReinforcementSeq {
            kind: SeqKind::Table,
            values: values.to_vec(),
            rule: tail,
            domain_start: 0,
        };
        let len = values.len() as u64;
        let start = match values.iter().position(|&v| v > 0.0) {
            Some(i) => i as u64,
            None => {
                if seq.rule.is_none() {
                    return invalid("table has no positive value and no tail rule");
                }
                (len..len + DOMAIN_SEARCH)
                    .find(|&n| seq.raw(n).map(|w| w.value() > 0.0).unwrap_or(false))
                    .ok_or_else(|| {
                        UrnError::InvalidArgument(
                            "tail rule has no positive value near the start".into(),
                        )
                    })?
            }
        };
        seq.domain_start = start;
        if let Some(i) = values.iter().skip(start as usize).position(|&v| v <= 0.0) {
            return invalid(format!(
                "table value at {} is not positive",
                start as usize + i
            ));
        }
        if seq.rule.is_some() {
            let from = len.max(start);
            for n in from..from + TAIL_PROBE {
                let w = seq.raw(n)?;
                if !(w.ln().is_finite() && w.value() > 0.0) {
                    return invalid(format!("tail rule is not positive at n = {n}"));
                }
            }
        }
        Ok(seq)
    }

    pub fn kind(&self) -> SeqKind {
        self.kind
    }

    pub fn domain_start(&self) -> u64 {
        self.domain_start
    }

    pub fn rule(&self) -> Option<&Formula> {
        self.rule.as_ref()
    }

    pub fn table_values(&self) -> &[f64] {
        &self.values
    }

    /// Polynomial degree for the polynomial kind.
    pub fn degree(&self) -> Option<usize> {
        match (&self.kind, &self.rule) {
            (SeqKind::Polynomial, Some(Formula::Polynomial { coeffs })) => {
                Formula::polynomial_degree(coeffs)
            }
            _ => None,
        }
    }

    fn raw(&self, n: u64) -> Result<Weight> {
        if let Some(&v) = self.values.get(n as usize) {
            return Ok(Weight::Linear(v));
        }
        match &self.rule {
            Some(rule) => Ok(rule.eval(n)),
            None => Err(UrnError::InvalidArgument(format!(
                "n = {n} is past the table and no tail rule is set"
            ))),
        }
    }

    /// `W(n)` for `n >= domain_start`.
    pub fn eval(&self, n: u64) -> Result<Weight> {
        if n < self.domain_start {
            return invalid(format!(
                "n = {n} is below the domain start {}",
                self.domain_start
            ));
        }
        let w = self.raw(n)?;
        match w {
            Weight::Linear(v) if !(v > 0.0 && v.is_finite()) => Err(UrnError::ConditionViolation(
                format!("W({n}) = {v} is not positive"),
            )),
            Weight::Log(l) if l.is_nan() => Err(UrnError::ConditionViolation(format!(
                "W({n}) is not a number"
            ))),
            _ => Ok(w),
        }
    }

    /// Weight used by the simulators: counts below the domain start carry zero weight.
    pub fn weight(&self, n: u64) -> Result<Weight> {
        if n < self.domain_start {
            Ok(Weight::Linear(0.0))
        } else {
            self.eval(n)
        }
    }

    /// Linear `W(n)`; `+inf` when it only exists in log space.
    pub fn value(&self, n: u64) -> Result<f64> {
        self.eval(n).map(Weight::value)
    }

    pub fn ln_eval(&self, n: u64) -> Result<f64> {
        self.eval(n).map(Weight::ln)
    }

    /// Non-decreasing on `[0, horizon]`: by construction for polynomial and
    /// exponential kinds, by direct scan for tables.
    pub fn is_non_decreasing(&self, horizon: u64) -> Result<bool> {
        if self.kind != SeqKind::Table {
            return Ok(true);
        }
        let mut prev = f64::NEG_INFINITY;
        for n in 0..=horizon {
            let ln = self.weight(n)?.ln();
            if ln < prev {
                return Ok(false);
            }
            prev = ln;
        }
        Ok(true)
    }

    /// Analytic divergence of `sum 1/W^power` when decidable from the rule.
    pub(crate) fn divergent(&self, power: f64) -> Option<bool> {
        self.rule.as_ref().and_then(|r| r.divergent(power))
    }

    /// Closed-form tail `sum_{i >= start} W(i)^-power`, available only past the table.
    pub(crate) fn tail_from(&self, start: u64, power: f64) -> Option<Tail> {
        if start < self.values.len() as u64 {
            return None;
        }
        self.rule.as_ref().and_then(|r| r.tail_from(start, power))
    }

    pub(crate) fn monotone_by_construction(&self) -> bool {
        self.kind != SeqKind::Table
            && self
                .rule
                .as_ref()
                .map(Formula::monotone_by_construction)
                .unwrap_or(false)
    }

    /// Interleaved quartic, non-monotone: `W(2n) = n^4`, `W(2n+1) = n^4 - n^3 + 1`.
    pub fn interleaved_quartic() -> ReinforcementSeq {
        ReinforcementSeq::table(
            &[],
            Some(Formula::Interleaved {
                even: Box::new(Formula::Polynomial {
                    coeffs: vec![0.0, 0.0, 0.0, 0.0, 1.0],
                }),
                odd: Box::new(Formula::Polynomial {
                    coeffs: vec![1.0, 0.0, 0.0, -1.0, 1.0],
                }),
            }),
        )
        .expect("static sequence is valid")
    }

    /// `W(2n) = e^n`, `W(2n+1) = e^(n-1)`.
    pub fn interleaved_exponential() -> ReinforcementSeq {
        let e = std::f64::consts::E;
        ReinforcementSeq::table(
            &[],
            Some(Formula::Interleaved {
                even: Box::new(Formula::Exponential { rho: e, scale: 1.0 }),
                odd: Box::new(Formula::Exponential {
                    rho: e,
                    scale: 1.0 / e,
                }),
            }),
        )
        .expect("static sequence is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequence serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_examples() {
        let sq = ReinforcementSeq::polynomial(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(sq.value(3).unwrap(), 9.0);
        assert_eq!(sq.value(100).unwrap(), 10000.0);
        assert_eq!(sq.domain_start(), 1);
        let cubic = ReinforcementSeq::polynomial(&[1.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(cubic.value(0).unwrap(), 1.0);
        assert_eq!(cubic.value(2).unwrap(), 17.0);
        assert!(matches!(
            ReinforcementSeq::polynomial(&[0.0, -1.0, 1.0]),
            Err(UrnError::InvalidArgument(_))
        ));
        assert!(ReinforcementSeq::polynomial(&[1.0, 0.0]).is_ok());
        assert!(ReinforcementSeq::polynomial(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn below_domain_start_is_rejected() {
        let sq = ReinforcementSeq::monomial(2).unwrap();
        assert!(matches!(sq.eval(0), Err(UrnError::InvalidArgument(_))));
        assert!(sq.weight(0).unwrap().is_zero());
    }

    #[test]
    fn exponential_examples() {
        let two = ReinforcementSeq::exponential(2.0).unwrap();
        assert_eq!(two.value(10).unwrap(), 1024.0);
        let big = two.eval(1000).unwrap();
        assert!(big.ln().is_finite());
        assert!((big.ln() - 1000.0 * 2f64.ln()).abs() < 1e-9);
        let e = ReinforcementSeq::exponential(std::f64::consts::E).unwrap();
        assert!((e.value(3).unwrap() - 20.085536923187668).abs() < 1e-12);
        assert!(ReinforcementSeq::exponential(1.0).is_err());
        assert!(ReinforcementSeq::exponential(0.5).is_err());
        // 2^n past the linear range stays in log space
        let huge = two.eval(2000).unwrap();
        assert!(huge.is_log());
    }

    #[test]
    fn table_examples() {
        let q = ReinforcementSeq::interleaved_quartic();
        assert_eq!(q.value(6).unwrap(), 81.0);
        assert_eq!(q.value(7).unwrap(), 55.0);
        assert_eq!(q.domain_start(), 1);
        assert!(q.eval(0).is_err());
        let x = ReinforcementSeq::interleaved_exponential();
        let ratio = x.value(4).unwrap() / x.value(5).unwrap();
        assert!((ratio - std::f64::consts::E).abs() < 1e-12);
        let ones = ReinforcementSeq::table(&[1.0], Some(Formula::Constant { value: 1.0 })).unwrap();
        assert!((0..50).all(|k| ones.value(k).unwrap() == 1.0));
        assert!(ReinforcementSeq::table(&[1.0, 0.0, 2.0], None).is_err());
        assert!(ReinforcementSeq::table(&[1.0, 2.0], None)
            .unwrap()
            .eval(2)
            .is_err());
        assert!(ReinforcementSeq::table(&[1.0], Some(Formula::Constant { value: -1.0 })).is_err());
    }

    #[test]
    fn json_round_trip() {
        for seq in [
            ReinforcementSeq::monomial(3).unwrap(),
            ReinforcementSeq::exponential(2.5).unwrap(),
            ReinforcementSeq::interleaved_quartic(),
            ReinforcementSeq::interleaved_exponential(),
        ] {
            let back = ReinforcementSeq::from_json(&seq.to_json()).unwrap();
            assert_eq!(back, seq);
        }
        let parsed =
            ReinforcementSeq::from_json(r#"{"kind":"polynomial","coeffs":[0,0,1]}"#).unwrap();
        assert_eq!(parsed.value(4).unwrap(), 16.0);
        assert!(
            ReinforcementSeq::from_json(r#"{"kind":"polynomial","coeffs":[1],"rho":2}"#).is_err()
        );
        assert!(
            ReinforcementSeq::from_json(r#"{"kind":"exponential","rho":2,"extra":1}"#).is_err()
        );
        assert!(ReinforcementSeq::from_json(
            r#"{"kind":"table","table":[1],"tail":{"rule":"constant","value":1,"x":2}}"#
        )
        .is_err());
    }

    #[test]
    fn monotonicity_scan() {
        assert!(ReinforcementSeq::monomial(2)
            .unwrap()
            .is_non_decreasing(100)
            .unwrap());
        assert!(!ReinforcementSeq::interleaved_quartic()
            .is_non_decreasing(100)
            .unwrap());
        let dec = ReinforcementSeq::table(&[3.0, 2.0, 1.0], None).unwrap();
        assert!(!dec.is_non_decreasing(2).unwrap());
    }
}
