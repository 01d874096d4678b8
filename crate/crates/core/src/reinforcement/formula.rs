//! Closed-form weight rules: the body of polynomial and exponential sequences
//! and the tail rule of table sequences.

use serde::{Deserialize, Serialize};

use super::weight::{Weight, LINEAR_LIMIT};

fn one() -> f64 {
    1.0
}

/// A closed-form rule `n -> W(n)`.
///
/// Polynomial rules inside a table tail may carry negative lower-order
/// coefficients (e.g. `n^4 - n^3 + 1`); positivity is checked on evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Formula {
    Constant {
        value: f64,
    },
    /// `a_0 + a_1 n + ... + a_m n^m`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `scale * rho^n`.
    Exponential {
        rho: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `coeff * n^power * ln(n + shift)^log_power`.
    PolyLog {
        coeff: f64,
        power: f64,
        log_power: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `W(2k) = even(k)`, `W(2k+1) = odd(k)`.
    Interleaved {
        even: Box<Formula>,
        odd: Box<Formula>,
    },
}

/// `ln` of a tail sum `sum_{i >= start} W(i)^-power`, exact or an upper bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tail {
    pub ln: f64,
    pub exact: bool,
}

pub(crate) fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln |e^a - e^b|`.
pub(crate) fn ln_abs_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return f64::NEG_INFINITY;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (-(-(hi - lo)).exp_m1()).ln()
}

impl Formula {
    pub fn polynomial_degree(coeffs: &[f64]) -> Option<usize> {
        coeffs.iter().rposition(|&c| c != 0.0)
    }

    /// Raw evaluation. The result may be zero or negative; callers validate.
    pub fn eval(&self, n: u64) -> Weight {
        match self {
            Formula::Constant { value } => Weight::Linear(*value),
            Formula::Polynomial { coeffs } => eval_polynomial(coeffs, n),
            Formula::Exponential { rho, scale } => {
                let ln = scale.ln() + n as f64 * rho.ln();
                if ln.abs() < LINEAR_LIMIT.ln() {
                    Weight::Linear(scale * rho.powf(n as f64))
                } else {
                    Weight::Log(ln)
                }
            }
            Formula::PolyLog {
                coeff,
                power,
                log_power,
                shift,
            } => {
                let x = n as f64;
                let lg = (x + shift).ln();
                if x == 0.0 && *power > 0.0 {
                    return Weight::Linear(0.0);
                }
                if lg <= 0.0 && *log_power != 0.0 {
                    // ln(n + shift) <= 0: keep the raw (possibly non-positive) value.
                    return Weight::Linear(coeff * x.powf(*power) * lg.powf(*log_power));
                }
                let ln = coeff.ln() + power * x.ln() + log_power * lg.ln();
                Weight::from_ln(ln)
            }
            Formula::Interleaved { even, odd } => {
                if n.is_multiple_of(2) {
                    even.eval(n / 2)
                } else {
                    odd.eval((n - 1) / 2)
                }
            }
        }
    }

    /// Whether `sum 1/W^power` provably diverges (`Some(true)`), provably
    /// converges (`Some(false)`), or cannot be decided from the rule.
    pub fn divergent(&self, power: f64) -> Option<bool> {
        match self {
            Formula::Constant { .. } => Some(true),
            Formula::Polynomial { coeffs } => {
                let m = Formula::polynomial_degree(coeffs)? as f64;
                Some(m * power <= 1.0)
            }
            Formula::Exponential { rho, .. } => Some(*rho <= 1.0),
            Formula::PolyLog {
                power: a,
                log_power: b,
                ..
            } => {
                let (ap, bp) = (a * power, b * power);
                if ap < 1.0 || (ap == 1.0 && bp <= 1.0) {
                    Some(true)
                } else {
                    Some(false)
                }
            }
            Formula::Interleaved { even, odd } => {
                match (even.divergent(power), odd.divergent(power)) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                }
            }
        }
    }

    /// Closed-form sum or upper bound of `sum_{i >= start} W(i)^-power`.
    pub fn tail_from(&self, start: u64, power: f64) -> Option<Tail> {
        match self {
            Formula::Constant { .. } => None,
            Formula::Polynomial { coeffs } => polynomial_tail(coeffs, start, power),
            Formula::Exponential { rho, scale } => {
                if *rho <= 1.0 || *scale <= 0.0 {
                    return None;
                }
                // s^-p rho^-p*start / (1 - rho^-p)
                let lnq = -power * rho.ln();
                let ln = -power * scale.ln() + start as f64 * lnq - (-lnq.exp_m1()).ln();
                Some(Tail { ln, exact: true })
            }
            Formula::PolyLog {
                coeff,
                power: a,
                log_power: b,
                shift,
            } => {
                if *coeff <= 0.0 || *shift < 0.0 || *b < 0.0 || start < 3 {
                    return None;
                }
                let (ap, bp) = (a * power, b * power);
                let lo = start as f64 - 0.5;
                let c = -power * coeff.ln();
                if ap > 1.0 {
                    let ln =
                        c + (1.0 - ap) * lo.ln() - (ap - 1.0).ln() - bp * (lo + shift).ln().ln();
                    Some(Tail { ln, exact: false })
                } else if ap == 1.0 && bp > 1.0 {
                    let ln = c + (1.0 - bp) * lo.ln().ln() - (bp - 1.0).ln();
                    Some(Tail { ln, exact: false })
                } else {
                    None
                }
            }
            Formula::Interleaved { even, odd } => {
                // W(2k) >= start  <=>  k >= ceil(start/2); W(2k+1) >= start  <=>  k >= floor(start/2)
                let e = even.tail_from(start.div_ceil(2), power)?;
                let o = odd.tail_from(start / 2, power)?;
                Some(Tail {
                    ln: ln_add(e.ln, o.ln),
                    exact: e.exact && o.exact,
                })
            }
        }
    }

    /// True when the rule is non-decreasing on all of `n >= 0` by construction.
    pub fn monotone_by_construction(&self) -> bool {
        match self {
            Formula::Constant { .. } => true,
            Formula::Polynomial { coeffs } => coeffs.iter().all(|&c| c >= 0.0),
            Formula::Exponential { rho, scale } => *rho >= 1.0 && *scale > 0.0,
            _ => false,
        }
    }
}

fn eval_polynomial(coeffs: &[f64], n: u64) -> Weight {
    let x = n as f64;
    let horner = coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    if horner.is_finite() && horner.abs() <= LINEAR_LIMIT {
        return Weight::Linear(horner);
    }
    // W(n) = n^m * sum_i a_i n^(i-m), Horner in 1/n.
    let m = Formula::polynomial_degree(coeffs).unwrap_or(0);
    let inv = 1.0 / x;
    let scaled = coeffs[..=m].iter().fold(0.0, |acc, &c| acc * inv + c);
    if scaled <= 0.0 {
        return Weight::Linear(horner);
    }
    Weight::Log(m as f64 * x.ln() + scaled.ln())
}

fn polynomial_tail(coeffs: &[f64], start: u64, power: f64) -> Option<Tail> {
    let m = Formula::polynomial_degree(coeffs)?;
    let lead = coeffs[m];
    let q = m as f64 * power;
    if lead <= 0.0 || q <= 1.0 {
        return None;
    }
    // W(i) >= c * i^m for i >= i0; c = a_m, or a_m/2 with negative lower terms.
    let negatives = coeffs[..m].iter().any(|&c| c < 0.0);
    let (c, i0) = if negatives {
        let lower: f64 = coeffs[..m].iter().map(|c| c.abs()).sum();
        (lead / 2.0, (2.0 * lower / lead).ceil().max(1.0))
    } else {
        (lead, 1.0)
    };
    if (start as f64) < i0 || start == 0 {
        return None;
    }
    // x^-q is convex, so sum_{i>=s} i^-q <= int_{s-1/2}^inf x^-q dx.
    let lo = start as f64 - 0.5;
    let ln = -power * c.ln() + (1.0 - q) * lo.ln() - (q - 1.0).ln();
    Some(Tail { ln, exact: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaved_example_values() {
        let f = Formula::Interleaved {
            even: Box::new(Formula::Polynomial {
                coeffs: vec![0.0, 0.0, 0.0, 0.0, 1.0],
            }),
            odd: Box::new(Formula::Polynomial {
                coeffs: vec![1.0, 0.0, 0.0, -1.0, 1.0],
            }),
        };
        assert_eq!(f.eval(6).value(), 81.0);
        assert_eq!(f.eval(7).value(), 55.0);
        assert_eq!(f.eval(0).value(), 0.0);
        assert_eq!(f.eval(1).value(), 1.0);
    }

    #[test]
    fn exponential_tail_is_geometric() {
        let f = Formula::Exponential {
            rho: 2.0,
            scale: 1.0,
        };
        let t = f.tail_from(5, 1.0).unwrap();
        assert!(t.exact);
        assert!((t.ln.exp() - 2f64.powi(-4)).abs() < 1e-15);
    }

    #[test]
    fn polynomial_tail_bounds_the_sum() {
        let f = Formula::Polynomial {
            coeffs: vec![0.0, 0.0, 1.0],
        };
        let brute: f64 = (100..2_000_000u64)
            .map(|i| 1.0 / (i as f64 * i as f64))
            .sum::<f64>()
            + 1.0 / 2_000_000.0;
        let t = f.tail_from(100, 1.0).unwrap().ln.exp();
        assert!(t >= brute);
        assert!((t - brute) / brute < 1e-5);
    }

    #[test]
    fn log_helpers() {
        assert!((ln_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((ln_abs_diff(3f64.ln(), 1f64.ln()) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(ln_abs_diff(1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn polynomial_overflow_goes_log() {
        let mut coeffs = vec![0.0; 65];
        coeffs[64] = 1.0;
        let w = eval_polynomial(&coeffs, 1_000_000_000);
        assert!(w.is_log());
        assert!((w.ln() - 64.0 * 1e9f64.ln()).abs() < 1e-9);
    }
}
