use crate::error::{Result, UrnError};

/// Values above this (or below its reciprocal) are carried as logarithms.
pub const LINEAR_LIMIT: f64 = 1e300;

/// A reinforcement weight, stored linearly while it fits and in log space after.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Linear(f64),
    Log(f64),
}

impl Weight {
    pub(crate) fn from_ln(ln: f64) -> Weight {
        if ln.abs() < LINEAR_LIMIT.ln() {
            Weight::Linear(ln.exp())
        } else {
            Weight::Log(ln)
        }
    }

    pub fn ln(self) -> f64 {
        match self {
            Weight::Linear(v) => v.ln(),
            Weight::Log(l) => l,
        }
    }

    /// Linear value; `+inf` once the weight has left the linear range.
    pub fn value(self) -> f64 {
        match self {
            Weight::Linear(v) => v,
            Weight::Log(l) => l.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Weight::Linear(v) if v == 0.0)
    }

    pub fn is_log(self) -> bool {
        matches!(self, Weight::Log(_))
    }
}

/// Probability `W(b) / (W(b) + W(r))`, evaluated as `1 / (1 + W(r)/W(b))`.
///
/// The rounded form is monotone in each argument, which the pathwise coupling
/// relies on. Both weights zero is a degenerate draw and is refused.
pub fn draw_probability(black: Weight, red: Weight) -> Result<f64> {
    if black.is_zero() && red.is_zero() {
        return Err(UrnError::ConditionViolation(
            "both pool weights are zero".into(),
        ));
    }
    if black.is_zero() {
        return Ok(0.0);
    }
    if red.is_zero() {
        return Ok(1.0);
    }
    match (black, red) {
        (Weight::Linear(b), Weight::Linear(r)) => Ok(1.0 / (1.0 + r / b)),
        _ => Ok(1.0 / (1.0 + (red.ln() - black.ln()).exp())),
    }
}
