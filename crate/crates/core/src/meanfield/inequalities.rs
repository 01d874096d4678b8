use super::ratio;

/// `((1+h)^m - (1-h)^m) / ((1+h)^m + (1-h)^m)`, evaluated as `tanh(m atanh h)`.
pub fn lemma_quotient(m: u32, h: f64) -> f64 {
    (m as f64 * h.atanh()).tanh()
}

/// `q(h)/2 + ratio(h)/2 - h`, with `q` the [`lemma_quotient`].
pub fn beta(m: u32, h: f64) -> f64 {
    0.5 * lemma_quotient(m, h) + 0.5 * ratio(m, h) - h
}

/// Interior points `k/(n+1) * hi`, `k = 1..=n`.
fn grid(hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |k| k as f64 / (n + 1) as f64 * hi)
}

/// Grid points of `(0, 1/sqrt 5)` where `lemma_quotient(m, h) < 2h`.
pub fn lemma_violations(m: u32, n: usize) -> usize {
    grid(1.0 / 5f64.sqrt(), n)
        .filter(|&h| lemma_quotient(m, h) < 2.0 * h)
        .count()
}

/// Grid points of `(0, 1/2)` where `beta(m, h) <= 0`.
pub fn beta_violations(m: u32, n: usize) -> usize {
    grid(0.5, n).filter(|&h| beta(m, h) <= 0.0).count()
}
