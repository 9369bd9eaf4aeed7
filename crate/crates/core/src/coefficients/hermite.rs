use crate::{Error, Result};

/// Largest supported Hermite degree.
pub const HERMITE_CAP: usize = 30;

/// Probabilists' Hermite polynomial `He_k(x)`, via
/// `He_{k+1} = x·He_k − k·He_{k−1}` with `He_0 = 1`, `He_1 = x`.
pub fn hermite_polynomial(k: usize, x: f64) -> Result<f64> {
    if k > HERMITE_CAP {
        return Err(Error::OrderTooHigh { order: k, cap: HERMITE_CAP });
    }
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return Ok(prev);
    }
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Monomial coefficients of `He_k`, lowest degree first.
pub fn hermite_coefficients(k: usize) -> Result<Vec<f64>> {
    if k > HERMITE_CAP {
        return Err(Error::OrderTooHigh { order: k, cap: HERMITE_CAP });
    }
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 1.0];
    if k == 0 {
        return Ok(prev);
    }
    for j in 1..k {
        let mut next = vec![0.0; j + 2];
        for (d, c) in cur.iter().enumerate() {
            next[d + 1] += c;
        }
        for (d, c) in prev.iter().enumerate() {
            next[d] -= j as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    Ok(cur)
}
