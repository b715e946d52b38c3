use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Exponent vector of a monomial, one entry per variable.
///
/// Ordered graded-lexicographically: lower total degree first, then
/// lexicographically descending exponents (so `x0^2 < x0 x1 < x1^2`).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial(exps)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .fold(1.0, |acc, (&e, &x)| if e == 0 { acc } else { acc * x.powi(e as i32) })
    }

    /// All monomials in `nvars` variables with total degree `<= max_degree`,
    /// in graded-lex order.
    pub fn all_up_to(nvars: usize, max_degree: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        for d in 0..=max_degree {
            let mut cur = vec![0u32; nvars];
            push_degree(nvars, d, 0, &mut cur, &mut out);
        }
        out
    }
}

fn push_degree(nvars: usize, remaining: u32, idx: usize, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if nvars == 0 {
        if remaining == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    if idx == nvars - 1 {
        cur[idx] = remaining;
        out.push(Monomial(cur.clone()));
        cur[idx] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[idx] = e;
        push_degree(nvars, remaining - e, idx + 1, cur, out);
    }
    cur[idx] = 0;
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Number of monomials of degree `<= d` in `n` variables.
pub fn count_up_to(n: usize, d: u32) -> usize {
    // C(n + d, d)
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for k in 1..=(d as u128) {
        num *= n as u128 + k;
        den *= k;
    }
    (num / den) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_graded_and_complete() {
        let ms = Monomial::all_up_to(3, 4);
        assert_eq!(ms.len(), count_up_to(3, 4));
        assert_eq!(ms.len(), 35);
        for w in ms.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(ms[0], Monomial::one(3));
        assert_eq!(ms[1], Monomial::new(vec![1, 0, 0]));
    }

    #[test]
    fn zero_variables() {
        let ms = Monomial::all_up_to(0, 3);
        assert_eq!(ms.len(), 1);
        assert_eq!(count_up_to(0, 3), 1);
    }
}
