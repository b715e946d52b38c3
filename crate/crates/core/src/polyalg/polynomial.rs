use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::monomial::Monomial;
use super::PolyError;

pub const DEFAULT_DROP_TOL: f64 = 1e-14;

/// Sparse multivariate polynomial over an ordered list of named variables.
///
/// Terms are kept in graded-lex order and every arithmetic result is pruned
/// of coefficients below `drop_tol` in magnitude.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    vars: Vec<String>,
    terms: BTreeMap<Monomial, f64>,
    drop_tol: f64,
}

impl Polynomial {
    pub fn zero(vars: &[String]) -> Self {
        Polynomial {
            vars: vars.to_vec(),
            terms: BTreeMap::new(),
            drop_tol: DEFAULT_DROP_TOL,
        }
    }

    pub fn constant(vars: &[String], c: f64) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(Monomial::one(vars.len()), c);
        p
    }

    /// The polynomial `x_i`.
    pub fn var(vars: &[String], i: usize) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(Monomial::var(vars.len(), i), 1.0);
        p
    }

    pub fn from_terms<I>(vars: &[String], terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(vars);
        for (e, c) in terms {
            if e.len() != vars.len() {
                return Err(PolyError::ExponentLength {
                    expected: vars.len(),
                    got: e.len(),
                });
            }
            p.add_term(Monomial::new(e), c);
        }
        Ok(p)
    }

    pub fn with_drop_tol(mut self, tol: f64) -> Self {
        self.drop_tol = tol;
        self.prune();
        self
    }

    pub fn drop_tol(&self) -> f64 {
        self.drop_tol
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn nterms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Adds `c·m` to the polynomial, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.vars.len());
        let tol = self.drop_tol;
        let entry = self.terms.entry(m.clone()).or_insert(0.0);
        *entry += c;
        if entry.abs() < tol || *entry == 0.0 {
            self.terms.remove(&m);
        }
    }

    fn prune(&mut self) {
        let tol = self.drop_tol;
        self.terms.retain(|_, c| c.abs() >= tol && *c != 0.0);
    }

    fn check_vars(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.vars != other.vars {
            return Err(PolyError::VariableMismatch {
                left: self.vars.clone(),
                right: other.vars.clone(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.vars.len() {
            return Err(PolyError::Dimension {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        Ok(self.eval(point))
    }

    /// Unchecked evaluation; `point` must have one entry per variable.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(point)).sum()
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_vars(other)?;
        let mut out = Polynomial::zero(&self.vars);
        out.drop_tol = self.drop_tol;
        let mut acc: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                *acc.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        out.terms = acc;
        out.prune();
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.prune();
        out
    }

    pub fn add_constant(&self, c: f64) -> Polynomial {
        let mut out = self.clone();
        out.add_term(Monomial::one(self.nvars()), c);
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(&self.vars, 1.0);
        for _ in 0..k {
            out = out.mul(self).expect("same variables");
        }
        out
    }

    /// Partial derivative with respect to variable `i`.
    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(&self.vars);
        out.drop_tol = self.drop_tol;
        for (m, &c) in &self.terms {
            let e = m.exps()[i];
            if e == 0 {
                continue;
            }
            let mut exps = m.exps().to_vec();
            exps[i] -= 1;
            out.add_term(Monomial::new(exps), c * e as f64);
        }
        out
    }

    /// `Σ_i (∂B/∂x_i)·f_i`. `B` may be defined over a prefix of `f`'s
    /// variables (states) while `f` also depends on trailing disturbance
    /// variables; the result lives over `f`'s variable list.
    pub fn lie_derivative(&self, f: &[Polynomial]) -> Result<Polynomial, PolyError> {
        let Some(first) = f.first() else {
            return Err(PolyError::Dimension {
                expected: self.nvars(),
                got: 0,
            });
        };
        if f.len() != self.nvars() {
            return Err(PolyError::Dimension {
                expected: self.nvars(),
                got: f.len(),
            });
        }
        let target = first.vars().to_vec();
        let lifted = self.embed(&target)?;
        let mut out = Polynomial::zero(&target);
        out.drop_tol = self.drop_tol;
        for (i, fi) in f.iter().enumerate() {
            let d = lifted.derivative(i);
            if d.is_zero() {
                continue;
            }
            out = out.add(&d.mul(fi)?)?;
        }
        Ok(out)
    }

    /// Re-expresses the polynomial over a larger variable list that contains
    /// all current variables (matched by name).
    pub fn embed(&self, target: &[String]) -> Result<Polynomial, PolyError> {
        if target == self.vars.as_slice() {
            return Ok(self.clone());
        }
        let map: Vec<usize> = self
            .vars
            .iter()
            .map(|v| {
                target
                    .iter()
                    .position(|t| t == v)
                    .ok_or_else(|| PolyError::UnknownVariable(v.clone()))
            })
            .collect::<Result<_, _>>()?;
        let mut out = Polynomial::zero(target);
        out.drop_tol = self.drop_tol;
        for (m, &c) in &self.terms {
            let mut e = vec![0u32; target.len()];
            for (k, &j) in map.iter().enumerate() {
                e[j] = m.exps()[k];
            }
            out.add_term(Monomial::new(e), c);
        }
        Ok(out)
    }

    /// Substitutes `x_i = value` and removes variable `i`.
    pub fn substitute(&self, i: usize, value: f64) -> Polynomial {
        let mut vars = self.vars.clone();
        vars.remove(i);
        let mut out = Polynomial::zero(&vars);
        out.drop_tol = self.drop_tol;
        for (m, &c) in &self.terms {
            let mut e = m.exps().to_vec();
            let k = e.remove(i);
            out.add_term(Monomial::new(e), c * value.powi(k as i32));
        }
        out
    }

    /// Composition with per-variable affine maps `x_i = a_i + b_i·y_i`.
    pub fn compose_affine(&self, offset: &[f64], gain: &[f64]) -> Result<Polynomial, PolyError> {
        let n = self.nvars();
        if offset.len() != n || gain.len() != n {
            return Err(PolyError::Dimension {
                expected: n,
                got: offset.len().min(gain.len()),
            });
        }
        let maps: Vec<Polynomial> = (0..n)
            .map(|i| Polynomial::var(&self.vars, i).scale(gain[i]).add_constant(offset[i]))
            .collect();
        let maxdeg = self.degree() as usize;
        let mut powers: Vec<Vec<Polynomial>> = Vec::with_capacity(n);
        for m in &maps {
            let mut pw = vec![Polynomial::constant(&self.vars, 1.0)];
            for k in 1..=maxdeg {
                let next = pw[k - 1].mul(m)?;
                pw.push(next);
            }
            powers.push(pw);
        }
        let mut out = Polynomial::zero(&self.vars);
        out.drop_tol = self.drop_tol;
        for (m, &c) in &self.terms {
            let mut t = Polynomial::constant(&self.vars, c);
            for (i, &e) in m.exps().iter().enumerate() {
                if e > 0 {
                    t = t.mul(&powers[i][e as usize])?;
                }
            }
            for (mm, cc) in t.terms {
                out.add_term(mm, cc);
            }
        }
        Ok(out)
    }

    /// Renames variables without touching coefficients.
    pub fn rename(&self, vars: &[String]) -> Result<Polynomial, PolyError> {
        if vars.len() != self.vars.len() {
            return Err(PolyError::Dimension {
                expected: self.vars.len(),
                got: vars.len(),
            });
        }
        let mut out = self.clone();
        out.vars = vars.to_vec();
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("polynomial serializes")
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (v, &e) in self.vars.iter().zip(m.exps()) {
                match e {
                    0 => {}
                    1 => write!(f, "*{v}")?,
                    _ => write!(f, "*{v}^{e}")?,
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    exps: Vec<u32>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    variables: Vec<String>,
    terms: Vec<TermRepr>,
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolyRepr {
            variables: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| TermRepr {
                    exps: m.exps().to_vec(),
                    coeff: c,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PolyRepr::deserialize(d)?;
        Polynomial::from_terms(&r.variables, r.terms.into_iter().map(|t| (t.exps, t.coeff)))
            .map_err(serde::de::Error::custom)
    }
}

pub fn var_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn evaluate_hand_expansion() {
        let p = Polynomial::from_terms(&xy(), [(vec![2, 0], 1.0), (vec![1, 1], 2.0)]).unwrap();
        assert_eq!(p.evaluate(&[1.0, 1.0]).unwrap(), 3.0);
        assert_eq!(Polynomial::zero(&xy()).evaluate(&[3.0, -2.0]).unwrap(), 0.0);
        assert!(p.evaluate(&[1.0]).is_err());
    }

    #[test]
    fn difference_of_squares() {
        let x = Polynomial::var(&xy(), 0);
        let y = Polynomial::var(&xy(), 1);
        let p = x.add(&y).unwrap().mul(&x.sub(&y).unwrap()).unwrap();
        let expect = Polynomial::from_terms(&xy(), [(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
        assert_eq!(p, expect);
        assert!(p.add(&p.scale(-1.0)).unwrap().is_zero());
    }

    #[test]
    fn variable_mismatch_rejected() {
        let p = Polynomial::var(&xy(), 0);
        let q = Polynomial::var(&["z".to_string()], 0);
        assert!(matches!(p.add(&q), Err(PolyError::VariableMismatch { .. })));
    }

    #[test]
    fn lie_derivative_examples() {
        let x = vec!["x".to_string()];
        let b = Polynomial::var(&x, 0).pow(2);
        let f = vec![Polynomial::var(&x, 0).scale(-1.0)];
        let l = b.lie_derivative(&f).unwrap();
        assert_eq!(l, Polynomial::var(&x, 0).pow(2).scale(-2.0));

        let b = Polynomial::var(&xy(), 0).add(&Polynomial::var(&xy(), 1)).unwrap();
        let f = vec![Polynomial::var(&xy(), 1), Polynomial::var(&xy(), 0).scale(-1.0)];
        let l = b.lie_derivative(&f).unwrap();
        let expect = Polynomial::var(&xy(), 1).sub(&Polynomial::var(&xy(), 0)).unwrap();
        assert_eq!(l, expect);
    }

    #[test]
    fn lie_derivative_over_disturbance_vars() {
        let xd = vec!["x".to_string(), "d".to_string()];
        let b = Polynomial::var(&["x".to_string()], 0).pow(2);
        let f = vec![Polynomial::var(&xd, 0)
            .scale(-1.0)
            .add(&Polynomial::var(&xd, 1))
            .unwrap()];
        let l = b.lie_derivative(&f).unwrap();
        assert_eq!(l.vars(), xd.as_slice());
        assert!((l.eval(&[2.0, 0.5]) - 2.0 * 2.0 * (-2.0 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn drop_tolerance_prunes_dust() {
        let x = Polynomial::var(&xy(), 0);
        let dust = x.scale(1e-15);
        assert!(dust.is_zero());
        let p = x.add(&x.scale(-(1.0 - 1e-16))).unwrap();
        assert!(p.is_zero());
    }

    #[test]
    fn degree_convention() {
        assert_eq!(Polynomial::zero(&xy()).degree(), 0);
        let p = Polynomial::from_terms(&xy(), [(vec![3, 1], 1.0), (vec![0, 1], 1.0)]).unwrap();
        assert_eq!(p.degree(), 4);
    }

    #[test]
    fn json_round_trip() {
        let p = Polynomial::from_terms(&xy(), [(vec![2, 0], 1.5), (vec![0, 1], -0.25)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with("{\"variables\":[\"x\",\"y\"],\"terms\":["));
        let q: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let bad = r#"{"variables":["x"],"terms":[{"exps":[1,2],"coeff":1.0}]}"#;
        assert!(serde_json::from_str::<Polynomial>(bad).is_err());
    }

    #[test]
    fn substitute_and_embed() {
        let xd = vec!["x".to_string(), "d".to_string()];
        let p = Polynomial::from_terms(&xd, [(vec![1, 1], 2.0), (vec![0, 2], 1.0)]).unwrap();
        let q = p.substitute(1, 3.0);
        assert_eq!(q.vars(), &["x".to_string()]);
        assert!((q.eval(&[2.0]) - p.eval(&[2.0, 3.0])).abs() < 1e-14);
        let e = q.embed(&xd).unwrap();
        assert!((e.eval(&[2.0, 7.0]) - q.eval(&[2.0])).abs() < 1e-14);
    }
}
