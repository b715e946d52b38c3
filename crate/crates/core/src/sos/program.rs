use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SosError;
use crate::linalg::Mat;
use crate::polyalg::{Monomial, Polynomial};
use crate::sdp::{BlockKind, Constraint, LinearForm, SdpProblem, SdpSolution, SparseSym};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    /// Unconstrained coefficients over the full monomial basis up to `degree`.
    Free,
    /// `zᵀ G z` with `G ⪰ 0` and `z` the monomials up to `degree / 2`.
    Sos,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecisionPoly {
    pub name: String,
    pub vars: Vec<String>,
    pub degree: u32,
    pub kind: DecisionKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermOp {
    Identity,
    /// Multiplication by a fixed polynomial over the constraint variables.
    Multiply(Polynomial),
    /// `Σ_i ∂D/∂x_i · f_i` with `f` over the constraint variables.
    LieDerivative(Vec<Polynomial>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecisionTerm {
    pub decision: usize,
    pub scale: f64,
    pub op: TermOp,
}

/// `fixed + Σ scale · op(decision) ∈ Σ²[vars]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosConstraint {
    pub name: String,
    pub vars: Vec<String>,
    pub fixed: Polynomial,
    pub terms: Vec<DecisionTerm>,
    /// Half-degree of the Gram basis; derived from the expression if absent.
    pub half_degree: Option<u32>,
}

/// Linear functional `Σ_α weights_α · coeff_α(decision)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectiveTerm {
    pub decision: usize,
    pub weights: Polynomial,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SosProgram {
    pub decisions: Vec<DecisionPoly>,
    pub constraints: Vec<SosConstraint>,
    pub objective: Vec<ObjectiveTerm>,
}

impl SosProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_decision(&mut self, name: &str, vars: &[String], degree: u32, kind: DecisionKind) -> usize {
        self.decisions.push(DecisionPoly {
            name: name.to_string(),
            vars: vars.to_vec(),
            degree,
            kind,
        });
        self.decisions.len() - 1
    }

    pub fn add_constraint(&mut self, c: SosConstraint) -> usize {
        self.constraints.push(c);
        self.constraints.len() - 1
    }

    fn validate(&self) -> Result<(), SosError> {
        for d in &self.decisions {
            if d.kind == DecisionKind::Sos && d.degree % 2 == 1 {
                return Err(SosError::OddDegree {
                    what: d.name.clone(),
                    degree: d.degree,
                });
            }
        }
        for c in &self.constraints {
            if c.fixed.vars() != c.vars.as_slice() {
                return Err(SosError::Structure(format!(
                    "constraint {}: fixed part variable mismatch",
                    c.name
                )));
            }
            for t in &c.terms {
                let d = self.decisions.get(t.decision).ok_or_else(|| {
                    SosError::Structure(format!("constraint {}: unknown decision {}", c.name, t.decision))
                })?;
                if d.vars.iter().any(|v| !c.vars.contains(v)) {
                    return Err(SosError::Structure(format!(
                        "constraint {}: decision {} uses variables outside the constraint",
                        c.name, d.name
                    )));
                }
                match &t.op {
                    TermOp::Multiply(p) if p.vars() != c.vars.as_slice() => {
                        return Err(SosError::Structure(format!(
                            "constraint {}: multiplier variable mismatch",
                            c.name
                        )));
                    }
                    TermOp::LieDerivative(f) => {
                        if f.len() != d.vars.len() || f.iter().any(|fi| fi.vars() != c.vars.as_slice()) {
                            return Err(SosError::Structure(format!(
                                "constraint {}: vector field mismatch",
                                c.name
                            )));
                        }
                    }
                    _ => {}
                }
            }
        }
        for o in &self.objective {
            let d = self
                .decisions
                .get(o.decision)
                .ok_or_else(|| SosError::Structure(format!("objective: unknown decision {}", o.decision)))?;
            if o.weights.vars() != d.vars.as_slice() {
                return Err(SosError::Structure("objective weights variable mismatch".into()));
            }
        }
        Ok(())
    }
}

impl TermOp {
    fn apply(&self, p: &Polynomial, cvars: &[String]) -> Result<Polynomial, SosError> {
        Ok(match self {
            TermOp::Identity => p.embed(cvars)?,
            TermOp::Multiply(q) => p.embed(cvars)?.mul(q)?,
            TermOp::LieDerivative(f) => p.lie_derivative(f)?.embed(cvars)?,
        })
    }
}

impl SosConstraint {
    /// Evaluates the constraint expression for concrete decision values.
    pub fn expression(&self, decisions: &[Polynomial]) -> Result<Polynomial, SosError> {
        let mut e = self.fixed.clone();
        for t in &self.terms {
            let p = t.op.apply(&decisions[t.decision], &self.vars)?;
            e = e.add(&p.scale(t.scale))?;
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DecisionLayout {
    Free { offset: usize, monomials: Vec<Monomial> },
    Sos { block: usize, basis: Vec<Monomial> },
}

/// Maps an [`SdpSolution`] back to decision polynomials and Gram matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Recovery {
    decisions: Vec<DecisionLayout>,
    /// Per constraint: Gram block index and basis.
    constraints: Vec<(usize, Vec<Monomial>)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosCertificate {
    pub basis: Vec<Monomial>,
    pub gram: Mat,
    /// `expression − zᵀ G z`.
    pub residual: Polynomial,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosSolution {
    pub decisions: Vec<Polynomial>,
    pub certificates: Vec<SosCertificate>,
    pub objective: f64,
}

impl SosSolution {
    pub fn max_residual(&self) -> f64 {
        self.certificates.iter().map(|c| c.max_residual).fold(0.0, f64::max)
    }
}

pub struct Compiled {
    pub sdp: SdpProblem,
    pub recovery: Recovery,
}

/// Pairs `(a, b)`, `a <= b`, of basis indices grouped by product monomial.
pub(crate) fn gram_pairs(basis: &[Monomial]) -> BTreeMap<Monomial, Vec<(usize, usize)>> {
    let mut out: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
    for a in 0..basis.len() {
        for b in a..basis.len() {
            out.entry(basis[a].mul(&basis[b])).or_default().push((a, b));
        }
    }
    out
}

pub(crate) fn gram_to_poly(vars: &[String], basis: &[Monomial], g: &Mat) -> Polynomial {
    let mut p = Polynomial::zero(vars);
    for a in 0..basis.len() {
        for b in a..basis.len() {
            let c = if a == b { g[(a, a)] } else { g[(a, b)] + g[(b, a)] };
            if c != 0.0 {
                p.add_term(basis[a].mul(&basis[b]), c);
            }
        }
    }
    p
}

/// One symbolic "atom" of a decision polynomial: the monomial it produces
/// and where its coefficient lives in the SDP.
enum Atom {
    Free(usize),
    Gram(usize, Vec<(usize, usize)>),
}

fn decision_atoms(layout: &DecisionLayout) -> Vec<(Monomial, Atom)> {
    match layout {
        DecisionLayout::Free { offset, monomials } => monomials
            .iter()
            .enumerate()
            .map(|(k, m)| (m.clone(), Atom::Free(offset + k)))
            .collect(),
        DecisionLayout::Sos { block, basis } => gram_pairs(basis)
            .into_iter()
            .map(|(m, pairs)| (m, Atom::Gram(*block, pairs)))
            .collect(),
    }
}

#[derive(Default)]
struct Row {
    blocks: BTreeMap<usize, SparseSym>,
    free: BTreeMap<usize, f64>,
}

pub fn compile(prog: &SosProgram) -> Result<Compiled, SosError> {
    prog.validate()?;
    let mut blocks = Vec::new();
    let mut nfree = 0;
    let mut layouts = Vec::new();
    for d in &prog.decisions {
        match d.kind {
            DecisionKind::Free => {
                let monomials = Monomial::all_up_to(d.vars.len(), d.degree);
                layouts.push(DecisionLayout::Free {
                    offset: nfree,
                    monomials: monomials.clone(),
                });
                nfree += monomials.len();
            }
            DecisionKind::Sos => {
                let basis = Monomial::all_up_to(d.vars.len(), d.degree / 2);
                layouts.push(DecisionLayout::Sos {
                    block: blocks.len(),
                    basis: basis.clone(),
                });
                blocks.push(BlockKind::Psd(basis.len()));
            }
        }
    }
    let atoms: Vec<Vec<(Monomial, Atom)>> = layouts.iter().map(decision_atoms).collect();

    let mut constraints = Vec::new();
    let mut cons_layout = Vec::new();
    for c in &prog.constraints {
        // Expand every decision term into per-monomial rows.
        let mut rows: BTreeMap<Monomial, Row> = BTreeMap::new();
        let mut maxdeg = c.fixed.degree();
        for t in &c.terms {
            let dvars = &prog.decisions[t.decision].vars;
            for (mono, atom) in &atoms[t.decision] {
                let unit = Polynomial::from_terms(dvars, [(mono.exps().to_vec(), 1.0)])?;
                let image = t.op.apply(&unit, &c.vars)?;
                if !image.is_zero() {
                    maxdeg = maxdeg.max(image.degree());
                }
                for (beta, coef) in image.terms() {
                    let row = rows.entry(beta.clone()).or_default();
                    let v = t.scale * coef;
                    match atom {
                        Atom::Free(k) => *row.free.entry(*k).or_insert(0.0) += v,
                        Atom::Gram(b, pairs) => {
                            let s = row.blocks.entry(*b).or_default();
                            for &(i, j) in pairs {
                                s.add(i, j, v);
                            }
                        }
                    }
                }
            }
        }
        if maxdeg % 2 == 1 && c.half_degree.is_none() {
            return Err(SosError::OddDegree {
                what: c.name.clone(),
                degree: maxdeg,
            });
        }
        let half = match c.half_degree {
            Some(h) if 2 * h < maxdeg => {
                return Err(SosError::DegreeBound {
                    constraint: c.name.clone(),
                    degree: maxdeg,
                    basis_half_degree: h,
                })
            }
            Some(h) => h,
            None => maxdeg / 2,
        };
        let basis = Monomial::all_up_to(c.vars.len(), half);
        let gblock = blocks.len();
        blocks.push(BlockKind::Psd(basis.len()));
        let pairs = gram_pairs(&basis);
        for (beta, _) in c.fixed.terms() {
            if !pairs.contains_key(beta) {
                return Err(SosError::DegreeBound {
                    constraint: c.name.clone(),
                    degree: beta.degree(),
                    basis_half_degree: half,
                });
            }
        }
        if let Some(beta) = rows.keys().find(|b| !pairs.contains_key(*b)) {
            return Err(SosError::DegreeBound {
                constraint: c.name.clone(),
                degree: beta.degree(),
                basis_half_degree: half,
            });
        }
        // <Q, E_β> − Σ terms_β = fixed_β for every monomial of the basis square.
        for (beta, gp) in &pairs {
            let mut q = SparseSym::new();
            for &(i, j) in gp {
                q.add(i, j, 1.0);
            }
            let mut con = Constraint {
                blocks: vec![(gblock, q)],
                free: Vec::new(),
                rhs: c.fixed.coeff(beta),
            };
            if let Some(row) = rows.remove(beta) {
                for (b, mut s) in row.blocks {
                    for e in &mut s.entries {
                        e.2 = -e.2;
                    }
                    s.canonicalize();
                    if !s.is_empty() {
                        con.blocks.push((b, s));
                    }
                }
                for (k, v) in row.free {
                    if v != 0.0 {
                        con.free.push((k, -v));
                    }
                }
            }
            constraints.push(con);
        }
        cons_layout.push((gblock, basis));
    }

    let mut objective = LinearForm::default();
    let mut obj_blocks: BTreeMap<usize, SparseSym> = BTreeMap::new();
    let mut obj_free: BTreeMap<usize, f64> = BTreeMap::new();
    for o in &prog.objective {
        match &layouts[o.decision] {
            DecisionLayout::Free { offset, monomials } => {
                for (k, m) in monomials.iter().enumerate() {
                    let w = o.weights.coeff(m);
                    if w != 0.0 {
                        *obj_free.entry(offset + k).or_insert(0.0) += w;
                    }
                }
            }
            DecisionLayout::Sos { block, basis } => {
                let s = obj_blocks.entry(*block).or_default();
                for (m, pairs) in gram_pairs(basis) {
                    let w = o.weights.coeff(&m);
                    if w != 0.0 {
                        for (i, j) in pairs {
                            s.add(i, j, w);
                        }
                    }
                }
            }
        }
    }
    for (b, mut s) in obj_blocks {
        s.canonicalize();
        if !s.is_empty() {
            objective.blocks.push((b, s));
        }
    }
    objective.free = obj_free.into_iter().filter(|(_, v)| *v != 0.0).collect();

    let sdp = SdpProblem {
        blocks,
        free_vars: nfree,
        constraints,
        objective,
    };
    Ok(Compiled {
        sdp,
        recovery: Recovery {
            decisions: layouts,
            constraints: cons_layout,
        },
    })
}

impl Recovery {
    pub fn recover(&self, prog: &SosProgram, sol: &SdpSolution) -> Result<SosSolution, SosError> {
        let mut decisions = Vec::with_capacity(prog.decisions.len());
        let mut objective = 0.0;
        for (d, layout) in prog.decisions.iter().zip(&self.decisions) {
            let p = match layout {
                DecisionLayout::Free { offset, monomials } => {
                    let mut p = Polynomial::zero(&d.vars);
                    for (k, m) in monomials.iter().enumerate() {
                        p.add_term(m.clone(), sol.free[offset + k]);
                    }
                    p
                }
                DecisionLayout::Sos { block, basis } => gram_to_poly(&d.vars, basis, &sol.x[*block]),
            };
            decisions.push(p);
        }
        for o in &prog.objective {
            for (m, w) in o.weights.terms() {
                objective += w * decisions[o.decision].coeff(m);
            }
        }
        let mut certificates = Vec::with_capacity(prog.constraints.len());
        for (c, (block, basis)) in prog.constraints.iter().zip(&self.constraints) {
            let expr = c.expression(&decisions)?;
            let gram = sol.x[*block].clone();
            let recon = gram_to_poly(&c.vars, basis, &gram);
            let residual = expr.sub(&recon)?;
            let max_residual = residual.max_abs_coeff();
            certificates.push(SosCertificate {
                basis: basis.clone(),
                gram,
                residual,
                max_residual,
            });
        }
        Ok(SosSolution {
            decisions,
            certificates,
            objective,
        })
    }
}
