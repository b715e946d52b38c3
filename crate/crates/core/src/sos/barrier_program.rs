use super::{DecisionKind, DecisionTerm, SosConstraint, SosError, SosProgram, TermOp};
use crate::polyalg::Polynomial;

#[derive(Clone, Debug)]
pub enum Unknown {
    Decision,
    Fixed(Polynomial),
}

/// Data of the three barrier-certificate conditions. `f` and `g_d` live over
/// `states ++ disturbances`; all other sets live over `states`.
#[derive(Clone, Debug)]
pub struct BarrierProgramSpec {
    pub states: Vec<String>,
    pub disturbances: Vec<String>,
    pub f: Vec<Polynomial>,
    pub g_x: Vec<Polynomial>,
    pub g_i: Vec<Polynomial>,
    pub g_u: Vec<Polynomial>,
    pub g_d: Vec<Polynomial>,
    pub epsilon: f64,
    /// Margin replacing the strict inequality of the flow condition.
    pub epsilon_lie: f64,
    pub barrier_degree: u32,
    /// Defaults to `barrier_degree − deg g`, rounded down to even.
    pub lambda_i_degree: Option<u32>,
    pub lambda_u_degree: Option<u32>,
    pub lambda_xd_degree: u32,
    pub lambda_b_degree: u32,
    /// Adds `g_X` multipliers to the unsafe condition so it only has to hold
    /// inside the domain.
    pub localize_unsafe: bool,
    pub barrier: Unknown,
    pub lambda_b: Unknown,
}

impl BarrierProgramSpec {
    pub fn joint_vars(&self) -> Vec<String> {
        let mut v = self.states.clone();
        v.extend(self.disturbances.iter().cloned());
        v
    }
}

#[derive(Clone, Debug, Default)]
pub struct BarrierHandles {
    pub barrier: Option<usize>,
    pub lambda_b: Option<usize>,
    pub initial: Vec<usize>,
    pub unsafe_sets: Vec<usize>,
    pub lie: usize,
}

fn even_down(d: i64) -> u32 {
    let d = d.max(0) as u32;
    d - d % 2
}

/// Emits `−B − λ_I g_I ∈ Σ²` per initial set, `B − ε − λ_U g_U ∈ Σ²` per
/// unsafe set and `−(∂B/∂x) f − Σ λ_D g_D − Σ λ_X g_X − λ_B B − ε_L ∈ Σ²`.
pub fn build_barrier_program(spec: &BarrierProgramSpec) -> Result<(SosProgram, BarrierHandles), SosError> {
    if matches!((&spec.barrier, &spec.lambda_b), (Unknown::Decision, Unknown::Decision)) {
        return Err(SosError::Bilinear(
            "B and λ_B cannot both be decision polynomials".into(),
        ));
    }
    if !(spec.epsilon > 0.0) {
        return Err(SosError::Structure("epsilon must be positive".into()));
    }
    let xs = &spec.states;
    let xd = spec.joint_vars();
    if spec.f.len() != xs.len() {
        return Err(SosError::Structure(
            "vector field length differs from state count".into(),
        ));
    }
    let f: Vec<Polynomial> = spec.f.iter().map(|fi| fi.embed(&xd)).collect::<Result<_, _>>()?;

    let mut prog = SosProgram::new();
    let mut h = BarrierHandles::default();
    let b_deg = match &spec.barrier {
        Unknown::Decision => {
            h.barrier = Some(prog.add_decision("B", xs, spec.barrier_degree, DecisionKind::Free));
            spec.barrier_degree
        }
        Unknown::Fixed(b) => {
            let d = b.degree().max(spec.barrier_degree);
            d + d % 2
        }
    };
    let b_fixed_x = match &spec.barrier {
        Unknown::Fixed(b) => Some(b.embed(xs)?),
        Unknown::Decision => None,
    };
    if let Unknown::Decision = spec.lambda_b {
        h.lambda_b = Some(prog.add_decision("lambda_B", &xd, spec.lambda_b_degree, DecisionKind::Sos));
    }

    let b_term =
        |scale: f64, op: TermOp| -> Option<DecisionTerm> { h.barrier.map(|d| DecisionTerm { decision: d, scale, op }) };

    for (k, gi) in spec.g_i.iter().enumerate() {
        let gi = gi.embed(xs)?;
        let deg = spec
            .lambda_i_degree
            .unwrap_or_else(|| even_down(b_deg as i64 - gi.degree() as i64));
        let gi_deg = gi.degree();
        let lam = prog.add_decision(&format!("lambda_I{k}"), xs, deg, DecisionKind::Sos);
        let mut terms: Vec<DecisionTerm> = b_term(-1.0, TermOp::Identity).into_iter().collect();
        terms.push(DecisionTerm {
            decision: lam,
            scale: -1.0,
            op: TermOp::Multiply(gi),
        });
        let fixed = match &b_fixed_x {
            Some(b) => b.scale(-1.0),
            None => Polynomial::zero(xs),
        };
        h.initial.push(prog.add_constraint(SosConstraint {
            name: format!("initial[{k}]"),
            vars: xs.clone(),
            fixed,
            terms,
            half_degree: Some((b_deg.max(deg + gi_deg) + 1) / 2),
        }));
    }

    for (k, gu) in spec.g_u.iter().enumerate() {
        let gu = gu.embed(xs)?;
        let deg = spec
            .lambda_u_degree
            .unwrap_or_else(|| even_down(b_deg as i64 - gu.degree() as i64));
        let gu_deg = gu.degree();
        let lam = prog.add_decision(&format!("lambda_U{k}"), xs, deg, DecisionKind::Sos);
        let mut terms: Vec<DecisionTerm> = b_term(1.0, TermOp::Identity).into_iter().collect();
        terms.push(DecisionTerm {
            decision: lam,
            scale: -1.0,
            op: TermOp::Multiply(gu),
        });
        if spec.localize_unsafe {
            for (j, gx) in spec.g_x.iter().enumerate() {
                let gx = gx.embed(xs)?;
                let d = even_down(b_deg as i64 - gx.degree() as i64);
                let mu = prog.add_decision(&format!("lambda_U{k}X{j}"), xs, d, DecisionKind::Sos);
                terms.push(DecisionTerm {
                    decision: mu,
                    scale: -1.0,
                    op: TermOp::Multiply(gx),
                });
            }
        }
        let fixed = match &b_fixed_x {
            Some(b) => b.add_constant(-spec.epsilon),
            None => Polynomial::constant(xs, -spec.epsilon),
        };
        h.unsafe_sets.push(prog.add_constraint(SosConstraint {
            name: format!("unsafe[{k}]"),
            vars: xs.clone(),
            fixed,
            terms,
            half_degree: Some((b_deg.max(deg + gu_deg) + 1) / 2),
        }));
    }

    let mut fixed = Polynomial::constant(&xd, -spec.epsilon_lie);
    let mut terms: Vec<DecisionTerm> = b_term(-1.0, TermOp::LieDerivative(f.clone())).into_iter().collect();
    if let Some(b) = &b_fixed_x {
        fixed = fixed.sub(&b.lie_derivative(&f)?)?;
    }
    for (k, gd) in spec.g_d.iter().enumerate() {
        let lam = prog.add_decision(&format!("lambda_D{k}"), &xd, spec.lambda_xd_degree, DecisionKind::Sos);
        terms.push(DecisionTerm {
            decision: lam,
            scale: -1.0,
            op: TermOp::Multiply(gd.embed(&xd)?),
        });
    }
    for (k, gx) in spec.g_x.iter().enumerate() {
        let lam = prog.add_decision(&format!("lambda_X{k}"), &xd, spec.lambda_xd_degree, DecisionKind::Sos);
        terms.push(DecisionTerm {
            decision: lam,
            scale: -1.0,
            op: TermOp::Multiply(gx.embed(&xd)?),
        });
    }
    match (&spec.lambda_b, &b_fixed_x) {
        (Unknown::Fixed(lb), None) => {
            let lb = lb.embed(&xd)?;
            terms.push(DecisionTerm {
                decision: h.barrier.expect("barrier is a decision"),
                scale: -1.0,
                op: TermOp::Multiply(lb),
            });
        }
        (Unknown::Fixed(lb), Some(b)) => {
            fixed = fixed.sub(&lb.embed(&xd)?.mul(&b.embed(&xd)?)?)?;
        }
        (Unknown::Decision, Some(b)) => {
            terms.push(DecisionTerm {
                decision: h.lambda_b.expect("lambda_B is a decision"),
                scale: -1.0,
                op: TermOp::Multiply(b.embed(&xd)?),
            });
        }
        (Unknown::Decision, None) => unreachable!("rejected above"),
    }
    let f_deg = f.iter().map(|fi| fi.degree()).max().unwrap_or(0);
    let lb_deg = match &spec.lambda_b {
        Unknown::Fixed(lb) => lb.degree(),
        Unknown::Decision => spec.lambda_b_degree,
    };
    let set_deg = spec.g_x.iter().chain(&spec.g_d).map(|g| g.degree()).max().unwrap_or(0);
    let lie_deg = (b_deg + f_deg.max(1) - 1)
        .max(b_deg + lb_deg)
        .max(spec.lambda_xd_degree + set_deg);
    h.lie = prog.add_constraint(SosConstraint {
        name: "lie".into(),
        vars: xd.clone(),
        fixed,
        terms,
        half_degree: Some((lie_deg + 1) / 2),
    });
    Ok((prog, h))
}
