use proptest::prelude::*;
use roskit::polyalg::*;

fn vars(n: usize) -> Vec<String> {
    var_names("x", n)
}

/// Random polynomial in `n` variables with total degree at most `deg`.
fn poly(n: usize, deg: u32) -> impl Strategy<Value = Vec<(Vec<u32>, f64)>> {
    let term = (prop::collection::vec(0..=deg, n), -2.0..2.0f64).prop_map(move |(mut e, c)| {
        while e.iter().sum::<u32>() > deg {
            let k = e.iter().position(|&v| v > 0).unwrap();
            e[k] -= 1;
        }
        (e, c)
    });
    prop::collection::vec(term, 1..12)
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5..1.5f64, n)
}

fn build(n: usize, terms: &[(Vec<u32>, f64)]) -> Polynomial {
    Polynomial::from_terms(&vars(n), terms.iter().cloned()).unwrap()
}

/// Sum over the raw term list, repeated exponents included.
fn term_sum(terms: &[(Vec<u32>, f64)], z: &[f64]) -> f64 {
    terms
        .iter()
        .map(|(e, c)| c * e.iter().zip(z).map(|(&k, &x)| x.powi(k as i32)).product::<f64>())
        .sum()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_matches_term_sum(t in poly(3, 4), z in point(3)) {
        let p = build(3, &t);
        prop_assert!(close(p.evaluate(&z).unwrap(), term_sum(&t, &z), 1e-12));
    }

    #[test]
    fn product_evaluates_pointwise(a in poly(3, 3), b in poly(3, 3), zs in prop::collection::vec(point(3), 100)) {
        let (p, q) = (build(3, &a), build(3, &b));
        let pq = p.mul(&q).unwrap();
        if !p.is_zero() && !q.is_zero() {
            prop_assert_eq!(pq.degree(), p.degree() + q.degree());
        }
        for z in &zs {
            prop_assert!(close(pq.eval(z), p.eval(z) * q.eval(z), 1e-10));
        }
    }

    #[test]
    fn ring_axioms_hold_pointwise(
        a in poly(2, 3),
        b in poly(2, 3),
        c in poly(2, 3),
        zs in prop::collection::vec(point(2), 100),
    ) {
        let (p, q, r) = (build(2, &a), build(2, &b), build(2, &c));
        let dist_l = p.mul(&q.add(&r).unwrap()).unwrap();
        let dist_r = p.mul(&q).unwrap().add(&p.mul(&r).unwrap()).unwrap();
        let assoc_l = p.mul(&q).unwrap().mul(&r).unwrap();
        let assoc_r = p.mul(&q.mul(&r).unwrap()).unwrap();
        for z in &zs {
            prop_assert!(close(dist_l.eval(z), dist_r.eval(z), 1e-10));
            prop_assert!(close(assoc_l.eval(z), assoc_r.eval(z), 1e-10));
        }
    }

    #[test]
    fn stored_terms_respect_invariants(a in poly(3, 4), b in poly(3, 4)) {
        let p = build(3, &a).mul(&build(3, &b)).unwrap().sub(&build(3, &a)).unwrap();
        let mut max_deg = 0;
        for (m, c) in p.terms() {
            prop_assert!(c.abs() >= DEFAULT_DROP_TOL);
            prop_assert_eq!(m.exps().len(), 3);
            max_deg = max_deg.max(m.degree());
        }
        prop_assert_eq!(p.degree(), max_deg);
        prop_assert!(p.sub(&p).unwrap().is_zero());
        prop_assert!(p.add(&p.scale(-1.0)).unwrap().is_zero());
    }

    #[test]
    fn lie_derivative_matches_finite_differences(
        t in poly(3, 4),
        rows in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 4), 3),
        z in point(3),
    ) {
        let b = build(3, &t);
        let v = vars(3);
        // Linear field f_i = Σ_j a_ij x_j + c_i.
        let f: Vec<Polynomial> = rows
            .iter()
            .map(|r| {
                let mut p = Polynomial::constant(&v, r[3]);
                for j in 0..3 {
                    p = p.add(&Polynomial::var(&v, j).scale(r[j])).unwrap();
                }
                p
            })
            .collect();
        let lie = b.lie_derivative(&f).unwrap();
        let dir: Vec<f64> = f.iter().map(|fi| fi.eval(&z)).collect();
        let h = 1e-5;
        let shift = |s: f64| -> Vec<f64> { z.iter().zip(&dir).map(|(x, d)| x + s * d).collect() };
        let fd = (b.eval(&shift(h)) - b.eval(&shift(-h))) / (2.0 * h);
        prop_assert!((lie.eval(&z) - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{} vs {}", lie.eval(&z), fd);
    }

    #[test]
    fn lie_derivative_is_linear(t1 in poly(2, 4), t2 in poly(2, 4), fa in poly(2, 2), fb in poly(2, 2), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let (b1, b2) = (build(2, &t1), build(2, &t2));
        let f = vec![build(2, &fa), build(2, &fb)];
        let combo = b1.scale(a).add(&b2.scale(b)).unwrap().lie_derivative(&f).unwrap();
        let split = b1.lie_derivative(&f).unwrap().scale(a).add(&b2.lie_derivative(&f).unwrap().scale(b)).unwrap();
        let diff = combo.sub(&split).unwrap();
        prop_assert!(diff.terms().all(|(_, c)| c.abs() <= 1e-12 * (1.0 + combo.max_abs_coeff())));
    }

    #[test]
    fn rescaling_preserves_values_and_round_trips(
        t in poly(3, 6),
        center in prop::collection::vec(-2.0..2.0f64, 3),
        half in prop::collection::vec(0.2..3.0f64, 3),
        x in point(3),
    ) {
        let p = build(3, &t);
        let s = Scaling::new(center, half).unwrap();
        let scaled = rescale(&p, &s).unwrap();
        prop_assert!(close(scaled.eval(&s.to_scaled(&x)), p.eval(&x), 1e-10));
        let back = unscale(&scaled, &s).unwrap();
        let err = back.sub(&p).unwrap().max_abs_coeff();
        prop_assert!(err < 1e-9 * (1.0 + p.max_abs_coeff()), "round-trip error {err}");
    }

    #[test]
    fn json_round_trip_is_exact(t in poly(3, 4)) {
        let p = build(3, &t);
        let back: Polynomial = serde_json::from_value(p.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), p.to_json());
    }
}

#[test]
fn json_layout() {
    let p = Polynomial::from_terms(&vars(2), [(vec![2, 0], 1.5), (vec![0, 1], -1.0)]).unwrap();
    let j = p.to_json();
    assert_eq!(j["variables"], serde_json::json!(["x0", "x1"]));
    let terms = j["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 2);
    assert!(terms.iter().all(|t| t["exps"].is_array() && t["coeff"].is_number()));
}

#[test]
fn identity_scaling_keeps_coefficients() {
    let p = Polynomial::from_terms(&vars(2), [(vec![1, 1], 0.25), (vec![3, 0], -4.0)]).unwrap();
    let q = rescale(&p, &Scaling::identity(2)).unwrap();
    assert_eq!(q.to_json(), p.to_json());
    let x = Polynomial::var(&vars(1), 0);
    let s = Scaling::new(vec![0.0], vec![2.0]).unwrap();
    assert_eq!(rescale(&x, &s).unwrap().to_json(), x.scale(2.0).to_json());
}

#[test]
fn zero_polynomial_evaluates_to_zero() {
    let z = Polynomial::zero(&vars(3));
    assert_eq!(z.evaluate(&[0.3, -7.0, 2.0]).unwrap(), 0.0);
    assert_eq!(z.degree(), 0);
    assert!(z.evaluate(&[1.0]).is_err());
}
