use nalgebra::DVector;
use rayon::prelude::*;

use super::{BlockKind, Residuals, SdpError, SdpProblem, SdpSolution, SdpStatus};
use crate::linalg::{Mat, Vector};

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Log per-iteration progress at debug level.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
            trace: false,
        }
    }
}

pub fn solve(prob: &SdpProblem, tol: f64) -> Result<SdpSolution, SdpError> {
    solve_with(
        prob,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

type Entries = Vec<(usize, usize, f64)>;

/// Problem re-expressed over internal dense blocks (diagonal blocks are
/// split into 1×1 blocks) with rows and objective rescaled.
struct Internal {
    sizes: Vec<usize>,
    /// Map from original block to (first internal block, is_diag).
    origin: Vec<(usize, bool)>,
    /// Per internal block: constraints with nonzero data in that block.
    bcons: Vec<Vec<(usize, Entries)>>,
    c: Vec<Entries>,
    b: Vec<f64>,
    af: Vec<Vec<(usize, f64)>>,
    cf: Vec<f64>,
    m: usize,
    nf: usize,
    row_scale: Vec<f64>,
    obj_scale: f64,
    comps: Vec<Vec<usize>>,
    comp_of: Vec<usize>,
    local: Vec<usize>,
}

impl Internal {
    fn build(prob: &SdpProblem) -> Internal {
        let mut sizes = Vec::new();
        let mut origin = Vec::new();
        for kind in &prob.blocks {
            match *kind {
                BlockKind::Psd(n) => {
                    origin.push((sizes.len(), false));
                    sizes.push(n);
                }
                BlockKind::Diag(n) => {
                    origin.push((sizes.len(), true));
                    sizes.extend(std::iter::repeat(1).take(n));
                }
            }
        }
        let nb = sizes.len();
        let m = prob.constraints.len();
        let nf = prob.free_vars;

        let map_entries = |blocks: &[(usize, super::SparseSym)]| -> Vec<(usize, Entries)> {
            let mut per: std::collections::BTreeMap<usize, Entries> = Default::default();
            for (ob, s) in blocks {
                let (first, diag) = origin[*ob];
                for &(i, j, v) in &s.entries {
                    if diag {
                        per.entry(first + i).or_default().push((0, 0, v));
                    } else {
                        per.entry(first).or_default().push((i, j, v));
                    }
                }
            }
            per.into_iter()
                .map(|(k, mut e)| {
                    e.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
                    let mut merged: Entries = Vec::with_capacity(e.len());
                    for (i, j, v) in e {
                        match merged.last_mut() {
                            Some(l) if l.0 == i && l.1 == j => l.2 += v,
                            _ => merged.push((i, j, v)),
                        }
                    }
                    merged.retain(|t| t.2 != 0.0);
                    (k, merged)
                })
                .filter(|(_, e)| !e.is_empty())
                .collect()
        };

        let mut row_scale = vec![1.0; m];
        let mut bcons: Vec<Vec<(usize, Entries)>> = vec![Vec::new(); nb];
        let mut af = vec![Vec::new(); m];
        let mut b = vec![0.0; m];
        for (i, con) in prob.constraints.iter().enumerate() {
            let mapped = map_entries(&con.blocks);
            let mut nrm2: f64 = con.free.iter().map(|(_, v)| v * v).sum();
            for (_, e) in &mapped {
                nrm2 += e
                    .iter()
                    .map(|&(p, q, v)| if p == q { v * v } else { 2.0 * v * v })
                    .sum::<f64>();
            }
            let s = nrm2.sqrt().max(1e-12);
            row_scale[i] = s;
            for (k, e) in mapped {
                bcons[k].push((i, e.into_iter().map(|(p, q, v)| (p, q, v / s)).collect()));
            }
            let mut free: Vec<(usize, f64)> = con.free.iter().map(|&(k, v)| (k, v / s)).collect();
            free.sort_by_key(|e| e.0);
            af[i] = free;
            b[i] = con.rhs / s;
        }

        let obj = map_entries(&prob.objective.blocks);
        let mut cf = vec![0.0; nf];
        for &(k, v) in &prob.objective.free {
            cf[k] += v;
        }
        let mut onrm2: f64 = cf.iter().map(|v| v * v).sum();
        for (_, e) in &obj {
            onrm2 += e
                .iter()
                .map(|&(p, q, v)| if p == q { v * v } else { 2.0 * v * v })
                .sum::<f64>();
        }
        let obj_scale = if onrm2 > 0.0 { onrm2.sqrt() } else { 1.0 };
        let mut c = vec![Entries::new(); nb];
        for (k, e) in obj {
            c[k] = e.into_iter().map(|(p, q, v)| (p, q, v / obj_scale)).collect();
        }
        for v in &mut cf {
            *v /= obj_scale;
        }

        // Constraints that share an internal block couple in the Schur
        // complement; everything else is block diagonal.
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for cons in &bcons {
            if let Some((first, _)) = cons.first() {
                let r0 = find(&mut parent, *first);
                for (i, _) in cons.iter().skip(1) {
                    let ri = find(&mut parent, *i);
                    if ri != r0 {
                        let (lo, hi) = if ri < r0 { (ri, r0) } else { (r0, ri) };
                        parent[hi] = lo;
                    }
                }
            }
        }
        let mut comp_id = vec![usize::MAX; m];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut comp_of = vec![0; m];
        let mut local = vec![0; m];
        for i in 0..m {
            let r = find(&mut parent, i);
            if comp_id[r] == usize::MAX {
                comp_id[r] = comps.len();
                comps.push(Vec::new());
            }
            let c = comp_id[r];
            comp_of[i] = c;
            local[i] = comps[c].len();
            comps[c].push(i);
        }

        Internal {
            sizes,
            origin,
            bcons,
            c,
            b,
            af,
            cf,
            m,
            nf,
            row_scale,
            obj_scale,
            comps,
            comp_of,
            local,
        }
    }

    fn a_op(&self, x: &[Mat]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (k, cons) in self.bcons.iter().enumerate() {
            for (i, e) in cons {
                out[*i] += inner_entries(e, &x[k]);
            }
        }
        out
    }

    fn af_op(&self, u: &[f64]) -> Vec<f64> {
        self.af
            .iter()
            .map(|row| row.iter().map(|&(k, v)| v * u[k]).sum())
            .collect()
    }

    fn aft_op(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nf];
        for (i, row) in self.af.iter().enumerate() {
            for &(k, v) in row {
                out[k] += v * y[i];
            }
        }
        out
    }

    fn at_op(&self, y: &[f64]) -> Vec<Mat> {
        self.bcons
            .iter()
            .zip(&self.sizes)
            .map(|(cons, &n)| {
                let mut m = Mat::zeros(n, n);
                for (i, e) in cons {
                    add_entries(e, &mut m, y[*i]);
                }
                m
            })
            .collect()
    }

    fn c_dense(&self) -> Vec<Mat> {
        self.c
            .iter()
            .zip(&self.sizes)
            .map(|(e, &n)| {
                let mut m = Mat::zeros(n, n);
                add_entries(e, &mut m, 1.0);
                m
            })
            .collect()
    }

    fn n_total(&self) -> usize {
        self.sizes.iter().sum()
    }
}

fn inner_entries(e: &Entries, x: &Mat) -> f64 {
    e.iter()
        .map(|&(i, j, v)| if i == j { v * x[(i, i)] } else { 2.0 * v * x[(i, j)] })
        .sum()
}

fn add_entries(e: &Entries, m: &mut Mat, s: f64) {
    for &(i, j, v) in e {
        m[(i, j)] += s * v;
        if i != j {
            m[(j, i)] += s * v;
        }
    }
}

fn dot_blocks(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm_blocks(a: &[Mat]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn symmetrize(m: &mut Mat) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Nesterov-Todd scaling of one block: `W = G Gᵀ`, `G⁻¹ X G⁻ᵀ = Gᵀ Z G = Λ`.
struct Scaling {
    g: Mat,
    ginv: Mat,
    w: Mat,
    lam: Vector,
    lx: Mat,
    lz: Mat,
}

fn nt_scaling(x: &Mat, z: &Mat) -> Option<Scaling> {
    let n = x.nrows();
    if n == 1 {
        let (xv, zv) = (x[(0, 0)], z[(0, 0)]);
        if !(xv > 0.0 && zv > 0.0) {
            return None;
        }
        let g = (xv / zv).sqrt().sqrt();
        return Some(Scaling {
            g: Mat::from_element(1, 1, g),
            ginv: Mat::from_element(1, 1, 1.0 / g),
            w: Mat::from_element(1, 1, g * g),
            lam: Vector::from_element(1, (xv * zv).sqrt()),
            lx: Mat::from_element(1, 1, xv.sqrt()),
            lz: Mat::from_element(1, 1, zv.sqrt()),
        });
    }
    let lx = x.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let prod = lz.transpose() * &lx;
    let svd = prod.svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let s = svd.singular_values;
    if s.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let s_isqrt = s.map(|v| 1.0 / v.sqrt());
    let mut g = &lx * vt.transpose();
    for j in 0..n {
        let f = s_isqrt[j];
        g.column_mut(j).scale_mut(f);
    }
    let mut ginv = u.transpose() * lz.transpose();
    for i in 0..n {
        let f = s_isqrt[i];
        ginv.row_mut(i).scale_mut(f);
    }
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(Scaling {
        g,
        ginv,
        w,
        lam: s,
        lx,
        lz,
    })
}

/// Largest step `α ≤ 1` keeping `L Lᵀ + α D` positive definite, damped by `gamma`.
fn step_length(l: &Mat, d: &Mat, gamma: f64) -> f64 {
    let n = l.nrows();
    let lmin = if n == 1 {
        d[(0, 0)] / (l[(0, 0)] * l[(0, 0)])
    } else {
        let Some(q) = l.solve_lower_triangular(d) else {
            return 0.0;
        };
        let Some(mut r) = l.solve_lower_triangular(&q.transpose()) else {
            return 0.0;
        };
        symmetrize(&mut r);
        r.symmetric_eigen().eigenvalues.min()
    };
    if lmin >= 0.0 {
        1.0
    } else {
        (gamma / -lmin).min(1.0)
    }
}

/// Rows of the Schur complement contributed by one internal block.
fn schur_block_rows(w: &Mat, cons: &[(usize, Entries)]) -> Vec<Vec<f64>> {
    let n = w.nrows();
    if n == 1 {
        let wv = w[(0, 0)];
        let a: Vec<f64> = cons.iter().map(|(_, e)| e.iter().map(|t| t.2).sum()).collect();
        return a
            .iter()
            .map(|&ai| a.iter().map(|&aj| ai * aj * wv * wv).collect())
            .collect();
    }
    cons.par_iter()
        .map(|(_, ei)| {
            let mut rows: Vec<usize> = Vec::with_capacity(2 * ei.len());
            for &(p, q, _) in ei {
                rows.push(p);
                rows.push(q);
            }
            rows.sort_unstable();
            rows.dedup();
            let pos = |r: usize| rows.binary_search(&r).expect("row present");
            let mut u = Mat::zeros(rows.len(), n);
            for &(p, q, v) in ei {
                let ip = pos(p);
                for c in 0..n {
                    u[(ip, c)] += v * w[(q, c)];
                }
                if p != q {
                    let iq = pos(q);
                    for c in 0..n {
                        u[(iq, c)] += v * w[(p, c)];
                    }
                }
            }
            let wr = w.select_columns(rows.iter());
            let v = wr * u;
            cons.iter().map(|(_, ej)| inner_entries(ej, &v)).collect()
        })
        .collect()
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(m: Mat) -> Option<Factor> {
        let maxd = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        if let Some(c) = m.clone().cholesky() {
            return Some(Factor::Chol(c));
        }
        let mut reg = 1e-14 * maxd;
        for _ in 0..6 {
            let mut mm = m.clone();
            for i in 0..mm.nrows() {
                mm[(i, i)] += reg;
            }
            if let Some(c) = mm.cholesky() {
                return Some(Factor::Chol(c));
            }
            reg *= 100.0;
        }
        let lu = m.lu();
        if lu.is_invertible() {
            Some(Factor::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, b: &Mat) -> Option<Mat> {
        match self {
            Factor::Chol(c) => Some(c.solve(b)),
            Factor::Lu(l) => l.solve(b),
        }
    }
}

/// Factorization of the reduced Newton system for one iteration.
struct Newton {
    comp_mats: Vec<Mat>,
    comp_factors: Vec<Factor>,
    /// Per component: `M_c⁻¹ A_f,c` (rows of that component × free vars).
    minv_af: Vec<Mat>,
    free_factor: Option<Factor>,
}

fn build_newton(int: &Internal, sc: &[Scaling]) -> Option<Newton> {
    let mut mats: Vec<Mat> = int.comps.iter().map(|c| Mat::zeros(c.len(), c.len())).collect();
    for (k, cons) in int.bcons.iter().enumerate() {
        if cons.is_empty() {
            continue;
        }
        let rows = schur_block_rows(&sc[k].w, cons);
        let comp = int.comp_of[cons[0].0];
        let mm = &mut mats[comp];
        for (ri, (i, _)) in cons.iter().enumerate() {
            let li = int.local[*i];
            for (rj, (j, _)) in cons.iter().enumerate() {
                mm[(li, int.local[*j])] += rows[ri][rj];
            }
        }
    }
    let mut comp_factors = Vec::with_capacity(mats.len());
    for mm in &mut mats {
        symmetrize(mm);
        comp_factors.push(Factor::new(mm.clone())?);
    }
    let mut minv_af = Vec::new();
    let mut free_factor = None;
    if int.nf > 0 {
        let mut s = Mat::zeros(int.nf, int.nf);
        for (c, members) in int.comps.iter().enumerate() {
            let mut afc = Mat::zeros(members.len(), int.nf);
            for (li, &i) in members.iter().enumerate() {
                for &(k, v) in &int.af[i] {
                    afc[(li, k)] += v;
                }
            }
            let sol = comp_factors[c].solve(&afc)?;
            s += afc.transpose() * &sol;
            minv_af.push(sol);
        }
        symmetrize(&mut s);
        free_factor = Some(Factor::new(s)?);
    }
    Some(Newton {
        comp_mats: mats,
        comp_factors,
        minv_af,
        free_factor,
    })
}

/// Residuals of the reduced Newton system at `(dy, du)`.
fn newton_residual(int: &Internal, nw: &Newton, h: &[f64], rf: &[f64], dy: &[f64], du: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut r1 = h.to_vec();
    for (c, members) in int.comps.iter().enumerate() {
        let yc = Mat::from_iterator(members.len(), 1, members.iter().map(|&i| dy[i]));
        let my = &nw.comp_mats[c] * yc;
        for (li, &i) in members.iter().enumerate() {
            r1[i] -= my[(li, 0)];
        }
    }
    let afu = int.af_op(du);
    for i in 0..int.m {
        r1[i] -= afu[i];
    }
    let afty = int.aft_op(dy);
    let r2 = (0..int.nf).map(|k| rf[k] - afty[k]).collect();
    (r1, r2)
}

/// Nested solve followed by iterative refinement, which matters once the
/// free-variable Schur complement becomes ill-conditioned.
fn solve_refined(int: &Internal, nw: &Newton, h: &[f64], rf: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let (mut dy, mut du) = solve_newton(int, nw, h, rf)?;
    if int.nf == 0 {
        return Some((dy, du));
    }
    let scale = norm(h).max(norm(rf)).max(1e-300);
    let mut res = {
        let (r1, r2) = newton_residual(int, nw, h, rf, &dy, &du);
        norm(&r1).max(norm(&r2))
    };
    for _ in 0..REFINE_STEPS {
        if res <= 1e-14 * scale {
            break;
        }
        let (r1, r2) = newton_residual(int, nw, h, rf, &dy, &du);
        let Some((cy, cu)) = solve_newton(int, nw, &r1, &r2) else {
            break;
        };
        let ty: Vec<f64> = dy.iter().zip(&cy).map(|(a, b)| a + b).collect();
        let tu: Vec<f64> = du.iter().zip(&cu).map(|(a, b)| a + b).collect();
        let (n1, n2) = newton_residual(int, nw, h, rf, &ty, &tu);
        let new_res = norm(&n1).max(norm(&n2));
        if !(new_res < res) {
            break;
        }
        dy = ty;
        du = tu;
        res = new_res;
    }
    Some((dy, du))
}

const REFINE_STEPS: usize = 3;

/// Solves `M Δy + A_f Δu = h`, `A_fᵀ Δy = rf`.
fn solve_newton(int: &Internal, nw: &Newton, h: &[f64], rf: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let hs: Vec<Mat> = int
        .comps
        .iter()
        .map(|members| Mat::from_iterator(members.len(), 1, members.iter().map(|&i| h[i])))
        .collect();
    let mut minv_h: Vec<Mat> = Vec::with_capacity(int.comps.len());
    for (c, hc) in hs.iter().enumerate() {
        minv_h.push(nw.comp_factors[c].solve(hc)?);
    }
    let mut du = vec![0.0; int.nf];
    if let Some(ff) = &nw.free_factor {
        let mut rhs = Mat::zeros(int.nf, 1);
        for (c, hc) in hs.iter().enumerate() {
            rhs += nw.minv_af[c].transpose() * hc;
        }
        for k in 0..int.nf {
            rhs[(k, 0)] -= rf[k];
        }
        let sol = ff.solve(&rhs)?;
        for k in 0..int.nf {
            du[k] = sol[(k, 0)];
        }
    }
    let mut dy = vec![0.0; int.m];
    let du_m = Mat::from_column_slice(int.nf, 1, &du);
    for (c, members) in int.comps.iter().enumerate() {
        let mut yc = minv_h[c].clone();
        if int.nf > 0 {
            yc -= &nw.minv_af[c] * &du_m;
        }
        for (li, &i) in members.iter().enumerate() {
            dy[i] = yc[(li, 0)];
        }
    }
    Some((dy, du))
}

struct Direction {
    dx: Vec<Mat>,
    dz: Vec<Mat>,
    dy: Vec<f64>,
    du: Vec<f64>,
}

fn direction(
    int: &Internal,
    nw: &Newton,
    sc: &[Scaling],
    rc: &[Mat],
    rp: &[f64],
    rd: &[Mat],
    rf: &[f64],
) -> Option<Direction> {
    let wrdw: Vec<Mat> = sc.iter().zip(rd).map(|(s, r)| &s.w * r * &s.w).collect();
    let a_rc = int.a_op(rc);
    let a_wrdw = int.a_op(&wrdw);
    let h: Vec<f64> = (0..int.m).map(|i| rp[i] - a_rc[i] + a_wrdw[i]).collect();
    let (mut dy, mut du) = solve_refined(int, nw, &h, rf)?;
    let at_dy = int.at_op(&dy);
    let mut dz = Vec::with_capacity(sc.len());
    let mut dx = Vec::with_capacity(sc.len());
    for k in 0..sc.len() {
        let mut z = &rd[k] - &at_dy[k];
        symmetrize(&mut z);
        let mut x = &rc[k] - &sc[k].w * &z * &sc[k].w;
        symmetrize(&mut x);
        dz.push(z);
        dx.push(x);
    }
    // Refine against the exact operators: only the primal equation carries
    // the error of the Schur solve.
    let primal_err = |dx: &[Mat], du: &[f64]| -> Vec<f64> {
        let adx = int.a_op(dx);
        let afu = int.af_op(du);
        (0..int.m).map(|i| rp[i] - adx[i] - afu[i]).collect()
    };
    let mut err = primal_err(&dx, &du);
    let mut err_norm = norm(&err);
    let zero_f = vec![0.0; int.nf];
    for _ in 0..REFINE_STEPS {
        if err_norm <= 1e-15 * (1.0 + norm(rp)) {
            break;
        }
        let Some((cy, cu)) = solve_refined(int, nw, &err, &zero_f) else {
            break;
        };
        let at_cy = int.at_op(&cy);
        let tx: Vec<Mat> = (0..sc.len())
            .map(|k| {
                let mut x = &dx[k] + &sc[k].w * &at_cy[k] * &sc[k].w;
                symmetrize(&mut x);
                x
            })
            .collect();
        let tu: Vec<f64> = du.iter().zip(&cu).map(|(a, b)| a + b).collect();
        let terr = primal_err(&tx, &tu);
        let tn = norm(&terr);
        if !(tn < 0.5 * err_norm) {
            break;
        }
        for k in 0..sc.len() {
            dz[k] -= &at_cy[k];
        }
        dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
        dx = tx;
        du = tu;
        err = terr;
        err_norm = tn;
    }
    if dx.iter().chain(&dz).any(|m| m.iter().any(|v| !v.is_finite())) {
        return None;
    }
    Some(Direction { dx, dz, dy, du })
}

fn steps(sc: &[Scaling], d: &Direction, gamma: f64) -> (f64, f64) {
    let ap = sc
        .iter()
        .zip(&d.dx)
        .map(|(s, dx)| step_length(&s.lx, dx, gamma))
        .fold(1.0f64, f64::min);
    let ad = sc
        .iter()
        .zip(&d.dz)
        .map(|(s, dz)| step_length(&s.lz, dz, gamma))
        .fold(1.0f64, f64::min);
    (ap, ad)
}

struct Iterate {
    x: Vec<Mat>,
    z: Vec<Mat>,
    y: Vec<f64>,
    u: Vec<f64>,
}

struct Metrics {
    relp: f64,
    reld: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
    mu: f64,
}

fn metrics(int: &Internal, it: &Iterate, cmat: &[Mat], bn: f64, cn: f64) -> (Metrics, Vec<f64>, Vec<Mat>, Vec<f64>) {
    let ax = int.a_op(&it.x);
    let afu = int.af_op(&it.u);
    let rp: Vec<f64> = (0..int.m).map(|i| int.b[i] - ax[i] - afu[i]).collect();
    let aty = int.at_op(&it.y);
    let rd: Vec<Mat> = (0..cmat.len()).map(|k| &cmat[k] - &aty[k] - &it.z[k]).collect();
    let afty = int.aft_op(&it.y);
    let rf: Vec<f64> = (0..int.nf).map(|k| int.cf[k] - afty[k]).collect();
    let pobj = dot_blocks(cmat, &it.x) + int.cf.iter().zip(&it.u).map(|(a, b)| a * b).sum::<f64>();
    let dobj: f64 = int.b.iter().zip(&it.y).map(|(a, b)| a * b).sum();
    let n = int.n_total() as f64;
    let mu = dot_blocks(&it.x, &it.z) / n;
    let relp = norm(&rp) / (1.0 + bn);
    let reld = (norm_blocks(&rd).powi(2) + norm(&rf).powi(2)).sqrt() / (1.0 + cn);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    (
        Metrics {
            relp,
            reld,
            gap,
            pobj,
            dobj,
            mu,
        },
        rp,
        rd,
        rf,
    )
}

pub fn solve_with(prob: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    if !(1e-10..=1e-4).contains(&opts.tol) {
        return Err(SdpError::Tolerance(opts.tol));
    }
    prob.validate()?;
    let int = Internal::build(prob);
    let tol = opts.tol;
    let cmat = int.c_dense();
    let bn = norm(&int.b);
    let cn = (norm_blocks(&cmat).powi(2) + norm(&int.cf).powi(2)).sqrt();

    // Infeasible identity start scaled by problem norms.
    let mut amax: f64 = 0.0;
    let mut xi: f64 = 10.0;
    for k in 0..int.sizes.len() {
        let n = int.sizes[k] as f64;
        xi = xi.max(n.sqrt());
        for (i, e) in &int.bcons[k] {
            let fro: f64 = e
                .iter()
                .map(|&(p, q, v)| if p == q { v * v } else { 2.0 * v * v })
                .sum::<f64>()
                .sqrt();
            amax = amax.max(fro);
            xi = xi.max(n * (1.0 + int.b[*i].abs()) / (1.0 + fro));
        }
    }
    let eta = 10.0f64
        .max(int.sizes.iter().map(|&n| (n as f64).sqrt()).fold(0.0, f64::max))
        .max(amax)
        .max(cmat.iter().map(|c| c.norm()).fold(0.0, f64::max));
    let mut it = Iterate {
        x: int.sizes.iter().map(|&n| Mat::identity(n, n) * xi).collect(),
        z: int.sizes.iter().map(|&n| Mat::identity(n, n) * eta).collect(),
        y: vec![0.0; int.m],
        u: vec![0.0; int.nf],
    };

    let pure_feasibility = int.cf.iter().all(|v| *v == 0.0) && int.c.iter().all(|e| e.is_empty());
    let mut status = SdpStatus::NumericalFailure;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;
    let mut best: Option<(f64, Iterate)> = None;
    let mut small_steps = 0;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let (mt, rp, rd, rf) = metrics(&int, &it, &cmat, bn, cn);
        if opts.trace {
            log::debug!(
                "sdp it {iter:3} pobj {:+.6e} dobj {:+.6e} relp {:.2e} reld {:.2e} gap {:.2e} mu {:.2e}",
                mt.pobj,
                mt.dobj,
                mt.relp,
                mt.reld,
                mt.gap,
                mt.mu
            );
            log::trace!("  |rd| {:.2e} |rf| {:.2e}", norm_blocks(&rd), norm(&rf));
        }
        if !(mt.relp.is_finite() && mt.reld.is_finite() && mt.mu.is_finite()) {
            message = "non-finite iterate".into();
            break;
        }
        if mt.relp <= tol && mt.reld <= tol && mt.gap <= tol {
            status = SdpStatus::Optimal;
            message = "converged".into();
            break;
        }
        // With a zero objective any primal-feasible X is optimal with y = 0, Z = 0.
        if pure_feasibility && mt.relp <= tol {
            it.y.iter_mut().for_each(|v| *v = 0.0);
            it.z.iter_mut().for_each(|z| z.fill(0.0));
            status = SdpStatus::Optimal;
            message = "feasible point found".into();
            break;
        }
        let score = mt.relp.max(mt.reld).max(mt.gap);
        if mt.relp <= tol && best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((
                score,
                Iterate {
                    x: it.x.clone(),
                    z: it.z.clone(),
                    y: it.y.clone(),
                    u: it.u.clone(),
                },
            ));
        }
        // Primal infeasibility: y with bᵀy > 0, −Aᵀy ⪰ 0, A_fᵀ y = 0.
        if mt.dobj > 0.0 && mt.relp > tol {
            let aty_z: f64 = (norm_blocks(&cmat.iter().zip(&rd).map(|(c, r)| c - r).collect::<Vec<_>>()))
                .max(norm(&int.aft_op(&it.y)));
            if aty_z / mt.dobj < tol {
                status = SdpStatus::Infeasible;
                message = format!(
                    "primal infeasible: normalized dual ray residual {:.2e}",
                    aty_z / mt.dobj
                );
                break;
            }
        }
        // Dual infeasibility: X, u with A(X) + A_f u = 0 and negative cost.
        if mt.pobj < 0.0 && mt.reld > tol {
            let resid: Vec<f64> = (0..int.m).map(|i| int.b[i] - rp[i]).collect();
            if norm(&resid) / -mt.pobj < tol {
                status = SdpStatus::Infeasible;
                message = format!(
                    "dual infeasible (primal unbounded): ray residual {:.2e}",
                    norm(&resid) / -mt.pobj
                );
                break;
            }
        }
        if iter == opts.max_iter {
            break;
        }

        let Some(sc) =
            it.x.iter()
                .zip(&it.z)
                .map(|(x, z)| nt_scaling(x, z))
                .collect::<Option<Vec<_>>>()
        else {
            message = "lost positive definiteness".into();
            break;
        };
        let Some(nw) = build_newton(&int, &sc) else {
            message = "singular Schur complement".into();
            break;
        };

        // Predictor.
        let rc_aff: Vec<Mat> = it.x.iter().map(|x| -x).collect();
        let Some(aff) = direction(&int, &nw, &sc, &rc_aff, &rp, &rd, &rf) else {
            message = "predictor direction failed".into();
            break;
        };
        let (ap_a, ad_a) = steps(&sc, &aff, 1.0);
        let n = int.n_total() as f64;
        let mut mu_aff = 0.0;
        for k in 0..sc.len() {
            let xa = &it.x[k] + &aff.dx[k] * ap_a;
            let za = &it.z[k] + &aff.dz[k] * ad_a;
            mu_aff += xa.dot(&za);
        }
        mu_aff /= n;
        let ratio = (mu_aff / mt.mu).clamp(0.0, 1.0);
        let expon = if mt.mu > 1e-6 {
            1.0f64.max(3.0 * ap_a.min(ad_a).powi(2))
        } else {
            3.0
        };
        let sigma = ratio.powf(expon).min(1.0);

        // Corrector.
        let mut rc = Vec::with_capacity(sc.len());
        for k in 0..sc.len() {
            let s = &sc[k];
            let dxt = &s.ginv * &aff.dx[k] * s.ginv.transpose();
            let dzt = s.g.transpose() * &aff.dz[k] * &s.g;
            let prod = &dxt * &dzt;
            let nk = s.lam.len();
            let mut smat = Mat::zeros(nk, nk);
            for i in 0..nk {
                for j in 0..nk {
                    let mut t = -0.5 * (prod[(i, j)] + prod[(j, i)]);
                    if i == j {
                        t += sigma * mt.mu - s.lam[i] * s.lam[i];
                    }
                    smat[(i, j)] = 2.0 * t / (s.lam[i] + s.lam[j]);
                }
            }
            let mut r = &s.g * smat * s.g.transpose();
            symmetrize(&mut r);
            rc.push(r);
        }
        let Some(dir) = direction(&int, &nw, &sc, &rc, &rp, &rd, &rf) else {
            message = "corrector direction failed".into();
            break;
        };
        let gamma = 0.9 + 0.09 * ap_a.min(ad_a);
        let (ap, ad) = steps(&sc, &dir, gamma);
        if opts.trace {
            log::trace!("  sigma {sigma:.2e} affine {ap_a:.3} {ad_a:.3} steps {ap:.3} {ad:.3}");
        }
        if ap.min(ad) < 1e-8 {
            small_steps += 1;
            if small_steps >= 3 {
                message = "step length stalled".into();
                break;
            }
        } else {
            small_steps = 0;
        }
        for k in 0..sc.len() {
            it.x[k] += &dir.dx[k] * ap;
            it.z[k] += &dir.dz[k] * ad;
            symmetrize(&mut it.x[k]);
            symmetrize(&mut it.z[k]);
        }
        for i in 0..int.m {
            it.y[i] += ad * dir.dy[i];
        }
        for k in 0..int.nf {
            it.u[k] += ap * dir.du[k];
        }
    }

    if status == SdpStatus::NumericalFailure {
        if let Some((_, b)) = best {
            it = b;
            status = SdpStatus::Feasible;
            message = format!("{message}; returning best primal-feasible iterate");
        }
    }
    Ok(unscale(prob, &int, it, status, message, iterations))
}

fn unscale(
    prob: &SdpProblem,
    int: &Internal,
    it: Iterate,
    status: SdpStatus,
    message: String,
    iterations: usize,
) -> SdpSolution {
    let mut xs = Vec::with_capacity(prob.blocks.len());
    let mut zs = Vec::with_capacity(prob.blocks.len());
    for (ob, kind) in prob.blocks.iter().enumerate() {
        let (first, diag) = int.origin[ob];
        if diag {
            let n = kind.dim();
            xs.push(Mat::from_diagonal(&DVector::from_fn(n, |i, _| it.x[first + i][(0, 0)])));
            zs.push(Mat::from_diagonal(&DVector::from_fn(n, |i, _| {
                it.z[first + i][(0, 0)] * int.obj_scale
            })));
        } else {
            xs.push(it.x[first].clone());
            zs.push(&it.z[first] * int.obj_scale);
        }
    }
    let y: Vec<f64> =
        it.y.iter()
            .zip(&int.row_scale)
            .map(|(v, s)| v * int.obj_scale / s)
            .collect();
    let mut sol = SdpSolution {
        status,
        message,
        x: xs,
        free: it.u,
        y,
        z: zs,
        residuals: Residuals::default(),
        iterations,
    };
    sol.residuals = super::verify::residuals(prob, &sol);
    log::trace!(
        "unscaled residuals {:?}; |y| {:.2e} |Z| {:.2e} obj_scale {:.2e}",
        sol.residuals,
        norm(&sol.y),
        norm_blocks(&sol.z),
        int.obj_scale
    );
    sol
}

#[cfg(test)]
mod tests {
    use super::super::{Constraint, LinearForm, SparseSym};
    use super::*;

    #[test]
    fn schur_rows_match_dense_formula() {
        let w = Mat::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let cons = vec![
            (0usize, vec![(0usize, 1usize, 1.0f64), (2, 2, 0.5)]),
            (1, vec![(1, 1, 2.0), (0, 2, -1.0)]),
        ];
        let rows = schur_block_rows(&w, &cons);
        for (i, (_, ei)) in cons.iter().enumerate() {
            let mut ai = Mat::zeros(3, 3);
            add_entries(ei, &mut ai, 1.0);
            for (j, (_, ej)) in cons.iter().enumerate() {
                let mut aj = Mat::zeros(3, 3);
                add_entries(ej, &mut aj, 1.0);
                let expect = (&aj).dot(&(&w * &ai * &w));
                assert!((rows[i][j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nt_scaling_identities() {
        let x = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let z = Mat::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 3.0]);
        let s = nt_scaling(&x, &z).unwrap();
        let xt = &s.ginv * &x * s.ginv.transpose();
        let zt = s.g.transpose() * &z * &s.g;
        for i in 0..2 {
            for j in 0..2 {
                let lam = if i == j { s.lam[i] } else { 0.0 };
                assert!((xt[(i, j)] - lam).abs() < 1e-10);
                assert!((zt[(i, j)] - lam).abs() < 1e-10);
            }
        }
        let wzw = &s.w * &z * &s.w;
        assert!((wzw - &x).norm() < 1e-10);
        let (x1, z1) = (Mat::from_element(1, 1, 0.3), Mat::from_element(1, 1, 5.0));
        let s = nt_scaling(&x1, &z1).unwrap();
        assert!(((&s.w * &z1 * &s.w)[(0, 0)] - 0.3).abs() < 1e-14);
        assert!((s.lam[0] - 1.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn trace_problem_optimum() {
        let mut p = SdpProblem::new(vec![BlockKind::Psd(2)], 0);
        p.add_constraint(Constraint {
            blocks: vec![(0, SparseSym::single(0, 1, 0.5))],
            free: vec![],
            rhs: 1.0,
        });
        let mut c = SparseSym::new();
        c.add(0, 0, 1.0);
        c.add(1, 1, 1.0);
        p.objective = LinearForm {
            blocks: vec![(0, c)],
            free: vec![],
        };
        let s = solve(&p, 1e-9).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal, "{}", s.message);
        assert!((s.residuals.primal_objective - 2.0).abs() < 1e-7);
    }
}
