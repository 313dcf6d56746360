//! Sweeps for the rotation, partial-trace, proportionality, kappa and
//! projection-product statements.

use nalgebra::DVector;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{fit_decay, rate_within, spearman_trend, Check, DecayReport, RATE_TOL};
use crate::linalg::{apply_left, apply_right, op_norm_fn, op_norm_real, CMat, Mat};
use crate::rep::ops::{partial_trace_x, rotate};
use crate::rep::tensor::TensorBackend;
use crate::rep::{fusion_channels, KappaReport, RepBackend};
use crate::scalar::{lit, to_f64, Real};

fn random_cmat<T: Real>(r: usize, c: usize, rng: &mut ChaCha8Rng) -> CMat<T> {
    CMat::from_fn(r, c, |_, _| Complex::new(lit(rng.random::<f64>() - 0.5), lit(rng.random::<f64>() - 0.5)))
}

fn cnorm<T: Real>(z: Complex<T>) -> f64 {
    to_f64(z.re).hypot(to_f64(z.im))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRow {
    pub k: usize,
    pub trials: usize,
    pub max_trace_error: f64,
    pub max_hs_excess: f64,
    pub identity_trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryRow {
    pub b: usize,
    /// `|Tr(P_{a+b+c} f_13)|` contracted directly.
    pub direct: f64,
    /// `d_b |Tr(x_{a,b,c} f)|`.
    pub via_partial_trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    pub rows: Vec<RotationRow>,
    pub corollary: Vec<CorollaryRow>,
    pub corollary_sup: f64,
    pub spearman: f64,
    pub checks: Vec<Check>,
}

/// Trace formula and HS contraction for `rho`, plus the trace-zero corollary.
pub fn trace_rotation_sweep<T: Real>(
    b: &dyn RepBackend<T>,
    k_max: usize,
    trials: usize,
    a: usize,
    c: usize,
    b_max: usize,
    seed: u64,
) -> Result<RotationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = b.params();
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let d = b.dim(k);
        let sign = if (k - 1) % 2 == 0 { T::one() } else { -T::one() };
        let dp = p.dim(k - 1);
        let (mut te, mut hs) = (0.0f64, f64::NEG_INFINITY);
        for _ in 0..trials {
            let f = random_cmat::<T>(d, d, &mut rng);
            let r = rotate(b, k, &f)?;
            let want = f.trace() * sign / dp;
            te = te.max(cnorm(r.trace() - want) / cnorm(want).max(1.0));
            hs = hs.max(to_f64(r.hs_norm() - f.hs_norm()));
        }
        let id = rotate(b, k, &CMat::identity(d))?.trace();
        rows.push(RotationRow { k, trials, max_trace_error: te, max_hs_excess: hs, identity_trace: to_f64(id.re) });
    }
    let dac = b.dim(a) * b.dim(c);
    let mut f = random_cmat::<T>(dac, dac, &mut rng);
    let tr = f.trace() / lit::<T>(dac as f64);
    f = f.sub(&CMat::identity(dac).scale(tr));
    let corollary = corollary_traces(b, a, c, b_max, &f)?;
    let vals: Vec<f64> = corollary.iter().map(|r| r.direct).collect();
    let sup = vals.iter().fold(0.0f64, |x, y| x.max(*y));
    let spearman = spearman_trend(&vals);
    let dk = p.dim(0);
    let mut checks = vec![];
    let te = rows.iter().fold(0.0f64, |x, r| x.max(r.max_trace_error));
    checks.push(Check::new("rotation trace formula", te <= 1e-9, format!("max error {te:.3e} (tol 1e-9)")));
    let hs = rows.iter().fold(f64::NEG_INFINITY, |x, r| x.max(r.max_hs_excess));
    checks.push(Check::new("rotation HS contraction", hs <= 1e-12, format!("max ||rho f|| - ||f|| = {hs:.3e}")));
    let id_ok = rows.iter().all(|r| {
        let s = if (r.k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let want = s * to_f64(p.dim(r.k) / p.dim(r.k - 1));
        (r.identity_trace - want).abs() <= 1e-9 * want.abs().max(1.0)
    });
    checks.push(Check::new("rotation of identity", id_ok && to_f64(dk) == 1.0, "Tr rho(id) = (-1)^(k-1) d_k/d_(k-1)".into()));
    let agree = corollary.iter().all(|r| (r.direct - r.via_partial_trace).abs() <= 1e-9 * r.direct.max(1e-3));
    checks.push(Check::new("corollary contraction agreement", agree, "direct vs partial-trace route".into()));
    checks.push(Check::new("corollary no growth", spearman <= 0.0, format!("Spearman trend {spearman:.4}, sup {sup:.4e}")));
    Ok(RotationReport { rows, corollary, corollary_sup: sup, spearman, checks })
}

/// `|Tr(P_{a+b+c} f_13)|` for `b <= b_max` along two contraction orders.
pub fn corollary_traces<T: Real>(
    b: &dyn RepBackend<T>,
    a: usize,
    c: usize,
    b_max: usize,
    f: &CMat<T>,
) -> Result<Vec<CorollaryRow>> {
    let (da, dc) = (b.dim(a), b.dim(c));
    let mut out = Vec::new();
    for bb in 0..=b_max {
        let db = b.dim(bb);
        let x = partial_trace_x(b, a, bb, c)?.matrix;
        let via = cnorm(x.mul(f).trace()) * db as f64;
        let u = apply_right(&*b.top(bb, c)?, &*b.top(a, bb + c)?, b.dim(bb + c));
        // Tr(U^T f_13 U) = sum_y sum_m <U_y[:,m], f U_y[:,m]>
        let mut acc = Complex::new(T::zero(), T::zero());
        for y in 0..db {
            let uy = Mat::from_fn(da * dc, u.ncols(), |r, col| u[(((r / dc) * db + y) * dc + r % dc, col)]);
            let fu = CMat { re: &f.re * &uy, im: &f.im * &uy };
            acc += Complex::new(fu.re.dot(&uy), fu.im.dot(&uy));
        }
        out.push(CorollaryRow { b: bb, direct: cnorm(acc), via_partial_trace: via });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTraceReport {
    pub a: usize,
    pub c: usize,
    pub lambda: f64,
    /// `||x_{a,b,c} - lambda id||` for `b = 0..=b_max`.
    pub deviations: Vec<f64>,
    /// Largest distance of `x_{a,b,c}` from a scalar, for each `b`.
    pub scalar_defects: Vec<f64>,
    pub fit: DecayReport,
    pub constant_previous: f64,
    pub checks: Vec<Check>,
}

/// Convergence of `x_{a,b,c}` to `lambda_{a,c} id` with `lambda = q^{-a-c}/(d_a d_c)`.
pub fn partial_trace_convergence<T: Real>(b: &dyn RepBackend<T>, a: usize, c: usize, b_max: usize) -> Result<PartialTraceReport> {
    if b_max < 2 {
        return Err(Error::Precondition("b_max must be at least 2".into()));
    }
    let p = b.params();
    let q = to_f64(p.q());
    let lambda = p.q().powi(-((a + c) as i32)) / (p.dim(a) * p.dim(c));
    let mut deviations = Vec::new();
    let mut scalar_defects = Vec::new();
    for bb in 0..=b_max {
        let x = partial_trace_x(b, a, bb, c)?.matrix.re;
        let n = x.nrows();
        let id = Mat::<T>::identity(n, n);
        deviations.push(to_f64(op_norm_real(&(&x - &id * lambda))));
        let s = x.trace() / lit::<T>(n as f64);
        scalar_defects.push(to_f64(op_norm_real(&(&x - id * s))));
    }
    let points: Vec<(f64, f64)> = (1..=b_max).map(|bb| (bb as f64, deviations[bb])).collect();
    let fit = fit_decay(&points, q);
    let prev = fit_decay(&points[..points.len() - 1], q).empirical_constant;
    let mut checks = vec![Check::new(
        "partial-trace decay rate",
        rate_within(fit.fitted_rate, q.ln(), RATE_TOL),
        format!("fitted {:?} vs log q {:.4} (rel tol {RATE_TOL})", fit.fitted_rate, q.ln()),
    )];
    let stable = fit.empirical_constant <= 2.0 * prev && prev <= 2.0 * fit.empirical_constant;
    checks.push(Check::new(
        "partial-trace constant stable",
        stable,
        format!("D = {:.6e} at b_max={b_max}, {:.6e} at b_max-1", fit.empirical_constant, prev),
    ));
    if c == 0 || a == 0 {
        let worst = scalar_defects.iter().fold(0.0f64, |x, y| x.max(*y));
        checks.push(Check::new("partial trace scalar when a or c is 0", worst <= 1e-10, format!("max defect {worst:.3e}")));
    }
    Ok(PartialTraceReport { a, c, lambda: to_f64(lambda), deviations, scalar_defects, fit, constant_previous: prev, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaReport {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub alpha: (f64, f64),
    pub residual: f64,
    pub alpha_second: (f64, f64),
    pub residual_second: f64,
    pub degenerate: bool,
}

/// `L = sum_j P_j B_j^T` over the leading leg `j` of both factors.
fn contract_leading<T: Real>(p: &Mat<T>, bm: &Mat<T>, dj: usize) -> Mat<T> {
    let (rp, rb) = (p.nrows() / dj, bm.nrows() / dj);
    let mut out = Mat::<T>::zeros(rp, rb);
    for j in 0..dj {
        out.gemm(T::one(), &p.rows(j * rp, rp), &bm.rows(j * rb, rb).transpose(), T::one());
    }
    out
}

/// Rows `(x, y)` reordered as `(y, x)`.
fn swap_legs<T: Real>(m: &Mat<T>, dx: usize, dy: usize) -> Mat<T> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| {
        let (y, x) = (r / dx, r % dx);
        m[(x * dy + y, c)]
    })
}

fn reshape<T: Real>(v: &DVector<T>, r: usize, c: usize) -> Mat<T> {
    Mat::from_fn(r, c, |i, j| v[i * c + j])
}

fn proportionality<T: Real>(l: &CMat<T>, r: &CMat<T>) -> ((f64, f64), f64, bool) {
    let rr = to_f64(r.norm_sq());
    let ll = to_f64(l.norm_sq());
    if rr == 0.0 || ll == 0.0 {
        return ((0.0, 0.0), 0.0, true);
    }
    let ip = CMat::tr_adj_mul(r, l);
    let alpha = Complex::new(to_f64(ip.re) / rr, to_f64(ip.im) / rr);
    let a_t = Complex::new(lit::<T>(alpha.re), lit::<T>(alpha.im));
    let res = to_f64(l.sub(&r.scale(a_t)).hs_norm()) / ll.sqrt();
    ((alpha.re, alpha.im), res, false)
}

/// Both sides of the two proportionality identities for `zeta in H_{p+q}`.
pub fn alpha_pq<T: Real>(b: &dyn RepBackend<T>, n: usize, p: usize, qq: usize, zeta: &[Complex<T>]) -> Result<AlphaReport> {
    if n < p + qq {
        return Err(Error::Precondition(format!("need n >= p + q, got n={n}, p={p}, q={qq}")));
    }
    if zeta.len() != b.dim(p + qq) {
        return Err(Error::Precondition(format!("zeta must lie in H_{}", p + qq)));
    }
    let (dp, dq, r) = (b.dim(p), b.dim(qq), n - p - qq);
    let dr = b.dim(r);
    let zr = DVector::from_iterator(zeta.len(), zeta.iter().map(|z| z.re));
    let zi = DVector::from_iterator(zeta.len(), zeta.iter().map(|z| z.im));
    let (tpq, tqp) = (b.top(p, qq)?, b.top(qq, p)?);
    let z = CMat { re: reshape(&(&*tpq * &zr), dp, dq), im: reshape(&(&*tpq * &zi), dp, dq) };
    let zp = CMat { re: reshape(&(&*tqp * &zr), dq, dp), im: reshape(&(&*tqp * &zi), dq, dp) };
    let (tp, tq) = (b.t_matrix(p)?, b.t_matrix(qq)?);

    let a1 = b.top(p, n - p)?;
    let b1 = b.top(qq, n - qq)?;
    let w = CMat::real_mul(&tp.transpose(), &z);
    let first_l = |wm: &Mat<T>| contract_leading(&apply_left(&wm.transpose(), &a1, b.dim(n - p)), &b1, dq);
    let l1 = CMat { re: first_l(&w.re), im: first_l(&w.im) };
    let k = zp.mul_real(&tp);
    let (rq, rp) = (b.top(qq, r)?, b.top(p, r)?);
    let first_r = |km: &Mat<T>| rq.transpose() * apply_left(km, &rp, dr);
    let r1 = CMat { re: first_r(&k.re), im: first_r(&k.im) };

    let a2 = b.top(n - p, p)?;
    let b2 = swap_legs(&*b.top(n - qq, qq)?, b.dim(n - qq), dq);
    let w2 = z.conj().mul_real(&tq);
    let second_l = |wm: &Mat<T>| {
        let pm = apply_right(&wm.transpose(), &a2, dp);
        contract_leading(&swap_legs(&pm, b.dim(n - p), dq), &b2, dq)
    };
    let l2 = CMat { re: second_l(&w2.re), im: second_l(&w2.im) };
    let mm = CMat::real_mul(&tq.transpose(), &zp.conj());
    let (sq, sp) = (b.top(r, qq)?, b.top(r, p)?);
    let second_r = |m: &Mat<T>| sq.transpose() * apply_right(m, &sp, dp);
    let r2 = CMat { re: second_r(&mm.re), im: second_r(&mm.im) };

    let (alpha, residual, d1) = proportionality(&l1, &r1);
    let (alpha_second, residual_second, d2) = proportionality(&l2, &r2);
    Ok(AlphaReport { n, p, q: qq, alpha, residual, alpha_second, residual_second, degenerate: d1 || d2 })
}

/// Unit vector in `H_{p+q}` from a seeded generator.
pub fn random_unit<T: Real>(d: usize, rng: &mut ChaCha8Rng) -> Vec<Complex<T>> {
    let v: Vec<(f64, f64)> = (0..d).map(|_| (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let nrm = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
    v.into_iter().map(|(a, b)| Complex::new(lit(a / nrm), lit(b / nrm))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweep {
    pub rows: Vec<AlphaReport>,
    pub checks: Vec<Check>,
}

/// `alpha_{0,q} = 1`, `alpha_{1,1} = -d_{n-2}/d_{n-1}` for `n <= n_max_11`, and
/// the general bounds for `(1,2), (2,1), (2,2)` with `n <= n_max`.
pub fn alpha_sweep<T: Real>(b: &dyn RepBackend<T>, n_max: usize, n_max_11: usize, seed: u64) -> Result<AlphaSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pd = b.params();
    let mut rows = Vec::new();
    let (mut zero_ok, mut one_ok, mut gen_ok) = (true, true, true);
    let (mut zero_err, mut one_err, mut gen_res) = (0.0f64, 0.0f64, 0.0f64);
    let mut alpha_range = (f64::INFINITY, 0.0f64);
    for qq in [1usize, 2] {
        for n in qq..=n_max {
            let z = random_unit::<T>(b.dim(qq), &mut rng);
            let r = alpha_pq(b, n, 0, qq, &z)?;
            for al in [r.alpha, r.alpha_second] {
                let e = (al.0 - 1.0).hypot(al.1);
                zero_err = zero_err.max(e);
                zero_ok &= e <= 1e-12 && !r.degenerate;
            }
            rows.push(r);
        }
    }
    for n in 2..=n_max_11 {
        let z = random_unit::<T>(b.dim(2), &mut rng);
        let r = alpha_pq(b, n, 1, 1, &z)?;
        let want = -to_f64(pd.dim(n - 2) / pd.dim(n - 1));
        for al in [r.alpha, r.alpha_second] {
            let e = (al.0 - want).hypot(al.1);
            one_err = one_err.max(e);
            one_ok &= e <= 1e-8 && !r.degenerate;
        }
        rows.push(r);
    }
    for (p, qq) in [(1usize, 2usize), (2, 1), (2, 2)] {
        for n in p + qq..=n_max {
            let z = random_unit::<T>(b.dim(p + qq), &mut rng);
            let r = alpha_pq(b, n, p, qq, &z)?;
            for (al, res) in [(r.alpha, r.residual), (r.alpha_second, r.residual_second)] {
                let m = al.0.hypot(al.1);
                gen_res = gen_res.max(res);
                alpha_range = (alpha_range.0.min(m), alpha_range.1.max(m));
                gen_ok &= !r.degenerate && res <= 1e-7 && m > 0.0 && m <= 1.0 + 1e-9;
            }
            rows.push(r);
        }
    }
    let checks = vec![
        Check::new("alpha_{0,q} = 1", zero_ok, format!("max |alpha - 1| = {zero_err:.3e}")),
        Check::new("alpha_{1,1} = -d_{n-2}/d_{n-1}", one_ok, format!("max error {one_err:.3e} (tol 1e-8)")),
        Check::new(
            "alpha residual and range",
            gen_ok,
            format!("max residual {gen_res:.3e}, |alpha| in [{:.4e}, {:.4e}]", alpha_range.0, alpha_range.1),
        ),
    ];
    Ok(AlphaSweep { rows, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDefect {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub defect: f64,
    pub cross: f64,
}

/// `||(id_x (x) P_{y+z})(P_{x+y} (x) id_z) - P_{x+y+z}||` and the largest
/// cross term `||P_mu^{x,y+z} P_mu^{x+y,z}||` over `mu < x+y+z`.
pub fn projection_product_defect<T: Real>(b: &dyn RepBackend<T>, x: usize, y: usize, z: usize) -> Result<ProjectionDefect> {
    let (dx, dy, dz) = (b.dim(x), b.dim(y), b.dim(z));
    let (dxy, dyz) = (b.dim(x + y), b.dim(y + z));
    crate::error::cap_check(
        || format!("projection defect ({x},{y},{z})"),
        (dx * dy * dz) as u128,
        b.caps().coupled_dim,
    )?;
    let txy = b.top(x, y)?;
    let tyz = b.top(y, z)?;
    // G = (id (x) top(y,z))^T (top(x,y) (x) id), rows (x', w), cols (v, z')
    let mut g = Mat::<T>::zeros(dx * dyz, dxy * dz);
    for xp in 0..dx {
        let tx = txy.rows(xp * dy, dy);
        for zp in 0..dz {
            let tz = Mat::from_fn(dy, dyz, |yy, w| tyz[(yy * dz + zp, w)]);
            let blk = tz.transpose() * tx;
            for v in 0..dxy {
                for w in 0..dyz {
                    g[(xp * dyz + w, v * dz + zp)] = blk[(w, v)];
                }
            }
        }
    }
    let ua = b.top(x + y, z)?;
    let ub = b.top(x, y + z)?;
    // U = (top(x,y) (x) id) ua = sign (id (x) top(y,z)) ub
    let e0 = DVector::from_fn(ua.ncols(), |i, _| if i == 0 { T::one() } else { T::zero() });
    let sign = (&*ub * &e0).dot(&(&g * (&*ua * &e0)));
    if (to_f64(sign).abs() - 1.0).abs() > 1e-8 {
        return Err(Error::Invariant(format!("embeddings of H_{} disagree beyond a sign: {}", x + y + z, to_f64(sign))));
    }
    let defect = op_norm_fn(
        dxy * dz,
        |v| &g * v - (&*ub * (ua.tr_mul(v))) * sign,
        |w| g.tr_mul(w) - (&*ua * (ub.tr_mul(w))) * sign,
    );
    let d1 = b.decompose(x, y + z)?;
    let d2 = b.decompose(x + y, z)?;
    let mut cross = T::zero();
    for m in fusion_channels(x, y + z).filter(|&m| m < x + y + z) {
        let (Some(u1), Some(u2)) = (d1.component(m), d2.component(m)) else { continue };
        let w1 = apply_right(&tyz, u1, dyz);
        let w2 = apply_left(&txy, u2, dz);
        cross = cross.max(op_norm_real(&w1.tr_mul(&w2)));
    }
    Ok(ProjectionDefect { x, y, z, defect: to_f64(defect), cross: to_f64(cross) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSweep {
    pub rows: Vec<ProjectionDefect>,
    pub defect_fit: DecayReport,
    pub cross_fit: DecayReport,
    pub checks: Vec<Check>,
}

pub fn projection_defect_sweep<T: Real>(b: &dyn RepBackend<T>, x: usize, z: usize, y_max: usize) -> Result<ProjectionSweep> {
    let q = to_f64(b.params().q());
    let rows: Vec<ProjectionDefect> = (1..=y_max).map(|y| projection_product_defect(b, x, y, z)).collect::<Result<_>>()?;
    let defect_fit = fit_decay(&rows.iter().map(|r| (r.y as f64, r.defect)).collect::<Vec<_>>(), q);
    let cross_fit = fit_decay(&rows.iter().map(|r| (r.y as f64, r.cross)).collect::<Vec<_>>(), q);
    let dominated = rows.iter().all(|r| r.cross <= r.defect + 1e-10);
    let checks = vec![
        Check::new(
            "projection defect rate",
            rate_within(defect_fit.fitted_rate, q.ln(), RATE_TOL),
            format!("fitted {:?} vs log q {:.4}", defect_fit.fitted_rate, q.ln()),
        ),
        Check::new(
            "projection cross-term rate",
            rate_within(cross_fit.fitted_rate, q.ln(), RATE_TOL),
            format!("fitted {:?} vs log q {:.4}", cross_fit.fitted_rate, q.ln()),
        ),
        Check::new("cross <= defect", dominated, "pointwise, slack 1e-10".into()),
    ];
    Ok(ProjectionSweep { rows, defect_fit, cross_fit, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub a: usize,
    pub l: usize,
    pub probe: KappaReport,
    pub direct: Option<KappaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSweep {
    pub rows: Vec<KappaRow>,
    /// `max_l kappa` for each `a`.
    pub bounds: Vec<f64>,
    pub fitted_rate: Option<f64>,
    pub checks: Vec<Check>,
}

/// `kappa_m^{l,l}` with `m = 2l - 2a` for `a <= a_max`, `a <= l <= l_max`.
///
/// Probed on the tensor realization; the explicit intertwiner is evaluated on
/// `direct` wherever it fits under the caps.
pub fn kappa_sweep<T: Real>(
    tensor: &TensorBackend<T>,
    direct: Option<&dyn RepBackend<T>>,
    a_max: usize,
    l_max: usize,
) -> Result<KappaSweep> {
    let q = to_f64(tensor.params().q());
    let mut rows = Vec::new();
    for a in 0..=a_max {
        for l in a.max(1)..=l_max {
            let m = 2 * l - 2 * a;
            let probe = tensor.kappa_probe(l, l, m)?;
            let d = match direct {
                Some(b) => match b.kappa(l, l, m) {
                    Ok(r) => Some(r),
                    Err(Error::CapExceeded { .. }) => None,
                    Err(e) => return Err(e),
                },
                None => None,
            };
            rows.push(KappaRow { a, l, probe, direct: d });
        }
    }
    let bounds: Vec<f64> =
        (0..=a_max).map(|a| rows.iter().filter(|r| r.a == a).fold(0.0f64, |x, r| x.max(r.probe.kappa))).collect();
    let xs: Vec<f64> = (0..=a_max).map(|a| a as f64).collect();
    let ys: Vec<f64> = bounds.iter().map(|v| v.ln()).collect();
    let fitted_rate = crate::linalg::ls_slope(&xs, &ys).map(|f| f.0);
    let scal = rows.iter().fold(0.0f64, |x, r| {
        x.max(r.probe.scalarity_residual).max(r.direct.map_or(0.0, |d| d.scalarity_residual))
    });
    let target = -0.5 * q.ln();
    let growth_ok = fitted_rate.is_some_and(|s| s <= 1.2 * target)
        && bounds.iter().enumerate().all(|(a, bnd)| *bnd <= 1.2 * q.powf(-(a as f64) / 2.0));
    let agree = rows.iter().filter_map(|r| r.direct.map(|d| (d.c - r.probe.c).abs() / d.c)).fold(0.0f64, f64::max);
    let checks = vec![
        Check::new("kappa scalarity", scal <= 1e-8, format!("max residual {scal:.3e}")),
        Check::new(
            "kappa growth in a",
            growth_ok,
            format!("B_a = {bounds:?}, fitted slope {fitted_rate:?} vs -log(q)/2 = {target:.4} (20% slack)"),
        ),
        Check::new("kappa probe vs explicit intertwiner", agree <= 1e-8, format!("max relative difference {agree:.3e}")),
    ];
    Ok(KappaSweep { rows, bounds, fitted_rate, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::make_params;
    use crate::rep::coupled::CoupledBackend;

    fn coupled() -> CoupledBackend<f64> {
        CoupledBackend::new(make_params(3).unwrap())
    }

    #[test]
    fn partial_trace_lambda_and_c0() {
        let b = coupled();
        let r = partial_trace_convergence(&b, 1, 1, 3).unwrap();
        assert!((r.lambda - 0.76158).abs() < 5e-5);
        assert!((r.lambda - b.params().q().powi(-2) / 9.0).abs() < 1e-15);
        let r0 = partial_trace_convergence(&b, 2, 0, 4).unwrap();
        assert!(r0.scalar_defects.iter().all(|d| *d < 1e-10));
        let q = b.params().q();
        let lam = q.powi(-2) / 8.0;
        let last = b.params().dim(6) / (b.params().dim(2) * b.params().dim(4));
        assert!((last - lam).abs() < 0.01 * lam);
    }

    #[test]
    fn alpha_closed_forms() {
        let b = coupled();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=5 {
            let z = random_unit(8, &mut rng);
            let r = alpha_pq(&b, n, 1, 1, &z).unwrap();
            let want = -b.params().dim(n - 2) / b.params().dim(n - 1);
            assert!((r.alpha.0 - want).abs() < 1e-10 && r.alpha.1.abs() < 1e-10, "n={n}: {:?}", r.alpha);
            assert!((r.alpha_second.0 - want).abs() < 1e-10);
            assert!(r.residual < 1e-10 && r.residual_second < 1e-10);
        }
        for n in 2..=5 {
            let z = random_unit(8, &mut rng);
            let r = alpha_pq(&b, n, 0, 2, &z).unwrap();
            assert!((r.alpha.0 - 1.0).abs() < 1e-12 && r.alpha.1.abs() < 1e-12);
        }
        let z = random_unit(55, &mut rng);
        let r = alpha_pq(&b, 6, 2, 2, &z).unwrap();
        assert!(r.residual <= 1e-7 && r.residual_second <= 1e-7);
        let m = r.alpha.0.hypot(r.alpha.1);
        assert!(m > 0.0 && m <= 1.0);
        assert!((r.alpha.0 - r.alpha_second.0).abs() < 1e-10);
    }

    #[test]
    fn projection_defect_small() {
        let b = coupled();
        let r = projection_product_defect(&b, 0, 3, 0).unwrap();
        assert!(r.defect < 1e-12 && r.cross == 0.0);
        for y in 1..=3 {
            let r = projection_product_defect(&b, 1, y, 1).unwrap();
            assert!(r.cross <= r.defect + 1e-10);
            assert!(r.defect > 0.0 && r.defect < 1.0);
        }
    }

    #[test]
    fn rotation_sweep_small() {
        let b = coupled();
        let r = trace_rotation_sweep(&b, 3, 10, 1, 1, 3, 7).unwrap();
        assert!(r.checks.iter().take(4).all(|c| c.pass), "{:?}", r.checks);
        assert!((r.rows[0].identity_trace - 3.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_sweep_small() {
        let b = coupled();
        let t = TensorBackend::new(make_params::<f64>(3).unwrap());
        let s = kappa_sweep(&t, Some(&b), 2, 3).unwrap();
        assert!(s.checks.iter().all(|c| c.pass), "{:?}", s.checks);
        assert!((s.bounds[0] - 1.0).abs() < 1e-12);
    }
}
