//! Full tensor realization: `H_n` inside `H_1^{(x) n}` with `P_n` held in the
//! factored form `E_n E_n^T`.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{cap_check, Error, Result};
use crate::linalg::{apply_left, apply_right, pivoted_cholesky, CMat, Mat};
use crate::qcore::QParams;
use crate::rep::{
    channel_check, entries_check, fix_phase, BackendKind, Cache, Caps, CgDecomposition, KappaReport, RepBackend,
    RepBasis,
};
use crate::scalar::{from_usize, lit, to_f64, Real};

pub struct TensorBackend<T: Real> {
    p: QParams<T>,
    caps: Caps,
    es: Cache<usize, Mat<T>>,
    tops: Cache<(usize, usize), Mat<T>>,
    ts: Cache<usize, Mat<T>>,
    decs: Cache<(usize, usize), CgDecomposition<T>>,
}

fn pow(n: usize, e: usize) -> usize {
    n.pow(e as u32)
}

impl<T: Real> TensorBackend<T> {
    pub fn new(p: QParams<T>) -> Self {
        Self::with_caps(p, Caps::default())
    }

    pub fn with_caps(p: QParams<T>, caps: Caps) -> Self {
        TensorBackend { p, caps, es: Cache::new(), tops: Cache::new(), ts: Cache::new(), decs: Cache::new() }
    }

    fn d(&self, n: usize) -> usize {
        self.p.dim_usize(n)
    }

    fn ambient_check(&self, n: usize) -> Result<()> {
        let nn = self.p.N() as u128;
        let size = nn.checked_pow(n as u32).unwrap_or(u128::MAX);
        cap_check(|| format!("tensor ambient N^{n}"), size, self.caps.tensor_dim)
    }

    /// Whether `E_n` can be stored under the entry cap.
    pub fn can_store(&self, n: usize) -> bool {
        self.ambient_check(n).is_ok()
            && entries_check(String::new, pow(self.p.N(), n), self.d(n), &self.caps).is_ok()
            && entries_check(String::new, self.d(n.max(1) - 1) * self.p.N(), self.d(n.max(1) - 1) * self.p.N(), &self.caps)
                .is_ok()
    }

    /// Isometry `E_n : H_n -> H_1^{(x) n}` with `P_n = E_n E_n^T`.
    pub fn e(&self, n: usize) -> Result<Arc<Mat<T>>> {
        self.es.get_or_try(n, || {
            let nn = self.p.N();
            self.ambient_check(n)?;
            if n == 0 {
                return Ok(Mat::identity(1, 1));
            }
            if n == 1 {
                return Ok(Mat::identity(nn, nn));
            }
            entries_check(|| format!("E_{n}"), pow(nn, n), self.d(n), &self.caps)?;
            let prev = self.e(n - 1)?;
            let dp = self.d(n - 1);
            let inner = pow(nn, n - 2);
            // Z = (1^{n-2} (x) t_1^*)(E_{n-1} (x) I), shape N^{n-2} x (d_{n-1} N)
            let mut z = Mat::<T>::zeros(inner, dp * nn);
            for c in 0..dp {
                for j in 0..nn {
                    for y in 0..inner {
                        z[(y, c * nn + j)] = prev[(y * nn + j, c)];
                    }
                }
            }
            let ratio = self.p.dim(n - 2) / self.p.dim(n - 1);
            entries_check(|| format!("Gram form for E_{n}"), dp * nn, dp * nn, &self.caps)?;
            let mut g = Mat::<T>::identity(dp * nn, dp * nn);
            g.gemm(-ratio, &z.transpose(), &z, T::one());
            let l = pivoted_cholesky(&g, self.d(n), 1e-8, &format!("tensor H_{n}"))?;
            Ok(apply_left(&prev, &l, nn))
        })
    }

    /// `(P_{n-1} (x) 1) V` on the leading `n-1` legs.
    fn apply_pnm1_left(&self, n: usize, v: &Mat<T>) -> Result<Mat<T>> {
        let nn = self.p.N();
        if self.can_store(n - 1) {
            let e = self.e(n - 1)?;
            return Ok(apply_left(&e, &apply_left(&e.transpose(), v, nn), nn));
        }
        let lead = pow(nn, n - 1);
        let m = v.ncols();
        let mut y = Mat::<T>::zeros(lead, nn * m);
        for c in 0..m {
            for x in 0..lead {
                for j in 0..nn {
                    y[(x, c * nn + j)] = v[(x * nn + j, c)];
                }
            }
        }
        let y = self.jw_apply(n - 1, &y)?;
        let mut out = Mat::<T>::zeros(v.nrows(), m);
        for c in 0..m {
            for x in 0..lead {
                for j in 0..nn {
                    out[(x * nn + j, c)] = y[(x, c * nn + j)];
                }
            }
        }
        Ok(out)
    }

    /// `(1^{n-2} (x) t_1 t_1^*) V`.
    fn cup_cap_last(&self, n: usize, v: &Mat<T>) -> Mat<T> {
        let nn = self.p.N();
        let inner = pow(nn, n - 2);
        let mut out = Mat::<T>::zeros(v.nrows(), v.ncols());
        for c in 0..v.ncols() {
            for y in 0..inner {
                let mut s = T::zero();
                for j in 0..nn {
                    s += v[((y * nn + j) * nn + j, c)];
                }
                for i in 0..nn {
                    out[((y * nn + i) * nn + i, c)] = s;
                }
            }
        }
        out
    }

    /// `P_n V` for ambient columns `V` via the reduced Wenzl recursion,
    /// never forming the `N^n x N^n` matrix.
    pub fn jw_apply(&self, n: usize, v: &Mat<T>) -> Result<Mat<T>> {
        self.ambient_check(n)?;
        if v.nrows() != pow(self.p.N(), n) {
            return Err(Error::Precondition(format!("vector length {} != N^{n}", v.nrows())));
        }
        if n <= 1 {
            return Ok(v.clone());
        }
        let ratio = self.p.dim(n - 2) / self.p.dim(n - 1);
        let w = self.apply_pnm1_left(n, v)?;
        let u = self.cup_cap_last(n, &w);
        let u = self.apply_pnm1_left(n, &u)?;
        Ok(w - u * ratio)
    }

    pub fn jw_apply_c(&self, n: usize, v: &CMat<T>) -> Result<CMat<T>> {
        Ok(CMat { re: self.jw_apply(n, &v.re)?, im: self.jw_apply(n, &v.im)? })
    }

    /// Right-hand side of the full Wenzl recursion applied to `V`.
    pub fn wenzl_full_apply(&self, n: usize, v: &Mat<T>) -> Result<Mat<T>> {
        self.ambient_check(n)?;
        if n <= 1 {
            return Ok(v.clone());
        }
        let nn = self.p.N();
        let w = self.apply_pnm1_left(n, v)?;
        let mut out = w.clone();
        let inner = pow(nn, n - 2);
        let dn1 = self.p.dim(n - 1);
        for l in 1..n {
            let sign: T = if (n - l).is_multiple_of(2) { T::one() } else { -T::one() };
            let coef = sign * self.p.dim(l - 1) / dn1;
            let suf = pow(nn, n - l - 1);
            for c in 0..v.ncols() {
                for y in 0..inner {
                    let mut s = T::zero();
                    for j in 0..nn {
                        s += w[((y * nn + j) * nn + j, c)];
                    }
                    let (pre, sf) = (y / suf, y % suf);
                    for i in 0..nn {
                        let idx = ((pre * nn + i) * nn + i) * suf + sf;
                        out[(idx, c)] += coef * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Right-hand side of the reflected Wenzl recursion applied to `V`.
    pub fn wenzl_reflected_apply(&self, n: usize, v: &Mat<T>) -> Result<Mat<T>> {
        self.ambient_check(n)?;
        if n <= 1 {
            return Ok(v.clone());
        }
        let nn = self.p.N();
        let tail = pow(nn, n - 1);
        let e = self.e(n - 1)?;
        let right = |x: &Mat<T>| apply_right(&e, &apply_right(&e.transpose(), x, tail), e.ncols());
        let w = right(v);
        let rest = pow(nn, n - 2);
        let mut u = Mat::<T>::zeros(w.nrows(), w.ncols());
        for c in 0..w.ncols() {
            for r in 0..rest {
                let mut s = T::zero();
                for j in 0..nn {
                    s += w[((j * nn + j) * rest + r, c)];
                }
                for i in 0..nn {
                    u[((i * nn + i) * rest + r, c)] = s;
                }
            }
        }
        let ratio = self.p.dim(n - 2) / self.p.dim(n - 1);
        Ok(&w - right(&u) * ratio)
    }

    /// `sum_i <e_i, P_n e_i>` over the standard basis of `H_1^{(x) n}`.
    pub fn jw_trace(&self, n: usize) -> Result<T> {
        self.ambient_check(n)?;
        let dim = pow(self.p.N(), n);
        if dim <= 6561 {
            use rayon::prelude::*;
            let chunk = 256;
            let parts: Result<Vec<T>> = (0..dim.div_ceil(chunk))
                .into_par_iter()
                .map(|b| {
                    let lo = b * chunk;
                    let hi = (lo + chunk).min(dim);
                    let v = Mat::from_fn(dim, hi - lo, |i, j| if i == lo + j { T::one() } else { T::zero() });
                    let pv = self.jw_apply(n, &v)?;
                    Ok((0..hi - lo).fold(T::zero(), |a, j| a + pv[(lo + j, j)]))
                })
                .collect();
            return Ok(parts?.into_iter().fold(T::zero(), |a, b| a + b));
        }
        self.gram_trace(n)
    }

    /// `Tr P_n = Tr G_n = N ||E_{n-1}||_F^2 - (d_{n-2}/d_{n-1}) ||E_{n-1}||_F^2`, needing only `E_{n-1}`.
    fn gram_trace(&self, n: usize) -> Result<T> {
        let nn = from_usize::<T>(self.p.N());
        let f2 = self.e(n - 1)?.norm_squared();
        let ratio = self.p.dim(n - 2) / self.p.dim(n - 1);
        Ok(nn * f2 - ratio * f2)
    }

    fn reverse_index(&self, mut i: usize, len: usize) -> usize {
        let nn = self.p.N();
        let mut r = 0;
        for _ in 0..len {
            r = r * nn + i % nn;
            i /= nn;
        }
        r
    }

    /// Rows `(x, I)` of `E_l` for a fixed trailing multi-index `I` of length `a`.
    fn rows_trailing(&self, e: &Mat<T>, l: usize, a: usize, idx: usize) -> Mat<T> {
        let nn = self.p.N();
        let lead = pow(nn, l - a);
        let s = pow(nn, a);
        Mat::from_fn(lead, e.ncols(), |x, c| e[(x * s + idx, c)])
    }

    /// Rows `(J, y)` of `E_k` for a fixed leading multi-index `J` of length `a`.
    fn rows_leading(&self, e: &Mat<T>, k: usize, a: usize, idx: usize) -> Mat<T> {
        let nn = self.p.N();
        let tail = pow(nn, k - a);
        Mat::from_fn(tail, e.ncols(), |y, c| e[(idx * tail + y, c)])
    }

    /// Unnormalized `V_m = (E_l (x) E_k)^T (1 (x) cups_a (x) 1) E_m`.
    fn intertwiner_ambient(&self, l: usize, k: usize, a: usize) -> Result<Mat<T>> {
        let nn = self.p.N();
        let m = l + k - 2 * a;
        let (el, ek, em) = (self.e(l)?, self.e(k)?, self.e(m)?);
        let (dl, dk, dm) = (self.d(l), self.d(k), self.d(m));
        let mut out = Mat::<T>::zeros(dl * dk, dm);
        for idx in 0..pow(nn, a) {
            let al = self.rows_trailing(&el, l, a, idx).transpose();
            let bk = self.rows_leading(&ek, k, a, self.reverse_index(idx, a));
            let step = apply_right(&bk.transpose(), &em, pow(nn, k - a));
            out += apply_left(&al, &step, dk);
        }
        Ok(out)
    }

    /// Isotropic probe vectors `w = (u + i v)/sqrt 2` with `u`, `v` orthonormal.
    fn isotropic_probes(&self, count: usize) -> Vec<Vec<Complex<T>>> {
        let nn = self.p.N();
        let r = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
        let mut rng = ChaCha8Rng::seed_from_u64(0x006b_6170_7061);
        let mut out = Vec::with_capacity(count);
        let mut first = vec![Complex::new(T::zero(), T::zero()); nn];
        first[0] = Complex::new(r, T::zero());
        first[1] = Complex::new(T::zero(), r);
        out.push(first);
        while out.len() < count {
            let mut u: Vec<f64> = (0..nn).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut v: Vec<f64> = (0..nn).map(|_| rng.random::<f64>() - 0.5).collect();
            let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            u.iter_mut().for_each(|x| *x /= nu);
            let uv: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(&u).for_each(|(x, a)| *x -= uv * a);
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= nv);
            out.push(u.iter().zip(&v).map(|(a, b)| Complex::new(lit::<T>(*a) * r, lit::<T>(*b) * r)).collect());
        }
        out
    }

    fn tensor_power(w: &[Complex<T>], p: usize) -> Vec<Complex<T>> {
        let mut v = vec![Complex::new(T::one(), T::zero())];
        for _ in 0..p {
            v = v.iter().flat_map(|a| w.iter().map(move |b| a * b)).collect();
        }
        v
    }

    /// `c` with `V^* V = c id`, probed on highest-weight vectors `w^{(x) m}`.
    pub fn kappa_probe(&self, l: usize, k: usize, m: usize) -> Result<KappaReport> {
        let a = channel_check(l, k, m)?;
        let nn = self.p.N();
        let (el, ek) = (self.e(l)?, self.e(k)?);
        let probes = self.isotropic_probes(4);
        let zero = Complex::new(T::zero(), T::zero());
        let s = pow(nn, a);
        // per probe: a_I in C^{d_l}, b_I in C^{d_k}
        let mut avs: Vec<Vec<Vec<Complex<T>>>> = Vec::new();
        let mut bvs: Vec<Vec<Vec<Complex<T>>>> = Vec::new();
        for w in &probes {
            let wl = Self::tensor_power(w, l - a);
            let wk = Self::tensor_power(w, k - a);
            let mut ai = Vec::with_capacity(s);
            let mut bi = Vec::with_capacity(s);
            for idx in 0..s {
                let rl = self.rows_trailing(&el, l, a, idx);
                let rk = self.rows_leading(&ek, k, a, self.reverse_index(idx, a));
                ai.push((0..el.ncols()).map(|c| (0..rl.nrows()).fold(zero, |acc, x| acc + wl[x] * rl[(x, c)])).collect());
                bi.push((0..ek.ncols()).map(|c| (0..rk.nrows()).fold(zero, |acc, y| acc + wk[y] * rk[(y, c)])).collect());
            }
            avs.push(ai);
            bvs.push(bi);
        }
        let ip = |x: &[Complex<T>], y: &[Complex<T>]| x.iter().zip(y).fold(zero, |acc, (p, q)| acc + p * q.conj());
        let np = probes.len();
        let mut gv = vec![vec![zero; np]; np];
        let mut gy = vec![vec![zero; np]; np];
        for sidx in 0..np {
            for t in 0..np {
                let mut acc = zero;
                for i in 0..s {
                    for j in 0..s {
                        acc += ip(&avs[sidx][i], &avs[t][j]) * ip(&bvs[sidx][i], &bvs[t][j]);
                    }
                }
                gv[sidx][t] = acc;
                let base = ip(&probes[sidx], &probes[t]);
                gy[sidx][t] = (0..m).fold(Complex::new(T::one(), T::zero()), |acc, _| acc * base);
            }
        }
        let c = (0..np).fold(T::zero(), |acc, i| acc + gv[i][i].re / gy[i][i].re) / from_usize(np);
        let mut res = T::zero();
        for i in 0..np {
            for j in 0..np {
                res = res.max({ let z = gv[i][j] - gy[i][j] * c; (z.re * z.re + z.im * z.im).sqrt() / c });
            }
        }
        Ok(KappaReport {
            l,
            k,
            m,
            c: to_f64(c),
            kappa: 1.0 / to_f64(c).sqrt(),
            scalarity_residual: to_f64(res),
        })
    }
}

impl<T: Real> RepBackend<T> for TensorBackend<T> {
    fn kind(&self) -> BackendKind {
        BackendKind::Tensor
    }

    fn params(&self) -> &QParams<T> {
        &self.p
    }

    fn caps(&self) -> &Caps {
        &self.caps
    }

    fn basis(&self, n: usize) -> Result<RepBasis<T>> {
        Ok(RepBasis { n, backend: BackendKind::Tensor, isometry: self.e(n)? })
    }

    fn top(&self, l: usize, k: usize) -> Result<Arc<Mat<T>>> {
        self.tops.get_or_try((l, k), || {
            let nn = self.p.N();
            let (el, ek, e) = (self.e(l)?, self.e(k)?, self.e(l + k)?);
            entries_check(|| format!("top({l},{k})"), self.d(l) * self.d(k), self.d(l + k), &self.caps)?;
            let x = apply_left(&el.transpose(), &e, pow(nn, k));
            Ok(apply_right(&ek.transpose(), &x, pow(nn, k)))
        })
    }

    fn t_matrix(&self, n: usize) -> Result<Arc<Mat<T>>> {
        self.ts.get_or_try(n, || {
            let e = self.e(n)?;
            let rows = e.nrows();
            let rev = Mat::from_fn(rows, e.ncols(), |i, c| e[(self.reverse_index(i, n), c)]);
            Ok(e.transpose() * rev)
        })
    }

    fn decompose(&self, l: usize, k: usize) -> Result<Arc<CgDecomposition<T>>> {
        self.decs.get_or_try((l, k), || {
            let (dl, dk) = (self.d(l), self.d(k));
            cap_check(|| format!("decompose({l},{k}) d_l*d_k"), (dl * dk) as u128, self.caps.coupled_dim)?;
            let mut comps = Vec::new();
            for a in (0..=l.min(k)).rev() {
                let m = l + k - 2 * a;
                let mut v = if a == 0 { (*self.top(l, k)?).clone() } else { self.intertwiner_ambient(l, k, a)? };
                let c = v.norm_squared() / from_usize::<T>(self.d(m));
                if to_f64(c) <= 1e-14 {
                    return Err(Error::Degenerate(format!("component {m} of {l} (x) {k} vanished")));
                }
                v /= c.sqrt();
                fix_phase(&mut v);
                comps.push((m, v));
            }
            Ok(CgDecomposition { l, k, components: comps })
        })
    }

    fn kappa(&self, l: usize, k: usize, m: usize) -> Result<KappaReport> {
        self.kappa_probe(l, k, m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::make_params;

    fn backend() -> TensorBackend<f64> {
        TensorBackend::new(make_params(3).unwrap())
    }

    fn rnd(r: usize, c: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(r, c, |_, _| rng.random::<f64>() - 0.5)
    }

    #[test]
    fn jw_small_cases() {
        let b = backend();
        let v = rnd(3, 2, 1);
        assert_eq!(b.jw_apply(1, &v).unwrap(), v);
        let t1 = Mat::from_fn(9, 1, |i, _| if i / 3 == i % 3 { 1.0 } else { 0.0 });
        assert!(b.jw_apply(2, &t1).unwrap().abs().max() < 1e-14);
    }

    #[test]
    fn jw_projector_properties() {
        let b = backend();
        for n in 2..=6 {
            let dim = 3usize.pow(n as u32);
            let v = rnd(dim, 3, n as u64);
            let w = rnd(dim, 3, 100 + n as u64);
            let pv = b.jw_apply(n, &v).unwrap();
            let ppv = b.jw_apply(n, &pv).unwrap();
            assert!((&ppv - &pv).abs().max() < 1e-10);
            let pw = b.jw_apply(n, &w).unwrap();
            let lhs = w.transpose() * &pv;
            let rhs = pw.transpose() * &v;
            assert!((lhs - rhs).abs().max() < 1e-10);
            let e = b.e(n).unwrap();
            let fact = &*e * (e.transpose() * &v);
            assert!((fact - &pv).abs().max() < 1e-10);
        }
    }

    #[test]
    fn traces() {
        let b = backend();
        for n in 0..=6 {
            assert!((b.jw_trace(n).unwrap() - b.p.dim(n)).abs() < 1e-8 * b.p.dim(n));
        }
        for n in 3..=6 {
            assert!((b.gram_trace(n).unwrap() - b.p.dim(n)).abs() < 1e-9 * b.p.dim(n));
        }
    }

    #[test]
    fn wenzl_forms_agree() {
        let b = backend();
        for n in 2..=5 {
            let v = rnd(3usize.pow(n as u32), 4, 7 + n as u64);
            let p = b.jw_apply(n, &v).unwrap();
            assert!((b.wenzl_full_apply(n, &v).unwrap() - &p).abs().max() < 1e-9, "full n={n}");
            assert!((b.wenzl_reflected_apply(n, &v).unwrap() - &p).abs().max() < 1e-9, "reflected n={n}");
        }
    }

    #[test]
    fn unmemoized_fallback_matches() {
        let small = Caps { max_entries: 2000, ..Caps::default() };
        let b = TensorBackend::with_caps(make_params::<f64>(3).unwrap(), small);
        let full = backend();
        let v = rnd(243, 2, 3);
        let x = b.jw_apply(5, &v).unwrap();
        let y = full.jw_apply(5, &v).unwrap();
        assert!((x - y).abs().max() < 1e-10);
        assert!(matches!(b.e(5), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn tensor_kappa_closed_cases() {
        let b = backend();
        let r = b.kappa(1, 1, 0).unwrap();
        assert!((r.kappa - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        let r = b.kappa(2, 3, 5).unwrap();
        assert!((r.kappa - 1.0).abs() < 1e-12 && r.scalarity_residual < 1e-10);
    }

    #[test]
    fn decomposition_complete() {
        let b = backend();
        for (l, k) in [(1, 1), (2, 2), (2, 3), (0, 2)] {
            let d = b.decompose(l, k).unwrap();
            let (o, c) = d.residuals();
            assert!(o < 1e-9 && c < 1e-9, "({l},{k}) {o} {c}");
        }
    }

    #[test]
    fn ambient_cap() {
        let b = backend();
        assert!(matches!(b.jw_apply(11, &Mat::zeros(1, 1)), Err(Error::CapExceeded { .. })));
    }
}
