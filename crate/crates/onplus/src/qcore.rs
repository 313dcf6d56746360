//! Deformation parameter, quantum dimensions, dilated Chebyshev polynomials
//! and semicircle quadrature.

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, to_f64, Real};

const DIM_CACHE: usize = 48;

/// The pair `(N, q)` with `q + 1/q = N`, plus the quantum dimensions `d_n`.
#[derive(Debug, Clone)]
pub struct QParams<T: Real> {
    n: usize,
    q: T,
    dims: Vec<T>,
}

impl<T: Real> QParams<T> {
    pub fn new(n: usize) -> Result<Self> {
        make_params(n)
    }

    #[allow(non_snake_case)]
    pub fn N(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn log_q(&self) -> f64 {
        to_f64(self.q).ln()
    }

    /// `d_n`, from the cache when available.
    pub fn dim(&self, n: usize) -> T {
        if n < self.dims.len() {
            return self.dims[n];
        }
        let nn: T = from_usize(self.n);
        let (mut a, mut b) = (self.dims[self.dims.len() - 2], self.dims[self.dims.len() - 1]);
        for _ in self.dims.len()..=n {
            let c = nn * b - a;
            a = b;
            b = c;
        }
        b
    }

    /// `d_n` as an exact integer; panics past `u64`.
    pub fn dim_usize(&self, n: usize) -> usize {
        let (mut a, mut b) = (1u128, self.n as u128);
        if n == 0 {
            return 1;
        }
        for _ in 1..n {
            let c = self.n as u128 * b - a;
            a = b;
            b = c;
        }
        usize::try_from(b).expect("dimension fits in usize")
    }

    /// `d_n` from the closed form `(q^{n+1} - q^{-n-1})/(q - q^{-1})`.
    pub fn dim_closed_form(&self, n: usize) -> T {
        let q = self.q;
        let e = (n + 1) as i32;
        (q.powi(e) - q.powi(-e)) / (q - T::one() / q)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let q = self.q;
        let tol = to_f64(crate::scalar::eps::<T>()).max(1e-16) * 64.0;
        let s = to_f64(q + T::one() / q);
        if (s - self.n as f64).abs() > tol.max(1e-14) {
            return Err(Error::Invariant(format!("q + 1/q = {s} != N = {}", self.n)));
        }
        let one_minus = T::one() - q * q;
        for (k, &d) in self.dims.iter().enumerate() {
            let cf = self.dim_closed_form(k);
            let rel = to_f64(((cf - d) / d).abs());
            if rel > 1e-9f64.max(tol * (k as f64 + 1.0)) {
                return Err(Error::Invariant(format!("d_{k}: recursion {} vs closed form {}", to_f64(d), to_f64(cf))));
            }
            let qn = q.powi(-(k as i32));
            let slack = T::one() + lit::<T>(tol.max(1e-12));
            if d * slack < qn * one_minus || d > qn / one_minus * slack {
                return Err(Error::Invariant(format!("d_{k} violates q^-n(1-q^2) <= d_n <= q^-n/(1-q^2)")));
            }
        }
        Ok(())
    }
}

/// Build `QParams` for `N >= 3`; `q` is the root of `q^2 - Nq + 1` in `(0,1)`.
pub fn make_params<T: Real>(n: usize) -> Result<QParams<T>> {
    if n <= 2 {
        return Err(Error::InvalidN(n));
    }
    let nn: T = from_usize(n);
    let two: T = lit(2.0);
    let four: T = lit(4.0);
    let q = two / (nn + (nn * nn - four).sqrt());
    let mut dims = Vec::with_capacity(DIM_CACHE);
    dims.push(T::one());
    dims.push(nn);
    for k in 2..DIM_CACHE {
        let next = nn * dims[k - 1] - dims[k - 2];
        dims.push(next);
    }
    Ok(QParams { n, q, dims })
}

pub fn quantum_dim<T: Real>(p: &QParams<T>, n: usize) -> T {
    p.dim(n)
}

/// Dilated Chebyshev polynomial of the second kind, `T_n(x) = U_n(x/2)`.
pub fn chebyshev_t<T: Real>(n: usize, x: T) -> T {
    let (mut a, mut b) = (T::one(), x);
    match n {
        0 => a,
        1 => b,
        _ => {
            for _ in 1..n {
                let c = x * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}

/// All of `T_0(x), ..., T_n(x)`.
pub fn chebyshev_all<T: Real>(n: usize, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::one());
    if n >= 1 {
        out.push(x);
    }
    for k in 2..=n {
        let v = x * out[k - 1] - out[k - 2];
        out.push(v);
    }
    out
}

pub fn catalan(m: usize) -> u128 {
    let mut c = 1u128;
    for k in 0..m as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z: T = lit((std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos());
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), z);
            for k in 2..=n {
                let kf: T = from_usize(k);
                let p2 = ((lit::<T>(2.0) * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { T::one() } else { p1 };
            let pnm1 = if n == 0 { T::zero() } else { p0 };
            dp = from_usize::<T>(n) * (z * pn - pnm1) / (z * z - T::one());
            let dz = pn / dp;
            z -= dz;
            if dz.abs() <= crate::scalar::eps::<T>() * lit(4.0) {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = lit::<T>(2.0) / ((T::one() - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Adaptive Gauss-Legendre quadrature with absolute tolerance `tol`.
pub fn integrate_adaptive<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    let (x, w) = gauss_legendre::<T>(16);
    let rule = |lo: T, hi: T| {
        let h = (hi - lo) / lit(2.0);
        let c = (hi + lo) / lit(2.0);
        x.iter().zip(&w).fold(T::zero(), |acc, (&xi, &wi)| acc + wi * f(c + h * xi)) * h
    };
    fn rec<T: Real>(rule: &dyn Fn(T, T) -> T, lo: T, hi: T, whole: T, tol: T, depth: u32) -> T {
        let mid = (lo + hi) / lit(2.0);
        let l = rule(lo, mid);
        let r = rule(mid, hi);
        if depth == 0 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        let t2 = tol / lit(2.0);
        rec(rule, lo, mid, l, t2, depth - 1) + rec(rule, mid, hi, r, t2, depth - 1)
    }
    let whole = rule(a, b);
    rec(&rule, a, b, whole, tol, 40)
}

/// Semicircle density on `[-2, 2]`, `sqrt(4 - s^2) / (2 pi)`.
pub fn semicircle_density<T: Real>(s: T) -> T {
    let v = lit::<T>(4.0) - s * s;
    if v <= T::zero() {
        T::zero()
    } else {
        v.sqrt() / T::two_pi()
    }
}

/// Integrate `g` against the semicircle law, substituting `s = 2 sin(theta)`.
pub fn semicircle_integral<T: Real, F: Fn(T) -> T>(g: F, tol: T) -> T {
    let two: T = lit(2.0);
    let h = move |th: T| {
        let c = th.cos();
        g(two * th.sin()) * lit::<T>(4.0) * c * c / T::two_pi()
    };
    integrate_adaptive(&h, -T::frac_pi_2(), T::frac_pi_2(), tol)
}

/// `(1/2pi) int s^m sqrt(4 - s^2) ds` over `[-2, 2]`.
pub fn semicircle_moment<T: Real>(m: usize) -> T {
    semicircle_integral(|s: T| s.powi(m as i32), lit(1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n3_params() {
        let p = make_params::<f64>(3).unwrap();
        assert!((p.q() - 0.3819660113).abs() < 1e-10);
        let want = [1.0, 3.0, 8.0, 21.0, 55.0, 144.0, 377.0, 987.0, 2584.0];
        for (k, w) in want.iter().enumerate() {
            assert_eq!(p.dim(k), *w);
            assert_eq!(p.dim_usize(k) as f64, *w);
        }
        p.check_invariants().unwrap();
    }

    #[test]
    fn n4_dim3() {
        let p = make_params::<f64>(4).unwrap();
        assert_eq!(quantum_dim(&p, 3), 56.0);
    }

    #[test]
    fn rejects_small_n() {
        assert_eq!(make_params::<f64>(2).unwrap_err(), Error::InvalidN(2));
        assert!(make_params::<f64>(1).is_err());
        assert!(make_params::<f64>(2).unwrap_err().to_string().contains("Kac N=2 excluded"));
    }

    #[test]
    fn dims_against_closed_form() {
        for n in [3usize, 4, 5] {
            let p = make_params::<f64>(n).unwrap();
            for k in 0..=40 {
                let d = p.dim(k);
                assert!(((d - p.dim_closed_form(k)) / d).abs() < 1e-9);
                let qn = p.q().powi(-(k as i32));
                let s = 1.0 - p.q() * p.q();
                assert!(d * (1.0 + 1e-12) >= qn * s && d <= qn / s * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn f32_params() {
        let p = make_params::<f32>(3).unwrap();
        assert!((p.q() - 0.381_966).abs() < 1e-6);
        assert_eq!(p.dim(5), 144.0f32);
    }

    #[test]
    fn chebyshev_values() {
        assert_eq!(chebyshev_t(1, 2.0), 2.0);
        let th = std::f64::consts::PI / 5.0;
        let x = 2.0 * th.cos();
        assert!((chebyshev_t(3, x) - (4.0 * th).sin() / th.sin()).abs() < 1e-12);
        for n in 0..10 {
            let sup = (0..=2000)
                .map(|i| chebyshev_t(n, -2.0 + 4.0 * i as f64 / 2000.0).abs())
                .fold(0.0, f64::max);
            assert!((sup - (n as f64 + 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn chebyshev_recursion() {
        for i in 0..=1000 {
            let x = -2.0 + 4.0 * i as f64 / 1000.0;
            for n in 1..12 {
                let lhs = chebyshev_t(1, x) * chebyshev_t(n, x);
                let rhs = chebyshev_t(n + 1, x) + chebyshev_t(n - 1, x);
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn semicircle_catalan() {
        assert!(semicircle_moment::<f64>(1).abs() < 1e-12);
        for m in 0..=8 {
            let v: f64 = semicircle_moment(2 * m);
            assert!((v - catalan(m) as f64).abs() < 1e-8, "m={m} v={v}");
        }
    }

    #[test]
    fn gl_exact_for_polynomials() {
        let (x, w) = gauss_legendre::<f64>(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }
}
