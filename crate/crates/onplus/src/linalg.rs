//! Dense kernels: split-complex matrices, tensor-leg contractions, pivoted
//! Cholesky and power-iteration norms.
//!
//! Tensor indices follow the Kronecker convention: a vector of `H_a (x) H_b`
//! has entry `i*db + j` for the pair `(i, j)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, to_f64, Real};

pub type Mat<T> = DMatrix<T>;

/// Complex matrix stored as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T: Real> {
    pub re: Mat<T>,
    pub im: Mat<T>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(r: usize, c: usize) -> Self {
        CMat { re: Mat::zeros(r, c), im: Mat::zeros(r, c) }
    }

    pub fn identity(n: usize) -> Self {
        CMat { re: Mat::identity(n, n), im: Mat::zeros(n, n) }
    }

    pub fn from_real(re: Mat<T>) -> Self {
        let im = Mat::zeros(re.nrows(), re.ncols());
        CMat { re, im }
    }

    pub fn from_fn(r: usize, c: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut m = Self::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                let z = f(i, j);
                m.re[(i, j)] = z.re;
                m.im[(i, j)] = z.im;
            }
        }
        m
    }

    /// Column vector from complex entries.
    pub fn column(v: &[Complex<T>]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i])
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        Complex::new(self.re[(i, j)], self.im[(i, j)])
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex<T>) {
        self.re[(i, j)] = z.re;
        self.im[(i, j)] = z.im;
    }

    pub fn col_vec(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.nrows()).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        CMat { re: self.re.transpose(), im: self.im.transpose() }
    }

    pub fn conj(&self) -> Self {
        CMat { re: self.re.clone(), im: -&self.im }
    }

    pub fn adjoint(&self) -> Self {
        CMat { re: self.re.transpose(), im: -self.im.transpose() }
    }

    pub fn scale(&self, z: Complex<T>) -> Self {
        CMat { re: &self.re * z.re - &self.im * z.im, im: &self.re * z.im + &self.im * z.re }
    }

    pub fn scale_real(&self, s: T) -> Self {
        CMat { re: &self.re * s, im: &self.im * s }
    }

    pub fn add(&self, o: &Self) -> Self {
        CMat { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn sub(&self, o: &Self) -> Self {
        CMat { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.re += &o.re;
        self.im += &o.im;
    }

    pub fn mul(&self, o: &Self) -> Self {
        CMat { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }

    /// `self * r` for a real matrix `r`.
    pub fn mul_real(&self, r: &Mat<T>) -> Self {
        CMat { re: &self.re * r, im: &self.im * r }
    }

    /// `l * self` for a real matrix `l`.
    pub fn real_mul(l: &Mat<T>, m: &Self) -> Self {
        CMat { re: l * &m.re, im: l * &m.im }
    }

    pub fn trace(&self) -> Complex<T> {
        Complex::new(self.re.trace(), self.im.trace())
    }

    pub fn norm_sq(&self) -> T {
        self.re.norm_squared() + self.im.norm_squared()
    }

    /// Hilbert-Schmidt norm.
    pub fn hs_norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// `Tr(a^* b)`.
    pub fn tr_adj_mul(a: &Self, b: &Self) -> Complex<T> {
        let re = a.re.dot(&b.re) + a.im.dot(&b.im);
        let im = a.re.dot(&b.im) - a.im.dot(&b.re);
        Complex::new(re, im)
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for (a, b) in self.re.iter().zip(self.im.iter()) {
            let v = (*a * *a + *b * *b).sqrt();
            if v > m {
                m = v;
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|x| *x == T::zero())
    }

    /// Kronecker product.
    pub fn kron(&self, o: &Self) -> Self {
        CMat {
            re: self.re.kronecker(&o.re) - self.im.kronecker(&o.im),
            im: self.re.kronecker(&o.im) + self.im.kronecker(&o.re),
        }
    }
}

/// `(A (x) I_db) V` with `A: ra x da` and `V: (da*db) x m`.
pub fn apply_left<T: Real>(a: &Mat<T>, v: &Mat<T>, db: usize) -> Mat<T> {
    let da = a.ncols();
    let ra = a.nrows();
    assert_eq!(v.nrows(), da * db, "apply_left: row mismatch");
    let m = v.ncols();
    // V'[i, j + db c] = V[i db + j, c], a single product A V', then scatter back
    let mut vp = Mat::<T>::zeros(da, db * m);
    {
        let src = v.as_slice();
        let dst = vp.as_mut_slice();
        for c in 0..m {
            for i in 0..da {
                for j in 0..db {
                    dst[(j + db * c) * da + i] = src[c * da * db + i * db + j];
                }
            }
        }
    }
    let rp = a * vp;
    let mut out = Mat::<T>::zeros(ra * db, m);
    {
        let src = rp.as_slice();
        let dst = out.as_mut_slice();
        for c in 0..m {
            for j in 0..db {
                let col = &src[(j + db * c) * ra..(j + db * c + 1) * ra];
                for (r, x) in col.iter().enumerate() {
                    dst[c * ra * db + r * db + j] = *x;
                }
            }
        }
    }
    out
}

/// `(I_da (x) B) V` with `B: rb x db` and `V: (da*db) x m`.
pub fn apply_right<T: Real>(b: &Mat<T>, v: &Mat<T>, db: usize) -> Mat<T> {
    assert_eq!(b.ncols(), db, "apply_right: factor mismatch");
    assert_eq!(v.nrows() % db, 0, "apply_right: row mismatch");
    let da = v.nrows() / db;
    let m = v.ncols();
    let x = nalgebra::DMatrixView::from_slice(v.as_slice(), db, da * m);
    let y = b * x;
    Mat::from_vec(b.nrows() * da, m, y.data.into())
}

pub fn capply_left<T: Real>(a: &CMat<T>, v: &CMat<T>, db: usize) -> CMat<T> {
    let rr = apply_left(&a.re, &v.re, db);
    let ii = apply_left(&a.im, &v.im, db);
    let ri = apply_left(&a.re, &v.im, db);
    let ir = apply_left(&a.im, &v.re, db);
    CMat { re: rr - ii, im: ri + ir }
}

pub fn capply_right<T: Real>(b: &CMat<T>, v: &CMat<T>, db: usize) -> CMat<T> {
    let rr = apply_right(&b.re, &v.re, db);
    let ii = apply_right(&b.im, &v.im, db);
    let ri = apply_right(&b.re, &v.im, db);
    let ir = apply_right(&b.im, &v.re, db);
    CMat { re: rr - ii, im: ri + ir }
}

/// Real left factor acting on a complex tensor.
pub fn rapply_left<T: Real>(a: &Mat<T>, v: &CMat<T>, db: usize) -> CMat<T> {
    CMat { re: apply_left(a, &v.re, db), im: apply_left(a, &v.im, db) }
}

pub fn rapply_right<T: Real>(b: &Mat<T>, v: &CMat<T>, db: usize) -> CMat<T> {
    CMat { re: apply_right(b, &v.re, db), im: apply_right(b, &v.im, db) }
}

/// Pivoted Cholesky of a positive semidefinite `p`, returning the `r` factor
/// columns `L` with `p ~ L L^T`. For an orthogonal projector this is pivoted
/// Gram-Schmidt on its columns and `L` has orthonormal columns.
pub fn pivoted_cholesky<T: Real>(p: &Mat<T>, r: usize, rel_tol: f64, what: &str) -> Result<Mat<T>> {
    const PANEL: usize = 64;
    let m = p.nrows();
    let mut l = Mat::<T>::zeros(m, r);
    let mut res = p.clone();
    let mut diag: Vec<T> = (0..m).map(|i| p[(i, i)]).collect();
    let mut used = vec![false; m];
    let mut first = None;
    let mut k0 = 0;
    while k0 < r {
        let nb = PANEL.min(r - k0);
        for t in 0..nb {
            let k = k0 + t;
            let (j, piv) = diag
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .fold((usize::MAX, T::zero()), |acc, (i, &d)| if acc.0 == usize::MAX || d > acc.1 { (i, d) } else { acc });
            let scale = *first.get_or_insert(piv);
            if j == usize::MAX || piv <= scale * lit(rel_tol) || piv <= T::zero() {
                return Err(Error::Rank { what: what.to_string(), got: k, expected: r });
            }
            let mut col: DVector<T> = res.column(j).into_owned();
            if t > 0 {
                let lj: DVector<T> = l.view((j, k0), (1, t)).transpose().column(0).into_owned();
                col.gemv(-T::one(), &l.view((0, k0), (m, t)), &lj, T::one());
            }
            col /= piv.sqrt();
            for i in 0..m {
                diag[i] -= col[i] * col[i];
            }
            used[j] = true;
            l.set_column(k, &col);
        }
        if k0 + nb < r {
            let panel = l.columns(k0, nb);
            res.gemm(-T::one(), &panel, &panel.transpose(), T::one());
        }
        k0 += nb;
    }
    let scale = first.unwrap_or(T::one());
    let rest = (0..m).filter(|i| !used[*i]).fold(T::zero(), |a, i| if diag[i] > a { diag[i] } else { a });
    if r < m && rest > scale * lit(rel_tol) {
        return Err(Error::Rank { what: what.to_string(), got: r + 1, expected: r });
    }
    Ok(l)
}

/// `max |M^T M - I|`.
pub fn orthonormality_defect<T: Real>(m: &Mat<T>) -> T {
    let g = m.transpose() * m;
    let mut d = T::zero();
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let e = if i == j { g[(i, j)] - T::one() } else { g[(i, j)] };
            d = d.max(e.abs());
        }
    }
    d
}

/// Operator norm by power iteration on `M^* M`.
pub fn op_norm<T: Real>(m: &CMat<T>) -> T {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return T::zero();
    }
    let mut v = CMat::from_fn(n, 1, |i, _| {
        Complex::new(T::one() + from_usize::<T>(i % 7) * lit(0.1), from_usize::<T>(i % 3) * lit(0.05))
    });
    let nrm = v.hs_norm();
    v = v.scale_real(T::one() / nrm);
    let ma = m.adjoint();
    let mut lam = T::zero();
    for _ in 0..10_000 {
        let w = ma.mul(&m.mul(&v));
        let new = w.hs_norm();
        if new == T::zero() {
            return T::zero();
        }
        v = w.scale_real(T::one() / new);
        if (new - lam).abs() <= new * lit(1e-10) {
            lam = new;
            break;
        }
        lam = new;
    }
    lam.sqrt()
}

pub fn op_norm_real<T: Real>(m: &Mat<T>) -> T {
    op_norm_fn(m.ncols(), |v| m * v, |w| m.tr_mul(w))
}

/// Operator norm of a real map given by its action and its transpose.
pub fn op_norm_fn<T: Real>(
    dim: usize,
    apply: impl Fn(&DVector<T>) -> DVector<T>,
    apply_t: impl Fn(&DVector<T>) -> DVector<T>,
) -> T {
    if dim == 0 {
        return T::zero();
    }
    let mut v = DVector::from_fn(dim, |i, _| T::one() + from_usize::<T>(i % 7) * lit(0.1) - from_usize::<T>(i % 3) * lit(0.05));
    v /= v.norm();
    let mut lam = T::zero();
    for _ in 0..10_000 {
        let w = apply_t(&apply(&v));
        let new = w.norm();
        if new == T::zero() {
            return T::zero();
        }
        v = w / new;
        if (new - lam).abs() <= new * lit(1e-10) {
            lam = new;
            break;
        }
        lam = new;
    }
    lam.sqrt()
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn max_abs_real<T: Real>(m: &Mat<T>) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(to_f64(x).abs()))
}
