//! `Pol(O_N^+)` as finite Fourier data.
//!
//! An element is a finite family of blocks `F_n in B(H_n)` standing for
//! `x = sum_n (id (x) Tr)(u^n (1 (x) F_n))`, so the coefficient
//! `u^n_{xi eta}` has the single block `xi eta^*` and `chi_n` has `I`.

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{apply_left, apply_right, CMat, Mat};
use crate::rep::{HVec, RepBackend};
use crate::scalar::{from_usize, lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierElement<T: Real> {
    pub blocks: BTreeMap<usize, CMat<T>>,
}

impl<T: Real> FourierElement<T> {
    pub fn zero() -> Self {
        FourierElement { blocks: BTreeMap::new() }
    }

    pub fn single(n: usize, block: CMat<T>) -> Self {
        let mut blocks = BTreeMap::new();
        blocks.insert(n, block);
        FourierElement { blocks }
    }

    pub fn block(&self, n: usize) -> Option<&CMat<T>> {
        self.blocks.get(&n)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (n, b) in &o.blocks {
            match out.blocks.get_mut(n) {
                Some(a) => a.add_assign(b),
                None => {
                    out.blocks.insert(*n, b.clone());
                }
            }
        }
        out
    }

    pub fn scale(&self, z: Complex<T>) -> Self {
        FourierElement { blocks: self.blocks.iter().map(|(n, b)| (*n, b.scale(z))).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(Complex::new(-T::one(), T::zero())))
    }

    /// Largest entry over all blocks.
    pub fn max_abs(&self) -> T {
        self.blocks.values().fold(T::zero(), |a, b| a.max(b.max_abs()))
    }

    pub fn degree(&self) -> usize {
        self.blocks.keys().next_back().copied().unwrap_or(0)
    }
}

fn scalar_identity<T: Real>(a: &CMat<T>) -> Option<Complex<T>> {
    let d = a.nrows();
    let z = a.get(0, 0);
    for j in 0..d {
        for i in 0..d {
            let e = a.get(i, j);
            let want = if i == j { z } else { Complex::new(T::zero(), T::zero()) };
            if e != want {
                return None;
            }
        }
    }
    Some(z)
}

/// `a = col row^T` when `a` has rank one.
fn rank_one<T: Real>(a: &CMat<T>) -> Option<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    let (r, c) = (a.nrows(), a.ncols());
    let mut best = (0, 0, T::zero());
    for j in 0..c {
        for i in 0..r {
            let v = a.get(i, j).norm_sqr();
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    if best.2 == T::zero() {
        return None;
    }
    let piv = a.get(best.0, best.1);
    let col: Vec<Complex<T>> = (0..r).map(|i| a.get(i, best.1)).collect();
    let row: Vec<Complex<T>> = (0..c).map(|j| a.get(best.0, j) / piv).collect();
    let tol = best.2 * lit::<T>(1e-26);
    for j in 0..c {
        for i in 0..r {
            if (a.get(i, j) - col[i] * row[j]).norm_sqr() > tol {
                return None;
            }
        }
    }
    Some((col, row))
}

fn row_parts<T: Real>(v: &[Complex<T>]) -> (Mat<T>, Mat<T>) {
    (Mat::from_fn(1, v.len(), |_, j| v[j].re), Mat::from_fn(1, v.len(), |_, j| v[j].im))
}

/// The coefficient algebra over a fixed backend.
pub struct FourierAlgebra<'a, T: Real> {
    pub backend: &'a dyn RepBackend<T>,
}

impl<'a, T: Real> FourierAlgebra<'a, T> {
    pub fn new(backend: &'a dyn RepBackend<T>) -> Self {
        FourierAlgebra { backend }
    }

    fn d(&self, n: usize) -> usize {
        self.backend.dim(n)
    }

    /// `u^n_{xi eta} = (id (x) omega_{xi eta})(u^n)`.
    pub fn coefficient(&self, xi: &HVec<T>, eta: &HVec<T>) -> Result<FourierElement<T>> {
        if xi.n != eta.n {
            return Err(Error::Precondition(format!("labels differ: {} vs {}", xi.n, eta.n)));
        }
        let d = self.d(xi.n);
        if xi.coords.len() != d || eta.coords.len() != d {
            return Err(Error::Precondition(format!("vectors must have length d_{} = {d}", xi.n)));
        }
        let f = CMat::from_fn(d, d, |i, j| xi.coords[i] * eta.coords[j].conj());
        Ok(FourierElement::single(xi.n, f))
    }

    pub fn character(&self, n: usize) -> FourierElement<T> {
        FourierElement::single(n, CMat::identity(self.d(n)))
    }

    pub fn unit(&self) -> FourierElement<T> {
        self.character(0)
    }

    /// Generator `u_ij` (0-based) of the fundamental representation.
    pub fn generator(&self, i: usize, j: usize) -> FourierElement<T> {
        let nn = self.d(1);
        let f = CMat::from_fn(nn, nn, |r, c| {
            if r == j && c == i {
                Complex::new(T::one(), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        });
        FourierElement::single(1, f)
    }

    fn block_product(&self, l: usize, a: &CMat<T>, k: usize, bb: &CMat<T>) -> Result<Vec<(usize, CMat<T>)>> {
        let dec = self.backend.decompose(l, k)?;
        let dk = self.d(k);
        let sa = scalar_identity(a);
        let sb = scalar_identity(bb);
        if let (Some(za), Some(zb)) = (sa, sb) {
            return Ok(dec.components.iter().map(|(m, v)| (*m, CMat::identity(v.ncols()).scale(za * zb))).collect());
        }
        let fast = match (sa, sb) {
            (Some(z), None) => rank_one(bb).map(|f| (z, f, false)),
            (None, Some(z)) => rank_one(a).map(|f| (z, f, true)),
            _ => None,
        };
        if let Some((z, (col, row), left)) = fast {
            // v^T (z (col row^T)) v = z P^T Q with P, Q the leg contractions of v
            let (cr, ci) = row_parts(&col);
            let (rr, ri) = row_parts(&row);
            return dec
                .components
                .par_iter()
                .map(|(m, v)| {
                    let leg = |x: &Mat<T>| if left { apply_left(x, v, dk) } else { apply_right(x, v, dk) };
                    let pm = CMat { re: leg(&cr), im: leg(&ci) };
                    let qm = CMat { re: leg(&rr), im: leg(&ri) };
                    Ok((*m, pm.transpose().mul(&qm).scale(z)))
                })
                .collect();
        }
        dec.components
            .par_iter()
            .map(|(m, v)| {
                // (A (x) B) v
                let w = match sb {
                    Some(z) => CMat { re: v * z.re, im: v * z.im },
                    None => CMat { re: apply_right(&bb.re, v, dk), im: apply_right(&bb.im, v, dk) },
                };
                let w = match sa {
                    Some(z) => w.scale(z),
                    None => {
                        let rr = apply_left(&a.re, &w.re, dk);
                        let ii = apply_left(&a.im, &w.im, dk);
                        let ri = apply_left(&a.re, &w.im, dk);
                        let ir = apply_left(&a.im, &w.re, dk);
                        CMat { re: rr - ii, im: ri + ir }
                    }
                };
                let vt: Mat<T> = v.transpose();
                Ok((*m, CMat::real_mul(&vt, &w)))
            })
            .collect()
    }

    /// Product via fusion: `F_m = sum v_m^* (F_l (x) F_k) v_m`.
    pub fn multiply(&self, x: &FourierElement<T>, y: &FourierElement<T>) -> Result<FourierElement<T>> {
        let mut out = FourierElement::zero();
        for (l, a) in &x.blocks {
            if a.is_zero() {
                continue;
            }
            for (k, bb) in &y.blocks {
                if bb.is_zero() {
                    continue;
                }
                for (m, f) in self.block_product(*l, a, *k, bb)? {
                    match out.blocks.get_mut(&m) {
                        Some(acc) => acc.add_assign(&f),
                        None => {
                            out.blocks.insert(m, f);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `x^*`: each block maps to `T_n^T conj(F) T_n`.
    pub fn adjoint(&self, x: &FourierElement<T>) -> Result<FourierElement<T>> {
        let mut out = FourierElement::zero();
        for (n, f) in &x.blocks {
            let t = self.backend.t_matrix(*n)?;
            let g = CMat::real_mul(&t.transpose(), &f.conj().mul_real(&t));
            out.blocks.insert(*n, g);
        }
        Ok(out)
    }

    /// `<x, y> = h(y^* x) = sum_n Tr(G_n^* F_n) / d_n`.
    pub fn inner_product(&self, x: &FourierElement<T>, y: &FourierElement<T>) -> Complex<T> {
        let mut s = Complex::new(T::zero(), T::zero());
        for (n, f) in &x.blocks {
            if let Some(g) = y.blocks.get(n) {
                s += CMat::tr_adj_mul(g, f) / from_usize::<T>(self.d(*n));
            }
        }
        s
    }

    pub fn norm2(&self, x: &FourierElement<T>) -> T {
        self.inner_product(x, x).re.max(T::zero()).sqrt()
    }

    /// Conditional expectation onto the radial subalgebra.
    pub fn expectation(&self, x: &FourierElement<T>) -> FourierElement<T> {
        FourierElement {
            blocks: x
                .blocks
                .iter()
                .map(|(n, f)| {
                    let d = self.d(*n);
                    (*n, CMat::identity(d).scale(f.trace() / from_usize::<T>(d)))
                })
                .collect(),
        }
    }

    pub fn haar_state(&self, x: &FourierElement<T>) -> Complex<T> {
        x.blocks.get(&0).map(|b| b.get(0, 0)).unwrap_or(Complex::new(T::zero(), T::zero()))
    }

    /// `h(x y)` as `<y, x^*>`.
    pub fn haar_of_product(&self, x: &FourierElement<T>, y: &FourierElement<T>) -> Result<Complex<T>> {
        Ok(self.inner_product(y, &self.adjoint(x)?))
    }

    /// Product of generators `u_{i1 j1} ... u_{ip jp}`.
    pub fn monomial(&self, word: &[(usize, usize)]) -> Result<FourierElement<T>> {
        let mut acc = self.unit();
        for &(i, j) in word {
            acc = self.multiply(&acc, &self.generator(i, j))?;
        }
        Ok(acc)
    }

    /// Checks the character fusion identity `chi_1 chi_n = chi_{n+1} + chi_{n-1}`.
    pub fn character_identity_defect(&self, n: usize) -> Result<f64> {
        let lhs = self.multiply(&self.character(1), &self.character(n))?;
        let mut rhs = self.character(n + 1);
        if n > 0 {
            rhs = rhs.add(&self.character(n - 1));
        }
        Ok(to_f64(lhs.sub(&rhs).max_abs()))
    }
}

/// `h(chi_1^{2m})` by repeated fusion.
pub fn character_moment<T: Real>(alg: &FourierAlgebra<'_, T>, power: usize) -> Result<T> {
    let mut acc = alg.unit();
    let c1 = alg.character(1);
    for _ in 0..power {
        acc = alg.multiply(&acc, &c1)?;
    }
    let h = alg.haar_state(&acc);
    if h.im.abs() > lit(1e-9) {
        return Err(Error::Invariant("h(chi_1^p) not real".into()));
    }
    Ok(h.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::make_params;
    use crate::rep::coupled::CoupledBackend;
    use crate::weingarten::WeingartenOracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn backend() -> CoupledBackend<f64> {
        CoupledBackend::new(make_params(3).unwrap())
    }

    fn random_element(alg: &FourierAlgebra<'_, f64>, max_deg: usize, rng: &mut ChaCha8Rng) -> FourierElement<f64> {
        let mut x = FourierElement::zero();
        for n in 0..=max_deg {
            let d = alg.d(n);
            x.blocks.insert(n, CMat::from_fn(d, d, |_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
        }
        x
    }

    #[test]
    fn character_identities() {
        let b = backend();
        let alg = FourierAlgebra::new(&b);
        for n in 0..=5 {
            assert!(alg.character_identity_defect(n).unwrap() < 1e-9);
            assert!((alg.norm2(&alg.character(n)) - 1.0).abs() < 1e-14);
            for m in 0..=5 {
                let ip = alg.inner_product(&alg.character(n), &alg.character(m));
                assert!((ip.re - if n == m { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn coefficient_orthogonality() {
        let b = backend();
        let alg = FourierAlgebra::new(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 0..=3 {
            let d = alg.d(n);
            let mut v = || HVec::new(n, (0..d).map(|_| Complex::new(rng.random::<f64>(), rng.random::<f64>())).collect());
            let (x, y, x2, y2) = (v(), v(), v(), v());
            let lhs = alg.inner_product(&alg.coefficient(&x, &y).unwrap(), &alg.coefficient(&x2, &y2).unwrap());
            let rhs = x.inner(&x2) * y2.inner(&y) / d as f64;
            assert!((lhs - rhs).norm() < 1e-12);
        }
        let e = |i| HVec::<f64>::basis(1, 3, i);
        let mut sum = FourierElement::zero();
        for i in 0..3 {
            sum = sum.add(&alg.coefficient(&e(i), &e(i)).unwrap());
        }
        assert_eq!(sum, alg.character(1));
    }

    #[test]
    fn associativity_and_unit() {
        let b = backend();
        let alg = FourierAlgebra::new(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (x, y, z) = (random_element(&alg, 2, &mut rng), random_element(&alg, 2, &mut rng), random_element(&alg, 1, &mut rng));
            let l = alg.multiply(&alg.multiply(&x, &y).unwrap(), &z).unwrap();
            let r = alg.multiply(&x, &alg.multiply(&y, &z).unwrap()).unwrap();
            assert!(l.sub(&r).max_abs() < 1e-9);
            assert!(alg.multiply(&x, &alg.unit()).unwrap().sub(&x).max_abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_and_traciality() {
        let b = backend();
        let alg = FourierAlgebra::new(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let x = random_element(&alg, 3, &mut rng);
            let y = random_element(&alg, 2, &mut rng);
            let xs = alg.adjoint(&x).unwrap();
            assert!(alg.adjoint(&xs).unwrap().sub(&x).max_abs() < 1e-10);
            let lhs = alg.inner_product(&xs, &alg.adjoint(&y).unwrap());
            assert!((lhs - alg.inner_product(&y, &x)).norm() < 1e-10);
            let hxy = alg.haar_state(&alg.multiply(&x, &y).unwrap());
            let hyx = alg.haar_state(&alg.multiply(&y, &x).unwrap());
            assert!((hxy - hyx).norm() < 1e-10);
            let n2 = alg.haar_state(&alg.multiply(&xs, &x).unwrap());
            assert!((n2.re - alg.inner_product(&x, &x).re).abs() < 1e-12 * n2.re.max(1.0));
        }
        assert!(alg.adjoint(&alg.character(3)).unwrap().sub(&alg.character(3)).max_abs() < 1e-12);
    }

    #[test]
    fn expectation_properties() {
        let b = backend();
        let alg = FourierAlgebra::new(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let x = random_element(&alg, 3, &mut rng);
            let y = random_element(&alg, 3, &mut rng);
            let ex = alg.expectation(&x);
            assert!(alg.expectation(&ex).sub(&ex).max_abs() < 1e-14);
            let l = alg.inner_product(&ex, &y);
            let r = alg.inner_product(&x, &alg.expectation(&y));
            assert!((l - r).norm() < 1e-12);
            assert!(alg.norm2(&ex) <= alg.norm2(&x) + 1e-14);
            for n in 0..=3 {
                assert!(alg.inner_product(&x.sub(&ex), &alg.character(n)).norm() < 1e-12);
            }
        }
        let c = alg.coefficient(&HVec::basis(2, 8, 0), &HVec::basis(2, 8, 1)).unwrap();
        assert!(alg.expectation(&c).max_abs() < 1e-15);
    }

    #[test]
    fn low_degree_weingarten_agreement() {
        let b = backend();
        let alg = FourierAlgebra::new(&b);
        let o = WeingartenOracle::new(3).unwrap();
        let words = [vec![(0, 1), (0, 1)], vec![(0, 0), (1, 1), (0, 0), (1, 1)], vec![(0, 1), (1, 0), (1, 0), (0, 1)]];
        for w in words {
            let f = alg.haar_state(&alg.monomial(&w).unwrap());
            let e = o.haar_moment_f64(&w).unwrap();
            assert!((f.re - e).abs() < 1e-10 && f.im.abs() < 1e-12, "{w:?}: {f} vs {e}");
        }
        assert!((character_moment(&alg, 4).unwrap() - 2.0).abs() < 1e-10);
        assert!((character_moment(&alg, 6).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn rank_one_fast_path_is_linear_consistent() {
        let b = backend();
        let alg = FourierAlgebra::new(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d2 = alg.d(2);
        let v = |rng: &mut ChaCha8Rng| HVec::new(2, (0..d2).map(|_| Complex::new(rng.random::<f64>(), rng.random::<f64>())).collect());
        let c = alg.coefficient(&v(&mut rng), &v(&mut rng)).unwrap();
        let mut e = CMat::<f64>::zeros(3, 3);
        e.set(0, 1, Complex::new(0.7, -0.2));
        let pert = FourierElement::single(1, e);
        let full = FourierElement::single(1, CMat::identity(3)).add(&pert);
        for (x, y) in [(&full, &c), (&c, &full)] {
            let generic = alg.multiply(x, y).unwrap();
            let split = if std::ptr::eq(x, &full) {
                alg.multiply(&alg.character(1), &c).unwrap().add(&alg.multiply(&pert, &c).unwrap())
            } else {
                alg.multiply(&c, &alg.character(1)).unwrap().add(&alg.multiply(&c, &pert).unwrap())
            };
            assert!(generic.sub(&split).max_abs() < 1e-12);
        }
    }

    #[test]
    fn haar_state_basics() {
        let b = backend();
        let alg = FourierAlgebra::new(&b);
        assert_eq!(alg.haar_state(&alg.unit()).re, 1.0);
        for n in 1..4 {
            assert_eq!(alg.haar_state(&alg.character(n)).norm(), 0.0);
        }
    }
}
