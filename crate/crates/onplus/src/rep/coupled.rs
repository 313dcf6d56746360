//! Coupled-basis realization: `H_n` sits inside `H_{n-1} (x) H_1` as the
//! orthocomplement of the image of `H_{n-2}` under the normalized cup map.

use std::sync::Arc;

use crate::error::{cap_check, Result};
use crate::linalg::{apply_left, apply_right, orthonormality_defect, pivoted_cholesky, Mat};
use crate::qcore::QParams;
use crate::rep::{
    entries_check, fix_phase, fusion_channels, BackendKind, Cache, Caps, CgDecomposition, KappaReport, RepBackend,
    RepBasis,
};
use crate::scalar::{from_usize, to_f64, Real};

pub struct CoupledBackend<T: Real> {
    p: QParams<T>,
    caps: Caps,
    cn: Cache<usize, Mat<T>>,
    tops: Cache<(usize, usize), Mat<T>>,
    ts: Cache<usize, Mat<T>>,
    decs: Cache<(usize, usize), CgDecomposition<T>>,
}

impl<T: Real> CoupledBackend<T> {
    pub fn new(p: QParams<T>) -> Self {
        Self::with_caps(p, Caps::default())
    }

    pub fn with_caps(p: QParams<T>, caps: Caps) -> Self {
        CoupledBackend { p, caps, cn: Cache::new(), tops: Cache::new(), ts: Cache::new(), decs: Cache::new() }
    }

    fn d(&self, n: usize) -> usize {
        self.p.dim_usize(n)
    }

    fn t1(&self) -> Mat<T> {
        let n = self.p.N();
        Mat::from_fn(n * n, 1, |i, _| if i / n == i % n { T::one() } else { T::zero() })
    }

    /// `W = (C_{n-1}^T (x) I)(I_{d_{n-2}} (x) t_1)`: the cup map `H_{n-2} -> H_{n-1} (x) H_1`.
    fn cup_map(&self, n: usize) -> Result<Mat<T>> {
        let nn = self.p.N();
        let dm2 = self.d(n - 2);
        let id_t = Mat::<T>::identity(dm2, dm2).kronecker(&self.t1());
        let cprev = self.c(n - 1)?;
        Ok(apply_left(&cprev.transpose(), &id_t, nn))
    }

    /// `C_n : H_n -> H_{n-1} (x) H_1`.
    pub fn c(&self, n: usize) -> Result<Arc<Mat<T>>> {
        self.cn.get_or_try(n, || {
            let nn = self.p.N();
            if n == 0 {
                return Ok(Mat::identity(1, 1));
            }
            if n == 1 {
                return Ok(Mat::identity(nn, nn));
            }
            let amb = self.d(n - 1) * nn;
            cap_check(|| format!("coupled basis H_{n} ambient d_{}*N", n - 1), amb as u128, self.caps.coupled_dim)?;
            entries_check(|| format!("coupled basis H_{n}"), amb, amb, &self.caps)?;
            let w = self.cup_map(n)?;
            let ratio: T = self.p.dim(n - 2) / self.p.dim(n - 1);
            let proj = Mat::<T>::identity(amb, amb) - &w * w.transpose() * ratio;
            pivoted_cholesky(&proj, self.d(n), 1e-8, &format!("coupled H_{n}"))
        })
    }
}

impl<T: Real> RepBackend<T> for CoupledBackend<T> {
    fn kind(&self) -> BackendKind {
        BackendKind::Coupled
    }

    fn params(&self) -> &QParams<T> {
        &self.p
    }

    fn caps(&self) -> &Caps {
        &self.caps
    }

    fn basis(&self, n: usize) -> Result<RepBasis<T>> {
        Ok(RepBasis { n, backend: BackendKind::Coupled, isometry: self.c(n)? })
    }

    fn top(&self, l: usize, k: usize) -> Result<Arc<Mat<T>>> {
        self.tops.get_or_try((l, k), || {
            if k == 0 || l == 0 {
                let d = self.d(l + k);
                return Ok(Mat::identity(d, d));
            }
            let (dl, dk) = (self.d(l), self.d(k));
            cap_check(|| format!("top({l},{k}) d_l*d_k"), (dl * dk) as u128, self.caps.coupled_dim)?;
            entries_check(|| format!("top({l},{k})"), dl * dk, self.d(l + k), &self.caps)?;
            let nn = self.p.N();
            let up = self.top(l, k - 1)?;
            let c = self.c(l + k)?;
            let a = apply_left(&up, &c, nn);
            let ck = self.c(k)?;
            Ok(apply_right(&ck.transpose(), &a, self.d(k - 1) * nn))
        })
    }

    fn t_matrix(&self, n: usize) -> Result<Arc<Mat<T>>> {
        self.ts.get_or_try(n, || {
            if n == 0 {
                return Ok(Mat::identity(1, 1));
            }
            let nn = self.p.N();
            let (dn, dp) = (self.d(n), self.d(n - 1));
            let tp = self.t_matrix(n - 1)?;
            let a = self.c(n)?;
            let b = self.top(1, n - 1)?;
            // T_n[c,e] = sum_{a,i,b} C_n[(a,i),c] top(1,n-1)[(i,b),e] T_{n-1}[a,b]
            let mut out = Mat::zeros(dn, dn);
            let mut x = Mat::<T>::zeros(nn * dp, dn);
            let bt = apply_right(&tp, &b, dp);
            for e in 0..dn {
                for i in 0..nn {
                    for ai in 0..dp {
                        x[(ai * nn + i, e)] = bt[(i * dp + ai, e)];
                    }
                }
            }
            out.gemm(T::one(), &a.transpose(), &x, T::zero());
            Ok(out)
        })
    }

    fn decompose(&self, l: usize, k: usize) -> Result<Arc<CgDecomposition<T>>> {
        self.decs.get_or_try((l, k), || {
            let (dl, dk) = (self.d(l), self.d(k));
            cap_check(|| format!("decompose({l},{k}) d_l*d_k"), (dl * dk) as u128, self.caps.coupled_dim)?;
            let nn = self.p.N();
            let comps: Vec<(usize, Mat<T>)> = if k == 0 {
                vec![(l, Mat::identity(dl, dl))]
            } else if k == 1 {
                let mut v = Vec::new();
                if l >= 1 {
                    let w = self.cup_map(l + 1)?;
                    let s: T = (self.p.dim(l) / self.p.dim(l - 1)).sqrt();
                    v.push((l - 1, w / s));
                }
                v.push((l + 1, (*self.c(l + 1)?).clone()));
                v
            } else {
                let prev = self.decompose(l, k - 1)?;
                let ck = self.c(k)?;
                let mut best: Vec<(usize, Mat<T>, T)> = Vec::new();
                for (mp, u) in &prev.components {
                    let one = self.decompose(*mp, 1)?;
                    for (m, v) in &one.components {
                        if !fusion_channels(l, k).any(|x| x == *m) {
                            continue;
                        }
                        let a = apply_left(u, v, nn);
                        let a = apply_right(&ck.transpose(), &a, self.d(k - 1) * nn);
                        let c = a.norm_squared() / from_usize::<T>(self.d(*m));
                        if to_f64(c) <= 1e-12 {
                            continue;
                        }
                        match best.iter_mut().find(|b| b.0 == *m) {
                            Some(b) if b.2 >= c => {}
                            Some(b) => *b = (*m, a, c),
                            None => best.push((*m, a, c)),
                        }
                    }
                }
                best.sort_by_key(|b| b.0);
                best.into_iter().map(|(m, a, c)| (m, a / c.sqrt())).collect()
            };
            let mut comps = comps;
            for (_, u) in comps.iter_mut() {
                fix_phase(u);
            }
            comps.sort_by_key(|c| c.0);
            Ok(CgDecomposition { l, k, components: comps })
        })
    }

    fn kappa(&self, l: usize, k: usize, m: usize) -> Result<KappaReport> {
        crate::rep::ops::kappa_direct(self, l, k, m)
    }
}

impl<T: Real> CoupledBackend<T> {
    /// `max |C_n^T C_n - I|`.
    pub fn basis_defect(&self, n: usize) -> Result<f64> {
        Ok(to_f64(orthonormality_defect(&*self.c(n)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::make_params;

    fn backend() -> CoupledBackend<f64> {
        CoupledBackend::new(make_params(3).unwrap())
    }

    #[test]
    fn basis_shapes_and_orthonormality() {
        let b = backend();
        assert_eq!(b.c(1).unwrap().shape(), (3, 3));
        assert_eq!(b.c(2).unwrap().shape(), (9, 8));
        for n in 0..=7 {
            assert!(b.basis_defect(n).unwrap() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn basis_annihilates_cups() {
        let b = backend();
        for n in 2..=6 {
            let w = b.cup_map(n).unwrap();
            let c = b.c(n).unwrap();
            assert!((w.transpose() * &*c).abs().max() < 1e-10);
        }
    }

    #[test]
    fn decompositions_complete() {
        let b = backend();
        for (l, k) in [(1, 1), (2, 2), (3, 2), (0, 3), (4, 1), (3, 3)] {
            let d = b.decompose(l, k).unwrap();
            let ms: Vec<usize> = d.components.iter().map(|c| c.0).collect();
            assert_eq!(ms, fusion_channels(l, k).collect::<Vec<_>>());
            let tot: usize = ms.iter().map(|&m| b.d(m)).sum();
            assert_eq!(tot, b.d(l) * b.d(k));
            let (o, c) = d.residuals();
            assert!(o < 1e-9 && c < 1e-9, "l={l} k={k} {o} {c}");
        }
        let d = b.decompose(0, 3).unwrap();
        assert!((d.components[0].1.clone() - Mat::identity(21, 21)).abs().max() < 1e-12);
    }

    #[test]
    fn t_vectors() {
        let b = backend();
        for n in 0..=6 {
            let t = b.t_matrix(n).unwrap();
            assert!((t.norm_squared() - b.p.dim(n)).abs() < 1e-8);
            let tt = &*t * t.transpose();
            assert!((tt - Mat::identity(b.d(n), b.d(n))).abs().max() < 1e-10);
        }
        let t1 = b.t_matrix(1).unwrap();
        assert!((&*t1 - Mat::identity(3, 3)).abs().max() < 1e-14);
    }

    #[test]
    fn caps_enforced() {
        let caps = Caps { coupled_dim: 100, ..Caps::default() };
        let b = CoupledBackend::with_caps(make_params::<f64>(3).unwrap(), caps);
        assert!(matches!(b.decompose(3, 3), Err(crate::Error::CapExceeded { .. })));
    }
}
