//! Backend-independent operations written against the canonical isometries
//! `top(l, k)` and the invariant-vector matrices `T_n`.

use num_complex::Complex;

use crate::error::{cap_check, Error, Result};
use crate::linalg::{apply_right, CMat, Mat};
use crate::rep::{channel_check, entries_check, HVec, KappaReport, OperatorBlock, RepBackend};
use crate::scalar::{from_usize, to_f64, Real};

/// `V^* = P_m (id_{l-a} (x) t_a^* (x) id_{k-a})` as a `d_m x d_l d_k` matrix.
pub fn intertwiner_adjoint<T: Real>(b: &dyn RepBackend<T>, l: usize, k: usize, m: usize) -> Result<Mat<T>> {
    let a = channel_check(l, k, m)?;
    if a == 0 {
        return Ok(b.top(l, k)?.transpose());
    }
    let (dl, dk, da) = (b.dim(l), b.dim(k), b.dim(a));
    let (dla, dka) = (b.dim(l - a), b.dim(k - a));
    cap_check(|| format!("intertwiner ({l},{k})->{m} d_l*d_k"), (dl * dk) as u128, b.caps().coupled_dim)?;
    entries_check(|| format!("intertwiner ({l},{k})->{m}"), dla * dka, dl * dk, b.caps())?;
    let ta = b.t_matrix(a)?;
    let left = b.top(l - a, a)?;
    let right = b.top(a, k - a)?;
    let proj = b.top(l - a, k - a)?;
    // rows (p, d) of (I (x) T_a^T) top(l-a, a)
    let lt = apply_right(&ta.transpose(), &left, da);
    // B2[d, y*dka + r] = top(a, k-a)[(d, r), y]
    let b2 = Mat::from_fn(da, dka * dk, |d, col| right[(d * dka + col % dka, col / dka)]);
    let mut r = Mat::<T>::zeros(dla * dka, dl * dk);
    for x in 0..dl {
        let gx = nalgebra::DMatrixView::from_slice(&lt.as_slice()[x * dla * da..(x + 1) * dla * da], da, dla);
        let mx = gx.transpose() * &b2;
        for y in 0..dk {
            for p in 0..dla {
                for rr in 0..dka {
                    r[(p * dka + rr, x * dk + y)] = mx[(p, y * dka + rr)];
                }
            }
        }
    }
    Ok(proj.transpose() * r)
}

/// `kappa` from the explicit `V^*`, checking that `V^* V` is scalar.
pub fn kappa_direct<T: Real>(b: &dyn RepBackend<T>, l: usize, k: usize, m: usize) -> Result<KappaReport> {
    let vs = intertwiner_adjoint(b, l, k, m)?;
    let g = &vs * vs.transpose();
    let dm = b.dim(m);
    let c = g.trace() / from_usize::<T>(dm);
    let mut res = T::zero();
    for j in 0..dm {
        for i in 0..dm {
            let e = if i == j { g[(i, j)] - c } else { g[(i, j)] };
            res = res.max(e.abs() / c);
        }
    }
    Ok(KappaReport { l, k, m, c: to_f64(c), kappa: 1.0 / to_f64(c).sqrt(), scalarity_residual: to_f64(res) })
}

/// Conjugation `j_n(xi) = T_n^T conj(xi)`.
pub fn conjugate<T: Real>(b: &dyn RepBackend<T>, xi: &HVec<T>) -> Result<HVec<T>> {
    let t = b.t_matrix(xi.n)?;
    let d = t.nrows();
    if xi.coords.len() != d {
        return Err(Error::Precondition(format!("vector length {} != d_{} = {d}", xi.coords.len(), xi.n)));
    }
    let coords = (0..d)
        .map(|c| (0..d).fold(Complex::new(T::zero(), T::zero()), |acc, a| acc + xi.coords[a].conj() * t[(a, c)]))
        .collect();
    Ok(HVec { n: xi.n, coords })
}

/// `rho(f) = (P_k (x) t_1^*)(id_1 (x) f (x) id_1)(t_1 (x) P_k)` on `H_k`, `k >= 1`.
pub fn rotate<T: Real>(b: &dyn RepBackend<T>, k: usize, f: &CMat<T>) -> Result<CMat<T>> {
    if k == 0 {
        return Err(Error::Precondition("rotation needs k >= 1".into()));
    }
    let nn = b.params().N();
    let dk = b.dim(k);
    let dp = b.dim(k - 1);
    if f.nrows() != dk || f.ncols() != dk {
        return Err(Error::Precondition(format!("operator is {}x{}, expected {dk}x{dk}", f.nrows(), f.ncols())));
    }
    let v = b.top(1, k - 1)?;
    let c = b.top(k - 1, 1)?;
    // G = C f v^T with rows (b, j), cols (i, a)
    let g = CMat::real_mul(&c, &f.mul_real(&v.transpose()));
    let mut m = CMat::<T>::zeros(nn * dp, dp * nn);
    for i in 0..nn {
        for bb in 0..dp {
            for a in 0..dp {
                for j in 0..nn {
                    m.set(i * dp + bb, a * nn + j, g.get(bb * nn + j, i * dp + a));
                }
            }
        }
    }
    Ok(CMat::real_mul(&v.transpose(), &m.mul_real(&c)))
}

/// `x_{a,b,c} = (id_a (x) tr_b (x) id_c)(P_{a+b+c})` on `H_a (x) H_c`.
pub fn partial_trace_x<T: Real>(b: &dyn RepBackend<T>, a: usize, bb: usize, c: usize) -> Result<OperatorBlock<T>> {
    let (da, db, dc) = (b.dim(a), b.dim(bb), b.dim(c));
    cap_check(|| format!("partial trace d_a d_b d_c for ({a},{bb},{c})"), (da * db * dc) as u128, b.caps().coupled_dim)?;
    let inner = b.top(bb, c)?;
    let outer = b.top(a, bb + c)?;
    let u = apply_right(&inner, &outer, b.dim(bb + c));
    let dm = u.ncols();
    let mut x = Mat::<T>::zeros(da * dc, da * dc);
    for y in 0..db {
        let uy = Mat::from_fn(da * dc, dm, |r, col| {
            let (xx, z) = (r / dc, r % dc);
            u[((xx * db + y) * dc + z, col)]
        });
        x.gemm(T::one(), &uy, &uy.transpose(), T::one());
    }
    x /= b.params().dim(bb);
    Ok(OperatorBlock { domain: vec![a, c], codomain: vec![a, c], matrix: CMat::from_real(x) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::make_params;
    use crate::rep::coupled::CoupledBackend;
    use crate::rep::tensor::TensorBackend;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coupled() -> CoupledBackend<f64> {
        CoupledBackend::new(make_params(3).unwrap())
    }

    fn rnd_c(d: usize, rng: &mut ChaCha8Rng) -> CMat<f64> {
        CMat::from_fn(d, d, |_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    /// Theta-net evaluation: `c = theta(a, l-a, k-a) / d_m`.
    fn theta_c(p: &crate::qcore::QParams<f64>, l: usize, k: usize, m: usize) -> f64 {
        let fact = |n: usize| (1..=n).map(|i| p.dim(i - 1)).product::<f64>();
        let a = (l + k - m) / 2;
        let (i, j, kk) = (a, l - a, k - a);
        let th = fact(i + j + kk + 1) * fact(i) * fact(j) * fact(kk) / (fact(i + j) * fact(j + kk) * fact(i + kk));
        th / p.dim(m)
    }

    #[test]
    fn kappa_matches_theta_net() {
        let b = coupled();
        let t = TensorBackend::new(make_params::<f64>(3).unwrap());
        for (l, k) in [(1, 1), (2, 2), (3, 2), (3, 3), (4, 2)] {
            for m in crate::rep::fusion_channels(l, k) {
                let want = theta_c(b.params(), l, k, m);
                let r = b.kappa(l, k, m).unwrap();
                assert!((r.c - want).abs() < 1e-8 * want, "coupled ({l},{k},{m}) {} vs {want}", r.c);
                assert!(r.scalarity_residual < 1e-8);
                let r2 = t.kappa(l, k, m).unwrap();
                assert!((r2.c - want).abs() < 1e-8 * want, "tensor ({l},{k},{m}) {} vs {want}", r2.c);
            }
        }
        assert!((b.kappa(1, 1, 0).unwrap().kappa - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn conjugation_antiunitary_involutive() {
        let b = coupled();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 0..=4 {
            let d = b.dim(n);
            let mk = |rng: &mut ChaCha8Rng| {
                HVec::new(n, (0..d).map(|_| Complex::new(rng.random::<f64>(), rng.random::<f64>())).collect())
            };
            let (x, y) = (mk(&mut rng), mk(&mut rng));
            let (cx, cy) = (conjugate(&b, &x).unwrap(), conjugate(&b, &y).unwrap());
            assert!((cx.norm() - x.norm()).abs() < 1e-10);
            assert!((cx.inner(&cy) - y.inner(&x)).norm() < 1e-10);
            let ccx = conjugate(&b, &cx).unwrap();
            assert!(ccx.coords.iter().zip(&x.coords).all(|(a, b)| (a - b).norm() < 1e-10));
        }
        let e1 = HVec::<f64>::basis(1, 3, 0);
        assert_eq!(conjugate(&b, &e1).unwrap(), e1);
        let ie1 = e1.scale(Complex::new(0.0, 1.0));
        assert_eq!(conjugate(&b, &ie1).unwrap(), e1.scale(Complex::new(0.0, -1.0)));
    }

    #[test]
    fn t_vector_basis_independent() {
        // t_n = sum_i e_i (x) conj(e_i) for any orthonormal basis
        let b = coupled();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=4 {
            let d = b.dim(n);
            let z = rnd_c(d, &mut rng);
            let m = nalgebra::DMatrix::from_fn(d, d, |i, j| nalgebra::Complex::new(z.re[(i, j)], z.im[(i, j)]));
            let qm = m.qr().q();
            let mut acc = CMat::<f64>::zeros(d, d);
            for i in 0..d {
                let e = HVec::new(n, (0..d).map(|r| Complex::new(qm[(r, i)].re, qm[(r, i)].im)).collect());
                let ce = conjugate(&b, &e).unwrap();
                for r in 0..d {
                    for s in 0..d {
                        let v = acc.get(r, s) + e.coords[r] * ce.coords[s];
                        acc.set(r, s, v);
                    }
                }
            }
            let t = b.t_matrix(n).unwrap();
            assert!(acc.sub(&CMat::from_real((*t).clone())).max_abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_trace_and_contraction() {
        let b = coupled();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..=4 {
            let d = b.dim(k);
            for _ in 0..10 {
                let f = rnd_c(d, &mut rng);
                let r = rotate(&b, k, &f).unwrap();
                let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
                let want = f.trace() * sign / b.params().dim(k - 1);
                assert!((r.trace() - want).norm() < 1e-9);
                assert!(r.hs_norm() <= f.hs_norm() + 1e-12);
            }
        }
        let f = CMat::<f64>::identity(3);
        assert!((rotate(&b, 1, &f).unwrap().trace().re - 3.0).abs() < 1e-12);
        assert!(rotate(&b, 2, &CMat::zeros(8, 8)).unwrap().is_zero());
    }

    #[test]
    fn partial_trace_examples() {
        let b = coupled();
        let x = partial_trace_x(&b, 2, 3, 0).unwrap().matrix;
        let want = b.params().dim(5) / (b.params().dim(2) * b.params().dim(3));
        assert!(x.sub(&CMat::identity(8).scale_real(want)).max_abs() < 1e-10);
        let x = partial_trace_x(&b, 1, 1, 1).unwrap().matrix;
        let s = x.trace().re / 9.0;
        assert!(x.sub(&CMat::identity(9).scale_real(s)).hs_norm() > 0.01);
        assert!(x.sub(&x.adjoint()).max_abs() < 1e-12);
        let x0 = partial_trace_x(&b, 1, 0, 1).unwrap().matrix;
        let top = b.top(1, 1).unwrap();
        assert!((x0.re - &*top * top.transpose()).abs().max() < 1e-12);
    }
}
