//! The key estimate `S(l, l') = <chi_l u^k_{xi' eta'}, u^n_{xi eta} chi_{l'}>`,
//! the mixing sum and the spectral density built from it.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{fit_decay, rate_within, Check, DecayReport, RATE_TOL};
use crate::fourier::{FourierAlgebra, FourierElement};
use crate::linalg::{apply_left, apply_right, CMat, Mat};
use crate::qcore::{chebyshev_all, semicircle_integral};
use crate::rep::ops::{conjugate, intertwiner_adjoint};
use crate::rep::{fusion_channels, Cache, HVec, RepBackend};
use crate::scalar::{from_usize, lit, to_f64, Real};

/// `xi, eta in H_n` and `xi', eta' in H_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyVectors<T: Real> {
    pub label: String,
    pub xi: HVec<T>,
    pub eta: HVec<T>,
    pub xi2: HVec<T>,
    pub eta2: HVec<T>,
}

fn random_orthonormal<T: Real>(n: usize, d: usize, rng: &mut ChaCha8Rng) -> (HVec<T>, HVec<T>) {
    let mut draw = || -> Vec<Complex<f64>> { (0..d).map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect() };
    let norm = |v: &[Complex<f64>]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut x = draw();
    let nx = norm(&x);
    x.iter_mut().for_each(|z| *z /= nx);
    let mut y = draw();
    let ip: Complex<f64> = y.iter().zip(&x).map(|(a, b)| a * b.conj()).sum();
    y.iter_mut().zip(&x).for_each(|(a, b)| *a -= ip * b);
    let ny = norm(&y);
    y.iter_mut().for_each(|z| *z /= ny);
    let conv = |v: Vec<Complex<f64>>| HVec::new(n, v.into_iter().map(|z| Complex::new(lit(z.re), lit(z.im))).collect());
    (conv(x), conv(y))
}

impl<T: Real> KeyVectors<T> {
    /// `xi = e_1, eta = e_2` and the same pair in `H_k`.
    pub fn basis_pair(b: &dyn RepBackend<T>, n: usize, k: usize) -> Self {
        let (dn, dk) = (b.dim(n), b.dim(k));
        KeyVectors {
            label: "e1,e2".into(),
            xi: HVec::basis(n, dn, 0),
            eta: HVec::basis(n, dn, 1),
            xi2: HVec::basis(k, dk, 0),
            eta2: HVec::basis(k, dk, 1),
        }
    }

    /// Negative control `xi = eta = e_1`, `xi' = eta' = e_1`.
    pub fn diagonal_control(b: &dyn RepBackend<T>, n: usize, k: usize) -> Self {
        let (dn, dk) = (b.dim(n), b.dim(k));
        KeyVectors {
            label: "control e1,e1".into(),
            xi: HVec::basis(n, dn, 0),
            eta: HVec::basis(n, dn, 0),
            xi2: HVec::basis(k, dk, 0),
            eta2: HVec::basis(k, dk, 0),
        }
    }

    /// Random orthonormal pair in `H_n`; reused in `H_k` when `n = k`.
    pub fn random_pair(b: &dyn RepBackend<T>, n: usize, k: usize, rng: &mut ChaCha8Rng, label: String) -> Self {
        let (xi, eta) = random_orthonormal(n, b.dim(n), rng);
        let (xi2, eta2) = if n == k { (xi.clone(), eta.clone()) } else { random_orthonormal(k, b.dim(k), rng) };
        KeyVectors { label, xi, eta, xi2, eta2 }
    }

    pub fn n(&self) -> usize {
        self.xi.n
    }

    pub fn k(&self) -> usize {
        self.xi2.n
    }

    pub fn validate(&self, b: &dyn RepBackend<T>, require_orthogonal: bool) -> Result<()> {
        if self.eta.n != self.xi.n || self.eta2.n != self.xi2.n {
            return Err(Error::Precondition("vector pairs must share a label".into()));
        }
        for v in [&self.xi, &self.eta, &self.xi2, &self.eta2] {
            if v.coords.len() != b.dim(v.n) {
                return Err(Error::Precondition(format!("vector in H_{} has length {}", v.n, v.coords.len())));
            }
            if (to_f64(v.norm()) - 1.0).abs() > 1e-12 {
                return Err(Error::Precondition(format!("vector in H_{} is not a unit vector", v.n)));
            }
        }
        let ip = self.xi.inner(&self.eta);
        if require_orthogonal && to_f64(ip.norm_sqr()).sqrt() > 1e-12 {
            return Err(Error::Precondition("<xi, eta> must vanish".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEstimate {
    pub l: usize,
    pub l2: usize,
    pub direct: (f64, f64),
    pub formula: (f64, f64),
    /// `(m, S^m)` with `S = sum_m S^m / d_m`.
    pub per_m: Vec<(usize, (f64, f64))>,
}

fn pair<T: Real>(z: Complex<T>) -> (f64, f64) {
    (to_f64(z.re), to_f64(z.im))
}

fn row<T: Real>(v: &[Complex<T>]) -> (Mat<T>, Mat<T>) {
    (Mat::from_fn(1, v.len(), |_, j| v[j].re), Mat::from_fn(1, v.len(), |_, j| v[j].im))
}

/// Evaluates `S(l, l')` along the Fourier product and the per-channel formula.
pub struct KeyEngine<'a, T: Real> {
    backend: &'a dyn RepBackend<T>,
    alg: FourierAlgebra<'a, T>,
    vstar_t: Cache<(usize, usize, usize), Mat<T>>,
}

impl<'a, T: Real> KeyEngine<'a, T> {
    pub fn new(backend: &'a dyn RepBackend<T>) -> Self {
        KeyEngine { backend, alg: FourierAlgebra::new(backend), vstar_t: Cache::new() }
    }

    pub fn backend(&self) -> &dyn RepBackend<T> {
        self.backend
    }

    /// Transpose of the isometric `v^* = kappa V^*` for the channel `m` of `l (x) k`.
    fn vt(&self, l: usize, k: usize, m: usize) -> Result<Arc<Mat<T>>> {
        self.vstar_t.get_or_try((l, k, m), || {
            let c = lit::<T>(self.backend.kappa(l, k, m)?.c);
            Ok(intertwiner_adjoint(self.backend, l, k, m)?.transpose() / c.sqrt())
        })
    }

    /// `S^m = Tr((X'^* X) T_l (Y^T conj Y') T_{l'}^T)` where `Y`, `Y'` carry the
    /// conjugate vectors `j(eta')`, `j(eta)`.
    fn s_channel(&self, v: &KeyVectors<T>, l: usize, l2: usize, m: usize) -> Result<Complex<T>> {
        let b = self.backend;
        let (n, k) = (v.n(), v.k());
        let (dl, dk, dn, dl2) = (b.dim(l), b.dim(k), b.dim(n), b.dim(l2));
        let both = |x: &(Mat<T>, Mat<T>), f: &dyn Fn(&Mat<T>) -> Mat<T>| CMat { re: f(&x.0), im: f(&x.1) };
        let jeta2 = conjugate(b, &v.eta2)?;
        let jeta = conjugate(b, &v.eta)?;
        let vlk = self.vt(l, k, m)?;
        let xt = both(&row(&v.xi2.coords), &|r| apply_right(r, &vlk, dk));
        let vkl = self.vt(k, l, m)?;
        let yt = both(&row(&jeta2.coords), &|r| apply_left(r, &vkl, dl));
        let vnl = self.vt(n, l2, m)?;
        let x2t = both(&row(&v.xi.coords), &|r| apply_left(r, &vnl, dl2));
        let vln = self.vt(l2, n, m)?;
        let y2t = both(&row(&jeta.coords), &|r| apply_right(r, &vln, dn));
        let g1 = x2t.conj().mul(&xt.transpose());
        let g2 = yt.mul(&y2t.conj().transpose());
        let (tl, tl2) = (b.t_matrix(l)?, b.t_matrix(l2)?);
        let prod = g1.mul_real(&tl).mul(&g2).mul_real(&tl2.transpose());
        Ok(prod.trace())
    }

    /// Per-channel evaluation of `S(l, l')`.
    pub fn s_formula(&self, v: &KeyVectors<T>, l: usize, l2: usize) -> Result<(Complex<T>, Vec<(usize, Complex<T>)>)> {
        let right: Vec<usize> = fusion_channels(v.n(), l2).collect();
        let mut total = Complex::new(T::zero(), T::zero());
        let mut per = Vec::new();
        for m in fusion_channels(l, v.k()).filter(|m| right.contains(m)) {
            let sm = self.s_channel(v, l, l2, m)?;
            total += sm / from_usize::<T>(self.backend.dim(m));
            per.push((m, sm));
        }
        Ok((total, per))
    }

    /// `chi_l u^k_{xi' eta'}` for `l <= l_max`.
    pub fn left_products(&self, v: &KeyVectors<T>, l_max: usize) -> Result<Vec<FourierElement<T>>> {
        let c = self.alg.coefficient(&v.xi2, &v.eta2)?;
        (0..=l_max).map(|l| self.alg.multiply(&self.alg.character(l), &c)).collect()
    }

    /// `u^n_{xi eta} chi_{l'}` for `l' <= l_max`.
    pub fn right_products(&self, v: &KeyVectors<T>, l_max: usize) -> Result<Vec<FourierElement<T>>> {
        let c = self.alg.coefficient(&v.xi, &v.eta)?;
        (0..=l_max).map(|l| self.alg.multiply(&c, &self.alg.character(l))).collect()
    }

    /// `S(l, l')` along both routes.
    pub fn key_estimate_s(&self, v: &KeyVectors<T>, l: usize, l2: usize) -> Result<KeyEstimate> {
        v.validate(self.backend, true)?;
        let c1 = self.alg.coefficient(&v.xi2, &v.eta2)?;
        let c2 = self.alg.coefficient(&v.xi, &v.eta)?;
        let left = self.alg.multiply(&self.alg.character(l), &c1)?;
        let right = self.alg.multiply(&c2, &self.alg.character(l2))?;
        let direct = self.alg.inner_product(&left, &right);
        let (formula, per) = self.s_formula(v, l, l2)?;
        Ok(KeyEstimate {
            l,
            l2,
            direct: pair(direct),
            formula: pair(formula),
            per_m: per.into_iter().map(|(m, z)| (m, pair(z))).collect(),
        })
    }

    /// Full grid `S(l, l')`, `l, l' <= l_max`, along the Fourier route and
    /// optionally the per-channel route.
    pub fn grid(&self, v: &KeyVectors<T>, l_max: usize, formula: bool) -> Result<KeyGrid> {
        let left = self.left_products(v, l_max)?;
        let right = self.right_products(v, l_max)?;
        let mut direct = vec![vec![(0.0, 0.0); l_max + 1]; l_max + 1];
        let mut gap = 0.0f64;
        let mut via = if formula { Some(vec![vec![(0.0, 0.0); l_max + 1]; l_max + 1]) } else { None };
        for l in 0..=l_max {
            for l2 in 0..=l_max {
                let s = self.alg.inner_product(&left[l], &right[l2]);
                direct[l][l2] = pair(s);
                if let Some(f) = via.as_mut() {
                    let (sf, _) = self.s_formula(v, l, l2)?;
                    f[l][l2] = pair(sf);
                    gap = gap.max(to_f64((s - sf).norm_sqr()).sqrt());
                }
            }
        }
        Ok(KeyGrid { label: v.label.clone(), n: v.n(), k: v.k(), l_max, direct, formula: via, path_gap: gap })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyGrid {
    pub label: String,
    pub n: usize,
    pub k: usize,
    pub l_max: usize,
    /// `direct[l][l']` through the Fourier product.
    pub direct: Vec<Vec<(f64, f64)>>,
    pub formula: Option<Vec<Vec<(f64, f64)>>>,
    /// Largest `|direct - formula|`, zero when the formula route was skipped.
    pub path_gap: f64,
}

impl KeyGrid {
    pub fn abs(&self, l: usize, l2: usize) -> f64 {
        let (a, b) = self.direct[l][l2];
        a.hypot(b)
    }

    /// `max |S| q^{-max(l,l')}` over `l, l' <= upto`.
    pub fn constant(&self, q: f64, upto: usize) -> f64 {
        let mut k = 0.0f64;
        for l in 0..=upto {
            for l2 in 0..=upto {
                k = k.max(self.abs(l, l2) * q.powi(-(l.max(l2) as i32)));
            }
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeySweep {
    pub grid: KeyGrid,
    pub diagonal: DecayReport,
    pub constant: f64,
    pub constant_previous: f64,
    pub checks: Vec<Check>,
}

/// Decay of `S` over `l, l' <= l_max` for orthogonal `xi, eta`, or the
/// non-decay of the diagonal for the negative control.
pub fn key_estimate_sweep<T: Real>(
    engine: &KeyEngine<'_, T>,
    v: &KeyVectors<T>,
    l_max: usize,
    control: bool,
) -> Result<KeySweep> {
    if l_max < 2 {
        return Err(Error::Precondition("l_max must be at least 2".into()));
    }
    v.validate(engine.backend, !control)?;
    let q = to_f64(engine.backend.params().q());
    let grid = engine.grid(v, l_max, !control)?;
    let diag: Vec<(f64, f64)> = (1..=l_max).map(|l| (l as f64, grid.abs(l, l))).collect();
    let diagonal = fit_decay(&diag, q);
    let constant = grid.constant(q, l_max);
    let constant_previous = grid.constant(q, l_max - 1);
    let tag = &v.label;
    let mut checks = Vec::new();
    if control {
        let decays = diagonal.fitted_rate.is_some_and(|r| r.abs() > RATE_TOL * q.ln().abs());
        checks.push(Check::new(
            &format!("negative control does not decay [{tag}, n={}]", v.n()),
            !decays,
            format!("diagonal fitted rate {:?} vs log q {:.4}", diagonal.fitted_rate, q.ln()),
        ));
    } else {
        checks.push(Check::new(
            &format!("paths agree [{tag}, n={}]", v.n()),
            grid.path_gap <= 1e-8,
            format!("max |direct - formula| = {:.3e}", grid.path_gap),
        ));
        let stable = constant.is_finite() && constant <= 2.0 * constant_previous;
        checks.push(Check::new(
            &format!("K bounded and stable [{tag}, n={}]", v.n()),
            stable,
            format!("K = {constant:.6e}, K at l_max-1 = {constant_previous:.6e}"),
        ));
        checks.push(Check::new(
            &format!("diagonal rate within 15% of log q [{tag}, n={}]", v.n()),
            rate_within(diagonal.fitted_rate, q.ln(), RATE_TOL),
            format!("fitted {:?} vs log q {:.4}", diagonal.fitted_rate, q.ln()),
        ));
    }
    Ok(KeySweep { grid, diagonal, constant, constant_previous, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub label: String,
    /// `sum_{l,l' <= L} |S(l,l')|^2` for `L = 0..=l_max`.
    pub partial_sums: Vec<f64>,
    pub increments: Vec<f64>,
    pub ratio: Option<f64>,
    /// `partial_sums[l_max] - partial_sums[l_max - 1]`.
    pub plateau_gap: f64,
    pub checks: Vec<Check>,
}

/// Partial sums of `|S|^2` and the geometric rate of their increments.
pub fn mixing_sum(grid: &KeyGrid, q: f64) -> MixingReport {
    let n = grid.l_max + 1;
    let mut partial_sums = Vec::with_capacity(n);
    let mut increments = Vec::with_capacity(n);
    let mut acc = 0.0;
    for big in 0..n {
        let mut inc = 0.0;
        for l in 0..=big {
            for l2 in 0..=big {
                if l.max(l2) == big {
                    inc += grid.abs(l, l2).powi(2);
                }
            }
        }
        acc += inc;
        partial_sums.push(acc);
        increments.push(inc);
    }
    let pts: Vec<(f64, f64)> = (1..n).map(|l| (l as f64, increments[l])).collect();
    let ratio = fit_decay(&pts, q).fitted_rate.map(f64::exp);
    let monotone = partial_sums.windows(2).all(|w| w[1] >= w[0]);
    let plateau_gap = partial_sums[n - 1] - partial_sums[n.saturating_sub(2)];
    let tag = format!("[{}, n={}]", grid.label, grid.n);
    let checks = vec![
        Check::new(&format!("mixing sums monotone {tag}"), monotone, format!("total {:.6e}", acc)),
        Check::new(
            &format!("mixing increment ratio <= 1.2 q {tag}"),
            ratio.is_some_and(|r| r <= 1.2 * q),
            format!("fitted ratio {ratio:?} vs {:.4}", 1.2 * q),
        ),
    ];
    MixingReport { label: grid.label.clone(), partial_sums, increments, ratio, plateau_gap, checks }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub l_max: usize,
    pub coefficients: Vec<Vec<(f64, f64)>>,
    pub grid_points: Vec<f64>,
    /// `f_{l_max}` on the grid, real parts, row index `s`.
    pub density: Vec<Vec<f64>>,
    pub max_imaginary: f64,
    /// `sup |f_L - f_{L-1}|` for `L = 1..=l_max`.
    pub increments: Vec<f64>,
    pub ratio: Option<f64>,
    pub mass: f64,
    pub expected_mass: f64,
    pub checks: Vec<Check>,
}

/// Chebyshev partial sums `f_L(s,t) = sum T_l(s) T_{l'}(t) D_{l,l'}`.
pub fn spectral_density<T: Real>(
    engine: &KeyEngine<'_, T>,
    v: &KeyVectors<T>,
    l_max: usize,
    grid_n: usize,
    r: f64,
) -> Result<SpectralReport> {
    if grid_n < 2 || r <= 1.0 {
        return Err(Error::Precondition("need a grid of at least 2 points and r > 1".into()));
    }
    let p = engine.backend.params();
    let q = to_f64(p.q());
    let grid = engine.grid(v, l_max, false)?;
    let d = &grid.direct;
    let pts: Vec<f64> = (0..grid_n).map(|i| -2.0 + 4.0 * i as f64 / (grid_n - 1) as f64).collect();
    let cheb: Vec<Vec<f64>> = pts.iter().map(|&s| chebyshev_all(l_max, s)).collect();
    let eval = |cs: &[f64], ct: &[f64], upto: usize| {
        let mut acc = Complex::new(0.0, 0.0);
        for l in 0..=upto {
            for l2 in 0..=upto {
                acc += Complex::new(d[l][l2].0, d[l][l2].1) * (cs[l] * ct[l2]);
            }
        }
        acc
    };
    let mut increments = vec![0.0f64; l_max];
    let mut density = vec![vec![0.0; grid_n]; grid_n];
    let mut max_imaginary = 0.0f64;
    for (i, cs) in cheb.iter().enumerate() {
        for (j, ct) in cheb.iter().enumerate() {
            let mut prev = eval(cs, ct, 0);
            for big in 1..=l_max {
                let cur = eval(cs, ct, big);
                increments[big - 1] = increments[big - 1].max((cur - prev).norm());
                prev = cur;
            }
            density[i][j] = prev.re;
            max_imaginary = max_imaginary.max(prev.im.abs());
        }
    }
    for row in d {
        for z in row {
            max_imaginary = max_imaginary.max(z.1.abs());
        }
    }
    let fit_pts: Vec<(f64, f64)> = increments.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect();
    let ratio = fit_decay(&fit_pts, q).fitted_rate.map(f64::exp);
    let f = |s: f64, t: f64| {
        let (cs, ct) = (chebyshev_all(l_max, s), chebyshev_all(l_max, t));
        eval(&cs, &ct, l_max).re
    };
    let mass = semicircle_integral(|s: f64| semicircle_integral(|t: f64| f(s, t), 1e-12), 1e-12);
    let self_paired = v.xi == v.xi2 && v.eta == v.eta2;
    let expected_mass = if self_paired { 1.0 / to_f64(p.dim(v.n())) } else { f64::NAN };
    let mut checks = vec![
        Check::new("spectral coefficients real", max_imaginary <= 1e-10, format!("max |Im| = {max_imaginary:.3e}")),
        Check::new(
            "spectral partial sums converge geometrically",
            ratio.is_some_and(|x| x <= q * r),
            format!("fitted ratio {ratio:?} vs q r = {:.4}", q * r),
        ),
    ];
    if self_paired {
        checks.push(Check::new(
            "spectral mass",
            (mass - expected_mass).abs() <= 1e-4,
            format!("mass {mass:.10} vs 1/d_n = {expected_mass:.10}"),
        ));
    }
    Ok(SpectralReport {
        l_max,
        coefficients: grid.direct.clone(),
        grid_points: pts,
        density,
        max_imaginary,
        increments,
        ratio,
        mass,
        expected_mass,
        checks,
    })
}
