//! Realizations of the irreducible spaces `H_n`, Jones-Wenzl projections,
//! invariant vectors and fusion isometries.
//!
//! Every backend exposes `H_n` through an orthonormal real basis. The key
//! primitive is [`RepBackend::top`], the canonical isometry
//! `H_{l+k} -> H_l (x) H_k` given by restricting `P_l (x) P_k` to `H_{l+k}`;
//! everything else is expressed in those coordinates.

pub mod coupled;
pub mod ops;
pub mod tensor;

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, RwLock};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, Mat};
use crate::qcore::QParams;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Tensor,
    Coupled,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Tensor => "tensor",
            BackendKind::Coupled => "coupled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest ambient dimension `N^n` for the tensor backend.
    pub tensor_dim: u128,
    /// Largest `d_l * d_k` for a fusion decomposition.
    pub coupled_dim: u128,
    /// Largest number of entries of any single cached matrix.
    pub max_entries: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { tensor_dim: 59_049, coupled_dim: 100_000, max_entries: 1 << 25 }
    }
}

/// A vector of `H_n` in the backend's orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HVec<T: Real> {
    pub n: usize,
    pub coords: Vec<Complex<T>>,
}

impl<T: Real> HVec<T> {
    pub fn new(n: usize, coords: Vec<Complex<T>>) -> Self {
        HVec { n, coords }
    }

    pub fn basis(n: usize, dim: usize, i: usize) -> Self {
        let mut coords = vec![Complex::new(T::zero(), T::zero()); dim];
        coords[i] = Complex::new(T::one(), T::zero());
        HVec { n, coords }
    }

    pub fn norm(&self) -> T {
        self.coords.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt()
    }

    /// Left-linear inner product `<self, other>`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.coords.iter().zip(&other.coords).fold(Complex::new(T::zero(), T::zero()), |a, (x, y)| a + x * y.conj())
    }

    pub fn as_column(&self) -> CMat<T> {
        CMat::column(&self.coords)
    }

    pub fn scale(&self, z: Complex<T>) -> Self {
        HVec { n: self.n, coords: self.coords.iter().map(|c| c * z).collect() }
    }
}

/// Orthonormal realization of `H_n` inside the backend's ambient space.
#[derive(Debug, Clone)]
pub struct RepBasis<T: Real> {
    pub n: usize,
    pub backend: BackendKind,
    /// `N^n x d_n` (tensor) or `d_{n-1} N x d_n` (coupled).
    pub isometry: Arc<Mat<T>>,
}

/// Complete family of isometries `u_m : H_m -> H_l (x) H_k`.
#[derive(Debug, Clone)]
pub struct CgDecomposition<T: Real> {
    pub l: usize,
    pub k: usize,
    pub components: Vec<(usize, Mat<T>)>,
}

impl<T: Real> CgDecomposition<T> {
    pub fn component(&self, m: usize) -> Option<&Mat<T>> {
        self.components.iter().find(|(mm, _)| *mm == m).map(|(_, u)| u)
    }

    /// `(max |u_m^* u_m' - delta I|, max |sum u_m u_m^* - I|)`.
    pub fn residuals(&self) -> (f64, f64) {
        let mut orth = 0.0f64;
        for (i, (_, u)) in self.components.iter().enumerate() {
            for (j, (_, v)) in self.components.iter().enumerate() {
                let g = u.transpose() * v;
                let d = if i == j { g - Mat::identity(u.ncols(), u.ncols()) } else { g };
                orth = orth.max(crate::linalg::max_abs_real(&d));
            }
        }
        let dim = self.components.first().map(|c| c.1.nrows()).unwrap_or(0);
        let mut s = Mat::<T>::identity(dim, dim);
        for (_, u) in &self.components {
            s -= u * u.transpose();
        }
        (orth, crate::linalg::max_abs_real(&s))
    }
}

/// Operator between coordinate spaces, labelled by its domain and codomain.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBlock<T: Real> {
    pub domain: Vec<usize>,
    pub codomain: Vec<usize>,
    pub matrix: CMat<T>,
}

/// Scalar `c` with `V^* V = c id` for `V^* = P_m (id (x) t_a^* (x) id)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub l: usize,
    pub k: usize,
    pub m: usize,
    pub c: f64,
    pub kappa: f64,
    pub scalarity_residual: f64,
}

/// Common contract of the tensor and coupled realizations.
pub trait RepBackend<T: Real>: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn params(&self) -> &QParams<T>;
    fn caps(&self) -> &Caps;
    fn basis(&self, n: usize) -> Result<RepBasis<T>>;
    /// Canonical isometry `H_{l+k} -> H_l (x) H_k`.
    fn top(&self, l: usize, k: usize) -> Result<Arc<Mat<T>>>;
    /// Coordinates `T_n[c, d]` of `t_n = sum T_n[c,d] e_c (x) e_d`.
    fn t_matrix(&self, n: usize) -> Result<Arc<Mat<T>>>;
    fn decompose(&self, l: usize, k: usize) -> Result<Arc<CgDecomposition<T>>>;
    fn kappa(&self, l: usize, k: usize, m: usize) -> Result<KappaReport>;

    fn dim(&self, n: usize) -> usize {
        self.params().dim_usize(n)
    }
}

/// Fusion channels `m` of `l (x) k`.
pub fn fusion_channels(l: usize, k: usize) -> impl Iterator<Item = usize> {
    let lo = l.abs_diff(k);
    (lo..=l + k).step_by(2)
}

pub(crate) struct Cache<K, V> {
    map: RwLock<HashMap<K, Arc<V>>>,
}

impl<K: Eq + Hash + Clone, V> Cache<K, V> {
    pub fn new() -> Self {
        Cache { map: RwLock::new(HashMap::new()) }
    }

    pub fn get_or_try(&self, key: K, f: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        if let Some(v) = self.map.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(f()?);
        let mut w = self.map.write().unwrap();
        Ok(w.entry(key).or_insert(v).clone())
    }
}

/// Make the first nonzero entry of the first column positive.
pub(crate) fn fix_phase<T: Real>(u: &mut Mat<T>) {
    if u.ncols() == 0 {
        return;
    }
    let tol = crate::scalar::lit::<T>(1e-12);
    if let Some(v) = u.column(0).iter().find(|x| x.abs() > tol) {
        if *v < T::zero() {
            u.neg_mut();
        }
    }
}

pub(crate) fn entries_check(what: impl FnOnce() -> String, rows: usize, cols: usize, caps: &Caps) -> Result<()> {
    crate::error::cap_check(what, rows as u128 * cols as u128, caps.max_entries)
}

pub(crate) fn channel_check(l: usize, k: usize, m: usize) -> Result<usize> {
    if m > l + k || m < l.abs_diff(k) || !(l + k - m).is_multiple_of(2) {
        return Err(Error::Precondition(format!("{m} is not a fusion channel of {l} (x) {k}")));
    }
    Ok((l + k - m) / 2)
}
