//! Finite identities of the realizations: dimensions, traces, the three
//! forms of the Wenzl recursion and the structural invariants of a backend.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::Check;
use crate::linalg::{max_abs_real, orthonormality_defect, Mat};
use crate::qcore::make_params;
use crate::rep::tensor::TensorBackend;
use crate::rep::{Caps, RepBackend};
use crate::scalar::{to_f64, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimRow {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub d_recursion: f64,
    pub d_closed: f64,
    pub closed_rel_error: f64,
    /// `None` when `P_n` is out of cap.
    pub trace: Option<f64>,
    pub trace_rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimsReport {
    pub rows: Vec<DimRow>,
    pub checks: Vec<Check>,
}

/// `d_n` by recursion and closed form, and `Tr P_n` from the tensor realization.
pub fn dimension_identities(big_ns: &[usize], n_max: usize, caps: Caps) -> Result<DimsReport> {
    let mut rows = Vec::new();
    for &nn in big_ns {
        let p = make_params::<f64>(nn)?;
        let tb = TensorBackend::with_caps(p.clone(), caps);
        for n in 0..=n_max {
            let d = p.dim(n);
            let closed = p.dim_closed_form(n);
            let trace = match tb.jw_trace(n) {
                Ok(t) => Some(t),
                Err(Error::CapExceeded { .. }) => None,
                Err(e) => return Err(e),
            };
            rows.push(DimRow {
                big_n: nn,
                n,
                d_recursion: d,
                d_closed: closed,
                closed_rel_error: (closed - d).abs() / d,
                trace,
                trace_rel_error: trace.map(|t| (t - d).abs() / d),
            });
        }
    }
    let closed = rows.iter().fold(0.0f64, |a, r| a.max(r.closed_rel_error));
    let traced: Vec<&DimRow> = rows.iter().filter(|r| r.trace.is_some()).collect();
    let trace_err = traced.iter().fold(0.0f64, |a, r| a.max(r.trace_rel_error.unwrap_or(0.0)));
    let covered = big_ns.iter().all(|nn| traced.iter().any(|r| r.big_n == *nn && r.n >= 2));
    let checks = vec![
        Check::new(
            "closed form vs recursion for d_n",
            closed <= 1e-9,
            format!("max relative error {closed:.3e} (tol 1e-9)"),
        ),
        Check::new(
            "Tr P_n = d_n",
            covered && trace_err <= 1e-8,
            format!("{} traces in cap, max relative error {trace_err:.3e} (tol 1e-8)", traced.len()),
        ),
    ];
    Ok(DimsReport { rows, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WenzlRow {
    pub n: usize,
    pub vectors: usize,
    /// `max |full(v) - jw_apply(v)|`.
    pub full: f64,
    /// `max |E_n E_n^T v - jw_apply(v)|`.
    pub factored: f64,
    pub reflected: f64,
    pub idempotence: f64,
    pub symmetry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantRow {
    pub what: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JwVerifyReport {
    pub wenzl: Vec<WenzlRow>,
    pub invariants: Vec<InvariantRow>,
    pub checks: Vec<Check>,
}

/// Full, reduced (`jw_apply`) and reflected Wenzl forms on random vectors.
pub fn wenzl_forms<T: Real>(tb: &TensorBackend<T>, n_max: usize, vectors: usize, seed: u64) -> Result<Vec<WenzlRow>> {
    let nn = tb.params().N();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let dim = nn.pow(n as u32);
        let v = Mat::<T>::from_fn(dim, vectors, |_, _| crate::scalar::lit(rng.random::<f64>() - 0.5));
        let w = Mat::<T>::from_fn(dim, vectors, |_, _| crate::scalar::lit(rng.random::<f64>() - 0.5));
        let pv = tb.jw_apply(n, &v)?;
        let pw = tb.jw_apply(n, &w)?;
        let full = max_abs_real(&(tb.wenzl_full_apply(n, &v)? - &pv));
        let reflected = max_abs_real(&(tb.wenzl_reflected_apply(n, &v)? - &pv));
        let e = tb.e(n)?;
        let factored = max_abs_real(&(&*e * (e.transpose() * &v) - &pv));
        let idempotence = max_abs_real(&(tb.jw_apply(n, &pv)? - &pv));
        let symmetry = max_abs_real(&(w.transpose() * &pv - pw.transpose() * &v));
        rows.push(WenzlRow { n, vectors, full, factored, reflected, idempotence, symmetry });
    }
    Ok(rows)
}

/// Orthonormal bases, `||t_n||^2 = d_n`, `T_n` orthogonal up to `sqrt d_n`,
/// and completeness of every fusion decomposition with `l + k <= deg_max`.
pub fn backend_invariants<T: Real>(b: &dyn RepBackend<T>, deg_max: usize) -> Result<Vec<InvariantRow>> {
    let mut out = Vec::new();
    for n in 0..=deg_max {
        let basis = b.basis(n)?;
        out.push(InvariantRow {
            what: format!("{} basis H_{n} orthonormal", b.kind()),
            residual: to_f64(orthonormality_defect(&*basis.isometry)),
        });
        let t = b.t_matrix(n)?;
        let d = b.dim(n);
        let tt = &*t * t.transpose();
        out.push(InvariantRow {
            what: format!("{} T_{n} T_{n}^T = id", b.kind()),
            residual: max_abs_real(&(tt - Mat::<T>::identity(d, d))),
        });
    }
    for l in 0..=deg_max {
        for k in 0..=deg_max - l {
            let (o, c) = b.decompose(l, k)?.residuals();
            out.push(InvariantRow { what: format!("{} decomposition {l} (x) {k}", b.kind()), residual: o.max(c) });
        }
    }
    Ok(out)
}

/// The `jw-verify` suite: Wenzl forms on the tensor backend plus the
/// structural invariants of every supplied backend.
pub fn jw_verify<T: Real>(
    tb: &TensorBackend<T>,
    others: &[&dyn RepBackend<T>],
    n_max: usize,
    vectors: usize,
    seed: u64,
) -> Result<JwVerifyReport> {
    let wenzl = wenzl_forms(tb, n_max, vectors, seed)?;
    let mut invariants = backend_invariants(tb, n_max)?;
    for b in others {
        invariants.extend(backend_invariants(*b, n_max)?);
    }
    let worst = |f: fn(&WenzlRow) -> f64| wenzl.iter().fold(0.0f64, |a, r| a.max(f(r)));
    let (full, refl, fact) = (worst(|r| r.full), worst(|r| r.reflected), worst(|r| r.factored));
    let (idem, sym) = (worst(|r| r.idempotence), worst(|r| r.symmetry));
    let inv = invariants.iter().fold(0.0f64, |a, r| a.max(r.residual));
    let checks = vec![
        Check::new(
            "Wenzl full form = jw_apply",
            full <= 1e-9,
            format!("max error {full:.3e} over n <= {n_max}, {vectors} vectors each (tol 1e-9)"),
        ),
        Check::new("Wenzl reflected form = jw_apply", refl <= 1e-9, format!("max error {refl:.3e} (tol 1e-9)")),
        Check::new("E_n E_n^T = jw_apply", fact <= 1e-9, format!("max error {fact:.3e} (tol 1e-9)")),
        Check::new(
            "P_n idempotent and self-adjoint",
            idem <= 1e-9 && sym <= 1e-9,
            format!("idempotence {idem:.3e}, symmetry {sym:.3e} (tol 1e-9)"),
        ),
        Check::new("backend structural invariants", inv <= 1e-9, format!("max residual {inv:.3e} (tol 1e-9)")),
    ];
    Ok(JwVerifyReport { wenzl, invariants, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rep::coupled::CoupledBackend;

    #[test]
    fn dims_small() {
        let r = dimension_identities(&[3, 4], 4, Caps::default()).unwrap();
        assert!(r.checks.iter().all(|c| c.pass), "{:?}", r.checks);
        let row = r.rows.iter().find(|r| r.big_n == 4 && r.n == 3).unwrap();
        assert_eq!(row.d_recursion, 56.0);
    }

    #[test]
    fn trace_out_of_cap_is_reported_not_fatal() {
        let caps = Caps { tensor_dim: 100, ..Caps::default() };
        let r = dimension_identities(&[3], 5, caps).unwrap();
        assert!(r.rows[5].trace.is_none());
        assert!(r.rows[4].trace.is_some());
    }

    #[test]
    fn verify_small() {
        let p = make_params::<f64>(3).unwrap();
        let tb = TensorBackend::new(p.clone());
        let cb = CoupledBackend::new(p);
        let r = jw_verify(&tb, &[&cb], 4, 3, 1).unwrap();
        assert!(r.checks.iter().all(|c| c.pass), "{:?}", r.checks);
        assert_eq!(r.wenzl.len(), 4);
    }
}
