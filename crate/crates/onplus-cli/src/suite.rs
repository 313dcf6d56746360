//! Experiment runners shared by the subcommands and the acceptance suite.

use std::cell::RefCell;
use std::rc::Rc;

use onplus::estimates::invariants::{dimension_identities, jw_verify};
use onplus::estimates::key::{key_estimate_sweep, mixing_sum, spectral_density, KeyEngine, KeySweep, KeyVectors};
use onplus::estimates::lemmas::{
    alpha_sweep, kappa_sweep, partial_trace_convergence, projection_defect_sweep, trace_rotation_sweep,
};
use onplus::estimates::oracle::haar_oracle_comparison;
use onplus::estimates::Check;
use onplus::rep::{Caps, RepBackend};
use onplus::weingarten::WeingartenOracle;
use onplus::{CoupledBackend, TensorBackend};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::report::{serialize_report, Cell, Format, Report, Table};
use crate::{BackendChoice, CliError, RunConfig};

type Backend = dyn RepBackend<f64>;

fn q_of(b: &Backend) -> f64 {
    b.params().q()
}

pub fn dims(big_ns: &[usize], max: usize, caps: Caps) -> Result<Report, CliError> {
    let r = dimension_identities(big_ns, max, caps)?;
    let mut t = Table::new(
        "dims",
        2,
        &["N", "n", "d_n", "d_closed", "closed_rel_error", "trace", "trace_rel_error"],
        false,
    );
    for row in &r.rows {
        t.push(vec![
            row.big_n.into(),
            row.n.into(),
            Cell::Int(row.d_recursion.round() as i64),
            row.d_closed.into(),
            row.closed_rel_error.into(),
            Cell::opt(row.trace),
            Cell::opt(row.trace_rel_error),
        ]);
    }
    let mut rep = Report::new("dims");
    rep.tables.push(t);
    rep.checks = r.checks;
    Ok(rep)
}

pub fn jw(tensor: &TensorBackend, others: &[&Backend], max: usize, vectors: usize, seed: u64) -> Result<Report, CliError> {
    let r = jw_verify(tensor, others, max, vectors, seed)?;
    let mut w = Table::new("wenzl", 1, &["n", "vectors", "full", "factored", "reflected", "idempotence", "symmetry"], false);
    for row in &r.wenzl {
        w.push(vec![
            row.n.into(),
            row.vectors.into(),
            row.full.into(),
            row.factored.into(),
            row.reflected.into(),
            row.idempotence.into(),
            row.symmetry.into(),
        ]);
    }
    let mut inv = Table::new("invariants", 1, &["what", "residual"], false);
    for row in &r.invariants {
        inv.push(vec![row.what.clone().into(), row.residual.into()]);
    }
    let mut rep = Report::new("jw-verify");
    rep.tables = vec![w, inv];
    rep.checks = r.checks;
    Ok(rep)
}

#[allow(clippy::too_many_arguments)]
pub fn rotation(
    b: &Backend,
    k_max: usize,
    trials: usize,
    a: usize,
    c: usize,
    b_max: usize,
    seed: u64,
) -> Result<Report, CliError> {
    let r = trace_rotation_sweep(b, k_max, trials, a, c, b_max, seed)?;
    let mut rows = Table::new("rotation", 1, &["k", "trials", "max_trace_error", "max_hs_excess"], false);
    let mut ids = Table::new("identity", 1, &["k", "identity_trace"], true);
    for row in &r.rows {
        rows.push(vec![row.k.into(), row.trials.into(), row.max_trace_error.into(), row.max_hs_excess.into()]);
        ids.push(vec![row.k.into(), row.identity_trace.into()]);
    }
    let mut cor = Table::new("corollary", 1, &["b", "direct", "via_partial_trace"], false);
    for row in &r.corollary {
        cor.push(vec![row.b.into(), row.direct.into(), row.via_partial_trace.into()]);
    }
    let mut rep = Report::new("trace-rotation");
    rep.tables = vec![rows, ids, cor];
    rep.empirical_constant = Some(r.corollary_sup);
    rep.checks = r.checks;
    Ok(rep)
}

pub fn partial_trace(b: &Backend, a: usize, c: usize, b_max: usize) -> Result<Report, CliError> {
    let r = partial_trace_convergence(b, a, c, b_max)?;
    let mut t = Table::new("partial_trace", 1, &["b", "deviation", "scalar_defect"], true);
    for (i, (dev, sd)) in r.deviations.iter().zip(&r.scalar_defects).enumerate() {
        t.push(vec![i.into(), (*dev).into(), (*sd).into()]);
    }
    let mut s = Table::new("lambda", 2, &["a", "c", "lambda", "constant_previous"], true);
    s.push(vec![a.into(), c.into(), r.lambda.into(), r.constant_previous.into()]);
    let mut rep = Report::new("partial-trace");
    rep.tables = vec![t, s];
    rep.fitted_rate = r.fit.fitted_rate;
    rep.empirical_constant = Some(r.fit.empirical_constant);
    rep.residuals = r.fit.residuals;
    rep.checks = r.checks;
    Ok(rep)
}

pub fn alpha(b: &Backend, n_max: usize, n_max_11: usize, seed: u64) -> Result<Report, CliError> {
    let r = alpha_sweep(b, n_max, n_max_11, seed)?;
    let mut t = Table::new(
        "alpha",
        3,
        &["p", "q", "n", "alpha_re", "alpha_im", "residual", "alpha2_re", "alpha2_im", "residual2", "degenerate"],
        true,
    );
    for row in &r.rows {
        t.push(vec![
            row.p.into(),
            row.q.into(),
            row.n.into(),
            row.alpha.0.into(),
            row.alpha.1.into(),
            row.residual.into(),
            row.alpha_second.0.into(),
            row.alpha_second.1.into(),
            row.residual_second.into(),
            row.degenerate.into(),
        ]);
    }
    let mut rep = Report::new("alpha");
    rep.tables.push(t);
    rep.checks = r.checks;
    Ok(rep)
}

pub fn projection(b: &Backend, x: usize, z: usize, y_max: usize) -> Result<Report, CliError> {
    let r = projection_defect_sweep(b, x, z, y_max)?;
    let mut t = Table::new("projection", 3, &["x", "y", "z", "defect", "cross"], true);
    for row in &r.rows {
        t.push(vec![row.x.into(), row.y.into(), row.z.into(), row.defect.into(), row.cross.into()]);
    }
    let mut f = Table::new("fits", 1, &["quantity", "fitted_rate", "empirical_constant"], true);
    f.push(vec!["defect".into(), Cell::opt(r.defect_fit.fitted_rate), r.defect_fit.empirical_constant.into()]);
    f.push(vec!["cross".into(), Cell::opt(r.cross_fit.fitted_rate), r.cross_fit.empirical_constant.into()]);
    let mut rep = Report::new("projection-defect");
    rep.tables = vec![t, f];
    rep.fitted_rate = r.defect_fit.fitted_rate;
    rep.empirical_constant = Some(r.defect_fit.empirical_constant);
    rep.residuals = r.defect_fit.residuals;
    rep.checks = r.checks;
    Ok(rep)
}

pub fn kappa(tensor: &TensorBackend, direct: &Backend, a_max: usize, l_max: usize) -> Result<Report, CliError> {
    let r = kappa_sweep(tensor, Some(direct), a_max, l_max)?;
    let mut t = Table::new(
        "kappa",
        2,
        &["a", "l", "m", "c_probe", "kappa_probe", "scalarity_probe", "c_direct", "kappa_direct", "scalarity_direct"],
        true,
    );
    for row in &r.rows {
        t.push(vec![
            row.a.into(),
            row.l.into(),
            row.probe.m.into(),
            row.probe.c.into(),
            row.probe.kappa.into(),
            row.probe.scalarity_residual.into(),
            Cell::opt(row.direct.map(|d| d.c)),
            Cell::opt(row.direct.map(|d| d.kappa)),
            Cell::opt(row.direct.map(|d| d.scalarity_residual)),
        ]);
    }
    let mut bt = Table::new("bounds", 1, &["a", "max_kappa"], true);
    for (a, v) in r.bounds.iter().enumerate() {
        bt.push(vec![a.into(), (*v).into()]);
    }
    let mut rep = Report::new("kappa");
    rep.tables = vec![t, bt];
    rep.fitted_rate = r.fitted_rate;
    rep.checks = r.checks;
    Ok(rep)
}

/// One vector set of the key estimate with its sweep.
pub struct KeyRun {
    pub label: String,
    pub n: usize,
    pub k: usize,
    pub control: bool,
    pub sweep: KeySweep,
}

/// `e1,e2`, then `randoms` seeded orthonormal pairs, then the `xi = eta` control.
pub fn key_runs(b: &Backend, n: usize, k: usize, l_max: usize, randoms: usize, seed: u64) -> Result<Vec<KeyRun>, CliError> {
    let engine = KeyEngine::new(b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 32) ^ (k as u64) << 16);
    let mut sets = vec![(KeyVectors::basis_pair(b, n, k), false)];
    for i in 0..randoms {
        sets.push((KeyVectors::random_pair(b, n, k, &mut rng, format!("random {i}")), false));
    }
    sets.push((KeyVectors::diagonal_control(b, n, k), true));
    let mut out = Vec::new();
    for (v, control) in sets {
        let sweep = key_estimate_sweep(&engine, &v, l_max, control)?;
        out.push(KeyRun { label: v.label.clone(), n, k, control, sweep });
    }
    Ok(out)
}

fn is_invariant(runs: &[KeyRun]) -> bool {
    runs.iter().all(|r| r.n == 1 && r.k == 1)
}

pub fn key_report(runs: &[KeyRun], q: f64) -> Report {
    let inv = is_invariant(runs);
    let mut g = Table::new(
        "grid",
        5,
        &["label", "n", "k", "l", "l2", "direct_re", "direct_im", "formula_re", "formula_im", "abs", "scaled"],
        inv,
    );
    let mut s = Table::new(
        "summary",
        3,
        &["label", "n", "k", "control", "path_gap", "fitted_rate", "constant", "constant_previous"],
        inv,
    );
    for r in runs {
        let grid = &r.sweep.grid;
        for l in 0..=grid.l_max {
            for l2 in 0..=grid.l_max {
                let (fr, fi) = match &grid.formula {
                    Some(f) => (Cell::Float(f[l][l2].0), Cell::Float(f[l][l2].1)),
                    None => (Cell::Missing, Cell::Missing),
                };
                let a = grid.abs(l, l2);
                g.push(vec![
                    r.label.clone().into(),
                    r.n.into(),
                    r.k.into(),
                    l.into(),
                    l2.into(),
                    grid.direct[l][l2].0.into(),
                    grid.direct[l][l2].1.into(),
                    fr,
                    fi,
                    a.into(),
                    (a * q.powi(-(l.max(l2) as i32))).into(),
                ]);
            }
        }
        s.push(vec![
            r.label.clone().into(),
            r.n.into(),
            r.k.into(),
            r.control.into(),
            if r.control { Cell::Missing } else { grid.path_gap.into() },
            Cell::opt(r.sweep.diagonal.fitted_rate),
            r.sweep.constant.into(),
            r.sweep.constant_previous.into(),
        ]);
    }
    let mut rep = Report::new("key-estimate");
    rep.tables = vec![g, s];
    if let Some(first) = runs.iter().find(|r| !r.control) {
        rep.fitted_rate = first.sweep.diagonal.fitted_rate;
        rep.empirical_constant = Some(first.sweep.constant);
        rep.residuals = first.sweep.diagonal.residuals.clone();
    }
    rep.checks = runs.iter().flat_map(|r| r.sweep.checks.clone()).collect();
    rep
}

pub fn mixing_report(runs: &[KeyRun], q: f64) -> Report {
    let inv = is_invariant(runs);
    let mut t = Table::new("mixing", 4, &["label", "n", "k", "L", "increment", "partial_sum"], inv);
    let mut s = Table::new("summary", 3, &["label", "n", "k", "ratio", "plateau_gap"], inv);
    let mut rep = Report::new("mixing-sum");
    let mut first = true;
    for r in runs.iter().filter(|r| !r.control) {
        let m = mixing_sum(&r.sweep.grid, q);
        for (big, (inc, ps)) in m.increments.iter().zip(&m.partial_sums).enumerate() {
            t.push(vec![r.label.clone().into(), r.n.into(), r.k.into(), big.into(), (*inc).into(), (*ps).into()]);
        }
        s.push(vec![r.label.clone().into(), r.n.into(), r.k.into(), Cell::opt(m.ratio), m.plateau_gap.into()]);
        if first {
            rep.fitted_rate = m.ratio.map(f64::ln);
            first = false;
        }
        rep.checks.extend(m.checks);
    }
    rep.tables = vec![t, s];
    rep
}

pub fn spectral(b: &Backend, n: usize, k: usize, l_max: usize, grid_n: usize, slack: f64) -> Result<Report, CliError> {
    let engine = KeyEngine::new(b);
    let v = KeyVectors::basis_pair(b, n, k);
    let r = spectral_density(&engine, &v, l_max, grid_n, slack)?;
    let inv = n == 1 && k == 1;
    let mut c = Table::new("coefficients", 2, &["l", "l2", "re", "im"], inv);
    for (l, row) in r.coefficients.iter().enumerate() {
        for (l2, z) in row.iter().enumerate() {
            c.push(vec![l.into(), l2.into(), z.0.into(), z.1.into()]);
        }
    }
    let mut d = Table::new("density", 2, &["s", "t", "f"], inv);
    for (i, s) in r.grid_points.iter().enumerate() {
        for (j, t) in r.grid_points.iter().enumerate() {
            d.push(vec![(*s).into(), (*t).into(), r.density[i][j].into()]);
        }
    }
    let mut inc = Table::new("increments", 1, &["L", "sup_increment"], inv);
    for (i, x) in r.increments.iter().enumerate() {
        inc.push(vec![(i + 1).into(), (*x).into()]);
    }
    let mut m = Table::new("mass", 0, &["mass", "expected_mass", "ratio", "max_imaginary"], inv);
    m.push(vec![r.mass.into(), r.expected_mass.into(), Cell::opt(r.ratio), r.max_imaginary.into()]);
    let mut rep = Report::new("spectral-density");
    rep.tables = vec![c, d, inc, m];
    rep.fitted_rate = r.ratio.map(f64::ln);
    rep.checks = r.checks;
    Ok(rep)
}

pub fn haar(b: &Backend, max_degree: usize, seed: u64) -> Result<Report, CliError> {
    let oracle = WeingartenOracle::new(b.params().N())?;
    let r = haar_oracle_comparison(b, &oracle, max_degree, seed)?;
    let mut d = Table::new("degrees", 1, &["degree", "moments", "nonzero", "max_error"], true);
    for row in &r.degrees {
        d.push(vec![row.degree.into(), Cell::Int(row.moments as i64), Cell::Int(row.nonzero as i64), row.max_error.into()]);
    }
    let mut c = Table::new("catalan", 1, &["m", "exact", "fusion", "weingarten", "quadrature"], true);
    for row in &r.catalan {
        c.push(vec![
            row.m.into(),
            Cell::Int(row.exact as i64),
            row.fusion.into(),
            row.weingarten.into(),
            row.quadrature.into(),
        ]);
    }
    let mut rep = Report::new("haar-oracle");
    rep.tables = vec![d, c];
    rep.checks = r.checks;
    Ok(rep)
}

fn cells_agree(a: &Cell, b: &Cell, tol: f64) -> Option<f64> {
    match (a, b) {
        (Cell::Float(x), Cell::Float(y)) => {
            if x.is_nan() && y.is_nan() {
                return Some(0.0);
            }
            let d = (x - y).abs();
            (d <= tol * 1f64.max(x.abs()).max(y.abs())).then_some(d)
        }
        _ => (a == b).then_some(0.0),
    }
}

/// Compares every basis-independent table of two reports of the same experiment.
pub fn cross_compare(name: &str, primary: &Report, other: &Report, tol: f64) -> Check {
    let mut compared = 0usize;
    let mut worst = 0.0f64;
    let mut mismatch: Option<String> = None;
    for t in primary.tables.iter().filter(|t| t.invariant) {
        let Some(u) = other.table(&t.name) else {
            mismatch.get_or_insert(format!("table {} missing", t.name));
            continue;
        };
        if u.rows.len() != t.rows.len() {
            mismatch.get_or_insert(format!("table {} has {} vs {} rows", t.name, t.rows.len(), u.rows.len()));
            continue;
        }
        for (i, (ra, rb)) in t.rows.iter().zip(&u.rows).enumerate() {
            for (j, (ca, cb)) in ra.iter().zip(rb).enumerate() {
                compared += 1;
                match cells_agree(ca, cb, tol) {
                    Some(d) => worst = worst.max(d),
                    None => {
                        mismatch.get_or_insert(format!("{}[{i}].{}: {ca:?} vs {cb:?}", t.name, t.columns[j]));
                    }
                }
            }
        }
    }
    let pass = mismatch.is_none() && compared > 0;
    let detail = match mismatch {
        Some(m) => format!("first disagreement {m}"),
        None => format!("{compared} values agree, max difference {worst:.3e} (tol {tol:e})"),
    };
    Check::new(&format!("tensor vs coupled: {name}"), pass, detail)
}

pub struct Backends {
    pub tensor: TensorBackend,
    pub coupled: CoupledBackend,
}

impl Backends {
    pub fn new(cfg: &RunConfig) -> Result<Backends, CliError> {
        let p = onplus::qcore::make_params::<f64>(cfg.big_n)?;
        Ok(Backends {
            tensor: TensorBackend::with_caps(p.clone(), cfg.caps),
            coupled: CoupledBackend::with_caps(p, cfg.caps),
        })
    }

    pub fn primary(&self, choice: BackendChoice) -> &Backend {
        match choice {
            BackendChoice::Tensor => &self.tensor,
            BackendChoice::Coupled | BackendChoice::CrossCheck => &self.coupled,
        }
    }
}

/// Runs `f` on the selected backend; with `cross-check` also on the tensor
/// backend, appending the agreement check.
pub fn on_backends(
    cfg: &RunConfig,
    bk: &Backends,
    f: impl Fn(&Backend) -> Result<Report, CliError>,
) -> Result<Report, CliError> {
    let mut r = f(bk.primary(cfg.backend))?;
    if cfg.backend == BackendChoice::CrossCheck {
        let t = f(&bk.tensor)?;
        let check = cross_compare(&r.command.clone(), &r, &t, cfg.tol);
        r.checks.push(check);
    }
    Ok(r)
}

pub struct Criterion {
    pub id: usize,
    pub slug: &'static str,
    pub title: &'static str,
    pub budget_secs: u64,
}

pub const CRITERIA: [Criterion; 13] = [
    Criterion { id: 1, slug: "dims", title: "dimension identities", budget_secs: 120 },
    Criterion { id: 2, slug: "wenzl", title: "Wenzl recursion suite", budget_secs: 120 },
    Criterion { id: 3, slug: "haar_oracle", title: "Haar moments vs Weingarten oracle", budget_secs: 300 },
    Criterion { id: 4, slug: "trace_rotation", title: "rotation trace formula", budget_secs: 120 },
    Criterion { id: 5, slug: "partial_trace", title: "partial-trace convergence", budget_secs: 300 },
    Criterion { id: 6, slug: "alpha", title: "alpha proportionality constants", budget_secs: 300 },
    Criterion { id: 7, slug: "projection_defect", title: "product of projections", budget_secs: 300 },
    Criterion { id: 8, slug: "kappa", title: "kappa scalarity and growth", budget_secs: 180 },
    Criterion { id: 9, slug: "key_estimate", title: "key estimate", budget_secs: 900 },
    Criterion { id: 10, slug: "mixing_sum", title: "mixing sum", budget_secs: 300 },
    Criterion { id: 11, slug: "spectral_density", title: "spectral density", budget_secs: 600 },
    Criterion { id: 12, slug: "cross_check", title: "backend cross-certification", budget_secs: 600 },
    Criterion { id: 13, slug: "determinism", title: "determinism", budget_secs: 600 },
];

/// The acceptance suite; the key-estimate grids are shared by criteria 9 and 10.
pub struct Suite {
    cfg: RunConfig,
    bk: Backends,
    key: RefCell<Option<Rc<Vec<KeyRun>>>>,
}

impl Suite {
    pub fn new(cfg: RunConfig) -> Result<Suite, CliError> {
        let bk = Backends::new(&cfg)?;
        Ok(Suite { cfg, bk, key: RefCell::new(None) })
    }

    fn primary(&self) -> &Backend {
        self.bk.primary(self.cfg.backend)
    }

    fn key_runs(&self) -> Result<Rc<Vec<KeyRun>>, CliError> {
        if let Some(r) = self.key.borrow().as_ref() {
            return Ok(r.clone());
        }
        let mut runs = key_runs(self.primary(), 1, 1, self.cfg.l_max, 5, self.cfg.seed)?;
        runs.extend(key_runs(self.primary(), 2, 2, self.cfg.l_max, 5, self.cfg.seed)?);
        let runs = Rc::new(runs);
        *self.key.borrow_mut() = Some(runs.clone());
        Ok(runs)
    }

    pub fn run(&self, id: usize) -> Result<Report, CliError> {
        let cfg = &self.cfg;
        let b = self.primary();
        let q = q_of(b);
        let mut r = match id {
            1 => {
                let mut ns = vec![3, 4, 5];
                if !ns.contains(&cfg.big_n) {
                    ns.push(cfg.big_n);
                }
                dims(&ns, 8, cfg.caps)?
            }
            2 => jw(&self.bk.tensor, &[&self.bk.coupled], 6, 20, cfg.seed)?,
            3 => haar(b, 8, cfg.seed)?,
            4 => rotation(b, cfg.k_max, 100, 1, 1, cfg.b_max, cfg.seed)?,
            5 => partial_trace(b, 1, 1, cfg.b_max)?,
            6 => alpha(b, 6, 8, cfg.seed)?,
            7 => projection(b, 1, 1, 5)?,
            8 => kappa(&self.bk.tensor, b, 2, cfg.l_max)?,
            9 => key_report(&self.key_runs()?, q),
            10 => mixing_report(&self.key_runs()?, q),
            11 => spectral(b, 1, 1, cfg.l_max, 21, 1.2)?,
            12 => cross_certification(cfg, &self.bk)?,
            13 => determinism(cfg)?,
            _ => return Err(CliError::Config(format!("no criterion {id}"))),
        };
        let c = &CRITERIA[id - 1];
        r.command = format!("c{:02}_{}", c.id, c.slug);
        Ok(r)
    }
}

/// Every basis-independent quantity of the suites, at in-cap sizes, on both backends.
pub fn cross_certification(cfg: &RunConfig, bk: &Backends) -> Result<Report, CliError> {
    type Runner<'a> = Box<dyn Fn(&Backend) -> Result<Report, CliError> + 'a>;
    let seed = cfg.seed;
    let runners: Vec<(&str, Runner)> = vec![
        ("rotation identity traces", Box::new(move |b| rotation(b, 5, 4, 1, 1, 2, seed))),
        ("partial-trace deviations", Box::new(|b| partial_trace(b, 1, 1, 4))),
        ("alpha", Box::new(move |b| alpha(b, 5, 6, seed))),
        ("projection defects", Box::new(|b| projection(b, 1, 1, 4))),
        ("kappa", Box::new(|b| kappa(&bk.tensor, b, 2, 4))),
        ("key estimate n=k=1", Box::new(move |b| Ok(key_report(&key_runs(b, 1, 1, 3, 2, seed)?, q_of(b))))),
        ("mixing sums n=k=1", Box::new(move |b| Ok(mixing_report(&key_runs(b, 1, 1, 3, 2, seed)?, q_of(b))))),
        ("spectral density n=k=1", Box::new(|b| spectral(b, 1, 1, 3, 5, 1.2))),
        ("Haar moments degree <= 4", Box::new(move |b| haar(b, 4, seed))),
    ];
    let mut rep = Report::new("cross-check");
    let mut t = Table::new("comparisons", 1, &["quantity", "pass", "detail"], false);
    for (name, f) in &runners {
        let c = cross_compare(name, &f(&bk.coupled)?, &f(&bk.tensor)?, cfg.tol);
        t.push(vec![(*name).into(), c.pass.into(), c.detail.clone().into()]);
        rep.checks.push(c);
    }
    rep.tables.push(t);
    Ok(rep)
}

/// Seeded experiments rerun on fresh backends serialize byte-identically.
pub fn determinism(cfg: &RunConfig) -> Result<Report, CliError> {
    let once = || -> Result<Vec<Vec<(String, Vec<u8>)>>, CliError> {
        let bk = Backends::new(cfg)?;
        let b = bk.primary(cfg.backend);
        let reports = [
            rotation(b, 3, 10, 1, 1, 2, cfg.seed)?,
            alpha(b, 4, 5, cfg.seed)?,
            key_report(&key_runs(b, 1, 1, 3, 2, cfg.seed)?, q_of(b)),
            jw(&bk.tensor, &[], 3, 4, cfg.seed)?,
        ];
        reports.iter().map(|r| serialize_report(r, Format::Json)).collect()
    };
    let (a, b) = (once()?, once()?);
    let mut rep = Report::new("determinism");
    let mut t = Table::new("reruns", 1, &["file", "bytes", "identical"], false);
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        t.push(vec![x.0.clone().into(), x.1.len().into(), (x == y).into()]);
    }
    let same = a == b;
    rep.checks.push(Check::new(
        "seeded reruns byte-identical",
        same,
        format!("{} report files compared", t.rows.len()),
    ));
    rep.tables.push(t);
    Ok(rep)
}
