//! Sweeps over `m` and `k`, minimal-parameter searches and the random
//! stable-matrix suites, reported as CSV or JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::analysis::system_norms;
use crate::bounds::SolverParams;
use crate::error::{Error, Result};
use crate::linalg::{c, CVec};
use crate::problem::OdeProblem;
use crate::random::random_stable_matrix;
use crate::scheme::SchemeRegistry;
use crate::solver::solve_block_forward;
use crate::system::build_by_name;
use crate::trajectory::{augmented_generator, state_at};

pub const CSV_HEADER: &str = "scheme,T,m,k,p,rel_error,kappa,p_succ";
/// Largest order tried by the `k*` search.
pub const K_SEARCH_CAP: usize = 64;
/// Largest step count tried by the `m*` search.
pub const M_SEARCH_CAP: usize = 1 << 16;

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub scheme: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub m: usize,
    pub k: usize,
    pub p: usize,
    pub rel_error: f64,
    pub kappa: f64,
    pub p_succ: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Aggregate {
    pub group: String,
    pub quantity: String,
    pub mean: f64,
    pub stddev: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Metadata {
    pub seeds: Vec<u64>,
    pub tolerances: BTreeMap<String, f64>,
    pub wall_time_s: f64,
    pub notes: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub kind: String,
    pub rows: Vec<SweepRow>,
    /// `m*` or `k*` per scheme (single-problem sweeps)
    pub optimum: BTreeMap<String, Option<usize>>,
    pub aggregates: Vec<Aggregate>,
    pub metadata: Metadata,
}

impl SweepReport {
    fn new(kind: &str) -> Self {
        Self { kind: kind.into(), rows: Vec::new(), optimum: BTreeMap::new(), aggregates: Vec::new(), metadata: Metadata::default() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.12e},{:.12e},{:.12e}",
                r.scheme, r.horizon, r.m, r.k, r.p, r.rel_error, r.kappa, r.p_succ
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn rows_for<'a>(&'a self, scheme: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn aggregate(&self, group: &str, quantity: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.group == group && a.quantity == quantity)
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn aggregate(group: String, quantity: &str, xs: &[f64]) -> Aggregate {
    let (mean, stddev) = mean_std(xs);
    Aggregate { group, quantity: quantity.into(), mean, stddev, count: xs.len() }
}

/// `x(T)` from the augmented exponential.
pub fn reference_terminal(problem: &OdeProblem) -> Result<CVec> {
    let x = state_at(problem, &augmented_generator(problem), problem.horizon)?;
    if x.norm() == 0.0 {
        return Err(Error::Degenerate("x(T) = 0, relative error is undefined".into()));
    }
    Ok(x)
}

/// Builds and solves one configuration; `kappa` is skipped (NaN) when not
/// requested. Non-finite solutions count as infinite error.
pub fn evaluate(problem: &OdeProblem, x_t: &CVec, scheme: &str, m: usize, k: usize, p: usize, kappa: bool) -> Result<SweepRow> {
    let params = SolverParams::new(scheme, m, k, p, problem.horizon)?;
    let sys = build_by_name(problem, &params)?;
    let b = solve_block_forward(&sys)?;
    let err = (&b.terminal - x_t).norm() / x_t.norm();
    let kap = if kappa {
        match system_norms(&sys) {
            Ok((hi, inv)) => hi * inv,
            Err(Error::Singular(_)) | Err(Error::SingularBlock { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        }
    } else {
        f64::NAN
    };
    Ok(SweepRow {
        scheme: scheme.into(),
        horizon: problem.horizon,
        m,
        k,
        p,
        rel_error: if err.is_finite() { err } else { f64::INFINITY },
        kappa: if kap.is_nan() && kappa { f64::INFINITY } else { kap },
        p_succ: b.p_succ,
        seed: None,
    })
}

/// Maps `f` over `items` on scoped worker threads. Results come back in
/// input order whatever the scheduling; the first error wins by index.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<(usize, Result<R>)> = std::thread::scope(|sc| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                sc.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= items.len() {
                            break out;
                        }
                        out.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    slots.sort_by_key(|(i, _)| *i);
    slots.into_iter().map(|(_, r)| r).collect()
}

fn schemes() -> Vec<&'static str> {
    SchemeRegistry::default().names()
}

/// Every registered scheme at every `m` in `m_range` with `p = 1`.
pub fn sweep_m(problem: &OdeProblem, order: usize, eps: f64, m_range: &[usize]) -> Result<SweepReport> {
    sweep_m_with(problem, order, 1, eps, m_range)
}

pub fn sweep_m_with(problem: &OdeProblem, order: usize, padding: usize, eps: f64, m_range: &[usize]) -> Result<SweepReport> {
    if m_range.is_empty() {
        return Err(Error::Input("empty m range".into()));
    }
    let start = Instant::now();
    let x_t = reference_terminal(problem)?;
    let mut ms = m_range.to_vec();
    ms.sort_unstable();
    ms.dedup();
    let mut rep = SweepReport::new("sweep-m");
    let points: Vec<(usize, &str)> = ms.iter().flat_map(|&m| schemes().into_iter().map(move |s| (m, s))).collect();
    rep.rows = par_map(&points, |&(m, s)| evaluate(problem, &x_t, s, m, order, padding, true))?;
    for s in schemes() {
        let best = rep.rows_for(s).find(|r| r.rel_error < eps).map(|r| r.m);
        rep.optimum.insert(s.into(), best);
    }
    rep.metadata.tolerances.insert("eps".into(), eps);
    rep.metadata.notes.insert("k".into(), order.to_string());
    rep.metadata.wall_time_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Smallest `m` with `rel_error < eps`: double until a pass, then bisect
/// back. Assumes the error is monotone in `m` between the brackets.
pub fn min_steps(problem: &OdeProblem, x_t: &CVec, scheme: &str, order: usize, padding: usize, eps: f64) -> Result<usize> {
    let pass = |m: usize| -> Result<bool> { Ok(evaluate(problem, x_t, scheme, m, order, padding, false)?.rel_error < eps) };
    let mut hi = 1;
    while !pass(hi)? {
        hi *= 2;
        if hi > M_SEARCH_CAP {
            return Err(Error::Search(format!("{scheme}: no m up to {M_SEARCH_CAP} reaches {eps}")));
        }
    }
    let mut lo = hi / 2;
    // invariant: lo fails (or is 0), hi passes
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if pass(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `k*` per scheme at `m = p = 1`; rows hold every `k` up to `k*`.
pub fn sweep_k(problem: &OdeProblem, eps: f64) -> Result<SweepReport> {
    let start = Instant::now();
    let x_t = reference_terminal(problem)?;
    let mut rep = SweepReport::new("sweep-k");
    for s in schemes() {
        let mut found = None;
        for k in 1..=K_SEARCH_CAP {
            let row = evaluate(problem, &x_t, s, 1, k, 1, true)?;
            let ok = row.rel_error < eps;
            rep.rows.push(row);
            if ok {
                found = Some(k);
                break;
            }
        }
        match found {
            Some(k) => {
                rep.optimum.insert(s.into(), Some(k));
            }
            None => return Err(Error::Search(format!("{s}: no k up to {K_SEARCH_CAP} reaches {eps}"))),
        }
    }
    rep.rows.sort_by(|a, b| a.k.cmp(&b.k).then_with(|| a.scheme.cmp(&b.scheme)));
    rep.metadata.tolerances.insert("eps".into(), eps);
    rep.metadata.wall_time_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

pub const SAMPLER_NOTE: &str = "ChaCha8 seed_from_u64; eigenvalues Re in [-2,-0.05], Im in [-2,2]; \
similarity U diag(s) V^H with s in [1,50]";

fn ones(n: usize) -> CVec {
    CVec::from_element(n, c(1.0))
}

/// Horizon suite: `m*` per scheme for each seed and horizon,
/// with `κ` and `P_succ` at `m*`.
pub fn random_suite(seeds: &[u64], horizons: &[f64], order: usize, eps: f64, dim: usize) -> Result<SweepReport> {
    let start = Instant::now();
    let mut rep = SweepReport::new("random-suite");
    let points: Vec<(u64, f64)> = seeds.iter().flat_map(|&sd| horizons.iter().map(move |&t| (sd, t))).collect();
    let per_point = par_map(&points, |&(seed, t)| {
        let a = random_stable_matrix(dim, seed, false);
        let problem = OdeProblem::new(a, ones(dim), ones(dim), t)?;
        let x_t = reference_terminal(&problem)?;
        let mut out = Vec::new();
        for s in schemes() {
            let m = min_steps(&problem, &x_t, s, order, 1, eps)?;
            let mut row = evaluate(&problem, &x_t, s, m, order, 1, true)?;
            row.seed = Some(seed);
            out.push(row);
        }
        Ok(out)
    })?;
    rep.rows = per_point.into_iter().flatten().collect();
    rep.rows.sort_by(|a, b| {
        a.horizon.total_cmp(&b.horizon).then_with(|| a.seed.cmp(&b.seed)).then_with(|| a.scheme.cmp(&b.scheme))
    });
    for &t in horizons {
        for s in schemes() {
            let sel: Vec<&SweepRow> = rep.rows.iter().filter(|r| r.scheme == s && r.horizon == t).collect();
            let g = format!("{s} T={t}");
            let col = |f: fn(&SweepRow) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<_>>();
            rep.aggregates.push(aggregate(g.clone(), "m_star", &col(|r| r.m as f64)));
            rep.aggregates.push(aggregate(g.clone(), "kappa", &col(|r| r.kappa)));
            rep.aggregates.push(aggregate(g, "p_succ", &col(|r| r.p_succ)));
        }
    }
    rep.metadata.seeds = seeds.to_vec();
    rep.metadata.tolerances.insert("eps".into(), eps);
    rep.metadata.notes.insert("sampler".into(), SAMPLER_NOTE.into());
    rep.metadata.notes.insert("k".into(), order.to_string());
    rep.metadata.wall_time_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Mean `m*(taylor) − m*(pade)` per horizon, in the order given.
pub fn m_star_gaps(rep: &SweepReport, horizons: &[f64]) -> Vec<f64> {
    horizons
        .iter()
        .map(|t| {
            let mean = |s: &str| rep.aggregate(&format!("{s} T={t}"), "m_star").map_or(f64::NAN, |a| a.mean);
            mean("taylor") - mean("pade")
        })
        .collect()
}

/// Order suite: unit-norm stable matrices, `T = 1`,
/// `m = p = 1`, `k*` per scheme with `κ` at `k*`.
pub fn k_star_suite(seeds: &[u64], dim: usize, eps: f64) -> Result<SweepReport> {
    let start = Instant::now();
    let mut rep = SweepReport::new("k-star-suite");
    let per_seed = par_map(seeds, |&seed| {
        let a = random_stable_matrix(dim, seed, true);
        let problem = OdeProblem::new(a, ones(dim), ones(dim), 1.0)?;
        let sweep = sweep_k(&problem, eps)?;
        let mut out = Vec::new();
        for (s, k) in &sweep.optimum {
            let k = k.expect("sweep_k fails instead of leaving k* empty");
            let mut row = sweep.rows.iter().find(|r| &r.scheme == s && r.k == k).cloned().expect("row at k*");
            row.seed = Some(seed);
            out.push(row);
        }
        Ok(out)
    })?;
    rep.rows = per_seed.into_iter().flatten().collect();
    rep.rows.sort_by(|a, b| a.seed.cmp(&b.seed).then_with(|| a.scheme.cmp(&b.scheme)));
    for s in schemes() {
        let sel: Vec<&SweepRow> = rep.rows.iter().filter(|r| r.scheme == s).collect();
        rep.aggregates.push(aggregate(s.into(), "k_star", &sel.iter().map(|r| r.k as f64).collect::<Vec<_>>()));
        rep.aggregates.push(aggregate(s.into(), "kappa", &sel.iter().map(|r| r.kappa).collect::<Vec<_>>()));
    }
    rep.metadata.seeds = seeds.to_vec();
    rep.metadata.tolerances.insert("eps".into(), eps);
    rep.metadata.notes.insert("sampler".into(), format!("{SAMPLER_NOTE}; rescaled to unit spectral norm"));
    rep.metadata.wall_time_s = start.elapsed().as_secs_f64();
    Ok(rep)
}
