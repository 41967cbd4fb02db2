//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria 3 and 10 each contain one clause that the exact arithmetic rules
//! out (see README). Those lines print FAIL. The run only errors when a
//! result differs from that expectation: an attainable clause failing, or an
//! unattainable one unexpectedly passing.

use std::time::{Duration, Instant};

use padelab::analysis::{kappa_bound, taylor_inverse_growth, w_matrix};
use padelab::bounds::{select_parameters, theta_max, SolverParams, Strategy};
use padelab::circuit::{l_encoding_stages, sample_a_encoding};
use padelab::experiments::{k_star_suite, sweep_m};
use padelab::linalg::{c, spectral_norm, CMat};
use padelab::random::{self, gaussian_vector, random_hermitian_nsd, random_with_norm};
use padelab::scheme::scheme;
use padelab::solver::{solve_block_forward, solve_dense, BlockForward, SolutionBundle, SystemSolver};
use padelab::suites::run_suite;
use padelab::system::{build_by_name, build_unreduced_pade_system};
use padelab::trajectory::classical_reference_trajectory;
use padelab::{OdeProblem, Result};

/// Published θ_k at δ = 1e-8, k = 5..=18.
const TABLE1: [f64; 14] = [1.49, 2.36, 3.34, 4.40, 5.53, 6.69, 7.89, 9.11, 10.35, 11.61, 12.88, 14.16, 15.45, 16.74];

/// Independent numpy oracles at λh = −10, k = 9 (dense inverse, 2-norm).
const M9_INV_NORM: f64 = 4552.323_678_577_54;
const W9_INV_NORM: f64 = 1.818_587_986_258_66;

/// Criteria with a clause that cannot hold.
const UNATTAINABLE: [usize; 2] = [3, 10];

struct Outcome {
    pass: bool,
    /// every clause that can hold did hold
    attainable_ok: bool,
    detail: String,
}

impl Outcome {
    fn plain(pass: bool, detail: String) -> Self {
        Self { pass, attainable_ok: pass, detail }
    }
}

fn within(t: Duration, secs: u64) -> bool {
    t <= Duration::from_secs(secs)
}

fn c1() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, want) in TABLE1.iter().enumerate() {
        worst = worst.max((theta_max(i + 5, 1e-8)? - want).abs());
    }
    let t = start.elapsed();
    Ok(Outcome::plain(worst <= 0.01 && within(t, 60), format!("max |θ_k − table| = {worst:.4}, {:.1}s", t.as_secs_f64())))
}

fn c2() -> Result<Outcome> {
    let start = Instant::now();
    let rep = run_suite("hermitian", 50, 2024)?;
    let t = start.elapsed();
    let w: Vec<_> = rep.rows.iter().filter(|r| r.quantity == "w_inv").collect();
    let ok = w.len() == 50 && w.iter().all(|r| r.satisfied) && within(t, 120);
    Ok(Outcome::plain(
        ok,
        format!("{}/50 within bound, worst ratio {:.3}, {:.1}s", w.iter().filter(|r| r.satisfied).count(), rep.worst_ratio("w_inv"), t.as_secs_f64()),
    ))
}

fn c3() -> Result<Outcome> {
    let a = CMat::from_element(1, 1, c(-10.0));
    let g = taylor_inverse_growth(&a, 1.0, 9)?;
    let w = w_matrix(&a, 1.0, 9)?;
    let w_inv = spectral_norm(&w.try_inverse().expect("W_9 is invertible"))?;
    let threshold = 10f64.exp() / 10f64.sqrt();
    let oracle_ok = (g.measured / M9_INV_NORM - 1.0).abs() < 1e-8 && (w_inv / W9_INV_NORM - 1.0).abs() < 1e-8;
    let taylor_clause = g.measured >= threshold;
    let pade_clause = w_inv <= 10.2;
    Ok(Outcome {
        pass: taylor_clause && pade_clause,
        attainable_ok: pade_clause && oracle_ok && g.measured >= g.lower_bound,
        detail: format!(
            "‖M_9⁻¹‖ = {:.1} vs e^10/√10 = {threshold:.1} ({}); ‖W_9⁻¹‖ = {w_inv:.4} ≤ 10.2 ({})",
            g.measured,
            if taylor_clause { "holds" } else { "fails: the exact first column gives only 4528.7" },
            if pade_clause { "holds" } else { "fails" },
        ),
    })
}

fn c4() -> Result<Outcome> {
    let rep = run_suite("thm36", 50, 36)?;
    let ok = rep.rows.len() == 100 && rep.violations() == 0 && rep.rows.iter().all(|r| r.k >= 3);
    Ok(Outcome::plain(
        ok,
        format!(
            "50 samples ({} rejected for drift), worst ‖L⁻¹‖ ratio {:.3}, worst κ ratio {:.3}",
            rep.rejected,
            rep.worst_ratio("l_inv"),
            rep.worst_ratio("kappa")
        ),
    ))
}

fn c5() -> Result<Outcome> {
    let mut r = random::rng(5);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let n = 1 + i % 4;
        let k = 1 + i % 6;
        let m = 1 + i % 3;
        let a = random_hermitian_nsd(&mut r, n, 0.5 + (i as f64) / 4.0);
        let p = OdeProblem::new(a, gaussian_vector(&mut r, n), gaussian_vector(&mut r, n), m as f64)?;
        let sys = build_unreduced_pade_system(&p, m, k)?;
        let b = SolutionBundle::from_solution(&sys, &solve_dense(&sys)?)?;
        for step in &b.z_blocks {
            let scale = step.iter().map(|v| v.norm()).fold(1.0, f64::max);
            for j in 1..=k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                worst = worst.max((&step[k - j] - &step[k + j] * c(sign)).norm() / scale);
            }
        }
    }
    Ok(Outcome::plain(worst <= 1e-12, format!("max |z_j − (−1)^j z̃_j| = {worst:.2e} over 20 instances")))
}

fn c6() -> Result<Outcome> {
    let mut r = random::rng(6);
    let (mut solve_gap, mut rec_gap): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    'outer: loop {
        for sch in ["pade", "taylor"] {
            for hermitian in [true, false] {
                for k in [1, 3, 7] {
                    for m in [1, 2, 4] {
                        for pad in [1, 3] {
                            if count == 200 {
                                break 'outer;
                            }
                            count += 1;
                            let n = r.random_range_usize(1, 4);
                            let h = 0.25 + 0.75 * r.unit();
                            let u = r.unit();
                            let a = if hermitian {
                                random_hermitian_nsd(&mut r, n, (0.5 + 3.5 * u) / h)
                            } else {
                                random_with_norm(&mut r, n, u.max(0.05) / h)
                            };
                            let b = gaussian_vector(&mut r, n);
                            let p = OdeProblem::new(a.clone(), b.clone(), gaussian_vector(&mut r, n), h * m as f64)?;
                            let sys = build_by_name(&p, &SolverParams::new(sch, m, k, pad, p.horizon)?)?;
                            let fwd = solve_block_forward(&sys)?;
                            let dense = solve_dense(&sys)?;
                            let x = BlockForward.solve(&sys)?;
                            solve_gap = solve_gap.max((&x - &dense).norm() / dense.norm());
                            let (pm, g) = scheme(sch)?.recurrence(&a, sys.layout.h, k)?;
                            let mut xh = p.vec_x0.clone();
                            for it in &fwd.iterates {
                                xh = &pm * &xh + &g * &b;
                                rec_gap = rec_gap.max((it - &xh).norm() / xh.norm().max(1.0));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Outcome::plain(
        count == 200 && solve_gap <= 1e-10 && rec_gap <= 1e-10,
        format!("{count} instances: forward vs dense {solve_gap:.2e}, x̂ vs recurrence {rec_gap:.2e}"),
    ))
}

fn c7() -> Result<Outcome> {
    let mut r = random::rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range_usize(1, 5);
        let norm = 0.3 + 0.7 * r.unit();
        let a = random_with_norm(&mut r, n, norm);
        let t = (1.0 / norm).max(1.0) + 4.0 * r.unit();
        let p = OdeProblem::new(a, gaussian_vector(&mut r, n), gaussian_vector(&mut r, n), t)?;
        let params = select_parameters(&p, 1e-6, Strategy::UnitStep)?;
        let sys = build_by_name(&p, &params)?;
        let b = solve_block_forward(&sys)?;
        let traj = classical_reference_trajectory(&p, params.steps)?;
        for (i, xh) in b.iterates.iter().enumerate() {
            let x = &traj.states[i + 1];
            let bound = params.delta * t * (norm * x.norm() + p.vec_b.norm());
            worst = worst.max((xh - x).norm() / bound);
        }
    }
    Ok(Outcome::plain(worst <= 1.0, format!("worst error/bound ratio {worst:.3e} over 20 instances")))
}

fn c8() -> Result<Outcome> {
    let rep = run_suite("success", 50, 43)?;
    Ok(Outcome::plain(
        rep.violations() == 0 && rep.rows.len() == 50,
        format!("50 samples, worst (1/P_succ)/(70g²) = {:.3e}", rep.worst_ratio("inv_p_succ")),
    ))
}

fn c9() -> Result<Outcome> {
    let start = Instant::now();
    let mut checked = 0;
    let mut failed = Vec::new();
    for n in [1, 2] {
        for m in [1, 2] {
            for k1 in [2, 4] {
                for seed in [None, Some(9)] {
                    let a = sample_a_encoding(n, seed)?;
                    let (_, rep) = l_encoding_stages(&a, 1.0, m, k1 - 1)?;
                    checked += rep.stages.len();
                    if !rep.passed {
                        failed.push(format!("n={n} m={m} k+1={k1} random={}", seed.is_some()));
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    Ok(Outcome::plain(
        failed.is_empty() && within(t, 300),
        format!("16 encodings, {checked} stage checks, failures {failed:?}, {:.1}s", t.as_secs_f64()),
    ))
}

fn c10() -> Result<Outcome> {
    let p = OdeProblem::tridiagonal(5, 30.0)?;
    let ms: Vec<usize> = (1..=120).collect();
    let rep = sweep_m(&p, 9, 1e-10, &ms)?;
    let norm_a = spectral_norm(&p.matrix_a)?;
    let pade_m = rep.optimum["pade"];
    let taylor_m = rep.optimum["taylor"];
    let mut kappa_ok = true;
    let mut worst: f64 = 0.0;
    for r in rep.rows_for("pade") {
        let bound = kappa_bound(r.m, r.p, r.k, norm_a * 30.0 / r.m as f64).expect("k >= 3");
        worst = worst.max(r.kappa / bound);
        kappa_ok &= r.kappa <= bound;
    }
    let pade_clause = pade_m.is_some_and(|m| m <= 20);
    let taylor_clause = taylor_m.is_some_and(|m| m >= 100);
    Ok(Outcome {
        pass: pade_clause && taylor_clause && kappa_ok,
        attainable_ok: pade_clause && kappa_ok && taylor_m == Some(26),
        detail: format!(
            "m*(pade) = {pade_m:?}, m*(taylor) = {taylor_m:?} (needs >= 100), worst κ/bound {worst:.3}, {:.1}s",
            rep.metadata.wall_time_s
        ),
    })
}

fn c11() -> Result<Outcome> {
    let seeds: Vec<u64> = (0..30).collect();
    let rep = k_star_suite(&seeds, 5, 1e-10)?;
    let pade = rep.aggregate("pade", "k_star").expect("pade k*").mean;
    let taylor = rep.aggregate("taylor", "k_star").expect("taylor k*").mean;
    Ok(Outcome::plain(pade <= 0.65 * taylor, format!("mean k* pade {pade:.3}, taylor {taylor:.3}, ratio {:.3}", pade / taylor)))
}

/// Small helpers over the suite RNG used only here.
trait Draws {
    fn unit(&mut self) -> f64;
    fn random_range_usize(&mut self, lo: usize, hi: usize) -> usize;
}

impl Draws for random::SuiteRng {
    fn unit(&mut self) -> f64 {
        rand::Rng::random::<f64>(self)
    }
    fn random_range_usize(&mut self, lo: usize, hi: usize) -> usize {
        rand::Rng::random_range(self, lo..=hi)
    }
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("θ_k table", c1),
        ("‖W_k⁻¹‖ Hermitian suite", c2),
        ("Taylor vs Padé inverse growth", c3),
        ("‖L⁻¹‖ and κ suite", c4),
        ("parity of unreduced solves", c5),
        ("solver oracle equivalence", c6),
        ("accuracy chain", c7),
        ("success probability", c8),
        ("circuit verification", c9),
        ("m sweep", c10),
        ("k* trend", c11),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        let out = f().unwrap_or_else(|e| Outcome::plain(false, format!("error: {e}")));
        println!("criterion {id:>2} {name}: {} | {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
        let expect_fail = UNATTAINABLE.contains(&id);
        if out.pass == expect_fail || !out.attainable_ok {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all results as expected (criteria {UNATTAINABLE:?} fail on unattainable clauses)");
    } else {
        println!("acceptance: unexpected results for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
