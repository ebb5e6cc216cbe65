//! Analytic-versus-oracle comparison table for one parameter set.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Erlang, StudentsT};

use crate::analysis::{Analysis, SolveOptions};
use crate::departure::{build_mmap, departure_rates, Direction, MarkCalculator};
use crate::error::Result;
use crate::linalg::{max_abs, norm_inf};
use crate::model::{Mark, ModelParams};
use crate::sim::{sequence_from_code, simulate, Estimate, SimConfig};
use crate::sojourn::{
    erlang_max_sojourn, mean_first_passage_upper, mean_sojourn_little, mean_sojourn_probabilistic, Convention,
};
use crate::stability::{drift_rates_a, drift_rates_b, stationary_of_finite_generator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    /// Reported without a pass/fail verdict.
    Info,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub criterion: &'static str,
    pub detail: String,
    pub value: f64,
    pub reference: f64,
    pub tol: f64,
    pub status: Status,
}

impl Check {
    fn within(criterion: &'static str, detail: impl Into<String>, value: f64, reference: f64, tol: f64) -> Self {
        let ok = (value - reference).abs() <= tol;
        Self::flag(criterion, detail, value, reference, tol, ok)
    }

    fn flag(criterion: &'static str, detail: impl Into<String>, value: f64, reference: f64, tol: f64, ok: bool) -> Self {
        Self {
            criterion,
            detail: detail.into(),
            value,
            reference,
            tol,
            status: if ok { Status::Pass } else { Status::Fail },
        }
    }

    fn ci(criterion: &'static str, detail: impl Into<String>, analytic: f64, e: &Estimate, widen: f64) -> Self {
        Self::within(criterion, detail, analytic, e.mean, e.half_width * widen)
    }
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub solve: SolveOptions,
    /// Simulation side; its `params` are overwritten. `None` skips the simulation rows.
    pub sim: Option<SimConfig>,
    /// Largest truncated generator solved densely.
    pub dense_limit: usize,
    pub theta_grid: Vec<f64>,
    pub quadrature_cases: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            sim: None,
            dense_limit: 2500,
            theta_grid: vec![0.5, 1.0, 1.5, 2.0],
            quadrature_cases: 100,
            seed: 1,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.status != Status::Fail)
}

/// Half-width multiplier turning a 99% interval into a family-wise 99% interval over `k` comparisons.
pub fn bonferroni_factor(replications: usize, k: usize) -> f64 {
    if replications < 2 || k <= 1 {
        return 1.0;
    }
    let t = StudentsT::new(0.0, 1.0, (replications - 1) as f64).expect("df > 0");
    t.inverse_cdf(1.0 - 0.005 / k as f64) / t.inverse_cdf(0.995)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `int_0^inf exp(-theta x) [1 - F1(x) F2(x)] dx` by quadrature on `x = t / (1 - t)`.
pub fn erlang_max_quadrature(lam1: f64, r1: usize, lam2: f64, r2: usize, theta: f64) -> f64 {
    let e1 = Erlang::new(r1 as u64, lam1).expect("valid Erlang");
    let e2 = Erlang::new(r2 as u64, lam2).expect("valid Erlang");
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let x = t / (1.0 - t);
        let tail = 1.0 - e1.cdf(x) * e2.cdf(x);
        (-theta * x).exp() * tail / (1.0 - t).powi(2)
    };
    adaptive_simpson(&g, 0.0, 1.0, 1e-13)
}

fn means(p: &ModelParams, opts: &SolveOptions) -> Result<(f64, f64)> {
    let a = Analysis::solve(p, opts)?;
    Ok((a.mean_q1(), a.mean_q2()))
}

fn strictly(xs: &[f64], increasing: bool) -> bool {
    xs.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

pub fn validate(p: &ModelParams, opts: &ValidateOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let a = Analysis::solve(p, &opts.solve)?;
    let gen = a.generator()?;
    let pi = a.dist.flat();

    if gen.dim() <= opts.dense_limit {
        let dense = stationary_of_finite_generator(&gen.to_dense())?;
        let gap = pi.iter().zip(&dense).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        out.push(Check::within("oracle_equivalence", "stationary vs dense solve (inf-norm)", gap, 0.0, 1e-8));
    } else {
        out.push(Check {
            criterion: "oracle_equivalence",
            detail: format!("generator of order {} above dense limit", gen.dim()),
            value: f64::NAN,
            reference: 0.0,
            tol: 1e-8,
            status: Status::Skipped,
        });
    }

    for rg in [&a.pos, &a.neg] {
        out.push(Check::flag(
            "rg_residuals",
            format!("{:?} axis, cap {}", rg.axis, rg.cap),
            rg.residual,
            0.0,
            1e-12,
            rg.residual <= 1e-12,
        ));
    }
    let balance = max_abs(&gen.blocks.vec_mul(&pi)?);
    out.push(Check::within("global_balance", "max |pi Q|", balance, 0.0, 1e-8));

    let mmap = build_mmap(p, a.window())?;
    let rates = departure_rates(&a.dist, &mmap)?;
    out.push(Check::within("flow_conservation", "A throughput vs lambda1", rates.mu_a_total, p.lambda1, 1e-8));
    out.push(Check::within("flow_conservation", "B throughput vs lambda2", rates.mu_b_total, p.lambda2, 1e-8));

    let little = mean_sojourn_little(&a.dist);
    let xi = mean_first_passage_upper(&a.dist, Convention::Pasta)?;
    out.push(Check::flag("sojourn_bound", "E[W] little <= E[xi]", little, xi, 1e-9, little <= xi + 1e-9));

    let (sq1, sq2) = means(&p.swapped(), &opts.solve)?;
    out.push(Check::within("swap_symmetry", "E[Q1] vs swapped E[Q2]", a.mean_q1(), sq2, 1e-9));
    out.push(Check::within("swap_symmetry", "E[Q2] vs swapped E[Q1]", a.mean_q2(), sq1, 1e-9));

    let a_bound = 1.0f64.max(p.lambda1 / (p.m as f64 * p.theta1)) + 1.0;
    let b_bound = 1.0f64.max(p.lambda2 / (p.n as f64 * p.theta2)) + 1.0;
    let mut witness = true;
    for d in 0..200i64 {
        let k = a_bound.floor() as i64 + 1 + d;
        let l = -(b_bound.floor() as i64 + 1 + d);
        witness &= drift_rates_a(k, p)?.drifts_inward() && drift_rates_b(l, p)?.drifts_inward();
    }
    out.push(Check::flag("stability_witness", "inward drift beyond the level bound", 0.0, 0.0, 0.0, witness));

    let mut q1_t1 = Vec::new();
    let mut q2_t1 = Vec::new();
    let mut q1_t2 = Vec::new();
    let mut q2_t2 = Vec::new();
    for &t in &opts.theta_grid {
        let (x1, x2) = means(&ModelParams::new(p.lambda1, p.lambda2, t, p.theta2, p.m, p.n)?, &opts.solve)?;
        q1_t1.push(x1);
        q2_t1.push(x2);
        let (y1, y2) = means(&ModelParams::new(p.lambda1, p.lambda2, p.theta1, t, p.m, p.n)?, &opts.solve)?;
        q1_t2.push(y1);
        q2_t2.push(y2);
    }
    out.push(Check::flag("theta_trends", "E[Q1] decreasing in theta1", 0.0, 0.0, 0.0, strictly(&q1_t1, false)));
    out.push(Check::flag("theta_trends", "E[Q1] increasing in theta2", 0.0, 0.0, 0.0, strictly(&q1_t2, true)));
    out.push(Check::flag("theta_trends", "E[Q2] increasing in theta1", 0.0, 0.0, 0.0, strictly(&q2_t1, true)));
    out.push(Check::flag("theta_trends", "E[Q2] decreasing in theta2", 0.0, 0.0, 0.0, strictly(&q2_t2, false)));

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.quadrature_cases {
        let (l1, l2, th) = (rng.random_range(0.1..5.0), rng.random_range(0.1..5.0), rng.random_range(0.1..5.0));
        let (r1, r2) = (rng.random_range(1..=10usize), rng.random_range(1..=10usize));
        let closed = erlang_max_sojourn(l1, r1, l2, r2, th)?;
        worst = worst.max((closed - erlang_max_quadrature(l1, r1, l2, r2, th)).abs());
    }
    out.push(Check::within("erlang_closed_form", "max error vs quadrature", worst, 0.0, 1e-10));

    let residual = norm_inf(&(&mmap.d0.to_dense() + mmap.da.to_dense() + mmap.db.to_dense() + mmap.dab.to_dense() - gen.to_dense()));
    out.push(Check::flag("mmap_decomposition", "D0+DA+DB+DAB vs Q", residual, 0.0, 0.0, residual == 0.0));
    let calc = MarkCalculator::new(&a.dist, &mmap)?;
    let mut analytic_seq = Vec::new();
    for len in 1..=3usize {
        for dir in [Direction::Backward, Direction::Forward] {
            let probs: Vec<f64> = (0..3usize.pow(len as u32))
                .map(|c| calc.sequence(&sequence_from_code(c, len), dir))
                .collect::<Result<_>>()?;
            let total: f64 = probs.iter().sum();
            out.push(Check::within("mark_sequences", format!("{dir:?} length {len} sums to 1"), total, 1.0, 1e-7));
            analytic_seq.push((len, dir, probs));
        }
    }
    let marks = calc.probabilities()?;

    let Some(sim_cfg) = &opts.sim else {
        return Ok(out);
    };
    let cfg = SimConfig {
        params: *p,
        sequence_len: sim_cfg.sequence_len.max(3),
        ..sim_cfg.clone()
    };
    let sim = simulate(&cfg)?;
    out.push(Check::ci("simulation", "E[Q1]", a.mean_q1(), &sim.mean_q1, 1.0));
    out.push(Check::ci("simulation", "E[Q2]", a.mean_q2(), &sim.mean_q2, 1.0));
    out.push(Check::ci("simulation", "E[W] little (A)", little, &sim.mean_sojourn_a, 1.0));
    out.push(Check::ci("simulation", "mu_A impatient", rates.mu_a_impatient, &sim.rates.mu_a_impatient, 1.0));
    out.push(Check::ci("simulation", "mu_B impatient", rates.mu_b_impatient, &sim.rates.mu_b_impatient, 1.0));
    out.push(Check::ci("simulation", "mu_AB", rates.mu_ab, &sim.rates.mu_ab, 1.0));
    for (name, analytic, est) in [
        ("backward", marks.backward, sim.backward),
        ("forward", marks.forward, sim.forward),
        ("at departure", marks.at_departure, sim.at_departure),
    ] {
        for mark in Mark::ALL {
            let k = mark.index();
            out.push(Check::ci("simulation", format!("{name} mark {mark}"), analytic[k], &est[k], 1.0));
        }
    }
    let prob = mean_sojourn_probabilistic(&a.dist, Convention::Pasta)?;
    out.push(Check {
        criterion: "simulation",
        detail: "E[W] case formulas (other customers' reneging ignored)".into(),
        value: prob,
        reference: sim.mean_sojourn_a.mean,
        tol: sim.mean_sojourn_a.half_width,
        status: Status::Info,
    });
    let seen: Vec<_> = sim
        .seen_at_arrival
        .iter()
        .filter(|(s, _)| s.i < cfg.seen_limit && s.j < cfg.seen_limit)
        .collect();
    let widen_seen = bonferroni_factor(cfg.replications, seen.len());
    let mut seen_ok = true;
    let mut seen_gap: f64 = 0.0;
    for (s, e) in &seen {
        let pr = a.dist.prob(*s);
        seen_gap = seen_gap.max((pr - e.mean).abs());
        seen_ok &= (pr - e.mean).abs() <= e.half_width * widen_seen;
    }
    out.push(Check::flag(
        "simulation",
        format!("state seen by arriving A vs stationary ({} states)", seen.len()),
        seen_gap,
        0.0,
        0.0,
        seen_ok,
    ));
    let comparisons: usize = analytic_seq.iter().map(|(_, _, v)| v.len()).sum();
    let widen = bonferroni_factor(cfg.replications, comparisons);
    for (len, dir, probs) in &analytic_seq {
        let table = &sim.sequences[len - 1];
        let est = match dir {
            Direction::Backward => &table.backward,
            Direction::Forward => &table.forward,
        };
        for (c, prob) in probs.iter().enumerate() {
            let seq: Vec<String> = sequence_from_code(c, *len).iter().map(|m| m.to_string()).collect();
            out.push(Check::ci("mark_sequences", format!("{dir:?} {} vs simulation", seq.join(",")), *prob, &est[c], widen));
        }
    }
    Ok(out)
}
