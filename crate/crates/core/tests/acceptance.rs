//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use common::{discounted_integral, erlang_cdf, stationary_dense, RawChain};
use matchq::analysis::{Analysis, SolveOptions};
use matchq::departure::{build_mmap, departure_rates, Direction, MarkCalculator};
use matchq::linalg::norm_inf;
use matchq::model::{build_block, BlockRole, Mark, ModelParams, StateCoords};
use matchq::rg::RgMeasures;
use matchq::sim::{sequence_from_code, simulate, Estimate, SimConfig};
use matchq::sojourn::{erlang_max_sojourn, erlang_tail_integral, mean_first_passage_upper, mean_sojourn_little, Convention};
use matchq::validate::bonferroni_factor;

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn parameter_sets() -> Vec<ModelParams> {
    [
        (1.0, 2.0, 1.0, 1.0, 2, 3),
        (1.0, 1.0, 0.5, 0.5, 1, 1),
        (2.0, 1.0, 1.5, 0.7, 3, 2),
        (0.5, 1.5, 0.3, 1.2, 1, 2),
        (3.0, 3.0, 1.0, 2.0, 2, 2),
        (1.2, 0.8, 2.0, 0.4, 4, 1),
    ]
    .into_iter()
    .map(|(a, b, c, d, m, n)| ModelParams::new(a, b, c, d, m, n).unwrap())
    .collect()
}

fn label(p: &ModelParams) -> String {
    format!("({},{},{},{},{},{})", p.lambda1, p.lambda2, p.theta1, p.theta2, p.m, p.n)
}

fn solve(p: &ModelParams) -> Analysis {
    Analysis::solve(p, &SolveOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", label(p)))
}

fn within_time(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    if t > limit {
        return Err(format!("{what} took {t:.2?}, limit {limit:?}"));
    }
    Ok(())
}

fn stationary_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    for p in parameter_sets() {
        let start = Instant::now();
        let a = solve(&p);
        let w = a.window();
        let chain = RawChain::new(&p, w.k_neg, w.k_pos);
        if chain.dim() != a.generator().unwrap().dim() {
            return Err(format!("{}: state counts differ", label(&p)));
        }
        let dense = chain.stationary();
        let mut gap: f64 = 0.0;
        for (k, &(i, j)) in chain.states.iter().enumerate() {
            gap = gap.max((a.dist.prob(StateCoords::new(i, j)) - dense[k]).abs());
        }
        within_time(start, Duration::from_secs(10), &label(&p))?;
        if gap > 1e-8 {
            return Err(format!("{}: inf-norm gap {gap:e}", label(&p)));
        }
        worst = worst.max(gap);
    }
    Ok(format!("6 sets, worst inf-norm gap {worst:.2e}"))
}

fn axis_blocks(p: &ModelParams, positive: bool, d: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let get = |role, level| build_block(role, level, p).unwrap().entries;
    let level = if positive { d as i64 } else { -(d as i64) };
    let out = match (positive, d) {
        (true, _) => get(BlockRole::A0, level),
        (false, 0) => get(BlockRole::B0Boundary, 0),
        (false, _) => get(BlockRole::B0, level),
    };
    let local = match (positive, d) {
        (_, 0) => get(BlockRole::C, 0),
        (true, _) => get(BlockRole::A1, level),
        (false, _) => get(BlockRole::B1, level),
    };
    let next = if positive { level + 1 } else { level - 1 };
    let inward_next = match (positive, d + 1) {
        (true, _) => get(BlockRole::A2, next),
        (false, 1) => get(BlockRole::B2Boundary, -1),
        (false, _) => get(BlockRole::B2, next),
    };
    (out, local, inward_next)
}

fn axis_residual(p: &ModelParams, rg: &RgMeasures, positive: bool) -> f64 {
    let sign = if positive { 1 } else { -1 };
    let lvl = |d: usize| sign * d as i64;
    let mut worst: f64 = 0.0;
    for d in 0..rg.cap - 1 {
        let (out, _, _) = axis_blocks(p, positive, d);
        let (_, local1, in2) = axis_blocks(p, positive, d + 1);
        let (_, _, in1) = axis_blocks(p, positive, d);
        let scale = norm_inf(&local1).max(1.0);
        let r = rg.r_at(lvl(d)).unwrap();
        let r1 = rg.r_at(lvl(d + 1)).unwrap();
        // rate equation
        let res_r = &out + r * (&local1 + r1 * &in2);
        // first-passage equation at depth d+1
        let g = rg.g_at(lvl(d + 1)).unwrap();
        let g_next = rg.g_at(lvl(d + 2)).unwrap();
        let (out1, _, _) = axis_blocks(p, positive, d + 1);
        let res_g = &out1 * g_next * g + &local1 * g + &in1;
        // censored local block
        let (_, local0, _) = axis_blocks(p, positive, d);
        let res_u = rg.u_at(lvl(d)).unwrap() - (&local0 + r * &in1);
        for res in [res_r, res_g, res_u] {
            worst = worst.max(norm_inf(&res) / scale);
        }
    }
    worst
}

fn rg_residuals() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for p in parameter_sets() {
        let a = solve(&p);
        let r = axis_residual(&p, &a.pos, true).max(axis_residual(&p, &a.neg, false));
        if r > 1e-12 {
            return Err(format!("{}: scaled residual {r:e}", label(&p)));
        }
        worst = worst.max(r);
    }
    within_time(start, Duration::from_secs(5), "residual checks")?;
    Ok(format!("worst scaled residual {worst:.2e}"))
}

fn flow_conservation() -> Verdict {
    let mut worst: f64 = 0.0;
    for p in parameter_sets() {
        let a = solve(&p);
        let mm = build_mmap(&p, a.window()).unwrap();
        let r = departure_rates(&a.dist, &mm).unwrap();
        let gap = (r.mu_a_total - p.lambda1).abs().max((r.mu_b_total - p.lambda2).abs());
        if gap > 1e-8 {
            return Err(format!("{}: throughput gap {gap:e}", label(&p)));
        }
        worst = worst.max(gap);
    }
    Ok(format!("worst throughput gap {worst:.2e}"))
}

fn reference() -> ModelParams {
    ModelParams::new(1.0, 2.0, 1.0, 1.0, 2, 3).unwrap()
}

fn reference_simulation() -> matchq::sim::SimResult {
    let mut cfg = SimConfig::new(reference(), 1_250_000, 10, 20240517);
    cfg.sequence_len = 3;
    simulate(&cfg).unwrap()
}

fn simulation(sim: &matchq::sim::SimResult, elapsed: Duration) -> Verdict {
    let p = reference();
    let a = solve(&p);
    let mm = build_mmap(&p, a.window()).unwrap();
    let rates = departure_rates(&a.dist, &mm).unwrap();
    let marks = MarkCalculator::new(&a.dist, &mm).unwrap().probabilities().unwrap();
    let per_rep = sim.post_warmup_events / sim.replications as u64;
    if sim.replications < 10 || per_rep < 1_000_000 {
        return Err(format!("{} reps of {per_rep} events", sim.replications));
    }
    let mut rows: Vec<(String, f64, Estimate)> = vec![
        ("E[Q1]".into(), a.mean_q1(), sim.mean_q1),
        ("E[Q2]".into(), a.mean_q2(), sim.mean_q2),
        ("E[W] little".into(), mean_sojourn_little(&a.dist), sim.mean_sojourn_a),
        ("mu_A".into(), rates.mu_a_impatient, sim.rates.mu_a_impatient),
        ("mu_B".into(), rates.mu_b_impatient, sim.rates.mu_b_impatient),
        ("mu_AB".into(), rates.mu_ab, sim.rates.mu_ab),
    ];
    for (name, analytic, est) in [
        ("backward", marks.backward, sim.backward),
        ("forward", marks.forward, sim.forward),
        ("at-departure", marks.at_departure, sim.at_departure),
    ] {
        for mk in Mark::ALL {
            rows.push((format!("{name} {mk}"), analytic[mk.index()], est[mk.index()]));
        }
    }
    let misses: Vec<String> = rows
        .iter()
        .filter(|(_, x, e)| !e.contains(*x))
        .map(|(n, x, e)| format!("{n}: {x:.6} vs {:.6}±{:.6}", e.mean, e.half_width))
        .collect();
    if !misses.is_empty() {
        return Err(misses.join("; "));
    }
    if elapsed > Duration::from_secs(300) {
        return Err(format!("simulation took {elapsed:.2?}"));
    }
    Ok(format!("{} quantities inside 99% CIs, {} reps x {per_rep} events", rows.len(), sim.replications))
}

fn theta_trends() -> Verdict {
    let start = Instant::now();
    let grid = [0.5, 1.0, 1.5, 2.0];
    let means = |t1: f64, t2: f64| {
        let a = solve(&ModelParams::new(1.0, 2.0, t1, t2, 2, 3).unwrap());
        (a.mean_q1(), a.mean_q2())
    };
    let over_t1: Vec<(f64, f64)> = grid.iter().map(|&t| means(t, 1.0)).collect();
    let over_t2: Vec<(f64, f64)> = grid.iter().map(|&t| means(1.0, t)).collect();
    let dec = |v: Vec<f64>| v.windows(2).all(|w| w[1] < w[0]);
    let inc = |v: Vec<f64>| v.windows(2).all(|w| w[1] > w[0]);
    let checks = [
        ("E[Q1] decreasing in theta1", dec(over_t1.iter().map(|x| x.0).collect())),
        ("E[Q1] increasing in theta2", inc(over_t2.iter().map(|x| x.0).collect())),
        ("E[Q2] increasing in theta1", inc(over_t1.iter().map(|x| x.1).collect())),
        ("E[Q2] decreasing in theta2", dec(over_t2.iter().map(|x| x.1).collect())),
    ];
    within_time(start, Duration::from_secs(60), "trend grid")?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    if failed.is_empty() {
        Ok("four monotone trends hold".into())
    } else {
        Err(failed.join("; "))
    }
}

fn sojourn_bound() -> Verdict {
    let mut worst: f64 = 0.0;
    for p in parameter_sets() {
        let a = solve(&p);
        let little = mean_sojourn_little(&a.dist);
        let xi = mean_first_passage_upper(&a.dist, Convention::Pasta).unwrap();
        if little > xi + 1e-9 {
            return Err(format!("{}: little {little} > xi {xi}", label(&p)));
        }
        let w = a.window();
        let chain = RawChain::new(&p, w.k_neg, w.k_pos);
        let pi: Vec<f64> = chain
            .states
            .iter()
            .map(|&(i, j)| a.dist.prob(StateCoords::new(i, j)))
            .collect();
        let dense = chain.mean_time_to_empty_a(&p, &pi);
        let gap = (dense - xi).abs();
        if gap > 1e-8 {
            return Err(format!("{}: xi {xi} vs dense {dense}", label(&p)));
        }
        worst = worst.max(gap);
    }
    Ok(format!("bound holds on 6 sets, worst dense gap {worst:.2e}"))
}

fn erlang_closed_forms() -> Verdict {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let l1 = rng.random_range(0.05..6.0);
        let l2 = rng.random_range(0.05..6.0);
        let th = rng.random_range(0.05..6.0);
        let r1 = rng.random_range(1..=10usize);
        let r2 = rng.random_range(1..=10usize);
        let max_q = discounted_integral(th, &|x| 1.0 - erlang_cdf(l1, r1, x) * erlang_cdf(l2, r2, x));
        let tail_q = discounted_integral(th, &|x| 1.0 - erlang_cdf(l1, r1, x));
        let e1 = (erlang_max_sojourn(l1, r1, l2, r2, th).unwrap() - max_q).abs();
        let e2 = (erlang_tail_integral(l1, th, r1).unwrap() - tail_q).abs();
        let e = e1.max(e2);
        if e > 1e-10 {
            return Err(format!("({l1},{r1},{l2},{r2},{th}): error {e:e}"));
        }
        worst = worst.max(e);
    }
    Ok(format!("100 tuples, worst error {worst:.2e}"))
}

fn mmap_decomposition(sim: &matchq::sim::SimResult) -> Verdict {
    for p in parameter_sets() {
        let a = solve(&p);
        let gen = a.generator().unwrap();
        let mm = build_mmap(&p, a.window()).unwrap();
        let sum = mm.d0.to_dense() + mm.da.to_dense() + mm.db.to_dense() + mm.dab.to_dense();
        if sum != gen.to_dense() {
            return Err(format!("{}: D0+DA+DB+DAB differs from Q", label(&p)));
        }
        let chain = RawChain::new(&p, a.window().k_neg, a.window().k_pos);
        let order: Vec<usize> = chain
            .states
            .iter()
            .map(|&(i, j)| gen.index_of(StateCoords::new(i, j)).unwrap())
            .collect();
        for (lib, raw) in [(&mm.da, &chain.marked[0]), (&mm.db, &chain.marked[1]), (&mm.dab, &chain.marked[2])] {
            let d = lib.to_dense();
            let permuted = DMatrix::from_fn(raw.nrows(), raw.ncols(), |r, c| d[(order[r], order[c])]);
            if norm_inf(&(permuted - raw)) > 1e-12 {
                return Err(format!("{}: marked matrix differs from enumeration", label(&p)));
            }
        }
        let calc = MarkCalculator::new(&a.dist, &mm).unwrap();
        let pi: Vec<f64> = chain
            .states
            .iter()
            .map(|&(i, j)| a.dist.prob(StateCoords::new(i, j)))
            .collect();
        for len in 1..=3 {
            for dir in [Direction::Backward, Direction::Forward] {
                let mut total = 0.0;
                for code in 0..3usize.pow(len as u32) {
                    let seq = sequence_from_code(code, len);
                    let x = calc.sequence(&seq, dir).unwrap();
                    let dense = chain.sequence_probability(&pi, &seq, dir == Direction::Forward);
                    if (x - dense).abs() > 1e-9 {
                        return Err(format!("{}: {dir:?} {seq:?} {x} vs dense {dense}", label(&p)));
                    }
                    total += x;
                }
                if (total - 1.0).abs() > 1e-7 {
                    return Err(format!("{}: {dir:?} length {len} sums to {total}", label(&p)));
                }
            }
        }
    }

    let p = reference();
    let a = solve(&p);
    let mm = build_mmap(&p, a.window()).unwrap();
    let calc = MarkCalculator::new(&a.dist, &mm).unwrap();
    let comparisons = 2 * (3 + 9 + 27);
    let widen = bonferroni_factor(sim.replications, comparisons);
    let mut misses = Vec::new();
    for table in &sim.sequences {
        for (dir, est) in [(Direction::Backward, &table.backward), (Direction::Forward, &table.forward)] {
            for (code, e) in est.iter().enumerate() {
                let seq = sequence_from_code(code, table.len);
                let x = calc.sequence(&seq, dir).unwrap();
                if (x - e.mean).abs() > e.half_width * widen {
                    misses.push(format!("{dir:?} {seq:?}: {x:.5} vs {:.5}±{:.5}", e.mean, e.half_width * widen));
                }
            }
        }
    }
    if !misses.is_empty() {
        return Err(misses.join("; "));
    }
    Ok(format!("exact decomposition on 6 sets, {comparisons} sequences inside family-wise 99% CIs"))
}

/// Strict inward drift of the level-`level` phase process; `positive` picks the A-axis.
fn drifts_inward(p: &ModelParams, level: i64, positive: bool) -> bool {
    let get = |role| build_block(role, level, p).unwrap().entries;
    let (up, local, down) = if positive {
        (get(BlockRole::A0), get(BlockRole::A1), get(BlockRole::A2))
    } else {
        (get(BlockRole::B2), get(BlockRole::B1), get(BlockRole::B0))
    };
    let gen = &up + &local + &down;
    let alpha = stationary_dense(&gen);
    let rate = |m: &DMatrix<f64>| -> f64 { (0..m.nrows()).map(|r| alpha[r] * m.row(r).sum()).sum() };
    // outward movement goes up on the A-axis and down on the B-axis
    let (outward, inward) = if positive { (rate(&up), rate(&down)) } else { (rate(&down), rate(&up)) };
    outward < inward
}

fn stability_witness() -> Verdict {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let mut checked = 0usize;
    for _ in 0..20 {
        let p = ModelParams::new(
            rng.random_range(0.2..5.0),
            rng.random_range(0.2..5.0),
            rng.random_range(0.1..3.0),
            rng.random_range(0.1..3.0),
            rng.random_range(1..=4usize),
            rng.random_range(1..=4usize),
        )
        .unwrap();
        let a_bound = 1.0f64.max(p.lambda1 / (p.m as f64 * p.theta1)) + 1.0;
        let b_bound = 1.0f64.max(p.lambda2 / (p.n as f64 * p.theta2)) + 1.0;
        let k0 = a_bound.floor() as i64 + 1;
        let l0 = (b_bound.floor() as i64 + 1).max(2);
        for d in 0..150 {
            if !drifts_inward(&p, k0 + d, true) {
                return Err(format!("{}: A-axis level {}", label(&p), k0 + d));
            }
            if !drifts_inward(&p, -(l0 + d), false) {
                return Err(format!("{}: B-axis level {}", label(&p), -(l0 + d)));
            }
            checked += 2;
        }
    }
    Ok(format!("20 random sets, {checked} levels with strict inward drift"))
}

fn swap_symmetry() -> Verdict {
    let mut worst: f64 = 0.0;
    for p in parameter_sets() {
        let a = solve(&p);
        let b = solve(&p.swapped());
        let gap = (a.mean_q1() - b.mean_q2()).abs().max((a.mean_q2() - b.mean_q1()).abs());
        if gap > 1e-9 {
            return Err(format!("{}: swap gap {gap:e}", label(&p)));
        }
        worst = worst.max(gap);
    }
    Ok(format!("worst swap gap {worst:.2e}"))
}

fn main() -> ExitCode {
    let sim_start = Instant::now();
    let sim = reference_simulation();
    let sim_time = sim_start.elapsed();
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence (stationary)", Box::new(stationary_oracle)),
        ("R/G residuals", Box::new(rg_residuals)),
        ("flow conservation", Box::new(flow_conservation)),
        ("simulation cross-validation", Box::new(|| simulation(&sim, sim_time))),
        ("theta trends", Box::new(theta_trends)),
        ("sojourn upper bound", Box::new(sojourn_bound)),
        ("Erlang closed forms", Box::new(erlang_closed_forms)),
        ("MMAP decomposition", Box::new(|| mmap_decomposition(&sim))),
        ("stability witness", Box::new(stability_witness)),
        ("swap symmetry", Box::new(swap_symmetry)),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", start.elapsed()),
            Err(detail) => {
                failures += 1;
                println!("FAIL {name}: {detail} [{:.2?}]", start.elapsed());
            }
        }
    }
    println!("acceptance: {} criteria, {failures} failed", 10);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
