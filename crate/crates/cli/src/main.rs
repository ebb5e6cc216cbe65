use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use matchq::analysis::{Analysis, SolveOptions};
use matchq::departure::{build_mmap, departure_rates, Direction, MarkCalculator};
use matchq::model::{Mark, ModelParams, Window};
use matchq::rg::RgMeasures;
use matchq::sim::{simulate, Horizon, SimConfig};
use matchq::sojourn::{mean_first_passage_upper, mean_sojourn_little, mean_sojourn_probabilistic, Convention};
use matchq::stability::{drift_table, is_stable};
use matchq::validate::{all_pass, validate, Status, ValidateOptions};

#[derive(Parser, Debug)]
#[command(name = "matchq", version, about = "Batch matched queue with impatient customers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// JSON parameter document: lambda1, lambda2, theta1, theta2, m, n.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Directory for output files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Weighted edge mass at which the adaptive window stops growing.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    kneg: Option<usize>,
    #[arg(long, global = true)]
    kpos: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, default_value = "pasta")]
    convention: String,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Drift table as CSV.
    Stability {
        #[arg(long, default_value_t = 20)]
        depth: usize,
    },
    /// Mean queue lengths.
    Analyze {
        /// Also write R/G residuals per level as CSV.
        #[arg(long)]
        dump_rg: bool,
        /// Also write the stationary probabilities as CSV.
        #[arg(long)]
        pi: bool,
    },
    /// Mean sojourn time of an A-customer.
    Sojourn,
    /// Departure rates and mark probabilities.
    Departures {
        /// Comma-separated marks, e.g. A,AB,B.
        #[arg(long)]
        sequence: Option<String>,
        #[arg(long, default_value = "forward")]
        direction: String,
    },
    /// Discrete-event simulation.
    Simulate {
        #[arg(long, default_value_t = 1_250_000)]
        events: u64,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0.2)]
        warmup: f64,
        /// Also write the mark log of the first replication as CSV.
        #[arg(long)]
        mark_log: bool,
    },
    /// Analytic results against oracles and simulation.
    Validate {
        #[arg(long, default_value_t = 1_250_000)]
        events: u64,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0.2)]
        warmup: f64,
        /// Skip the simulation rows.
        #[arg(long)]
        no_sim: bool,
    },
    /// Mean queue lengths over a theta grid.
    Sweep {
        /// a:b:step
        #[arg(long)]
        theta1_grid: Option<String>,
        #[arg(long)]
        theta2_grid: Option<String>,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
    Criteria,
}

impl From<matchq::Error> for Failure {
    fn from(e: matchq::Error) -> Self {
        match e {
            matchq::Error::InvalidParams(_) | matchq::Error::Invalid(_) | matchq::Error::WindowTooSmall { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Numerical(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Collects named artifacts; written to `--out` or printed.
struct Sink {
    files: Vec<(String, String)>,
}

impl Sink {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    fn add_json(&mut self, name: &str, v: &impl Serialize) {
        let mut body = serde_json::to_string_pretty(v).expect("serializable");
        body.push('\n');
        self.add(name, body);
    }

    fn flush(self, out: Option<&Path>, manifest: &Value) -> CliResult<()> {
        let Some(dir) = out else {
            if let Some((_, body)) = self.files.first() {
                print!("{body}");
            }
            return Ok(());
        };
        fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
        for (name, body) in self.files.iter().chain(std::iter::once(&(
            "manifest.json".to_string(),
            serde_json::to_string_pretty(manifest).expect("serializable") + "\n",
        ))) {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Failure::Config(e.to_string()))?;
            }
            fs::write(&path, body).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn load_params(common: &Common) -> CliResult<ModelParams> {
    let path = common
        .params
        .as_ref()
        .ok_or_else(|| Failure::Config("--params is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(ModelParams::from_json(&text)?)
}

fn solve_options(common: &Common) -> CliResult<SolveOptions> {
    let mut opts = SolveOptions::default();
    if let Some(t) = common.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::Config(format!("--tol must be positive, got {t}")));
        }
        opts.tail_tol = t;
    }
    match (common.kneg, common.kpos) {
        (None, None) => {}
        (a, b) => {
            let k = a.or(b).expect("one is set");
            let w = Window::new(a.unwrap_or(k), b.unwrap_or(k));
            if w.k_neg < 2 || w.k_pos < 2 {
                return Err(Failure::Config("--kneg and --kpos must be at least 2".into()));
            }
            opts.window = Some(w);
        }
    }
    Ok(opts)
}

fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = || Failure::Config(format!("grid '{s}' must read a:b:step with step > 0"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [a, b, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && b >= a && a > 0.0) {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

fn rg_csv(out: &mut String, rg: &RgMeasures) {
    for (d, r) in rg.residual_r.iter().enumerate() {
        let _ = writeln!(out, "{:?},R,{d},{r:e}", rg.axis);
    }
    for (d, r) in rg.residual_g.iter().enumerate() {
        let _ = writeln!(out, "{:?},G,{},{r:e}", rg.axis, d + 1);
    }
}

fn sim_config(p: ModelParams, events: u64, reps: usize, warmup: f64, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(p, events, reps, seed);
    cfg.horizon = Horizon::Events(events);
    cfg.warmup_fraction = warmup;
    cfg
}

fn run(cli: &Cli) -> CliResult<()> {
    let common = &cli.common;
    let p = load_params(common)?;
    let solve = solve_options(common)?;
    let convention: Convention = common.convention.parse()?;
    let manifest = json!({
        "command": cli.command,
        "params_path": common.params,
        "params": p,
        "output_dir": common.out,
        "tail_tol": solve.tail_tol,
        "window": solve.window.map(|w| [w.k_neg, w.k_pos]),
        "seed": common.seed,
        "convention": convention,
    });
    let mut sink = Sink::new();
    let mut failed = false;

    match &cli.command {
        Command::Stability { depth } => {
            let mut csv = String::from("level,up,down\n");
            for r in drift_table(&p, *depth)? {
                let _ = writeln!(csv, "{},{},{}", r.level, r.up_rate, r.down_rate);
            }
            sink.add("stability.csv", csv);
            sink.add_json("stability.json", &is_stable(&p)?);
        }
        Command::Analyze { dump_rg, pi } => {
            let a = Analysis::solve(&p, &solve)?;
            let w = a.window();
            sink.add_json(
                "analyze.json",
                &json!({
                    "E_Q1": a.mean_q1(),
                    "E_Q2": a.mean_q2(),
                    "tail_mass": a.dist.tail_mass_bound,
                    "window": [-(w.k_neg as i64), w.k_pos as i64],
                }),
            );
            if *dump_rg {
                let mut csv = String::from("axis,kind,depth,residual\n");
                rg_csv(&mut csv, &a.pos);
                rg_csv(&mut csv, &a.neg);
                sink.add("rg_residuals.csv", csv);
            }
            if *pi {
                let mut csv = String::from("i,j,prob\n");
                let mut states: Vec<_> = a.dist.states().collect();
                states.sort_by_key(|(s, _)| (s.i, s.j));
                for (s, pr) in states {
                    let _ = writeln!(csv, "{},{},{pr:e}", s.i, s.j);
                }
                sink.add("pi.csv", csv);
            }
        }
        Command::Sojourn => {
            let a = Analysis::solve(&p, &solve)?;
            sink.add_json(
                "sojourn.json",
                &json!({
                    "E_W_little": mean_sojourn_little(&a.dist),
                    "E_W_prob": mean_sojourn_probabilistic(&a.dist, convention)?,
                    "E_xi_upper": mean_first_passage_upper(&a.dist, convention)?,
                    "convention": convention,
                }),
            );
        }
        Command::Departures { sequence, direction } => {
            let a = Analysis::solve(&p, &solve)?;
            let mmap = build_mmap(&p, a.window())?;
            let calc = MarkCalculator::new(&a.dist, &mmap)?;
            match sequence {
                Some(seq) => {
                    let marks: Vec<Mark> = seq
                        .split(',')
                        .map(|m| m.trim().parse::<Mark>())
                        .collect::<Result<_, _>>()?;
                    let dir: Direction = direction.parse()?;
                    sink.add("sequence.txt", format!("{}\n", calc.sequence(&marks, dir)?));
                }
                None => {
                    let rates = departure_rates(&a.dist, &mmap)?;
                    let probs = calc.probabilities()?;
                    sink.add_json("departures.json", &json!({ "rates": rates, "marks": probs }));
                }
            }
        }
        Command::Simulate {
            events,
            reps,
            warmup,
            mark_log,
        } => {
            let mut cfg = sim_config(p, *events, *reps, *warmup, common.seed);
            cfg.keep_mark_log = *mark_log;
            let mut res = simulate(&cfg)?;
            let log = res.mark_log.take();
            sink.add_json("simulate.json", &res);
            if let Some(log) = log {
                let mut csv = String::from("time,mark\n");
                for e in log {
                    let _ = writeln!(csv, "{},{}", e.time, e.mark);
                }
                sink.add("mark_log.csv", csv);
            }
        }
        Command::Validate {
            events,
            reps,
            warmup,
            no_sim,
        } => {
            let opts = ValidateOptions {
                solve,
                sim: (!no_sim).then(|| sim_config(p, *events, *reps, *warmup, common.seed)),
                seed: common.seed,
                ..Default::default()
            };
            let rows = validate(&p, &opts)?;
            let mut csv = String::from("criterion,detail,value,reference,tol,status\n");
            for r in &rows {
                let status = match r.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Skipped => "SKIP",
                    Status::Info => "INFO",
                };
                let _ = writeln!(
                    csv,
                    "{},\"{}\",{:e},{:e},{:e},{status}",
                    r.criterion, r.detail, r.value, r.reference, r.tol
                );
            }
            failed = !all_pass(&rows);
            sink.add("validate.csv", csv);
        }
        Command::Sweep {
            theta1_grid,
            theta2_grid,
        } => {
            let t1 = theta1_grid.as_deref().map(parse_grid).transpose()?.unwrap_or(vec![p.theta1]);
            let t2 = theta2_grid.as_deref().map(parse_grid).transpose()?.unwrap_or(vec![p.theta2]);
            let points: Vec<(f64, f64)> = t1.iter().flat_map(|&a| t2.iter().map(move |&b| (a, b))).collect();
            let rows: Vec<(f64, f64, f64, f64)> = points
                .par_iter()
                .map(|&(a, b)| {
                    let q = ModelParams::new(p.lambda1, p.lambda2, a, b, p.m, p.n)?;
                    let r = Analysis::solve(&q, &solve)?;
                    Ok((a, b, r.mean_q1(), r.mean_q2()))
                })
                .collect::<Result<_, matchq::Error>>()?;
            let mut csv = String::from("theta1,theta2,E_Q1,E_Q2\n");
            for (a, b, q1, q2) in &rows {
                let _ = writeln!(csv, "{a},{b},{q1},{q2}");
            }
            sink.add("sweep.csv", csv);
            if common.out.is_some() {
                for (k, (a, b, q1, q2)) in rows.iter().enumerate() {
                    sink.add_json(
                        &format!("sweep/point_{k:04}.json"),
                        &json!({"theta1": a, "theta2": b, "E_Q1": q1, "E_Q2": q2}),
                    );
                }
                // index last
                let first = sink.files.remove(0);
                sink.files.push(first);
            }
        }
    }
    sink.flush(common.out.as_deref(), &manifest)?;
    if failed {
        return Err(Failure::Criteria);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Criteria) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("{}", json!({"error": "config", "message": msg}));
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("{}", json!({"error": "numerical", "message": msg}));
            ExitCode::from(3)
        }
    }
}
