//! Discrete-event simulation of the matched queue with independent replications.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{Mark, ModelParams, StateCoords};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    /// Number of processed events (arrivals plus abandonments).
    Events(u64),
    /// Simulated time.
    Time(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub horizon: Horizon,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub replications: usize,
    /// Longest mark sequence tabulated around random time points.
    pub sequence_len: usize,
    /// Random time points per replication for the mark-sequence tables.
    pub time_samples: usize,
    /// Largest count on either axis kept in the seen-at-arrival table.
    pub seen_limit: usize,
    /// Keep the post-warmup mark log of the first replication.
    pub keep_mark_log: bool,
}

impl SimConfig {
    pub fn new(params: ModelParams, events: u64, replications: usize, seed: u64) -> Self {
        Self {
            params,
            horizon: Horizon::Events(events),
            warmup_fraction: 0.2,
            seed,
            replications,
            sequence_len: 3,
            time_samples: 200_000,
            seen_limit: 40,
            keep_mark_log: false,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.horizon {
            Horizon::Events(e) => e > 0,
            Horizon::Time(t) => t.is_finite() && t > 0.0,
        };
        if !ok {
            return Err(Error::Invalid("simulation horizon must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::Invalid("need at least one replication".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Invalid("warmup fraction must lie in [0, 1)".into()));
        }
        if self.sequence_len == 0 {
            return Err(Error::Invalid("sequence length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean over replications with a Student-t 99% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self {
                mean,
                half_width: f64::INFINITY,
            };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let t = StudentsT::new(0.0, 1.0, n - 1.0).expect("df > 0").inverse_cdf(0.995);
        Self {
            mean,
            half_width: t * (var / n).sqrt(),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarkEvent {
    pub time: f64,
    pub mark: Mark,
}

/// Empirical frequencies of every mark sequence of length `len`, chronological order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceTable {
    pub len: usize,
    pub backward: Vec<Estimate>,
    pub forward: Vec<Estimate>,
}

/// Base-3 code of a chronological mark sequence, earliest mark most significant.
pub fn sequence_code(seq: &[Mark]) -> usize {
    seq.iter().fold(0, |acc, m| acc * 3 + m.index())
}

pub fn sequence_from_code(mut code: usize, len: usize) -> Vec<Mark> {
    let mut out = vec![Mark::A; len];
    for slot in out.iter_mut().rev() {
        *slot = Mark::ALL[code % 3];
        code /= 3;
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepartureEstimates {
    pub mu_a_impatient: Estimate,
    pub mu_b_impatient: Estimate,
    pub mu_ab: Estimate,
    pub mu_a_total: Estimate,
    pub mu_b_total: Estimate,
    pub mu_all: Estimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub mean_q1: Estimate,
    pub mean_q2: Estimate,
    pub mean_sojourn_a: Estimate,
    pub mean_sojourn_b: Estimate,
    pub rates: DepartureEstimates,
    pub backward: [Estimate; 3],
    pub forward: [Estimate; 3],
    pub at_departure: [Estimate; 3],
    pub sequences: Vec<SequenceTable>,
    /// Pooled state seen by arriving A-customers, counts capped at `seen_limit`.
    pub seen_at_arrival: Vec<(StateCoords, Estimate)>,
    /// Customers still waiting at the horizon, excluded from sojourn means.
    pub censored: u64,
    pub post_warmup_events: u64,
    pub replications: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mark_log: Option<Vec<MarkEvent>>,
}

#[derive(Clone, Copy)]
struct Deadline {
    at: f64,
    id: usize,
}

impl PartialEq for Deadline {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Deadline {}
impl PartialOrd for Deadline {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Deadline {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at.total_cmp(&other.at).then(self.id.cmp(&other.id))
    }
}

struct Customer {
    arrival: f64,
    alive: bool,
}

#[derive(Default)]
struct Sums {
    area1: f64,
    area2: f64,
    soj_a: f64,
    n_a: u64,
    soj_b: f64,
    n_b: u64,
    marks: [u64; 3],
    seen: BTreeMap<(usize, usize), u64>,
    arrivals_a: u64,
}

struct RepOutput {
    q1: f64,
    q2: f64,
    soj_a: f64,
    soj_b: f64,
    rates: [f64; 3],
    seen: BTreeMap<(usize, usize), f64>,
    backward: Vec<Vec<f64>>,
    forward: Vec<Vec<f64>>,
    censored: u64,
    events: u64,
    log: Option<Vec<MarkEvent>>,
}

struct Queue {
    waiting: VecDeque<usize>,
    count: usize,
}

impl Queue {
    fn new() -> Self {
        Self {
            waiting: VecDeque::new(),
            count: 0,
        }
    }

    fn pop_oldest(&mut self, customers: &[Customer]) -> usize {
        loop {
            let id = self.waiting.pop_front().expect("count tracks live customers");
            if customers[id].alive {
                self.count -= 1;
                return id;
            }
        }
    }
}

fn run_replication(cfg: &SimConfig, rep: usize) -> Result<RepOutput> {
    let p = &cfg.params;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed.wrapping_add(rep as u64));
    let arr_a = Exp::new(p.lambda1).expect("rate > 0");
    let arr_b = Exp::new(p.lambda2).expect("rate > 0");
    let pat_a = Exp::new(p.theta1).expect("rate > 0");
    let pat_b = Exp::new(p.theta2).expect("rate > 0");

    let mut customers: Vec<Customer> = Vec::new();
    let mut is_a: Vec<bool> = Vec::new();
    let mut qa = Queue::new();
    let mut qb = Queue::new();
    let mut heap: BinaryHeap<Reverse<Deadline>> = BinaryHeap::new();
    let mut t = 0.0f64;
    let mut next_a = arr_a.sample(&mut rng);
    let mut next_b = arr_b.sample(&mut rng);

    let mut events: u64 = 0;
    let (warm_events, end_events, warm_time, end_time) = match cfg.horizon {
        Horizon::Events(e) => ((e as f64 * cfg.warmup_fraction) as u64, e, f64::INFINITY, f64::INFINITY),
        Horizon::Time(h) => (u64::MAX, u64::MAX, h * cfg.warmup_fraction, h),
    };
    let mut measuring = cfg.warmup_fraction == 0.0;
    let mut t0 = 0.0;
    let mut first_measured_id = 0usize;
    let mut post_events = 0u64;
    let mut sums = Sums::default();
    let mut log_t: Vec<f64> = Vec::new();
    let mut log_m: Vec<Mark> = Vec::new();

    loop {
        while let Some(Reverse(d)) = heap.peek() {
            if customers[d.id].alive {
                break;
            }
            heap.pop();
        }
        let next_exp = heap.peek().map_or(f64::INFINITY, |Reverse(d)| d.at);
        let tmin = next_a.min(next_b).min(next_exp);
        if events >= end_events || tmin > end_time {
            if tmin > end_time && end_time.is_finite() && measuring {
                sums.area1 += qa.count as f64 * (end_time - t);
                sums.area2 += qb.count as f64 * (end_time - t);
                t = end_time;
            }
            break;
        }
        if !measuring && (events >= warm_events || tmin >= warm_time) {
            if tmin >= warm_time && warm_time.is_finite() {
                t = warm_time;
            }
            measuring = true;
            t0 = t;
            first_measured_id = customers.len();
        }
        if measuring {
            sums.area1 += qa.count as f64 * (tmin - t);
            sums.area2 += qb.count as f64 * (tmin - t);
            post_events += 1;
        }
        t = tmin;
        events += 1;

        let departed = |id: usize, customers: &mut Vec<Customer>, is_a: &[bool], sums: &mut Sums| {
            customers[id].alive = false;
            if measuring && id >= first_measured_id {
                let w = t - customers[id].arrival;
                if is_a[id] {
                    sums.soj_a += w;
                    sums.n_a += 1;
                } else {
                    sums.soj_b += w;
                    sums.n_b += 1;
                }
            }
        };
        let mut record = |mark: Mark, sums: &mut Sums| {
            if measuring {
                sums.marks[mark.index()] += 1;
                log_t.push(t);
                log_m.push(mark);
            }
        };

        if next_a <= next_b && next_a <= next_exp {
            if measuring {
                let key = (qa.count.min(cfg.seen_limit), qb.count.min(cfg.seen_limit));
                *sums.seen.entry(key).or_insert(0) += 1;
                sums.arrivals_a += 1;
            }
            let id = customers.len();
            customers.push(Customer { arrival: t, alive: true });
            is_a.push(true);
            qa.waiting.push_back(id);
            qa.count += 1;
            heap.push(Reverse(Deadline {
                at: t + pat_a.sample(&mut rng),
                id,
            }));
            next_a = t + arr_a.sample(&mut rng);
        } else if next_b <= next_exp {
            let id = customers.len();
            customers.push(Customer { arrival: t, alive: true });
            is_a.push(false);
            qb.waiting.push_back(id);
            qb.count += 1;
            heap.push(Reverse(Deadline {
                at: t + pat_b.sample(&mut rng),
                id,
            }));
            next_b = t + arr_b.sample(&mut rng);
        } else {
            let Reverse(d) = heap.pop().expect("peeked");
            if is_a[d.id] {
                qa.count -= 1;
                departed(d.id, &mut customers, &is_a, &mut sums);
                record(Mark::A, &mut sums);
            } else {
                qb.count -= 1;
                departed(d.id, &mut customers, &is_a, &mut sums);
                record(Mark::B, &mut sums);
            }
            continue;
        }
        if qa.count >= p.m && qb.count >= p.n {
            for _ in 0..p.m {
                let id = qa.pop_oldest(&customers);
                departed(id, &mut customers, &is_a, &mut sums);
            }
            for _ in 0..p.n {
                let id = qb.pop_oldest(&customers);
                departed(id, &mut customers, &is_a, &mut sums);
            }
            record(Mark::AB, &mut sums);
        }
        debug_assert!(qa.count < p.m || qb.count < p.n);
    }

    let span = t - t0;
    if !(span > 0.0) {
        return Err(Error::Invalid("no simulated time after warmup".into()));
    }
    let censored = customers[first_measured_id.min(customers.len())..]
        .iter()
        .filter(|c| c.alive)
        .count() as u64;
    let arrivals = sums.arrivals_a.max(1) as f64;
    let seen = sums.seen.iter().map(|(&k, &v)| (k, v as f64 / arrivals)).collect();
    let mut seq_rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed.wrapping_add(rep as u64) ^ 0x5eed_5eed_5eed_5eed);
    let (backward, forward) = mark_sequence_frequencies(&log_t, &log_m, cfg.sequence_len, cfg.time_samples, &mut seq_rng)?;
    let log = (cfg.keep_mark_log && rep == 0).then(|| {
        log_t
            .iter()
            .zip(&log_m)
            .map(|(&time, &mark)| MarkEvent { time, mark })
            .collect()
    });
    Ok(RepOutput {
        q1: sums.area1 / span,
        q2: sums.area2 / span,
        soj_a: sums.soj_a / sums.n_a.max(1) as f64,
        soj_b: sums.soj_b / sums.n_b.max(1) as f64,
        rates: sums.marks.map(|c| c as f64 / span),
        seen,
        backward,
        forward,
        censored,
        events: post_events,
        log,
    })
}

/// Frequencies of the `k` marks before and after uniformly sampled time points,
/// for every `k` in `1..=k_max`; index `[k-1][sequence_code]`.
pub fn mark_sequence_frequencies<R: Rng>(
    times: &[f64],
    marks: &[Mark],
    k_max: usize,
    samples: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if k_max == 0 || times.len() < 2 * k_max + 1 {
        return Err(Error::Invalid(format!(
            "mark log of {} departures is too short for sequences of length {k_max}",
            times.len()
        )));
    }
    let lo = times[k_max - 1];
    let hi = times[times.len() - k_max];
    let mut back: Vec<Vec<f64>> = (1..=k_max).map(|k| vec![0.0; 3usize.pow(k as u32)]).collect();
    let mut fwd = back.clone();
    for _ in 0..samples {
        let u = rng.random_range(lo..hi);
        let idx = times.partition_point(|&x| x <= u);
        for k in 1..=k_max {
            back[k - 1][sequence_code(&marks[idx - k..idx])] += 1.0;
            fwd[k - 1][sequence_code(&marks[idx..idx + k])] += 1.0;
        }
    }
    for table in back.iter_mut().chain(fwd.iter_mut()) {
        for x in table.iter_mut() {
            *x /= samples as f64;
        }
    }
    Ok((back, fwd))
}

pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let mut reps: Vec<RepOutput> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r))
        .collect::<Result<_>>()?;
    let mark_log = reps.first_mut().and_then(|r| r.log.take());
    let est = |f: &dyn Fn(&RepOutput) -> f64| Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>());
    let (m, n) = (cfg.params.m as f64, cfg.params.n as f64);
    let rates = DepartureEstimates {
        mu_a_impatient: est(&|r| r.rates[0]),
        mu_b_impatient: est(&|r| r.rates[1]),
        mu_ab: est(&|r| r.rates[2]),
        mu_a_total: est(&|r| r.rates[0] + m * r.rates[2]),
        mu_b_total: est(&|r| r.rates[1] + n * r.rates[2]),
        mu_all: est(&|r| r.rates[0] + r.rates[1] + (m + n) * r.rates[2]),
    };
    let triple = |f: &dyn Fn(&RepOutput, usize) -> f64| -> [Estimate; 3] {
        [0, 1, 2].map(|k| Estimate::from_samples(&reps.iter().map(|r| f(r, k)).collect::<Vec<_>>()))
    };
    let backward = triple(&|r, k| r.backward[0][k]);
    let forward = triple(&|r, k| r.forward[0][k]);
    let at_departure = triple(&|r, k| r.rates[k] / r.rates.iter().sum::<f64>());
    let sequences = (1..=cfg.sequence_len)
        .map(|len| {
            let codes = 3usize.pow(len as u32);
            let col = |f: &dyn Fn(&RepOutput) -> &Vec<Vec<f64>>, c: usize| {
                Estimate::from_samples(&reps.iter().map(|r| f(r)[len - 1][c]).collect::<Vec<_>>())
            };
            SequenceTable {
                len,
                backward: (0..codes).map(|c| col(&|r| &r.backward, c)).collect(),
                forward: (0..codes).map(|c| col(&|r| &r.forward, c)).collect(),
            }
        })
        .collect();
    let mut keys: Vec<(usize, usize)> = reps.iter().flat_map(|r| r.seen.keys().copied()).collect();
    keys.sort_unstable();
    keys.dedup();
    let seen_at_arrival = keys
        .into_iter()
        .map(|k| {
            let xs: Vec<f64> = reps.iter().map(|r| r.seen.get(&k).copied().unwrap_or(0.0)).collect();
            (StateCoords::new(k.0, k.1), Estimate::from_samples(&xs))
        })
        .collect();
    Ok(SimResult {
        mean_q1: est(&|r| r.q1),
        mean_q2: est(&|r| r.q2),
        mean_sojourn_a: est(&|r| r.soj_a),
        mean_sojourn_b: est(&|r| r.soj_b),
        rates,
        backward,
        forward,
        at_departure,
        sequences,
        seen_at_arrival,
        censored: reps.iter().map(|r| r.censored).sum(),
        post_warmup_events: reps.iter().map(|r| r.events).sum(),
        replications: cfg.replications,
        mark_log,
    })
}

/// Sequence tables up to length `k_max`.
pub fn empirical_mark_sequences(result: &SimResult, k_max: usize) -> Result<&[SequenceTable]> {
    if k_max == 0 || k_max > result.sequences.len() {
        return Err(Error::Invalid(format!(
            "sequences of length {k_max} were not recorded (have up to {})",
            result.sequences.len()
        )));
    }
    Ok(&result.sequences[..k_max])
}
