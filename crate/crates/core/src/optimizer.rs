//! Global search on a box: self-adaptive differential evolution with four
//! competing mutation strategies, plus a bisection solver for monotone
//! scalar problems and a derivative-free descent for smooth outer loops.
//!
//! The DE keeps one success-history memory per strategy (SHADE style):
//! scale factors come from a Cauchy kick around a remembered mean, crossover
//! rates from a normal kick, and the memories are updated with
//! improvement-weighted Lehmer means of what actually succeeded. Strategies
//! are drawn with probability proportional to their recent success counts,
//! and the population shrinks linearly over the budget so late generations
//! concentrate on refinement.

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Identifies one objective evaluation within a run; stochastic objectives
/// mix it into their estimator seed so a population can be evaluated in
/// parallel with reproducible results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvalTag {
    pub generation: u64,
    pub member: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SelfAdaptiveDe,
    GradientDescent,
    Bisection,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct OptimizerConfig {
    pub population: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
    pub strategy: Strategy,
}

impl OptimizerConfig {
    pub fn self_adaptive(
        population: usize,
        max_iterations: usize,
        seed: u64,
        bounds: Vec<(f64, f64)>,
    ) -> Self {
        Self { population, max_iterations, seed, bounds, strategy: Strategy::SelfAdaptiveDe }
    }

    fn validate(&self) -> Result<()> {
        if self.strategy == Strategy::SelfAdaptiveDe && self.population < 4 {
            return Err(Error::InvalidArgument(format!(
                "population must be at least 4, got {}",
                self.population
            )));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidArgument("at least one coordinate required".into()));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "bounds must be finite with low < high, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MinimizeResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    /// Best objective after each generation (index 0 = initial population).
    pub trace: Vec<f64>,
    pub evaluations: u64,
}

/// Minimize `objective` over the configured box. Non-finite objective
/// values are treated as +inf. Deterministic for a fixed config.
pub fn minimize<F>(objective: F, cfg: &OptimizerConfig) -> Result<MinimizeResult>
where
    F: Fn(&[f64], EvalTag) -> f64 + Sync,
{
    cfg.validate()?;
    match cfg.strategy {
        Strategy::SelfAdaptiveDe => Ok(run_de(&objective, cfg).0),
        Strategy::GradientDescent => Ok(run_descent(&objective, cfg)),
        Strategy::Bisection => Err(Error::InvalidArgument(
            "bisection solves scalar monotone threshold problems, not box minimization".into(),
        )),
    }
}

const N_STRATEGIES: usize = 4;
const MEMORY_SLOTS: usize = 5;
const PBEST_FRACTION: f64 = 0.11;
/// Virtual prior successes per strategy; keeps selection probabilities
/// away from zero so no strategy starves permanently.
const STRATEGY_PRIOR: f64 = 2.0;
/// Reset all success counts when one strategy's share falls below this.
const STRATEGY_FLOOR: f64 = 0.05;
const MIN_POPULATION: usize = 4;

struct Memories {
    f: [[f64; MEMORY_SLOTS]; N_STRATEGIES],
    cr: [[f64; MEMORY_SLOTS]; N_STRATEGIES],
    next_slot: [usize; N_STRATEGIES],
}

// read by the adaptation tests only
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct DeDiagnostics {
    pub(crate) final_population: usize,
    pub(crate) memory_f_range: (f64, f64),
    pub(crate) memory_cr_range: (f64, f64),
}

/// One pre-drawn trial: all randomness is fixed before objective
/// evaluations start, so the parallel evaluation order cannot matter.
struct Plan {
    x: Vec<f64>,
    strategy: usize,
    slot_f: f64,
    slot_cr: f64,
}

fn run_de<F>(objective: &F, cfg: &OptimizerConfig) -> (MinimizeResult, DeDiagnostics)
where
    F: Fn(&[f64], EvalTag) -> f64 + Sync,
{
    let n_init = cfg.population;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let mut pop: Vec<Vec<f64>> = (0..n_init)
        .map(|_| {
            cfg.bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
                .collect()
        })
        .collect();
    let mut fitness: Vec<f64> = pop
        .par_iter()
        .enumerate()
        .map(|(i, x)| sanitize(objective(x, EvalTag { generation: 0, member: i as u64 })))
        .collect();
    let mut evaluations = n_init as u64;

    let mut memories = Memories {
        f: [[0.5; MEMORY_SLOTS]; N_STRATEGIES],
        cr: [[0.5; MEMORY_SLOTS]; N_STRATEGIES],
        next_slot: [0; N_STRATEGIES],
    };
    let mut successes = [0.0_f64; N_STRATEGIES];
    let mut archive: Vec<Vec<f64>> = Vec::new();

    let mut trace = Vec::with_capacity(cfg.max_iterations + 1);
    let (mut mem_f_min, mut mem_f_max) = (0.5_f64, 0.5_f64);
    let (mut mem_cr_min, mut mem_cr_max) = (0.5_f64, 0.5_f64);
    trace.push(best_of(&fitness));

    for gen in 1..=cfg.max_iterations {
        let n = pop.len();
        let order = sorted_indices(&fitness);
        let best_idx = order[0];
        let n_pbest = ((PBEST_FRACTION * n as f64).ceil() as usize).max(2).min(n);

        // draw every stochastic decision for this generation up front
        let weights = selection_weights(&successes);
        let plans: Vec<Plan> = (0..n)
            .map(|i| {
                let strategy = pick_weighted(&mut rng, &weights);
                let slot = rng.gen_range(0..MEMORY_SLOTS);
                let f = draw_f(&mut rng, memories.f[strategy][slot]);
                let cr = draw_cr(&mut rng, memories.cr[strategy][slot]);
                let x = build_trial(
                    &mut rng, &pop, &archive, &fitness, i, best_idx, &order[..n_pbest], strategy,
                    f, cr, &cfg.bounds,
                );
                Plan { x, strategy, slot_f: f, slot_cr: cr }
            })
            .collect();

        let trial_fit: Vec<f64> = plans
            .par_iter()
            .enumerate()
            .map(|(i, plan)| {
                sanitize(objective(&plan.x, EvalTag { generation: gen as u64, member: i as u64 }))
            })
            .collect();
        evaluations += n as u64;

        // selection + memory bookkeeping
        let mut won: [Vec<(f64, f64, f64)>; N_STRATEGIES] = Default::default();
        for i in 0..n {
            if trial_fit[i] <= fitness[i] {
                if trial_fit[i] < fitness[i] {
                    let improvement = fitness[i] - trial_fit[i];
                    won[plans[i].strategy].push((
                        improvement.min(f64::MAX),
                        plans[i].slot_f,
                        plans[i].slot_cr,
                    ));
                    successes[plans[i].strategy] += 1.0;
                }
                push_archive(&mut archive, std::mem::replace(&mut pop[i], plans[i].x.clone()), n, &mut rng);
                fitness[i] = trial_fit[i];
            }
        }
        for (k, wins) in won.iter().enumerate() {
            if wins.is_empty() {
                continue;
            }
            let slot = memories.next_slot[k];
            let sw: f64 = wins.iter().map(|w| w.0).sum();
            if sw > 0.0 {
                let num_f: f64 = wins.iter().map(|w| w.0 * w.1 * w.1).sum();
                let den_f: f64 = wins.iter().map(|w| w.0 * w.1).sum();
                if den_f > 0.0 {
                    memories.f[k][slot] = (num_f / den_f).clamp(0.05, 1.0);
                }
                memories.cr[k][slot] =
                    (wins.iter().map(|w| w.0 * w.2).sum::<f64>() / sw).clamp(0.0, 1.0);
            }
            memories.next_slot[k] = (slot + 1) % MEMORY_SLOTS;
        }
        for k in 0..N_STRATEGIES {
            for s in 0..MEMORY_SLOTS {
                mem_f_min = mem_f_min.min(memories.f[k][s]);
                mem_f_max = mem_f_max.max(memories.f[k][s]);
                mem_cr_min = mem_cr_min.min(memories.cr[k][s]);
                mem_cr_max = mem_cr_max.max(memories.cr[k][s]);
            }
        }
        let min_share = selection_weights(&successes)
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        if min_share < STRATEGY_FLOOR {
            successes = [0.0; N_STRATEGIES];
        }

        // linear shrink toward the floor; worst members leave
        let target = shrink_target(n_init, gen, cfg.max_iterations);
        while pop.len() > target {
            let worst = worst_index(&fitness);
            pop.swap_remove(worst);
            fitness.swap_remove(worst);
        }
        archive.truncate(pop.len());

        trace.push(best_of(&fitness));
    }

    let best = sorted_indices(&fitness)[0];
    (
        MinimizeResult {
            best_x: pop[best].clone(),
            best_f: fitness[best],
            trace,
            evaluations,
        },
        DeDiagnostics {
            final_population: pop.len(),
            memory_f_range: (mem_f_min, mem_f_max),
            memory_cr_range: (mem_cr_min, mem_cr_max),
        },
    )
}

fn sanitize(f: f64) -> f64 {
    if f.is_finite() {
        f
    } else {
        f64::INFINITY
    }
}

fn best_of(fitness: &[f64]) -> f64 {
    fitness.iter().copied().fold(f64::INFINITY, f64::min)
}

fn worst_index(fitness: &[f64]) -> usize {
    let mut worst = 0;
    for i in 1..fitness.len() {
        if fitness[i] > fitness[worst] {
            worst = i;
        }
    }
    worst
}

fn sorted_indices(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    idx
}

fn selection_weights(successes: &[f64; N_STRATEGIES]) -> [f64; N_STRATEGIES] {
    let total: f64 = successes.iter().map(|s| s + STRATEGY_PRIOR).sum();
    let mut w = [0.0; N_STRATEGIES];
    for k in 0..N_STRATEGIES {
        w[k] = (successes[k] + STRATEGY_PRIOR) / total;
    }
    w
}

fn pick_weighted(rng: &mut ChaCha12Rng, weights: &[f64; N_STRATEGIES]) -> usize {
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if draw < acc {
            return k;
        }
    }
    N_STRATEGIES - 1
}

fn draw_f(rng: &mut ChaCha12Rng, loc: f64) -> f64 {
    let cauchy = rand_distr::Cauchy::new(loc, 0.1).expect("scale is positive");
    for _ in 0..100 {
        let v: f64 = cauchy.sample(rng);
        if v > 0.0 {
            return v.min(1.0);
        }
    }
    loc.max(0.05)
}

fn draw_cr(rng: &mut ChaCha12Rng, loc: f64) -> f64 {
    let normal = rand_distr::Normal::new(loc, 0.1).expect("sd is positive");
    let v: f64 = normal.sample(rng);
    v.clamp(0.0, 1.0)
}

fn distinct_indices<const K: usize>(
    rng: &mut ChaCha12Rng,
    n: usize,
    exclude: &[usize],
) -> [usize; K] {
    let mut out = [0usize; K];
    let mut chosen = 0;
    while chosen < K {
        let cand = rng.gen_range(0..n);
        if exclude.contains(&cand) || out[..chosen].contains(&cand) {
            continue;
        }
        out[chosen] = cand;
        chosen += 1;
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn build_trial(
    rng: &mut ChaCha12Rng,
    pop: &[Vec<f64>],
    archive: &[Vec<f64>],
    fitness: &[f64],
    i: usize,
    best_idx: usize,
    pbest_pool: &[usize],
    strategy: usize,
    f: f64,
    cr: f64,
    bounds: &[(f64, f64)],
) -> Vec<f64> {
    let _ = fitness;
    let n = pop.len();
    let d = bounds.len();
    let mutant: Vec<f64> = match strategy {
        // rand/1
        0 | 3 => {
            let [r1, r2, r3] = distinct_indices::<3>(rng, n, &[i]);
            (0..d).map(|j| pop[r1][j] + f * (pop[r2][j] - pop[r3][j])).collect()
        }
        // best/1
        1 => {
            let [r1, r2] = distinct_indices::<2>(rng, n, &[i, best_idx]);
            (0..d).map(|j| pop[best_idx][j] + f * (pop[r1][j] - pop[r2][j])).collect()
        }
        // current-to-pbest/1 with archive
        _ => {
            let pbest = pbest_pool[rng.gen_range(0..pbest_pool.len())];
            let [r1] = distinct_indices::<1>(rng, n, &[i, pbest]);
            let r2_total = n + archive.len();
            let mut r2 = rng.gen_range(0..r2_total);
            while r2 < n && (r2 == i || r2 == r1 || r2 == pbest) {
                r2 = rng.gen_range(0..r2_total);
            }
            let donor = if r2 < n { &pop[r2] } else { &archive[r2 - n] };
            (0..d)
                .map(|j| {
                    pop[i][j] + f * (pop[pbest][j] - pop[i][j]) + f * (pop[r1][j] - donor[j])
                })
                .collect()
        }
    };

    let mut trial = pop[i].clone();
    if strategy == 3 {
        // exponential crossover: one contiguous block of coordinates
        let start = rng.gen_range(0..d);
        let mut len = 1;
        while len < d && rng.gen::<f64>() < cr {
            len += 1;
        }
        for k in 0..len {
            let j = (start + k) % d;
            trial[j] = mutant[j];
        }
    } else {
        // binomial crossover with one forced coordinate
        let forced = rng.gen_range(0..d);
        for j in 0..d {
            if j == forced || rng.gen::<f64>() < cr {
                trial[j] = mutant[j];
            }
        }
    }
    for j in 0..d {
        trial[j] = reflect_into(trial[j], bounds[j].0, bounds[j].1);
    }
    trial
}

/// Mirror a value into [lo, hi]; far overshoots fold repeatedly.
fn reflect_into(v: f64, lo: f64, hi: f64) -> f64 {
    if !v.is_finite() {
        return 0.5 * (lo + hi);
    }
    let mut t = v;
    for _ in 0..64 {
        if t < lo {
            t = lo + (lo - t);
        } else if t > hi {
            t = hi - (t - hi);
        } else {
            return t;
        }
    }
    t.clamp(lo, hi)
}

fn push_archive(archive: &mut Vec<Vec<f64>>, parent: Vec<f64>, cap: usize, rng: &mut ChaCha12Rng) {
    if archive.len() < cap {
        archive.push(parent);
    } else if cap > 0 {
        let victim = rng.gen_range(0..archive.len());
        archive[victim] = parent;
    }
}

fn shrink_target(n_init: usize, gen: usize, total: usize) -> usize {
    if total == 0 {
        return n_init;
    }
    let frac = gen as f64 / total as f64;
    let t = n_init as f64 + (MIN_POPULATION as f64 - n_init as f64) * frac;
    (t.round() as usize).clamp(MIN_POPULATION, n_init)
}

/// Finite-difference steepest descent with backtracking, for smooth
/// deterministic objectives. Starts at the box center, projects steps back
/// into the box, and spends at most `max_iterations` outer steps.
fn run_descent<F>(objective: &F, cfg: &OptimizerConfig) -> MinimizeResult
where
    F: Fn(&[f64], EvalTag) -> f64 + Sync,
{
    let d = cfg.bounds.len();
    let mut evals: u64 = 0;
    let tag = |gen: usize, evals: &mut u64| {
        let t = EvalTag { generation: gen as u64, member: *evals };
        *evals += 1;
        t
    };
    let clamp = |x: &mut Vec<f64>| {
        for j in 0..d {
            x[j] = x[j].clamp(cfg.bounds[j].0, cfg.bounds[j].1);
        }
    };
    let min_width = cfg
        .bounds
        .iter()
        .map(|&(lo, hi)| hi - lo)
        .fold(f64::INFINITY, f64::min);

    let mut x: Vec<f64> = cfg.bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut fx = sanitize(objective(&x, tag(0, &mut evals)));
    let mut trace = vec![fx];
    let h = 1e-6 * min_width;

    for gen in 1..=cfg.max_iterations {
        let mut grad = vec![0.0; d];
        for j in 0..d {
            let mut up = x.clone();
            up[j] = (up[j] + h).min(cfg.bounds[j].1);
            let mut dn = x.clone();
            dn[j] = (dn[j] - h).max(cfg.bounds[j].0);
            let span = up[j] - dn[j];
            if span <= 0.0 {
                continue;
            }
            let fu = sanitize(objective(&up, tag(gen, &mut evals)));
            let fd = sanitize(objective(&dn, tag(gen, &mut evals)));
            grad[j] = (fu - fd) / span;
        }
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-14) {
            trace.push(fx);
            continue;
        }
        let mut step = 0.1 * min_width;
        let mut improved = false;
        for _ in 0..30 {
            let mut cand: Vec<f64> =
                x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi / norm).collect();
            clamp(&mut cand);
            let fc = sanitize(objective(&cand, tag(gen, &mut evals)));
            if fc < fx {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        trace.push(fx);
        if !improved && step < 1e-12 * min_width {
            break;
        }
    }
    MinimizeResult { best_x: x, best_f: fx, trace, evaluations: evals }
}

/// Smallest x in [low, high] with f(x) <= target, for f monotone
/// decreasing, located by bisection to within `tol`.
pub fn minimize_scalar_monotone<F>(
    mut f: F,
    target: f64,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi && tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need finite low < high and positive tolerance, got [{lo}, {hi}], tol {tol}"
        )));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo > target && target >= f_hi) {
        return Err(Error::BracketDoesNotStraddle { lo, hi, f_lo, f_hi, target });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if f(mid) <= target {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}
