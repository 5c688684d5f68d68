//! DE/rand/1/bin with dithered mutation factor and reflective bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AatrError, Result};

/// Full configuration of one differential-evolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub population_size: usize,
    /// `F` is drawn uniformly from this range for every mutant.
    pub mutation_range: (f64, f64),
    pub crossover_rate: f64,
    /// Total number of objective evaluations, initial population included.
    pub eval_budget: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
}

impl DeConfig {
    /// Default constants: `F ∈ [0.5, 1]`, `CR = 0.9`, population
    /// `max(20, 10 * dim)`.
    pub fn new(bounds: Vec<(f64, f64)>, eval_budget: usize, seed: u64) -> Self {
        DeConfig {
            population_size: default_population(bounds.len()),
            mutation_range: (0.5, 1.0),
            crossover_rate: 0.9,
            eval_budget,
            seed,
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(AatrError::invalid("DE needs at least one variable"));
        }
        for (d, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(AatrError::invalid(format!(
                    "infeasible bounds for variable {d}: [{lo}, {hi}]"
                )));
            }
        }
        if self.population_size < 4 {
            return Err(AatrError::invalid(format!(
                "DE population must be at least 4, got {}",
                self.population_size
            )));
        }
        if self.eval_budget < self.population_size {
            return Err(AatrError::invalid(format!(
                "DE budget {} is smaller than the population {}",
                self.eval_budget, self.population_size
            )));
        }
        let (f_lo, f_hi) = self.mutation_range;
        if !(f_lo > 0.0 && f_lo <= f_hi && f_hi < 2.0) {
            return Err(AatrError::invalid(format!(
                "mutation range must lie in (0, 2), got ({f_lo}, {f_hi})"
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(AatrError::invalid(format!(
                "crossover rate must lie in [0, 1], got {}",
                self.crossover_rate
            )));
        }
        Ok(())
    }
}

pub fn default_population(dim: usize) -> usize {
    (10 * dim).max(20)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub objective: f64,
    pub evaluations: usize,
    pub generations: usize,
    /// Best objective after the initial population and after every generation.
    pub history: Vec<f64>,
}

/// Fold `x` back into `[lo, hi]` by mirroring at the bounds.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    if (lo..=hi).contains(&x) {
        return x;
    }
    if !x.is_finite() {
        return 0.5 * (lo + hi);
    }
    let w = hi - lo;
    let mut y = (x - lo).rem_euclid(2.0 * w);
    if y > w {
        y = 2.0 * w - y;
    }
    (lo + y).clamp(lo, hi)
}

/// Minimize `f` over the box `cfg.bounds`.
///
/// `initial` points (reflected into the box) replace the first members of the
/// random initial population. Non-finite objective values count as `+∞`.
/// Each generation builds all trial vectors from the previous population and
/// applies greedy selection in index order, so the result depends only on
/// `cfg.seed`.
pub fn de_minimize<F>(mut f: F, cfg: &DeConfig, initial: &[Vec<f64>]) -> Result<DeResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate()?;
    let dim = cfg.dim();
    let np = cfg.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(np);
    for x in initial.iter().take(np) {
        if x.len() != dim {
            return Err(AatrError::DimensionMismatch {
                what: "DE initial point",
                expected: dim,
                actual: x.len(),
            });
        }
        pop.push(
            x.iter()
                .zip(&cfg.bounds)
                .map(|(&v, &(lo, hi))| reflect(v, lo, hi))
                .collect(),
        );
    }
    while pop.len() < np {
        pop.push(
            cfg.bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect(),
        );
    }

    let sanitize = |v: f64| if v.is_finite() { v } else { f64::INFINITY };
    let mut fitness: Vec<f64> = pop.iter().map(|x| sanitize(f(x))).collect();
    let mut evaluations = np;

    let mut best_idx = argmin(&fitness);
    let mut best = pop[best_idx].clone();
    let mut best_val = fitness[best_idx];
    let mut history = vec![best_val];
    let mut generations = 0;

    let (f_lo, f_hi) = cfg.mutation_range;
    let mut trial = vec![0.0; dim];
    while evaluations < cfg.eval_budget {
        let mut next_pop = pop.clone();
        let mut next_fit = fitness.clone();
        for i in 0..np {
            if evaluations >= cfg.eval_budget {
                break;
            }
            let (r1, r2, r3) = distinct_donors(&mut rng, np, i);
            let scale = if f_hi > f_lo {
                rng.random_range(f_lo..=f_hi)
            } else {
                f_lo
            };
            let forced = rng.random_range(0..dim);
            for d in 0..dim {
                let cross = d == forced || rng.random::<f64>() < cfg.crossover_rate;
                trial[d] = if cross {
                    let (lo, hi) = cfg.bounds[d];
                    reflect(pop[r3][d] + scale * (pop[r1][d] - pop[r2][d]), lo, hi)
                } else {
                    pop[i][d]
                };
            }
            let val = sanitize(f(&trial));
            evaluations += 1;
            if val <= fitness[i] {
                next_pop[i].copy_from_slice(&trial);
                next_fit[i] = val;
                if val < best_val {
                    best_val = val;
                    best.copy_from_slice(&trial);
                }
            }
        }
        pop = next_pop;
        fitness = next_fit;
        generations += 1;
        history.push(best_val);
    }
    best_idx = argmin(&fitness);
    if fitness[best_idx] < best_val {
        best_val = fitness[best_idx];
        best = pop[best_idx].clone();
    }
    if !best_val.is_finite() {
        return Err(AatrError::Numerical(
            "DE found no point with a finite objective".into(),
        ));
    }
    Ok(DeResult {
        best,
        objective: best_val,
        evaluations,
        generations,
        history,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut idx = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[idx] {
            idx = i;
        }
    }
    idx
}

fn distinct_donors(rng: &mut ChaCha8Rng, np: usize, target: usize) -> (usize, usize, usize) {
    let mut pick = |exclude: &[usize]| loop {
        let k = rng.random_range(0..np);
        if !exclude.contains(&k) {
            return k;
        }
    };
    let r1 = pick(&[target]);
    let r2 = pick(&[target, r1]);
    let r3 = pick(&[target, r1, r2]);
    (r1, r2, r3)
}
