//! Acceptance criteria. Every criterion prints one `[PASS]`/`[FAIL]` line;
//! the test fails if any criterion fails.
//!
//! Run with `cargo test --test acceptance -- --nocapture`. Set
//! `AATR_ACCEPTANCE=1,5,9` to run a subset.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use aatr::benchmark::{run_benchmarks, BenchmarkConfig, Method};
use aatr::dataio::{load_dataset, DatasetSpec, ResponseSource};
use aatr::fitter::{fit_dataset, init_templates, FitConfig};
use aatr::grid::{FunctionalDataset, Grid, GridSpec};
use aatr::optimizer::{de_minimize, DeConfig, DeSettings, TemplateObjective};
use aatr::ridge::{mse, RidgeSystem};
use aatr::simgen::{simulate, BetaShape, Dependence, SimScenario};
use aatr::template::{overlap_gram, rect_eval};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn report(id: usize, title: &str, pass: bool, detail: String, elapsed: Duration) -> Outcome {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] C{id} {title}: {detail} ({:.1}s)", elapsed.as_secs_f64());
    std::io::stdout().flush().ok();
    Outcome { id, pass, detail }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2: closed-form heights against a brute-force minimizer.

/// Objective of the height problem evaluated directly from its definition:
/// residual sum of squares of `y_c - ∫ x γ` plus `λ ∫ (β̃ - γ)²`, with `γ`
/// built on the grid from the rectangle indicators.
struct HeightProblem {
    /// `dt · X g_j` for each rectangle, one column each.
    u: Vec<Vec<f64>>,
    /// Indicator of each rectangle on the grid.
    g: Vec<Vec<f64>>,
    y_c: Vec<f64>,
    penalty: Option<(Vec<f64>, f64)>,
    dt: f64,
}

impl HeightProblem {
    fn new(ds: &FunctionalDataset, centers: &[f64], widths: &[f64], penalty: Option<(Vec<f64>, f64)>) -> Self {
        let grid = ds.grid();
        let dt = grid.dt();
        let g: Vec<Vec<f64>> = centers
            .iter()
            .zip(widths)
            .map(|(&c, &w)| grid.points().iter().map(|&t| rect_eval(t, c, w).unwrap()).collect())
            .collect();
        let u = g
            .iter()
            .map(|gj| {
                (0..ds.n())
                    .map(|i| dt * (0..ds.p()).map(|k| ds.x()[(i, k)] * gj[k]).sum::<f64>())
                    .collect()
            })
            .collect();
        let y_c = ds.y_centered().as_slice().to_vec();
        HeightProblem { u, g, y_c, penalty, dt }
    }

    fn j(&self, a: &[f64]) -> f64 {
        let mut v = 0.0;
        for i in 0..self.y_c.len() {
            let fit: f64 = a.iter().zip(&self.u).map(|(aj, uj)| aj * uj[i]).sum();
            v += (self.y_c[i] - fit).powi(2);
        }
        if let Some((beta, lambda)) = &self.penalty {
            let mut pen = 0.0;
            for k in 0..beta.len() {
                let gamma: f64 = a.iter().zip(&self.g).map(|(aj, gj)| aj * gj[k]).sum();
                pen += (beta[k] - gamma).powi(2);
            }
            v += lambda * self.dt * pen;
        }
        v
    }

    fn fd_gradient(&self, a: &[f64]) -> Vec<f64> {
        (0..a.len())
            .map(|j| {
                let h = 1e-5 * a[j].abs().max(1.0);
                let (mut up, mut dn) = (a.to_vec(), a.to_vec());
                up[j] += h;
                dn[j] -= h;
                (self.j(&up) - self.j(&dn)) / (2.0 * h)
            })
            .collect()
    }
}

const BOX: f64 = 5.0;

/// Exhaustive search over a regular grid on `[-5, 5]^q`, then cyclic
/// coordinate descent.
fn brute_force(prob: &HeightProblem, q: usize) -> (Vec<f64>, f64) {
    let step = match q {
        1 => 0.01,
        2 => 0.05,
        _ => 0.2,
    };
    let ticks = (2.0 * BOX / step).round() as usize + 1;
    let mut best = (vec![0.0; q], f64::INFINITY);
    let mut idx = vec![0usize; q];
    loop {
        let a: Vec<f64> = idx.iter().map(|&i| -BOX + i as f64 * step).collect();
        let v = prob.j(&a);
        if v < best.1 {
            best = (a, v);
        }
        let mut d = 0;
        while d < q {
            idx[d] += 1;
            if idx[d] < ticks {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == q {
            break;
        }
    }
    // J is quadratic along any coordinate, so three evaluations give the
    // exact line minimum.
    let mut a = best.0;
    for _ in 0..20000 {
        let mut moved = 0.0f64;
        for j in 0..q {
            let h = 0.5;
            let f0 = prob.j(&a);
            let (mut l, mut r) = (a.clone(), a.clone());
            l[j] -= h;
            r[j] += h;
            let (fl, fr) = (prob.j(&l), prob.j(&r));
            let curv = fl - 2.0 * f0 + fr;
            if curv <= 0.0 {
                continue;
            }
            let new = (a[j] - 0.5 * h * (fr - fl) / curv).clamp(-BOX, BOX);
            moved = moved.max((new - a[j]).abs());
            a[j] = new;
        }
        if moved < 1e-12 {
            break;
        }
    }
    let v = prob.j(&a);
    (a, v)
}

struct HeightInstance {
    ds: FunctionalDataset,
    centers: Vec<f64>,
    widths: Vec<f64>,
    penalty: Option<(Vec<f64>, f64)>,
}

/// Random instance with rectangle edges on cell boundaries, so that the
/// exact overlap integrals and grid quadrature coincide.
fn height_instance(rng: &mut ChaCha8Rng, q: usize, reshape: bool) -> HeightInstance {
    let (n, p) = (20, 50);
    let grid = Grid::new(p, -1.0, 1.0).unwrap();
    let dt = grid.dt();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    while spans.len() < q {
        let lo = rng.random_range(0..p - 2);
        let hi = rng.random_range(lo + 2..=p.min(lo + 30));
        if !spans.contains(&(lo, hi)) {
            spans.push((lo, hi));
        }
    }
    let centers: Vec<f64> = spans.iter().map(|&(lo, hi)| -1.0 + 0.5 * (lo + hi) as f64 * dt).collect();
    let widths: Vec<f64> = spans.iter().map(|&(lo, hi)| (hi - lo) as f64 * dt).collect();
    let heights: Vec<f64> = (0..q).map(|_| rng.random_range(-2.0..2.0)).collect();

    let x = DMatrix::from_fn(n, p, |_, _| normal(rng));
    let gamma: Vec<f64> = grid
        .points()
        .iter()
        .map(|&t| (0..q).map(|j| heights[j] * rect_eval(t, centers[j], widths[j]).unwrap()).sum())
        .collect();
    let raw = FunctionalDataset::new(grid.clone(), x, DVector::zeros(n)).unwrap().standardize().unwrap();
    let signal = raw.x() * DVector::from_vec(gamma.clone()) * dt;
    let y = DVector::from_fn(n, |i, _| 0.3 + signal[i] + 0.1 * normal(rng));
    let ds = FunctionalDataset::new(grid, raw.x().clone(), y).unwrap().standardize_with(raw.standardization().unwrap()).unwrap();
    let penalty = reshape.then(|| {
        let beta: Vec<f64> = gamma.iter().map(|g| g + 0.3 * normal(rng)).collect();
        let lambda = 10f64.powf(rng.random_range(-3.0..3.0));
        (beta, lambda)
    });
    HeightInstance { ds, centers, widths, penalty }
}

fn criteria_1_and_2() -> Vec<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let (mut max_da, mut max_rel_j, mut max_grad) = (0.0f64, 0.0f64, 0.0f64);
    let (mut ok1, mut ok2, mut redraws) = (0, 0, 0);
    let total = 200;
    let mut done = 0;
    while done < total {
        let q = done % 3 + 1;
        let reshape = done % 2 == 1;
        let inst = height_instance(&mut rng, q, reshape);
        let obj = match &inst.penalty {
            None => TemplateObjective::init(&inst.ds),
            Some((beta, lambda)) => TemplateObjective::reshape(&inst.ds, beta, *lambda).unwrap(),
        };
        let (_, a_cf) = obj.evaluate(&inst.centers, &inst.widths).unwrap();
        if a_cf.iter().any(|a| a.abs() > BOX - 0.5) {
            // The brute-force box must contain the minimizer.
            redraws += 1;
            continue;
        }
        let prob = HeightProblem::new(&inst.ds, &inst.centers, &inst.widths, inst.penalty.clone());
        let (a_bf, j_bf) = brute_force(&prob, q);
        let resolution = match q {
            1 => 0.01,
            2 => 0.05,
            _ => 0.2,
        };
        let j_cf = prob.j(a_cf.as_slice());
        let da = a_cf.iter().zip(&a_bf).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let rel_j = (j_cf - j_bf) / j_bf.abs().max(1e-12);
        max_da = max_da.max(da);
        max_rel_j = max_rel_j.max(rel_j);
        if da <= resolution && rel_j <= 1e-9 {
            ok1 += 1;
        }

        let g = prob.fd_gradient(a_cf.as_slice());
        let g0 = prob.fd_gradient(&vec![0.0; q]);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rel = norm(&g) / norm(&g0).max(1e-300);
        max_grad = max_grad.max(rel);
        if rel < 1e-4 {
            ok2 += 1;
        }
        done += 1;
    }
    let elapsed = start.elapsed();
    vec![
        report(
            1,
            "closed-form heights vs brute force",
            ok1 == total && elapsed < Duration::from_secs(60),
            format!(
                "{ok1}/{total} within grid resolution, max |ΔA| = {max_da:.2e}, max relative J gap = {max_rel_j:.1e}, {redraws} redrawn"
            ),
            elapsed,
        ),
        report(
            2,
            "stationarity at the closed-form heights",
            ok2 == total,
            format!("{ok2}/{total} with relative gradient norm < 1e-4, max = {max_grad:.2e}"),
            elapsed,
        ),
    ]
}

// ---------------------------------------------------------------------------
// Criterion 3: ridge limits in λ.

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut worst_big, mut worst_small) = (0.0f64, 0.0f64);
    for inst in 0..50 {
        let n = rng.random_range(8..60);
        let p = if inst % 2 == 0 { rng.random_range(n + 5..150) } else { rng.random_range(10..n.max(11)) };
        let grid = Grid::new(p, -1.0, 1.0).unwrap();
        let x = DMatrix::from_fn(n, p, |_, _| normal(&mut rng));
        let y = DVector::from_fn(n, |_, _| normal(&mut rng));
        let ds = FunctionalDataset::new(grid, x, y).unwrap().standardize().unwrap();
        let sys = RidgeSystem::new(&ds).unwrap();

        let gamma: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
        let big = sys.solve(&gamma, 1e8).unwrap();
        let diff = big.beta.iter().zip(&gamma).map(|(b, g)| (b - g).powi(2)).sum::<f64>().sqrt();
        let gn = gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
        worst_big = worst_big.max(diff / gn.max(1.0));

        let small = sys.solve(&vec![0.0; p], 1e-12).unwrap();
        let mn = sys.min_norm().unwrap();
        let x_new = DMatrix::from_fn(25, p, |_, _| normal(&mut rng));
        for xs in [ds.x().clone(), x_new] {
            let a = small.predict(&xs).unwrap();
            let b = mn.predict(&xs).unwrap();
            let rel = (&a - &b).norm() / b.norm().max(1e-300);
            worst_small = worst_small.max(rel);
        }
    }
    let elapsed = start.elapsed();
    report(
        3,
        "ridge limits in lambda",
        worst_big < 1e-3 && worst_small < 1e-4 && elapsed < Duration::from_secs(10),
        format!("λ=1e8: max ‖β-γ‖/max(1,‖γ‖) = {worst_big:.2e}; λ=1e-12: max relative prediction gap = {worst_small:.2e}"),
        elapsed,
    )
}

// ---------------------------------------------------------------------------
// Criterion 4: exact overlap Gram against grid quadrature.

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for set in 0..100 {
        let p = [10, 37, 50, 200, 501][set % 5];
        let grid = Grid::new(p, -1.0, 1.0).unwrap();
        let q = rng.random_range(1..=4);
        let centers: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
        let widths: Vec<f64> = (0..q).map(|_| rng.random_range(2.0 * grid.dt()..2.0)).collect();
        let exact = overlap_gram(&centers, &widths, &grid).unwrap();
        for j in 0..q {
            for k in 0..q {
                let quad = grid.dt()
                    * grid
                        .points()
                        .iter()
                        .map(|&t| rect_eval(t, centers[j], widths[j]).unwrap() * rect_eval(t, centers[k], widths[k]).unwrap())
                        .sum::<f64>();
                let d = (exact[(j, k)] - quad).abs();
                worst = worst.max(d);
                worst_ratio = worst_ratio.max(d / (2.0 * grid.dt()));
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        4,
        "overlap Gram vs quadrature",
        worst_ratio <= 1.0 && elapsed < Duration::from_secs(5),
        format!("max entrywise gap = {worst:.2e} = {worst_ratio:.2} × 2dt"),
        elapsed,
    )
}

// ---------------------------------------------------------------------------
// Criterion 5: template recovery on noiseless data.

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    let mut errs = Vec::new();
    for seed in 0..5u64 {
        let sim = simulate(&SimScenario {
            n: 100,
            p: 200,
            dependence: Dependence::Independent,
            beta_shape: BetaShape::Rect1,
            noise_sd: 0.0,
            seed,
            ..Default::default()
        })
        .unwrap();
        let ds = sim.dataset.standardize().unwrap();
        let cfg = FitConfig {
            max_q: 1,
            de_init: DeSettings::with_budget(5000),
            master_seed: seed,
            ..Default::default()
        };
        let t = &init_templates(&ds, &cfg).unwrap()[0];
        let (dc, dw) = ((t.centers()[0] - 0.0).abs(), (t.widths()[0] - 0.8).abs());
        if dc <= 0.05 && dw <= 0.1 {
            hits += 1;
        }
        errs.push(format!("({dc:.3}, {dw:.3})"));
    }
    let elapsed = start.elapsed();
    report(
        5,
        "template recovery",
        hits >= 4 && elapsed < Duration::from_secs(120),
        format!("{hits}/5 seeds recover t0 ± 0.05 and T ± 0.1; |Δt0|, |ΔT| per seed: {}", errs.join(" ")),
        elapsed,
    )
}

// ---------------------------------------------------------------------------
// Criteria 6, 7 and 8: simulated benchmark on dependent rectangle scenarios.

fn criteria_6_7_8() -> Vec<Outcome> {
    let start = Instant::now();
    let shapes = [BetaShape::Rect1, BetaShape::Rect2, BetaShape::Rect3];
    let mut lines = Vec::new();
    let mut pass_a = true;
    let mut pass_b = true;
    let mut traces = Vec::new();
    for shape in shapes {
        let data: Vec<FunctionalDataset> = (0..5u64)
            .map(|seed| {
                simulate(&SimScenario {
                    dependence: Dependence::Dependent,
                    beta_shape: shape,
                    noise_sd: 1.0,
                    seed,
                    ..Default::default()
                })
                .unwrap()
                .dataset
            })
            .collect();
        let mut aatr = Vec::new();
        let mut ridge = Vec::new();
        for (seed, ds) in data.iter().enumerate() {
            let mut cfg = BenchmarkConfig {
                methods: vec![Method::Aatr, Method::Ridge],
                outer_folds: 3,
                ..Default::default()
            };
            cfg.fit.master_seed = seed as u64;
            let rep = run_benchmarks(std::slice::from_ref(ds), &cfg).unwrap().remove(0);
            let a = rep.score(Method::Aatr).unwrap();
            aatr.push(a.mean);
            ridge.push(rep.score(Method::Ridge).unwrap().mean);
            traces.extend(a.train_traces.iter().cloned());
        }
        let (ma, mr) = (aatr.iter().sum::<f64>() / 5.0, ridge.iter().sum::<f64>() / 5.0);
        pass_a &= ma <= mr;
        pass_b &= (0.85..=1.35).contains(&ma);
        lines.push(format!("{shape:?}: aatr {ma:.3} vs ridge {mr:.3}"));
    }
    let elapsed6 = start.elapsed();
    let mut out = vec![
        report(
            6,
            "(a) template method at most ridge",
            pass_a && elapsed6 < Duration::from_secs(1800),
            lines.join("; "),
            elapsed6,
        ),
        report(
            6,
            "(b) template method MSE within [0.85, 1.35]",
            pass_b,
            lines.join("; "),
            elapsed6,
        ),
    ];

    let tol = FitConfig::default().rel_improve_tol;
    let steps: usize = traces.iter().map(|t| t.len().saturating_sub(1)).sum();
    let bad = traces
        .iter()
        .filter(|t| t.windows(2).any(|w| w[1].is_nan() || w[1] >= w[0] * (1.0 - tol)))
        .count();
    out.push(report(
        7,
        "alternating refinement is monotone",
        bad == 0 && !traces.is_empty(),
        format!("{} traces, {steps} accepted iterations, {bad} violations", traces.len()),
        Duration::ZERO,
    ));

    let start = Instant::now();
    let mut same = 0;
    for shape in shapes {
        let ds = simulate(&SimScenario {
            dependence: Dependence::Dependent,
            beta_shape: shape,
            seed: 0,
            ..Default::default()
        })
        .unwrap()
        .dataset;
        let one = fit_dataset(&ds, &FitConfig { jobs: 1, ..Default::default() }).unwrap();
        let eight = fit_dataset(&ds, &FitConfig { jobs: 8, ..Default::default() }).unwrap();
        if one == eight {
            same += 1;
        }
    }
    out.push(report(
        8,
        "jobs=1 and jobs=8 give identical fits",
        same == shapes.len(),
        format!("{same}/{} scenarios identical (cv_table, template, model, traces)", shapes.len()),
        start.elapsed(),
    ));
    out
}

// ---------------------------------------------------------------------------
// Criterion 9: optimizer sanity.

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let rastrigin = |x: &[f64]| {
        10.0 * x.len() as f64
            + x.iter()
                .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                .sum::<f64>()
    };
    let worst_sphere = (0..10u64)
        .map(|s| de_minimize(sphere, &DeConfig::new(vec![(-5.0, 5.0); 2], 2000, s), &[]).unwrap().objective)
        .fold(0.0, f64::max);
    let rast: Vec<f64> = (0..10u64)
        .map(|s| de_minimize(rastrigin, &DeConfig::new(vec![(-5.12, 5.12); 2], 20000, s), &[]).unwrap().objective)
        .collect();
    let good = rast.iter().filter(|&&v| v < 1.0).count();
    report(
        9,
        "differential evolution sanity",
        worst_sphere < 1e-5 && good >= 8,
        format!("sphere worst of 10 seeds = {worst_sphere:.1e}; Rastrigin < 1 in {good}/10 seeds"),
        start.elapsed(),
    )
}

// ---------------------------------------------------------------------------
// Criterion 10: long CSV ingestion through fitting.

/// Random daily curve as harmonics of the 24-hour period, with the exact
/// integral of the curve over `[t_lo, t_hi]` on the `[-1, 1]` scale.
struct DayCurve {
    level: f64,
    coef: Vec<(f64, f64)>,
}

impl DayCurve {
    fn omega(k: usize) -> f64 {
        k as f64 * std::f64::consts::PI
    }

    fn at(&self, t: f64) -> f64 {
        self.level
            + self
                .coef
                .iter()
                .enumerate()
                .map(|(k, (c, s))| c * (Self::omega(k + 1) * t).cos() + s * (Self::omega(k + 1) * t).sin())
                .sum::<f64>()
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.level * (hi - lo)
            + self
                .coef
                .iter()
                .enumerate()
                .map(|(k, (c, s))| {
                    let w = Self::omega(k + 1);
                    c * ((w * hi).sin() - (w * lo).sin()) / w - s * ((w * hi).cos() - (w * lo).cos()) / w
                })
                .sum::<f64>()
    }
}

fn write_days(dir: &std::path::Path, tag: &str, days: &[(String, DayCurve, f64)]) -> (std::path::PathBuf, std::path::PathBuf) {
    let curves = dir.join(format!("{tag}_curves.csv"));
    let responses = dir.join(format!("{tag}_responses.csv"));
    let mut c = std::io::BufWriter::new(std::fs::File::create(&curves).unwrap());
    let mut r = std::io::BufWriter::new(std::fs::File::create(&responses).unwrap());
    writeln!(c, "unit,time,value").unwrap();
    writeln!(r, "unit,response").unwrap();
    for (unit, curve, y) in days {
        for hour in 0..24 {
            let t = -1.0 + hour as f64 / 12.0;
            writeln!(c, "{unit},{hour:02}:00,{}", curve.at(t)).unwrap();
        }
        writeln!(r, "{unit},{y}").unwrap();
    }
    (curves, responses)
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let sigma = 0.5;
    // Afternoon average: 12:00-18:00 is [0, 0.5] on the [-1, 1] scale.
    let (lo, hi, height) = (0.0, 0.5, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut make = |count: usize, prefix: &str| -> Vec<(String, DayCurve, f64)> {
        (0..count)
            .map(|d| {
                let curve = DayCurve {
                    level: 15.0 + 3.0 * normal(&mut rng),
                    coef: (0..3).map(|_| (2.0 * normal(&mut rng), 2.0 * normal(&mut rng))).collect(),
                };
                let y = 1.0 + height * curve.integral(lo, hi) + sigma * normal(&mut rng);
                (format!("{prefix}{d:05}"), curve, y)
            })
            .collect()
    };
    let train = make(200, "train-");
    let test = make(2000, "test-");
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec { p: 96, a: -1.0, b: 1.0 };
    let load = |tag: &str, days: &[(String, DayCurve, f64)]| {
        let (c, r) = write_days(dir.path(), tag, days);
        load_dataset(&DatasetSpec::new(c, ResponseSource::File(r), grid)).unwrap()
    };
    let tr = load("train", &train);
    let te = load("test", &test);
    let res = fit_dataset(&tr.dataset, &FitConfig::default()).unwrap();
    let pred = res.predict(te.dataset.x()).unwrap();
    let test_mse = mse(pred.as_slice(), te.dataset.y().as_slice()).unwrap();
    let elapsed = start.elapsed();
    report(
        10,
        "long CSV to fit round trip",
        test_mse < 1.1 * sigma * sigma && elapsed < Duration::from_secs(60),
        format!(
            "test MSE = {test_mse:.4} vs 1.1σ² = {:.4} on {} test days (q* = {}, λ* = {:.2e})",
            1.1 * sigma * sigma,
            te.units.len(),
            res.q_star,
            res.lambda_star
        ),
        elapsed,
    )
}

fn selected() -> Option<BTreeSet<usize>> {
    std::env::var("AATR_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

#[test]
fn acceptance_criteria() {
    let only = selected();
    let want = |ids: &[usize]| only.as_ref().is_none_or(|s| ids.iter().any(|i| s.contains(i)));
    let mut outcomes = Vec::new();
    if want(&[1, 2]) {
        outcomes.extend(criteria_1_and_2());
    }
    if want(&[3]) {
        outcomes.push(criterion_3());
    }
    if want(&[4]) {
        outcomes.push(criterion_4());
    }
    if want(&[5]) {
        outcomes.push(criterion_5());
    }
    if want(&[6, 7, 8]) {
        outcomes.extend(criteria_6_7_8());
    }
    if want(&[9]) {
        outcomes.push(criterion_9());
    }
    if want(&[10]) {
        outcomes.push(criterion_10());
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("C{}: {}", o.id, o.detail))
        .collect();
    println!(
        "{} of {} checks passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
