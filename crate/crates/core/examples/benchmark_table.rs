use aatr::benchmark::{run_benchmarks, BenchmarkConfig};
use aatr::simgen::{simulate, BetaShape, Dependence, SimScenario};

// Outer 3-fold test MSE of every method on the dependent-curve rectangle
// scenarios, averaged over a few simulated datasets.
// Pass a number of replicates as the first argument (default 2).

fn main() -> aatr::Result<()> {
    let reps: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2);
    let cfg = BenchmarkConfig::default();
    print!("{:<8}", "shape");
    for m in &cfg.methods {
        print!(" {:>17}", m.name());
    }
    println!();
    for shape in [BetaShape::Rect1, BetaShape::Rect2, BetaShape::Rect3] {
        let data = (0..reps)
            .map(|seed| {
                simulate(&SimScenario {
                    dependence: Dependence::Dependent,
                    beta_shape: shape,
                    seed,
                    ..Default::default()
                })
                .map(|s| s.dataset)
            })
            .collect::<aatr::Result<Vec<_>>>()?;
        let reports = run_benchmarks(&data, &cfg)?;
        print!("{:<8}", format!("{shape:?}").to_lowercase());
        for m in &cfg.methods {
            let means: Vec<f64> = reports.iter().map(|r| r.score(*m).expect("method run").mean).collect();
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            let sd = if means.len() > 1 {
                (means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            print!(" {:>8.3} ± {:<6.3}", mean, sd);
        }
        println!();
    }
    Ok(())
}
