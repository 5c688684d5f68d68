use aatr::optimizer::{de_minimize, DeConfig};

// Minimize the 2-D Rastrigin function, whose global minimum is 0 at the origin.

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
            .sum::<f64>()
}

fn main() -> aatr::Result<()> {
    for seed in 0..5 {
        let cfg = DeConfig::new(vec![(-5.12, 5.12); 2], 20_000, seed);
        let res = de_minimize(rastrigin, &cfg, &[])?;
        println!(
            "seed {seed}: f = {:.2e} at ({:+.5}, {:+.5}) after {} evaluations",
            res.objective, res.best[0], res.best[1], res.evaluations
        );
    }
    Ok(())
}
