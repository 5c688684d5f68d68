use aatr::simgen::{simulate, BetaShape, Dependence, SimScenario};

// Generate the eight simulation scenarios and summarize each one.

fn main() -> aatr::Result<()> {
    let shapes = [BetaShape::Rect1, BetaShape::Rect2, BetaShape::Rect3, BetaShape::Smooth];
    println!("{:<8} {:<12} {:>10} {:>10} {:>12}", "shape", "dependence", "var(y)", "var(sig)", "mean |dx|");
    for dependence in [Dependence::Independent, Dependence::Dependent] {
        for shape in shapes {
            let scn = SimScenario {
                dependence,
                beta_shape: shape,
                seed: 42,
                ..Default::default()
            };
            let sim = simulate(&scn)?;
            let x = sim.dataset.x();
            let roughness = (0..x.nrows())
                .flat_map(|i| (1..x.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| (x[(i, j)] - x[(i, j - 1)]).abs())
                .sum::<f64>()
                / (x.nrows() * (x.ncols() - 1)) as f64;
            println!(
                "{:<8} {:<12} {:>10.3} {:>10.3} {:>12.4}",
                format!("{shape:?}").to_lowercase(),
                format!("{dependence:?}").to_lowercase(),
                variance(sim.dataset.y().as_slice()),
                variance(sim.signal.as_slice()),
                roughness
            );
        }
    }
    Ok(())
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}
