use aatr::fitter::{fit_dataset, FitConfig};
use aatr::simgen::{simulate, true_beta, BetaShape, Dependence, SimScenario};

// Fit the template model to a two-rectangle simulation and compare the
// recovered coefficient function with the truth.

fn main() -> aatr::Result<()> {
    let scn = SimScenario {
        dependence: Dependence::Independent,
        beta_shape: BetaShape::Rect2,
        noise_sd: 0.1,
        seed: 3,
        ..Default::default()
    };
    let sim = simulate(&scn)?;
    let res = fit_dataset(&sim.dataset, &FitConfig::default())?;

    println!("selected q = {}, lambda = {:.4e}", res.q_star, res.lambda_star);
    for r in &res.gamma_star.rects {
        println!("  rectangle: height {:+.3}  center {:+.3}  width {:.3}", r.height, r.center, r.width);
    }
    let losses: Vec<String> = res.trace.iter().map(|s| format!("{:.4}", s.train_mse)).collect();
    println!("training MSE by accepted iteration: {}", losses.join(" -> "));

    let grid = sim.dataset.grid();
    let truth = true_beta(scn.beta_shape, grid);
    let est = res.fit.raw_beta();
    println!("\n{:>7} {:>9} {:>9}", "t", "true", "fitted");
    for j in (0..grid.p()).step_by(10) {
        println!("{:>7.3} {:>9.3} {:>9.3}", grid.points()[j], truth[j], est[j]);
    }
    Ok(())
}
