use aatr::fitter::{kfold_split, training_indices};
use aatr::ridge::{mse, RidgeSystem, RoughnessSystem};
use aatr::simgen::{simulate, BetaShape, Dependence, SimScenario};

// Plain ridge, roughness-penalized ridge and minimum-norm least squares on
// one train/test split, across their penalty weights.

fn main() -> aatr::Result<()> {
    let sim = simulate(&SimScenario {
        dependence: Dependence::Dependent,
        beta_shape: BetaShape::Smooth,
        seed: 11,
        ..Default::default()
    })?;
    let raw = &sim.dataset;
    let folds = kfold_split(raw.n(), 3, 0)?;
    let train = raw.subset(&training_indices(&folds, 0))?.standardize()?;
    let test_x = raw.x().select_rows(&folds[0]);
    let test_y: Vec<f64> = folds[0].iter().map(|&i| raw.y()[i]).collect();

    let ridge = RidgeSystem::new(&train)?;
    let rough = RoughnessSystem::new(&train)?;
    let zero = vec![0.0; train.p()];

    let mn = ridge.min_norm()?;
    println!("min-norm LS test MSE: {:.4}", mse(mn.predict(&test_x)?.as_slice(), &test_y)?);
    println!("\n{:>10} {:>10} {:>10}", "lambda", "ridge", "roughness");
    for k in -6..=3 {
        let lambda = 10f64.powi(k);
        let r = ridge.solve(&zero, lambda)?;
        let s = rough.solve(lambda)?;
        println!(
            "{:>10.0e} {:>10.4} {:>10.4}",
            lambda,
            mse(r.predict(&test_x)?.as_slice(), &test_y)?,
            mse(s.predict(&test_x)?.as_slice(), &test_y)?
        );
    }
    Ok(())
}
