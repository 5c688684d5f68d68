use aatr::optimizer::TemplateObjective;
use aatr::simgen::{simulate, true_template, BetaShape, SimScenario};

// For fixed rectangle positions the best heights have a closed form.
// Compare them with nearby heights and show how the objective reacts.

fn main() -> aatr::Result<()> {
    let sim = simulate(&SimScenario {
        beta_shape: BetaShape::Rect3,
        seed: 5,
        ..Default::default()
    })?;
    let ds = sim.dataset.standardize()?;
    let truth = true_template(BetaShape::Rect3).expect("rectangle shape");
    let (centers, widths) = (truth.centers(), truth.widths());

    let obj = TemplateObjective::init(&ds);
    let (best, heights) = obj.evaluate(&centers, &widths)?;
    println!("closed-form heights: {:.4?}", heights.as_slice());
    println!("objective at the closed form: {best:.6}");
    for j in 0..heights.len() {
        for step in [-0.1, 0.1] {
            let mut h = heights.clone();
            h[j] += step;
            let v = obj.value_at(&centers, &widths, &h)?;
            println!("  height {j} {step:+}: objective {v:.6} (+{:.2e})", v - best);
        }
    }
    Ok(())
}
