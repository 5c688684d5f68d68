use std::io::Write;

use aatr::dataio::{load_dataset, DatasetSpec, ResponseSource, ResponseTransform};
use aatr::fitter::{fit_dataset, FitConfig};
use aatr::grid::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// Hourly temperature-like curves written as a long CSV, one day per unit,
// plus a response file with two noisy readings of the afternoon average
// per day. The readings are averaged back into one response per unit.

fn main() -> aatr::Result<()> {
    let dir = std::env::temp_dir().join("aatr-long-csv-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let curves = dir.join("curves.csv");
    let responses = dir.join("responses.csv");

    let mut rng = ChaCha8Rng::seed_from_u64(12345);
    let mut c = std::io::BufWriter::new(std::fs::File::create(&curves).expect("curves file"));
    let mut r = std::io::BufWriter::new(std::fs::File::create(&responses).expect("responses file"));
    writeln!(c, "unit,time,value").unwrap();
    writeln!(r, "unit,response").unwrap();
    for day in 0..120 {
        let unit = format!("day-{day:03}");
        let coef: Vec<f64> = (0..7).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut afternoon = 0.0;
        for hour in 0..24 {
            let w = hour as f64 * std::f64::consts::PI / 12.0;
            let v = 15.0
                + 3.0 * coef[0]
                + (1..=3)
                    .map(|k| coef[2 * k - 1] * (k as f64 * w).cos() + coef[2 * k] * (k as f64 * w).sin())
                    .sum::<f64>()
                    * 2.0;
            writeln!(c, "{unit},{hour:02}:00,{v}").unwrap();
            if (12..18).contains(&hour) {
                afternoon += v / 6.0;
            }
        }
        for _ in 0..2 {
            let noise: f64 = rng.sample(StandardNormal);
            writeln!(r, "{unit},{}", afternoon + 0.3 * noise).unwrap();
        }
    }
    drop((c, r));

    let mut spec = DatasetSpec::new(&curves, ResponseSource::File(responses), GridSpec { p: 96, a: -1.0, b: 1.0 });
    spec.response_transform = ResponseTransform::Mean;
    let loaded = load_dataset(&spec)?;
    println!("{} units loaded, {} excluded", loaded.units.len(), loaded.excluded.len());

    let res = fit_dataset(&loaded.dataset, &FitConfig::default())?;
    println!("q* = {}, lambda* = {:.3e}", res.q_star, res.lambda_star);
    let hours = |t: f64| (t + 1.0) * 12.0;
    for r in &res.gamma_star.rects {
        println!(
            "  rectangle over {:.1}h..{:.1}h, height {:+.3}",
            hours(r.center - r.width / 2.0),
            hours(r.center + r.width / 2.0),
            r.height
        );
    }
    let best: Vec<String> = res
        .cv_table
        .iter()
        .map(|row| format!("{:.4}", row.iter().cloned().fold(f64::INFINITY, f64::min)))
        .collect();
    println!("best cross-validated MSE for q = 1, 2, 3: {}", best.join(", "));
    Ok(())
}
