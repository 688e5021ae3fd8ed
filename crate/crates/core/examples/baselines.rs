//! FID between synthetic embedding sets, and SSIM/PSNR between a synthetic
//! tactile-like image and progressively noisier copies.
//!
//! Pass two PNG paths to compare your own images instead:
//! `cargo run --release --example baselines [a.png b.png]`.

use tactile_evalkit::baseline::fid::{fid, fit_gaussian};
use tactile_evalkit::baseline::image::{load_png, psnr, ssim, ImageGray};
use tactile_evalkit::rng::{standard_normal, stream};
use tactile_evalkit::synth::{generate_scenario, Scenario, ScenarioSpec};

/// Concentric rings, roughly what a round indenter leaves on a gel sensor.
fn rings(w: u32, h: u32) -> ImageGray {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let pixels = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            (127.5 + 100.0 * (r / 4.0).cos() * (-r / 40.0).exp()) as u8
        })
        .collect();
    ImageGray::new(w, h, pixels).unwrap()
}

fn noisy(img: &ImageGray, sd: f64, seed: u64) -> ImageGray {
    let mut rng = stream(seed, 0);
    let pixels = img
        .pixels()
        .iter()
        .map(|&p| (p as f64 + sd * standard_normal(&mut rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageGray::new(img.width(), img.height(), pixels).unwrap()
}

fn main() -> tactile_evalkit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [a, b] = args.as_slice() {
        let (a, b) = (load_png(a)?, load_png(b)?);
        println!("ssim = {:.6}  psnr = {:.3} dB", ssim(&a, &b)?, psnr(&a, &b)?);
        return Ok(());
    }

    let clean = generate_scenario(&ScenarioSpec::new(Scenario::Clean, 0))?;
    let collapse = generate_scenario(&ScenarioSpec::new(Scenario::Collapse, 0))?;
    let other = generate_scenario(&ScenarioSpec::new(Scenario::Clean, 1))?;
    let base = fit_gaussian(&clean.embeddings)?;
    println!(
        "fid(clean, clean seed 1) = {:.4}",
        fid(&base, &fit_gaussian(&other.embeddings)?)?
    );
    println!(
        "fid(clean, collapse)     = {:.4}",
        fid(&base, &fit_gaussian(&collapse.embeddings)?)?
    );

    let img = rings(96, 96);
    println!("\n{:>8}  {:>8}  {:>10}", "noise sd", "ssim", "psnr (dB)");
    for (i, sd) in [0.0, 2.0, 5.0, 10.0, 20.0, 40.0].into_iter().enumerate() {
        let y = noisy(&img, sd, i as u64);
        println!("{sd:>8.1}  {:>8.4}  {:>10.2}", ssim(&img, &y)?, psnr(&img, &y)?);
    }
    Ok(())
}
