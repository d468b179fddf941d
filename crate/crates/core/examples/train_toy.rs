//! Train the small convolutional denoiser on a handful of synthetic
//! images, save it, reload it through the generic loader and draw one
//! unguided sample.
//!
//!     cargo run --release --example train_toy -- [steps] [checkpoint path]

use attrdiff::denoiser::{load_external, train_toy_model, ToyArchitecture, TrainingConfig};
use attrdiff::diffusion::{make_schedule, BetaSpec};
use attrdiff::sampler::sample_unguided;
use attrdiff::{ImageTensor, Range};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn stripes(phase: f64) -> ImageTensor {
    ImageTensor::from_fn(12, 12, 3, Range::Unit, |y, x, c| {
        0.45 + 0.3 * (0.7 * x as f64 + 0.2 * y as f64 + phase + 0.5 * c as f64).sin()
    })
}

fn main() -> attrdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(1500);
    let path = args
        .next()
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("attrdiff-toy.ckpt"));

    let schedule = make_schedule(1000, BetaSpec::default())?;
    let data: Vec<ImageTensor> = (0..4).map(|i| stripes(i as f64 * 0.8)).collect();
    let cfg = TrainingConfig {
        steps,
        eval_every: (steps / 5).max(1),
        architecture: ToyArchitecture {
            hidden: 8,
            time_features: 8,
        },
        ..Default::default()
    };
    let (model, report) = train_toy_model(&data, &schedule, &cfg)?;
    println!("probe eps-loss: {:?}", report.eval_losses);
    println!(
        "final {:.4}, params {}",
        report.final_loss, report.param_checksum
    );

    model.save(&path)?;
    let reloaded = load_external(&path, &schedule, Some((12, 12, 3)))?;
    println!("saved to {}", path.display());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sample = sample_unguided(reloaded.as_ref(), (12, 12, 3), &mut rng)?;
    let unit = sample.to_unit().clamped();
    println!(
        "sample mean {:.3} (data mean {:.3})",
        unit.mean(),
        data[0].mean()
    );
    Ok(())
}
