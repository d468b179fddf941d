//! Batch enhancement of a directory with paired references, followed by a
//! replay of every manifest record.
//!
//!     cargo run --release --example batch -- [workdir]
//!
//! Synthetic inputs and references are written into the work directory.

use std::path::PathBuf;

use attrdiff::pipeline::{read_manifest, replay, run_batch, save_image, RunConfig};
use attrdiff::{ImageTensor, Range};

fn frame(i: usize, gain: f64) -> ImageTensor {
    ImageTensor::from_fn(40, 40, 3, Range::Unit, |y, x, c| {
        let v = 0.5 + 0.3 * ((x + 2 * i) as f64 * 0.25).sin() * ((y + i) as f64 * 0.2).cos();
        (gain * v * [1.0, 0.9, 0.8][c]).clamp(0.0, 1.0)
    })
}

fn main() -> attrdiff::Result<()> {
    let work = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("attrdiff-batch"));
    let (low, high, out) = (work.join("low"), work.join("high"), work.join("out"));
    for i in 0..4 {
        save_image(&frame(i, 0.18), &low.join(format!("scene{i}.png")))?;
        save_image(&frame(i, 0.9), &high.join(format!("scene{i}.png")))?;
    }

    let mut cfg = RunConfig::default();
    cfg.guidance.seed = 11;
    let records = run_batch(&low, &out, &cfg, Some(&high))?;
    for r in &records {
        let m = r.metrics.as_ref().expect("references were given");
        println!(
            "{}: seed {:>20}  psnr {:>6.2}  ssim {:.3}  exposure {:.3}  {:.2}s",
            m.id,
            r.seed,
            m.psnr.unwrap_or(f64::INFINITY),
            m.ssim.unwrap_or(f64::NAN),
            r.mean_exposure,
            r.wall_seconds
        );
    }
    println!("summary: {}", out.join("summary.csv").display());

    let manifest = out.join("manifest.jsonl");
    for record in read_manifest(&manifest)? {
        let again = replay(&record)?;
        println!(
            "replay {}: {}",
            record.input.display(),
            if again.matches {
                "identical"
            } else {
                "DIFFERENT"
            }
        );
    }
    Ok(())
}
