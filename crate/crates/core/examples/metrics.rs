//! PSNR, SSIM and mean exposure on a reference and a few distortions.

use attrdiff::metrics::{mean_exposure, psnr, ssim, MetricReport};
use attrdiff::{ImageTensor, Range};

fn main() -> attrdiff::Result<()> {
    let reference = ImageTensor::from_fn(64, 64, 3, Range::Unit, |y, x, c| {
        0.5 + 0.35 * ((x as f64 * 0.2).sin() * (y as f64 * 0.15 + c as f64).cos())
    });
    let cases = [
        ("identical", reference.clone()),
        ("darker", reference.scale(0.3)),
        ("offset", reference.map(|v| (v + 0.05).min(1.0))),
        (
            "striped",
            reference.with_data(
                reference
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if (i / 192) % 2 == 0 { *v } else { 1.0 - v })
                    .collect(),
            ),
        ),
    ];
    println!(
        "{:<10} {:>9} {:>8} {:>9}",
        "case", "psnr", "ssim", "exposure"
    );
    for (name, img) in &cases {
        let r = MetricReport::compute(name, img, &reference)?;
        let p = r.psnr.map_or("inf".to_string(), |v| format!("{v:.2}"));
        let s = r.ssim.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{:<10} {p:>9} {s:>8} {:>9.4}", r.id, r.mean_exposure);
    }
    let dark = reference.scale(0.3);
    println!(
        "direct calls: psnr {:.3}, ssim {:.4}, exposure {:.4}",
        psnr(&dark, &reference)?,
        ssim(&dark, &reference)?,
        mean_exposure(&dark)
    );
    Ok(())
}
