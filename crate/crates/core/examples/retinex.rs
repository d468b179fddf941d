//! Retinex decomposition: the classical blurred max-channel estimator,
//! and a small network decomposer fitted to it, saved and reloaded.

use attrdiff::retinex::{
    classical_decompose, load_decomposer_network, reconstruction_error, train_decomposer_network,
    NetworkTrainingConfig,
};
use attrdiff::{ImageTensor, Range};

fn scene(gain: f64, shift: usize) -> ImageTensor {
    ImageTensor::from_fn(24, 24, 3, Range::Unit, |y, x, c| {
        let shade = 0.3 + 0.7 * ((x + shift) as f64 / 24.0);
        let albedo = if (x / 4 + y / 4) % 2 == 0 { 0.9 } else { 0.4 };
        (gain * shade * albedo * [1.0, 0.8, 0.6][c]).clamp(0.0, 1.0)
    })
}

fn main() -> attrdiff::Result<()> {
    let dark = scene(0.15, 0);
    let bright = scene(0.9, 0);
    for (name, img) in [("dark", &dark), ("bright", &bright)] {
        let d = classical_decompose(img, 3.0, 1e-3)?;
        println!(
            "{name:>6}: mean L {:.3}, mean R {:.3}, reconstruction error {:.1e}",
            d.illumination.mean(),
            d.reflectance.mean(),
            reconstruction_error(img, &d, 1e-3)
        );
    }

    let train: Vec<ImageTensor> = (0..4).map(|i| scene(0.2 + 0.2 * i as f64, 3 * i)).collect();
    let (net, probe_err) = train_decomposer_network(&train, &NetworkTrainingConfig::default())?;
    println!("network decomposer probe reconstruction error {probe_err:.2e}");

    let path = std::env::temp_dir().join("attrdiff-retinex.net");
    net.save(&path, (probe_err * 2.0).max(1e-6))?;
    let loaded = load_decomposer_network(&path)?;
    let d = loaded.decompose(&dark)?;
    println!(
        "{} reloaded from {}: mean L {:.3}, tolerance {:.1e}",
        loaded.name(),
        path.display(),
        d.illumination.mean(),
        loaded.reconstruction_tolerance()
    );
    Ok(())
}
