//! The three attribute losses on a dark frame and a well-exposed frame of
//! the same scene, plus the phase-only reconstruction that motivates the
//! structure term.

use attrdiff::attributes::{
    color_loss, exposure_loss, exposure_map, luminance, phase_loss, total_loss_and_grad, Lambdas,
    PhaseMode, PhaseSpectrum, Toggles,
};
use attrdiff::metrics::mean_exposure;
use attrdiff::retinex::ClassicalDecomposer;
use attrdiff::{ImageTensor, Range};

fn scene(gain: f64) -> ImageTensor {
    ImageTensor::from_fn(48, 48, 3, Range::Unit, |y, x, c| {
        let blob = (-((x as f64 - 30.0).powi(2) + (y as f64 - 18.0).powi(2)) / 120.0).exp();
        let texture = 0.15 * ((x / 6 + y / 6) % 2) as f64;
        (gain * (0.35 + 0.5 * blob + texture) * [1.0, 0.85, 0.7][c]).clamp(0.0, 1.0)
    })
}

fn main() -> attrdiff::Result<()> {
    let dark = scene(0.2);
    let bright = scene(1.0);
    println!(
        "mean exposure: dark {:.3}, bright {:.3}",
        mean_exposure(&dark),
        mean_exposure(&bright)
    );

    let e = exposure_map(&dark, 0.25, 0.46)?;
    let lum = luminance(&dark)?;
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for v in e.values().data() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    println!(
        "exposure target: mean {:.3}, range [{lo:.3}, {hi:.3}]",
        e.mean()
    );
    println!("  darkest input pixel gets the brightest target: {}", {
        let d = lum.data();
        let i = (0..d.len()).min_by(|a, b| d[*a].total_cmp(&d[*b])).unwrap();
        format!("lum {:.3} -> E {:.3}", d[i], e.values().data()[i])
    });

    let dec = ClassicalDecomposer::default();
    println!("losses against targets derived from the dark frame:");
    println!("  exposure {:.5}", exposure_loss(&dark, &e, 16)?);
    println!("  exposure (bright) {:.5}", exposure_loss(&bright, &e, 16)?);
    println!(
        "  phase    {:.2e}",
        phase_loss(&bright, &dark, PhaseMode::Phasor)?
    );
    println!("  color    {:.5}", color_loss(&bright, &dark, &dec)?);
    println!(
        "  phase (unrelated) {:.4}",
        phase_loss(&scene(1.0).map(|v| 1.0 - v * v), &dark, PhaseMode::Phasor)?
    );

    // Phase-only images keep edges and layout and drop brightness, so the
    // dark and bright frames give essentially the same picture.
    let po_dark = PhaseSpectrum::of(&dark).reconstruct();
    let po_bright = PhaseSpectrum::of(&bright).reconstruct();
    let po_other = PhaseSpectrum::of(&bright.map(|v| 1.0 - v * v)).reconstruct();
    println!(
        "phase-only correlation: dark vs bright {:.3}, dark vs unrelated {:.3}",
        correlation(po_dark.data(), po_bright.data()),
        correlation(po_dark.data(), po_other.data())
    );

    let report = total_loss_and_grad(&dark, &dark, &e, Lambdas::default(), Toggles::all(), &dec)?;
    println!(
        "weighted total {:.4} (l1 {:.4}, l2 {:.2e}, l3 {:.2e}); |grad| {:.4}",
        report.total,
        report.l1,
        report.l2,
        report.l3,
        report.grad.norm_l2()
    );
    Ok(())
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
