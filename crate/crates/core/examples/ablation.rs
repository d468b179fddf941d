//! Ablation grid on a synthetic dark scene: each attribute on its own,
//! the dynamic scale and step count switched off, and a sweep over the
//! number of noising steps. Each row is averaged over a few seeds.

use attrdiff::attributes::{exposure_map, AttributeTargets, Toggles};
use attrdiff::metrics::mean_exposure;
use attrdiff::pipeline::RunConfig;
use attrdiff::retinex::ClassicalDecomposer;
use attrdiff::sampler::{enhance, GuidanceConfig};
use attrdiff::{ImageTensor, Range};
use rayon::prelude::*;

const SEEDS: u64 = 8;

fn scene() -> ImageTensor {
    ImageTensor::from_fn(32, 32, 3, Range::Unit, |y, x, c| {
        let base = 0.06 + 0.05 * (0.3 * x as f64).sin().abs() + 0.03 * ((y / 4) % 2) as f64;
        (base * [1.0, 0.85, 0.7][c]).clamp(0.0, 1.0)
    })
}

fn main() -> attrdiff::Result<()> {
    let y0 = scene();
    let cfg = RunConfig::default();
    let denoiser = cfg.build_denoiser(3)?;
    let dec = ClassicalDecomposer::default();
    let base = GuidanceConfig::default();
    let a = base.attributes;
    println!(
        "input exposure {:.3}, target mean {:.3}",
        mean_exposure(&y0),
        exposure_map(&y0, a.exposure_amplitude, a.exposure_base)?.mean()
    );

    let with_toggles = |t: Toggles| {
        let mut g = base;
        g.attributes.toggles = t;
        g
    };
    let mut rows: Vec<(String, GuidanceConfig)> = vec![
        ("no guidance".into(), with_toggles(Toggles::none())),
        (
            "exposure only".into(),
            with_toggles(Toggles::exposure_only()),
        ),
        (
            "structure only".into(),
            with_toggles(Toggles {
                exposure: false,
                structure: true,
                color: false,
            }),
        ),
        (
            "color only".into(),
            with_toggles(Toggles {
                exposure: false,
                structure: false,
                color: true,
            }),
        ),
        ("all".into(), base),
        (
            "static scale".into(),
            GuidanceConfig {
                static_scale: true,
                ..base
            },
        ),
        (
            "static steps".into(),
            GuidanceConfig {
                static_steps: true,
                ..base
            },
        ),
        (
            "static both".into(),
            GuidanceConfig {
                static_scale: true,
                static_steps: true,
                ..base
            },
        ),
    ];
    for omega in [2, 5, 20] {
        rows.push((format!("omega {omega}"), GuidanceConfig { omega, ..base }));
    }

    // Score every row with the full weighted loss so rows are comparable.
    let scorer = AttributeTargets::new(&y0, a, &dec)?;
    println!(
        "{:<15} {:>9} {:>9} {:>7}",
        "setting", "exposure", "loss", "grads"
    );
    for (name, g) in rows {
        let runs: Vec<(f64, f64, usize)> = (0..SEEDS)
            .into_par_iter()
            .map(|seed| {
                let g = GuidanceConfig { seed, ..g };
                let (out, trace) = enhance(&y0, denoiser.as_ref(), &dec, &g).unwrap();
                let loss = scorer.evaluate(&out).unwrap().total;
                (mean_exposure(&out), loss, trace.total_grad_steps())
            })
            .collect();
        let n = runs.len() as f64;
        let (e, l, s) = runs.iter().fold((0.0, 0.0, 0), |acc, r| {
            (acc.0 + r.0, acc.1 + r.1, acc.2 + r.2)
        });
        println!(
            "{name:<15} {:>9.4} {:>9.3} {:>7.1}",
            e / n,
            l / n,
            s as f64 / n
        );
    }
    Ok(())
}
