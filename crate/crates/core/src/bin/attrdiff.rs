use std::path::PathBuf;
use std::process::ExitCode;

use attrdiff::attributes::PhaseMode;
use attrdiff::pipeline::{
    read_manifest, replay, run_batch, ConfigOverrides, DecomposerKind, RunConfig,
};
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, ValueEnum)]
enum Phase {
    Phasor,
    Raw,
}

#[derive(Clone, Copy, ValueEnum)]
enum Decomp {
    Classical,
    Network,
}

/// Enhance a directory of low-light images with attribute-guided diffusion.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Directory of PNG/JPEG inputs.
    #[arg(long, required_unless_present = "replay")]
    input: Option<PathBuf>,
    /// Output directory for PNGs, manifest and summary.
    #[arg(long, required_unless_present = "replay")]
    output: Option<PathBuf>,
    /// Directory of references paired by file stem.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// TOML config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay every record of a manifest and report checksum matches.
    #[arg(long, conflicts_with_all = ["input", "output"])]
    replay: Option<PathBuf>,

    /// Noising depth and number of guided steps [default: 10].
    #[arg(long)]
    omega: Option<usize>,
    /// Base guidance scale [default: 1.8].
    #[arg(long)]
    scale: Option<f64>,
    /// Base gradient step count [default: 3].
    #[arg(long)]
    grad_steps: Option<usize>,
    /// Upper bound on the per-step gradient repeat count.
    #[arg(long)]
    max_grad_steps: Option<usize>,
    /// Exposure weight [default: 1000].
    #[arg(long)]
    lambda1: Option<f64>,
    /// Structure (phase) weight [default: 10].
    #[arg(long)]
    lambda2: Option<f64>,
    /// Color (reflectance) weight [default: 0.03].
    #[arg(long)]
    lambda3: Option<f64>,
    /// Target exposure level B [default: 0.46].
    #[arg(long)]
    exposure_base: Option<f64>,
    /// Target exposure spread A [default: 0.25].
    #[arg(long)]
    exposure_amp: Option<f64>,
    /// Patch size for the exposure loss [default: 16].
    #[arg(long)]
    pool_size: Option<usize>,
    /// Phase comparison: unit phasors or raw angles [default: phasor].
    #[arg(long, value_enum)]
    phase_mode: Option<Phase>,
    /// Retinex decomposer for the color term [default: classical].
    #[arg(long, value_enum)]
    decomposer: Option<Decomp>,
    /// Weights for the network decomposer.
    #[arg(long)]
    decomposer_model: Option<PathBuf>,
    /// Toy checkpoint or external denoiser manifest.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Disable the exposure term.
    #[arg(long)]
    no_exposure: bool,
    /// Disable the structure term.
    #[arg(long)]
    no_structure: bool,
    /// Disable the color term.
    #[arg(long)]
    no_color: bool,
    /// Constant guidance scale instead of the dynamic one.
    #[arg(long)]
    static_scale: bool,
    /// Constant gradient step count instead of the dynamic one.
    #[arg(long)]
    static_steps: bool,
    /// Base seed; each image derives its own from its file name [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Manifest path (default: OUTPUT/manifest.jsonl).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl Args {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            omega: self.omega,
            scale: self.scale,
            grad_steps: self.grad_steps,
            max_grad_steps: self.max_grad_steps,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            exposure_base: self.exposure_base,
            exposure_amp: self.exposure_amp,
            pool_size: self.pool_size,
            phase_mode: self.phase_mode.map(|p| match p {
                Phase::Phasor => PhaseMode::Phasor,
                Phase::Raw => PhaseMode::Raw,
            }),
            decomposer: self.decomposer.map(|d| match d {
                Decomp::Classical => DecomposerKind::Classical,
                Decomp::Network => DecomposerKind::Network,
            }),
            decomposer_model: self.decomposer_model.clone(),
            model: self.model.clone(),
            no_exposure: self.no_exposure,
            no_structure: self.no_structure,
            no_color: self.no_color,
            static_scale: self.static_scale,
            static_steps: self.static_steps,
            seed: self.seed,
            manifest: self.manifest.clone(),
        }
    }
}

fn run(args: Args) -> attrdiff::Result<bool> {
    if let Some(path) = &args.replay {
        let mut ok = true;
        for record in read_manifest(path)? {
            let r = replay(&record)?;
            println!(
                "{} {}",
                if r.matches { "match" } else { "MISMATCH" },
                record.input.display()
            );
            ok &= r.matches;
        }
        return Ok(ok);
    }
    let mut config = match &args.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    args.overrides().apply(&mut config);
    let (input, output) = (args.input.as_ref().unwrap(), args.output.as_ref().unwrap());
    let records = run_batch(input, output, &config, args.reference.as_deref())?;
    for r in &records {
        let m = r.metrics.as_ref();
        println!(
            "{} -> {}  exposure {:.4}{}",
            r.input.display(),
            r.output.display(),
            r.mean_exposure,
            m.map(|m| format!(
                "  psnr {}  ssim {}",
                m.psnr.map_or("inf".into(), |p| format!("{p:.2}")),
                m.ssim.map_or("n/a".into(), |s| format!("{s:.4}"))
            ))
            .unwrap_or_default()
        );
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
