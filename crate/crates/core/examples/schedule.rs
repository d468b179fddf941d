//! Noise schedule basics: ᾱ at a few steps, forward noising and the
//! one-shot x̂₀ estimate that undoes it.

use attrdiff::diffusion::{
    forward_noise, gaussian_noise_like, make_schedule, predict_x0, BetaSpec,
};
use attrdiff::{ImageTensor, Range};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> attrdiff::Result<()> {
    let schedule = make_schedule(1000, BetaSpec::default())?;
    for t in [1, 10, 100, 500, 1000] {
        println!(
            "t={t:>4}  beta={:.5}  alpha_bar={:.6}  posterior_var={:.3e}",
            schedule.beta(t),
            schedule.alpha_bar(t),
            schedule.posterior_var(t)
        );
    }

    let x0 = ImageTensor::from_fn(16, 16, 3, Range::Signed, |y, x, c| {
        0.8 * ((x as f64 * 0.4 + c as f64).sin() * (y as f64 * 0.3).cos())
    });
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let eps = gaussian_noise_like(&x0, &mut rng);
    for t in [10, 250, 999] {
        let xt = forward_noise(&x0, t, &schedule, &eps)?;
        let back = predict_x0(&xt, &eps, t, &schedule)?;
        println!(
            "t={t:>4}  |x_t|={:.3}  round-trip error={:.2e}",
            xt.norm_l2(),
            back.sub(&x0).max_abs()
        );
    }
    Ok(())
}
