use crate::error::Result;
use crate::image::ImageTensor;
use crate::retinex::Decomposer;

/// Mean squared difference between the reflectances of `x0hat` and `y0`.
pub fn color_loss(
    x0hat: &ImageTensor,
    y0: &ImageTensor,
    decomposer: &dyn Decomposer,
) -> Result<f64> {
    x0hat.check_same_shape(y0)?;
    let target = decomposer.decompose(y0)?.reflectance;
    Ok(color_loss_and_grad(x0hat, &target, decomposer)?.0)
}

/// Loss against a precomputed target reflectance, plus `∂loss/∂x0hat`.
pub fn color_loss_and_grad(
    x0hat: &ImageTensor,
    target_reflectance: &ImageTensor,
    decomposer: &dyn Decomposer,
) -> Result<(f64, ImageTensor)> {
    let r = decomposer.decompose(x0hat)?.reflectance;
    r.check_same_shape(target_reflectance)?;
    let n = r.len() as f64;
    let diff = r.sub(target_reflectance);
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
    let grad = decomposer.reflectance_vjp(x0hat, &diff.scale(2.0 / n))?;
    Ok((loss, grad))
}
