use crate::error::{Error, Result};
use crate::imaging::buffer::ImageBuffer;

/// Mean squared error over every RGB sample, in f64.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    if a.width() != b.width() {
        return Err(Error::ShapeMismatch {
            op: "psnr",
            dim: "width",
            expected: a.width(),
            got: b.width(),
        });
    }
    if a.height() != b.height() {
        return Err(Error::ShapeMismatch {
            op: "psnr",
            dim: "height",
            expected: a.height(),
            got: b.height(),
        });
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len().max(1) as f64)
}

/// PSNR in dB for 8-bit RGB, `10·log10(255² / MSE)`.
/// Identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

/// Renders a PSNR value, `inf` for identical images.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}
