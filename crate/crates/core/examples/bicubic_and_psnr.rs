//! Downscales a synthetic frame, upscales it back with bicubic resampling
//! and scores the result with PSNR.
//!
//!     cargo run --release --example bicubic_and_psnr [-- OUT_DIR]

use std::path::PathBuf;

use elsr::imaging::{bicubic_downscale, bicubic_upscale, psnr, write_png};
use elsr::pipeline::toy_frame;

fn main() -> elsr::Result<()> {
    let hr = toy_frame(3, 0, 256, 192);
    for scale in [2, 4] {
        let lr = bicubic_downscale(&hr, scale)?;
        let up = bicubic_upscale(&lr, scale)?;
        println!(
            "x{scale}: {}x{} -> {}x{} -> {}x{}  PSNR {:.2} dB",
            hr.width(),
            hr.height(),
            lr.width(),
            lr.height(),
            up.width(),
            up.height(),
            psnr(&up, &hr)?
        );
        if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
            write_png(&lr, &dir.join(format!("lr_x{scale}.png")))?;
            write_png(&up, &dir.join(format!("bicubic_x{scale}.png")))?;
        }
    }
    println!("identical images: PSNR {} dB", psnr(&hr, &hr)?);
    Ok(())
}
