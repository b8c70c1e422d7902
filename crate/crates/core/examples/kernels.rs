//! Forward kernels on a tiny tensor: 3x3 conv, PReLU and pixel shuffle.
//!
//!     cargo run --example kernels

use elsr::tensor::{conv2d_3x3, pixel_shuffle, pixel_unshuffle, prelu};
use elsr::{ConvParams, Tensor};

fn main() -> elsr::Result<()> {
    // One 4x4 channel holding 0..16.
    let x = Tensor::from_fn([1, 1, 4, 4], |_, _, y, x| (y * 4 + x) as f32);

    // A box filter: with zero padding, corners see 4 taps and the centre 9.
    let params = ConvParams::new(Tensor::full([1, 1, 3, 3], 1.0), vec![0.0])?;
    let summed = conv2d_3x3(&x, &params)?;
    println!("3x3 box sum (zero padded):");
    print_plane(&summed, 0);

    let shifted = x.map(|v| v - 8.0);
    let act = prelu(&shifted, &[0.25])?;
    println!("prelu(x - 8) with slope 0.25:");
    print_plane(&act, 0);

    // Depth-to-space: 4 channels of 2x2 become one 4x4 channel.
    let deep = Tensor::from_fn([1, 4, 2, 2], |_, c, y, x| (c * 100 + y * 10 + x) as f32);
    let wide = pixel_shuffle(&deep, 2)?;
    println!("pixel_shuffle(r=2) of channel*100 + y*10 + x:");
    print_plane(&wide, 0);
    assert_eq!(pixel_unshuffle(&wide, 2)?, deep);
    println!("pixel_unshuffle restores the input exactly");
    Ok(())
}

fn print_plane(t: &Tensor, c: usize) {
    for y in 0..t.height() {
        let row: Vec<String> = (0..t.width()).map(|x| format!("{:7.2}", t.at(0, c, y, x))).collect();
        println!("  {}", row.join(" "));
    }
}
