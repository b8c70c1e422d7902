//! Tiles a x2 model into a x4 one and shows that the x4 output equals the
//! x2 output upsampled by pixel repetition.
//!
//!     cargo run --release --example adapt_x2_to_x4

use elsr::model::adapt_weights_x2_to_x4;
use elsr::tensor::nearest_upsample;
use elsr::{ElsrModel, ModelConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> elsr::Result<()> {
    let x2 = ElsrModel::new(ModelConfig::new(2, 6), 42)?;
    let x4_config = ModelConfig::new(4, 6);
    let archive = adapt_weights_x2_to_x4(&x2.to_archive(), &x4_config)?;
    let x4 = ElsrModel::from_archive(&archive, x4_config)?;
    println!("x2 params {}, x4 params {}", x2.count_params(), x4.count_params());

    for c in [0, 5, 17, 47] {
        println!(
            "x4 tail channel {c:>2} copies x2 tail channel {}",
            elsr::model::x4_source_channel(c)
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lr = Tensor::from_fn([1, 3, 24, 32], |_, _, _, _| rng.gen_range(0.0..1.0));
    let small = x2.forward(&lr)?;
    let big = x4.forward(&lr)?;
    let diff = big.max_abs_diff(&nearest_upsample(&small, 2));
    println!("x2 output {:?}, x4 output {:?}", small.shape(), big.shape());
    println!("max |x4 - nearest(x2)| = {diff:.2e}");
    Ok(())
}
