//! Compares tape gradients of a small model against central finite
//! differences, one tensor at a time.
//!
//!     cargo run --release --example gradient_check

use elsr::autograd::{mse_loss, GradTape};
use elsr::{ElsrModel, ModelConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> elsr::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = ElsrModel::new(ModelConfig::new(2, 4), 1)?;
    let input = Tensor::from_fn([1, 3, 6, 6], |_, _, _, _| rng.gen_range(0.0..1.0));
    let target = Tensor::from_fn([1, 3, 12, 12], |_, _, _, _| rng.gen_range(0.0..1.0));

    let mut tape = GradTape::new();
    let vars = model.record_params(&mut tape);
    let x = tape.constant(input.clone());
    let t = tape.constant(target.clone());
    let pred = model.forward_tape(&mut tape, &vars, x)?;
    let loss = tape.mse_loss(pred, t)?;
    println!("loss = {:.6}", tape.scalar(loss));
    let grads = model.collect_grads(&tape.backward(loss, 1.0)?, &vars)?;

    let h = 1e-2f32;
    let names = model.param_names();
    for (p, name) in names.iter().enumerate() {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..grads[p].len() {
            let orig = model.params_mut()[p][i];
            model.params_mut()[p][i] = orig + h;
            let up = mse_loss(&model.forward(&input)?, &target)? as f64;
            model.params_mut()[p][i] = orig - h;
            let down = mse_loss(&model.forward(&input)?, &target)? as f64;
            model.params_mut()[p][i] = orig;
            let fd = (up - down) / (2.0 * h as f64);
            let g = grads[p][i] as f64;
            num += (g - fd).powi(2);
            den += g.powi(2).max(fd.powi(2));
        }
        let rel = (num / den.max(1e-30)).sqrt();
        println!("{name:<14} {:>5} values  relative L2 error {rel:.2e}", grads[p].len());
    }
    println!("(f32 central differences, h = {h})");
    Ok(())
}
