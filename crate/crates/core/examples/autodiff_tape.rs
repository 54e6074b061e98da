//! The reverse-mode tape on its own: a tiny convolutional network, its
//! gradients, and a finite-difference check of them.
//!
//! ```text
//! cargo run --example autodiff_tape
//! ```

use sigscat::tensor::{grad_check, GradMode, Tape, Tensor};

fn main() -> sigscat::Result<()> {
    let image = Tensor::from_fn(&[1, 6, 6], |i| ((i * 7) % 11) as f64 / 10.0)?;
    let kernel = Tensor::from_fn(&[2, 1, 3, 3], |i| ((i * 5) % 9) as f64 / 10.0 - 0.3)?;

    let net = |tape: &mut Tape<f64>, k| {
        let x = tape.leaf(image.clone());
        let b = tape.leaf(Tensor::zeros(&[2])?);
        let y = tape.conv2d(x, k, b, 1, 1)?;
        let y = tape.relu(y)?;
        let y = tape.maxpool2d(y, 2, 2, false)?;
        let y = tape.flatten(y)?;
        let y = tape.l2_normalize(y, 1e-12)?;
        let target = tape.leaf(Tensor::full(&[18], 0.2)?);
        tape.distance(y, target)
    };

    let mut tape = Tape::new();
    let k = tape.leaf(kernel.clone().with_grad());
    let loss = net(&mut tape, k)?;
    tape.backward(loss, GradMode::Reset)?;
    println!("loss {:.6} over {} recorded nodes", tape.value(loss).item()?, tape.len());
    println!("∂loss/∂kernel[0] = {:?}", &tape.grad(k).unwrap_or(&[])[..9]);

    let err = grad_check(net, &kernel, 1e-6)?;
    println!("worst finite-difference disagreement {err:.2e}");
    Ok(())
}
