use super::{GradMode, Scalar, Tape, Tensor, Var};
use crate::error::{Error, Result};

fn evaluate<T, F>(build: &F, input: Tensor<T>) -> Result<(Tape<T>, Var, Var)>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.leaf(input);
    let loss = build(&mut tape, x)?;
    if tape.value(loss).len() != 1 {
        return Err(Error::Shape("grad_check graph must produce a scalar".into()));
    }
    Ok((tape, x, loss))
}

/// Compares the tape gradient of a scalar graph with central differences.
///
/// Returns `max |analytic − numeric| / max(1, |analytic|)` over all input
/// coordinates. Differences and errors are accumulated in `f64` whatever the
/// element type of the forward pass.
pub fn grad_check<T, F>(build: F, input: &Tensor<T>, step: f64) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let all: Vec<usize> = (0..input.len()).collect();
    grad_check_at(build, input, step, &all)
}

/// [`grad_check`] restricted to the given flat input coordinates.
pub fn grad_check_at<T, F>(build: F, input: &Tensor<T>, step: f64, coords: &[usize]) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let (mut tape, x, loss) = evaluate(&build, input.clone().with_grad())?;
    tape.backward(loss, GradMode::Reset)?;
    let analytic = tape.grad(x).map(<[T]>::to_vec);

    let mut worst = 0.0f64;
    for &i in coords {
        if i >= input.len() {
            return Err(Error::Shape(format!("coordinate {i} outside input of {}", input.len())));
        }
        let a = analytic
            .as_ref()
            .map_or(0.0, |g| g[i].to_f64().expect("real"));
        let probe = |delta: f64| -> Result<f64> {
            let mut shifted = input.clone();
            let v = shifted.data()[i].to_f64().expect("real") + delta;
            shifted.data_mut()[i] = T::from_f64_lossy(v);
            let (tape, _, loss) = evaluate(&build, shifted)?;
            Ok(tape.value(loss).item()?.to_f64().expect("real"))
        };
        let numeric = (probe(step)? - probe(-step)?) / (2.0 * step);
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn linear_function_is_exact() {
        let x = Tensor::vector(vec![0.3, -1.2, 2.0]).unwrap();
        let err = grad_check(
            |t, x| {
                let s = t.scale(x, 3.0)?;
                t.sum(s)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn dense_layer_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = random(&[5, 6], &mut rng);
        let b = random(&[5], &mut rng);
        let x = random(&[6], &mut rng);
        let err = grad_check(
            |t, x| {
                let (wi, bi) = (t.leaf(w.clone()), t.leaf(b.clone()));
                let y = t.dense(x, wi, bi)?;
                let zero = t.leaf(Tensor::zeros(&[5])?);
                t.distance(y, zero)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn relu_away_from_kink() {
        let x = Tensor::vector(vec![0.5, -0.7, 1.3, -0.01, 0.02]).unwrap();
        let err = grad_check(
            |t, x| {
                let r = t.relu(x)?;
                let s = t.scale(r, 2.5)?;
                t.sum(s)
            },
            &x,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn subset_rejects_out_of_range() {
        let x = Tensor::vector(vec![1.0, 2.0]).unwrap();
        assert!(grad_check_at(|t, x| t.sum(x), &x, 1e-4, &[2]).is_err());
        assert!(grad_check_at(|t, x| t.sum(x), &x, 1e-4, &[1]).unwrap() < 1e-9);
    }
}
