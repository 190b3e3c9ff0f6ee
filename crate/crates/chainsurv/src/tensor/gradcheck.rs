//! Central finite-difference gradient verification.

use crate::error::{Error, Result};

/// Compare an analytic gradient against central finite differences.
///
/// `value_fn` evaluates the scalar objective at a point; `grad_fn` returns
/// the analytic gradient (typically by building a tape and calling
/// `backward`). The finite-difference side only ever calls `value_fn`, so it
/// stays independent of the differentiation path under test.
///
/// Returns the max over coordinates of
/// `|analytic - central| / (|analytic| + |central| + 1e-12)`.
pub fn grad_check<V, G>(value_fn: V, grad_fn: G, point: &[f64], step: f64) -> Result<f64>
where
    V: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if step <= 0.0 {
        return Err(Error::contract("grad_check: step must be positive"));
    }
    let analytic = grad_fn(point)?;
    if analytic.len() != point.len() {
        return Err(Error::contract(format!(
            "grad_check: gradient length {} does not match point length {}",
            analytic.len(),
            point.len()
        )));
    }
    let mut max_rel = 0.0f64;
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + step;
        let up = value_fn(&probe)?;
        probe[i] = point[i] - step;
        let down = value_fn(&probe)?;
        probe[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::numeric(
                "grad_check",
                format!("non-finite objective at coordinate {i}"),
            ));
        }
        let numeric = (up - down) / (2.0 * step);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs() + 1e-12);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Tape, Tensor};

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let err = grad_check(
            |x| Ok(x[0] * x[0]),
            |x| Ok(vec![2.0 * x[0]]),
            &[3.0],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let err = grad_check(|_| Ok(7.0), |x| Ok(vec![0.0; x.len()]), &[1.0, -2.0], 1e-5).unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn detects_a_corrupted_gradient() {
        let err = grad_check(
            |x| Ok(x[0] * x[0]),
            |x| Ok(vec![2.0 * x[0] + 1.0]),
            &[3.0],
            1e-5,
        )
        .unwrap();
        assert!(err > 1e-2, "corruption went unnoticed: {err}");
    }

    #[test]
    fn three_layer_mlp_matches_finite_differences() {
        // 3-layer MLP at d=8 driven entirely through the tape
        let d = 8usize;
        let n_params = 3 * d * d;
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            // splitmix64, scaled to [-0.5, 0.5)
            rng_state = rng_state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = rng_state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            let u = ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64;
            u - 0.5
        };
        let point: Vec<f64> = (0..n_params).map(|_| next()).collect();
        let input: Vec<f64> = (0..d).map(|_| next()).collect();

        let eval = |flat: &[f64], want_grad: bool| -> Result<(f64, Option<Vec<f64>>)> {
            let mut tape = Tape::new();
            let mut ids = Vec::new();
            for layer in 0..3 {
                let w = Tensor::new(vec![d, d], flat[layer * d * d..(layer + 1) * d * d].to_vec())?
                    .with_grad();
                ids.push(tape.leaf(w));
            }
            let mut h = tape.leaf(Tensor::new(vec![1, d], input.clone())?);
            for (layer, &w) in ids.iter().enumerate() {
                h = tape.matmul(h, w)?;
                if layer + 1 < 3 {
                    h = tape.sigmoid(h)?;
                }
            }
            let target = tape.leaf(Tensor::zeros(vec![1, d]));
            let loss = tape.mse(h, target)?;
            let value = tape.value(loss).data()[0];
            if want_grad {
                tape.backward(loss)?;
                let mut g = Vec::with_capacity(n_params);
                for &id in &ids {
                    g.extend_from_slice(tape.grad(id).unwrap());
                }
                Ok((value, Some(g)))
            } else {
                Ok((value, None))
            }
        };

        let err = grad_check(
            |x| eval(x, false).map(|(v, _)| v),
            |x| eval(x, true).map(|(_, g)| g.unwrap()),
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-3, "mlp gradcheck err = {err}");
    }
}
