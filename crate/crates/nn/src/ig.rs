//! Integrated gradients at the output of a model's input stage.

use gazeperc_core::TokenSequence;

use crate::error::{shape_err, NnError, Result};
use crate::graph::Graph;
use crate::model::{Batch, Model, ParamVars};
use crate::tensor::Tensor;

/// Path integral of gradients from `baseline` to `input` (midpoint rule),
/// times `input - baseline`. `grad_at` returns the gradient at a point.
pub fn integrate_path<F>(input: &[f64], baseline: &[f64], steps: usize, mut grad_at: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if steps < 2 {
        return Err(NnError::InvalidArgument(format!("integrated gradients needs at least 2 steps, got {steps}")));
    }
    if input.len() != baseline.len() {
        return Err(shape_err("integrate_path", input.len(), baseline.len()));
    }
    let mut total = vec![0.0; input.len()];
    let mut point = vec![0.0; input.len()];
    for k in 0..steps {
        let alpha = (k as f64 + 0.5) / steps as f64;
        for ((p, x), b) in point.iter_mut().zip(input).zip(baseline) {
            *p = b + alpha * (x - b);
        }
        let g = grad_at(&point)?;
        if g.len() != total.len() {
            return Err(shape_err("integrate_path gradient", total.len(), g.len()));
        }
        total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
    }
    Ok(total
        .iter()
        .zip(input.iter().zip(baseline))
        .map(|(t, (x, b))| (x - b) * t / steps as f64)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub target: usize,
    /// Signed attributions `[len, d_model]`.
    pub signed: Tensor,
    /// L2 norm of each token's attribution row.
    pub per_token: Vec<f64>,
    pub mask: Vec<bool>,
    pub logit_input: f64,
    pub logit_baseline: f64,
}

impl Attribution {
    /// `|Σ attributions − (logit(input) − logit(baseline))|`.
    pub fn completeness_gap(&self) -> f64 {
        let sum: f64 = self.signed.data.iter().sum();
        (sum - (self.logit_input - self.logit_baseline)).abs()
    }
}

/// Attributes the `target` logit to each token of `seq` at the input-stage
/// output. The default baseline is the all-zero embedded sequence with the
/// sequence's real mask.
pub fn integrated_gradients(
    model: &Model,
    seq: &TokenSequence,
    baseline: Option<&Tensor>,
    steps: usize,
    target: usize,
) -> Result<Attribution> {
    if target >= model.spec.n_classes {
        return Err(NnError::InvalidArgument(format!("target class {target} >= {}", model.spec.n_classes)));
    }
    let batch = Batch::from_sequences(&[seq])?;
    let constants = |g: &mut Graph| ParamVars(model.params.iter().map(|p| g.constant(p.value.clone())).collect());

    let mut g = Graph::new();
    let pv = constants(&mut g);
    let h = model.embed(&mut g, &pv, &batch)?;
    let embedded = g.value(h).clone();
    let out = model.encode(&mut g, &pv, h, &batch)?;
    let logit_input = g.value(out).data[target];

    let base = match baseline {
        Some(b) if b.shape != embedded.shape => return Err(shape_err("integrated_gradients baseline", &embedded.shape, &b.shape)),
        Some(b) => b.clone(),
        None => Tensor::zeros(embedded.shape.clone()),
    };
    let logit_at = |point: &[f64], want_grad: bool| -> Result<(f64, Vec<f64>)> {
        let mut g = Graph::new();
        let pv = constants(&mut g);
        let h = g.leaf(Tensor { shape: embedded.shape.clone(), data: point.to_vec() });
        let logits = model.encode(&mut g, &pv, h, &batch)?;
        let out = g.select(logits, target)?;
        let value = g.value(out).data[0];
        if !want_grad {
            return Ok((value, Vec::new()));
        }
        g.backward(out)?;
        Ok((value, g.grad(h).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; point.len()])))
    };
    let logit_baseline = logit_at(&base.data, false)?.0;
    let signed = integrate_path(&embedded.data, &base.data, steps, |p| logit_at(p, true).map(|r| r.1))?;
    let d = embedded.cols();
    let per_token = signed.chunks(d).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    Ok(Attribution {
        target,
        signed: Tensor { shape: embedded.shape, data: signed },
        per_token,
        mask: batch.mask,
        logit_input,
        logit_baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_closed_form() {
        let w = [0.3, -1.7, 2.25, 0.0, 5.5];
        let x = [1.0, 2.0, -0.5, 9.0, 0.125];
        let attr = integrate_path(&x, &[0.0; 5], 256, |_| Ok(w.to_vec())).unwrap();
        for i in 0..5 {
            assert!((attr[i] - w[i] * x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn input_equal_to_baseline_gives_zero() {
        let x = [0.4, -0.2];
        let attr = integrate_path(&x, &x, 16, |p| Ok(p.iter().map(|v| 2.0 * v).collect())).unwrap();
        assert_eq!(attr, vec![0.0, 0.0]);
    }

    #[test]
    fn too_few_steps_rejected() {
        assert!(integrate_path(&[1.0], &[0.0], 1, |_| Ok(vec![1.0])).is_err());
    }
}
