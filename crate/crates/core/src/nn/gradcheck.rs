//! Central finite-difference verification of `backward`.

use super::{softmax_cross_entropy, Model, Tensor};
use crate::error::{Error, Result};

/// Magnitude below which relative error is measured against this floor
/// instead of the gradient itself. Keeps rounding noise in near-zero
/// gradients (about 1e-11 at eps = 1e-5) from dominating the ratio.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Layer name of the worst parameter.
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRADCHECK_FLOOR)
}

/// Backpropagated loss gradients per weighted layer, `(name, grads)`.
pub fn analytic_gradients(model: &mut Model<f64>, input: &Tensor<f64>, label: usize) -> Result<Vec<(String, Vec<f64>)>> {
    model.zero_grad();
    let logits = model.forward(input)?;
    let (_, g) = softmax_cross_entropy(&logits, label)?;
    model.backward(&g)?;
    let out = model.params().map(|(n, p)| (n.to_string(), p.grad.clone())).collect();
    model.zero_grad();
    Ok(out)
}

/// Compares `analytic` with central differences of the loss for every weight.
pub fn compare_gradients(
    model: &mut Model<f64>,
    input: &Tensor<f64>,
    label: usize,
    eps: f64,
    analytic: &[(String, Vec<f64>)],
) -> Result<GradCheckReport> {
    model.forward(input)?;
    let inputs: Vec<Vec<f64>> = model.layers.iter().map(|l| l.input.clone()).collect();
    let weighted: Vec<usize> = (0..model.layers.len())
        .filter(|&i| model.layers[i].param.is_some())
        .collect();
    if weighted.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "{} gradient tensors for {} weighted layers",
            analytic.len(),
            weighted.len()
        )));
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (&li, (name, grads)) in weighted.iter().zip(analytic) {
        let n = model.layers[li].param_count();
        if grads.len() != n {
            return Err(Error::Shape(format!("{name}: {} gradients for {n} weights", grads.len())));
        }
        for (i, &a) in grads.iter().enumerate() {
            let w = model.layers[li].param.as_ref().map(|p| p.value[i]).unwrap_or_default();
            let loss_at = |v: f64, model: &mut Model<f64>| -> Result<f64> {
                if let Some(p) = model.layers[li].param.as_mut() {
                    p.value[i] = v;
                }
                let logits = model.forward_from(li, inputs[li].clone())?;
                Ok(softmax_cross_entropy(&logits, label)?.0)
            };
            let lp = loss_at(w + eps, model)?;
            let lm = loss_at(w - eps, model)?;
            loss_at(w, model)?;
            let num = (lp - lm) / (2.0 * eps);
            let r = rel_error(a, num);
            report.checked += 1;
            if r > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = r;
                report.worst_param = name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = num;
            }
        }
    }
    model.cached = false;
    Ok(report)
}

/// Backward pass checked against central differences with step `eps`.
pub fn gradient_check(model: &mut Model<f64>, input: &Tensor<f64>, label: usize, eps: f64) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(model, input, label)?;
    compare_gradients(model, input, label, eps, &analytic)
}
