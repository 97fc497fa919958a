//! Central finite-difference verification of hand-written backward rules.

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// An operation with an explicit backward rule, evaluated in float64.
///
/// Parameters are treated as ordinary inputs so that a single check covers
/// both input and weight gradients.
pub trait DifferentiableOp {
    fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>>;

    /// One gradient per input, each shaped like its input.
    fn backward(&self, inputs: &[Tensor<f64>], grad_out: &Tensor<f64>) -> Result<Vec<Tensor<f64>>>;

    fn input_names(&self, count: usize) -> Vec<String> {
        (0..count).map(|i| format!("input{i}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub elements: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "grad check {}: max rel error {:.3e} (tolerance {:.1e})",
            if self.passed { "passed" } else { "FAILED" },
            self.max_rel_error,
            self.tolerance
        )?;
        for g in &self.groups {
            writeln!(
                f,
                "  {:<32} {:>6} elems  max rel {:.3e} @ {}",
                g.name, g.elements, g.max_rel_error, g.worst_index
            )?;
        }
        Ok(())
    }
}

fn loss(out: &Tensor<f64>) -> f64 {
    out.sum_sq()
}

/// Compare analytic gradients of `L = sum(output^2)` against central
/// differences for every element of every input.
///
/// The relative error of one element is `|a - n| / max(|a|, |n|, s)` where
/// `s` is the largest analytic magnitude in the same group. Entries far
/// below the group's scale are therefore judged against that scale, since a
/// central difference cannot resolve them more finely than the rounding
/// noise of the loss.
pub fn grad_check(op: &dyn DifferentiableOp, inputs: &[Tensor<f64>], tolerance: f64) -> Result<GradCheckReport> {
    for (i, t) in inputs.iter().enumerate() {
        t.ensure_finite(&format!("grad_check input {i}"))?;
    }
    let out = op.forward(inputs)?;
    out.ensure_finite("grad_check forward output")?;
    let grad_out = out.map(|v| 2.0 * v);
    let analytic = op.backward(inputs, &grad_out)?;
    let names = op.input_names(inputs.len());
    if analytic.len() != inputs.len() {
        let missing = names.get(analytic.len()).cloned().unwrap_or_else(|| "input".into());
        return Err(Error::MissingBackward(missing));
    }

    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut groups = Vec::with_capacity(inputs.len());
    for (gi, grad) in analytic.iter().enumerate() {
        if grad.shape() != inputs[gi].shape() {
            return Err(Error::shape("grad_check gradient", inputs[gi].shape(), grad.shape()));
        }
        grad.ensure_finite(&format!("analytic gradient of {}", names[gi]))?;
        let scale = grad.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = scale.max(1e-12);
        let mut report = GroupReport {
            name: names[gi].clone(),
            max_rel_error: 0.0,
            worst_index: 0,
            elements: grad.len(),
        };
        for j in 0..grad.len() {
            let orig = work[gi].data()[j];
            work[gi].data_mut()[j] = orig + FD_STEP;
            let lp = loss(&op.forward(&work)?);
            work[gi].data_mut()[j] = orig - FD_STEP;
            let lm = loss(&op.forward(&work)?);
            work[gi].data_mut()[j] = orig;
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            if !numeric.is_finite() {
                return Err(Error::NonFinite(format!("finite difference of {}[{j}]", names[gi])));
            }
            let a = grad.data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_index = j;
            }
        }
        groups.push(report);
    }
    let max_rel_error = groups.iter().fold(0.0f64, |m, g| m.max(g.max_rel_error));
    Ok(GradCheckReport {
        groups,
        max_rel_error,
        tolerance,
        passed: max_rel_error < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Affine;

    // y = a * x + b, elementwise with scalar a, b
    impl DifferentiableOp for Affine {
        fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
            let (a, b) = (inputs[1].data()[0], inputs[2].data()[0]);
            Ok(inputs[0].map(|x| a * x + b))
        }

        fn backward(&self, inputs: &[Tensor<f64>], g: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
            let a = inputs[1].data()[0];
            let ga: f64 = g.data().iter().zip(inputs[0].data()).map(|(g, x)| g * x).sum();
            let gb: f64 = g.data().iter().sum();
            Ok(vec![
                g.map(|v| v * a),
                Tensor::from_vec(&[1], vec![ga])?,
                Tensor::from_vec(&[1], vec![gb])?,
            ])
        }
    }

    struct NoBackward;

    impl DifferentiableOp for NoBackward {
        fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
            Ok(inputs[0].clone())
        }

        fn backward(&self, _: &[Tensor<f64>], _: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
            Ok(vec![])
        }
    }

    fn affine_inputs() -> Vec<Tensor<f64>> {
        vec![
            Tensor::from_fn(&[2, 3], |i| 0.3 * i as f64 - 0.7),
            Tensor::from_vec(&[1], vec![1.3]).unwrap(),
            Tensor::from_vec(&[1], vec![-0.4]).unwrap(),
        ]
    }

    #[test]
    fn affine_passes() {
        let r = grad_check(&Affine, &affine_inputs(), 1e-9).unwrap();
        assert!(r.passed, "{r}");
        assert_eq!(r.groups.len(), 3);
    }

    #[test]
    fn missing_backward_is_reported() {
        let inputs = vec![Tensor::<f64>::zeros(&[2])];
        assert!(matches!(grad_check(&NoBackward, &inputs, 1e-6), Err(Error::MissingBackward(_))));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut inputs = affine_inputs();
        inputs[0].data_mut()[1] = f64::NAN;
        assert!(matches!(grad_check(&Affine, &inputs, 1e-6), Err(Error::NonFinite(_))));
    }
}
