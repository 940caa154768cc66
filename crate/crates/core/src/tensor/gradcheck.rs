//! Central finite-difference checks of tape gradients.

use crate::error::{Error, Result};

use super::{Tape, Tensor, Var};

/// Outcome of [`check_gradients`].
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Largest relative error over all probed coordinates.
    pub max_rel_err: f64,
    /// Number of probed coordinates.
    pub probes: usize,
    /// `(input, flat index, analytic, numeric)` of the worst probe.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Relative error with a floor on the denominator so exactly-zero
/// gradients compare on an absolute scale.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Compares analytic gradients of a scalar function with central
/// differences.
///
/// `build` records the function on a fresh tape given the inputs as
/// parameters. At most `probes_per_input` coordinates of each input are
/// perturbed by `±eps`, spread evenly over the tensor.
pub fn check_gradients<F>(
    inputs: &[Tensor<f64>],
    probes_per_input: usize,
    eps: f64,
    build: F,
) -> Result<GradCheck>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let root = build(&mut tape, &vars)?;
        Ok(tape.value(root).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let root = build(&mut tape, &vars)?;
    tape.backward(root)?;

    let mut report = GradCheck {
        max_rel_err: 0.0,
        probes: 0,
        worst: None,
    };
    let mut values = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let analytic = match tape.grad(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(inputs[k].shape()),
        };
        let len = inputs[k].len();
        let count = probes_per_input.min(len);
        if count == 0 {
            continue;
        }
        for p in 0..count {
            let idx = p * len / count;
            let orig = values[k].data()[idx];
            values[k].data_mut()[idx] = orig + eps;
            let up = eval(&values)?;
            values[k].data_mut()[idx] = orig - eps;
            let down = eval(&values)?;
            values[k].data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[idx];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::Shape(format!(
                    "non-finite gradient at input {k} index {idx}"
                )));
            }
            let err = relative_error(a, numeric);
            report.probes += 1;
            if err >= report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((k, idx, a, numeric));
            }
        }
    }
    Ok(report)
}
