use alloc::string::String;

use super::{mse_loss, Network, NnError, Tensor};

/// Central-difference step.
pub const STEP: f64 = 1e-3;
/// Gradient magnitudes below this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    /// Entries whose ±step probe crossed a ReLU or pooling boundary.
    pub skipped: usize,
}

/// Compare every analytic parameter gradient of the MSE loss against central
/// differences, with batch norm in training mode. Probes that change the
/// activation pattern are not comparable and are skipped.
pub fn gradient_check(
    net: &Network<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
) -> Result<GradCheckReport, NnError> {
    let tape = net.forward_train(input)?;
    let base_pattern = net.activation_pattern(&tape);
    let (_, grad_out) = mse_loss(tape.output(), target)?;
    let (analytic, _) = net.backward(&tape, &grad_out)?;
    let names = net.param_names();

    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    let eval = |probe: &Network<f64>| -> Result<(f64, bool), NnError> {
        let t = probe.forward_train(input)?;
        let same = probe.activation_pattern(&t) == base_pattern;
        Ok((mse_loss(t.output(), target)?.0, same))
    };
    for (k, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let original = probe.params()[k].data()[j];
            probe.params_mut()[k].data_mut()[j] = original + STEP;
            let (plus, same_plus) = eval(&probe)?;
            probe.params_mut()[k].data_mut()[j] = original - STEP;
            let (minus, same_minus) = eval(&probe)?;
            probe.params_mut()[k].data_mut()[j] = original;
            if !(same_plus && same_minus) {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * STEP);
            let a = grad.data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = Some((names[k].clone(), j));
            }
        }
    }
    Ok(report)
}
