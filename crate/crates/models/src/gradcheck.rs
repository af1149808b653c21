//! Central finite-difference checks of autograd gradients.

use candle_core::{DType, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// (parameter index, element, analytic, numeric) of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Relative error with a floor on the denominator so that entries whose
/// true gradient is ~0 are judged on absolute error.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn set_element(var: &Var, index: usize, value: f64) -> Result<()> {
    let mut v = var.as_tensor().flatten_all()?.to_vec1::<f64>()?;
    v[index] = value;
    var.set(&Tensor::from_vec(v, var.shape(), var.device())?)?;
    Ok(())
}

/// Compares d loss / d var against (f(x+h) − f(x−h)) / 2h for up to
/// `per_var` randomly chosen elements of each f64 variable.
pub fn check_gradients(
    vars: &[Var],
    loss: impl Fn() -> Result<Tensor>,
    per_var: usize,
    h: f64,
    floor: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if vars.iter().any(|v| v.dtype() != DType::F64) {
        return Err(Error::InvalidArgument("gradient checks need f64 parameters".into()));
    }
    let grads = loss()?.backward()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    for (vi, var) in vars.iter().enumerate() {
        let analytic = match grads.get(var.as_tensor()) {
            Some(g) => g.flatten_all()?.to_vec1::<f64>()?,
            None => vec![0.0; var.elem_count()],
        };
        let n = var.elem_count();
        let picks: Vec<usize> = if n <= per_var {
            (0..n).collect()
        } else {
            (0..per_var).map(|_| rng.random_range(0..n)).collect()
        };
        for i in picks {
            let x0 = var.as_tensor().flatten_all()?.to_vec1::<f64>()?[i];
            set_element(var, i, x0 + h)?;
            let up = loss()?.to_scalar::<f64>()?;
            set_element(var, i, x0 - h)?;
            let down = loss()?.to_scalar::<f64>()?;
            set_element(var, i, x0)?;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic[i], numeric, floor);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                if err >= report.max_relative_error {
                    report.worst = Some((vi, i, analytic[i], numeric));
                }
            }
        }
    }
    Ok(report)
}
