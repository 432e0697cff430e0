use crate::error::{Error, Result};

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Index of the worst component.
    pub worst_index: usize,
    pub numeric: Vec<f64>,
}

/// Relative error with denominator `max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central-difference gradient of `f` at `params`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must be rejected
pub fn numeric_gradient(
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!(
            "step size must be positive, got {h}"
        )));
    }
    let mut probe = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("probe value at component {i}")));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Compares `analytic` with central differences of `f` and reports the worst
/// relative error.
pub fn gradient_check(
    f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    h: f64,
) -> Result<GradCheck> {
    if analytic.len() != params.len() {
        return Err(Error::ShapeMismatch {
            op: "gradient_check",
            left: (params.len(), 1),
            right: (analytic.len(), 1),
        });
    }
    let numeric = numeric_gradient(f, params, h)?;
    let (worst_index, max_rel_error) = numeric
        .iter()
        .zip(analytic)
        .map(|(&n, &a)| relative_error(a, n))
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (i, e)| if e > best.1 { (i, e) } else { best },
        );
    Ok(GradCheck {
        max_rel_error,
        worst_index,
        numeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_sq_norm(theta: &[f64]) -> f64 {
        0.5 * theta.iter().map(|t| t * t).sum::<f64>()
    }

    #[test]
    fn quadratic_is_exact() {
        let theta = [0.3, -1.2, 2.5, 0.01];
        let check = gradient_check(half_sq_norm, &theta, &theta, 1e-5).unwrap();
        assert!(check.max_rel_error < 1e-9, "{}", check.max_rel_error);
    }

    #[test]
    fn doubled_gradient_is_detected() {
        // |2g - g| / max(|2g|, |g|) = 1/2
        let theta = [0.7, -0.4];
        let wrong: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
        let check = gradient_check(half_sq_norm, &theta, &wrong, 1e-5).unwrap();
        assert!((check.max_rel_error - 0.5).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_step_and_non_finite_probe() {
        assert!(numeric_gradient(half_sq_norm, &[1.0], 0.0).is_err());
        let blowup = |t: &[f64]| if t[0] > 1.0 { f64::INFINITY } else { t[0] };
        assert!(numeric_gradient(blowup, &[1.0], 1e-5).is_err());
    }
}
