use super::tensor::Tensor2;
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    /// Max over all elements of `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
    pub max_rel_error: f64,
    /// The same maximum restricted to each parameter tensor.
    pub per_param: Vec<f64>,
}

/// Compare analytic gradients against central finite differences.
///
/// `f` evaluates the scalar objective at the given parameter values and
/// returns it together with the analytic gradient of every tensor. It is
/// called once at `point` for the analytic gradients, then twice per element
/// with that element shifted by `±eps`.
pub fn gradcheck<F>(mut point: Vec<Tensor2<f64>>, mut f: F, eps: f64) -> Result<GradcheckReport>
where
    F: FnMut(&[Tensor2<f64>]) -> Result<(f64, Vec<Tensor2<f64>>)>,
{
    let (base, analytic) = f(&point)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("gradcheck objective".into()));
    }
    if analytic.len() != point.len() {
        return Err(Error::LengthMismatch(analytic.len(), point.len()));
    }
    let mut per_param = Vec::with_capacity(point.len());
    for p in 0..point.len() {
        if analytic[p].shape() != point[p].shape() {
            return Err(Error::shape(
                "gradcheck",
                format!("gradient {p} has shape {:?}", analytic[p].shape()),
            ));
        }
        let mut worst: f64 = 0.0;
        for i in 0..point[p].len() {
            let orig = point[p].data()[i];
            point[p].data_mut()[i] = orig + eps;
            let plus = f(&point)?.0;
            point[p].data_mut()[i] = orig - eps;
            let minus = f(&point)?.0;
            point[p].data_mut()[i] = orig;
            if !(plus.is_finite() && minus.is_finite()) {
                return Err(Error::NonFinite("gradcheck objective".into()));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[p].data()[i];
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(rel);
        }
        per_param.push(worst);
    }
    Ok(GradcheckReport {
        max_rel_error: per_param.iter().copied().fold(0.0, f64::max),
        per_param,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_squares(p: &[Tensor2<f64>]) -> f64 {
        p.iter().flat_map(|t| t.data()).map(|x| x * x).sum()
    }

    #[test]
    fn quadratic_exact() {
        let w = Tensor2::from_vec(2, 2, vec![0.3, -1.2, 2.0, 0.0]).unwrap();
        let report = gradcheck(
            vec![w],
            |p| Ok((sum_squares(p), vec![p[0].map(|x| 2.0 * x)])),
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-9, "{report:?}");
    }

    #[test]
    fn detects_corrupted_gradient() {
        let w = Tensor2::from_vec(1, 3, vec![1.5, -2.0, 3.0]).unwrap();
        let report = gradcheck(
            vec![w],
            |p| Ok((sum_squares(p), vec![p[0].map(|x| 2.0 * x * 1.01)])),
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(report.max_rel_error > 1e-3, "{report:?}");
    }

    #[test]
    fn non_finite_objective_errors() {
        let w = Tensor2::from_vec(1, 1, vec![1.0]).unwrap();
        let r = gradcheck(vec![w], |p| Ok((f64::NAN, vec![p[0].clone()])), DEFAULT_EPS);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
