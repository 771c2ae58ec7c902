//! Central finite-difference gradient oracle.

use crate::error::{Error, Result};

pub const DEFAULT_FD_EPS: f64 = 1e-5;

/// Coordinates whose analytic and numeric magnitudes sum below this are
/// skipped when computing relative error.
pub const MAGNITUDE_FLOOR: f64 = 1e-8;

/// Outcome of one finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    /// Analytic and numeric values at `worst_index`.
    pub worst_pair: Option<(f64, f64)>,
    pub checked: usize,
}

/// How each numeric derivative is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(θ+εe) − f(θ−εe)) / 2ε`, truncation error O(ε²).
    #[default]
    Central,
    /// `(4·D(ε/2) − D(ε)) / 3` over central differences `D`, truncation
    /// error O(ε⁴). Resolves coordinates whose gradient happens to sit
    /// near zero while higher derivatives do not.
    Richardson,
}

/// Compare the analytic gradient returned by `f` at `params` against
/// central differences `(f(θ+εe) − f(θ−εe)) / 2ε`.
///
/// `f` returns `(value, gradient)`; only the value is used at perturbed
/// points. Errors if `f` is not deterministic at `params` or returns a
/// gradient of the wrong length.
pub fn finite_diff_check<F>(f: F, params: &[f64], eps: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    finite_diff_check_with(f, params, eps, Stencil::Central)
}

pub fn finite_diff_check_with<F>(
    mut f: F,
    params: &[f64],
    eps: f64,
    stencil: Stencil,
) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (v0, analytic) = f(params)?;
    let (v1, _) = f(params)?;
    if v0.to_bits() != v1.to_bits() {
        return Err(Error::Numeric(format!(
            "objective is not deterministic: {v0} then {v1}"
        )));
    }
    if analytic.len() != params.len() {
        return Err(Error::Shape {
            left: vec![params.len()],
            right: vec![analytic.len()],
            context: "params vs analytic gradient",
        });
    }
    let mut theta = params.to_vec();
    let mut worst = 0.0;
    let mut worst_index = None;
    let mut worst_pair = None;
    let mut checked = 0;
    for i in 0..theta.len() {
        let mut central = |h: f64| -> Result<f64> {
            let orig = theta[i];
            theta[i] = orig + h;
            let (fp, _) = f(&theta)?;
            theta[i] = orig - h;
            let (fm, _) = f(&theta)?;
            theta[i] = orig;
            Ok((fp - fm) / (2.0 * h))
        };
        let numeric = match stencil {
            Stencil::Central => central(eps)?,
            Stencil::Richardson => (4.0 * central(0.5 * eps)? - central(eps)?) / 3.0,
        };
        let a = analytic[i];
        let scale = a.abs() + numeric.abs();
        if !numeric.is_finite() || !a.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite gradient at coordinate {i}"
            )));
        }
        if scale <= MAGNITUDE_FLOOR {
            continue;
        }
        checked += 1;
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
        if rel > worst {
            worst = rel;
            worst_index = Some(i);
            worst_pair = Some((a, numeric));
        }
    }
    Ok(GradCheck {
        max_rel_error: worst,
        worst_index,
        worst_pair,
        checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_at_three() {
        let r = finite_diff_check(
            |w| Ok((w[0] * w[0], vec![2.0 * w[0]])),
            &[3.0],
            DEFAULT_FD_EPS,
        )
        .unwrap();
        assert!(r.max_rel_error * 6.0 < 1e-6);
    }

    #[test]
    fn sine_at_one() {
        let r = finite_diff_check(
            |w| Ok((w[0].sin(), vec![w[0].cos()])),
            &[1.0],
            DEFAULT_FD_EPS,
        )
        .unwrap();
        assert!(r.max_rel_error * 1f64.cos() < 1e-6);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let r =
            finite_diff_check(|w| Ok((w[0] * w[0], vec![w[0]])), &[3.0], DEFAULT_FD_EPS).unwrap();
        assert!(r.max_rel_error > 0.4);
    }

    #[test]
    fn nondeterministic_objective_is_an_error() {
        let mut calls = 0.0;
        let res = finite_diff_check(
            |w| {
                calls += 1.0;
                Ok((w[0] + calls, vec![1.0]))
            },
            &[0.0],
            DEFAULT_FD_EPS,
        );
        assert!(res.is_err());
    }

    #[test]
    fn richardson_beats_central_on_a_cubic() {
        // d/dx x³ at 0 is 0 but the third derivative is not: central
        // differences are off by ε², the extrapolated stencil is exact.
        let f = |w: &[f64]| Ok((w[0].powi(3) + 1e-7 * w[0], vec![3.0 * w[0] * w[0] + 1e-7]));
        let c = finite_diff_check_with(f, &[0.0], 1e-3, Stencil::Central).unwrap();
        let r = finite_diff_check_with(f, &[0.0], 1e-3, Stencil::Richardson).unwrap();
        assert!(c.max_rel_error > 0.5);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn tiny_coordinates_are_skipped() {
        let r = finite_diff_check(|w| Ok((0.0 * w[0], vec![0.0])), &[1.0], DEFAULT_FD_EPS).unwrap();
        assert_eq!(r.checked, 0);
        assert_eq!(r.max_rel_error, 0.0);
    }
}
