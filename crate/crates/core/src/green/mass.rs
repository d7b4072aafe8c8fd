//! Leading-coefficient and constant-term fits of the assembled Green function.
//!
//! The constant term is read off in conformal normal coordinates to second order:
//! with Schouten tensor `P = (Ric - scal/(2(m-1)) g)/(m-2)` (parallel on the
//! products of space forms handled here) the conformal factor at `x = exp(v)` is
//! `exp(-(m-2) P(v,v)/4)` and the normal-coordinate radius is
//! `rho (1 + P(v,v)/6)`, `|v| = rho`. The difference
//! `D = exp(-(m-2)F/2) Gamma - a_ref rho_cnc^{2-m}`, `F = P(v,v)/2`, is then fitted
//! by polynomials in `rho` of increasing order.

use serde::{Deserialize, Serialize};

use super::{assemble_green, geometric_grid, GreenModeTable};
use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_volume, ModelSpace};
use crate::linalg::lstsq;

/// `1/((m-2) omega_{m-1})`.
pub fn leading_reference(m: usize) -> f64 {
    1.0 / ((m as f64 - 2.0) * unit_sphere_volume(m - 1))
}

/// Radii of the fit shell along the fiber direction through the pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShellSpec {
    pub rho_min: f64,
    pub rho_max: f64,
    pub count: usize,
}

impl Default for ShellSpec {
    fn default() -> Self {
        Self {
            rho_min: 0.02,
            rho_max: 0.2,
            count: 12,
        }
    }
}

/// Smallest shell accepted by the fits.
pub const MIN_SHELL_POINTS: usize = 6;

pub fn shell_radii(shell: &ShellSpec) -> Result<Vec<f64>> {
    if shell.count < MIN_SHELL_POINTS {
        return Err(Error::ShellTooCoarse(format!(
            "{} shell radii, need at least {MIN_SHELL_POINTS}",
            shell.count
        )));
    }
    if !(shell.rho_min > 0.0) || !(shell.rho_max > shell.rho_min) || shell.rho_max > 0.2 + 1e-15 {
        return Err(Error::ShellTooCoarse(format!(
            "shell [{}, {}] must satisfy 0 < rho_min < rho_max <= 0.2",
            shell.rho_min, shell.rho_max
        )));
    }
    Ok(geometric_grid(shell.rho_min, shell.rho_max, shell.count))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingFit {
    pub coefficient: f64,
    pub reference: f64,
    pub relative_error: f64,
    /// Coefficient of the `rho^{3-m}` nuisance term.
    pub nuisance: f64,
    pub residual: f64,
}

/// Fits `Gamma rho^{m-2} = a + b rho + c rho^2` on the shell (fiber direction, `theta = 0`).
pub fn fit_leading_coefficient(table: &GreenModeTable, shell: &ShellSpec) -> Result<LeadingFit> {
    let rho = shell_radii(shell)?;
    let m = table.model.m();
    let pts: Vec<(f64, f64)> = rho.iter().map(|r| (0.0, *r)).collect();
    let gamma = assemble_green(table, &pts)?;
    let y: Vec<f64> = gamma
        .iter()
        .zip(&rho)
        .map(|(g, r)| g * r.powi(m as i32 - 2))
        .collect();
    let cols = vec![
        vec![1.0; rho.len()],
        rho.clone(),
        rho.iter().map(|r| r * r).collect(),
    ];
    let (coef, residual) = lstsq(&cols, &y)?;
    let reference = leading_reference(m);
    Ok(LeadingFit {
        coefficient: coef[0],
        reference,
        relative_error: (coef[0] - reference).abs() / reference,
        nuisance: coef[1],
        residual,
    })
}

/// Eigenvalues `(P_N, P_H)` of the Schouten tensor of `S^n(R) x H_c^{k+1}` on the
/// two factors.
pub fn schouten_eigenvalues(model: &ModelSpace) -> (f64, f64) {
    let n = model.factor.n as f64;
    let k = model.k as f64;
    let m = model.m() as f64;
    let c = model.c();
    let inv_r2 = model
        .factor
        .sphere_radius()
        .map(|r| 1.0 / (r * r))
        .unwrap_or(0.0);
    let scal = n * (n - 1.0) * inv_r2 - k * (k + 1.0) * c * c;
    let t = scal / (2.0 * (m - 1.0));
    (
        (((n - 1.0) * inv_r2) - t) / (m - 2.0),
        (-k * c * c - t) / (m - 2.0),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDiagnostics {
    pub window: (f64, f64),
    pub residual: f64,
    pub extrapolation_order: usize,
    /// Constant-term estimates from polynomial fits of order 1, 2, 3.
    pub order_estimates: Vec<f64>,
    /// Coefficients of `rho, rho^2, rho^3` in the highest-order fit.
    pub nuisance: Vec<f64>,
    /// Coefficient of an added `ln rho` column (screened for `m = 4` only).
    pub log_amplitude: Option<f64>,
    pub coordinates: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub leading_coefficient: f64,
    pub leading_reference: f64,
    pub mass_term: f64,
    pub uncertainty: f64,
    pub diagnostics: MassDiagnostics,
}

/// `(rho, Gamma, D)` on the fiber axis, where `D` is `Gamma` in second-order conformal
/// normal coordinates minus the leading singular term.
pub fn subtracted_profile(
    table: &GreenModeTable,
    shell: &ShellSpec,
) -> Result<Vec<(f64, f64, f64)>> {
    let m = table.model.m();
    let rho = shell_radii(shell)?;
    let pts: Vec<(f64, f64)> = rho.iter().map(|r| (0.0, *r)).collect();
    let gamma = assemble_green(table, &pts)?;
    let a = leading_reference(m);
    let (_, p_h) = schouten_eigenvalues(&table.model);
    Ok(rho
        .iter()
        .zip(&gamma)
        .map(|(r, g)| {
            // v along the fiber: P(v,v) = P_H rho^2
            let pvv = p_h * r * r;
            let conf = (-(m as f64 - 2.0) * pvv / 4.0).exp();
            let r_cnc = r * (1.0 + pvv / 6.0);
            (*r, *g, conf * g - a * r_cnc.powi(2 - m as i32))
        })
        .collect())
}

/// Extracts the constant term of `Gamma` at the pole; `m` must be 3, 4 or 5.
pub fn fit_mass_term(table: &GreenModeTable, shell: &ShellSpec) -> Result<MassEstimate> {
    let m = table.model.m();
    if !(3..=5).contains(&m) {
        return Err(Error::InvalidDimension(format!(
            "mass extraction needs m in 3..=5, got {m}"
        )));
    }
    let leading = fit_leading_coefficient(table, shell)?;
    let a = leading.reference;
    let profile = subtracted_profile(table, shell)?;
    let rho: Vec<f64> = profile.iter().map(|p| p.0).collect();
    let d: Vec<f64> = profile.iter().map(|p| p.2).collect();

    let mut estimates = Vec::new();
    let mut last = (Vec::new(), 0.0);
    for order in 1..=3 {
        let mut cols = vec![vec![1.0; rho.len()]];
        for p in 1..=order {
            cols.push(rho.iter().map(|r| r.powi(p)).collect());
        }
        let (coef, res) = lstsq(&cols, &d)?;
        estimates.push(coef[0]);
        last = (coef, res);
    }
    let log_amplitude = if m == 4 {
        let mut cols = vec![vec![1.0; rho.len()], rho.iter().map(|r| r.ln()).collect()];
        for p in 1..=2 {
            cols.push(rho.iter().map(|r| r.powi(p)).collect());
        }
        Some(lstsq(&cols, &d)?.0[1])
    } else {
        None
    };
    let step_lo = (estimates[1] - estimates[0]).abs();
    let step_hi = (estimates[2] - estimates[1]).abs();
    let floor = 1e-12 * a / shell.rho_max.powi(m as i32 - 2);
    if step_hi > step_lo.max(floor) {
        return Err(Error::ExtrapolationUnstable(format!(
            "constant-term estimates {estimates:?} do not settle"
        )));
    }
    let (coef, residual) = last;
    let uncertainty = step_hi + residual + floor;
    Ok(MassEstimate {
        leading_coefficient: leading.coefficient,
        leading_reference: a,
        mass_term: estimates[2],
        uncertainty,
        diagnostics: MassDiagnostics {
            window: (shell.rho_min, shell.rho_max),
            residual,
            extrapolation_order: 3,
            order_estimates: estimates,
            nuisance: coef[1..].to_vec(),
            log_amplitude,
            coordinates: "conformal normal (second order)".into(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ClosedFactorData, WarpingProfile};

    #[test]
    fn references() {
        assert!((leading_reference(4) - 1.0 / (4.0 * std::f64::consts::PI.powi(2))).abs() < 1e-16);
        assert!((leading_reference(3) - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-16);
    }

    #[test]
    fn schouten_of_flat_and_conformally_flat_products() {
        let m = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, 1.0).unwrap();
        let (pn, ph) = schouten_eigenvalues(&m);
        // S^2 x H^2 is conformally flat: P_N = -P_H = 1/2
        assert!((pn - 0.5).abs() < 1e-15 && (ph + 0.5).abs() < 1e-15);
        let e = ModelSpace::new(
            ClosedFactorData::point(),
            2,
            WarpingProfile::linear(0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(schouten_eigenvalues(&e).1, 0.0);
    }

    #[test]
    fn shell_validation() {
        assert!(shell_radii(&ShellSpec {
            rho_min: 0.02,
            rho_max: 0.3,
            count: 12
        })
        .is_err());
        assert!(shell_radii(&ShellSpec {
            rho_min: 0.02,
            rho_max: 0.2,
            count: 4
        })
        .is_err());
        assert_eq!(shell_radii(&ShellSpec::default()).unwrap().len(), 12);
    }
}
