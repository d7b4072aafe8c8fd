//! Radial Green profiles of a single `S^n`-mode on the fiber `H_c^{k+1}`.
//!
//! The profile solves `g'' + k (f'/f) g' - V g = 0`, `V = mu + scal_g / a_m`, on
//! `(0, inf)`, decays at infinity and carries the delta normalisation
//! `a_m * (flux through small spheres) = -1`. It is represented through the
//! logarithmic derivative `y = g'/g` of the decaying solution, integrated backwards
//! from far out, and the Wronskian against the solution regular at the origin.

use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_volume, ModelSpace, ProfileKind, ScalBound};
use crate::ode::integrator::{integrate_rhs, IntegrateOptions, Tolerances};

/// Tolerances of the Riccati integrations.
pub const PROFILE_TOLERANCES: Tolerances = Tolerances {
    abs: 1e-13,
    rel: 1e-12,
};

/// Checks that the model is a global `N x H_c^{k+1}` with `f(0) = 0`, `f'(0) = 1`.
pub(crate) fn check_green_model(model: &ModelSpace) -> Result<()> {
    match model.profile.kind() {
        ProfileKind::SinhC | ProfileKind::Linear => {}
        ProfileKind::Custom => {
            return Err(Error::InvalidModel(
                "Green profiles need a sinh_c or linear warping function".into(),
            ))
        }
    }
    if model.profile.a() != 0.0 {
        return Err(Error::InvalidModel(format!(
            "Green profiles need the fiber closed at r = 0 (a = {})",
            model.profile.a()
        )));
    }
    if model.factor.n > 0 && model.factor.sphere_radius().is_none() {
        return Err(Error::InvalidModel(
            "Green profiles need a round-sphere or point factor".into(),
        ));
    }
    Ok(())
}

/// Per-mode data fixed at construction; profile values are produced on demand.
#[derive(Debug, Clone)]
pub struct ModeSolver {
    model: ModelSpace,
    pub mu: f64,
    /// `V + k^2 c^2 / 4` square-rooted: the decay rate of `g f^{k/2}`.
    pub kappa: f64,
    pub r_match: f64,
    pub r_far: f64,
    /// `ln` of the factor turning the backward solution `h` (with `h(r_match) = 1`) into `g`.
    log_scale: f64,
    pub singular_strength: f64,
}

/// Values of a profile on a set of radii.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSamples {
    pub radii: Vec<f64>,
    pub log_g: Vec<f64>,
    /// `g'/g`.
    pub log_derivative: Vec<f64>,
}

impl ProfileSamples {
    pub fn value(&self, i: usize) -> f64 {
        self.log_g[i].exp()
    }

    pub fn derivative(&self, i: usize) -> f64 {
        self.log_derivative[i] * self.log_g[i].exp()
    }
}

/// Expected small-`r` coefficient of the profile: `1/(a_m (k-1) omega_k)` of
/// `r^{1-k}` for `k >= 2`, or `1/(2 pi a_m)` of `-ln r` for `k = 1`.
pub fn template_coefficient(model: &ModelSpace) -> f64 {
    let k = model.k;
    let am = model.a_m();
    if k == 1 {
        1.0 / (2.0 * std::f64::consts::PI * am)
    } else {
        1.0 / (am * (k as f64 - 1.0) * unit_sphere_volume(k))
    }
}

impl ModeSolver {
    pub fn new(model: &ModelSpace, mu: f64) -> Result<Self> {
        check_green_model(model)?;
        if !(mu >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "mode eigenvalue {mu} must be >= 0"
            )));
        }
        let k = model.k as f64;
        let c = model.c();
        let v_inf = mu + model.asymptotic_scal(ScalBound::Inf) / model.a_m();
        let kappa_sq = v_inf + k * k * c * c / 4.0;
        if !(kappa_sq >= -1e-14) {
            return Err(Error::MatchingFailure(format!(
                "mode mu = {mu} has no decaying Green profile (V + k^2c^2/4 = {kappa_sq})"
            )));
        }
        let kappa = kappa_sq.max(0.0).sqrt();
        let r_match = if kappa > 0.0 {
            (1.0 / kappa).min(1.0)
        } else {
            1.0
        };
        let r_far = r_match
            + if kappa > 0.0 {
                (40.0 / kappa).min(200.0)
            } else {
                200.0
            };
        let mut solver = Self {
            model: model.clone(),
            mu,
            kappa,
            r_match,
            r_far,
            log_scale: 0.0,
            singular_strength: 0.0,
        };
        solver.normalise()?;
        Ok(solver)
    }

    fn potential(&self, r: f64) -> f64 {
        self.mu + self.model.scalar_curvature_unchecked(r, ScalBound::Inf) / self.model.a_m()
    }

    fn far_start(&self, r: f64) -> f64 {
        let k = self.model.k as f64;
        let p = &self.model.profile;
        let h = p.log_derivative(r);
        let q =
            self.potential(r) + 0.5 * k * p.second_log_ratio(r) + 0.5 * k * (0.5 * k - 1.0) * h * h;
        // decaying root of w' = q - w^2 with the 1/r correction of a Bessel-type tail
        let w = (1.0 - (1.0 + 4.0 * q * r * r).sqrt()) / (2.0 * r);
        -0.5 * k * h + w
    }

    /// Backward Riccati sweep from `r_start` with `h(r_start) = 1`; returns
    /// `(r, y, ln h)` at the requested radii, given in decreasing order.
    fn backward(&self, r_start: f64, radii_desc: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
        let k = self.model.k as f64;
        let profile = self.model.profile.clone();
        let mu = self.mu;
        let model = self.model.clone();
        let am = model.a_m();
        let rhs = (2usize, move |r: f64, x: &[f64], dx: &mut [f64]| {
            let v = mu + model.scalar_curvature_unchecked(r, ScalBound::Inf) / am;
            dx[0] = v - k * profile.log_derivative(r) * x[0] - x[0] * x[0];
            dx[1] = x[0];
        });
        let r_end = *radii_desc.last().expect("nonempty radii");
        let opts =
            IntegrateOptions::with_tolerances(PROFILE_TOLERANCES).outputs(radii_desc.to_vec());
        let traj = integrate_rhs(&rhs, r_start, &[self.far_start(r_start), 0.0], r_end, &opts)
            .map_err(|e| {
                Error::MatchingFailure(format!("backward sweep for mu = {}: {e}", self.mu))
            })?;
        Ok(traj
            .grid
            .iter()
            .zip(&traj.states)
            .map(|(r, s)| (*r, s[0], s[1]))
            .collect())
    }

    /// Forward sweep of the solution regular at 0; returns `(z, ln phi)` at `r_match`.
    fn regular_at_match(&self) -> Result<(f64, f64)> {
        let k = self.model.k as f64;
        let r0 = 1e-6 * self.r_match;
        let v0 = self.potential(r0);
        let profile = self.model.profile.clone();
        let mu = self.mu;
        let model = self.model.clone();
        let am = model.a_m();
        let rhs = (2usize, move |r: f64, x: &[f64], dx: &mut [f64]| {
            let v = mu + model.scalar_curvature_unchecked(r, ScalBound::Inf) / am;
            dx[0] = v - k * profile.log_derivative(r) * x[0] - x[0] * x[0];
            dx[1] = x[0];
        });
        let x0 = [v0 * r0 / (k + 1.0), v0 * r0 * r0 / (2.0 * (k + 1.0))];
        let traj = integrate_rhs(
            &rhs,
            r0,
            &x0,
            self.r_match,
            &IntegrateOptions::with_tolerances(PROFILE_TOLERANCES),
        )
        .map_err(|e| Error::MatchingFailure(format!("regular sweep for mu = {}: {e}", self.mu)))?;
        let s = traj.last_state();
        Ok((s[0], s[1]))
    }

    fn normalise(&mut self) -> Result<()> {
        let k = self.model.k;
        let r_sing = 1e-4 * self.r_match;
        let pts = self.backward(self.r_far, &[self.r_match, r_sing])?;
        let (_, y, log_h) = pts[0];
        let (z, log_phi) = self.regular_at_match()?;
        // f^k W(phi, h) = f^k phi h (y - z) is constant; a_m omega_k f^k W(phi, g) = -1
        let ln_fk = k as f64 * self.model.profile.ln_f(self.r_match);
        let diff = y - z;
        if !(diff < 0.0) || !diff.is_finite() {
            return Err(Error::MatchingFailure(format!(
                "Wronskian of mode mu = {} has the wrong sign ({diff})",
                self.mu
            )));
        }
        // with h rescaled to h(r_match) = 1, g = h / (a_m omega_k |f^k W|)
        let ln_w = ln_fk + log_phi + (-diff).ln();
        self.log_scale = -(self.model.a_m() * unit_sphere_volume(k)).ln() - ln_w;

        let (r, ys, log_hs) = pts[1];
        let g = (log_hs - log_h + self.log_scale).exp();
        self.singular_strength = if k == 1 {
            -r * ys * g
        } else {
            -r.powi(k as i32) * ys * g / (k as f64 - 1.0)
        };
        Ok(())
    }

    /// `ln g`, `g'/g` on the given radii (any order, all positive).
    pub fn sample(&self, radii: &[f64]) -> Result<ProfileSamples> {
        for &r in radii {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::DomainError { r, lower: 0.0 });
            }
        }
        // beyond r_neg the profile is below the smallest positive double
        let r_neg = self.negligible_radius();
        let r_max = radii
            .iter()
            .copied()
            .filter(|r| *r <= r_neg)
            .fold(self.r_match, f64::max);
        let tail = if self.kappa > 0.0 {
            (40.0 / self.kappa).min(200.0)
        } else {
            200.0
        };
        let r_start = self.r_far.max(r_max + tail);
        let mut order: Vec<usize> = (0..radii.len()).collect();
        order.sort_by(|&a, &b| radii[b].total_cmp(&radii[a]));
        // the match point is inserted into the sweep; it anchors h(r_match) = 1
        let mut desc: Vec<f64> = Vec::with_capacity(radii.len() + 1);
        let mut slots: Vec<Option<usize>> = Vec::with_capacity(radii.len() + 1);
        let mut placed = false;
        let mut log_g = vec![f64::NEG_INFINITY; radii.len()];
        let mut dlog = vec![0.0; radii.len()];
        for &i in &order {
            if radii[i] > r_neg {
                dlog[i] = self.far_start(radii[i]);
                continue;
            }
            if !placed && radii[i] < self.r_match {
                desc.push(self.r_match);
                slots.push(None);
                placed = true;
            }
            desc.push(radii[i]);
            slots.push(Some(i));
        }
        if !placed {
            desc.push(self.r_match);
            slots.push(None);
        }
        let vals = self.backward(r_start, &desc)?;
        let anchor = slots
            .iter()
            .zip(&vals)
            .find(|(s, _)| s.is_none())
            .map(|(_, v)| v.2)
            .expect("match point present");
        for (slot, (_, y, lh)) in slots.iter().zip(vals) {
            if let Some(i) = slot {
                log_g[*i] = lh - anchor + self.log_scale;
                dlog[*i] = y;
            }
        }
        Ok(ProfileSamples {
            radii: radii.to_vec(),
            log_g,
            log_derivative: dlog,
        })
    }

    /// Radius past which `g` underflows (`kappa (r - r_match) > 690`).
    pub fn negligible_radius(&self) -> f64 {
        if self.kappa > 0.0 {
            self.r_match + 690.0 / self.kappa
        } else {
            f64::INFINITY
        }
    }

    pub fn model(&self) -> &ModelSpace {
        &self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ClosedFactorData, WarpingProfile};
    use std::f64::consts::PI;

    fn euclid3() -> ModelSpace {
        ModelSpace::new(
            ClosedFactorData::point(),
            2,
            WarpingProfile::linear(0.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn newtonian_potential() {
        let m = euclid3();
        let s = ModeSolver::new(&m, 0.0).unwrap();
        let radii = [0.01, 0.3, 1.0, 7.5];
        let p = s.sample(&radii).unwrap();
        for (i, r) in radii.iter().enumerate() {
            let want = 1.0 / (m.a_m() * 4.0 * PI * r);
            assert!((p.value(i) / want - 1.0).abs() < 1e-9, "r={r}");
        }
        assert!((s.singular_strength / template_coefficient(&m) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hyperbolic_three_space_closed_form() {
        // S^1 x H^3: each mode is a massive Green function of H^3, g = e^{-sqrt(c^2+V) r}/(4 pi a_m sinh r)
        let m = ModelSpace::new(
            ClosedFactorData::round_sphere(1, 1.0).unwrap(),
            2,
            WarpingProfile::sinh_c(1.0, 0.0).unwrap(),
        )
        .unwrap();
        for l in [0usize, 1, 5, 40] {
            let mu = (l * l) as f64;
            let s = ModeSolver::new(&m, mu).unwrap();
            let v = mu + m.asymptotic_scal(ScalBound::Inf) / m.a_m();
            let radii = [0.02, 0.2, 1.0, 3.0];
            let p = s.sample(&radii).unwrap();
            for (i, r) in radii.iter().enumerate() {
                let want = (-(1.0 + v).sqrt() * r).exp() / (4.0 * PI * m.a_m() * r.sinh());
                assert!(
                    (p.value(i) / want - 1.0).abs() < 1e-9,
                    "l={l} r={r}: {} vs {want}",
                    p.value(i)
                );
            }
        }
    }

    #[test]
    fn log_singularity_for_one_dimensional_fiber() {
        let m = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, 1.0).unwrap();
        let s = ModeSolver::new(&m, 6.0).unwrap();
        assert!((s.singular_strength / template_coefficient(&m) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_unsupported_models() {
        let m = ModelSpace::new(
            ClosedFactorData::round_sphere(2, 1.0).unwrap(),
            1,
            WarpingProfile::sinh_c(1.0, 0.5).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            ModeSolver::new(&m, 0.0),
            Err(Error::InvalidModel(_))
        ));
    }
}
