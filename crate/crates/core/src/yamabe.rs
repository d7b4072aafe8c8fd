//! Yamabe quotients `Q*(u) = int u L_g u / ||u||_p^2` of test functions on the
//! model spaces, and the Schoen-type test functions built from the Green function.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    conformal_coefficient, critical_exponent, unit_sphere_volume, ModelSpace, ScalBound,
};
use crate::green::{
    leading_reference, schouten_eigenvalues, FieldSample, GreenField, GreenModeTable, MassEstimate,
};

/// Relative change allowed when the quadrature resolution is doubled.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

/// `Q*(S^m) = m(m-1) vol(S^m)^{2/m}`.
pub fn q_star_sphere(m: usize) -> Result<f64> {
    if m < 3 {
        return Err(Error::InvalidDimension(format!(
            "Q*(S^m) needs m >= 3, got {m}"
        )));
    }
    let mf = m as f64;
    Ok(mf * (mf - 1.0) * unit_sphere_volume(m).powf(2.0 / mf))
}

/// `c^{2/m} Q*(S^m)`, the value of `Q*` on `S^1 x H_c^{m-1}`; a lower bound for
/// every quotient computed there.
pub fn scaling_reference(m: usize, c: f64) -> Result<f64> {
    Ok(c.powf(2.0 / m as f64) * q_star_sphere(m)?)
}

/// How the numerator `int u L_g u` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyForm {
    /// `int a_m |du|^2 + scal u^2` over the support.
    Dirichlet,
    /// `int u (a_m Delta u + scal u)` pointwise over the support; needs `u''`.
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    pub numerator: f64,
    /// `||u||_p^2`.
    pub denominator: f64,
    pub quotient: f64,
    /// `Q*(S^m)`.
    pub reference: f64,
    /// `reference - quotient`; positive when the quotient lies strictly below the sphere value.
    pub strict_gap: f64,
    /// Relative change of the quotient under doubling of the quadrature nodes.
    pub resolution_change: f64,
}

impl QuotientReport {
    fn new(
        numerator: f64,
        norm_integral: f64,
        p: f64,
        reference: f64,
        coarse: f64,
    ) -> Result<Self> {
        let denominator = norm_integral.powf(2.0 / p);
        if !(denominator > 0.0) || !numerator.is_finite() {
            return Err(Error::QuadratureNotConverged(format!(
                "degenerate integrals (numerator {numerator}, ||u||_p^2 = {denominator})"
            )));
        }
        let quotient = numerator / denominator;
        let resolution_change = ((quotient - coarse) / quotient).abs();
        if !(resolution_change < QUADRATURE_TOLERANCE) {
            return Err(Error::QuadratureNotConverged(format!(
                "doubling the nodes moved the quotient from {coarse} to {quotient}"
            )));
        }
        Ok(Self {
            numerator,
            denominator,
            quotient,
            reference,
            strict_gap: reference - quotient,
            resolution_change,
        })
    }

    pub fn relative_gap(&self) -> f64 {
        self.strict_gap / self.reference
    }
}

/// Quotient of the constant function on the round unit `S^m`, integrated in
/// polar coordinates `omega_{m-1} sin^{m-1}`.
pub fn sphere_constant_quotient(m: usize) -> Result<QuotientReport> {
    let reference = q_star_sphere(m)?;
    let mf = m as f64;
    let vol = |nodes: usize| {
        panels(0.0, PI, 8)
            .iter()
            .map(|&(a, b)| integrate(nodes, a, b, |t| t.sin().powi(m as i32 - 1)))
            .sum::<f64>()
            * unit_sphere_volume(m - 1)
    };
    let scal = mf * (mf - 1.0);
    let p = critical_exponent(m);
    let (fine, coarse) = (vol(32), vol(16));
    let q_coarse = scal * coarse / coarse.powf(2.0 / p);
    QuotientReport::new(scal * fine, fine, p, reference, q_coarse)
}

/// `[u, u', u'']` as a function of the fiber distance `r`.
pub type ProfileFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// Function of the fiber distance alone, supported in `[start, end]`.
#[derive(Clone)]
pub struct FiberProfile {
    profile: ProfileFn,
    pub start: f64,
    pub end: f64,
    /// Interior points where `u` is only Lipschitz; quadrature panels break there.
    pub kinks: Vec<f64>,
    /// Length scale of the profile; panels are no wider than `scale / 4`.
    pub scale: f64,
}

impl std::fmt::Debug for FiberProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiberProfile")
            .field("start", &self.start)
            .field("end", &self.end)
            .field("kinks", &self.kinks)
            .field("scale", &self.scale)
            .finish()
    }
}

impl FiberProfile {
    pub fn new(
        profile: ProfileFn,
        start: f64,
        end: f64,
        kinks: Vec<f64>,
        scale: f64,
    ) -> Result<Self> {
        if !(start >= 0.0 && end > start && end.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "support [{start}, {end}] is empty or unbounded"
            )));
        }
        if kinks.iter().any(|k| !(*k > start && *k < end)) {
            return Err(Error::InvalidModel(
                "kinks must lie inside the support".into(),
            ));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidModel(format!(
                "profile scale {scale} must be positive"
            )));
        }
        Ok(Self {
            profile,
            start,
            end,
            kinks,
            scale,
        })
    }

    /// Euclidean bubble `eps^{(m-2)/2} (eps^2 + r^2)^{(2-m)/2}` restricted to `r <= cut`.
    pub fn bubble(m: usize, eps: f64, cut: f64) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidDimension(format!(
                "bubble needs m >= 3, got {m}"
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidModel(format!(
                "bubble scale {eps} must be positive"
            )));
        }
        let mf = m as f64;
        let amp = eps.powf((mf - 2.0) / 2.0);
        let profile: ProfileFn = Arc::new(move |r: f64| {
            let q = eps * eps + r * r;
            let u = amp * q.powf((2.0 - mf) / 2.0);
            let du = amp * (2.0 - mf) * r * q.powf(-mf / 2.0);
            let d2u = amp * (2.0 - mf) * q.powf(-mf / 2.0 - 1.0) * (q - mf * r * r);
            [u, du, d2u]
        });
        let kinks = [eps, 4.0 * eps, 16.0 * eps]
            .into_iter()
            .filter(|k| *k < cut)
            .collect();
        Self::new(profile, 0.0, cut, kinks, cut.min(16.0 * eps))
    }

    /// Scales the profile by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        let inner = self.profile.clone();
        let mut out = self.clone();
        out.profile = Arc::new(move |r| inner(r).map(|v| t * v));
        out
    }

    pub fn eval(&self, r: f64) -> [f64; 3] {
        (self.profile)(r)
    }
}

/// Test functions accepted by [`quotient`].
#[derive(Debug, Clone)]
pub enum RadialTestFunction {
    /// Depends on the fiber distance only.
    Fiber(FiberProfile),
    /// Depends on the distance to the pole in `S^n x H_c^{k+1}`.
    Schoen(SchoenFunction),
}

fn gauss_rule(nodes: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(nodes).expect("at least one node"))
        .as_node_weight_pairs()
        .to_vec()
}

fn integrate(nodes: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_rule(nodes)
        .iter()
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

fn panels(a: f64, b: f64, count: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / count as f64;
    (0..count)
        .map(|i| {
            (
                a + h * i as f64,
                if i + 1 == count {
                    b
                } else {
                    a + h * (i + 1) as f64
                },
            )
        })
        .collect()
}

/// Evaluates `Q*(u)` on `model`. Fiber profiles need a factor of constant scalar
/// curvature; Schoen functions are integrated over `(s, r)` with `s` the arclength on `S^n`.
pub fn quotient(
    model: &ModelSpace,
    u: &RadialTestFunction,
    form: EnergyForm,
) -> Result<QuotientReport> {
    match u {
        RadialTestFunction::Fiber(profile) => fiber_quotient(model, profile, form),
        RadialTestFunction::Schoen(f) => {
            if form != EnergyForm::Dirichlet {
                return Err(Error::UnsupportedNonRadial(
                    "Schoen functions are only Lipschitz; use the Dirichlet form".into(),
                ));
            }
            let mut out = schoen_quotients(model, &f.table, &[f.eps], &f.config)?;
            Ok(out.remove(0).1)
        }
    }
}

fn fiber_quotient(
    model: &ModelSpace,
    u: &FiberProfile,
    form: EnergyForm,
) -> Result<QuotientReport> {
    if !model.factor.has_constant_scal() {
        return Err(Error::UnsupportedNonRadial(format!(
            "scal_N varies in [{}, {}]; a fiber profile does not see its average",
            model.factor.scal_inf, model.factor.scal_sup
        )));
    }
    let a = model.profile.a();
    if u.start < a {
        return Err(Error::DomainError {
            r: u.start,
            lower: a,
        });
    }
    let m = model.m();
    let reference = q_star_sphere(m)?;
    let am = model.a_m();
    let p = model.p();
    let k = model.k as i32;
    let weight = model.factor.volume * unit_sphere_volume(model.k);
    let mut breaks = vec![u.start];
    breaks.extend(u.kinks.iter().copied());
    breaks.push(u.end);
    breaks.sort_by(f64::total_cmp);
    let mut pieces = Vec::new();
    for w in breaks.windows(2) {
        let count = ((w[1] - w[0]) / (0.25 * u.scale)).ceil().max(1.0) as usize;
        pieces.extend(panels(w[0], w[1], count));
    }
    let run = |nodes: usize| -> Result<(f64, f64)> {
        let rule = gauss_rule(nodes);
        let (mut num, mut norm) = (0.0, 0.0);
        for &(lo, hi) in &pieces {
            let half = 0.5 * (hi - lo);
            for (x, w) in &rule {
                let r = 0.5 * (lo + hi) + half * x;
                let [v, dv, d2v] = u.eval(r);
                let dvol = w * half * weight * model.profile.f(r).powi(k);
                let scal = model.scalar_curvature(r, ScalBound::Inf)?;
                let energy = match form {
                    EnergyForm::Dirichlet => am * dv * dv + scal * v * v,
                    EnergyForm::Operator => {
                        let lap = d2v + model.k as f64 * model.profile.log_derivative(r) * dv;
                        v * (-am * lap + scal * v)
                    }
                };
                num += energy * dvol;
                norm += v.abs().powf(p) * dvol;
            }
        }
        Ok((num, norm))
    };
    let (nc, dc) = run(16)?;
    let (nf, df) = run(32)?;
    QuotientReport::new(nf, df, p, reference, nc / dc.powf(2.0 / p))
}

/// Parameters of the Schoen construction and its quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchoenConfig {
    /// Bubble region `rho <= rho0`.
    pub rho0: f64,
    /// Green region `rho >= rho1`; linear blend in between.
    pub rho1: f64,
    /// Truncation level relative to the maximum `eps^{(2-m)/2}`.
    pub cutoff: f64,
    /// Fiber radius below which `Gamma` is continued evenly.
    pub continuation_radius: f64,
    /// Gauss-Legendre nodes per panel (doubled for the convergence check).
    pub nodes: usize,
    /// Angular panels on each side of the corner ray.
    pub angular_panels: usize,
    /// Multiply the bubble by the second-order conformal factor of the pole.
    pub conformal_bubble: bool,
    /// Upper bound on the fiber extent of the support.
    pub r_max_cap: f64,
}

impl Default for SchoenConfig {
    fn default() -> Self {
        Self {
            rho0: 0.05,
            rho1: 0.1,
            cutoff: 1e-8,
            continuation_radius: 0.01,
            nodes: 10,
            angular_panels: 2,
            conformal_bubble: true,
            r_max_cap: 60.0,
        }
    }
}

impl SchoenConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho1 > self.rho0) {
            return Err(Error::GluingMismatch(format!(
                "gluing radii need 0 < rho0 < rho1, got ({}, {})",
                self.rho0, self.rho1
            )));
        }
        if !(self.continuation_radius > 0.0 && self.continuation_radius < self.rho0) {
            return Err(Error::Config(
                "continuation radius must lie in (0, rho0)".into(),
            ));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) || self.nodes < 2 || self.angular_panels == 0 {
            return Err(Error::Config(
                "cutoff in (0, 1), nodes >= 2 and angular_panels >= 1 required".into(),
            ));
        }
        Ok(())
    }
}

/// Default sweep `eps = 2^-j`, `j = 3..=12`.
pub fn default_epsilons() -> Vec<f64> {
    (3..=12).map(|j| 2f64.powi(-j)).collect()
}

/// Bubble of scale `eps` near the pole glued to `delta0 Gamma` away from it.
#[derive(Debug, Clone)]
pub struct SchoenFunction {
    pub eps: f64,
    /// Amplitude of the Green part, `eps^{(m-2)/2} / a` with `a` the leading coefficient of `Gamma`.
    pub delta0: f64,
    /// Absolute truncation level.
    pub cut: f64,
    pub config: SchoenConfig,
    table: Arc<GreenModeTable>,
    m: usize,
    schouten: (f64, f64),
}

/// Builds the Schoen test function; the mass estimate must be positive beyond its uncertainty.
pub fn schoen_test(
    model: &ModelSpace,
    table: Arc<GreenModeTable>,
    mass: &MassEstimate,
    eps: f64,
    config: &SchoenConfig,
) -> Result<SchoenFunction> {
    if !(mass.mass_term > mass.uncertainty) {
        return Err(Error::MassNotPositive {
            mass: mass.mass_term,
            uncertainty: mass.uncertainty,
        });
    }
    SchoenFunction::new(model, table, eps, config)
}

impl SchoenFunction {
    fn new(
        model: &ModelSpace,
        table: Arc<GreenModeTable>,
        eps: f64,
        config: &SchoenConfig,
    ) -> Result<Self> {
        config.validate()?;
        let t = &table.model;
        if t.factor != model.factor
            || t.k != model.k
            || t.c() != model.c()
            || t.profile.kind() != model.profile.kind()
        {
            return Err(Error::InvalidModel(
                "Green table belongs to a different model".into(),
            ));
        }
        if model.factor.n == 0 || model.factor.sphere_radius().is_none() {
            return Err(Error::UnsupportedNonRadial(
                "Schoen functions need a round sphere factor".into(),
            ));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidModel(format!(
                "bubble scale {eps} must be positive"
            )));
        }
        let m = model.m();
        let half = (m as f64 - 2.0) / 2.0;
        Ok(Self {
            eps,
            delta0: eps.powf(half) / leading_reference(m),
            cut: config.cutoff * eps.powf(-half),
            config: config.clone(),
            table,
            m,
            schouten: if config.conformal_bubble {
                schouten_eigenvalues(model)
            } else {
                (0.0, 0.0)
            },
        })
    }

    /// The bubble part with gradient `[u, u_s, u_r]`.
    pub fn bubble(&self, s: f64, r: f64) -> [f64; 3] {
        let mf = self.m as f64;
        let eps = self.eps;
        let rho = s.hypot(r);
        let (pn, ph) = self.schouten;
        let pv = pn * s * s + ph * r * r;
        let phi = ((mf - 2.0) * pv / 4.0).exp();
        let stretch = 1.0 + pv / 6.0;
        let x = rho * stretch;
        let amp = eps.powf((mf - 2.0) / 2.0);
        let b = amp * (eps * eps + x * x).powf((2.0 - mf) / 2.0);
        let db = amp * (2.0 - mf) * x * (eps * eps + x * x).powf(-mf / 2.0);
        let (xs, xr) = if rho > 0.0 {
            (
                s / rho * stretch + rho * pn * s / 3.0,
                r / rho * stretch + rho * ph * r / 3.0,
            )
        } else {
            (0.0, 0.0)
        };
        let c = (mf - 2.0) / 2.0;
        [
            phi * b,
            phi * (c * pn * s * b + db * xs),
            phi * (c * ph * r * b + db * xr),
        ]
    }

    /// Glued and truncated value with gradient; `gamma` is needed once `rho >= rho0`.
    pub fn value(&self, s: f64, r: f64, gamma: Option<FieldSample>) -> Result<[f64; 3]> {
        let rho = s.hypot(r);
        let (rho0, rho1) = (self.config.rho0, self.config.rho1);
        let glued = if rho < rho0 {
            self.bubble(s, r)
        } else {
            let g = gamma
                .ok_or_else(|| Error::GluingMismatch(format!("Gamma missing at rho = {rho}")))?;
            let green = [
                self.delta0 * g.value,
                self.delta0 * g.d_s,
                self.delta0 * g.d_r,
            ];
            if !(green[0] > 0.0) || !green.iter().all(|v| v.is_finite()) {
                return Err(Error::GluingMismatch(format!(
                    "Gamma = {} is not positive at rho = {rho}",
                    g.value
                )));
            }
            if rho >= rho1 {
                green
            } else {
                let b = self.bubble(s, r);
                let t = (rho - rho0) / (rho1 - rho0);
                let jump = green[0] - b[0];
                let dt = 1.0 / (rho * (rho1 - rho0));
                [
                    (1.0 - t) * b[0] + t * green[0],
                    (1.0 - t) * b[1] + t * green[1] + jump * s * dt,
                    (1.0 - t) * b[2] + t * green[2] + jump * r * dt,
                ]
            }
        };
        Ok(if glued[0] > self.cut {
            [glued[0] - self.cut, glued[1], glued[2]]
        } else {
            [0.0; 3]
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    s: f64,
    r: f64,
    /// Quadrature weight times the volume density.
    w: f64,
}

struct Layout {
    inner: Vec<Node>,
    outer: Vec<Node>,
}

fn layout(
    model: &ModelSpace,
    config: &SchoenConfig,
    r_max: f64,
    eps_min: f64,
    nodes: usize,
) -> Layout {
    let radius = model.factor.sphere_radius().expect("round factor");
    let n = model.factor.n;
    let s_max = PI * radius;
    let corner = (r_max / s_max).atan();
    let rule = gauss_rule(nodes);
    let mut angles = Vec::new();
    for (a, b) in panels(0.0, corner, config.angular_panels)
        .into_iter()
        .chain(panels(corner, PI / 2.0, config.angular_panels))
    {
        let half = 0.5 * (b - a);
        angles.extend(
            rule.iter()
                .map(|(x, w)| (0.5 * (a + b) + half * x, w * half)),
        );
    }
    let mut inner_radial = vec![];
    let mut b = config.rho0;
    while b > eps_min / 64.0 {
        inner_radial.push((0.5 * b, b));
        b *= 0.5;
    }
    inner_radial.push((0.0, b));
    let k = model.k as i32;
    let density = |s: f64, r: f64| {
        unit_sphere_volume(n - 1)
            * (radius * (s / radius).sin()).powi(n as i32 - 1)
            * unit_sphere_volume(model.k)
            * model.profile.f(r).powi(k)
    };
    let mut out = Layout {
        inner: vec![],
        outer: vec![],
    };
    for &(psi, wpsi) in &angles {
        let (sin, cos) = psi.sin_cos();
        let rho_max = (s_max / cos).min(r_max / sin);
        let mut outer_radial = vec![(config.rho0, config.rho1)];
        let mut b = config.rho1;
        while b < rho_max {
            let next = if 2.0 * b > rho_max - 0.5 * b {
                rho_max
            } else {
                2.0 * b
            };
            outer_radial.push((b, next));
            b = next;
        }
        for (pieces, dest) in [
            (&inner_radial, &mut out.inner),
            (&outer_radial, &mut out.outer),
        ] {
            for &(lo, hi) in pieces {
                let half = 0.5 * (hi - lo);
                for (x, w) in &rule {
                    let rho = 0.5 * (lo + hi) + half * x;
                    let (s, r) = ((rho * cos).min(s_max), rho * sin);
                    dest.push(Node {
                        s,
                        r,
                        w: wpsi * w * half * rho * density(s, r),
                    });
                }
            }
        }
    }
    out
}

/// Fiber extent beyond which `delta0 Gamma` stays under the cutoff for every `eps <= eps_max`.
fn support_extent(
    field: &GreenField,
    config: &SchoenConfig,
    m: usize,
    eps_max: f64,
) -> Result<f64> {
    let a = leading_reference(m);
    let threshold = 1e-2 * config.cutoff * a * eps_max.powf(2.0 - m as f64);
    let radii: Vec<f64> = (1..)
        .map(|i| 0.5 * i as f64)
        .take_while(|r| *r <= config.r_max_cap)
        .collect();
    let pts: Vec<(f64, f64)> = radii.iter().map(|r| (0.0, *r)).collect();
    let vals = field.evaluate(&pts)?;
    Ok(radii
        .iter()
        .zip(&vals)
        .find(|(r, v)| **r > config.rho1 && v.value < threshold)
        .map(|(r, _)| *r)
        .unwrap_or(config.r_max_cap))
}

fn integrate_schoen(
    u: &SchoenFunction,
    lay: &Layout,
    gamma: &[FieldSample],
    scal: f64,
    am: f64,
    p: f64,
) -> Result<(f64, f64)> {
    let (mut num, mut norm) = (0.0, 0.0);
    let inner = lay.inner.iter().map(|nd| (nd, None));
    let outer = lay.outer.iter().zip(gamma).map(|(nd, g)| (nd, Some(*g)));
    for (nd, g) in inner.chain(outer) {
        let [v, vs, vr] = u.value(nd.s, nd.r, g)?;
        if v == 0.0 {
            continue;
        }
        num += nd.w * (am * (vs * vs + vr * vr) + scal * v * v);
        norm += nd.w * v.powf(p);
    }
    Ok((num, norm))
}

/// Dirichlet-form quotients of the Schoen functions for each `eps`, returned in input order.
/// The Green field is evaluated once per resolution and shared across the sweep.
pub fn schoen_quotients(
    model: &ModelSpace,
    table: &Arc<GreenModeTable>,
    epsilons: &[f64],
    config: &SchoenConfig,
) -> Result<Vec<(f64, QuotientReport)>> {
    config.validate()?;
    if epsilons.is_empty() {
        return Err(Error::Config("empty eps sweep".into()));
    }
    let functions: Vec<SchoenFunction> = epsilons
        .iter()
        .map(|e| SchoenFunction::new(model, table.clone(), *e, config))
        .collect::<Result<_>>()?;
    let m = model.m();
    let reference = q_star_sphere(m)?;
    let field = GreenField::new(table, config.continuation_radius)?;
    let eps_max = epsilons.iter().copied().fold(0.0, f64::max);
    let eps_min = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = support_extent(&field, config, m, eps_max)?;
    let scal = model.scalar_curvature(1.0, ScalBound::Inf)?;
    let am = conformal_coefficient(m);
    let p = critical_exponent(m);

    let mut per_resolution = Vec::new();
    for nodes in [config.nodes, 2 * config.nodes] {
        let lay = layout(model, config, r_max, eps_min, nodes);
        let pts: Vec<(f64, f64)> = lay.outer.iter().map(|nd| (nd.s, nd.r)).collect();
        let gamma = field.evaluate(&pts)?;
        let sums: Vec<(f64, f64)> = functions
            .par_iter()
            .map(|u| integrate_schoen(u, &lay, &gamma, scal, am, p))
            .collect::<Result<_>>()?;
        per_resolution.push(sums);
    }
    epsilons
        .iter()
        .zip(per_resolution[0].iter().zip(&per_resolution[1]))
        .map(|(eps, ((nc, dc), (nf, df)))| {
            QuotientReport::new(*nf, *df, p, reference, nc / dc.powf(2.0 / p))
                .map(|q| (*eps, q))
                .map_err(|e| match e {
                    Error::QuadratureNotConverged(msg) => {
                        Error::QuadratureNotConverged(format!("eps = {eps}: {msg}"))
                    }
                    other => other,
                })
        })
        .collect()
}

/// Outcome of an eps sweep against `Q*(S^m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum YamabeVerdict {
    StrictlyBelowSphere,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub report: QuotientReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub reference: f64,
    pub points: Vec<SweepPoint>,
    pub minimum_eps: f64,
    pub minimum_quotient: f64,
    /// `(reference - minimum) / reference`.
    pub minimum_relative_gap: f64,
    /// Whether the quotient decreases, increases or neither as `eps` shrinks.
    pub trend: String,
    pub verdict: YamabeVerdict,
}

/// Runs [`schoen_quotients`] after checking that the mass is positive. The verdict
/// is strict only if the minimum lies below the reference by more than `margin`
/// (relative) and by more than its own quadrature change.
pub fn schoen_sweep(
    model: &ModelSpace,
    table: &Arc<GreenModeTable>,
    mass: &MassEstimate,
    epsilons: &[f64],
    config: &SchoenConfig,
    margin: f64,
) -> Result<SweepReport> {
    if !(mass.mass_term > mass.uncertainty) {
        return Err(Error::MassNotPositive {
            mass: mass.mass_term,
            uncertainty: mass.uncertainty,
        });
    }
    let results = schoen_quotients(model, table, epsilons, config)?;
    let reference = results[0].1.reference;
    let best = results
        .iter()
        .min_by(|a, b| a.1.quotient.total_cmp(&b.1.quotient))
        .expect("nonempty sweep");
    let gap = best.1.relative_gap();
    let verdict = if gap > margin.max(best.1.resolution_change) {
        YamabeVerdict::StrictlyBelowSphere
    } else {
        YamabeVerdict::Inconclusive
    };
    let mut by_eps: Vec<&(f64, QuotientReport)> = results.iter().collect();
    by_eps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let steps: Vec<f64> = by_eps
        .windows(2)
        .map(|w| w[1].1.quotient - w[0].1.quotient)
        .collect();
    let trend = if steps.iter().all(|d| *d < 0.0) {
        "decreasing"
    } else if steps.iter().all(|d| *d > 0.0) {
        "increasing"
    } else {
        "mixed"
    };
    Ok(SweepReport {
        reference,
        minimum_eps: best.0,
        minimum_quotient: best.1.quotient,
        minimum_relative_gap: gap,
        trend: trend.into(),
        verdict,
        points: results
            .into_iter()
            .map(|(eps, report)| SweepPoint { eps, report })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ClosedFactorData, WarpingProfile};

    #[test]
    fn sphere_constants() {
        assert!((q_star_sphere(3).unwrap() - 6.0 * (2.0 * PI * PI).powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((q_star_sphere(4).unwrap() - 12.0 * (8.0 * PI * PI / 3.0).sqrt()).abs() < 1e-12);
        assert!(matches!(q_star_sphere(2), Err(Error::InvalidDimension(_))));
        assert!((scaling_reference(4, 1.0).unwrap() - q_star_sphere(4).unwrap()).abs() < 1e-15);
        for m in 3..8 {
            let r = sphere_constant_quotient(m).unwrap();
            assert!(
                (r.quotient / q_star_sphere(m).unwrap() - 1.0).abs() < 1e-10,
                "m={m}"
            );
        }
    }

    #[test]
    fn bubble_derivatives() {
        let b = FiberProfile::bubble(4, 0.3, 10.0).unwrap();
        let h = 1e-5;
        for r in [0.1, 0.7, 3.0] {
            let [_, d, d2] = b.eval(r);
            let fd = (b.eval(r + h)[0] - b.eval(r - h)[0]) / (2.0 * h);
            let fd2 = (b.eval(r + h)[1] - b.eval(r - h)[1]) / (2.0 * h);
            assert!((d - fd).abs() < 1e-8 && (d2 - fd2).abs() < 1e-7);
        }
    }

    #[test]
    fn euclidean_bubble_operator_form() {
        for m in 3..=5 {
            let model = ModelSpace::new(
                ClosedFactorData::point(),
                m - 1,
                WarpingProfile::linear(0.0).unwrap(),
            )
            .unwrap();
            let u = RadialTestFunction::Fiber(FiberProfile::bubble(m, 1.0, 10.0).unwrap());
            let q = quotient(&model, &u, EnergyForm::Operator).unwrap();
            assert!(q.relative_gap().abs() < 0.01, "m={m}: {}", q.quotient);
        }
    }

    #[test]
    fn schoen_pieces_are_continuous() {
        let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, 0.5).unwrap();
        let table = Arc::new(GreenModeTable::build(&model, 2, &[1.0]).unwrap());
        let cfg = SchoenConfig::default();
        let u = SchoenFunction::new(&model, table, 0.01, &cfg).unwrap();
        let g = FieldSample {
            value: 30.0,
            d_s: -500.0,
            d_r: -400.0,
        };
        let (s, r) = (0.6 * cfg.rho0, 0.8 * cfg.rho0);
        let inside = u.bubble(s, r);
        let at = u.value(s, r, Some(g)).unwrap();
        assert!((inside[0] - u.cut - at[0]).abs() < 1e-12 * at[0]);
        let (s1, r1) = (0.6 * cfg.rho1, 0.8 * cfg.rho1);
        let at1 = u.value(s1, r1, Some(g)).unwrap();
        let below = u
            .value(s1 * (1.0 - 1e-15), r1 * (1.0 - 1e-15), Some(g))
            .unwrap();
        assert!((at1[0] - below[0]).abs() < 1e-12 * at1[0]);
        assert!((at1[0] - (u.delta0 * 30.0 - u.cut)).abs() < 1e-12 * at1[0]);
    }
}
