//! Warped-product model ends `N x S^k x (a, inf)` with metric
//! `g_N + f(r)^2 sigma^k + dr^2`, and their closed-form curvature data.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::EigenvalueEntry;

/// Volume of the unit round sphere `S^n` (so `omega(1) = 2 pi`, `omega(2) = 4 pi`).
pub fn unit_sphere_volume(n: usize) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * unit_sphere_volume(n - 2),
    }
}

/// Coefficient `a_m = 4(m-1)/(m-2)` of the conformal Laplacian.
pub fn conformal_coefficient(m: usize) -> f64 {
    4.0 * (m as f64 - 1.0) / (m as f64 - 2.0)
}

/// Critical Sobolev exponent `p = 2m/(m-2)`.
pub fn critical_exponent(m: usize) -> f64 {
    2.0 * m as f64 / (m as f64 - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    SinhC,
    Linear,
    Custom,
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied warping function together with its first two derivatives.
#[derive(Clone)]
pub struct CustomWarp {
    pub f: RealFn,
    pub df: RealFn,
    pub d2f: RealFn,
}

/// The warping function `f` on `[a, inf)`.
#[derive(Clone)]
pub struct WarpingProfile {
    kind: ProfileKind,
    c: f64,
    a: f64,
    custom: Option<CustomWarp>,
}

impl fmt::Debug for WarpingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpingProfile")
            .field("kind", &self.kind)
            .field("c", &self.c)
            .field("a", &self.a)
            .finish()
    }
}

impl WarpingProfile {
    /// `f(r) = sinh(c r)/c`, and `f(r) = r` when `c = 0`.
    pub fn sinh_c(c: f64, a: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidModel(format!(
                "curvature scale c = {c} must be >= 0"
            )));
        }
        if c == 0.0 {
            return Self::linear(a);
        }
        let p = Self {
            kind: ProfileKind::SinhC,
            c,
            a,
            custom: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// `f(r) = r`, the `c = 0` member of the family.
    pub fn linear(a: f64) -> Result<Self> {
        let p = Self {
            kind: ProfileKind::Linear,
            c: 0.0,
            a,
            custom: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn custom(c: f64, a: f64, warp: CustomWarp) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "curvature scale c = {c} must be >= 0"
            )));
        }
        let p = Self {
            kind: ProfileKind::Custom,
            c,
            a,
            custom: Some(warp),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    /// Asymptotic curvature scale `c` (`f''/f -> c^2`).
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn f(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::SinhC => (self.c * r).sinh() / self.c,
            ProfileKind::Linear => r,
            ProfileKind::Custom => (self.custom.as_ref().expect("custom warp").f)(r),
        }
    }

    pub fn df(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::SinhC => (self.c * r).cosh(),
            ProfileKind::Linear => 1.0,
            ProfileKind::Custom => (self.custom.as_ref().expect("custom warp").df)(r),
        }
    }

    pub fn d2f(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::SinhC => self.c * (self.c * r).sinh(),
            ProfileKind::Linear => 0.0,
            ProfileKind::Custom => (self.custom.as_ref().expect("custom warp").d2f)(r),
        }
    }

    /// `f'/f`, evaluated without overflow for large `c r`.
    pub fn log_derivative(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::SinhC => self.c / (self.c * r).tanh(),
            ProfileKind::Linear => 1.0 / r,
            ProfileKind::Custom => self.df(r) / self.f(r),
        }
    }

    /// `f''/f`.
    pub fn second_log_ratio(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::SinhC => self.c * self.c,
            ProfileKind::Linear => 0.0,
            ProfileKind::Custom => self.d2f(r) / self.f(r),
        }
    }

    /// `ln f(r)`, stable for large `c r`.
    pub fn ln_f(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::SinhC => {
                let x = self.c * r;
                if x > 20.0 {
                    x - std::f64::consts::LN_2 - self.c.ln() + (-(-2.0 * x).exp()).ln_1p()
                } else {
                    (x.sinh() / self.c).ln()
                }
            }
            ProfileKind::Linear => r.ln(),
            ProfileKind::Custom => self.f(r).ln(),
        }
    }

    /// Checks positivity of `f` on a sampled grid over `(a, a + 50]`.
    fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::InvalidModel("left endpoint a must be finite".into()));
        }
        for i in 1..=500 {
            let r = self.a + 0.1 * i as f64;
            let v = self.f(r);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveWarp { r, value: v });
            }
        }
        Ok(())
    }

    pub(crate) fn check_domain(&self, r: f64) -> Result<()> {
        if !(r > self.a) || !r.is_finite() {
            return Err(Error::DomainError { r, lower: self.a });
        }
        let v = self.f(r);
        if !(v > 0.0) {
            return Err(Error::NonPositiveWarp { r, value: v });
        }
        Ok(())
    }
}

/// Where the Laplace spectrum of `N` comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LaplaceSpectrumSource {
    RoundSphere { radius: f64 },
    ExplicitList(Vec<EigenvalueEntry>),
}

/// Summary data of the closed factor `N`: curvature bounds, Dirac bottom and spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFactorData {
    pub n: usize,
    pub scal_inf: f64,
    pub scal_sup: f64,
    /// `lambda_N >= 0`, with `lambda_N^2` the bottom of the spectrum of `(D^N)^2`.
    pub lambda_n: f64,
    pub volume: f64,
    pub spectrum: LaplaceSpectrumSource,
}

/// Which of the two scalar-curvature bounds of `N` stands in for `scal_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalBound {
    Inf,
    Sup,
}

impl ClosedFactorData {
    /// Round sphere of the given radius (sectional curvature `1/radius^2`).
    /// For `n = 0` this is a single point of unit volume.
    pub fn round_sphere(n: usize, radius: f64) -> Result<Self> {
        if n == 0 {
            return Ok(Self::point());
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidModel(format!(
                "sphere radius {radius} must be positive"
            )));
        }
        let curv = 1.0 / (radius * radius);
        let scal = (n * (n - 1)) as f64 * curv;
        Ok(Self {
            n,
            scal_inf: scal,
            scal_sup: scal,
            lambda_n: 0.5 * n as f64 / radius,
            volume: unit_sphere_volume(n) * radius.powi(n as i32),
            spectrum: LaplaceSpectrumSource::RoundSphere { radius },
        })
    }

    /// The zero-dimensional factor.
    pub fn point() -> Self {
        Self {
            n: 0,
            scal_inf: 0.0,
            scal_sup: 0.0,
            lambda_n: 0.0,
            volume: 1.0,
            spectrum: LaplaceSpectrumSource::ExplicitList(vec![EigenvalueEntry {
                value: 0.0,
                multiplicity: 1,
            }]),
        }
    }

    /// Factor described only by curvature bounds, Dirac bottom and an explicit spectrum.
    pub fn explicit(
        n: usize,
        scal_inf: f64,
        scal_sup: f64,
        lambda_n: f64,
        volume: f64,
        spectrum: Vec<EigenvalueEntry>,
    ) -> Result<Self> {
        crate::spectra::validate_entries(&spectrum)?;
        let data = Self {
            n,
            scal_inf,
            scal_sup,
            lambda_n,
            volume,
            spectrum: LaplaceSpectrumSource::ExplicitList(spectrum),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scal_inf <= self.scal_sup) {
            return Err(Error::InvalidModel(format!(
                "scal_inf = {} exceeds scal_sup = {}",
                self.scal_inf, self.scal_sup
            )));
        }
        if !(self.lambda_n >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "lambda_N = {} must be >= 0",
                self.lambda_n
            )));
        }
        if !(self.volume > 0.0) {
            return Err(Error::InvalidModel(format!(
                "volume {} must be positive",
                self.volume
            )));
        }
        // Schroedinger-Lichnerowicz: D^2 >= scal/4 on a closed spin manifold.
        if self.lambda_n > 0.0 && self.lambda_n * self.lambda_n < self.scal_inf / 4.0 - 1e-12 {
            return Err(Error::InvalidModel(format!(
                "lambda_N^2 = {} violates the bound scal_inf/4 = {}",
                self.lambda_n * self.lambda_n,
                self.scal_inf / 4.0
            )));
        }
        if let LaplaceSpectrumSource::RoundSphere { radius } = self.spectrum {
            let curv = 1.0 / (radius * radius);
            let scal = (self.n * self.n.saturating_sub(1)) as f64 * curv;
            let tol = 1e-12 * scal.abs().max(1.0);
            if (self.scal_inf - scal).abs() > tol || (self.scal_sup - scal).abs() > tol {
                return Err(Error::InvalidModel(format!(
                    "round sphere of radius {radius} has scal {scal}, data says [{}, {}]",
                    self.scal_inf, self.scal_sup
                )));
            }
            let bottom = 0.5 * self.n as f64 / radius;
            if (self.lambda_n - bottom).abs() > 1e-12 * bottom.max(1.0) {
                return Err(Error::InvalidModel(format!(
                    "round sphere Dirac bottom is {bottom}, data says {}",
                    self.lambda_n
                )));
            }
        }
        Ok(())
    }

    pub fn scal(&self, bound: ScalBound) -> f64 {
        match bound {
            ScalBound::Inf => self.scal_inf,
            ScalBound::Sup => self.scal_sup,
        }
    }

    pub fn has_constant_scal(&self) -> bool {
        self.scal_inf == self.scal_sup
    }

    /// Radius of `N` when it is a round sphere.
    pub fn sphere_radius(&self) -> Option<f64> {
        match self.spectrum {
            LaplaceSpectrumSource::RoundSphere { radius } => Some(radius),
            _ => None,
        }
    }
}

/// The model end `Z = N x S^k x (a, inf)`, `m = n + k + 1`.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    pub factor: ClosedFactorData,
    pub k: usize,
    pub profile: WarpingProfile,
}

impl ModelSpace {
    pub fn new(factor: ClosedFactorData, k: usize, profile: WarpingProfile) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidModel(
                "fiber dimension k must be at least 1".into(),
            ));
        }
        factor.validate()?;
        let m = factor.n + k + 1;
        if m < 3 {
            return Err(Error::InvalidModel(format!(
                "total dimension m = {m} must be >= 3"
            )));
        }
        Ok(Self { factor, k, profile })
    }

    /// `S^n(radius) x H_c^{k+1}` realised globally with `f = sinh_c`, `a = 0`.
    pub fn sphere_times_hyperbolic(n: usize, radius: f64, k: usize, c: f64) -> Result<Self> {
        Self::new(
            ClosedFactorData::round_sphere(n, radius)?,
            k,
            WarpingProfile::sinh_c(c, 0.0)?,
        )
    }

    pub fn m(&self) -> usize {
        self.factor.n + self.k + 1
    }

    pub fn a_m(&self) -> f64 {
        conformal_coefficient(self.m())
    }

    pub fn p(&self) -> f64 {
        critical_exponent(self.m())
    }

    pub fn c(&self) -> f64 {
        self.profile.c()
    }

    /// `scal_g(r) = scal_N + k(k-1) f^-2 - k(k-1) f'^2 f^-2 - 2k f''/f`.
    pub fn scalar_curvature(&self, r: f64, bound: ScalBound) -> Result<f64> {
        self.profile.check_domain(r)?;
        Ok(self.scalar_curvature_unchecked(r, bound))
    }

    pub(crate) fn scalar_curvature_unchecked(&self, r: f64, bound: ScalBound) -> f64 {
        let k = self.k as f64;
        let scal_n = self.factor.scal(bound);
        let p = &self.profile;
        let fiber = match p.kind() {
            // (1 - f'^2)/f^2 = -c^2 exactly for sinh_c
            ProfileKind::SinhC => -p.c() * p.c(),
            ProfileKind::Linear => 0.0,
            ProfileKind::Custom => {
                let f = p.f(r);
                let df = p.df(r);
                (1.0 - df * df) / (f * f)
            }
        };
        scal_n + k * (k - 1.0) * fiber - 2.0 * k * p.second_log_ratio(r)
    }

    /// Limit `s = scal_N - k(k+1)c^2` of `scal_g` along the end.
    pub fn asymptotic_scal(&self, bound: ScalBound) -> f64 {
        let k = self.k as f64;
        let c = self.c();
        self.factor.scal(bound) - k * (k + 1.0) * c * c
    }

    /// Mean curvature `H(r) = f'(r)/f(r)` of the level sets.
    pub fn mean_curvature(&self, r: f64) -> Result<f64> {
        self.profile.check_domain(r)?;
        Ok(self.profile.log_derivative(r))
    }
}
