//! First-order linear systems `x' = (J + G(t)) x` and the two families produced
//! by separating variables on a model end: the scalar conformal-Laplacian modes
//! and the Dirac modes.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{ModelSpace, ScalBound};
use crate::ode::integrator::{integrate_rhs, IntegrateOptions, OdeRhs, Tolerances, Trajectory};

/// Writes `G(t)` row-major into the `d*d` buffer.
pub type Perturbation = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct LinearOdeSystem {
    dim: usize,
    j: Vec<f64>,
    g: Perturbation,
    t0: f64,
}

impl fmt::Debug for LinearOdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOdeSystem")
            .field("dim", &self.dim)
            .field("j", &self.j)
            .field("t0", &self.t0)
            .finish()
    }
}

/// Eigenvalue `re + i im` of a real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl LinearOdeSystem {
    pub fn new(dim: usize, j: Vec<f64>, g: Perturbation, t0: f64) -> Result<Self> {
        if dim == 0 || j.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "constant part has {} entries, expected {}",
                j.len(),
                dim * dim
            )));
        }
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidIntegration(
                "constant part must be finite".into(),
            ));
        }
        Ok(Self { dim, j, g, t0 })
    }

    /// System with `G = 0`.
    pub fn constant(dim: usize, j: Vec<f64>, t0: f64) -> Result<Self> {
        Self::new(dim, j, Arc::new(|_t, g: &mut [f64]| g.fill(0.0)), t0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Constant part, row-major.
    pub fn j(&self) -> &[f64] {
        &self.j
    }

    pub fn perturbation_at(&self, t: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.dim * self.dim];
        (self.g)(t, &mut g);
        g
    }

    pub fn matrix_at(&self, t: f64) -> Vec<f64> {
        let mut g = self.perturbation_at(t);
        for (gi, ji) in g.iter_mut().zip(&self.j) {
            *gi += ji;
        }
        g
    }

    /// Spectral norm of `G(t)`.
    pub fn perturbation_norm(&self, t: f64) -> f64 {
        let g = DMatrix::from_row_slice(self.dim, self.dim, &self.perturbation_at(t));
        g.singular_values().max()
    }

    /// Eigenvalues of `J` ordered by increasing real part (then imaginary part).
    pub fn eigenvalues(&self) -> Vec<Eigenvalue> {
        let j = DMatrix::from_row_slice(self.dim, self.dim, &self.j);
        let mut ev: Vec<Eigenvalue> = j
            .complex_eigenvalues()
            .iter()
            .map(|z| Eigenvalue { re: z.re, im: z.im })
            .collect();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        ev
    }

    /// Real parts of the eigenvalues of `J`, i.e. the predicted asymptotic rates.
    pub fn predicted_rates(&self) -> Vec<f64> {
        self.eigenvalues().iter().map(|e| e.re).collect()
    }

    /// A vector in the real invariant subspace of `J` belonging to the most
    /// negative real part.
    pub fn most_negative_direction(&self) -> Result<Vec<f64>> {
        let ev = self.eigenvalues();
        let scale = ev
            .iter()
            .map(|e| e.re.abs().max(e.im.abs()))
            .fold(1.0, f64::max);
        let tie = 1e-9 * scale;
        let r_min = ev[0].re;
        let group: Vec<&Eigenvalue> = ev.iter().filter(|e| (e.re - r_min).abs() <= tie).collect();
        let im0 = group[0].im.abs();
        if group.iter().any(|e| (e.im.abs() - im0).abs() > tie) {
            return Err(Error::DegenerateSpectrum(format!(
                "{} eigenvalues share real part {r_min}",
                group.len()
            )));
        }
        let gap = ev
            .iter()
            .map(|e| e.re - r_min)
            .filter(|g| *g > tie)
            .fold(f64::INFINITY, f64::min);
        let mut v: Vec<f64> = (0..self.dim).map(|i| 1.0 + 0.37 * i as f64).collect();
        if gap.is_infinite() {
            normalize(&mut v);
            return Ok(v);
        }
        // power iteration with exp(-(J - r_min) tau): the wanted subspace is neutral,
        // every other one contracts by exp(-gap tau)
        let tau = 4.0 / gap;
        let mut shifted = DMatrix::from_row_slice(self.dim, self.dim, &self.j);
        for i in 0..self.dim {
            shifted[(i, i)] -= r_min;
        }
        let prop = expm(&(shifted * (-tau)));
        let mut x = nalgebra::DVector::from_vec(v.clone());
        for _ in 0..25 {
            x = &prop * x;
            let n = x.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::DegenerateSpectrum(
                    "power iteration collapsed".into(),
                ));
            }
            x /= n;
        }
        v.copy_from_slice(x.as_slice());
        Ok(v)
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Matrix exponential by scaling and squaring of a Taylor polynomial.
pub(crate) fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().map(|v| v.abs()).sum::<f64>();
    let mut s = 0;
    let mut scaled = a.clone();
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as i32;
        scaled /= 2f64.powi(s);
    }
    let n = a.nrows();
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

impl OdeRhs for LinearOdeSystem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        let d = self.dim;
        let mut g = [0.0f64; 16];
        let mut heap;
        let gbuf: &mut [f64] = if d * d <= 16 {
            &mut g[..d * d]
        } else {
            heap = vec![0.0; d * d];
            &mut heap
        };
        (self.g)(t, gbuf);
        for i in 0..d {
            let mut acc = 0.0;
            for k in 0..d {
                acc += (self.j[i * d + k] + gbuf[i * d + k]) * x[k];
            }
            dx[i] = acc;
        }
    }
}

/// Integrates forward from the system's `t0` to `t1`, recording every accepted step.
pub fn integrate(
    system: &LinearOdeSystem,
    x0: &[f64],
    t1: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    if !(t1 > system.t0) {
        return Err(Error::InvalidIntegration(format!(
            "end time {t1} must exceed t0 = {}",
            system.t0
        )));
    }
    integrate_rhs(
        system,
        system.t0,
        x0,
        t1,
        &IntegrateOptions::with_tolerances(tol),
    )
}

/// Same as [`integrate`] but sampled on `samples + 1` equally spaced times.
pub fn integrate_sampled(
    system: &LinearOdeSystem,
    x0: &[f64],
    t1: f64,
    tol: Tolerances,
    samples: usize,
) -> Result<Trajectory> {
    if !(t1 > system.t0) {
        return Err(Error::InvalidIntegration(format!(
            "end time {t1} must exceed t0 = {}",
            system.t0
        )));
    }
    let t0 = system.t0;
    let outs: Vec<f64> = (0..=samples)
        .map(|i| {
            if i == samples {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / samples as f64
            }
        })
        .collect();
    integrate_rhs(
        system,
        t0,
        x0,
        t1,
        &IntegrateOptions::with_tolerances(tol).outputs(outs),
    )
}

/// Default left end of the radial systems: one unit past the end's boundary.
pub const RADIAL_T0_OFFSET: f64 = 1.0;

/// 2x2 system for `(u, u')` of the mode with `Delta^N u = mu u`, `Delta^{S^k} u = lambda u`:
/// `J = [[0, 1], [mu + s/a_m, -kc]]`,
/// `G(r) = [[0, 0], [(s - scal_g(r))/a_m + lambda/f(r)^2, k(c - f'/f)]]`.
pub fn build_scalar_mode_system(
    model: &ModelSpace,
    mu: f64,
    lambda: f64,
    bound: ScalBound,
) -> Result<LinearOdeSystem> {
    if !(mu >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "mode eigenvalues must be >= 0 (mu = {mu}, lambda = {lambda})"
        )));
    }
    let k = model.k as f64;
    let c = model.c();
    let am = model.a_m();
    let s = model.asymptotic_scal(bound);
    let j = vec![0.0, 1.0, mu + s / am, -k * c];
    let m = model.clone();
    let t0 = model.profile.a() + RADIAL_T0_OFFSET;
    let g: Perturbation = Arc::new(move |r, g: &mut [f64]| {
        let p = &m.profile;
        let scal = m.scalar_curvature_unchecked(r, bound);
        let f = p.f(r);
        g[0] = 0.0;
        g[1] = 0.0;
        g[2] = (s - scal) / am + if lambda == 0.0 { 0.0 } else { lambda / (f * f) };
        g[3] = k * (c - p.log_derivative(r));
    });
    LinearOdeSystem::new(2, j, g, t0)
}

/// `A` and `B` of the Dirac mode system, row-major 4x4.
pub fn dirac_matrices(lambda: f64) -> ([f64; 16], [f64; 16]) {
    #[rustfmt::skip]
    let a = [
        0.0, lambda, 0.0, 0.0,
        lambda, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -lambda,
        0.0, 0.0, -lambda, 0.0,
    ];
    #[rustfmt::skip]
    let b = [
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
    ];
    (a, b)
}

/// 4x4 system `Phi' = (A - kc/2 Id + (k/2)(c - f'/f) Id + (rho/f) B) Phi`.
/// `rho^2 = k^2/4` is enforced unless `allow_general_rho` is set.
pub fn build_dirac_mode_system(
    model: &ModelSpace,
    lambda: f64,
    rho: f64,
    allow_general_rho: bool,
) -> Result<LinearOdeSystem> {
    let k = model.k as f64;
    let expected = k * k / 4.0;
    if !allow_general_rho && (rho * rho - expected).abs() > 1e-12 * expected.max(1.0) {
        return Err(Error::ModeSelectionViolation {
            rho_sq: rho * rho,
            expected,
        });
    }
    let c = model.c();
    let (a, b) = dirac_matrices(lambda);
    let mut j = a.to_vec();
    for i in 0..4 {
        j[i * 4 + i] -= k * c / 2.0;
    }
    let m = model.clone();
    let t0 = model.profile.a() + RADIAL_T0_OFFSET;
    let g: Perturbation = Arc::new(move |r, g: &mut [f64]| {
        let p = &m.profile;
        let diag = 0.5 * k * (c - p.log_derivative(r));
        let off = rho / p.f(r);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = off * b[i];
        }
        for i in 0..4 {
            g[i * 4 + i] = diag;
        }
    });
    LinearOdeSystem::new(4, j, g, t0)
}
