//! Mode-sum Green function of the conformal Laplacian on `S^n(R) x H_c^{k+1}`
//! and extraction of its leading singular coefficient and constant (mass) term.

mod field;
mod mass;
mod profile;
mod zonal;

use std::fmt::Write as _;

use rayon::prelude::*;

pub use field::{FieldSample, GreenField};
pub use mass::{
    fit_leading_coefficient, fit_mass_term, leading_reference, schouten_eigenvalues, shell_radii,
    subtracted_profile, LeadingFit, MassDiagnostics, MassEstimate, ShellSpec,
};
pub use profile::{template_coefficient, ModeSolver, ProfileSamples, PROFILE_TOLERANCES};
pub use zonal::ZonalKernels;

use crate::error::{Error, Result};
use crate::geometry::{ClosedFactorData, ModelSpace, ProfileKind, WarpingProfile};
use crate::ode::integrator::{fmt17, Trajectory};

/// Evaluation closer than this to the antipode of the pole on `S^n` (`n >= 2`) is refused.
pub const ANTIPODE_EXCLUSION: f64 = 0.1;

/// Default relative tolerance for the truncated tail of the mode sum.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;

/// Truncation needed to resolve the mode sum down to fiber distance `r_min`.
pub fn required_truncation(model: &ModelSpace, r_min: f64) -> usize {
    let radius = model.factor.sphere_radius().unwrap_or(1.0);
    if model.factor.n == 0 {
        return 0;
    }
    (40.0 * radius / r_min).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct GreenMode {
    pub l: usize,
    pub mu: f64,
    /// `(g, g')` on the table grid; `states[i] * exp(log_scale[i])`.
    pub profile: Trajectory,
    pub singular_strength: f64,
}

/// Mode profiles `g_l`, `l = 0..=L`, of the Green function with pole at the
/// origin of `H_c^{k+1}` and the north pole of `S^n(R)`.
#[derive(Debug, Clone)]
pub struct GreenModeTable {
    pub model: ModelSpace,
    pub truncation: usize,
    pub modes: Vec<GreenMode>,
    pub tail_tolerance: f64,
    kernels: ZonalKernels,
    solvers: Vec<ModeSolver>,
}

/// Geometric grid of `count` radii in `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            }
        })
        .collect()
}

/// Default grid on which the table stores its profiles.
pub fn default_table_grid() -> Vec<f64> {
    geometric_grid(0.01, 10.0, 121)
}

impl GreenModeTable {
    pub fn build(model: &ModelSpace, truncation: usize, grid: &[f64]) -> Result<Self> {
        profile::check_green_model(model)?;
        if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 0.0) {
            return Err(Error::InvalidModel(
                "table grid must be positive and increasing".into(),
            ));
        }
        let kernels =
            ZonalKernels::new(model.factor.n, model.factor.sphere_radius().unwrap_or(1.0));
        let truncation = if model.factor.n == 0 { 0 } else { truncation };
        let built: Vec<(GreenMode, ModeSolver)> = (0..=truncation)
            .into_par_iter()
            .map(|l| {
                let mu = kernels.eigenvalue(l);
                let solver = ModeSolver::new(model, mu)?;
                let s = solver.sample(grid)?;
                let profile = Trajectory {
                    grid: grid.to_vec(),
                    states: s.log_derivative.iter().map(|y| vec![1.0, *y]).collect(),
                    log_scale: s.log_g,
                    tolerances: PROFILE_TOLERANCES,
                };
                Ok((
                    GreenMode {
                        l,
                        mu,
                        profile,
                        singular_strength: solver.singular_strength,
                    },
                    solver,
                ))
            })
            .collect::<Result<_>>()?;
        let (modes, solvers) = built.into_iter().unzip();
        Ok(Self {
            model: model.clone(),
            truncation,
            modes,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            kernels,
            solvers,
        })
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tolerance = tol;
        self
    }

    pub fn kernels(&self) -> &ZonalKernels {
        &self.kernels
    }

    pub fn solver(&self, l: usize) -> &ModeSolver {
        &self.solvers[l]
    }

    /// Values `g_l(r)` for every mode, `out[l][i]` at `radii[i]`.
    pub fn mode_values(&self, radii: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.solvers
            .par_iter()
            .map(|s| {
                s.sample(radii)
                    .map(|p| p.log_g.iter().map(|v| v.exp()).collect())
            })
            .collect()
    }

    /// Writes the versioned text form: header lines, then one CSV block per mode.
    pub fn to_text(&self) -> String {
        let f = &self.model.factor;
        let mut out = String::new();
        out.push_str("warpmass-green-table v1\n");
        let _ = writeln!(out, "n {}", f.n);
        let _ = writeln!(out, "radius {}", fmt17(f.sphere_radius().unwrap_or(1.0)));
        let _ = writeln!(out, "k {}", self.model.k);
        let _ = writeln!(out, "c {}", fmt17(self.model.c()));
        let kind = match self.model.profile.kind() {
            ProfileKind::Linear => "linear",
            _ => "sinh_c",
        };
        let _ = writeln!(out, "profile {kind}");
        let _ = writeln!(out, "truncation {}", self.truncation);
        let _ = writeln!(out, "grid {}", self.modes[0].profile.len());
        for m in &self.modes {
            let _ = writeln!(
                out,
                "mode {} {} {}",
                m.l,
                fmt17(m.mu),
                fmt17(m.singular_strength)
            );
            out.push_str("r,g,dg\n");
            for i in 0..m.profile.len() {
                let s = m.profile.state(i);
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt17(m.profile.grid[i]),
                    fmt17(s[0]),
                    fmt17(s[1])
                );
            }
        }
        out
    }

    /// Parses [`Self::to_text`] output, rebuilding the table and checking the
    /// stored profiles against the recomputed ones.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Config(format!("green table: {what}"));
        let mut lines = text.lines();
        if lines.next() != Some("warpmass-green-table v1") {
            return Err(bad("missing or unsupported version header"));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let (key, value) = line.split_once(' ').ok_or_else(|| bad(line))?;
            if key != name {
                return Err(bad(&format!("expected `{name}`, found `{key}`")));
            }
            Ok(value.to_string())
        };
        let num = |s: String| s.parse::<f64>().map_err(|_| bad(&s));
        let int = |s: String| s.parse::<usize>().map_err(|_| bad(&s));
        let n = int(field("n")?)?;
        let radius = num(field("radius")?)?;
        let k = int(field("k")?)?;
        let c = num(field("c")?)?;
        let kind = field("profile")?;
        let truncation = int(field("truncation")?)?;
        let rows = int(field("grid")?)?;
        let profile = match kind.as_str() {
            "linear" => WarpingProfile::linear(0.0)?,
            "sinh_c" => WarpingProfile::sinh_c(c, 0.0)?,
            other => return Err(bad(&format!("unknown profile `{other}`"))),
        };
        let model = ModelSpace::new(ClosedFactorData::round_sphere(n, radius)?, k, profile)?;
        let mut stored = Vec::new();
        let mut grid = Vec::new();
        for l in 0..=truncation {
            let head = lines.next().ok_or_else(|| bad("missing mode block"))?;
            if !head.starts_with(&format!("mode {l} ")) {
                return Err(bad(&format!("expected mode {l}, found `{head}`")));
            }
            if lines.next() != Some("r,g,dg") {
                return Err(bad("missing column header"));
            }
            let mut values = Vec::with_capacity(rows);
            for _ in 0..rows {
                let row = lines.next().ok_or_else(|| bad("truncated mode block"))?;
                let cols: Vec<f64> = row
                    .split(',')
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(row))?;
                if cols.len() != 3 {
                    return Err(bad(row));
                }
                if l == 0 {
                    grid.push(cols[0]);
                }
                values.push(cols[1]);
            }
            stored.push(values);
        }
        let table = Self::build(&model, truncation, &grid)?;
        for (mode, values) in table.modes.iter().zip(&stored) {
            for (i, v) in values.iter().enumerate() {
                let g = mode.profile.state(i)[0];
                if (g - v).abs() > 1e-8 * g.abs().max(f64::MIN_POSITIVE) {
                    return Err(bad(&format!(
                        "stored profile of mode {} disagrees with recomputation",
                        mode.l
                    )));
                }
            }
        }
        Ok(table)
    }
}

/// Result of [`assemble_green_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct GreenValues {
    pub values: Vec<f64>,
    /// Estimated absolute size of the neglected modes `l > L`.
    pub tails: Vec<f64>,
}

/// `Gamma(theta, r) = a_m sum_{l <= L} Z_l(cos theta) g_l(r)` at points given by the
/// angle on `S^n` from the pole's foot and the distance in `H_c^{k+1}`.
///
/// The profiles are normalised by `L_g (sum Z_l g_l) = delta`; the factor `a_m` puts the
/// result in the normalisation whose leading term is `1/((m-2) omega_{m-1} rho^{m-2})`.
pub fn assemble_green(table: &GreenModeTable, points: &[(f64, f64)]) -> Result<Vec<f64>> {
    let out = assemble_green_detailed(table, points)?;
    for ((v, t), p) in out.values.iter().zip(&out.tails).zip(points) {
        if *t > table.tail_tolerance * v.abs() {
            return Err(Error::TruncationError(format!(
                "at theta = {}, r = {}: tail estimate {t:e} exceeds {:e} of |Gamma| = {v:e} (L = {})",
                p.0, p.1, table.tail_tolerance, table.truncation
            )));
        }
    }
    Ok(out.values)
}

/// Like [`assemble_green`] but returns tail estimates instead of enforcing the tolerance.
pub fn assemble_green_detailed(
    table: &GreenModeTable,
    points: &[(f64, f64)],
) -> Result<GreenValues> {
    let n = table.model.factor.n;
    for &(theta, r) in points {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::DomainError { r, lower: 0.0 });
        }
        if !(theta >= 0.0) || theta > std::f64::consts::PI {
            return Err(Error::InvalidModel(format!(
                "angle {theta} outside [0, pi]"
            )));
        }
        if n >= 2 && std::f64::consts::PI - theta < ANTIPODE_EXCLUSION {
            return Err(Error::TruncationError(format!(
                "angle {theta} is within {ANTIPODE_EXCLUSION} of the antipodal caustic"
            )));
        }
    }
    let mut radii: Vec<f64> = points.iter().map(|p| p.1).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let g = table.mode_values(&radii)?;
    let am = table.model.a_m();
    let big_l = table.truncation;
    let mut values = Vec::with_capacity(points.len());
    let mut tails = Vec::with_capacity(points.len());
    for &(theta, r) in points {
        let idx = radii
            .binary_search_by(|x| x.total_cmp(&r))
            .expect("radius present");
        let z = table.kernels.values(theta, big_l);
        let mut sum = 0.0;
        for l in 0..=big_l {
            sum += z[l] * g[l][idx];
        }
        values.push(am * sum);
        let tail = if n == 0 {
            0.0
        } else if big_l == 0 {
            f64::INFINITY
        } else {
            let b_last = table.kernels.at_pole(big_l) * g[big_l][idx];
            let b_prev = table.kernels.at_pole(big_l - 1) * g[big_l - 1][idx];
            let q = b_last / b_prev;
            if b_last < 1e-290 {
                0.0
            } else if q < 1.0 {
                am * b_last * q / (1.0 - q)
            } else {
                f64::INFINITY
            }
        };
        tails.push(tail);
    }
    Ok(GreenValues { values, tails })
}

/// Writes `theta, r, gamma` rows.
pub fn green_csv(points: &[(f64, f64)], values: &[f64]) -> String {
    let mut out = String::from("theta,r,gamma\n");
    for ((t, r), v) in points.iter().zip(values) {
        let _ = writeln!(out, "{},{},{}", fmt17(*t), fmt17(*r), fmt17(*v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_text_round_trip() {
        let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, 1.0).unwrap();
        let grid = geometric_grid(0.05, 2.0, 9);
        let table = GreenModeTable::build(&model, 4, &grid).unwrap();
        let text = table.to_text();
        let back = GreenModeTable::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert!(GreenModeTable::from_text(&text.replace("v1", "v9")).is_err());
        let broken = text.replacen("mode 2 ", "mode 7 ", 1);
        assert!(GreenModeTable::from_text(&broken).is_err());
    }

    #[test]
    fn truncation_is_reported() {
        let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, 1.0).unwrap();
        let table = GreenModeTable::build(&model, 8, &[0.5]).unwrap();
        assert!(matches!(
            assemble_green(&table, &[(0.0, 0.02)]),
            Err(Error::TruncationError(_))
        ));
        assert!(matches!(
            assemble_green(&table, &[(3.1, 1.0)]),
            Err(Error::TruncationError(_))
        ));
        assert!(assemble_green(&table.clone().with_tail_tolerance(1e-3), &[(0.0, 2.0)]).is_ok());
    }

    #[test]
    fn grid_helper() {
        let g = geometric_grid(0.02, 0.2, 12);
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 0.02);
        assert_eq!(g[11], 0.2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
