//! Decay-rate fits and the decaying solution of a linear system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::integrator::{integrate_rhs, IntegrateOptions, Tolerances, Trajectory};
use crate::ode::systems::LinearOdeSystem;

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares slope of `ln|x(t)|` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub window: (f64, f64),
    /// Root-mean-square deviation of `ln|x|` from the fitted line.
    pub residual: f64,
    pub samples: usize,
}

/// Default window `[0.5, 0.9] * t_far` expressed on `[t0, t_far]`.
pub fn default_window(t_far: f64) -> (f64, f64) {
    (0.5 * t_far, 0.9 * t_far)
}

pub fn fit_decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::InvalidIntegration(format!(
            "empty fit window [{lo}, {hi}]"
        )));
    }
    let logs = traj.log_norms();
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (t, y) in traj.grid.iter().zip(&logs) {
        if *t >= lo && *t <= hi {
            if !y.is_finite() {
                return Err(Error::ZeroNormOnWindow);
            }
            ts.push(*t);
            ys.push(*y);
        }
    }
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(Error::WindowTooSmall {
            samples: ts.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let (slope, intercept) = least_squares_line(&ts, &ys);
    let residual = (ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| {
            let d = y - (intercept + slope * t);
            d * d
        })
        .sum::<f64>()
        / ts.len() as f64)
        .sqrt();
    Ok(RateFit {
        rate: slope,
        window,
        residual,
        samples: ts.len(),
    })
}

pub(crate) fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone)]
pub struct DecayOptions {
    pub tolerances: Tolerances,
    /// Number of equal intervals in the output grid on `[t0, t_far]`.
    pub samples: usize,
    /// Largest allowed growth `ln` factor per segment before renormalising.
    pub segment_log_growth: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            samples: 400,
            segment_log_growth: 100.0,
        }
    }
}

/// Solution on `[t0, t_far]` whose direction at `t_far` lies in the invariant
/// subspace of `J` with the most negative real part, normalised to `|x(t_far)| = 1`.
/// Obtained by integrating backwards from `t_far`, where that mode dominates.
pub fn decaying_solution(system: &LinearOdeSystem, t_far: f64) -> Result<Trajectory> {
    decaying_solution_with(system, t_far, &DecayOptions::default())
}

pub fn decaying_solution_with(
    system: &LinearOdeSystem,
    t_far: f64,
    opts: &DecayOptions,
) -> Result<Trajectory> {
    let t0 = system.t0();
    if !(t_far > t0) {
        return Err(Error::InvalidIntegration(format!(
            "t_far = {t_far} must exceed t0 = {t0}"
        )));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidIntegration(
            "at least two samples required".into(),
        ));
    }
    let x_far = system.most_negative_direction()?;
    let growth = system
        .eigenvalues()
        .iter()
        .map(|e| e.re.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let seg_len = (opts.segment_log_growth / growth).max((t_far - t0) / 1e4);

    let n = opts.samples;
    let grid: Vec<f64> = (0..=n)
        .map(|i| {
            if i == n {
                t_far
            } else {
                t0 + (t_far - t0) * i as f64 / n as f64
            }
        })
        .collect();

    // walk backwards over descending grid indices
    let mut states = vec![Vec::new(); n + 1];
    let mut log_scale = vec![0.0; n + 1];
    states[n] = x_far.clone();
    let mut x = x_far;
    let mut scale = 0.0;
    let mut idx = n;
    let mut t = t_far;
    while idx > 0 {
        let t_stop = (t - seg_len).max(t0);
        let mut outs = Vec::new();
        let mut j = idx;
        while j > 0 && grid[j - 1] >= t_stop - 1e-12 * t_far.abs().max(1.0) {
            j -= 1;
            outs.push(grid[j].max(t_stop));
        }
        // make sure the segment ends on a grid point when it is close to one
        let t_end = if let Some(last) = outs.last() {
            t_stop.min(*last)
        } else {
            t_stop
        };
        let seg = integrate_rhs(
            system,
            t,
            &x,
            t_end,
            &IntegrateOptions::with_tolerances(opts.tolerances).outputs(outs.clone()),
        )?;
        for (pos, g) in (j..idx).rev().enumerate() {
            states[g] = seg.states[pos].clone();
            log_scale[g] = scale;
        }
        let mut end = seg_end_state(system, t, &x, t_end, opts, &seg, &outs)?;
        let norm = end.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonFiniteState { t: t_end });
        }
        end.iter_mut().for_each(|v| *v /= norm);
        scale += norm.ln();
        x = end;
        t = t_end;
        idx = j;
        if t <= t0 {
            break;
        }
    }
    if idx != 0 {
        return Err(Error::InvalidIntegration(
            "backward sweep did not reach t0".into(),
        ));
    }
    for s in states.iter_mut().zip(&mut log_scale) {
        let (v, ls) = s;
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv > 0.0 && nv.is_finite() && nv != 1.0 {
            let l = nv.ln();
            v.iter_mut().for_each(|a| *a /= nv);
            *ls += l;
        }
    }
    Ok(Trajectory {
        grid,
        states,
        log_scale,
        tolerances: opts.tolerances,
    })
}

fn seg_end_state(
    system: &LinearOdeSystem,
    t: f64,
    x: &[f64],
    t_end: f64,
    opts: &DecayOptions,
    seg: &Trajectory,
    outs: &[f64],
) -> Result<Vec<f64>> {
    if outs.last() == Some(&t_end) {
        return Ok(seg.states[seg.len() - 1].clone());
    }
    let tail = integrate_rhs(
        system,
        t,
        x,
        t_end,
        &IntegrateOptions::with_tolerances(opts.tolerances),
    )?;
    Ok(tail.states[tail.len() - 1].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ModelSpace, ScalBound};
    use crate::ode::systems::{build_scalar_mode_system, integrate_sampled};

    #[test]
    fn fit_recovers_exact_rate() {
        let sys = LinearOdeSystem::constant(2, vec![-0.7, 0.0, 0.0, -2.0], 0.0).unwrap();
        let tol = Tolerances::new(1e-25, 1e-11);
        let traj = integrate_sampled(&sys, &[1.0, 1.0], 40.0, tol, 400).unwrap();
        let fit = fit_decay_rate(&traj, (20.0, 36.0)).unwrap();
        assert!((fit.rate + 0.7).abs() < 1e-8, "{fit:?}");
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn window_errors() {
        let sys = LinearOdeSystem::constant(1, vec![-1.0], 0.0).unwrap();
        let traj = integrate_sampled(&sys, &[1.0], 10.0, Tolerances::default(), 20).unwrap();
        assert!(matches!(
            fit_decay_rate(&traj, (5.0, 6.0)),
            Err(Error::WindowTooSmall {
                samples: 3,
                required: 10
            })
        ));
        let zero = integrate_sampled(&sys, &[0.0], 10.0, Tolerances::default(), 100).unwrap();
        assert!(matches!(
            fit_decay_rate(&zero, (5.0, 9.0)),
            Err(Error::ZeroNormOnWindow)
        ));
    }

    #[test]
    fn decaying_solution_of_constant_system() {
        let sys = LinearOdeSystem::constant(2, vec![0.0, 1.0, 4.0, 0.0], 0.0).unwrap();
        // eigenvalues -2, 2; decaying direction (1, -2)
        let traj = decaying_solution(&sys, 200.0).unwrap();
        let x = traj.state(0);
        assert!((x[1] / x[0] + 2.0).abs() < 1e-8);
        let fit = fit_decay_rate(&traj, default_window(200.0)).unwrap();
        assert!((fit.rate + 2.0).abs() < 1e-9);
        let logs = traj.log_norms();
        assert!(logs[traj.len() - 1].abs() < 1e-12);
        assert!((logs[0] - 400.0 - 0.0).abs() < 1e-6);
    }

    #[test]
    fn scalar_decaying_mode_rate() {
        let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 1, 1.0).unwrap();
        let sys = build_scalar_mode_system(&model, 2.0, 0.0, ScalBound::Inf).unwrap();
        let ev = sys.predicted_rates();
        let traj = decaying_solution(&sys, 40.0).unwrap();
        let fit = fit_decay_rate(&traj, default_window(40.0)).unwrap();
        assert!((fit.rate - ev[0]).abs() < 1e-3, "{} vs {}", fit.rate, ev[0]);
    }
}
