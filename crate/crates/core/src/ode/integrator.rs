//! Adaptive embedded Runge-Kutta 5(4) integration (Dormand-Prince coefficients,
//! local extrapolation, FSAL) with continuous output of order four.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side of `x' = F(t, x)`.
pub trait OdeRhs {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]);
}

impl<F> OdeRhs for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.1)(t, x, dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerances {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-10,
        }
    }
}

/// Sampled solution. The state at `grid[i]` is `states[i] * exp(log_scale[i])`;
/// the scale lets long backward integrations avoid overflow.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub log_scale: Vec<f64>,
    pub tolerances: Tolerances,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map(Vec::len).unwrap_or(0)
    }

    /// State at sample `i` with the scale applied.
    pub fn state(&self, i: usize) -> Vec<f64> {
        let s = self.log_scale[i].exp();
        self.states[i].iter().map(|v| v * s).collect()
    }

    /// `ln |x(t_i)|` for every sample.
    pub fn log_norms(&self) -> Vec<f64> {
        self.states
            .iter()
            .zip(&self.log_scale)
            .map(|(x, s)| euclid(x).ln() + s)
            .collect()
    }

    pub fn last_state(&self) -> Vec<f64> {
        self.state(self.len() - 1)
    }

    /// Writes `t, x_1..x_d, |x|` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.dim();
        let mut header = String::from("t");
        for i in 1..=d {
            header.push_str(&format!(",x_{i}"));
        }
        header.push_str(",norm");
        writeln!(out, "{header}")?;
        for i in 0..self.len() {
            let x = self.state(i);
            let mut row = fmt17(self.grid[i]);
            for v in &x {
                row.push(',');
                row.push_str(&fmt17(*v));
            }
            row.push(',');
            row.push_str(&fmt17(euclid(&x)));
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Seventeen significant digits, round-trippable.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Euclidean norm, scaled so that tiny or huge entries neither underflow nor overflow.
pub(crate) fn euclid(x: &[f64]) -> f64 {
    let big = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if big == 0.0 || !big.is_finite() {
        return big;
    }
    big * x.iter().map(|v| (v / big) * (v / big)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub tolerances: Tolerances,
    pub initial_step: Option<f64>,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// When set, the trajectory holds exactly these times (monotone in the
    /// direction of integration, inside the interval); otherwise every accepted step.
    pub outputs: Option<Vec<f64>>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            initial_step: None,
            min_step: 1e-14,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
            outputs: None,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tolerances(tolerances: Tolerances) -> Self {
        Self {
            tolerances,
            ..Self::default()
        }
    }

    pub fn outputs(mut self, times: Vec<f64>) -> Self {
        self.outputs = Some(times);
        self
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates from `(t0, x0)` to `t1` (either direction).
pub fn integrate_rhs<S: OdeRhs + ?Sized>(
    rhs: &S,
    t0: f64,
    x0: &[f64],
    t1: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let d = rhs.dim();
    if x0.len() != d {
        return Err(Error::InvalidIntegration(format!(
            "initial state has length {}, system dimension is {d}",
            x0.len()
        )));
    }
    if !(t1 != t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidIntegration(format!(
            "degenerate interval [{t0}, {t1}]"
        )));
    }
    let tol = opts.tolerances;
    if !(tol.abs > 0.0) || !(tol.rel > 0.0) {
        return Err(Error::InvalidIntegration(
            "tolerances must be positive".into(),
        ));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let dir = (t1 - t0).signum();
    if let Some(outs) = &opts.outputs {
        let mut prev = t0;
        for &t in outs {
            if (t - prev) * dir < 0.0 || (t - t1) * dir > 0.0 {
                return Err(Error::InvalidIntegration(format!(
                    "output time {t} out of order or outside [{t0}, {t1}]"
                )));
            }
            prev = t;
        }
    }

    let mut grid = Vec::new();
    let mut states = Vec::new();
    let mut next_out = 0usize;
    let outputs = opts.outputs.as_deref();
    match outputs {
        None => {
            grid.push(t0);
            states.push(x0.to_vec());
        }
        Some(outs) => {
            while next_out < outs.len() && outs[next_out] == t0 {
                grid.push(t0);
                states.push(x0.to_vec());
                next_out += 1;
            }
        }
    }

    let mut t = t0;
    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut k5 = vec![0.0; d];
    let mut k6 = vec![0.0; d];
    let mut k7 = vec![0.0; d];
    let mut xs = vec![0.0; d];
    let mut xn = vec![0.0; d];
    rhs.eval(t, &x, &mut k1);

    let span = (t1 - t0).abs();
    let mut h = match opts.initial_step {
        Some(h) => h.abs(),
        None => initial_step(rhs, t, &x, &k1, dir, &tol, span),
    }
    .min(opts.max_step)
    .min(span);

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if steps >= opts.max_steps {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            last = true;
        }
        if h < opts.min_step * t.abs().max(1.0) && !last {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let hs = dir * h;

        for i in 0..d {
            xs[i] = x[i] + hs * A21 * k1[i];
        }
        rhs.eval(t + C2 * hs, &xs, &mut k2);
        for i in 0..d {
            xs[i] = x[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs.eval(t + C3 * hs, &xs, &mut k3);
        for i in 0..d {
            xs[i] = x[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs.eval(t + C4 * hs, &xs, &mut k4);
        for i in 0..d {
            xs[i] = x[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs.eval(t + C5 * hs, &xs, &mut k5);
        for i in 0..d {
            xs[i] =
                x[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        rhs.eval(t_new, &xs, &mut k6);
        for i in 0..d {
            xn[i] =
                x[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs.eval(t_new, &xn, &mut k7);

        let mut err = 0.0;
        for i in 0..d {
            let e =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.abs + tol.rel * x[i].abs().max(xn[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / d as f64).sqrt();
        if !err.is_finite() {
            if h <= opts.min_step * t.abs().max(1.0) {
                return Err(Error::NonFiniteState { t: t_new });
            }
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            if xn.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t: t_new });
            }
            if let Some(outs) = outputs {
                // continuous extension over [t, t_new]
                while next_out < outs.len() && (outs[next_out] - t_new) * dir <= 0.0 {
                    let theta = (outs[next_out] - t) / hs;
                    let th1 = 1.0 - theta;
                    let mut y = vec![0.0; d];
                    for i in 0..d {
                        let r2 = xn[i] - x[i];
                        let r3 = hs * k1[i] - r2;
                        let r4 = r2 - hs * k7[i] - r3;
                        let r5 = hs
                            * (D1 * k1[i]
                                + D3 * k3[i]
                                + D4 * k4[i]
                                + D5 * k5[i]
                                + D6 * k6[i]
                                + D7 * k7[i]);
                        y[i] = x[i] + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
                    }
                    if outs[next_out] == t_new {
                        y.copy_from_slice(&xn);
                    }
                    grid.push(outs[next_out]);
                    states.push(y);
                    next_out += 1;
                }
            } else {
                grid.push(t_new);
                states.push(xn.clone());
            }
            t = t_new;
            x.copy_from_slice(&xn);
            k1.copy_from_slice(&k7);
            if last {
                break;
            }
            let mut fac = 0.9 * err.powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(opts.max_step);
            last_rejected = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            last_rejected = true;
        }
    }

    let n = grid.len();
    Ok(Trajectory {
        grid,
        states,
        log_scale: vec![0.0; n],
        tolerances: tol,
    })
}

fn initial_step<S: OdeRhs + ?Sized>(
    rhs: &S,
    t: f64,
    x: &[f64],
    f0: &[f64],
    dir: f64,
    tol: &Tolerances,
    span: f64,
) -> f64 {
    let d = x.len();
    let sc: Vec<f64> = x.iter().map(|v| tol.abs + tol.rel * v.abs()).collect();
    let norm = |v: &[f64]| -> f64 {
        (v.iter()
            .zip(&sc)
            .map(|(a, s)| (a / s) * (a / s))
            .sum::<f64>()
            / d as f64)
            .sqrt()
    };
    let d0 = norm(x);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let x1: Vec<f64> = x.iter().zip(f0).map(|(a, b)| a + dir * h0 * b).collect();
    let mut f1 = vec![0.0; d];
    rhs.eval(t + dir * h0, &x1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sys = (1usize, |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
        let opts = IntegrateOptions::with_tolerances(Tolerances::new(1e-12, 1e-12));
        let tr = integrate_rhs(&sys, 0.0, &[1.0], 5.0, &opts).unwrap();
        let last = tr.last_state()[0];
        assert!((last / (-5.0f64).exp() - 1.0).abs() < 1e-8);
        assert!(tr.grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn backward_and_dense_outputs() {
        let sys = (1usize, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = -2.0 * x[0]
        });
        let outs: Vec<f64> = (0..=10).rev().map(|i| i as f64 * 0.3).collect();
        let opts =
            IntegrateOptions::with_tolerances(Tolerances::new(1e-12, 1e-12)).outputs(outs.clone());
        let tr = integrate_rhs(&sys, 3.0, &[1.0], 0.0, &opts).unwrap();
        assert_eq!(tr.grid, outs);
        for (t, x) in tr.grid.iter().zip(&tr.states) {
            let exact = (-2.0 * (t - 3.0)).exp();
            assert!((x[0] / exact - 1.0).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let sys = (1usize, |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = x[0]);
        let opts = IntegrateOptions::default();
        assert!(integrate_rhs(&sys, 0.0, &[1.0, 2.0], 1.0, &opts).is_err());
        assert!(integrate_rhs(&sys, 1.0, &[1.0], 1.0, &opts).is_err());
        let bad = IntegrateOptions::with_tolerances(Tolerances::new(0.0, 1e-6));
        assert!(integrate_rhs(&sys, 0.0, &[1.0], 1.0, &bad).is_err());
    }

    #[test]
    fn blowup_is_reported() {
        // x' = x^2 blows up at t = 1
        let sys = (1usize, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[0] * x[0]
        });
        let opts = IntegrateOptions {
            max_steps: 100_000,
            ..IntegrateOptions::default()
        };
        let res = integrate_rhs(&sys, 0.0, &[1.0], 2.0, &opts);
        assert!(matches!(
            res,
            Err(Error::StepSizeUnderflow { .. }) | Err(Error::NonFiniteState { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let sys = (2usize, |_t: f64, _x: &[f64], dx: &mut [f64]| {
            dx[0] = 1.0;
            dx[1] = 0.0;
        });
        let opts = IntegrateOptions::default().outputs(vec![0.0, 1.0]);
        let tr = integrate_rhs(&sys, 0.0, &[0.0, 1.0], 1.0, &opts).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2,norm");
        assert_eq!(lines.len(), 3);
        let row: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[0], 1.0);
        assert!((row[1] - 1.0).abs() < 1e-14 && row[2] == 1.0);
        assert!(lines[2]
            .split(',')
            .all(|v| v.contains('e') && v.len() >= 20));
    }
}
