//! Green function with first derivatives on the `(s, r)` half-plane, where
//! `s = R theta` is arclength from the pole on `S^n(R)`.

use rayon::prelude::*;

use super::zonal::ZonalStepper;
use super::GreenModeTable;
use crate::error::{Error, Result};

/// Modes sampled per pass; bounds memory at `MODE_BLOCK * radii` values.
const MODE_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub d_s: f64,
    pub d_r: f64,
}

/// Evaluates `Gamma` and its gradient from a mode table. Below `r_c` the field
/// is continued evenly in `r` by its second-order Taylor expansion around `r_c`,
/// since resolving the mode sum there would need `L >> 40 R / r_c`.
#[derive(Debug, Clone, Copy)]
pub struct GreenField<'a> {
    table: &'a GreenModeTable,
    r_c: f64,
}

impl<'a> GreenField<'a> {
    pub fn new(table: &'a GreenModeTable, r_c: f64) -> Result<Self> {
        if !(r_c > 0.0) || !r_c.is_finite() {
            return Err(Error::InvalidModel(format!(
                "continuation radius {r_c} must be positive"
            )));
        }
        Ok(Self { table, r_c })
    }

    pub fn continuation_radius(&self) -> f64 {
        self.r_c
    }

    fn radius(&self) -> f64 {
        self.table.kernels().radius
    }

    /// Samples at `(s, r)` with `0 <= s <= pi R` and `r >= 0`; the pole itself
    /// must lie below `r_c`'s continuation (any `r` is accepted once `s > 0`).
    pub fn evaluate(&self, points: &[(f64, f64)]) -> Result<Vec<FieldSample>> {
        let radius = self.radius();
        let n = self.table.model.factor.n;
        let s_max = if n == 0 {
            0.0
        } else {
            std::f64::consts::PI * radius
        };
        for &(s, r) in points {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::DomainError { r, lower: 0.0 });
            }
            if !(s >= 0.0) || s > s_max * (1.0 + 1e-12) {
                return Err(Error::InvalidModel(format!(
                    "arclength {s} outside [0, {s_max}]"
                )));
            }
            if s == 0.0 && r < self.r_c {
                return Err(Error::InvalidModel(
                    "the pole is not an evaluation point".into(),
                ));
            }
        }
        let mut radii: Vec<f64> = points.iter().map(|p| p.1.max(self.r_c)).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let index: Vec<usize> = points
            .iter()
            .map(|p| {
                radii
                    .binary_search_by(|x| x.total_cmp(&p.1.max(self.r_c)))
                    .expect("radius present")
            })
            .collect();

        let kernels = *self.table.kernels();
        let theta_of = |s: f64| {
            if n == 0 {
                0.0
            } else {
                (s / radius).min(std::f64::consts::PI)
            }
        };
        let mut steppers: Vec<ZonalStepper> = points
            .iter()
            .map(|p| kernels.stepper(theta_of(p.0)))
            .collect();
        // sums of Z g, Z' g, Z g', Z' g' per point
        let mut sums = vec![[0.0f64; 4]; points.len()];
        let big_l = self.table.truncation;
        let mut last_two = vec![[0.0f64; 2]; radii.len()];

        let mut start = 0;
        while start <= big_l {
            let end = (start + MODE_BLOCK).min(big_l + 1);
            let block: Vec<(Vec<f64>, Vec<f64>)> = (start..end)
                .into_par_iter()
                .map(|l| {
                    let p = self.table.solver(l).sample(&radii)?;
                    let g: Vec<f64> = p.log_g.iter().map(|v| v.exp()).collect();
                    let dg = g
                        .iter()
                        .zip(&p.log_derivative)
                        .map(|(g, y)| g * y)
                        .collect();
                    Ok((g, dg))
                })
                .collect::<Result<_>>()?;
            for (l, (g, _)) in (start..end).zip(&block) {
                if l + 1 == big_l || (big_l == 0 && l == 0) {
                    for (slot, v) in last_two.iter_mut().zip(g) {
                        slot[0] = kernels.at_pole(l) * v;
                    }
                }
                if l == big_l {
                    for (slot, v) in last_two.iter_mut().zip(g) {
                        slot[1] = kernels.at_pole(l) * v;
                    }
                }
            }
            sums.par_chunks_mut(256)
                .zip(steppers.par_chunks_mut(256))
                .zip(index.par_chunks(256))
                .for_each(|((sum, st), idx)| {
                    for ((acc, stepper), &i) in sum.iter_mut().zip(st.iter_mut()).zip(idx) {
                        for (g, dg) in &block {
                            let (z, dz) = stepper.next_pair();
                            acc[0] += z * g[i];
                            acc[1] += dz * g[i];
                            acc[2] += z * dg[i];
                            acc[3] += dz * dg[i];
                        }
                    }
                });
            start = end;
        }

        let am = self.table.model.a_m();
        let tol = self.table.tail_tolerance;
        let mut out = Vec::with_capacity(points.len());
        for ((&(s, r), acc), &i) in points.iter().zip(&sums).zip(&index) {
            let value = am * acc[0];
            let [b_prev, b_last] = last_two[i];
            let tail = if n == 0 || b_last < 1e-290 {
                0.0
            } else if big_l == 0 || b_last >= b_prev {
                f64::INFINITY
            } else {
                let q = b_last / b_prev;
                am * b_last * q / (1.0 - q)
            };
            if tail > tol * value.abs() {
                return Err(Error::TruncationError(format!(
                    "at s = {s}, r = {r}: tail estimate {tail:e} exceeds {tol:e} of |Gamma| = {value:e} (L = {big_l})"
                )));
            }
            let d_s = if n == 0 { 0.0 } else { am * acc[1] / radius };
            let d_r = am * acc[2];
            let sample = if r >= self.r_c {
                FieldSample { value, d_s, d_r }
            } else {
                // even continuation: F(r) = F(r_c) + F_r(r_c) (r^2 - r_c^2) / (2 r_c)
                let d_sr = if n == 0 { 0.0 } else { am * acc[3] / radius };
                let w = (r * r - self.r_c * self.r_c) / (2.0 * self.r_c);
                FieldSample {
                    value: value + d_r * w,
                    d_s: d_s + d_sr * w,
                    d_r: d_r * r / self.r_c,
                }
            };
            out.push(sample);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelSpace;
    use crate::green::{assemble_green, geometric_grid};

    #[test]
    fn matches_assembly_and_differences() {
        let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 2, 1.0).unwrap();
        let table = GreenModeTable::build(&model, 400, &geometric_grid(0.1, 1.0, 3)).unwrap();
        let field = GreenField::new(&table, 0.1).unwrap();
        let pts = [(0.4, 0.3), (1.2, 0.7), (2.9, 1.5)];
        let f = field.evaluate(&pts).unwrap();
        let direct = assemble_green(&table, &[(0.4, 0.3), (1.2, 0.7)]).unwrap();
        for i in 0..2 {
            assert!((f[i].value / direct[i] - 1.0).abs() < 1e-12);
        }
        let h = 1e-5;
        for (i, &(s, r)) in pts.iter().enumerate() {
            let fs = field
                .evaluate(&[(s + h, r), (s - h, r), (s, r + h), (s, r - h)])
                .unwrap();
            let ds = (fs[0].value - fs[1].value) / (2.0 * h);
            let dr = (fs[2].value - fs[3].value) / (2.0 * h);
            assert!(
                (f[i].d_s - ds).abs() < 1e-6 * f[i].value.abs(),
                "{i}: {} {ds}",
                f[i].d_s
            );
            assert!(
                (f[i].d_r - dr).abs() < 1e-6 * f[i].value.abs(),
                "{i}: {} {dr}",
                f[i].d_r
            );
        }
    }

    #[test]
    fn continuation_is_even_and_c1() {
        let model = ModelSpace::sphere_times_hyperbolic(2, 1.0, 2, 1.0).unwrap();
        let table = GreenModeTable::build(&model, 400, &[0.5]).unwrap();
        let field = GreenField::new(&table, 0.1).unwrap();
        let f = field
            .evaluate(&[(1.0, 0.1), (1.0, 0.1 - 1e-9), (1.0, 0.0)])
            .unwrap();
        assert!((f[0].value - f[1].value).abs() < 1e-8 * f[0].value);
        assert!((f[0].d_r - f[1].d_r).abs() < 1e-6 * f[0].d_r.abs());
        assert_eq!(f[2].d_r, 0.0);
        assert!(field.evaluate(&[(0.0, 0.05)]).is_err());
    }
}
