//! Zonal reproducing kernels of the eigenspaces of the round `S^n(R)`.

use std::f64::consts::PI;

use crate::geometry::unit_sphere_volume;
use crate::spectra::harmonic_dimension;

/// Evaluates `Z_l(cos theta)` for `l = 0..=max_l` on the round sphere `S^n(radius)`,
/// normalised so that `sum_l Z_l` is the delta function of `S^n(radius)`. For `n = 0`
/// (a point of unit volume) only `l = 0` exists and `Z_0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZonalKernels {
    pub n: usize,
    pub radius: f64,
}

impl ZonalKernels {
    pub fn new(n: usize, radius: f64) -> Self {
        Self { n, radius }
    }

    pub fn volume(&self) -> f64 {
        if self.n == 0 {
            1.0
        } else {
            unit_sphere_volume(self.n) * self.radius.powi(self.n as i32)
        }
    }

    /// Eigenvalue `l(l+n-1)/R^2` of the Laplacian on the `l`-th eigenspace.
    pub fn eigenvalue(&self, l: usize) -> f64 {
        let lf = l as f64;
        lf * (lf + self.n as f64 - 1.0) / (self.radius * self.radius)
    }

    /// `Z_l(1) = dim H_l / vol`, the largest value of `|Z_l|`.
    pub fn at_pole(&self, l: usize) -> f64 {
        if self.n == 0 {
            return if l == 0 { 1.0 } else { 0.0 };
        }
        harmonic_dimension(self.n, l) as f64 / self.volume()
    }

    /// Values `Z_0(cos theta) ..= Z_max_l(cos theta)`.
    pub fn values(&self, theta: f64, max_l: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(max_l + 1);
        match self.n {
            0 => {
                out.push(1.0);
                out.extend(std::iter::repeat_n(0.0, max_l));
            }
            1 => {
                let norm = 1.0 / (2.0 * PI * self.radius);
                for l in 0..=max_l {
                    let w = if l == 0 { 1.0 } else { 2.0 };
                    out.push(w * norm * (l as f64 * theta).cos());
                }
            }
            n => {
                // normalised Gegenbauer P_l = C_l^a(t)/C_l^a(1), a = (n-1)/2, via
                // (l+2a) P_{l+1} = (2l+2a) t P_l - l P_{l-1}
                let a = (n as f64 - 1.0) / 2.0;
                let t = theta.cos();
                let vol = self.volume();
                let mut prev = 1.0;
                let mut cur = t;
                for l in 0..=max_l {
                    let p = match l {
                        0 => 1.0,
                        1 => t,
                        _ => {
                            let lf = (l - 1) as f64;
                            let next =
                                ((2.0 * lf + 2.0 * a) * t * cur - lf * prev) / (lf + 2.0 * a);
                            prev = cur;
                            cur = next;
                            next
                        }
                    };
                    out.push(harmonic_dimension(n, l) as f64 / vol * p);
                }
            }
        }
        out
    }

    /// Stepper yielding `(Z_l, dZ_l/dtheta)` for `l = 0, 1, ...` at a fixed angle.
    pub fn stepper(&self, theta: f64) -> ZonalStepper {
        ZonalStepper {
            kernels: *self,
            theta,
            t: theta.cos(),
            sin: theta.sin(),
            l: 0,
            p_prev: 0.0,
            p: 1.0,
            q_prev: 0.0,
            q: 1.0,
        }
    }
}

/// Incremental zonal evaluation; see [`ZonalKernels::stepper`].
#[derive(Debug, Clone, Copy)]
pub struct ZonalStepper {
    kernels: ZonalKernels,
    theta: f64,
    t: f64,
    sin: f64,
    l: usize,
    // normalised Gegenbauer P_{l-1}, P_l of index (n-1)/2 and Q_{l-2}, Q_{l-1} of index (n+1)/2
    p_prev: f64,
    p: f64,
    q_prev: f64,
    q: f64,
}

impl ZonalStepper {
    pub fn degree(&self) -> usize {
        self.l
    }

    /// Returns `(Z_l, dZ_l/dtheta)` for the current degree and advances to the next.
    pub fn next_pair(&mut self) -> (f64, f64) {
        let l = self.l;
        let lf = l as f64;
        let z = self.kernels;
        let out = match z.n {
            0 => (if l == 0 { 1.0 } else { 0.0 }, 0.0),
            1 => {
                let w = if l == 0 { 1.0 } else { 2.0 } / (2.0 * PI * z.radius);
                let (s, c) = (lf * self.theta).sin_cos();
                (w * c, -w * lf * s)
            }
            n => {
                let nf = n as f64;
                let scale = harmonic_dimension(n, l) as f64 / z.volume();
                let dp = if l == 0 {
                    0.0
                } else {
                    lf * (lf + nf - 1.0) / nf * self.q
                };
                let pair = (scale * self.p, -scale * dp * self.sin);
                let a = (nf - 1.0) / 2.0;
                let next_p =
                    ((2.0 * lf + 2.0 * a) * self.t * self.p - lf * self.p_prev) / (lf + 2.0 * a);
                self.p_prev = self.p;
                self.p = next_p;
                if l >= 1 {
                    // advance Q_{l-1} -> Q_l
                    let j = lf - 1.0;
                    let b = a + 1.0;
                    let next_q =
                        ((2.0 * j + 2.0 * b) * self.t * self.q - j * self.q_prev) / (j + 2.0 * b);
                    self.q_prev = self.q;
                    self.q = next_q;
                }
                pair
            }
        };
        self.l += 1;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_on_s2() {
        let z = ZonalKernels::new(2, 1.0);
        let t: f64 = 0.3;
        let v = z.values(t.acos(), 3);
        let p3 = 0.5 * (5.0 * t.powi(3) - 3.0 * t);
        assert!((v[3] - 7.0 / (4.0 * PI) * p3).abs() < 1e-15);
        assert!((v[0] - 1.0 / (4.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn pole_values_match_dimension() {
        for n in 1..6 {
            let z = ZonalKernels::new(n, 1.3);
            let v = z.values(0.0, 40);
            for (l, x) in v.iter().enumerate() {
                assert!((x / z.at_pole(l) - 1.0).abs() < 1e-12, "n={n} l={l}");
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn reproducing_property_on_s3() {
        // int_{S^3} Z_l(<x,q>) Z_j(<q,y>) dq = delta_lj Z_l(<x,y>) with x = y = pole
        // reduces to int Z_l Z_j dq = delta_lj Z_l(1)
        let z = ZonalKernels::new(3, 1.0);
        let npts = 4000;
        let mut gram = [[0.0; 4]; 4];
        for i in 0..npts {
            let th = PI * (i as f64 + 0.5) / npts as f64;
            let w = unit_sphere_volume(2) * th.sin().powi(2) * PI / npts as f64;
            let v = z.values(th, 3);
            for a in 0..4 {
                for b in 0..4 {
                    gram[a][b] += w * v[a] * v[b];
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                let want = if a == b { z.at_pole(a) } else { 0.0 };
                assert!((gram[a][b] - want).abs() < 1e-6, "{a} {b} {}", gram[a][b]);
            }
        }
    }

    #[test]
    fn circle_and_point() {
        let z = ZonalKernels::new(1, 2.0);
        let v = z.values(0.5, 2);
        assert!((v[2] - (1.0f64).cos() / (2.0 * PI)).abs() < 1e-15);
        let p = ZonalKernels::new(0, 1.0);
        assert_eq!(p.values(0.0, 3), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn stepper_matches_values_and_differences() {
        for n in 1..5 {
            let z = ZonalKernels::new(n, 1.7);
            let th = 0.83;
            let v = z.values(th, 30);
            let h = 1e-6;
            let vp = z.values(th + h, 30);
            let vm = z.values(th - h, 30);
            let mut st = z.stepper(th);
            for l in 0..=30 {
                let (val, d) = st.next_pair();
                assert!((val - v[l]).abs() < 1e-12 * z.at_pole(l), "n={n} l={l}");
                let fd = (vp[l] - vm[l]) / (2.0 * h);
                assert!(
                    (d - fd).abs() < 1e-6 * z.at_pole(l) * (l as f64 + 1.0),
                    "n={n} l={l} {d} {fd}"
                );
            }
        }
    }
}
