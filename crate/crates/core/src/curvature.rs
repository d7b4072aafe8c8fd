//! Pointwise curvature of Riemannian products of constant-curvature factors, in an
//! orthonormal product frame: Kulkarni-Nomizu products, Weyl and Cotton tensors and
//! the conformal-flatness test for two factors.
//!
//! Conventions: `R(X,Y,X,Y)` is the sectional curvature, so space forms satisfy
//! `R = (kappa/2) g ∧ g`, and `Ric_bd = g^ac R_abcd`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::integrator::fmt17;

/// Threshold below which a Weyl or Cotton norm counts as zero.
pub const FLATNESS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantCurvatureFactor {
    pub dim: usize,
    pub kappa: f64,
}

impl ConstantCurvatureFactor {
    /// A one-dimensional factor has no curvature; its `kappa` is set to 0.
    pub fn new(dim: usize, kappa: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(
                "factor dimension must be >= 1".into(),
            ));
        }
        if !kappa.is_finite() {
            return Err(Error::InvalidModel(format!(
                "curvature {kappa} is not finite"
            )));
        }
        Ok(Self {
            dim,
            kappa: if dim == 1 { 0.0 } else { kappa },
        })
    }

    pub fn scal(&self) -> f64 {
        (self.dim * (self.dim - 1)) as f64 * self.kappa
    }
}

/// A (0,4)-tensor with `d^4` components, index order `abcd`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    pub dim: usize,
    pub components: Vec<f64>,
}

impl CurvatureTensor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            components: vec![0.0; dim.pow(4)],
        }
    }

    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.components[self.idx(a, b, c, d)]
    }

    fn combine(&self, other: &Self, s: f64) -> Self {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x + s * y)
            .collect();
        Self {
            dim: self.dim,
            components,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `g^ac T_abcd`.
    pub fn ricci(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let inv = inverse_metric(g, self.dim)?;
        let d = self.dim;
        Ok(DMatrix::from_fn(d, d, |b, dd| {
            let mut s = 0.0;
            for a in 0..d {
                for c in 0..d {
                    s += inv[(a, c)] * self.get(a, b, c, dd);
                }
            }
            s
        }))
    }

    pub fn scal(&self, g: &DMatrix<f64>) -> Result<f64> {
        let inv = inverse_metric(g, self.dim)?;
        Ok(self.ricci(g)?.component_mul(&inv).sum())
    }

    /// Largest violation of antisymmetry, pair symmetry and the first Bianchi identity.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let v = self.get(a, b, c, e);
                        worst = worst
                            .max((v + self.get(b, a, c, e)).abs())
                            .max((v + self.get(a, b, e, c)).abs())
                            .max((v - self.get(c, e, a, b)).abs())
                            .max((v + self.get(b, c, a, e) + self.get(c, a, b, e)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest metric trace `g^{ij} T` over the six index pairs.
    pub fn trace_defect(&self, g: &DMatrix<f64>) -> Result<f64> {
        let inv = inverse_metric(g, self.dim)?;
        let d = self.dim;
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let mut worst: f64 = 0.0;
        for (p, q) in pairs {
            for x in 0..d {
                for y in 0..d {
                    let mut s = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            let mut ix = [0usize; 4];
                            ix[p] = i;
                            ix[q] = j;
                            let free: Vec<usize> = (0..4).filter(|t| *t != p && *t != q).collect();
                            ix[free[0]] = x;
                            ix[free[1]] = y;
                            s += inv[(i, j)] * self.get(ix[0], ix[1], ix[2], ix[3]);
                        }
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        Ok(worst)
    }
}

fn inverse_metric(g: &DMatrix<f64>, dim: usize) -> Result<DMatrix<f64>> {
    if g.nrows() != dim || g.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "metric is {}x{}, tensor has dim {dim}",
            g.nrows(),
            g.ncols()
        )));
    }
    g.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidModel("metric is singular".into()))
}

/// `(h ∧ k)_abcd = h_ac k_bd + h_bd k_ac - h_ad k_bc - h_bc k_ad`.
pub fn kulkarni_nomizu(h: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<CurvatureTensor> {
    let d = h.nrows();
    if h.ncols() != d || k.nrows() != d || k.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} and {}x{} tensors",
            h.nrows(),
            h.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    let mut out = CurvatureTensor::zeros(d);
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let i = out.idx(a, b, c, e);
                    out.components[i] = h[(a, c)] * k[(b, e)] + h[(b, e)] * k[(a, c)]
                        - h[(a, e)] * k[(b, c)]
                        - h[(b, c)] * k[(a, e)];
                }
            }
        }
    }
    Ok(out)
}

/// Block-diagonal curvature of the product; mixed components vanish.
pub fn product_curvature(factors: &[ConstantCurvatureFactor]) -> Result<CurvatureTensor> {
    let m: usize = factors.iter().map(|f| f.dim).sum();
    if m < 3 {
        return Err(Error::InvalidDimension(format!(
            "product dimension {m} must be >= 3"
        )));
    }
    let mut out = CurvatureTensor::zeros(m);
    let mut offset = 0;
    for f in factors {
        let mut block = DMatrix::zeros(m, m);
        for i in offset..offset + f.dim {
            block[(i, i)] = 1.0;
        }
        out = out.combine(&kulkarni_nomizu(&block, &block)?, 0.5 * f.kappa);
        offset += f.dim;
    }
    Ok(out)
}

/// `W = R + scal/(2(m-1)(m-2)) g ∧ g - 1/(m-2) Ric ∧ g`; `m >= 4`.
pub fn weyl(r: &CurvatureTensor, g: &DMatrix<f64>) -> Result<CurvatureTensor> {
    let m = r.dim;
    if m <= 3 {
        return Err(Error::DimensionTooSmall(m));
    }
    let ric = r.ricci(g)?;
    let scal = r.scal(g)?;
    let mf = m as f64;
    let gg = kulkarni_nomizu(g, g)?;
    let rg = kulkarni_nomizu(&ric, g)?;
    Ok(r.combine(&gg, scal / (2.0 * (mf - 1.0) * (mf - 2.0)))
        .combine(&rg, -1.0 / (mf - 2.0)))
}

/// A 3-tensor `C_ijk` in dimension 3, index order `ijk`.
#[derive(Debug, Clone, PartialEq)]
pub struct CottonTensor {
    pub components: [f64; 27],
}

impl CottonTensor {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.components[(i * 3 + j) * 3 + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `C_ijk = nabla_k A_ij - nabla_j A_ik` from the covariant derivative
/// `grad_a[(i*3+j)*3+k] = nabla_k A_ij` of `A = Ric - scal/4 g`.
pub fn cotton_from_gradient(grad_a: &[f64; 27]) -> CottonTensor {
    let mut components = [0.0; 27];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                components[(i * 3 + j) * 3 + k] =
                    grad_a[(i * 3 + j) * 3 + k] - grad_a[(i * 3 + k) * 3 + j];
            }
        }
    }
    CottonTensor { components }
}

/// Cotton tensor of a three-dimensional product of constant-curvature factors, where
/// `Ric` and `scal` are parallel and `C` vanishes.
pub fn cotton(factors: &[ConstantCurvatureFactor]) -> Result<CottonTensor> {
    let m: usize = factors.iter().map(|f| f.dim).sum();
    if m != 3 {
        return Err(Error::DimensionMismatch(format!(
            "Cotton tensor needs m = 3, got {m}"
        )));
    }
    Ok(cotton_from_gradient(&[0.0; 27]))
}

/// Cotton tensor of `R x M^2` at a point where `scal_2` has gradient `d_scal` in an
/// orthonormal frame of `M^2`; index 0 is the line. Here `A = (scal_2/4)(g_2 - dt^2)`.
pub fn cotton_line_times_surface(d_scal: [f64; 2]) -> CottonTensor {
    let sign = [-1.0, 1.0, 1.0];
    let mut grad = [0.0; 27];
    for i in 0..3 {
        for k in 1..3 {
            grad[(i * 3 + i) * 3 + k] = 0.25 * d_scal[k - 1] * sign[i];
        }
    }
    cotton_from_gradient(&grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlatnessVerdict {
    ConformallyFlat,
    NotFlat,
}

impl FlatnessVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ConformallyFlat => "CONFORMALLY_FLAT",
            Self::NotFlat => "NOT_FLAT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessClassification {
    pub factors: [ConstantCurvatureFactor; 2],
    /// Verdict of the predicate: flat iff one factor is a line or `kappa_1 = -kappa_2`.
    pub verdict: FlatnessVerdict,
    /// `max |W|` for `m >= 4`, `max |C|` for `m = 3`.
    pub max_abs_tensor: f64,
    /// Whether the numerical tensor agrees with the verdict.
    pub numeric_agrees: bool,
    /// `m_2(m_2-1) scal_1 + m_1(m_1-1) scal_2`, which vanishes on flat products with both dims > 1.
    pub scal_identity: f64,
}

pub fn classify_conformal_flatness(
    factors: &[ConstantCurvatureFactor],
) -> Result<FlatnessClassification> {
    let [f1, f2]: [ConstantCurvatureFactor; 2] = factors.try_into().map_err(|_| {
        Error::InvalidFactorization(format!("expected two factors, got {}", factors.len()))
    })?;
    let m = f1.dim + f2.dim;
    if m < 3 {
        return Err(Error::InvalidFactorization(format!(
            "product dimension {m} must be >= 3"
        )));
    }
    let flat = f1.dim.min(f2.dim) == 1 || f1.kappa == -f2.kappa;
    let verdict = if flat {
        FlatnessVerdict::ConformallyFlat
    } else {
        FlatnessVerdict::NotFlat
    };
    let max_abs_tensor = if m == 3 {
        cotton(factors)?.max_abs()
    } else {
        let g = DMatrix::identity(m, m);
        weyl(&product_curvature(factors)?, &g)?.max_abs()
    };
    let numeric_flat = max_abs_tensor <= FLATNESS_TOLERANCE;
    let (d1, d2) = (f1.dim as f64, f2.dim as f64);
    Ok(FlatnessClassification {
        factors: [f1, f2],
        verdict,
        max_abs_tensor,
        numeric_agrees: numeric_flat == flat,
        scal_identity: d2 * (d2 - 1.0) * f1.scal() + d1 * (d1 - 1.0) * f2.scal(),
    })
}

/// Default sweep curvatures and factor dimensions.
pub const SWEEP_KAPPAS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
pub const SWEEP_DIMS: [(usize, usize); 5] = [(1, 2), (2, 2), (2, 3), (3, 3), (1, 3)];

/// Classifies every pair from `kappas x kappas` for each dimension pair, in order.
pub fn classification_sweep(
    kappas: &[f64],
    dims: &[(usize, usize)],
) -> Result<Vec<FlatnessClassification>> {
    let mut out = Vec::new();
    for &(m1, m2) in dims {
        for &k1 in kappas {
            for &k2 in kappas {
                let f = [
                    ConstantCurvatureFactor::new(m1, k1)?,
                    ConstantCurvatureFactor::new(m2, k2)?,
                ];
                out.push(classify_conformal_flatness(&f)?);
            }
        }
    }
    Ok(out)
}

/// Rows `m1,kappa1,m2,kappa2,verdict,max_abs_weyl_or_cotton`.
pub fn sweep_csv(rows: &[FlatnessClassification]) -> String {
    let mut out = String::from("m1,kappa1,m2,kappa2,verdict,max_abs_weyl_or_cotton\n");
    for r in rows {
        let [a, b] = r.factors;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            a.dim,
            fmt17(a.kappa),
            b.dim,
            fmt17(b.kappa),
            r.verdict.as_str(),
            fmt17(r.max_abs_tensor)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fac(d: usize, k: f64) -> ConstantCurvatureFactor {
        ConstantCurvatureFactor::new(d, k).unwrap()
    }

    #[test]
    fn kulkarni_nomizu_basics() {
        let g = DMatrix::<f64>::identity(4, 4);
        let gg = kulkarni_nomizu(&g, &g).unwrap();
        assert_eq!(gg.get(0, 1, 0, 1), 2.0);
        assert_eq!(gg.get(2, 3, 2, 3), 2.0);
        let h = DMatrix::from_fn(4, 4, |i, j| (i + j) as f64 + if i == j { 1.0 } else { 0.0 });
        let k = DMatrix::from_fn(4, 4, |i, j| ((i * j) as f64).sin() + (i + j) as f64 * 0.1);
        let hk = kulkarni_nomizu(&h, &k).unwrap();
        assert!(
            hk.combine(&kulkarni_nomizu(&k, &h).unwrap(), -1.0)
                .max_abs()
                < 1e-14
        );
        assert!(hk.symmetry_defect() < 1e-12);
        assert!(kulkarni_nomizu(&g, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn space_form_sectional_curvature() {
        let r = product_curvature(&[fac(4, -0.7)]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert!((r.get(a, b, a, b) + 0.7).abs() < 1e-15);
                }
            }
        }
        let g = DMatrix::identity(4, 4);
        assert!(weyl(&r, &g).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn product_contractions() {
        let g = DMatrix::identity(4, 4);
        let sh = product_curvature(&[fac(2, 1.0), fac(2, -1.0)]).unwrap();
        assert_eq!(sh.scal(&g).unwrap(), 0.0);
        let ss = product_curvature(&[fac(2, 1.0), fac(2, 1.0)]).unwrap();
        assert_eq!(ss.ricci(&g).unwrap(), g);
        assert_eq!(ss.scal(&g).unwrap(), 4.0);
        let line = product_curvature(&[fac(1, 0.0), fac(3, 1.0)]).unwrap();
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    assert_eq!(line.get(0, b, c, d), 0.0);
                }
            }
        }
    }

    #[test]
    fn weyl_of_products() {
        let g = DMatrix::identity(4, 4);
        let w = weyl(
            &product_curvature(&[fac(2, 1.0), fac(2, -1.0)]).unwrap(),
            &g,
        )
        .unwrap();
        assert!(w.max_abs() <= 1e-12);
        let w = weyl(&product_curvature(&[fac(2, 1.0), fac(2, 1.0)]).unwrap(), &g).unwrap();
        assert!(w.get(0, 2, 0, 2).abs() > 0.1);
        // mixed plane: scal/((m-1)(m-2)) - (Ric_00 + Ric_22)/(m-2) = 4/6 - 1
        assert!((w.get(0, 2, 0, 2) + 1.0 / 3.0).abs() < 1e-14);
        assert!(w.trace_defect(&g).unwrap() < 1e-12);
        assert!(matches!(
            weyl(
                &product_curvature(&[fac(1, 0.0), fac(2, 1.0)]).unwrap(),
                &DMatrix::identity(3, 3)
            ),
            Err(Error::DimensionTooSmall(3))
        ));
    }

    #[test]
    fn cotton_examples() {
        assert_eq!(cotton(&[fac(1, 0.0), fac(2, 1.0)]).unwrap().max_abs(), 0.0);
        assert_eq!(
            cotton(&[fac(1, 0.0), fac(1, 0.0), fac(1, 0.0)])
                .unwrap()
                .max_abs(),
            0.0
        );
        assert!(cotton(&[fac(2, 1.0), fac(2, 1.0)]).is_err());
        let c = cotton_line_times_surface([0.0, 4.0]);
        assert_eq!(c.get(1, 1, 2), 1.0);
        assert_eq!(c.get(1, 2, 1), -1.0);
        assert_eq!(c.get(0, 0, 2), -1.0);
    }

    #[test]
    fn classification_matches_weyl() {
        let rows = classification_sweep(&SWEEP_KAPPAS, &SWEEP_DIMS).unwrap();
        assert_eq!(rows.len(), 125);
        for r in &rows {
            assert!(r.numeric_agrees, "{r:?}");
            if r.verdict == FlatnessVerdict::NotFlat {
                assert!(r.max_abs_tensor >= 0.1);
            } else if r.factors[0].dim > 1 && r.factors[1].dim > 1 {
                assert_eq!(r.scal_identity, 0.0);
            }
        }
        assert!(classify_conformal_flatness(&[fac(3, 1.0)]).is_err());
        assert!(
            sweep_csv(&rows).starts_with("m1,kappa1,m2,kappa2,verdict,max_abs_weyl_or_cotton\n1,")
        );
    }
}
