//! Laplace and Dirac eigenvalue catalogs, counting functions, and the mode
//! selections forced by the rotational symmetry of the `S^k` fiber.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::unit_sphere_volume;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueEntry {
    pub value: f64,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpectrumOperator {
    /// Laplacian of the round `S^dim` of sectional curvature `curvature`.
    LaplaceSphere {
        dim: usize,
        curvature: f64,
    },
    /// Square of the Dirac operator on the round `S^dim` of sectional curvature `curvature`.
    DiracSphereSquared {
        dim: usize,
        curvature: f64,
    },
    ExplicitClosedFactor,
}

/// Distinct eigenvalues in increasing order with their multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCatalog {
    pub operator: SpectrumOperator,
    pub entries: Vec<EigenvalueEntry>,
    pub truncation_count: usize,
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Dimension of the space of degree-`l` spherical harmonics on `S^k`.
pub fn harmonic_dimension(k: usize, l: usize) -> u64 {
    let (k, l) = (k as u64, l as u64);
    if l == 0 {
        return 1;
    }
    binomial(l + k, k) - if l >= 2 { binomial(l + k - 2, k) } else { 0 }
}

/// First `count` distinct Laplace eigenvalues `curvature * l(l+k-1)` of the round `S^k`.
pub fn sphere_laplace_catalog(k: usize, curvature: f64, count: usize) -> Result<SpectrumCatalog> {
    if k < 1 {
        return Err(Error::InvalidDimension(format!(
            "sphere dimension {k} must be >= 1"
        )));
    }
    if count < 1 || !(curvature > 0.0) {
        return Err(Error::InvalidSpectrum(format!(
            "need count >= 1 and positive curvature, got count = {count}, curvature = {curvature}"
        )));
    }
    let entries = (0..count)
        .map(|l| EigenvalueEntry {
            value: curvature * (l * (l + k - 1)) as f64,
            multiplicity: harmonic_dimension(k, l),
        })
        .collect();
    Ok(SpectrumCatalog {
        operator: SpectrumOperator::LaplaceSphere { dim: k, curvature },
        entries,
        truncation_count: count,
    })
}

/// First `count` distinct eigenvalues `curvature * (k/2 + l)^2` of `(D^{S^k})^2`.
pub fn sphere_dirac_squared_catalog(
    k: usize,
    curvature: f64,
    count: usize,
) -> Result<SpectrumCatalog> {
    if k < 1 {
        return Err(Error::InvalidDimension(format!(
            "sphere dimension {k} must be >= 1"
        )));
    }
    if count < 1 || !(curvature > 0.0) {
        return Err(Error::InvalidSpectrum(format!(
            "need count >= 1 and positive curvature, got count = {count}, curvature = {curvature}"
        )));
    }
    let spinor_rank = 1u64 << (k / 2);
    let entries = (0..count)
        .map(|l| {
            let lam = 0.5 * k as f64 + l as f64;
            EigenvalueEntry {
                value: curvature * lam * lam,
                // both signs +-(k/2 + l) square to the same value
                multiplicity: 2 * spinor_rank * binomial((k + l - 1) as u64, l as u64),
            }
        })
        .collect();
    Ok(SpectrumCatalog {
        operator: SpectrumOperator::DiracSphereSquared { dim: k, curvature },
        entries,
        truncation_count: count,
    })
}

/// Bottom `(n/2) c` of `|D|` on the round `S^n` of sectional curvature `c^2`.
pub fn sphere_dirac_bottom(n: usize, c: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidDimension(format!(
            "sphere dimension {n} must be >= 1"
        )));
    }
    Ok(0.5 * n as f64 * c)
}

pub(crate) fn validate_entries(entries: &[EigenvalueEntry]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::InvalidSpectrum("empty eigenvalue list".into()));
    }
    for (i, e) in entries.iter().enumerate() {
        if !e.value.is_finite() {
            return Err(Error::InvalidSpectrum(format!("entry {i} is not finite")));
        }
        if e.multiplicity == 0 {
            return Err(Error::InvalidSpectrum(format!(
                "entry {i} has zero multiplicity"
            )));
        }
        if i > 0 && !(e.value > entries[i - 1].value) {
            return Err(Error::InvalidSpectrum(format!(
                "entries must be strictly increasing: {} after {}",
                e.value,
                entries[i - 1].value
            )));
        }
    }
    Ok(())
}

impl SpectrumCatalog {
    /// Catalog from a nondecreasing list; equal neighbours are merged.
    pub fn explicit(raw: &[EigenvalueEntry]) -> Result<Self> {
        let mut entries: Vec<EigenvalueEntry> = Vec::with_capacity(raw.len());
        for (i, e) in raw.iter().enumerate() {
            if let Some(last) = entries.last_mut() {
                if e.value < last.value {
                    return Err(Error::InvalidSpectrum(format!(
                        "line {}: eigenvalue {} is smaller than its predecessor {}",
                        i + 1,
                        e.value,
                        last.value
                    )));
                }
                if e.value == last.value {
                    last.multiplicity += e.multiplicity;
                    continue;
                }
            }
            entries.push(*e);
        }
        validate_entries(&entries)?;
        let truncation_count = entries.len();
        Ok(Self {
            operator: SpectrumOperator::ExplicitClosedFactor,
            entries,
            truncation_count,
        })
    }

    /// Largest value up to which the catalog is known to be complete.
    pub fn covered_up_to(&self) -> f64 {
        self.entries
            .last()
            .map(|e| e.value)
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// `N(x)`: number of eigenvalues `<= x`, counted with multiplicity.
    pub fn weyl_count(&self, x: f64) -> Result<u64> {
        if !(x >= 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "counting argument {x} must be >= 0"
            )));
        }
        if x > self.covered_up_to() {
            return Err(Error::TruncationExceeded {
                x,
                covered: self.covered_up_to(),
            });
        }
        Ok(self
            .entries
            .iter()
            .take_while(|e| e.value <= x)
            .map(|e| e.multiplicity)
            .sum())
    }

    pub fn distinct_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// Eigenvalues repeated according to multiplicity.
    pub fn multiplicity_counted(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.value, e.multiplicity as usize))
            .collect()
    }

    /// Only the constant mode survives on the `S^k` fiber for the scalar Green function.
    pub fn scalar_fiber_modes(&self) -> SpectrumCatalog {
        let entries: Vec<_> = self
            .entries
            .iter()
            .copied()
            .filter(|e| e.value == 0.0)
            .collect();
        SpectrumCatalog {
            operator: self.operator,
            truncation_count: entries.len(),
            entries,
        }
    }
}

/// `rho^2 = k^2/4`: the only fiber eigenvalue of `(D^{S^k})^2` met by the spinor Green function.
pub fn dirac_fiber_rho(k: usize) -> f64 {
    0.5 * k as f64
}

/// Leading constant of `N(x) ~ C x^{dim/2}` for a closed manifold of the given volume.
pub fn weyl_constant(dim: usize, volume: f64) -> f64 {
    let ball = unit_sphere_volume(dim - 1) / dim as f64;
    ball * volume / (2.0 * std::f64::consts::PI).powi(dim as i32)
}

/// Parses a two-column `eigenvalue multiplicity` listing; `#` starts a comment.
pub fn parse_spectrum_text(text: &str) -> Result<Vec<EigenvalueEntry>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let cols: Vec<&str> = content
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(Error::InvalidSpectrum(format!(
                "line {}: expected 2 columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        let value: f64 = cols[0].parse().map_err(|_| {
            Error::InvalidSpectrum(format!("line {}: bad eigenvalue '{}'", lineno + 1, cols[0]))
        })?;
        let multiplicity: u64 = cols[1].parse().map_err(|_| {
            Error::InvalidSpectrum(format!(
                "line {}: bad multiplicity '{}'",
                lineno + 1,
                cols[1]
            ))
        })?;
        out.push(EigenvalueEntry {
            value,
            multiplicity,
        });
    }
    Ok(out)
}

pub fn load_spectrum_file(path: &Path) -> Result<SpectrumCatalog> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    SpectrumCatalog::explicit(&parse_spectrum_text(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(c: &SpectrumCatalog) -> Vec<(f64, u64)> {
        c.entries
            .iter()
            .map(|e| (e.value, e.multiplicity))
            .collect()
    }

    /// Dimension of degree-l harmonics by brute force: monomials of degree l in
    /// k+1 variables minus those of degree l-2.
    fn brute_harmonic_dim(k: usize, l: usize) -> u64 {
        let monomials = |deg: usize| -> u64 {
            let mut count = 0u64;
            let vars = k + 1;
            // enumerate exponent vectors summing to deg
            fn rec(vars: usize, left: usize, count: &mut u64) {
                if vars == 1 {
                    *count += 1;
                    return;
                }
                for e in 0..=left {
                    rec(vars - 1, left - e, count);
                }
            }
            rec(vars, deg, &mut count);
            count
        };
        monomials(l) - if l >= 2 { monomials(l - 2) } else { 0 }
    }

    #[test]
    fn laplace_catalogs() {
        assert_eq!(
            pairs(&sphere_laplace_catalog(2, 1.0, 3).unwrap()),
            vec![(0.0, 1), (2.0, 3), (6.0, 5)]
        );
        assert_eq!(
            pairs(&sphere_laplace_catalog(1, 1.0, 3).unwrap()),
            vec![(0.0, 1), (1.0, 2), (4.0, 2)]
        );
        assert_eq!(
            pairs(&sphere_laplace_catalog(2, 4.0, 2).unwrap()),
            vec![(0.0, 1), (8.0, 3)]
        );
        assert!(matches!(
            sphere_laplace_catalog(0, 1.0, 3),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn harmonic_dimension_matches_brute_force() {
        for k in 1..=5 {
            for l in 0..=8 {
                assert_eq!(
                    harmonic_dimension(k, l),
                    brute_harmonic_dim(k, l),
                    "k={k} l={l}"
                );
            }
        }
    }

    #[test]
    fn dirac_bottom() {
        assert_eq!(sphere_dirac_bottom(2, 1.0).unwrap(), 1.0);
        assert_eq!(sphere_dirac_bottom(3, 1.0).unwrap(), 1.5);
        assert_eq!(sphere_dirac_bottom(2, 0.5).unwrap(), 0.5);
        assert!(sphere_dirac_bottom(0, 1.0).is_err());
        // equality case of Friedrich's bound on the round sphere: lambda^2 = n scal / (4(n-1))
        for n in 2..7 {
            let lam = sphere_dirac_bottom(n, 1.0).unwrap();
            let scal = (n * (n - 1)) as f64;
            assert!((lam * lam - n as f64 * scal / (4.0 * (n as f64 - 1.0))).abs() < 1e-12);
        }
        let cat = sphere_dirac_squared_catalog(3, 1.0, 3).unwrap();
        assert_eq!(cat.distinct_values(), vec![2.25, 6.25, 12.25]);
    }

    #[test]
    fn counting_function() {
        let s2 = sphere_laplace_catalog(2, 1.0, 10).unwrap();
        assert_eq!(s2.weyl_count(2.0).unwrap(), 4);
        assert_eq!(s2.weyl_count(0.0).unwrap(), 1);
        assert_eq!(s2.weyl_count(5.9).unwrap(), 4);
        assert!(matches!(
            s2.weyl_count(1e4),
            Err(Error::TruncationExceeded { .. })
        ));
        let s1 = sphere_laplace_catalog(1, 1.0, 5).unwrap();
        assert_eq!(s1.weyl_count(0.0).unwrap(), 1);
    }

    #[test]
    fn sandwich_on_multiplicity_counted_index() {
        let cat = sphere_laplace_catalog(2, 1.0, 40).unwrap();
        let values = cat.multiplicity_counted();
        for (i, &mu) in values.iter().enumerate().skip(1) {
            if mu > cat.covered_up_to() {
                break;
            }
            let lo = cat.weyl_count((mu - 1.0).max(0.0)).unwrap();
            let hi = cat.weyl_count(mu).unwrap();
            assert!(
                lo as usize <= i && i as u64 <= hi,
                "i={i} mu={mu} lo={lo} hi={hi}"
            );
        }
    }

    #[test]
    fn weyl_law_on_spheres() {
        for k in 1..=3 {
            let cat = sphere_laplace_catalog(k, 1.0, 400).unwrap();
            let c = weyl_constant(k, unit_sphere_volume(k));
            for x in [100.0, 1000.0, 10000.0] {
                let ratio = cat.weyl_count(x).unwrap() as f64 * f64::powf(x, -(k as f64) / 2.0);
                assert!(
                    (ratio - c).abs() <= 0.2 * c,
                    "k={k} x={x} ratio={ratio} c={c}"
                );
            }
        }
    }

    #[test]
    fn explicit_lists() {
        let parsed = parse_spectrum_text("# eig mult\n0 1\n2 3 # comment\n2 1\n\n6, 5\n").unwrap();
        let cat = SpectrumCatalog::explicit(&parsed).unwrap();
        assert_eq!(pairs(&cat), vec![(0.0, 1), (2.0, 4), (6.0, 5)]);
        let bad = parse_spectrum_text("0 1\n3 1\n2 1\n").unwrap();
        assert!(matches!(
            SpectrumCatalog::explicit(&bad),
            Err(Error::InvalidSpectrum(_))
        ));
        assert!(parse_spectrum_text("0 1 2\n").is_err());
        assert!(parse_spectrum_text("x 1\n").is_err());
    }

    #[test]
    fn fiber_mode_selection() {
        let cat = sphere_laplace_catalog(3, 1.0, 6).unwrap();
        assert_eq!(pairs(&cat.scalar_fiber_modes()), vec![(0.0, 1)]);
        assert_eq!(dirac_fiber_rho(4), 2.0);
    }
}
