//! Decay exponents and the hypothesis inequalities of the positive-mass
//! statements, each reported with a signed margin (positive iff satisfied).

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{ModelSpace, ScalBound};

/// Real part of the principal square root: `sqrt(x)` for `x >= 0`, else 0.
pub fn re_sqrt(x: f64) -> f64 {
    if x > 0.0 {
        x.sqrt()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayExponents {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta: f64,
    pub epsilon: f64,
}

/// Outcome of one strict inequality. `margin` is `None` when the inequality
/// cannot be evaluated for the model (the reason is kept in `note`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub holds: bool,
    pub margin: Option<f64>,
    pub note: Option<String>,
}

impl Check {
    fn from_margin(margin: f64) -> Self {
        Self {
            holds: margin > 0.0,
            margin: Some(margin),
            note: None,
        }
    }

    fn from_result(r: Result<(bool, f64)>) -> Self {
        match r {
            Ok((holds, margin)) => Self {
                holds,
                margin: Some(margin),
                note: None,
            },
            Err(e) => Self {
                holds: false,
                margin: None,
                note: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub cond_main_1: Check,
    pub spectrum_bottom_d: Option<f64>,
    pub vgl: Check,
    pub cond_main: Check,
    pub exponents: DecayExponents,
    pub all_hypotheses: bool,
}

impl ConditionReport {
    pub fn to_json(&self) -> Value {
        let d_holds = self.spectrum_bottom_d.is_some_and(|d| d > 0.0);
        let notes: serde_json::Map<String, Value> = [
            ("cond_main_1", &self.cond_main_1.note),
            ("vgl", &self.vgl.note),
            ("cond_main", &self.cond_main.note),
        ]
        .into_iter()
        .filter_map(|(k, n)| {
            n.as_ref()
                .map(|n| (k.to_string(), Value::String(n.clone())))
        })
        .collect();
        json!({
            "cond_main_1": self.cond_main_1.holds,
            "d": self.spectrum_bottom_d,
            "d_positive": d_holds,
            "vgl": self.vgl.holds,
            "cond_main": self.cond_main.holds,
            "margins": {
                "cond_main_1": self.cond_main_1.margin,
                "d": self.spectrum_bottom_d,
                "vgl": self.vgl.margin,
                "cond_main": self.cond_main.margin,
            },
            "exponents": {
                "alpha_plus": self.exponents.alpha_plus,
                "alpha_minus": self.exponents.alpha_minus,
                "beta": self.exponents.beta,
                "epsilon": self.exponents.epsilon,
            },
            "notes": notes,
            "all_hypotheses": self.all_hypotheses,
        })
    }
}

/// `alpha_pm = kc/2 pm eps + Re sqrt(k^2c^2/4 + (scal_pm - c^2 k(k+1))/a_m)` with
/// `scal_+ = sup scal_N`, `scal_- = inf scal_N`.
pub fn compute_alpha(model: &ModelSpace, epsilon: f64) -> Result<(f64, f64)> {
    if !(epsilon >= 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "epsilon = {epsilon} must be >= 0"
        )));
    }
    let k = model.k as f64;
    let c = model.c();
    let am = model.a_m();
    let base = k * c * c * k / 4.0;
    let root = |s: f64| re_sqrt(base + (s - c * c * k * (k + 1.0)) / am);
    let plus = k * c / 2.0 + epsilon + root(model.factor.scal(ScalBound::Sup));
    let minus = k * c / 2.0 - epsilon + root(model.factor.scal(ScalBound::Inf));
    Ok((plus, minus))
}

/// `beta = kc/2 + lambda_N`.
pub fn compute_beta(model: &ModelSpace) -> f64 {
    model.k as f64 * model.c() / 2.0 + model.factor.lambda_n
}

pub fn decay_exponents(model: &ModelSpace, epsilon: f64) -> Result<DecayExponents> {
    let (alpha_plus, alpha_minus) = compute_alpha(model, epsilon)?;
    Ok(DecayExponents {
        alpha_plus,
        alpha_minus,
        beta: compute_beta(model),
        epsilon,
    })
}

/// `m/(m-2) alpha1 - alpha2 < 2 beta`; margin `2 beta - m/(m-2) alpha1 + alpha2`.
pub fn check_vgl(alpha1: f64, alpha2: f64, beta: f64, m: usize) -> Result<(bool, f64)> {
    if m < 3 {
        return Err(Error::InvalidDimension(format!("m = {m} must be >= 3")));
    }
    if !(alpha2 > 0.0) || !(beta > 0.0) || !(alpha1 >= alpha2) {
        return Err(Error::HypothesisViolated(format!(
            "need alpha1 >= alpha2 > 0 and beta > 0 (alpha1 = {alpha1}, alpha2 = {alpha2}, beta = {beta})"
        )));
    }
    let mf = m as f64;
    let margin = 2.0 * beta - mf / (mf - 2.0) * alpha1 + alpha2;
    Ok((margin > 0.0, margin))
}

fn constant_scal(model: &ModelSpace) -> Result<f64> {
    let f = &model.factor;
    if !f.has_constant_scal() {
        return Err(Error::NonConstantScal {
            inf: f.scal_inf,
            sup: f.scal_sup,
        });
    }
    Ok(f.scal_inf)
}

/// `scal_N > c^2 k (n-1)/(m-2)`.
pub fn check_cond_main_1(model: &ModelSpace) -> Result<(bool, f64)> {
    let scal = constant_scal(model)?;
    let k = model.k as f64;
    let n = model.factor.n as f64;
    let c = model.c();
    let margin = scal - c * c * k * (n - 1.0) / (model.m() as f64 - 2.0);
    Ok((margin > 0.0, margin))
}

/// Bottom `d = c^2k^2/4 + (scal_N - c^2 k(k+1))/a_m` of the spectrum of `L_g`.
pub fn spectrum_bottom(model: &ModelSpace) -> Result<f64> {
    let scal = constant_scal(model)?;
    let k = model.k as f64;
    let c = model.c();
    Ok(c * c * k * k / 4.0 + (scal - c * c * k * (k + 1.0)) / model.a_m())
}

/// `b = k c^2 (1-n) / (4(m-1))`.
pub fn cond_main_b(model: &ModelSpace) -> f64 {
    let k = model.k as f64;
    let n = model.factor.n as f64;
    let c = model.c();
    k * c * c * (1.0 - n) / (4.0 * (model.m() as f64 - 1.0))
}

/// `kc(3-m)/(m-2) + m/(m-2) Re sqrt(b + scal_sup/a_m) - Re sqrt(b + scal_inf/a_m) < 2 lambda_N`.
pub fn check_cond_main(model: &ModelSpace) -> Result<(bool, f64)> {
    let n = model.factor.n;
    if n <= 1 {
        return Err(Error::InvalidFactorDimension(n));
    }
    let k = model.k as f64;
    let c = model.c();
    let m = model.m() as f64;
    let am = model.a_m();
    let b = cond_main_b(model);
    let lhs = k * c * (3.0 - m) / (m - 2.0)
        + m / (m - 2.0) * re_sqrt(b + model.factor.scal_sup / am)
        - re_sqrt(b + model.factor.scal_inf / am);
    let margin = 2.0 * model.factor.lambda_n - lhs;
    Ok((margin > 0.0, margin))
}

/// The three members of the chain
/// `kc(3-m)/(m-2) + 2/(m-2) sqrt(b + scal/a_m) <= 2/(m-2) sqrt(scal/a_m)
///  <= 2/sqrt((m-2)(m-1)) lambda_N < 2 lambda_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub terms: [f64; 4],
    pub first: bool,
    pub second: bool,
    pub third: bool,
}

impl ChainCheck {
    pub fn holds(&self) -> bool {
        self.first && self.second && self.third
    }
}

pub fn example_chain(model: &ModelSpace) -> Result<ChainCheck> {
    let scal = constant_scal(model)?;
    let n = model.factor.n;
    if n <= 1 {
        return Err(Error::InvalidFactorDimension(n));
    }
    let lambda = model.factor.lambda_n;
    if lambda * lambda < scal / 4.0 {
        return Err(Error::HypothesisViolated(format!(
            "lambda_N^2 = {} is below scal_N/4 = {}",
            lambda * lambda,
            scal / 4.0
        )));
    }
    let k = model.k as f64;
    let c = model.c();
    let m = model.m() as f64;
    let am = model.a_m();
    let b = cond_main_b(model);
    let t0 = k * c * (3.0 - m) / (m - 2.0) + 2.0 / (m - 2.0) * re_sqrt(b + scal / am);
    let t1 = 2.0 / (m - 2.0) * re_sqrt(scal / am);
    let t2 = 2.0 / ((m - 2.0) * (m - 1.0)).sqrt() * lambda;
    let t3 = 2.0 * lambda;
    let slack = |x: f64| 1e-12 * x.abs().max(1.0);
    Ok(ChainCheck {
        terms: [t0, t1, t2, t3],
        first: t0 <= t1 + slack(t1),
        second: t1 <= t2 + slack(t2),
        third: t2 < t3,
    })
}

pub fn example_chain_check(model: &ModelSpace) -> Result<bool> {
    Ok(example_chain(model)?.holds())
}

/// Evaluates every hypothesis; inequalities that cannot be evaluated count as failed.
pub fn evaluate_conditions(model: &ModelSpace, epsilon: f64) -> Result<ConditionReport> {
    let exponents = decay_exponents(model, epsilon)?;
    let cond_main_1 = Check::from_result(check_cond_main_1(model));
    let spectrum_bottom_d = spectrum_bottom(model).ok();
    let vgl = Check::from_result(check_vgl(
        exponents.alpha_plus,
        exponents.alpha_minus,
        exponents.beta,
        model.m(),
    ));
    let cond_main = Check::from_result(check_cond_main(model));
    let all_hypotheses = cond_main_1.holds
        && spectrum_bottom_d.is_some_and(|d| d > 0.0)
        && vgl.holds
        && cond_main.holds;
    Ok(ConditionReport {
        cond_main_1,
        spectrum_bottom_d,
        vgl,
        cond_main,
        exponents,
        all_hypotheses,
    })
}

impl From<f64> for Check {
    fn from(margin: f64) -> Self {
        Check::from_margin(margin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ClosedFactorData, WarpingProfile};
    use crate::spectra::EigenvalueEntry;

    fn s_h(n: usize, k: usize, c: f64) -> ModelSpace {
        ModelSpace::sphere_times_hyperbolic(n, 1.0, k, c).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let (p, m) = compute_alpha(&s_h(2, 1, 1.0), 0.0).unwrap();
        assert!((p - 1.0).abs() < 1e-15 && (m - 1.0).abs() < 1e-15);
        let flat = ModelSpace::new(
            ClosedFactorData::round_sphere(1, 1.0).unwrap(),
            2,
            WarpingProfile::sinh_c(1.0, 0.0).unwrap(),
        )
        .unwrap();
        let (p, _) = compute_alpha(&flat, 0.0).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        let (p1, m1) = compute_alpha(&s_h(3, 2, 0.3), 0.25).unwrap();
        let (p0, m0) = compute_alpha(&s_h(3, 2, 0.3), 0.0).unwrap();
        assert_eq!(p1 - p0, 0.25);
        assert_eq!(m0 - m1, 0.25);
        assert!(compute_alpha(&s_h(2, 1, 1.0), -1.0).is_err());
    }

    #[test]
    fn beta_examples() {
        assert_eq!(compute_beta(&s_h(2, 1, 1.0)), 1.5);
        assert_eq!(compute_beta(&s_h(3, 1, 0.5)), 1.75);
    }

    #[test]
    fn vgl_examples() {
        assert_eq!(check_vgl(1.0, 1.0, 1.5, 4).unwrap(), (true, 2.0));
        assert_eq!(check_vgl(1.0, 1.0, 0.5, 4).unwrap(), (false, 0.0));
        assert_eq!(check_vgl(2.0, 1.0, 2.0, 3).unwrap(), (false, -1.0));
        assert!(matches!(
            check_vgl(1.0, 2.0, 1.0, 4),
            Err(Error::HypothesisViolated(_))
        ));
        assert!(matches!(
            check_vgl(1.0, 0.0, 1.0, 4),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn cond_main_examples() {
        let m = s_h(2, 1, 1.0);
        assert_eq!(check_cond_main_1(&m).unwrap(), (true, 1.5));
        assert!((spectrum_bottom(&m).unwrap() - 0.25).abs() < 1e-15);
        let (ok, margin) = check_cond_main(&m).unwrap();
        assert!(ok && (margin - 2.0).abs() < 1e-14, "{margin}");
        let circle = s_h(1, 2, 1.0);
        assert!(!check_cond_main_1(&circle).unwrap().0);
        assert!(matches!(
            check_cond_main(&circle),
            Err(Error::InvalidFactorDimension(1))
        ));
        let flat = s_h(3, 2, 0.0);
        assert_eq!(check_cond_main_1(&flat).unwrap(), (true, 6.0));
        assert!((spectrum_bottom(&flat).unwrap() - 6.0 / flat.a_m()).abs() < 1e-15);
    }

    #[test]
    fn non_constant_scal_rejected() {
        let f = ClosedFactorData::explicit(
            3,
            1.0,
            2.0,
            1.0,
            1.0,
            vec![EigenvalueEntry {
                value: 0.0,
                multiplicity: 1,
            }],
        )
        .unwrap();
        let m = ModelSpace::new(f, 1, WarpingProfile::sinh_c(1.0, 0.0).unwrap()).unwrap();
        assert!(matches!(
            check_cond_main_1(&m),
            Err(Error::NonConstantScal { .. })
        ));
        assert!(matches!(
            spectrum_bottom(&m),
            Err(Error::NonConstantScal { .. })
        ));
        assert!(check_cond_main(&m).is_ok());
        let report = evaluate_conditions(&m, 0.0).unwrap();
        assert!(!report.all_hypotheses);
        assert!(report.cond_main_1.note.is_some());
    }

    #[test]
    fn chain_examples() {
        assert!(example_chain_check(&s_h(2, 1, 1.0)).unwrap());
        assert!(example_chain_check(&s_h(3, 2, 0.7)).unwrap());
        let c0 = example_chain(&s_h(4, 3, 0.0)).unwrap();
        assert_eq!(c0.terms[0], c0.terms[1]);
        assert!(c0.holds());
    }

    #[test]
    fn report_json_keys() {
        let r = evaluate_conditions(&s_h(2, 1, 1.0), 0.0).unwrap();
        assert!(r.all_hypotheses);
        let v = r.to_json();
        for key in ["cond_main_1", "d", "vgl", "cond_main", "margins"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["margins"]["vgl"], 2.0);
    }
}
