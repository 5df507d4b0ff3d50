//! Oracle checks of a fitted star-kernel model on the tensor grid of its own
//! quadrature rules.

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::gp_model::FittedModel;
use crate::oracle::{anova_terms, grid_inner, grid_variance, GridFunction, MAX_GRID_DIM};
use crate::quadrature::QuadratureRule;
use crate::sobol::{compute_gammas, sobol_indices_with, submodel_variance, GammaSet, Selection};
use crate::subset::Subset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            passed: value <= tolerance,
            note: None,
        }
    }

    fn failed(name: &'static str, tolerance: f64, note: String) -> Self {
        Self {
            name,
            value: f64::INFINITY,
            tolerance,
            passed: false,
            note: Some(note),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let mut s = format!(
                    "{} {}: {:.3e} (tolerance {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
                if let Some(n) = &c.note {
                    s.push_str(&format!(" [{n}]"));
                }
                s
            })
            .collect()
    }
}

/// The model's own centering rules, one per dimension.
pub fn model_rules(model: &FittedModel) -> Result<Vec<QuadratureRule>> {
    Ok(model
        .kernel()
        .star_components()
        .ok_or(Error::NotStarMode)?
        .iter()
        .map(|zk| zk.rule().clone())
        .collect())
}

/// Runs every check with freshly computed `Γ` matrices.
pub fn verify_model(model: &FittedModel, tol: &Tolerances) -> Result<VerifyReport> {
    let gammas = compute_gammas(model)?;
    run_checks(model, &gammas, tol)
}

/// Runs every check, using `gammas` for the closed-form variances.
///
/// * `submodel`: closed-form terms against the recursive grid projection.
/// * `mean`: largest weighted mean of a term along one of its own coordinates.
/// * `inner`: largest grid inner product between two distinct terms.
/// * `normalization`: `|Σ S_I - 1|` over all subsets.
/// * `variance_normalization`: `|Σ Var(m_I) / Var_grid(m) - 1|`.
/// * `index`: largest gap between `S_I` and the grid variance ratio.
pub fn run_checks(model: &FittedModel, gammas: &GammaSet, tol: &Tolerances) -> Result<VerifyReport> {
    let d = model.kernel().dim();
    if d > MAX_GRID_DIM {
        return Err(Error::TooManyDimensions(d, MAX_GRID_DIM));
    }
    let rules = model_rules(model)?;
    let full = GridFunction::from_fn(rules.clone(), |x| model.predict(x))?;
    let oracle = anova_terms(&full, Subset::full(d))?;

    let mut terms = Vec::new();
    let mut term_gap: f64 = (oracle[&Subset::EMPTY].values()[0] - model.constant_term()).abs();
    for s in Subset::all(d).skip(1) {
        let grid = GridFunction::from_fn(rules.clone(), |x| model.predict_submodel(s, x))?;
        let expected = oracle[&s].expand_to(&full)?;
        for (a, b) in grid.values().iter().zip(expected.values()) {
            term_gap = term_gap.max((a - b).abs());
        }
        terms.push((s, grid));
    }

    let mut mean_gap: f64 = 0.0;
    for (s, grid) in &terms {
        let restricted = grid.marginalize(*s)?;
        mean_gap = mean_gap.max(restricted.max_axis_mean()?);
    }

    let constant = GridFunction::from_fn(rules.clone(), |_| Ok(model.constant_term()))?;
    let mut all: Vec<&GridFunction> = vec![&constant];
    all.extend(terms.iter().map(|(_, g)| g));
    let mut inner_gap: f64 = 0.0;
    for a in 0..all.len() {
        for b in a + 1..all.len() {
            inner_gap = inner_gap.max(grid_inner(all[a], all[b], &full)?.abs());
        }
    }

    let grid_total = grid_variance(&full);
    let mut checks = vec![
        Check::new("submodel", term_gap, tol.submodel),
        Check::new("mean", mean_gap, tol.mean),
        Check::new("inner", inner_gap, tol.inner),
    ];

    match sobol_indices_with(model, gammas, &Selection::all()) {
        Ok(report) => {
            checks.push(Check::new("normalization", (report.sum() - 1.0).abs(), tol.normalization));
            let mut gap: f64 = 0.0;
            for (s, grid) in &terms {
                gap = gap.max((report.indices[s] - grid_variance(grid) / grid_total).abs());
            }
            checks.push(Check::new("index", gap, tol.index));
        }
        Err(e) => {
            checks.push(Check::failed("normalization", tol.normalization, e.to_string()));
            checks.push(Check::failed("index", tol.index, e.to_string()));
        }
    }

    let mut var_sum = 0.0;
    for s in Subset::all(d).skip(1) {
        var_sum += submodel_variance(model, gammas, s)?;
    }
    let ratio_gap = if grid_total > 0.0 {
        (var_sum / grid_total - 1.0).abs()
    } else {
        var_sum.abs()
    };
    checks.insert(4, Check::new("variance_normalization", ratio_gap, tol.normalization));
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anova_kernel::AnovaKernel;
    use crate::gp_model::fit;
    use crate::kernels::UnivariateKernel;
    use crate::quadrature::Measure;
    use crate::testbed::{lhs_maximin, DoeSpec, TestFunction};
    use crate::zero_mean::decompose;

    fn model() -> FittedModel {
        let zk = decompose(
            UnivariateKernel::matern32(1.0).unwrap(),
            Measure::uniform(0.0, 1.0).unwrap().rule(30).unwrap(),
        )
        .unwrap();
        let design = lhs_maximin(&DoeSpec::unit_cube(12, 2).with_restarts(10), 1).unwrap();
        let f = TestFunction::g_function(vec![1.0, 2.0]).unwrap().eval_design(&design).unwrap();
        fit(AnovaKernel::star(vec![zk; 2], 1.0).unwrap(), design, f, 0.0).unwrap()
    }

    #[test]
    fn clean_model_passes() {
        let r = verify_model(&model(), &Tolerances::default()).unwrap();
        assert!(r.passed(), "{:#?}", r.lines());
        assert_eq!(r.checks.len(), 6);
    }

    #[test]
    fn sign_error_in_gamma_fails_normalization() {
        let m = model();
        let g = compute_gammas(&m).unwrap();
        let flipped = GammaSet::from_matrices(g.matrices().iter().map(|x| -x).collect()).unwrap();
        let r = run_checks(&m, &flipped, &Tolerances::default()).unwrap();
        assert!(!r.passed());
        let vn = r.checks.iter().find(|c| c.name == "variance_normalization").unwrap();
        assert!(!vn.passed);
    }

    #[test]
    fn tolerances_are_respected() {
        let tight = Tolerances {
            submodel: 0.0,
            mean: 0.0,
            inner: 0.0,
            normalization: 0.0,
            index: 0.0,
        };
        let r = verify_model(&model(), &tight).unwrap();
        assert!(r.lines().iter().all(|l| l.starts_with("PASS") || l.starts_with("FAIL")));
        assert!(!r.passed());
    }
}
