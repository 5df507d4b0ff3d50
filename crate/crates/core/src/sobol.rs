//! Closed-form Sobol indices of a star-kernel predictor.
//!
//! With `Γ_i = Σ_q w_q k0^i(x_q)k0^i(x_q)ᵀ` (the vectors taken against the
//! design coordinates of dimension `i`), the variance of submodel `m_I` is
//! `σ⁴ αᵀ (⊙_{i∈I} Γ_i) α` and the variance of the whole predictor is
//! `σ⁴ αᵀ (⊙_i (1 + Γ_i) - 1) α`. Every index is one quadratic form; no
//! lower-order index is needed to get a higher-order one.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::anova_kernel::{AnovaMode, MAX_EXPANSION_DIM};
use crate::error::{Error, Result};
use crate::gp_model::FittedModel;
use crate::subset::Subset;

/// Indices in `[-CLIP_TOLERANCE, 0)` are rounding noise and are clipped to 0.
pub const CLIP_TOLERANCE: f64 = 1e-10;

/// Total variance below `CONSTANT_MODEL_THRESHOLD · σ⁴ ‖α‖²` means the
/// predictor is constant.
pub const CONSTANT_MODEL_THRESHOLD: f64 = 1e-14;

/// Default largest interaction order reported.
pub const DEFAULT_MAX_ORDER: usize = 3;

#[derive(Debug, Clone)]
pub struct GammaSet {
    gammas: Vec<DMatrix<f64>>,
}

impl GammaSet {
    /// Wraps precomputed matrices (all square, same size).
    pub fn from_matrices(gammas: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = gammas.first().map_or(0, DMatrix::nrows);
        if let Some(g) = gammas.iter().find(|g| g.nrows() != n || g.ncols() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.ncols(),
            });
        }
        Ok(Self { gammas })
    }

    pub fn dim(&self) -> usize {
        self.gammas.len()
    }

    pub fn get(&self, i: usize) -> &DMatrix<f64> {
        &self.gammas[i]
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.gammas
    }

    /// `⊙_{i∈I} Γ_i` (all-ones matrix for the empty set).
    pub fn hadamard(&self, subset: Subset) -> DMatrix<f64> {
        let n = self.gammas.first().map_or(0, DMatrix::nrows);
        let mut h = DMatrix::from_element(n, n, 1.0);
        for i in subset.dims() {
            h.component_mul_assign(&self.gammas[i]);
        }
        h
    }
}

/// One `Γ_i` per dimension, integrated with the same rule that centers `k0^i`.
pub fn compute_gammas(model: &FittedModel) -> Result<GammaSet> {
    let comps = model.kernel().star_components().ok_or(Error::NotStarMode)?;
    let reps = model.design_representers().ok_or(Error::NotStarMode)?;
    let design = model.design();
    let n = design.n();
    let gammas = comps
        .iter()
        .enumerate()
        .map(|(i, zk)| {
            let col: Vec<f64> = design.column(i).collect();
            let rule = zk.rule();
            // row q: sqrt(w_q) k0(x_q, X_{·,i}), so that Γ = VᵀV
            let v = DMatrix::from_fn(rule.len(), n, |q, j| {
                let node = rule.nodes()[q];
                let rq = zk.representer_at_nodes()[q];
                rule.weights()[q].sqrt() * zk.k0_from_representers(node, rq, col[j], reps[i][j])
            });
            let g = v.tr_mul(&v);
            (&g + g.transpose()) * 0.5
        })
        .collect();
    Ok(GammaSet { gammas })
}

fn quad_form(m: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    a.dot(&(m * a))
}

fn check_star(model: &FittedModel, gammas: &GammaSet) -> Result<()> {
    if model.kernel().mode() != AnovaMode::Star {
        return Err(Error::NotStarMode);
    }
    if gammas.dim() != model.kernel().dim() {
        return Err(Error::DimensionMismatch {
            expected: model.kernel().dim(),
            got: gammas.dim(),
        });
    }
    Ok(())
}

/// `Var(m_I) = σ⁴ αᵀ (⊙_{i∈I} Γ_i) α` for a non-empty `I`.
pub fn submodel_variance(model: &FittedModel, gammas: &GammaSet, subset: Subset) -> Result<f64> {
    check_star(model, gammas)?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    subset.check(gammas.dim())?;
    let s2 = model.kernel().scale();
    Ok(s2 * s2 * quad_form(&gammas.hadamard(subset), model.alpha()))
}

/// `Var(m) = σ⁴ αᵀ (⊙_i (1 + Γ_i) - 1) α`.
pub fn total_model_variance(model: &FittedModel, gammas: &GammaSet) -> Result<f64> {
    check_star(model, gammas)?;
    let n = model.design().n();
    let ones = DMatrix::from_element(n, n, 1.0);
    let mut h = ones.clone();
    for g in gammas.matrices() {
        h.component_mul_assign(&g.add_scalar(1.0));
    }
    let s2 = model.kernel().scale();
    Ok(s2 * s2 * quad_form(&(h - ones), model.alpha()))
}

/// Which indices to report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// Every non-empty subset up to this size.
    pub max_order: usize,
    /// Additional subsets, reported whatever their size.
    pub extra: Vec<Subset>,
}

impl Default for Selection {
    fn default() -> Self {
        Self {
            max_order: DEFAULT_MAX_ORDER,
            extra: Vec::new(),
        }
    }
}

impl Selection {
    pub fn up_to_order(max_order: usize) -> Self {
        Self {
            max_order,
            extra: Vec::new(),
        }
    }

    /// All `2^d - 1` non-empty subsets.
    pub fn all() -> Self {
        Self::up_to_order(usize::MAX)
    }

    pub fn only(subsets: Vec<Subset>) -> Self {
        Self {
            max_order: 0,
            extra: subsets,
        }
    }

    fn resolve(&self, d: usize) -> Result<Vec<Subset>> {
        let mut out: Vec<Subset> = Vec::new();
        if self.max_order > 0 {
            if self.max_order >= d && d > MAX_EXPANSION_DIM {
                return Err(Error::TooManyDimensions(d, MAX_EXPANSION_DIM));
            }
            if d >= 64 {
                return Err(Error::TooManyDimensions(d, 63));
            }
            out.extend(Subset::up_to_order(d, self.max_order));
        }
        for &s in &self.extra {
            if s.is_empty() {
                return Err(Error::EmptySubset);
            }
            s.check(d)?;
            out.push(s);
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub total_variance: f64,
    pub indices: BTreeMap<Subset, f64>,
    /// `1 - Σ` of the reported indices.
    pub residual_mass: f64,
    /// Number of indices in `[-1e-10, 0)` clipped to zero.
    pub clipped: usize,
}

impl SensitivityReport {
    pub fn get(&self, subset: Subset) -> Option<f64> {
        self.indices.get(&subset).copied()
    }

    pub fn sum(&self) -> f64 {
        self.indices.values().sum()
    }

    /// `subset,index` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subset,index\n");
        for (s, v) in &self.indices {
            out.push_str(&format!("\"{s}\",{v}\n"));
        }
        out
    }
}

/// Sobol indices `S_I = Var(m_I) / Var(m)` for the selected subsets.
pub fn sobol_indices(model: &FittedModel, selection: &Selection) -> Result<SensitivityReport> {
    let gammas = compute_gammas(model)?;
    sobol_indices_with(model, &gammas, selection)
}

/// As [`sobol_indices`], with precomputed `Γ` matrices.
pub fn sobol_indices_with(
    model: &FittedModel,
    gammas: &GammaSet,
    selection: &Selection,
) -> Result<SensitivityReport> {
    check_star(model, gammas)?;
    let subsets = selection.resolve(gammas.dim())?;
    let total = total_model_variance(model, gammas)?;
    let s2 = model.kernel().scale();
    let floor = CONSTANT_MODEL_THRESHOLD * s2 * s2 * model.alpha().norm_squared();
    if total < -floor {
        return Err(Error::NegativeVariance(total));
    }
    if !(total > floor) {
        return Err(Error::ConstantModel(total));
    }
    let mut indices = BTreeMap::new();
    let mut clipped = 0;
    for s in subsets {
        let mut v = submodel_variance(model, gammas, s)? / total;
        if v < 0.0 {
            if v < -CLIP_TOLERANCE {
                return Err(Error::NegativeIndex { mask: s.0, value: v });
            }
            clipped += 1;
            v = 0.0;
        }
        indices.insert(s, v);
    }
    let residual_mass = 1.0 - indices.values().sum::<f64>();
    Ok(SensitivityReport {
        total_variance: total,
        indices,
        residual_mass,
        clipped,
    })
}
