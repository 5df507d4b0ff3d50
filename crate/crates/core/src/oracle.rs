//! Brute-force functional ANOVA on tensor grids.
//!
//! A [`GridFunction`] holds values on the tensor product of one quadrature
//! rule per coordinate. Projections integrate out coordinates with the rule
//! weights and subtract every lower-order term, so the result is the exact
//! ANOVA decomposition of the grid function under the discrete product
//! measure. Nothing here touches kernels; it exists to check the closed forms
//! in [`crate::gp_model`] and [`crate::sobol`] from the outside.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::subset::Subset;

/// Largest dimension for which a full tensor grid is built.
pub const MAX_GRID_DIM: usize = 3;

/// Values on a tensor grid over the coordinates in `dims`.
///
/// Values are stored row-major in ascending coordinate order (the last
/// coordinate varies fastest). A grid over no coordinates holds one value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dims: Subset,
    rules: Vec<QuadratureRule>,
    values: Vec<f64>,
}

impl GridFunction {
    /// Tabulates `f` on the tensor grid of `rules` (coordinate `i` uses `rules[i]`).
    pub fn from_fn<F>(rules: Vec<QuadratureRule>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let d = rules.len();
        if d == 0 || d > MAX_GRID_DIM {
            return Err(Error::TooManyDimensions(d, MAX_GRID_DIM));
        }
        let dims = Subset::full(d);
        let total: usize = rules.iter().map(QuadratureRule::len).product();
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let idx = unravel(flat, &rules);
            for (i, &k) in idx.iter().enumerate() {
                x[i] = rules[i].nodes()[k];
            }
            let v = f(&x)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("grid value {v} at {x:?}")));
            }
            values.push(v);
        }
        Ok(Self { dims, rules, values })
    }

    /// Wraps tabulated values; `values.len()` must equal the grid size.
    pub fn from_values(dims: Subset, rules: Vec<QuadratureRule>, values: Vec<f64>) -> Result<Self> {
        if dims.len() != rules.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: rules.len(),
            });
        }
        let total: usize = rules.iter().map(QuadratureRule::len).product();
        if values.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value {v}")));
        }
        Ok(Self { dims, rules, values })
    }

    fn constant(value: f64) -> Self {
        Self {
            dims: Subset::EMPTY,
            rules: Vec::new(),
            values: vec![value],
        }
    }

    pub fn dims(&self) -> Subset {
        self.dims
    }

    pub fn rules(&self) -> &[QuadratureRule] {
        &self.rules
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Product weight of each grid cell.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|flat| {
                unravel(flat, &self.rules)
                    .iter()
                    .zip(&self.rules)
                    .map(|(&k, r)| r.weights()[k])
                    .product()
            })
            .collect()
    }

    /// Node coordinates of grid cell `flat`, in ascending coordinate order.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        unravel(flat, &self.rules)
            .iter()
            .zip(&self.rules)
            .map(|(&k, r)| r.nodes()[k])
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    /// Integrates out every coordinate not in `keep`.
    pub fn marginalize(&self, keep: Subset) -> Result<Self> {
        if !keep.is_subset_of(self.dims) {
            return Err(Error::BadSubset {
                mask: keep.0,
                dim: self.dims.len(),
            });
        }
        let local: Vec<bool> = self.dims.dims().map(|g| keep.contains(g)).collect();
        let rules: Vec<QuadratureRule> = self
            .rules
            .iter()
            .zip(&local)
            .filter(|(_, &k)| k)
            .map(|(r, _)| r.clone())
            .collect();
        let total: usize = rules.iter().map(QuadratureRule::len).product();
        let mut values = vec![0.0; total];
        for (flat, &v) in self.values.iter().enumerate() {
            let idx = unravel(flat, &self.rules);
            let mut w = 1.0;
            let mut kept = Vec::with_capacity(rules.len());
            for (pos, &k) in idx.iter().enumerate() {
                if local[pos] {
                    kept.push(k);
                } else {
                    w *= self.rules[pos].weights()[k];
                }
            }
            values[ravel(&kept, &rules)] += w * v;
        }
        Ok(Self {
            dims: keep,
            rules,
            values,
        })
    }

    /// Repeats the values along the extra coordinates of `parent`.
    pub fn expand_to(&self, parent: &GridFunction) -> Result<Self> {
        if !self.dims.is_subset_of(parent.dims) {
            return Err(Error::BadSubset {
                mask: self.dims.0,
                dim: parent.dims.len(),
            });
        }
        let local: Vec<bool> = parent.dims.dims().map(|g| self.dims.contains(g)).collect();
        let values = (0..parent.values.len())
            .map(|flat| {
                let idx = unravel(flat, &parent.rules);
                let kept: Vec<usize> = idx.iter().zip(&local).filter(|(_, &k)| k).map(|(&i, _)| i).collect();
                self.values[ravel(&kept, &self.rules)]
            })
            .collect();
        Ok(Self {
            dims: parent.dims,
            rules: parent.rules.clone(),
            values,
        })
    }

    /// Largest absolute weighted mean along any single own coordinate.
    pub fn max_axis_mean(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for g in self.dims.dims() {
            let rest = Subset(self.dims.0 & !(1u64 << g));
            let m = self.marginalize(rest)?;
            worst = m.values.iter().fold(worst, |a, v| a.max(v.abs()));
        }
        Ok(worst)
    }
}

fn unravel(mut flat: usize, rules: &[QuadratureRule]) -> Vec<usize> {
    let mut idx = vec![0; rules.len()];
    for (i, r) in rules.iter().enumerate().rev() {
        idx[i] = flat % r.len();
        flat /= r.len();
    }
    idx
}

fn ravel(idx: &[usize], rules: &[QuadratureRule]) -> usize {
    idx.iter().zip(rules).fold(0, |acc, (&k, r)| acc * r.len() + k)
}

/// `f_0`, the weighted mean.
pub fn project_constant(g: &GridFunction) -> f64 {
    g.mean()
}

/// All ANOVA terms `f_J` for `J ⊆ top`, keyed by subset.
///
/// `f_J` is the marginal on `J` minus every `f_K` with `K ⊊ J`; ascending
/// bitmask order visits every strict subset before its supersets.
pub fn anova_terms(g: &GridFunction, top: Subset) -> Result<BTreeMap<Subset, GridFunction>> {
    if !top.is_subset_of(g.dims) {
        return Err(Error::BadSubset {
            mask: top.0,
            dim: g.dims.len(),
        });
    }
    let mut terms: BTreeMap<Subset, GridFunction> = BTreeMap::new();
    terms.insert(Subset::EMPTY, GridFunction::constant(g.mean()));
    let mut masks: Vec<Subset> = Subset::all(64 - top.0.leading_zeros() as usize)
        .filter(|s| !s.is_empty() && s.is_subset_of(top))
        .collect();
    masks.sort();
    for s in masks {
        let mut term = g.marginalize(s)?;
        for k in s.proper_subsets() {
            let lower = terms[&k].expand_to(&term)?;
            for (v, l) in term.values.iter_mut().zip(&lower.values) {
                *v -= l;
            }
        }
        terms.insert(s, term);
    }
    Ok(terms)
}

/// `f_i` on the nodes of coordinate `i`.
pub fn project_main_effect(g: &GridFunction, i: usize) -> Result<GridFunction> {
    let s = Subset::from_dims([i]);
    anova_terms(g, s)?.remove(&s).ok_or(Error::BadSubset { mask: s.0, dim: g.dims.len() })
}

/// `f_I` for `|I| ≥ 2`, on the sub-grid of `I`.
pub fn project_interaction(g: &GridFunction, subset: Subset) -> Result<GridFunction> {
    if subset.len() < 2 {
        return Err(Error::BadSubset {
            mask: subset.0,
            dim: g.dims.len(),
        });
    }
    anova_terms(g, subset)?
        .remove(&subset)
        .ok_or(Error::BadSubset { mask: subset.0, dim: g.dims.len() })
}

/// `Σ w (v - mean)²` under the grid's product weights.
pub fn grid_variance(g: &GridFunction) -> f64 {
    let m = g.mean();
    g.weights().iter().zip(&g.values).map(|(w, v)| w * (v - m) * (v - m)).sum()
}

/// Weighted inner product of two terms, after expanding both onto `parent`.
pub fn grid_inner(a: &GridFunction, b: &GridFunction, parent: &GridFunction) -> Result<f64> {
    let (ea, eb) = (a.expand_to(parent)?, b.expand_to(parent)?);
    Ok(parent
        .weights()
        .iter()
        .zip(ea.values.iter().zip(&eb.values))
        .map(|(w, (x, y))| w * x * y)
        .sum())
}
