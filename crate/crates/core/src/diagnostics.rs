//! Means and `L²` inner products of the product terms of a fitted model.
//!
//! For a star or standard kernel every term is `m_I(x) = σ² Σ_j α_j Π_{i∈I}
//! p_i(x_i, X_ji)`, with `p_i = k0^i` or `k^i`. Under a product measure its
//! moments factor per dimension, so a handful of one-dimensional quadratures
//! give them exactly for the chosen rules. In star mode the means should
//! vanish and distinct terms should be orthogonal; in standard mode they
//! generally do not.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::anova_kernel::AnovaMode;
use crate::error::{Error, Result};
use crate::gp_model::FittedModel;
use crate::quadrature::QuadratureRule;
use crate::subset::Subset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermMoments {
    /// Mean of each non-empty term.
    pub means: BTreeMap<Subset, f64>,
    /// `⟨m_I, m_J⟩` for `I < J`, including `I = ∅`.
    pub inner_products: Vec<(Subset, Subset, f64)>,
}

impl TermMoments {
    pub fn max_abs_mean(&self) -> f64 {
        self.means.values().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max_abs_inner(&self) -> f64 {
        self.inner_products.iter().fold(0.0, |a, t| a.max(t.2.abs()))
    }
}

/// Moments of the terms in `subsets` under the product of `rules`.
pub fn term_moments(model: &FittedModel, rules: &[QuadratureRule], subsets: &[Subset]) -> Result<TermMoments> {
    let kernel = model.kernel();
    let d = kernel.dim();
    if rules.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rules.len(),
        });
    }
    if kernel.mode() == AnovaMode::Tensor {
        return Err(Error::NotAnovaMode);
    }
    for s in subsets {
        s.check(d)?;
    }
    let design = model.design();
    let n = design.n();
    let mut c = Vec::with_capacity(d);
    let mut g = Vec::with_capacity(d);
    for (i, rule) in rules.iter().enumerate() {
        let col: Vec<f64> = design.column(i).collect();
        let p = DMatrix::from_fn(rule.len(), n, |q, j| {
            let x = rule.nodes()[q];
            match kernel.star_components() {
                Some(zk) => zk[i].eval_k0(x, col[j]),
                None => kernel.plain_components().expect("plain components")[i].value(x, col[j]),
            }
        });
        let w = DVector::from_column_slice(rule.weights());
        c.push(p.tr_mul(&w));
        let wp = DMatrix::from_fn(rule.len(), n, |q, j| w[q].sqrt() * p[(q, j)]);
        g.push(wp.tr_mul(&wp));
    }

    let s2 = kernel.scale();
    let alpha = model.alpha();
    let mut means = BTreeMap::new();
    for &s in subsets.iter().filter(|s| !s.is_empty()) {
        let m: f64 = (0..n).map(|j| alpha[j] * s.dims().map(|i| c[i][j]).product::<f64>()).sum();
        means.insert(s, s2 * m);
    }
    let mut sorted: Vec<Subset> = subsets.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut inner_products = Vec::new();
    for (a, &si) in sorted.iter().enumerate() {
        for &sj in &sorted[a + 1..] {
            let both = Subset(si.0 & sj.0);
            let only_i = Subset(si.0 & !sj.0);
            let only_j = Subset(sj.0 & !si.0);
            let mut acc = 0.0;
            for j in 0..n {
                let left: f64 = alpha[j] * only_i.dims().map(|i| c[i][j]).product::<f64>();
                for l in 0..n {
                    let mid: f64 = both.dims().map(|i| g[i][(j, l)]).product();
                    let right: f64 = only_j.dims().map(|i| c[i][l]).product();
                    acc += left * mid * right * alpha[l];
                }
            }
            inner_products.push((si, sj, s2 * s2 * acc));
        }
    }
    Ok(TermMoments { means, inner_products })
}
