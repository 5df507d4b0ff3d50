//! One-dimensional probability measures and their midpoint Riemann-sum
//! discretizations.
//!
//! A [`QuadratureRule`] is a discrete probability measure: positive weights on
//! strictly increasing nodes, summing to one. Integrating a constant therefore
//! returns that constant exactly (up to rounding), which is what makes the
//! kernel centering in [`crate::zero_mean`] exact with respect to the rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node count used when a caller does not choose one.
pub const DEFAULT_NODES: usize = 100;

/// Default truncation window for the standard normal measure.
pub const NORMAL_WINDOW: (f64, f64) = (-8.0, 8.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Uniform,
    /// Standard normal restricted to the support window and renormalized.
    #[serde(alias = "standard-normal")]
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub kind: MeasureKind,
    pub a: f64,
    pub b: f64,
}

impl Measure {
    pub fn new(kind: MeasureKind, a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidMeasure(format!("non-finite bounds [{a}, {b}]")));
        }
        if a >= b {
            return Err(Error::InvalidMeasure(format!("empty support [{a}, {b}]")));
        }
        Ok(Self { kind, a, b })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(MeasureKind::Uniform, a, b)
    }

    /// Standard normal on the default window [-8, 8].
    pub fn standard_normal() -> Self {
        Self {
            kind: MeasureKind::Normal,
            a: NORMAL_WINDOW.0,
            b: NORMAL_WINDOW.1,
        }
    }

    pub fn truncated_normal(a: f64, b: f64) -> Result<Self> {
        Self::new(MeasureKind::Normal, a, b)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    pub fn rule(&self, n_nodes: usize) -> Result<QuadratureRule> {
        build_rule(self, n_nodes)
    }
}

/// Discrete probability measure on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    measure: Measure,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Midpoint nodes on the measure's support; weights are equal for the uniform
/// measure and proportional to the normal density otherwise, renormalized to
/// sum to one.
pub fn build_rule(measure: &Measure, n_nodes: usize) -> Result<QuadratureRule> {
    let measure = Measure::new(measure.kind, measure.a, measure.b)?;
    if n_nodes < 2 {
        return Err(Error::TooFewNodes(n_nodes));
    }
    let (a, b) = (measure.a, measure.b);
    let h = (b - a) / n_nodes as f64;
    let nodes: Vec<f64> = (0..n_nodes).map(|j| a + (j as f64 + 0.5) * h).collect();

    let raw: Vec<f64> = match measure.kind {
        MeasureKind::Uniform => vec![1.0; n_nodes],
        MeasureKind::Normal => nodes.iter().map(|&x| (-0.5 * x * x).exp()).collect(),
    };
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || raw.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidMeasure(format!(
            "density underflows on part of the window [{a}, {b}]"
        )));
    }
    let weights = raw.into_iter().map(|w| w / total).collect();
    QuadratureRule::from_parts(measure, nodes, weights)
}

impl QuadratureRule {
    /// Builds a rule from explicit nodes and weights, checking the invariants.
    pub fn from_parts(measure: Measure, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::InvalidRule(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.len() < 2 {
            return Err(Error::TooFewNodes(nodes.len()));
        }
        if nodes.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::InvalidRule("nodes must be strictly increasing".into()));
        }
        if nodes.iter().any(|&x| !measure.contains(x)) {
            return Err(Error::InvalidRule("node outside the support".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidRule("weights must be positive and finite".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidRule(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self {
            measure,
            nodes,
            weights,
        })
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `Σ_j w_j f(x_j)`; a non-finite integrand value is an error.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (x, w) in self.iter() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("integrand is {v} at node {x}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Weighted sum of values already tabulated at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}
