//! Splitting a univariate kernel into a zero-mean part and a rank-one
//! remainder with respect to a quadrature rule.
//!
//! With `R(x) = Σ_j w_j k(x, x_j)` the representer of the discrete averaging
//! operator and `D = Σ_j w_j R(x_j)`:
//!
//! ```text
//! k1(x, y) = R(x) R(y) / D
//! k0(x, y) = k(x, y) - k1(x, y)
//! ```
//!
//! `k0` reproduces the subspace of functions whose rule-average is zero, so
//! `Σ_j w_j k0(x, x_j) = 0` holds for every `x` up to rounding. If `D` is
//! (numerically) zero every function in the space already averages to zero;
//! the kernel is then flagged degenerate and `k1 ≡ 0`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::UnivariateKernel;
use crate::quadrature::QuadratureRule;

/// Relative threshold on `D` (against the largest diagonal value on the
/// node grid) below which the kernel is treated as already centered.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct ZeroMeanKernel {
    base: UnivariateKernel,
    rule: QuadratureRule,
    r_at_nodes: Vec<f64>,
    denom: f64,
    degenerate: bool,
}

pub fn decompose(base: UnivariateKernel, rule: QuadratureRule) -> Result<ZeroMeanKernel> {
    ZeroMeanKernel::new(base, rule)
}

impl ZeroMeanKernel {
    pub fn new(base: UnivariateKernel, rule: QuadratureRule) -> Result<Self> {
        for &x in rule.nodes() {
            base.check_point(x)?;
        }
        let nodes = rule.nodes();
        let mut r_at_nodes = Vec::with_capacity(nodes.len());
        let mut max_diag: f64 = 0.0;
        for &x in nodes {
            let r = rule.integrate(|s| base.value(x, s)).map_err(|e| {
                Error::NonFinite(format!("{} on the node grid: {e}", base.name()))
            })?;
            r_at_nodes.push(r);
            max_diag = max_diag.max(base.value(x, x).abs());
        }
        let denom = rule.integrate_values(&r_at_nodes);
        if !denom.is_finite() {
            return Err(Error::NonFinite(format!("double integral of {} is {denom}", base.name())));
        }
        let degenerate = denom <= DEGENERACY_THRESHOLD * max_diag;
        Ok(Self {
            base,
            rule,
            r_at_nodes,
            denom,
            degenerate,
        })
    }

    pub fn base(&self) -> &UnivariateKernel {
        &self.base
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `Σ_j w_j Σ_l w_l k(x_j, x_l)`.
    pub fn denom(&self) -> f64 {
        self.denom
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Representer values at the quadrature nodes.
    pub fn representer_at_nodes(&self) -> &[f64] {
        &self.r_at_nodes
    }

    /// Checks that `x` is inside both the rule's support and the base
    /// kernel's domain.
    pub fn check_point(&self, x: f64) -> Result<()> {
        self.base.check_point(x)?;
        if !self.rule.measure().contains(x) {
            let m = self.rule.measure();
            return Err(Error::Domain {
                point: x,
                reason: if m.a > x { "below the measure support" } else { "above the measure support" },
            });
        }
        Ok(())
    }

    /// `R(x) = Σ_j w_j k(x, x_j)`, one pass over the nodes.
    pub fn representer(&self, x: f64) -> f64 {
        self.rule.iter().map(|(s, w)| w * self.base.value(x, s)).sum()
    }

    /// `k1(x, y)` from precomputed representer values.
    #[inline]
    pub fn k1_from_representers(&self, rx: f64, ry: f64) -> f64 {
        if self.degenerate {
            0.0
        } else {
            rx * ry / self.denom
        }
    }

    pub fn eval_k1(&self, x: f64, y: f64) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        self.k1_from_representers(self.representer(x), self.representer(y))
    }

    pub fn eval_k0(&self, x: f64, y: f64) -> f64 {
        if self.degenerate {
            return self.base.value(x, y);
        }
        self.base.value(x, y) - self.eval_k1(x, y)
    }

    /// `k0(x, y)` when both representer values are already known.
    #[inline]
    pub fn k0_from_representers(&self, x: f64, rx: f64, y: f64, ry: f64) -> f64 {
        self.base.value(x, y) - self.k1_from_representers(rx, ry)
    }

    /// `k0(x, x_q)` for every node `x_q`.
    pub fn k0_against_nodes(&self, x: f64) -> Vec<f64> {
        let rx = self.representer(x);
        self.rule
            .nodes()
            .iter()
            .zip(&self.r_at_nodes)
            .map(|(&s, &rs)| self.k0_from_representers(x, rx, s, rs))
            .collect()
    }

    /// `Σ_j w_j k0(x, x_j)`; zero up to rounding when not degenerate.
    pub fn centering_residual(&self, x: f64) -> f64 {
        self.rule.integrate_values(&self.k0_against_nodes(x))
    }

    /// The zero-mean part as a standalone kernel.
    pub fn k0_kernel(&self) -> UnivariateKernel {
        let this = Arc::new(self.clone());
        UnivariateKernel::custom(format!("{}-k0", self.base.name()), move |x, y| this.eval_k0(x, y))
    }

    /// The rank-one remainder as a standalone kernel.
    pub fn k1_kernel(&self) -> UnivariateKernel {
        let this = Arc::new(self.clone());
        UnivariateKernel::custom(format!("{}-k1", self.base.name()), move |x, y| this.eval_k1(x, y))
    }
}
