//! Product kernels on `D_1 × … × D_d`.
//!
//! * [`AnovaMode::Star`]: `σ² Π_i (1 + k0^i(x_i, y_i))`, built from zero-mean
//!   components. Expanding the product gives one term per subset of
//!   dimensions, and each term is centered in every one of its variables.
//! * [`AnovaMode::Standard`]: `σ² Π_i (1 + k^i(x_i, y_i))`, the classical
//!   ANOVA kernel, kept for comparison.
//! * [`AnovaMode::Tensor`]: `σ² Π_i k^i(x_i, y_i)`, a plain tensor product.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp_model::Design;
use crate::kernels::UnivariateKernel;
use crate::subset::Subset;
use crate::zero_mean::ZeroMeanKernel;

/// Largest dimension for which the full `2^d` expansion is materialized.
pub const MAX_EXPANSION_DIM: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnovaMode {
    Star,
    Standard,
    Tensor,
}

#[derive(Debug, Clone)]
enum Components {
    Star(Vec<ZeroMeanKernel>),
    Plain(Vec<UnivariateKernel>),
}

#[derive(Debug, Clone)]
pub struct AnovaKernel {
    mode: AnovaMode,
    components: Components,
    scale: f64,
}

impl AnovaKernel {
    pub fn star(components: Vec<ZeroMeanKernel>, scale: f64) -> Result<Self> {
        check_dim_and_scale(components.len(), scale)?;
        Ok(Self {
            mode: AnovaMode::Star,
            components: Components::Star(components),
            scale,
        })
    }

    pub fn standard(components: Vec<UnivariateKernel>, scale: f64) -> Result<Self> {
        check_dim_and_scale(components.len(), scale)?;
        Ok(Self {
            mode: AnovaMode::Standard,
            components: Components::Plain(components),
            scale,
        })
    }

    pub fn tensor(components: Vec<UnivariateKernel>, scale: f64) -> Result<Self> {
        check_dim_and_scale(components.len(), scale)?;
        Ok(Self {
            mode: AnovaMode::Tensor,
            components: Components::Plain(components),
            scale,
        })
    }

    pub fn mode(&self) -> AnovaMode {
        self.mode
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same kernel with a different variance scale.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        check_dim_and_scale(self.dim(), scale)?;
        Ok(Self {
            scale,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        match &self.components {
            Components::Star(c) => c.len(),
            Components::Plain(c) => c.len(),
        }
    }

    /// Zero-mean components; `None` unless the mode is star.
    pub fn star_components(&self) -> Option<&[ZeroMeanKernel]> {
        match &self.components {
            Components::Star(c) => Some(c),
            Components::Plain(_) => None,
        }
    }

    pub fn plain_components(&self) -> Option<&[UnivariateKernel]> {
        match &self.components {
            Components::Plain(c) => Some(c),
            Components::Star(_) => None,
        }
    }

    /// Checks dimension and per-coordinate domains of a point.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        self.check_len(x)?;
        match &self.components {
            Components::Star(c) => c.iter().zip(x).try_for_each(|(k, &xi)| k.check_point(xi)),
            Components::Plain(c) => c.iter().zip(x).try_for_each(|(k, &xi)| k.check_point(xi)),
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Per-coordinate kernel value: `k0^i` (star) or `k^i` (standard, tensor).
    #[inline]
    pub fn component_value(&self, i: usize, x: f64, y: f64) -> f64 {
        match &self.components {
            Components::Star(c) => c[i].eval_k0(x, y),
            Components::Plain(c) => c[i].value(x, y),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self.value(x, y))
    }

    /// Kernel value without dimension checks.
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let offset = if self.mode == AnovaMode::Tensor { 0.0 } else { 1.0 };
        let prod: f64 = (0..self.dim())
            .map(|i| offset + self.component_value(i, x[i], y[i]))
            .product();
        self.scale * prod
    }

    /// `v_i[j] = k0^i(x_i, X_{j,i})` (star) or `k^i(x_i, X_{j,i})` (standard),
    /// one vector of length `n` per dimension.
    pub fn component_vectors(&self, design: &Design, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if design.n() == 0 {
            return Err(Error::InvalidDesign("empty design".into()));
        }
        self.check_len(x)?;
        if design.d() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: design.d(),
            });
        }
        if self.mode == AnovaMode::Tensor {
            return Err(Error::NotAnovaMode);
        }
        let reps = self.design_representers(design);
        Ok(self.factor_vectors(design, reps.as_deref(), x))
    }

    /// Representer values `R_i(X_{j,i})` for every design coordinate, one
    /// vector per dimension; `None` unless the mode is star.
    pub fn design_representers(&self, design: &Design) -> Option<Vec<Vec<f64>>> {
        self.star_components().map(|c| {
            c.iter()
                .enumerate()
                .map(|(i, zk)| design.column(i).map(|xj| zk.representer(xj)).collect())
                .collect()
        })
    }

    /// Per-dimension factor values against the design rows, using
    /// representers from [`Self::design_representers`] in star mode.
    pub(crate) fn factor_vectors(
        &self,
        design: &Design,
        reps: Option<&[Vec<f64>]>,
        x: &[f64],
    ) -> Vec<Vec<f64>> {
        match &self.components {
            Components::Star(c) => {
                let reps = reps.expect("star mode needs design representers");
                c.iter()
                    .enumerate()
                    .map(|(i, zk)| {
                        let rx = zk.representer(x[i]);
                        design
                            .column(i)
                            .zip(&reps[i])
                            .map(|(xj, &rj)| zk.k0_from_representers(x[i], rx, xj, rj))
                            .collect()
                    })
                    .collect()
            }
            Components::Plain(c) => c
                .iter()
                .enumerate()
                .map(|(i, k)| design.column(i).map(|xj| k.value(x[i], xj)).collect())
                .collect(),
        }
    }

    /// Gram matrix on the design rows; exactly symmetric.
    pub fn gram(&self, design: &Design) -> Result<DMatrix<f64>> {
        if design.d() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: design.d(),
            });
        }
        let n = design.n();
        let offset = if self.mode == AnovaMode::Tensor { 0.0 } else { 1.0 };
        let mut k = DMatrix::from_element(n, n, self.scale);
        for i in 0..self.dim() {
            let col: Vec<f64> = design.column(i).collect();
            let factor = match &self.components {
                Components::Star(c) => {
                    let zk = &c[i];
                    let reps: Vec<f64> = col.iter().map(|&x| zk.representer(x)).collect();
                    DMatrix::from_fn(n, n, |a, b| {
                        let (a, b) = if a <= b { (a, b) } else { (b, a) };
                        zk.k0_from_representers(col[a], reps[a], col[b], reps[b])
                    })
                }
                Components::Plain(c) => {
                    let k = &c[i];
                    DMatrix::from_fn(n, n, |a, b| {
                        let (a, b) = if a <= b { (a, b) } else { (b, a) };
                        k.value(col[a], col[b])
                    })
                }
            };
            k.zip_apply(&factor, |acc, f| *acc *= offset + f);
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gram matrix entry".into()));
        }
        Ok(k)
    }
}

fn check_dim_and_scale(d: usize, scale: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidKernel("product kernel needs at least one component".into()));
    }
    if d > Subset::MAX_DIM {
        return Err(Error::TooManyDimensions(d, Subset::MAX_DIM));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidKernel(format!("scale must be positive, got {scale}")));
    }
    Ok(())
}

/// Splits a plain tensor-product kernel `Π_i k^i` into its `2^d` pieces
/// `Π_i k^i_{B_i}` (bit `i` of `B` clear: zero-mean part `k0^i`; set: rank-one
/// part `k1^i`) and reports the Frobenius norm of each piece's Gram matrix
/// on `design`.
pub fn decompose_product_kernel(
    components: &[ZeroMeanKernel],
    design: &Design,
) -> Result<BTreeMap<Subset, f64>> {
    let d = components.len();
    if d > MAX_EXPANSION_DIM {
        return Err(Error::TooManyDimensions(d, MAX_EXPANSION_DIM));
    }
    if d == 0 {
        return Err(Error::InvalidKernel("no components".into()));
    }
    if design.d() != d {
        return Err(Error::DimensionMismatch { expected: d, got: design.d() });
    }
    let n = design.n();
    let mut k0s = Vec::with_capacity(d);
    let mut k1s = Vec::with_capacity(d);
    for (i, zk) in components.iter().enumerate() {
        let col: Vec<f64> = design.column(i).collect();
        for &x in &col {
            zk.check_point(x)?;
        }
        let reps: Vec<f64> = col.iter().map(|&x| zk.representer(x)).collect();
        k0s.push(DMatrix::from_fn(n, n, |a, b| {
            zk.k0_from_representers(col[a], reps[a], col[b], reps[b])
        }));
        k1s.push(DMatrix::from_fn(n, n, |a, b| zk.k1_from_representers(reps[a], reps[b])));
    }
    Ok(Subset::all(d)
        .map(|b| {
            let mut block = DMatrix::from_element(n, n, 1.0);
            for i in 0..d {
                let piece = if b.contains(i) { &k1s[i] } else { &k0s[i] };
                block.component_mul_assign(piece);
            }
            (b, block.norm())
        })
        .collect())
}
