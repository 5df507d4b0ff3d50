//! Univariate symmetric positive-definite kernels.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

type KernelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A user-supplied kernel. The closure must be symmetric and positive
/// semi-definite; neither property is checked.
#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    f: Arc<KernelFn>,
}

impl CustomKernel {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum UnivariateKernel {
    /// `min(x, y)` on `[0, ∞)`.
    Brownian,
    /// `1 + min(x, y)` on `[0, ∞)`.
    ShiftedBrownian,
    /// `exp(-((x - y) / θ)²)`.
    Gaussian { theta: f64 },
    /// `(1 + 2|x - y|/θ) exp(-2|x - y|/θ)`.
    Matern32 { theta: f64 },
    Custom(CustomKernel),
}

impl UnivariateKernel {
    pub fn brownian() -> Self {
        Self::Brownian
    }

    pub fn shifted_brownian() -> Self {
        Self::ShiftedBrownian
    }

    pub fn gaussian(theta: f64) -> Result<Self> {
        check_lengthscale(theta)?;
        Ok(Self::Gaussian { theta })
    }

    pub fn matern32(theta: f64) -> Result<Self> {
        check_lengthscale(theta)?;
        Ok(Self::Matern32 { theta })
    }

    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom(CustomKernel::new(name, f))
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Brownian => "brownian",
            Self::ShiftedBrownian => "shifted-brownian",
            Self::Gaussian { .. } => "gaussian",
            Self::Matern32 { .. } => "matern32",
            Self::Custom(c) => c.name(),
        }
    }

    pub fn lengthscale(&self) -> Option<f64> {
        match *self {
            Self::Gaussian { theta } | Self::Matern32 { theta } => Some(theta),
            _ => None,
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self, Self::Gaussian { .. } | Self::Matern32 { .. })
    }

    /// Checks that `x` lies in the kernel's domain.
    pub fn check_point(&self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("kernel argument {x}")));
        }
        match self {
            Self::Brownian | Self::ShiftedBrownian if x < 0.0 => Err(Error::Domain {
                point: x,
                reason: "brownian kernels are defined on [0, inf)",
            }),
            _ => Ok(()),
        }
    }

    /// Kernel value with domain and finiteness checks.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        let v = self.value(x, y);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("k({x}, {y}) = {v}")));
        }
        Ok(v)
    }

    /// Kernel value without checks; callers validate their points once.
    #[inline]
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Brownian => x.min(y),
            Self::ShiftedBrownian => 1.0 + x.min(y),
            Self::Gaussian { theta } => {
                let r = (x - y) / theta;
                (-r * r).exp()
            }
            Self::Matern32 { theta } => {
                let r = 2.0 * (x - y).abs() / theta;
                (1.0 + r) * (-r).exp()
            }
            Self::Custom(ref c) => (c.f)(x, y),
        }
    }

    /// `M[i][j] = k(xs[i], ys[j])`. When `xs == ys` only the upper triangle is
    /// evaluated and mirrored, so the result is exactly symmetric.
    pub fn gram(&self, xs: &[f64], ys: &[f64]) -> Result<DMatrix<f64>> {
        for &x in xs.iter().chain(ys) {
            self.check_point(x)?;
        }
        let symmetric = xs == ys;
        let mut m = DMatrix::zeros(xs.len(), ys.len());
        for (i, &x) in xs.iter().enumerate() {
            let start = if symmetric { i } else { 0 };
            for (j, &y) in ys.iter().enumerate().skip(start) {
                let v = self.value(x, y);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("k({x}, {y}) = {v}")));
                }
                m[(i, j)] = v;
                if symmetric {
                    m[(j, i)] = v;
                }
            }
        }
        Ok(m)
    }

    /// `∫ sqrt(k(s, s)) dµ(s)` under the rule; a finite value means the
    /// integral operator is bounded on the kernel's RKHS.
    pub fn integrability(&self, rule: &QuadratureRule) -> Result<f64> {
        for &x in rule.nodes() {
            self.check_point(x)?;
        }
        rule.integrate(|s| self.value(s, s).max(0.0).sqrt())
    }
}

fn check_lengthscale(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!(
            "lengthscale must be positive and finite, got {theta}"
        )))
    }
}
