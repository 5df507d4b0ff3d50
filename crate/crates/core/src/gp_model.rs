//! Best predictors in the RKHS of an [`AnovaKernel`] and their functional
//! ANOVA terms.
//!
//! With `K` the Gram matrix on the design and `α = (K + λI)⁻¹ F`, the
//! predictor is `m(x) = k(x)ᵀ α` (interpolation for `λ = 0`, regularized least
//! squares otherwise). For a star kernel each term of the product expansion
//! gives one submodel
//!
//! ```text
//! m_I(x) = σ² (⊙_{i∈I} k0^i(x_i))ᵀ α,      m_∅ = σ² 1ᵀ α,
//! ```
//!
//! and these are exactly the terms of the functional ANOVA representation of
//! `m` with respect to the product of the components' quadrature rules.

use nalgebra::{DMatrix, DVector};

use crate::anova_kernel::{AnovaKernel, AnovaMode, MAX_EXPANSION_DIM};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, PivotFailure};
use crate::subset::Subset;

/// Jitter ladder, relative to the mean diagonal of `K + λI`.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-6;

/// Design points, `n` rows of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if n > 0 && d == 0 {
            return Err(Error::InvalidDesign("zero-dimensional rows".into()));
        }
        let mut data = Vec::with_capacity(n * d);
        for (j, row) in rows.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDesign(format!(
                    "row {j} has {} coordinates, expected {d}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("design row {j} contains {v}")));
            }
            data.extend(row);
        }
        Ok(Self { n, d, data })
    }

    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::InvalidDesign(format!(
                "{} values for a {n}x{d} design",
                data.len()
            )));
        }
        Self::new(data.chunks(d.max(1)).map(<[f64]>::to_vec).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.d.max(1)).take(self.n)
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(i).step_by(self.d.max(1)).copied()
    }

    /// First pair of identical rows, if any.
    pub fn find_duplicate(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        order.windows(2).find_map(|w| {
            (self.row(w[0]) == self.row(w[1])).then(|| (w[0].min(w[1]), w[0].max(w[1])))
        })
    }
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    kernel: AnovaKernel,
    design: Design,
    observations: Vec<f64>,
    lambda: f64,
    factor: Cholesky,
    alpha: DVector<f64>,
    jitter_used: f64,
    residual: f64,
    design_reps: Option<Vec<Vec<f64>>>,
}

/// Fits `α = (K + λI)⁻¹ F`.
///
/// If the factorization of `K + λI` fails, a diagonal jitter of
/// `1e-10 · mean(diag)` is added and grown tenfold up to `1e-6 · mean(diag)`;
/// the amount used is recorded in [`FittedModel::jitter_used`].
pub fn fit(kernel: AnovaKernel, design: Design, observations: Vec<f64>, lambda: f64) -> Result<FittedModel> {
    let n = design.n();
    if n == 0 {
        return Err(Error::InvalidDesign("empty design".into()));
    }
    if design.d() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: design.d(),
        });
    }
    if observations.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: observations.len(),
        });
    }
    if let Some(v) = observations.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("observation {v}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    for row in design.rows() {
        kernel.check_point(row)?;
    }
    if lambda == 0.0 {
        if let Some((first, second)) = design.find_duplicate() {
            return Err(Error::DuplicateDesignRow { first, second });
        }
    }

    let gram = kernel.gram(&design)?;
    let system = &gram + DMatrix::identity(n, n) * lambda;
    let (factor, jitter_used) = factor_with_jitter(&system)?;
    let f = DVector::from_column_slice(&observations);
    let alpha = factor.solve(&f);
    let residual = (&system * &alpha - &f).amax();
    let design_reps = kernel.design_representers(&design);

    Ok(FittedModel {
        kernel,
        design,
        observations,
        lambda,
        factor,
        alpha,
        jitter_used,
        residual,
        design_reps,
    })
}

fn factor_with_jitter(system: &DMatrix<f64>) -> Result<(Cholesky, f64)> {
    let mut last: PivotFailure = match Cholesky::factor(system) {
        Ok(c) => return Ok((c, 0.0)),
        Err(e) => e,
    };
    let n = system.nrows();
    let mean_diag = system.diagonal().sum() / n as f64;
    let mut rel = JITTER_START;
    let mut jitter = 0.0;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        jitter = rel * mean_diag;
        let jittered = system + DMatrix::identity(n, n) * jitter;
        match Cholesky::factor(&jittered) {
            Ok(c) => return Ok((c, jitter)),
            Err(e) => last = e,
        }
        rel *= 10.0;
    }
    Err(Error::SingularSystem {
        pivot: last.pivot,
        row: last.row,
        jitter,
    })
}

impl FittedModel {
    pub fn kernel(&self) -> &AnovaKernel {
        &self.kernel
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }

    /// Diagonal jitter added to make `K + λI` factorizable (0 if none).
    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    /// `max_j |((K + λI) α - F)_j|`, without the jitter.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Representers of the design coordinates (star mode only).
    pub fn design_representers(&self) -> Option<&[Vec<f64>]> {
        self.design_reps.as_deref()
    }

    fn factors(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.kernel.check_point(x)?;
        Ok(self.kernel.factor_vectors(&self.design, self.design_reps.as_deref(), x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let v = self.factors(x)?;
        let offset = if self.kernel.mode() == AnovaMode::Tensor { 0.0 } else { 1.0 };
        let s: f64 = (0..self.design.n())
            .map(|j| self.alpha[j] * v.iter().map(|vi| offset + vi[j]).product::<f64>())
            .sum();
        Ok(self.kernel.scale() * s)
    }

    /// The functional ANOVA term `m_I(x)`; star kernels only.
    pub fn predict_submodel(&self, subset: Subset, x: &[f64]) -> Result<f64> {
        if self.kernel.mode() != AnovaMode::Star {
            return Err(Error::NotStarMode);
        }
        self.product_term(subset, x)
    }

    /// `m_I` at many points.
    pub fn predict_submodel_batch(&self, subset: Subset, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.kernel.mode() != AnovaMode::Star {
            return Err(Error::NotStarMode);
        }
        xs.iter().map(|x| self.product_term(subset, x)).collect()
    }

    /// `σ² (⊙_{i∈I} v_i(x))ᵀ α` for any ANOVA kernel. For a standard kernel
    /// these terms sum to the predictor but are in general neither centered
    /// nor mutually orthogonal.
    pub fn product_term(&self, subset: Subset, x: &[f64]) -> Result<f64> {
        if self.kernel.mode() == AnovaMode::Tensor {
            return Err(Error::NotAnovaMode);
        }
        subset.check(self.kernel.dim())?;
        let v = self.factors(x)?;
        Ok(self.term_from_factors(subset, &v))
    }

    fn term_from_factors(&self, subset: Subset, v: &[Vec<f64>]) -> f64 {
        let s: f64 = (0..self.design.n())
            .map(|j| self.alpha[j] * subset.dims().map(|i| v[i][j]).product::<f64>())
            .sum();
        self.kernel.scale() * s
    }

    /// Every term `m_I(x)` in ascending bitmask order (`d ≤ 12`).
    pub fn all_terms(&self, x: &[f64]) -> Result<Vec<(Subset, f64)>> {
        if self.kernel.mode() == AnovaMode::Tensor {
            return Err(Error::NotAnovaMode);
        }
        let d = self.kernel.dim();
        if d > MAX_EXPANSION_DIM {
            return Err(Error::TooManyDimensions(d, MAX_EXPANSION_DIM));
        }
        let v = self.factors(x)?;
        Ok(Subset::all(d).map(|s| (s, self.term_from_factors(s, &v))).collect())
    }

    /// The constant term `m_∅ = σ² 1ᵀ α`.
    pub fn constant_term(&self) -> f64 {
        self.kernel.scale() * self.alpha.sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::UnivariateKernel;
    use crate::quadrature::Measure;
    use crate::zero_mean::decompose;
    use approx::assert_abs_diff_eq;

    fn matern_star(d: usize) -> AnovaKernel {
        let rule = Measure::uniform(0.0, 1.0).unwrap().rule(100).unwrap();
        let zk = decompose(UnivariateKernel::matern32(1.0).unwrap(), rule).unwrap();
        AnovaKernel::star(vec![zk; d], 1.0).unwrap()
    }

    #[test]
    fn design_accessors() {
        let d = Design::new(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.column(1).collect::<Vec<_>>(), vec![2.0, 4.0, 6.0]);
        assert_eq!(d.rows().count(), 3);
        assert!(Design::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Design::new(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn duplicate_rows_detected() {
        let d = Design::new(vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.1, 0.2]]).unwrap();
        assert_eq!(d.find_duplicate(), Some((0, 2)));
        let err = fit(matern_star(2), d.clone(), vec![1.0, 2.0, 3.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::DuplicateDesignRow { first: 0, second: 2 }));
        // regularized fits accept repeated points
        assert!(fit(matern_star(2), d, vec![1.0, 2.0, 3.0], 0.5).is_ok());
    }

    #[test]
    fn scalar_solve() {
        let k = matern_star(1);
        let design = Design::new(vec![vec![0.3]]).unwrap();
        let kk = k.eval(&[0.3], &[0.3]).unwrap();
        let model = fit(k, design, vec![2.5], 0.0).unwrap();
        assert_abs_diff_eq!(model.alpha()[0], 2.5 / kk, epsilon = 1e-14);
        assert_abs_diff_eq!(model.predict(&[0.3]).unwrap(), 2.5, epsilon = 1e-14);
    }

    #[test]
    fn brownian_toy_interpolates() {
        let k = AnovaKernel::tensor(vec![UnivariateKernel::brownian()], 1.0).unwrap();
        let design = Design::new(vec![vec![1.0], vec![2.5], vec![4.0]]).unwrap();
        let f = vec![-0.5, 0.75, 0.5];
        let model = fit(k, design, f.clone(), 0.0).unwrap();
        for (x, y) in [1.0, 2.5, 4.0].iter().zip(&f) {
            assert_abs_diff_eq!(model.predict(&[*x]).unwrap(), *y, epsilon = 1e-12);
        }
        // Brownian interpolant is piecewise linear through the origin
        assert_abs_diff_eq!(model.predict(&[0.5]).unwrap(), -0.25, epsilon = 1e-12);
        assert_eq!(model.jitter_used(), 0.0);
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let k = matern_star(2);
        let design = Design::new(vec![vec![0.1, 0.9], vec![0.5, 0.4], vec![0.8, 0.2]]).unwrap();
        let model = fit(k, design, vec![1.0, -2.0, 3.0], 1e6).unwrap();
        for x in [[0.2, 0.3], [0.7, 0.7]] {
            assert!(model.predict(&x).unwrap().abs() < 1e-4);
        }
    }

    #[test]
    fn input_validation() {
        let design = Design::new(vec![vec![0.1, 0.9], vec![0.5, 0.4]]).unwrap();
        assert!(matches!(
            fit(matern_star(2), design.clone(), vec![1.0], 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            fit(matern_star(2), design.clone(), vec![1.0, f64::NAN], 0.0),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            fit(matern_star(2), design.clone(), vec![1.0, 2.0], -1.0),
            Err(Error::InvalidLambda(_))
        ));
        assert!(matches!(
            fit(matern_star(3), design.clone(), vec![1.0, 2.0], 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let outside = Design::new(vec![vec![0.1, 1.5]]).unwrap();
        assert!(matches!(fit(matern_star(2), outside, vec![1.0], 0.0), Err(Error::Domain { .. })));
        let empty = Design::new(vec![]).unwrap();
        assert!(fit(matern_star(2), empty, vec![], 0.0).is_err());
    }

    #[test]
    fn singular_system_reports_pivot() {
        // rank-one kernel: three distinct points, one nonzero direction
        let k = AnovaKernel::tensor(vec![UnivariateKernel::custom("rank1", |x, y| x * y)], 1.0).unwrap();
        let design = Design::new(vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        match fit(k, design, vec![1.0, 2.0, 3.0], 0.0) {
            Err(Error::SingularSystem { jitter, .. }) => assert!(jitter > 0.0),
            Ok(m) => assert!(m.jitter_used() > 0.0, "expected jitter or failure"),
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn submodel_requires_star() {
        let base = UnivariateKernel::matern32(1.0).unwrap();
        let k = AnovaKernel::standard(vec![base; 2], 1.0).unwrap();
        let design = Design::new(vec![vec![0.1, 0.9], vec![0.5, 0.4]]).unwrap();
        let model = fit(k, design, vec![1.0, 2.0], 0.0).unwrap();
        assert!(matches!(model.predict_submodel(Subset(1), &[0.2, 0.2]), Err(Error::NotStarMode)));
        assert!(model.product_term(Subset(1), &[0.2, 0.2]).is_ok());
    }

    #[test]
    fn bad_subset_rejected() {
        let design = Design::new(vec![vec![0.1, 0.9], vec![0.5, 0.4]]).unwrap();
        let model = fit(matern_star(2), design, vec![1.0, 2.0], 0.0).unwrap();
        assert!(matches!(
            model.predict_submodel(Subset(0b100), &[0.2, 0.2]),
            Err(Error::BadSubset { .. })
        ));
    }

    #[test]
    fn submodel_ignores_inactive_coordinates() {
        let design = Design::new(vec![vec![0.1, 0.9], vec![0.5, 0.4], vec![0.7, 0.1]]).unwrap();
        let model = fit(matern_star(2), design, vec![1.0, 2.0, 0.5], 0.0).unwrap();
        let a = model.predict_submodel(Subset(0b01), &[0.3, 0.1]).unwrap();
        let b = model.predict_submodel(Subset(0b01), &[0.3, 0.95]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let batch = model
            .predict_submodel_batch(Subset(0b01), &[vec![0.3, 0.1], vec![0.6, 0.2]])
            .unwrap();
        assert_eq!(batch[0], a);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};
        use rand_xoshiro::Xoshiro256PlusPlus;

        fn random_instance(seed: u64, d: usize, n: usize) -> (AnovaKernel, Design, Vec<f64>) {
            use rand::seq::SliceRandom;
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            // stratified coordinates kept away from stratum edges, so that no
            // two points nearly coincide
            let mut rows = vec![vec![0.0; d]; n];
            for i in 0..d {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                for (row, p) in rows.iter_mut().zip(perm) {
                    row[i] = (p as f64 + 0.25 + 0.5 * rng.random::<f64>()) / n as f64;
                }
            }
            let f: Vec<f64> = rows.iter().map(|r| r.iter().map(|x| (3.0 * x).sin()).sum::<f64>() + rng.random::<f64>()).collect();
            (matern_star(d), Design::new(rows).unwrap(), f)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn interpolates_and_terms_sum_to_prediction(seed in any::<u64>(), d in 1usize..=5, n in 2usize..=20) {
                let (k, design, f) = random_instance(seed, d, n);
                let model = fit(k, design.clone(), f.clone(), 0.0).unwrap();
                let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (row, fj) in design.rows().zip(&f) {
                    prop_assert!((model.predict(row).unwrap() - fj).abs() <= 1e-6 * fmax);
                }
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 1);
                for _ in 0..5 {
                    let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                    let total: f64 = model.all_terms(&x).unwrap().iter().map(|(_, v)| v).sum();
                    let m = model.predict(&x).unwrap();
                    prop_assert!((total - m).abs() < 1e-10 * m.abs().max(1.0), "d={} n={} total={} m={} amax={}", d, n, total, m, model.alpha().amax());
                }
            }

            #[test]
            fn interpolant_ignores_scale(seed in any::<u64>(), c in 0.01f64..100.0) {
                let (k, design, f) = random_instance(seed, 2, 12);
                let m1 = fit(k.clone(), design.clone(), f.clone(), 0.0).unwrap();
                let m2 = fit(k.with_scale(c).unwrap(), design, f, 0.0).unwrap();
                for x in [[0.2, 0.7], [0.95, 0.05], [0.5, 0.5]] {
                    let (a, b) = (m1.predict(&x).unwrap(), m2.predict(&x).unwrap());
                    prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
                }
            }
        }
    }
}
