//! Analytic test functions, observation noise and maximin Latin hypercubes.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp_model::Design;
use crate::subset::Subset;

/// Generator behind every random draw in the crate.
pub type Rng64 = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Seed of replicate `index` under `master` (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", try_from = "RawTestFunction")]
pub enum TestFunction {
    /// `Π_k (|4x_k - 2| + a_k) / (1 + a_k)` on `[0, 1]^d`.
    #[serde(rename = "g")]
    GFunction { a: Vec<f64> },
    /// `x1 + x2² + x1 x2`.
    #[serde(rename = "quadratic")]
    Quadratic,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTestFunction {
    test: String,
    a: Option<Vec<f64>>,
}

impl TryFrom<RawTestFunction> for TestFunction {
    type Error = Error;

    fn try_from(raw: RawTestFunction) -> Result<Self> {
        match (raw.test.as_str(), raw.a) {
            ("g", Some(a)) => Self::g_function(a),
            ("g", None) => Err(Error::InvalidTestFunction("g-function needs \"a\"".into())),
            ("quadratic", None) => Ok(Self::Quadratic),
            ("quadratic", Some(_)) => Err(Error::InvalidTestFunction("quadratic takes no coefficients".into())),
            (other, _) => Err(Error::InvalidTestFunction(format!("unknown test function {other:?}"))),
        }
    }
}

impl TestFunction {
    pub fn g_function(a: Vec<f64>) -> Result<Self> {
        let tf = Self::GFunction { a };
        tf.validate()?;
        Ok(tf)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GFunction { a } => {
                if a.is_empty() {
                    return Err(Error::InvalidTestFunction("g-function needs at least one coefficient".into()));
                }
                if let Some(v) = a.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::InvalidTestFunction(format!(
                        "g-function coefficients must be positive, got {v}"
                    )));
                }
                Ok(())
            }
            Self::Quadratic => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GFunction { a } => a.len(),
            Self::Quadratic => 2,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.value(x))
    }

    /// As [`eval`](Self::eval) without the length check.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::GFunction { a } => a
                .iter()
                .zip(x)
                .map(|(&ak, &xk)| ((4.0 * xk - 2.0).abs() + ak) / (1.0 + ak))
                .product(),
            Self::Quadratic => x[0] + x[1] * x[1] + x[0] * x[1],
        }
    }

    pub fn eval_design(&self, design: &Design) -> Result<Vec<f64>> {
        design.rows().map(|r| self.eval(r)).collect()
    }
}

pub fn eval_test(tf: &TestFunction, x: &[f64]) -> Result<f64> {
    tf.eval(x)
}

/// Partial variance of one g-function factor: `1 / (3 (1 + a)²)`.
fn g_factor_variance(a: f64) -> f64 {
    1.0 / (3.0 * (1.0 + a) * (1.0 + a))
}

/// Exact Sobol index of the g-function under the uniform measure on `[0, 1]^d`.
pub fn g_analytic_index(subset: Subset, a: &[f64]) -> Result<f64> {
    TestFunction::g_function(a.to_vec())?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    subset.check(a.len())?;
    let num: f64 = subset.dims().map(|i| g_factor_variance(a[i])).product();
    Ok(num / g_analytic_variance(a))
}

/// Exact variance of the g-function: `Π (1 + D_k) - 1`.
pub fn g_analytic_variance(a: &[f64]) -> f64 {
    a.iter().map(|&ak| 1.0 + g_factor_variance(ak)).product::<f64>() - 1.0
}

/// Closed-form ANOVA term of the quadratic test function under the standard
/// normal product measure: `f_0 = 1`, `f_1 = x1`, `f_2 = x2² - 1`, `f_12 = x1 x2`.
/// The returned function takes the full point `(x1, x2)`.
pub fn quadratic_analytic_term(subset: Subset) -> Result<fn(&[f64]) -> f64> {
    match subset.0 {
        0b00 => Ok(|_| 1.0),
        0b01 => Ok(|x| x[0]),
        0b10 => Ok(|x| x[1] * x[1] - 1.0),
        0b11 => Ok(|x| x[0] * x[1]),
        m => Err(Error::BadSubset { mask: m, dim: 2 }),
    }
}

/// Exact Sobol indices of the quadratic test function: `(1/4, 1/2, 1/4)`.
pub fn quadratic_analytic_index(subset: Subset) -> Result<f64> {
    match subset.0 {
        0b01 | 0b11 => Ok(0.25),
        0b10 => Ok(0.5),
        0 => Err(Error::EmptySubset),
        m => Err(Error::BadSubset { mask: m, dim: 2 }),
    }
}

/// Default restarts of [`lhs_maximin`].
pub const DEFAULT_RESTARTS: usize = 100;

/// Ceiling on `restarts · n²` distance evaluations.
pub const LHS_BUDGET: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoeSpec {
    pub n: usize,
    /// One `[lo, hi]` pair per dimension.
    pub bounds: Vec<(f64, f64)>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

impl DoeSpec {
    pub fn new(n: usize, bounds: Vec<(f64, f64)>) -> Self {
        Self {
            n,
            bounds,
            restarts: DEFAULT_RESTARTS,
        }
    }

    pub fn unit_cube(n: usize, d: usize) -> Self {
        Self::new(n, vec![(0.0, 1.0); d])
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn d(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidDesign(format!("need at least 2 points, got {}", self.n)));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidDesign("no dimensions".into()));
        }
        if let Some((lo, hi)) = self.bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::InvalidDesign(format!("bad bounds [{lo}, {hi}]")));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidDesign("restarts must be positive".into()));
        }
        let cost = (self.restarts as u64).saturating_mul((self.n as u64).saturating_mul(self.n as u64));
        if cost > LHS_BUDGET {
            return Err(Error::InvalidDesign(format!(
                "{} restarts of {} points exceed the design budget",
                self.restarts, self.n
            )));
        }
        Ok(())
    }
}

/// One Latin hypercube: a random permutation of the strata per dimension and
/// a uniform position inside each stratum.
pub fn lhs<R: Rng + ?Sized>(spec: &DoeSpec, rng: &mut R) -> Result<Design> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d());
    let mut data = vec![0.0; n * d];
    let mut perm: Vec<usize> = (0..n).collect();
    for (i, &(lo, hi)) in spec.bounds.iter().enumerate() {
        // Fisher-Yates
        for j in (1..n).rev() {
            perm.swap(j, rng.random_range(0..=j));
        }
        for j in 0..n {
            let u: f64 = rng.random();
            data[j * d + i] = lo + (hi - lo) * (perm[j] as f64 + u) / n as f64;
        }
    }
    Design::from_flat(n, d, data)
}

/// Smallest Euclidean distance between two design rows.
pub fn min_pairwise_distance(design: &Design) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..design.n() {
        for l in 0..j {
            let d2: f64 = design.row(j).iter().zip(design.row(l)).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Best of `spec.restarts` Latin hypercubes by minimal pairwise distance.
pub fn lhs_maximin(spec: &DoeSpec, seed: u64) -> Result<Design> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut best = lhs(spec, &mut rng)?;
    let mut best_dist = min_pairwise_distance(&best);
    for _ in 1..spec.restarts {
        let cand = lhs(spec, &mut rng)?;
        let dist = min_pairwise_distance(&cand);
        if dist > best_dist {
            best = cand;
            best_dist = dist;
        }
    }
    Ok(best)
}

/// `F_j + √λ z_j` with independent standard normal `z_j`.
pub fn add_noise(f: &[f64], lambda: f64, seed: u64) -> Result<Vec<f64>> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidLambda(lambda));
    }
    if lambda == 0.0 {
        return Ok(f.to_vec());
    }
    let mut rng = rng_from_seed(seed);
    let sd = lambda.sqrt();
    Ok(f.iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v + sd * z
        })
        .collect())
}

/// CSV with header `x1,…,xd[,f]`.
pub fn design_to_csv(design: &Design, f: Option<&[f64]>) -> String {
    let mut out: Vec<String> = (1..=design.d()).map(|i| format!("x{i}")).collect();
    if f.is_some() {
        out.push("f".into());
    }
    let mut s = out.join(",") + "\n";
    for (j, row) in design.rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some(f) = f {
            cells.push(f[j].to_string());
        }
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Inverse of [`design_to_csv`]; lines starting with `#` are skipped.
pub fn design_from_csv(text: &str) -> Result<(Design, Option<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidDesign("empty CSV".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let has_f = header.last() == Some(&"f");
    let d = header.len() - usize::from(has_f);
    if header[..d].iter().enumerate().any(|(i, h)| *h != format!("x{}", i + 1)) {
        return Err(Error::InvalidDesign(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    let mut f = Vec::new();
    for (k, line) in lines.enumerate() {
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidDesign(format!("data line {}: {e}", k + 1)))?;
        if cells.len() != header.len() {
            return Err(Error::InvalidDesign(format!(
                "data line {} has {} fields, expected {}",
                k + 1,
                cells.len(),
                header.len()
            )));
        }
        if has_f {
            f.push(cells[d]);
        }
        rows.push(cells[..d].to_vec());
    }
    Ok((Design::new(rows)?, has_f.then_some(f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const TABLE1_A: [f64; 5] = [0.2, 0.6, 0.8, 100.0, 100.0];

    #[test]
    fn g_function_values() {
        let a = vec![0.3, 1.0, 7.0];
        let tf = TestFunction::g_function(a.clone()).unwrap();
        let expected: f64 = a.iter().map(|v| v / (1.0 + v)).product();
        assert_abs_diff_eq!(tf.eval(&[0.5; 3]).unwrap(), expected, epsilon = 1e-15);
        let one = TestFunction::g_function(vec![1.0]).unwrap();
        assert_abs_diff_eq!(one.eval(&[0.0]).unwrap(), 1.5, epsilon = 1e-15);
        assert!(tf.eval(&[0.5; 2]).is_err());
    }

    #[test]
    fn quadratic_value() {
        assert_eq!(eval_test(&TestFunction::Quadratic, &[1.0, 2.0]).unwrap(), 7.0);
    }

    #[test]
    fn g_function_rejects_nonpositive_coefficients() {
        assert!(TestFunction::g_function(vec![1.0, 0.0]).is_err());
        assert!(TestFunction::g_function(vec![-1.0]).is_err());
        assert!(TestFunction::g_function(vec![]).is_err());
    }

    #[test]
    fn g_indices_match_table() {
        let round2 = |v: f64| (v * 100.0).round() / 100.0;
        let s = |dims: &[usize]| g_analytic_index(Subset::from_one_based(dims).unwrap(), &TABLE1_A).unwrap();
        assert_eq!(round2(s(&[1])), 0.43);
        assert_eq!(round2(s(&[2])), 0.24);
        assert_eq!(round2(s(&[3])), 0.19);
        assert_eq!(round2(s(&[1, 2])), 0.06);
        assert_eq!(round2(s(&[1, 3])), 0.04);
        assert_eq!(round2(s(&[2, 3])), 0.03);
        assert_eq!(round2(s(&[1, 2, 3])), 0.01);
        let total: f64 = Subset::all(5).skip(1).map(|m| g_analytic_index(m, &TABLE1_A).unwrap()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(g_analytic_index(Subset(0), &TABLE1_A).is_err());
        assert!(g_analytic_index(Subset(1 << 5), &TABLE1_A).is_err());
    }

    #[test]
    fn quadratic_terms() {
        assert_eq!(quadratic_analytic_term(Subset(0b10)).unwrap()(&[3.0, 0.0]), -1.0);
        assert_eq!(quadratic_analytic_term(Subset(0b11)).unwrap()(&[0.0, 17.0]), 0.0);
        for x in [[0.3, -1.2], [2.0, 0.5]] {
            let sum: f64 = (0..4).map(|m| quadratic_analytic_term(Subset(m)).unwrap()(&x)).sum();
            assert_abs_diff_eq!(sum, TestFunction::Quadratic.value(&x), epsilon = 1e-14);
        }
        assert!(quadratic_analytic_term(Subset(0b100)).is_err());
    }

    #[test]
    fn two_point_lhs_is_stratified() {
        for seed in 0..20 {
            let d = lhs_maximin(&DoeSpec::unit_cube(2, 1).with_restarts(3), seed).unwrap();
            let (a, b) = (d.row(0)[0], d.row(1)[0]);
            assert!((a < 0.5) != (b < 0.5));
        }
    }

    #[test]
    fn lhs_strata_are_distinct() {
        let spec = DoeSpec::new(17, vec![(-5.0, 5.0), (0.0, 1.0), (2.0, 3.0)]).with_restarts(5);
        let design = lhs_maximin(&spec, 42).unwrap();
        for (i, &(lo, hi)) in spec.bounds.iter().enumerate() {
            let mut strata: Vec<usize> = design
                .column(i)
                .map(|x| ((x - lo) / (hi - lo) * spec.n as f64).floor() as usize)
                .collect();
            strata.sort();
            assert_eq!(strata, (0..spec.n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn lhs_is_deterministic() {
        let spec = DoeSpec::unit_cube(20, 2).with_restarts(10);
        assert_eq!(lhs_maximin(&spec, 7).unwrap(), lhs_maximin(&spec, 7).unwrap());
        assert_ne!(lhs_maximin(&spec, 7).unwrap(), lhs_maximin(&spec, 8).unwrap());
    }

    #[test]
    fn maximin_beats_median_random_lhs() {
        let spec = DoeSpec::unit_cube(50, 5);
        let best = min_pairwise_distance(&lhs_maximin(&spec, 1).unwrap());
        let mut rng = rng_from_seed(999);
        let mut plain: Vec<f64> = (0..100).map(|_| min_pairwise_distance(&lhs(&spec, &mut rng).unwrap())).collect();
        plain.sort_by(f64::total_cmp);
        assert!(best > 0.5 * (plain[49] + plain[50]));
    }

    #[test]
    fn infeasible_designs() {
        assert!(lhs_maximin(&DoeSpec::unit_cube(1, 2), 0).is_err());
        assert!(lhs_maximin(&DoeSpec::new(5, vec![(1.0, 1.0)]), 0).is_err());
        assert!(lhs_maximin(&DoeSpec::unit_cube(100_000, 2), 0).is_err());
        assert!(lhs_maximin(&DoeSpec::unit_cube(5, 2).with_restarts(0), 0).is_err());
    }

    #[test]
    fn noise() {
        let f = vec![1.0, 2.0, 3.0];
        assert_eq!(add_noise(&f, 0.0, 3).unwrap(), f);
        assert!(add_noise(&f, -1.0, 3).is_err());
        let zeros = vec![0.0; 10_000];
        let noisy = add_noise(&zeros, 4.0, 11).unwrap();
        let mean = noisy.iter().sum::<f64>() / 1e4;
        let var = noisy.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (1e4 - 1.0);
        assert!((var - 4.0).abs() < 0.2, "variance {var}");
        assert_eq!(noisy, add_noise(&zeros, 4.0, 11).unwrap());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(5, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(5, 0), derive_seed(6, 0));
    }

    #[test]
    fn csv_round_trip() {
        let design = lhs_maximin(&DoeSpec::unit_cube(6, 3).with_restarts(2), 3).unwrap();
        let f = TestFunction::g_function(vec![1.0, 2.0, 3.0]).unwrap().eval_design(&design).unwrap();
        let text = design_to_csv(&design, Some(&f));
        assert!(text.starts_with("x1,x2,x3,f\n"));
        let (back, fb) = design_from_csv(&format!("# comment\n{text}")).unwrap();
        assert_eq!(back, design);
        assert_eq!(fb.unwrap(), f);
        assert!(design_from_csv("x1,x2\n1,2,3\n").is_err());
        assert!(design_from_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn config_json() {
        let g: TestFunction = serde_json::from_str(r#"{"test":"g","a":[1,2]}"#).unwrap();
        assert_eq!(g, TestFunction::GFunction { a: vec![1.0, 2.0] });
        let q: TestFunction = serde_json::from_str(r#"{"test":"quadratic"}"#).unwrap();
        assert_eq!(q.dim(), 2);
        assert!(serde_json::from_str::<TestFunction>(r#"{"test":"quadratic","a":[1]}"#).is_err());
        assert!(serde_json::from_str::<TestFunction>(r#"{"test":"g","a":[1],"b":2}"#).is_err());
        assert!(serde_json::from_str::<TestFunction>(r#"{"test":"g","a":[0]}"#).is_err());
        assert_eq!(serde_json::to_string(&g).unwrap(), r#"{"test":"g","a":[1.0,2.0]}"#);
    }
}
