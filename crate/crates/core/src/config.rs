//! Experiment configuration: JSON schema, defaults and validation.
//!
//! Leaf specs validate while deserializing, so a bad value is reported with
//! the line and column of the offending JSON. Cross-field checks run in
//! [`ExperimentConfig::validate`] and name the field path instead.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anova_kernel::{AnovaKernel, AnovaMode};
use crate::error::{Error, Result};
use crate::kernels::UnivariateKernel;
use crate::quadrature::{Measure, MeasureKind, QuadratureRule, DEFAULT_NODES, NORMAL_WINDOW};
use crate::subset::Subset;
use crate::testbed::{DoeSpec, TestFunction};
use crate::zero_mean::decompose;

pub const SCHEMA: &str = "zanova/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Brownian,
    ShiftedBrownian,
    Gaussian,
    Matern32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec")]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernelSpec {
    family: KernelFamily,
    theta: Option<f64>,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = Error;

    fn try_from(raw: RawKernelSpec) -> Result<Self> {
        let spec = match (raw.family, raw.theta) {
            (KernelFamily::Brownian | KernelFamily::ShiftedBrownian, Some(_)) => {
                return Err(Error::Config("brownian kernels take no theta".into()))
            }
            (f @ (KernelFamily::Gaussian | KernelFamily::Matern32), None) => KernelSpec {
                family: f,
                theta: Some(1.0),
            },
            (family, theta) => KernelSpec { family, theta },
        };
        spec.build()?;
        Ok(spec)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, theta: Option<f64>) -> Self {
        Self { family, theta }
    }

    pub fn matern32(theta: f64) -> Self {
        Self::new(KernelFamily::Matern32, Some(theta))
    }

    pub fn gaussian(theta: f64) -> Self {
        Self::new(KernelFamily::Gaussian, Some(theta))
    }

    pub fn build(&self) -> Result<UnivariateKernel> {
        let theta = self.theta.unwrap_or(1.0);
        match self.family {
            KernelFamily::Brownian => Ok(UnivariateKernel::brownian()),
            KernelFamily::ShiftedBrownian => Ok(UnivariateKernel::shifted_brownian()),
            KernelFamily::Gaussian => UnivariateKernel::gaussian(theta),
            KernelFamily::Matern32 => UnivariateKernel::matern32(theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasureSpec")]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasureSpec {
    kind: MeasureKind,
    a: Option<f64>,
    b: Option<f64>,
    nodes: Option<usize>,
}

impl TryFrom<RawMeasureSpec> for MeasureSpec {
    type Error = Error;

    fn try_from(raw: RawMeasureSpec) -> Result<Self> {
        let (a, b) = match (raw.kind, raw.a, raw.b) {
            (_, Some(a), Some(b)) => (a, b),
            (MeasureKind::Normal, None, None) => NORMAL_WINDOW,
            _ => return Err(Error::Config("measure needs both \"a\" and \"b\"".into())),
        };
        let spec = MeasureSpec {
            kind: raw.kind,
            a,
            b,
            nodes: raw.nodes.unwrap_or(DEFAULT_NODES),
        };
        spec.rule()?;
        Ok(spec)
    }
}

impl MeasureSpec {
    pub fn uniform(a: f64, b: f64) -> Self {
        Self {
            kind: MeasureKind::Uniform,
            a,
            b,
            nodes: DEFAULT_NODES,
        }
    }

    pub fn standard_normal() -> Self {
        Self {
            kind: MeasureKind::Normal,
            a: NORMAL_WINDOW.0,
            b: NORMAL_WINDOW.1,
            nodes: DEFAULT_NODES,
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn measure(&self) -> Result<Measure> {
        Measure::new(self.kind, self.a, self.b)
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        self.measure()?.rule(self.nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub kernel: KernelSpec,
    pub measure: MeasureSpec,
}

/// A product kernel; a single component is used for every dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnovaSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: AnovaMode,
    #[serde(default = "one")]
    pub scale: f64,
    pub components: Vec<ComponentSpec>,
}

fn one() -> f64 {
    1.0
}

impl AnovaSpec {
    pub fn star(kernel: KernelSpec, measure: MeasureSpec, scale: f64) -> Self {
        Self {
            name: None,
            mode: AnovaMode::Star,
            scale,
            components: vec![ComponentSpec { kernel, measure }],
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Label used in tables: the explicit name or the first kernel family.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.components
                .first()
                .map_or_else(|| "model".into(), |c| c.kernel.build().map(|k| k.name().to_string()).unwrap_or_default())
        })
    }

    /// Components for dimension `d`, broadcasting a single entry.
    pub fn components_for(&self, d: usize) -> Result<Vec<ComponentSpec>> {
        match self.components.len() {
            0 => Err(Error::Config("components must not be empty".into())),
            1 => Ok(vec![self.components[0].clone(); d]),
            k if k == d => Ok(self.components.clone()),
            k => Err(Error::Config(format!("{k} components for a {d}-dimensional input"))),
        }
    }

    pub fn rules(&self, d: usize) -> Result<Vec<QuadratureRule>> {
        self.components_for(d)?.iter().map(|c| c.measure.rule()).collect()
    }

    pub fn build(&self, d: usize) -> Result<AnovaKernel> {
        let comps = self.components_for(d)?;
        let bases = comps.iter().map(|c| c.kernel.build()).collect::<Result<Vec<_>>>()?;
        match self.mode {
            AnovaMode::Star => {
                let zks = comps
                    .iter()
                    .zip(bases)
                    .map(|(c, k)| decompose(k, c.measure.rule()?))
                    .collect::<Result<Vec<_>>>()?;
                AnovaKernel::star(zks, self.scale)
            }
            AnovaMode::Standard => AnovaKernel::standard(bases, self.scale),
            AnovaMode::Tensor => AnovaKernel::tensor(bases, self.scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSpec {
    pub kernels: Vec<KernelSpec>,
    pub measure: MeasureSpec,
    pub slices: Vec<f64>,
    /// Sampling points over the support, endpoints included.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    201
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub submodel: f64,
    pub mean: f64,
    pub inner: f64,
    pub normalization: f64,
    pub index: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            submodel: 1e-8,
            mean: 1e-10,
            inner: 1e-8,
            normalization: 1e-8,
            index: 1e-6,
        }
    }
}

fn default_replicates() -> usize {
    50
}

fn default_max_order() -> usize {
    3
}

fn default_schema() -> String {
    SCHEMA.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestFunction>,
    /// Model for `fit-report`, `replicate-noise` and `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<AnovaSpec>,
    /// Models compared by `replicate-g`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<AnovaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doe: Option<DoeSpec>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Reported subsets; empty means every subset up to `max_order`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsets: Vec<Subset>,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    /// Points per axis of the submodel grids written by `fit-report`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompose: Option<DecomposeSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub nodes: Option<usize>,
}

impl ExperimentConfig {
    fn empty() -> Self {
        Self {
            schema: SCHEMA.into(),
            seed: 0,
            test: None,
            model: None,
            models: Vec::new(),
            doe: None,
            lambda: 0.0,
            lambdas: Vec::new(),
            replicates: default_replicates(),
            subsets: Vec::new(),
            max_order: default_max_order(),
            grid_points: None,
            decompose: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(Error::Config(format!("schema: expected \"{SCHEMA}\", got \"{}\"", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.replicates {
            self.replicates = r;
        }
        if let Some(n) = o.nodes {
            let models = self.model.iter_mut().chain(self.models.iter_mut());
            for c in models.flat_map(|m| m.components.iter_mut()) {
                c.measure.nodes = n;
            }
            if let Some(dec) = &mut self.decompose {
                dec.measure.nodes = n;
            }
        }
    }

    pub fn test(&self) -> Result<&TestFunction> {
        self.test.as_ref().ok_or_else(|| Error::Config("test: missing".into()))
    }

    pub fn model(&self) -> Result<&AnovaSpec> {
        self.model.as_ref().ok_or_else(|| Error::Config("model: missing".into()))
    }

    pub fn doe(&self) -> Result<&DoeSpec> {
        self.doe.as_ref().ok_or_else(|| Error::Config("doe: missing".into()))
    }

    pub fn decompose_spec(&self) -> Result<&DecomposeSpec> {
        self.decompose.as_ref().ok_or_else(|| Error::Config("decompose: missing".into()))
    }

    /// Checks that the fields a command needs are present and consistent.
    pub fn validate(&self, command: Command) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if command == Command::Decompose {
            let dec = self.decompose_spec()?;
            if dec.kernels.is_empty() || dec.slices.is_empty() {
                return cfg("decompose: needs at least one kernel and one slice".into());
            }
            if dec.points < 2 {
                return cfg("decompose.points: must be at least 2".into());
            }
            let m = dec.measure.measure()?;
            for (k, y) in dec.slices.iter().enumerate() {
                if !m.contains(*y) {
                    return cfg(format!("decompose.slices[{k}]: {y} is outside [{}, {}]", m.a, m.b));
                }
            }
            return Ok(());
        }

        let tf = self.test()?;
        tf.validate()?;
        let d = tf.dim();
        let doe = self.doe()?;
        if doe.d() != d {
            return cfg(format!("doe.bounds: {} dimensions for a {d}-dimensional test function", doe.d()));
        }
        doe.validate().map_err(|e| Error::Config(format!("doe: {e}")))?;

        let models: Vec<(&str, &AnovaSpec)> = match command {
            Command::ReplicateG => {
                if self.models.is_empty() {
                    return cfg("models: needs at least one model".into());
                }
                self.models.iter().map(|m| ("models", m)).collect()
            }
            _ => vec![("model", self.model()?)],
        };
        for (field, m) in models {
            let comps = m.components_for(d).map_err(|e| Error::Config(format!("{field}: {e}")))?;
            if !(m.scale.is_finite() && m.scale > 0.0) {
                return cfg(format!("{field}.scale: must be positive, got {}", m.scale));
            }
            let star_only = matches!(command, Command::ReplicateG | Command::ReplicateNoise | Command::Verify);
            match m.mode {
                AnovaMode::Tensor => return cfg(format!("{field}.mode: tensor kernels have no ANOVA terms")),
                AnovaMode::Standard if star_only => {
                    return cfg(format!("{field}.mode: this command needs a star kernel"))
                }
                _ => {}
            }
            for (i, c) in comps.iter().enumerate() {
                let (lo, hi) = doe.bounds[i];
                let meas = c.measure.measure()?;
                if !(meas.contains(lo) && meas.contains(hi)) {
                    return cfg(format!(
                        "{field}.components[{i}].measure: support [{}, {}] does not cover the design range [{lo}, {hi}]",
                        meas.a, meas.b
                    ));
                }
            }
        }
        if command == Command::Verify && d > crate::oracle::MAX_GRID_DIM {
            return cfg(format!("test: verify builds full grids and supports d <= {}", crate::oracle::MAX_GRID_DIM));
        }
        if matches!(command, Command::ReplicateG | Command::ReplicateNoise) && self.replicates < 2 {
            return cfg("replicates: need at least 2 for a standard deviation".into());
        }
        if command == Command::ReplicateNoise && self.lambdas.is_empty() {
            return cfg("lambdas: needs at least one value".into());
        }
        for (k, l) in self.lambdas.iter().chain(std::iter::once(&self.lambda)).enumerate() {
            if !(l.is_finite() && *l >= 0.0) {
                return cfg(format!("lambdas[{k}]: must be non-negative, got {l}"));
            }
        }
        for s in &self.subsets {
            if s.is_empty() {
                return cfg("subsets: the empty subset has no index".into());
            }
            s.check(d).map_err(|e| Error::Config(format!("subsets: {e}")))?;
        }
        if let Some(g) = self.grid_points {
            if g < 2 {
                return cfg("grid_points: must be at least 2".into());
            }
        }
        Ok(())
    }

    /// Fig. 2 style slices of the brownian and gaussian kernels on `U[0, 5]`.
    pub fn decompose_default() -> Self {
        Self {
            decompose: Some(DecomposeSpec {
                kernels: vec![KernelSpec::new(KernelFamily::Brownian, None), KernelSpec::gaussian(1.0)],
                measure: MeasureSpec::uniform(0.0, 5.0),
                slices: vec![0.0, 2.0, 4.0],
                points: default_points(),
            }),
            ..Self::empty()
        }
    }

    /// Two-dimensional g-function, `a = (1, 2)`, 20-point design, Matérn 3/2.
    pub fn fit_report_default() -> Self {
        Self {
            seed: 2,
            test: Some(TestFunction::GFunction { a: vec![1.0, 2.0] }),
            model: Some(AnovaSpec::star(KernelSpec::matern32(1.0), MeasureSpec::uniform(0.0, 1.0), 1.0)),
            doe: Some(DoeSpec::unit_cube(20, 2)),
            grid_points: Some(41),
            ..Self::empty()
        }
    }

    /// g-function with `a = (0.2, 0.6, 0.8, 100, 100)`, 50-point designs,
    /// three kernels.
    pub fn replicate_g_default() -> Self {
        let unit = MeasureSpec::uniform(0.0, 1.0);
        Self {
            seed: 3,
            test: Some(TestFunction::GFunction {
                a: vec![0.2, 0.6, 0.8, 100.0, 100.0],
            }),
            models: vec![
                AnovaSpec::star(KernelSpec::new(KernelFamily::ShiftedBrownian, None), unit, 1.0),
                AnovaSpec::star(KernelSpec::matern32(1.0), unit, 1.0),
                AnovaSpec::star(KernelSpec::gaussian(1.0), unit, 1.0),
            ],
            doe: Some(DoeSpec::unit_cube(50, 5)),
            subsets: ["1", "2", "3", "1,2", "1,3", "2,3", "1,2,3"]
                .iter()
                .map(|s| s.parse().expect("valid subset"))
                .collect(),
            ..Self::empty()
        }
    }

    /// Quadratic test function under standard normal measures, gaussian
    /// kernel `θ = 10`, scale 200, 20-point designs on `[-5, 5]²`.
    pub fn replicate_noise_default() -> Self {
        Self {
            seed: 4,
            test: Some(TestFunction::Quadratic),
            model: Some(AnovaSpec::star(KernelSpec::gaussian(10.0), MeasureSpec::standard_normal(), 200.0)),
            doe: Some(DoeSpec::new(20, vec![(-5.0, 5.0); 2])),
            lambdas: vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0],
            ..Self::empty()
        }
    }

    /// Oracle checks on the two-dimensional g-function with 60-node rules.
    pub fn verify_default() -> Self {
        Self {
            seed: 5,
            test: Some(TestFunction::GFunction { a: vec![1.0, 2.0] }),
            model: Some(AnovaSpec::star(
                KernelSpec::matern32(1.0),
                MeasureSpec::uniform(0.0, 1.0).with_nodes(60),
                1.0,
            )),
            doe: Some(DoeSpec::unit_cube(20, 2)),
            ..Self::empty()
        }
    }

    pub fn default_for(command: Command) -> Self {
        match command {
            Command::Decompose => Self::decompose_default(),
            Command::FitReport => Self::fit_report_default(),
            Command::ReplicateG => Self::replicate_g_default(),
            Command::ReplicateNoise => Self::replicate_noise_default(),
            Command::Verify => Self::verify_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Decompose,
    FitReport,
    ReplicateG,
    ReplicateNoise,
    Verify,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Decompose,
        Command::FitReport,
        Command::ReplicateG,
        Command::ReplicateNoise,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Decompose => "decompose",
            Command::FitReport => "fit-report",
            Command::ReplicateG => "replicate-g",
            Command::ReplicateNoise => "replicate-noise",
            Command::Verify => "verify",
        }
    }
}
