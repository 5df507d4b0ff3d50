//! The five commands behind the `zanova` binary, as pure functions from a
//! validated config to a set of named text artifacts.
//!
//! Replicates run in parallel; results are collected by replicate index, so
//! the artifacts do not depend on the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::anova_kernel::{AnovaKernel, AnovaMode};
use crate::config::{AnovaSpec, Command, ExperimentConfig, SCHEMA};
use crate::diagnostics::term_moments;
use crate::error::Result;
use crate::gp_model::{fit, Design, FittedModel};
use crate::sobol::{sobol_indices, Selection};
use crate::subset::Subset;
use crate::testbed::{add_noise, derive_seed, design_to_csv, lhs_maximin, TestFunction};
use crate::verify::verify_model;
use crate::zero_mean::decompose;

/// Means below this count as zero in the `fit-report` flag.
pub const ZERO_MEAN_FLAG: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
    /// `false` only when `verify` found a failing check.
    pub verified: bool,
}

impl RunOutput {
    fn new() -> Self {
        Self {
            verified: true,
            ..Self::default()
        }
    }

    fn push(&mut self, name: impl Into<String>, contents: String) {
        self.artifacts.push(Artifact {
            name: name.into(),
            contents,
        });
    }

    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }
}

/// Comment header carried by every CSV artifact.
pub fn csv_header(cfg: &ExperimentConfig) -> String {
    format!("# schema: {SCHEMA}\n# config_sha256: {}\n# seed: {}\n", cfg.hash(), cfg.seed)
}

fn json_header(cfg: &ExperimentConfig, command: Command) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command.name()));
    m.insert("config_sha256".into(), json!(cfg.hash()));
    m.insert("seed".into(), json!(cfg.seed));
    m
}

fn pretty(v: Value) -> String {
    serde_json::to_string_pretty(&v).expect("json serializes") + "\n"
}

/// Progress callback, called once per finished replicate.
pub type Progress<'a> = &'a (dyn Fn(&str) + Sync);

/// Validates `cfg` for `command` and runs it.
pub fn run(command: Command, cfg: &ExperimentConfig, progress: Progress) -> Result<RunOutput> {
    cfg.validate(command)?;
    match command {
        Command::Decompose => cmd_decompose(cfg),
        Command::FitReport => cmd_fit_report(cfg),
        Command::ReplicateG => cmd_replicate_g(cfg, progress),
        Command::ReplicateNoise => cmd_replicate_noise(cfg, progress),
        Command::Verify => cmd_verify(cfg),
    }
}

/// Slices `x ↦ k(x, y), k0(x, y), k1(x, y)` of each kernel.
pub fn cmd_decompose(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let spec = cfg.decompose_spec()?;
    let rule = spec.measure.rule()?;
    let (a, b) = (spec.measure.a, spec.measure.b);
    let mut out = RunOutput::new();
    for ks in &spec.kernels {
        let zk = decompose(ks.build()?, rule.clone())?;
        for &y in &spec.slices {
            let mut csv = csv_header(cfg);
            writeln!(csv, "# kernel: {}, y: {y}, degenerate: {}", zk.base().name(), zk.is_degenerate()).unwrap();
            csv.push_str("x,k,k0,k1\n");
            for p in 0..spec.points {
                let x = a + (b - a) * p as f64 / (spec.points - 1) as f64;
                let k = zk.base().eval(x, y)?;
                writeln!(csv, "{x},{k},{},{}", zk.eval_k0(x, y), zk.eval_k1(x, y)).unwrap();
            }
            let name = format!("decompose_{}_y{y}.csv", zk.base().name());
            out.summary.push(format!("wrote {name}"));
            out.push(name, csv);
        }
    }
    Ok(out)
}

fn selection(cfg: &ExperimentConfig) -> Selection {
    if cfg.subsets.is_empty() {
        Selection::up_to_order(cfg.max_order)
    } else {
        Selection::only(cfg.subsets.clone())
    }
}

/// Design and (possibly noisy) observations of replicate `r`.
fn replicate_data(cfg: &ExperimentConfig, tf: &TestFunction, r: u64, lambda: f64) -> Result<(Design, Vec<f64>)> {
    let design = lhs_maximin(cfg.doe()?, derive_seed(cfg.seed, 2 * r))?;
    let f = tf.eval_design(&design)?;
    let f = add_noise(&f, lambda, derive_seed(cfg.seed, 2 * r + 1))?;
    Ok((design, f))
}

fn term_value(model: &FittedModel, s: Subset, x: &[f64]) -> Result<f64> {
    match model.kernel().mode() {
        AnovaMode::Star => model.predict_submodel(s, x),
        _ => model.product_term(s, x),
    }
}

fn axis(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |p| lo + (hi - lo) * p as f64 / (points - 1) as f64)
}

/// One fit with its terms, moments and (star mode) sensitivity indices.
pub fn cmd_fit_report(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let tf = cfg.test()?;
    let spec = cfg.model()?;
    let d = tf.dim();
    let (design, f) = replicate_data(cfg, tf, 0, cfg.lambda)?;
    let model = fit(spec.build(d)?, design.clone(), f.clone(), cfg.lambda)?;
    let rules = spec.rules(d)?;
    let order = cfg.max_order.min(d);
    let subsets: Vec<Subset> = std::iter::once(Subset::EMPTY).chain(Subset::up_to_order(d, order)).collect();
    let moments = term_moments(&model, &rules, &subsets)?;

    let mut out = RunOutput::new();
    let mut report = json_header(cfg, Command::FitReport);
    report.insert("mode".into(), json!(spec.mode));
    report.insert("n".into(), json!(design.n()));
    report.insert("d".into(), json!(d));
    report.insert("lambda".into(), json!(cfg.lambda));
    report.insert("m0".into(), json!(model.constant_term()));
    report.insert("jitter".into(), json!(model.jitter_used()));
    report.insert("residual".into(), json!(model.residual()));
    report.insert("submodel_means".into(), json!(moments.means));
    report.insert("max_abs_mean".into(), json!(moments.max_abs_mean()));
    report.insert(
        "inner_products".into(),
        Value::Array(
            moments
                .inner_products
                .iter()
                .map(|(a, b, v)| json!({"i": a, "j": b, "value": v}))
                .collect(),
        ),
    );
    report.insert("max_abs_inner".into(), json!(moments.max_abs_inner()));
    let flagged = moments.max_abs_mean() > ZERO_MEAN_FLAG;
    report.insert("zero_mean_violation".into(), json!(flagged));
    let sensitivity = if spec.mode == AnovaMode::Star {
        let r = sobol_indices(&model, &selection(cfg))?;
        out.summary.extend(r.indices.iter().map(|(s, v)| format!("S[{s}] = {v:.4}")));
        json!(r)
    } else {
        Value::Null
    };
    report.insert("sensitivity".into(), sensitivity);
    out.summary.insert(
        0,
        format!(
            "fit: n={} d={d} mode={:?} m0={:.6} max|mean(m_I)|={:.3e}{}",
            design.n(),
            spec.mode,
            model.constant_term(),
            moments.max_abs_mean(),
            if flagged { " (terms are not centered)" } else { "" }
        ),
    );
    out.push("fit_report.json", pretty(Value::Object(report)));
    out.push("design.csv", csv_header(cfg) + &design_to_csv(&design, Some(&f)));

    if let Some(points) = cfg.grid_points {
        let bounds = &cfg.doe()?.bounds;
        let centre: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        for s in Subset::up_to_order(d, 2.min(d)) {
            let dims: Vec<usize> = s.dims().collect();
            let mut csv = csv_header(cfg);
            let cols: Vec<String> = dims.iter().map(|i| format!("x{}", i + 1)).collect();
            writeln!(csv, "{},m", cols.join(",")).unwrap();
            let mut x = centre.clone();
            let (lo0, hi0) = bounds[dims[0]];
            for u in axis(lo0, hi0, points) {
                x[dims[0]] = u;
                if let Some(&j) = dims.get(1) {
                    let (lo1, hi1) = bounds[j];
                    for v in axis(lo1, hi1, points) {
                        x[j] = v;
                        writeln!(csv, "{u},{v},{}", term_value(&model, s, &x)?).unwrap();
                    }
                } else {
                    writeln!(csv, "{u},{}", term_value(&model, s, &x)?).unwrap();
                }
            }
            out.push(format!("submodel_{}.csv", dims.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join("_")), csv);
        }
        if d <= 2 {
            let mut csv = csv_header(cfg);
            csv.push_str(if d == 1 { "x1,m\n" } else { "x1,x2,m\n" });
            let (lo0, hi0) = bounds[0];
            for u in axis(lo0, hi0, points) {
                if d == 1 {
                    writeln!(csv, "{u},{}", model.predict(&[u])?).unwrap();
                } else {
                    let (lo1, hi1) = bounds[1];
                    for v in axis(lo1, hi1, points) {
                        writeln!(csv, "{u},{v},{}", model.predict(&[u, v])?).unwrap();
                    }
                }
            }
            out.push("model.csv", csv);
        }
    }
    Ok(out)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Sobol indices of one fit, in `subsets` order.
fn indices_for(model: &FittedModel, selection: &Selection, subsets: &[Subset]) -> Result<Vec<f64>> {
    let r = sobol_indices(model, selection)?;
    Ok(subsets.iter().map(|s| r.indices[s]).collect())
}

fn resolved_subsets(cfg: &ExperimentConfig, d: usize) -> Vec<Subset> {
    if cfg.subsets.is_empty() {
        Subset::up_to_order(d, cfg.max_order).collect()
    } else {
        cfg.subsets.clone()
    }
}

/// Per-replicate index table, rows grouped by `labels`.
struct ReplicateTable {
    subsets: Vec<Subset>,
    /// `rows[group][replicate][subset]`
    rows: Vec<Vec<Vec<f64>>>,
}

impl ReplicateTable {
    fn summary_csv(&self, key: &str, labels: &[String]) -> String {
        let mut csv = format!("{key},subset,mean,std\n");
        for (label, reps) in labels.iter().zip(&self.rows) {
            for (k, s) in self.subsets.iter().enumerate() {
                let col: Vec<f64> = reps.iter().map(|r| r[k]).collect();
                let (m, sd) = mean_std(&col);
                writeln!(csv, "{label},\"{s}\",{m},{sd}").unwrap();
            }
            let sums: Vec<f64> = reps.iter().map(|r| r.iter().sum()).collect();
            let (m, sd) = mean_std(&sums);
            writeln!(csv, "{label},sum,{m},{sd}").unwrap();
        }
        csv
    }

    fn raw_csv(&self, key: &str, labels: &[String], seeds: &[u64]) -> String {
        let cols: Vec<String> = self.subsets.iter().map(|s| format!("\"S{s}\"")).collect();
        let mut csv = format!("{key},replicate,design_seed,{}\n", cols.join(","));
        for (label, reps) in labels.iter().zip(&self.rows) {
            for (r, vals) in reps.iter().enumerate() {
                let v: Vec<String> = vals.iter().map(f64::to_string).collect();
                writeln!(csv, "{label},{r},{},{}", seeds[r], v.join(",")).unwrap();
            }
        }
        csv
    }

    fn mean_std(&self, group: usize, subset: usize) -> (f64, f64) {
        let col: Vec<f64> = self.rows[group].iter().map(|r| r[subset]).collect();
        mean_std(&col)
    }
}

fn build_models(specs: &[AnovaSpec], d: usize) -> Result<Vec<AnovaKernel>> {
    specs.iter().map(|s| s.build(d)).collect()
}

/// Replicated g-function study: same designs for every model.
pub fn cmd_replicate_g(cfg: &ExperimentConfig, progress: Progress) -> Result<RunOutput> {
    let tf = cfg.test()?;
    let d = tf.dim();
    let kernels = build_models(&cfg.models, d)?;
    let subsets = resolved_subsets(cfg, d);
    let sel = Selection::only(subsets.clone());
    let per_rep: Vec<Vec<Vec<f64>>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let (design, f) = replicate_data(cfg, tf, r, 0.0)?;
            let row = kernels
                .iter()
                .map(|k| indices_for(&fit(k.clone(), design.clone(), f.clone(), 0.0)?, &sel, &subsets))
                .collect::<Result<Vec<_>>>()?;
            progress(&format!("replicate {r} done"));
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<Vec<f64>>> = (0..kernels.len())
        .map(|m| per_rep.iter().map(|rep| rep[m].clone()).collect())
        .collect();
    let table = ReplicateTable { subsets, rows };
    let labels: Vec<String> = cfg.models.iter().map(AnovaSpec::label).collect();
    let seeds: Vec<u64> = (0..cfg.replicates as u64).map(|r| derive_seed(cfg.seed, 2 * r)).collect();

    let meta = format!(
        "# replicates: {}, design points: {}, restarts: {}\n",
        cfg.replicates,
        cfg.doe()?.n,
        cfg.doe()?.restarts
    );
    let mut out = RunOutput::new();
    out.push("replicate_g.csv", csv_header(cfg) + &meta + &table.summary_csv("model", &labels));
    out.push("replicate_g_raw.csv", csv_header(cfg) + &meta + &table.raw_csv("model", &labels, &seeds));
    for (m, label) in labels.iter().enumerate() {
        let cells: Vec<String> = (0..table.subsets.len())
            .map(|k| {
                let (mean, sd) = table.mean_std(m, k);
                format!("{}:{mean:.2}({sd:.2})", table.subsets[k])
            })
            .collect();
        out.summary.push(format!("{label}: {}", cells.join(" ")));
    }
    Ok(out)
}

/// Replicated noisy-observation study. Each replicate draws a new design and
/// a new noise vector; both are shared across the `λ` values.
pub fn cmd_replicate_noise(cfg: &ExperimentConfig, progress: Progress) -> Result<RunOutput> {
    let tf = cfg.test()?;
    let d = tf.dim();
    let kernel = cfg.model()?.build(d)?;
    let subsets = resolved_subsets(cfg, d);
    let sel = Selection::only(subsets.clone());
    let per_rep: Vec<Vec<Vec<f64>>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let row = cfg
                .lambdas
                .iter()
                .map(|&lambda| {
                    let (design, f) = replicate_data(cfg, tf, r, lambda)?;
                    indices_for(&fit(kernel.clone(), design, f, lambda)?, &sel, &subsets)
                })
                .collect::<Result<Vec<_>>>()?;
            progress(&format!("replicate {r} done"));
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<Vec<f64>>> = (0..cfg.lambdas.len())
        .map(|l| per_rep.iter().map(|rep| rep[l].clone()).collect())
        .collect();
    let table = ReplicateTable { subsets, rows };
    let labels: Vec<String> = cfg.lambdas.iter().map(f64::to_string).collect();
    let seeds: Vec<u64> = (0..cfg.replicates as u64).map(|r| derive_seed(cfg.seed, 2 * r)).collect();

    let meta = format!(
        "# replicates: {}, design points: {}, restarts: {}\n# protocol: design and noise resampled per replicate, shared across lambda\n",
        cfg.replicates,
        cfg.doe()?.n,
        cfg.doe()?.restarts
    );
    let mut out = RunOutput::new();
    out.push("replicate_noise.csv", csv_header(cfg) + &meta + &table.summary_csv("lambda", &labels));
    out.push("replicate_noise_raw.csv", csv_header(cfg) + &meta + &table.raw_csv("lambda", &labels, &seeds));
    for (l, label) in labels.iter().enumerate() {
        let cells: Vec<String> = (0..table.subsets.len())
            .map(|k| {
                let (mean, sd) = table.mean_std(l, k);
                format!("{}:{mean:.2}({sd:.2})", table.subsets[k])
            })
            .collect();
        out.summary.push(format!("lambda={label}: {}", cells.join(" ")));
    }
    Ok(out)
}

/// Oracle checks on one fit.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let tf = cfg.test()?;
    let (design, f) = replicate_data(cfg, tf, 0, cfg.lambda)?;
    let model = fit(cfg.model()?.build(tf.dim())?, design, f, cfg.lambda)?;
    let report = verify_model(&model, &cfg.tolerances)?;
    let mut out = RunOutput::new();
    out.verified = report.passed();
    out.summary = report.lines();
    let mut json = json_header(cfg, Command::Verify);
    json.insert("passed".into(), json!(report.passed()));
    json.insert("checks".into(), json!(report.checks));
    out.push("verify.json", pretty(Value::Object(json)));
    Ok(out)
}

/// Mean and standard deviation per subset from a replicate summary CSV.
pub fn parse_summary_csv(text: &str) -> BTreeMap<(String, String), (f64, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter_map(|l| {
            let (key, rest) = l.split_once(',')?;
            let (subset, rest) = if let Some(stripped) = rest.strip_prefix('"') {
                let (s, r) = stripped.split_once("\",")?;
                (s.to_string(), r)
            } else {
                let (s, r) = rest.split_once(',')?;
                (s.to_string(), r)
            };
            let (m, sd) = rest.split_once(',')?;
            Some(((key.to_string(), subset), (m.parse().ok()?, sd.parse().ok()?)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbed::DoeSpec;

    fn quiet() -> impl Fn(&str) + Sync {
        |_: &str| {}
    }

    #[test]
    fn decompose_writes_one_file_per_slice() {
        let out = run(Command::Decompose, &ExperimentConfig::decompose_default(), &quiet()).unwrap();
        assert_eq!(out.artifacts.len(), 6);
        let csv = out.artifact("decompose_brownian_y2.csv").unwrap();
        assert!(csv.starts_with("# schema: zanova/1\n# config_sha256: "));
        let rows: Vec<Vec<f64>> = csv
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 201);
        for r in &rows {
            assert!((r[1] - r[2] - r[3]).abs() < 1e-12);
            assert!((r[1] - r[0].min(2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn fit_report_star_and_standard() {
        let mut cfg = ExperimentConfig::fit_report_default();
        cfg.grid_points = Some(5);
        let out = run(Command::FitReport, &cfg, &quiet()).unwrap();
        let report: Value = serde_json::from_str(out.artifact("fit_report.json").unwrap()).unwrap();
        assert_eq!(report["schema"], "zanova/1");
        assert!(report["max_abs_mean"].as_f64().unwrap() < 1e-10);
        assert_eq!(report["zero_mean_violation"], false);
        assert!(report["sensitivity"]["indices"]["1,2"].is_number());
        assert_eq!(report["submodel_means"].as_object().unwrap().len(), 3);
        assert!(out.artifact("submodel_1_2.csv").is_some());
        assert!(out.artifact("model.csv").is_some());

        cfg.model.as_mut().unwrap().mode = AnovaMode::Standard;
        let out = run(Command::FitReport, &cfg, &quiet()).unwrap();
        let report: Value = serde_json::from_str(out.artifact("fit_report.json").unwrap()).unwrap();
        assert!(report["max_abs_mean"].as_f64().unwrap() > 1e-3);
        assert_eq!(report["zero_mean_violation"], true);
        assert!(report["sensitivity"].is_null());
    }

    #[test]
    fn small_replicate_runs_are_deterministic() {
        let mut cfg = ExperimentConfig::replicate_g_default();
        cfg.replicates = 3;
        cfg.doe = Some(DoeSpec::unit_cube(15, 5).with_restarts(3));
        let a = run(Command::ReplicateG, &cfg, &quiet()).unwrap();
        let b = run(Command::ReplicateG, &cfg, &quiet()).unwrap();
        assert_eq!(a.artifacts, b.artifacts);
        let table = parse_summary_csv(a.artifact("replicate_g.csv").unwrap());
        assert_eq!(table.len(), 3 * 8);
        assert!(table.contains_key(&("matern32".to_string(), "1,2".to_string())));
    }

    #[test]
    fn noise_run_lists_every_lambda() {
        let mut cfg = ExperimentConfig::replicate_noise_default();
        cfg.replicates = 2;
        cfg.lambdas = vec![0.0, 4.0];
        cfg.doe = Some(DoeSpec::new(10, vec![(-5.0, 5.0); 2]).with_restarts(3));
        let out = run(Command::ReplicateNoise, &cfg, &quiet()).unwrap();
        let table = parse_summary_csv(out.artifact("replicate_noise.csv").unwrap());
        assert!(table.contains_key(&("0".to_string(), "2".to_string())));
        assert!(table.contains_key(&("4".to_string(), "sum".to_string())));
        assert!(out.artifact("replicate_noise.csv").unwrap().contains("# protocol:"));
    }

    #[test]
    fn verify_default_passes() {
        let out = run(Command::Verify, &ExperimentConfig::verify_default(), &quiet()).unwrap();
        assert!(out.verified, "{:?}", out.summary);
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let mut cfg = ExperimentConfig::fit_report_default();
        cfg.doe.as_mut().unwrap().n = 1;
        assert!(matches!(run(Command::FitReport, &cfg, &quiet()), Err(crate::error::Error::Config(_))));
    }
}
