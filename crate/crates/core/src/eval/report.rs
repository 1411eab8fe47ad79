use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use super::privacy::{attribute_inference_risk, membership_inference_risk, ThresholdRule, DEFAULT_KNOWN_FEATURES};
use super::utility::{
    check_compatible, correlation_matrix_distance, dimensionwise_prediction, downstream_auc,
    latent_cluster_distance, mca_distance, non_zero_columns, prevalence_correlation, ClassifierOptions,
    LatentOptions, PredictionTask,
};
use crate::data::{ColumnKind, RecordMatrix};
use crate::error::{Error, Result};
use crate::nn::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Prevalence,
    Nzc,
    Cmd,
    Prediction,
    Latent,
    Mcad,
    Air,
    Mir,
    Auc,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Prevalence,
        Metric::Nzc,
        Metric::Cmd,
        Metric::Prediction,
        Metric::Latent,
        Metric::Mcad,
        Metric::Air,
        Metric::Mir,
        Metric::Auc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Prevalence => "prevalence",
            Metric::Nzc => "nzc",
            Metric::Cmd => "cmd",
            Metric::Prediction => "prediction",
            Metric::Latent => "latent",
            Metric::Mcad => "mcad",
            Metric::Air => "air",
            Metric::Mir => "mir",
            Metric::Auc => "auc",
        }
    }

    /// Parses a comma-separated list such as `air,mir`; `all` selects every metric.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Metric::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("empty metric list".into()));
        }
        Ok(out)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub metrics: Vec<Metric>,
    pub seed: u64,
    pub prediction_tasks: usize,
    pub classifier: ClassifierOptions,
    pub latent: LatentOptions,
    pub mcad_bins: usize,
    pub known_features: usize,
    pub mir_threshold: ThresholdRule,
    /// Training records mixed into the membership pool; defaults to `|real_test|`.
    pub mir_subset: Option<usize>,
    /// Binary column used as the downstream prediction label.
    pub label: Option<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            seed: 0,
            prediction_tasks: 30,
            classifier: ClassifierOptions::default(),
            latent: LatentOptions::default(),
            mcad_bins: 20,
            known_features: DEFAULT_KNOWN_FEATURES,
            mir_threshold: ThresholdRule::Median,
            mir_subset: None,
            label: None,
        }
    }
}

pub const CLASSIFIER_NOTICE: &str =
    "downstream and per-dimension classifiers are L2-regularised logistic regression in place of gradient-boosted trees";

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct Provenance {
    pub tool: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub notices: Vec<String>,
    /// Degenerate or skipped metrics, one line each.
    pub flags: Vec<String>,
    /// Auxiliary per-metric values (chosen K, thresholds, feature counts).
    pub details: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prevalence_pairs: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prevalence_corr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nzc: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cmd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction_pairs: Option<Vec<PredictionTask>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction_corr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub air: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mir: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_real: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc_synth: Option<f64>,
    pub provenance: Provenance,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    fn flag(&mut self, metric: Metric, message: impl fmt::Display) {
        self.provenance.flags.push(format!("{metric}: {message}"));
    }
}

/// Label column name to its encoded coordinate.
fn label_coordinate(matrix: &RecordMatrix, name: &str) -> Result<usize> {
    let schema = matrix.schema();
    let i = schema
        .column_index(name)
        .ok_or_else(|| Error::Config(format!("label column `{name}` is not in the schema")))?;
    if schema.columns()[i].kind != ColumnKind::Binary {
        return Err(Error::Config(format!("label column `{name}` is not binary")));
    }
    Ok(schema.offset(i))
}

/// Runs the selected metrics. Schema mismatches abort; any per-metric failure
/// leaves that metric out and records a flag in the provenance block.
pub fn evaluate(
    real_train: &RecordMatrix,
    real_test: &RecordMatrix,
    synth: &RecordMatrix,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    check_compatible(real_train, real_test)?;
    check_compatible(real_train, synth)?;
    let mut report = MetricsReport::default();
    report.provenance.tool = format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    report.provenance.seeds.insert("eval".into(), opts.seed);

    for &metric in &opts.metrics {
        let outcome: Result<()> = (|| {
            match metric {
                Metric::Prevalence => {
                    let p = prevalence_correlation(real_train, synth)?;
                    report.prevalence_corr = Some(p.correlation);
                    report.prevalence_pairs = Some(p.pairs);
                }
                Metric::Nzc => {
                    report.nzc = Some(non_zero_columns(synth));
                    report
                        .provenance
                        .details
                        .insert("nzc_binary_columns".into(), json!(synth.schema().binary_count()));
                }
                Metric::Cmd => report.cmd = Some(correlation_matrix_distance(real_train, synth)?),
                Metric::Prediction => {
                    let p = dimensionwise_prediction(
                        real_train,
                        real_test,
                        synth,
                        opts.prediction_tasks,
                        opts.classifier,
                    )?;
                    if p.truncated {
                        report.flag(metric, format!("only {} binary columns available", p.tasks.len()));
                    }
                    let degenerate = p.tasks.iter().filter(|t| t.real_degenerate || t.synth_degenerate).count();
                    if degenerate > 0 {
                        report.flag(metric, format!("{degenerate} tasks had single-class training labels"));
                    }
                    match p.correlation {
                        Some(c) => report.prediction_corr = Some(c),
                        None => report.flag(metric, "fewer than 2 tasks; no correlation"),
                    }
                    report.prediction_pairs = Some(p.tasks);
                }
                Metric::Latent => {
                    let l = latent_cluster_distance(real_train, synth, &opts.latent, opts.seed)?;
                    report.latent_distance = Some(l.value);
                    report.provenance.details.insert(
                        "latent".into(),
                        json!({ "k": l.k, "components": l.components, "real_fractions": l.real_fractions }),
                    );
                }
                Metric::Mcad => report.mcad = Some(mca_distance(real_train, synth, opts.mcad_bins)?),
                Metric::Air => {
                    let a = attribute_inference_risk(real_train, synth, opts.known_features)?;
                    if a.truncated {
                        report.flag(metric, format!("known set reduced to {} features", a.known_features));
                    }
                    report.air = Some(a.f1);
                    report.provenance.details.insert(
                        "air".into(),
                        json!({ "known_features": a.known_features, "unknown_features": a.unknown_features }),
                    );
                }
                Metric::Mir => {
                    let size = opts
                        .mir_subset
                        .unwrap_or(real_test.row_count())
                        .min(real_train.row_count());
                    let mut rng = RandomSource::new(opts.seed ^ 0x6d69_7200);
                    let mut picked = rng.permutation(real_train.row_count());
                    picked.truncate(size);
                    picked.sort_unstable();
                    let subset = real_train.select_rows(&picked);
                    let m = membership_inference_risk(&subset, real_test, synth, opts.mir_threshold)?;
                    report.mir = Some(m.f1);
                    report.provenance.details.insert(
                        "mir".into(),
                        json!({ "threshold": m.threshold, "members": m.members, "non_members": m.non_members }),
                    );
                }
                Metric::Auc => {
                    let name = opts
                        .label
                        .as_deref()
                        .ok_or_else(|| Error::Config("no label column configured".into()))?;
                    let label = label_coordinate(real_train, name)?;
                    let a = downstream_auc(real_train, real_test, synth, label, opts.classifier)?;
                    if a.real_degenerate {
                        report.flag(metric, "real training labels are single-class");
                    }
                    if a.synth_degenerate {
                        report.flag(metric, "synthetic training labels are single-class");
                    }
                    report.auc_real = Some(a.auc_real);
                    report.auc_synth = Some(a.auc_synth);
                    report
                        .provenance
                        .details
                        .insert("auc".into(), json!({ "label": name, "synth_rows": a.synth_rows }));
                }
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            report.flag(metric, e);
        }
    }
    if opts.metrics.iter().any(|m| matches!(m, Metric::Prediction | Metric::Auc)) {
        report.provenance.notices.push(CLASSIFIER_NOTICE.into());
    }
    Ok(report)
}
