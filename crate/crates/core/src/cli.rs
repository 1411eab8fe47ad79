//! `ehrsynth train | sample | eval`.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Arg, ArgMatches, Command};
use serde_json::json;

use crate::config::{RunConfig, KEYS};
use crate::data::{decode_records, load_csv, postprocess_batch, write_table, FeatureSchema, RecordMatrix};
use crate::diffusion::checkpoint::write_atomic;
use crate::diffusion::{sample, train, Checkpoint, DenoiserModel};
use crate::error::Error;
use crate::eval::{evaluate, MetricsReport};
use crate::nn::RandomSource;

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "EHRSYNTH_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Diverged { .. } | Error::UndefinedMetric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

struct Failure {
    stage: &'static str,
    error: Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

trait Stage<T> {
    fn stage(self, name: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, name: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage: name, error })
    }
}

pub fn schema_sidecar(checkpoint: &Path) -> PathBuf {
    with_suffix(checkpoint, ".schema")
}

pub fn meta_sidecar(checkpoint: &Path) -> PathBuf {
    with_suffix(checkpoint, ".meta.json")
}

pub fn default_loss_trace(checkpoint: &Path) -> PathBuf {
    with_suffix(checkpoint, ".loss.csv")
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("PATH")
        .value_parser(clap::value_parser!(PathBuf))
        .help(help)
}

fn with_config_keys(mut cmd: Command) -> Command {
    cmd = cmd.arg(path_arg("config", "run configuration file (default: $EHRSYNTH_CONFIG)"));
    for &(key, help) in KEYS {
        let mut arg = Arg::new(key).long(key).value_name("VALUE").help(help);
        if key == "samples" {
            arg = arg.short('n');
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

pub fn command() -> Command {
    Command::new("ehrsynth")
        .about("Score-based diffusion synthesis and evaluation of tabular health records")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_config_keys(
            Command::new("train")
                .about("Train a denoiser on a record CSV")
                .arg(path_arg("data", "training CSV").required(true))
                .arg(path_arg("schema", "feature schema file").required(true))
                .arg(path_arg("out", "checkpoint to write").required(true))
                .arg(path_arg("loss_trace", "per-epoch loss CSV (default: <out>.loss.csv)")),
        ))
        .subcommand(with_config_keys(
            Command::new("sample")
                .about("Generate decoded synthetic records from a checkpoint")
                .arg(path_arg("checkpoint", "trained checkpoint").required(true))
                .arg(path_arg("out", "CSV to write").required(true))
                .arg(path_arg("schema", "feature schema (default: <checkpoint>.schema)")),
        ))
        .subcommand(with_config_keys(
            Command::new("eval")
                .about("Compare synthetic records with real training and test records")
                .arg(path_arg("train", "real training CSV").required(true))
                .arg(path_arg("test", "real test CSV").required(true))
                .arg(path_arg("synth", "synthetic CSV").required(true))
                .arg(path_arg("schema", "feature schema file").required(true))
                .arg(path_arg("out", "JSON report to write").required(true)),
        ))
}

fn config_from(m: &ArgMatches) -> crate::Result<RunConfig> {
    let path = m
        .get_one::<PathBuf>("config")
        .cloned()
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for &(key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn path<'a>(m: &'a ArgMatches, name: &str) -> &'a Path {
    m.get_one::<PathBuf>(name).expect("required by clap")
}

fn load_schema(path: &Path) -> crate::Result<Arc<FeatureSchema>> {
    FeatureSchema::load(path).map(Arc::new)
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let outcome = match name {
        "train" => cmd_train(sub),
        "sample" => cmd_sample(sub),
        "eval" => cmd_eval(sub),
        _ => unreachable!("unknown subcommand"),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("ehrsynth {name}: {f}");
            exit_code(&f.error)
        }
    }
}

fn cmd_train(m: &ArgMatches) -> Result<(), Failure> {
    let cfg = config_from(m).stage("config")?;
    let out = path(m, "out");
    let schema = load_schema(path(m, "schema")).stage("schema")?;
    let data = load_csv(path(m, "data"), &schema).stage("load data")?;
    let mut rng = RandomSource::new(cfg.train.seed);
    let model = DenoiserModel::init(
        schema.width(),
        &cfg.hidden,
        cfg.schedule.sigma_data,
        cfg.precondition,
        &mut rng,
    )
    .stage("init")?;

    let trace_path = m
        .get_one::<PathBuf>("loss_trace")
        .cloned()
        .unwrap_or_else(|| default_loss_trace(out));
    let schedule = cfg.schedule;
    let (model, trace) = if cfg.train.epochs == 0 {
        (model, Vec::new())
    } else {
        train(model, &data, &cfg.train, &schedule, |r| {
            if r.checkpoint_due {
                Checkpoint::new(r.model.clone(), schedule)?.save(out)?;
            }
            Ok(())
        })
        .stage("train")?
    };

    Checkpoint::new(model, cfg.schedule)
        .and_then(|c| c.save(out))
        .stage("save checkpoint")?;
    write_atomic(&schema_sidecar(out), schema.to_string().as_bytes()).stage("save schema")?;
    let meta = json!({ "train_rows": data.row_count(), "config": cfg.snapshot() });
    let meta = serde_json::to_string_pretty(&meta).expect("plain JSON") + "\n";
    write_atomic(&meta_sidecar(out), meta.as_bytes()).stage("save metadata")?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    write_atomic(&trace_path, csv.as_bytes()).stage("save loss trace")?;

    match trace.last() {
        Some(l) => println!(
            "trained {} epochs on {} records; final loss {l:.6}; checkpoint {}",
            trace.len(),
            data.row_count(),
            out.display()
        ),
        None => println!("0 epochs; wrote initialized checkpoint {}", out.display()),
    }
    Ok(())
}

fn train_rows(checkpoint: &Path) -> crate::Result<usize> {
    let meta_path = meta_sidecar(checkpoint);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;
    meta["train_rows"]
        .as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| Error::Format(format!("{} lacks train_rows", meta_path.display())))
}

fn cmd_sample(m: &ArgMatches) -> Result<(), Failure> {
    let cfg = config_from(m).stage("config")?;
    let ckpt_path = path(m, "checkpoint");
    let ckpt = Checkpoint::load(ckpt_path).stage("load checkpoint")?;
    let schema_path = m
        .get_one::<PathBuf>("schema")
        .cloned()
        .unwrap_or_else(|| schema_sidecar(ckpt_path));
    let schema = load_schema(&schema_path).stage("schema")?;
    if schema.width() != ckpt.model.net.output_dim() {
        return Err(Failure {
            stage: "schema",
            error: Error::Schema(format!(
                "schema encodes {} features, checkpoint generates {}",
                schema.width(),
                ckpt.model.net.output_dim()
            )),
        });
    }
    let count = match cfg.samples {
        Some(n) => n,
        None => train_rows(ckpt_path).stage("sample count")?,
    };
    let records = if count == 0 {
        RecordMatrix::empty(Arc::clone(&schema))
    } else {
        let mut rng = RandomSource::new(cfg.sample_seed);
        let raw = sample(&ckpt.model, &ckpt.schedule, &mut rng, count, cfg.solver).stage("sample")?;
        postprocess_batch(&raw, &schema).stage("postprocess")?
    };
    let mut bytes = Vec::new();
    write_table(&mut bytes, &decode_records(&records), &schema).stage("write samples")?;
    let out = path(m, "out");
    write_atomic(out, &bytes).stage("write samples")?;
    println!("wrote {count} records to {}", out.display());
    Ok(())
}

fn scatter_path(report: &Path, name: &str) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.{name}.csv"))
}

fn write_scatter(report: &MetricsReport, schema: &FeatureSchema, out: &Path) -> crate::Result<()> {
    if let Some(pairs) = &report.prevalence_pairs {
        let mut names = Vec::with_capacity(schema.width());
        for col in schema.columns() {
            match &col.kind {
                crate::data::ColumnKind::Categorical { levels } => {
                    names.extend(levels.iter().map(|l| format!("{}={l}", col.name)))
                }
                _ => names.push(col.name.clone()),
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["feature", "real", "synthetic"])?;
        for (name, (r, s)) in names.iter().zip(pairs) {
            w.write_record([name.clone(), r.to_string(), s.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io(out, e.into_error()))?;
        write_atomic(&scatter_path(out, "prevalence"), &bytes)?;
    }
    if let Some(tasks) = &report.prediction_pairs {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["column", "real_f1", "synthetic_f1"])?;
        for t in tasks {
            w.write_record([t.column.clone(), t.real_f1.to_string(), t.synth_f1.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io(out, e.into_error()))?;
        write_atomic(&scatter_path(out, "prediction"), &bytes)?;
    }
    Ok(())
}

fn cmd_eval(m: &ArgMatches) -> Result<(), Failure> {
    let cfg = config_from(m).stage("config")?;
    let schema = load_schema(path(m, "schema")).stage("schema")?;
    let real_train = load_csv(path(m, "train"), &schema).stage("load train")?;
    let real_test = load_csv(path(m, "test"), &schema).stage("load test")?;
    let synth = load_csv(path(m, "synth"), &schema).stage("load synthetic")?;
    let mut report = evaluate(&real_train, &real_test, &synth, &cfg.eval).stage("evaluate")?;
    report.provenance.config = cfg.snapshot();
    report.provenance.seeds.insert("train".into(), cfg.train.seed);
    report.provenance.seeds.insert("sample".into(), cfg.sample_seed);
    let out = path(m, "out");
    write_atomic(out, report.to_json().as_bytes()).stage("write report")?;
    write_scatter(&report, &schema, out).stage("write scatter data")?;
    for flag in &report.provenance.flags {
        eprintln!("flag: {flag}");
    }
    println!("wrote report {}", out.display());
    Ok(())
}
