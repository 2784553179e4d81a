//! Command-line front end: spec ingestion, dispatch, and report files.
//!
//! Every JSON report is wrapped in an envelope carrying `schema_version`,
//! `tool_version` and the SHA-256 of the spec document, and is written with
//! 17-significant-digit floats so reruns with the same config are
//! byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::boxcount::{estimate_dimension, BoxGrid, DEFAULT_SAFETY};
use crate::dimension::{classify, dims_exact, ClassifierConfig, Scale};
use crate::dimfunc::{build_h, doubling_audit, DimensionFunction};
use crate::error::{Error, Result};
use crate::export::to_json_pretty;
use crate::geometry::{
    generate_level, sample_natural_measure, write_points_csv, write_points_jsonl, DEFAULT_BUDGET,
};
use crate::real::Real;
use crate::seqcore::{check_separation, spec_digest, SpecDocument, SumSetSpec, DEFAULT_HORIZON};
use crate::thinning::{
    apply_plan, plan_block_density, plan_scaled_index, plan_two_ratio, thinned_dimension_check,
    AnchorSequences, DigitAssignment, ThinningPlan, DEFAULT_THINNING_HORIZON,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 0x5EED_C0DE;

const DEFAULT_LEVEL: usize = 10;
const DEFAULT_CLASSIFY_RANGE: usize = 2000;
const DEFAULT_BREAKPOINTS: usize = 50;
const AUDIT_SAMPLES: usize = 10_000;
const GRID_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Check,
    Generate,
    Dims,
    Classify,
    BuildH,
    Thin,
    Boxcount,
    FullReport,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Generate => "generate",
            Command::Dims => "dims",
            Command::Classify => "classify",
            Command::BuildH => "build-h",
            Command::Thin => "thin",
            Command::Boxcount => "boxcount",
            Command::FullReport => "full-report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PointFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    #[default]
    Power,
    Constructed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleArg {
    #[default]
    KappaTail,
    Term,
}

/// Everything a run needs; loadable from JSON via `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: PathBuf,
    pub command: Command,
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub level: Option<usize>,
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Power-law exponent for `classify`; defaults to the spec's `dim_H`.
    #[serde(default)]
    pub exponent: Option<f64>,
    #[serde(default)]
    pub gauge: Gauge,
    #[serde(default)]
    pub scale: ScaleArg,
    #[serde(default)]
    pub breakpoints: Option<usize>,
    /// Thinning request or saved plan for `thin`.
    #[serde(default)]
    pub plan: Option<PathBuf>,
    /// Draw this many natural-measure samples instead of enumerating the level.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub format: PointFormat,
    #[serde(default)]
    pub safety: Option<f64>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Construct and analyse generalized Cantor sum sets.
#[derive(Debug, Parser)]
#[command(name = "sumset", version)]
pub struct Cli {
    /// JSON run config; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spec document (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub level: Option<usize>,
    /// Maximum number of anchors to enumerate.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub exponent: Option<f64>,
    #[arg(long, value_enum)]
    pub gauge: Option<Gauge>,
    #[arg(long, value_enum)]
    pub scale: Option<ScaleArg>,
    #[arg(long)]
    pub breakpoints: Option<usize>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<PointFormat>,
    #[arg(long)]
    pub safety: Option<f64>,
}

impl Cli {
    pub fn into_config(self) -> Result<RunConfig> {
        let base: Option<RunConfig> = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                Some(serde_path_to_error::deserialize(de).map_err(|e| {
                    let path = e.path().to_string();
                    Error::Parse(format!("run config, field `{path}`: {}", e.into_inner()))
                })?)
            }
            None => None,
        };
        let missing = |what: &str| Error::validation(format!("--{what} is required"));
        let spec = self.spec.or_else(|| base.as_ref().map(|b| b.spec.clone()));
        let command = self.command.or(base.as_ref().map(|b| b.command));
        let out = self.out.or_else(|| base.as_ref().map(|b| b.out.clone()));
        let b = base.as_ref();
        Ok(RunConfig {
            spec: spec.ok_or_else(|| missing("spec"))?,
            command: command.ok_or_else(|| missing("command"))?,
            out: out.ok_or_else(|| missing("out"))?,
            seed: self.seed.or(b.map(|b| b.seed)).unwrap_or(DEFAULT_SEED),
            horizon: self.horizon.or(b.and_then(|b| b.horizon)),
            level: self.level.or(b.and_then(|b| b.level)),
            budget: self.budget.or(b.and_then(|b| b.budget)),
            threads: self.threads.or(b.and_then(|b| b.threads)),
            exponent: self.exponent.or(b.and_then(|b| b.exponent)),
            gauge: self.gauge.or(b.map(|b| b.gauge)).unwrap_or_default(),
            scale: self.scale.or(b.map(|b| b.scale)).unwrap_or_default(),
            breakpoints: self.breakpoints.or(b.and_then(|b| b.breakpoints)),
            plan: self.plan.or_else(|| b.and_then(|b| b.plan.clone())),
            samples: self.samples.or(b.and_then(|b| b.samples)),
            format: self.format.or(b.map(|b| b.format)).unwrap_or_default(),
            safety: self.safety.or(b.and_then(|b| b.safety)),
        })
    }
}

/// Process exit status for an error: 2 for resource limits, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_resource() {
        2
    } else {
        1
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    tool_version: &'a str,
    spec_digest: &'a str,
    command: &'a str,
    seed: u64,
    report: &'a T,
}

/// A loaded spec plus what every artifact needs to cite it.
struct Session<'a> {
    config: &'a RunConfig,
    spec: SumSetSpec,
    digest: String,
    written: Vec<String>,
}

impl Session<'_> {
    fn write_report<T: Serialize>(&mut self, name: &str, command: &str, report: &T) -> Result<()> {
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION,
            spec_digest: &self.digest,
            command,
            seed: self.config.seed,
            report,
        };
        self.write_file(name, to_json_pretty(&env)?.as_bytes())
    }

    fn write_file(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.config.out.join(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.written.push(name.to_string());
        Ok(BufWriter::new(File::create(self.config.out.join(name))?))
    }

    fn horizon(&self, default: usize) -> usize {
        self.config.horizon.unwrap_or(default)
    }

    fn level(&self) -> usize {
        self.config.level.unwrap_or(DEFAULT_LEVEL)
    }

    fn budget(&self) -> u64 {
        self.config.budget.unwrap_or(DEFAULT_BUDGET)
    }
}

/// Runs one command; returns the names of the files written under `out`.
pub fn run(config: &RunConfig) -> Result<Vec<String>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        if n == 0 {
            return Err(Error::validation("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &RunConfig) -> Result<Vec<String>> {
    let bytes = fs::read(&config.spec)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::Parse(format!("spec document is not UTF-8: {e}")))?;
    let doc = SpecDocument::from_json(text)?;
    let spec = doc.build_with_horizon(config.horizon.unwrap_or(DEFAULT_HORIZON))?;
    fs::create_dir_all(&config.out)?;
    let mut s = Session {
        config,
        spec,
        digest: spec_digest(&bytes),
        written: Vec::new(),
    };
    match config.command {
        Command::Check => cmd_check(&mut s)?,
        Command::Generate => cmd_generate(&mut s)?,
        Command::Dims => cmd_dims(&mut s)?,
        Command::Classify => cmd_classify(&mut s)?,
        Command::BuildH => cmd_build_h(&mut s)?,
        Command::Thin => cmd_thin(&mut s)?,
        Command::Boxcount => cmd_boxcount(&mut s)?,
        Command::FullReport => cmd_full_report(&mut s)?,
    }
    Ok(s.written)
}

#[derive(Serialize)]
struct CheckReport<'a> {
    p: usize,
    n_digits: usize,
    kappa: f64,
    tau: f64,
    sequence: &'a str,
    digits: &'a str,
    separation: crate::seqcore::SeparationReport,
}

fn cmd_check(s: &mut Session) -> Result<()> {
    let spec = &s.spec;
    let report = CheckReport {
        p: spec.dim(),
        n_digits: spec.n_digits(),
        kappa: spec.kappa(),
        tau: spec.tau(),
        sequence: spec.sequence().kind(),
        digits: spec.digits().kind(),
        separation: check_separation(spec, s.horizon(DEFAULT_HORIZON))?,
    };
    s.write_report("check.json", "check", &report)
}

#[derive(Serialize)]
struct GenerateReport {
    level: usize,
    points: usize,
    sampled: bool,
    file: String,
    /// Every exported point lies within this distance of its limit points.
    truncation_bound: f64,
}

fn cmd_generate(s: &mut Session) -> Result<()> {
    let level = s.level();
    let (p, n) = (s.spec.dim(), s.spec.n_digits());
    let file = match s.config.format {
        PointFormat::Csv => "points.csv",
        PointFormat::Jsonl => "points.jsonl",
    };
    let mut w = s.create(file)?;
    let (points, sampled) = match s.config.samples {
        Some(count) => {
            let samples = sample_natural_measure(&s.spec, level, count, s.config.seed)?;
            let rows = samples.iter().map(|x| (&x.word, x.point.as_slice()));
            match s.config.format {
                PointFormat::Csv => write_points_csv(&mut w, p, n, rows)?,
                PointFormat::Jsonl => write_points_jsonl(&mut w, n, rows)?,
            }
            (count, true)
        }
        None => {
            let iter = generate_level(&s.spec, level, s.budget())?;
            let total = iter.remaining() as usize;
            match s.config.format {
                PointFormat::Csv => write_points_csv(&mut w, p, n, iter)?,
                PointFormat::Jsonl => write_points_jsonl(&mut w, n, iter)?,
            }
            (total, false)
        }
    };
    w.flush()?;
    let report = GenerateReport {
        level,
        points,
        sampled,
        file: file.into(),
        truncation_bound: crate::geometry::uniform_tail_bound(&s.spec, level),
    };
    s.write_report("generate.json", "generate", &report)
}

fn cmd_dims(s: &mut Session) -> Result<()> {
    let report = dims_exact(&s.spec, s.horizon(DEFAULT_HORIZON))?;
    s.write_report("dims.json", "dims", &report)
}

fn gauge(s: &Session) -> Result<DimensionFunction> {
    match s.config.gauge {
        Gauge::Constructed => build_h(&s.spec, s.config.breakpoints.unwrap_or(DEFAULT_BREAKPOINTS)),
        Gauge::Power => {
            let exponent = match s.config.exponent {
                Some(e) => e,
                None => dims_exact(&s.spec, s.horizon(DEFAULT_HORIZON))?.dim_h,
            };
            DimensionFunction::power_law(exponent)
        }
    }
}

fn cmd_classify(s: &mut Session) -> Result<()> {
    let h = gauge(s)?;
    let scale = match s.config.scale {
        ScaleArg::KappaTail => Scale::KappaTail,
        ScaleArg::Term => Scale::Term,
    };
    let start = if scale == Scale::Term { 1 } else { 0 };
    let report = classify(
        &s.spec,
        &h,
        start..=s.horizon(DEFAULT_CLASSIFY_RANGE),
        scale,
        ClassifierConfig::default(),
    )?;
    s.write_report("classify.json", "classify", &report)
}

#[derive(Serialize)]
struct BuildHReport {
    breakpoints: usize,
    audit: crate::dimfunc::DoublingAudit,
    gauge_file: String,
}

fn cmd_build_h(s: &mut Session) -> Result<()> {
    let j = s.config.breakpoints.unwrap_or(DEFAULT_BREAKPOINTS);
    let h = build_h(&s.spec, j)?;
    let audit = doubling_audit(&h, &s.spec, AUDIT_SAMPLES)?;
    if let DimensionFunction::Constructed(c) = &h {
        let table = c.to_table();
        s.write_file("gauge.json", to_json_pretty(&table)?.as_bytes())?;
    }
    let report = BuildHReport {
        breakpoints: j,
        audit,
        gauge_file: "gauge.json".into(),
    };
    s.write_report("build-h.json", "build-h", &report)
}

/// `--plan` input: either a saved plan document or one of these requests.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "construction", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlanRequest {
    BlockDensity {
        #[serde(rename = "A")]
        cap_a: Real,
        #[serde(rename = "B")]
        cap_b: Real,
        alpha: Real,
        beta: Real,
        anchors: AnchorSequences,
        original_horizon: usize,
    },
    ScaledIndex {
        #[serde(rename = "A")]
        cap_a: Real,
        a: Real,
        anchors: AnchorSequences,
        horizon: usize,
        #[serde(default)]
        targets: Option<(f64, f64)>,
    },
    TwoRatio {
        #[serde(rename = "A")]
        cap_a: Real,
        a: Real,
        #[serde(rename = "B")]
        cap_b: Real,
        b: Real,
        delta: Real,
        anchors: AnchorSequences,
    },
    Remove {
        removed: Vec<usize>,
        original_horizon: usize,
    },
}

impl PlanRequest {
    /// The plan and the `(dim_H, dim_P)` it aims for, when known.
    pub fn build(&self) -> Result<(ThinningPlan, Option<(f64, f64)>)> {
        Ok(match self {
            PlanRequest::BlockDensity {
                cap_a,
                cap_b,
                alpha,
                beta,
                anchors,
                original_horizon,
            } => (
                plan_block_density(*cap_a, *cap_b, *alpha, *beta, anchors, *original_horizon)?,
                Some((alpha.value(), beta.value())),
            ),
            PlanRequest::ScaledIndex {
                cap_a,
                a,
                anchors,
                horizon,
                targets,
            } => (plan_scaled_index(*cap_a, *a, anchors, *horizon)?, *targets),
            PlanRequest::TwoRatio {
                cap_a,
                a,
                cap_b,
                b,
                delta,
                anchors,
            } => (
                plan_two_ratio(*cap_a, *a, *cap_b, *b, *delta, anchors)?,
                Some((a.value(), b.value())),
            ),
            PlanRequest::Remove {
                removed,
                original_horizon,
            } => (
                ThinningPlan::remove_indices(removed, *original_horizon)?,
                None,
            ),
        })
    }
}

fn load_plan(path: &Path) -> Result<(ThinningPlan, Option<(f64, f64)>)> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("plan file: {e}")))?;
    if value.get("schema_version").is_some() {
        return Ok((ThinningPlan::from_json(&text)?, None));
    }
    let de = &mut serde_json::Deserializer::from_str(&text);
    let req: PlanRequest = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(format!("plan request, field `{path}`: {}", e.into_inner()))
    })?;
    req.build()
}

#[derive(Serialize)]
struct ThinReport {
    horizon: usize,
    monotone: bool,
    sandwich_i0: Option<usize>,
    notes: Vec<String>,
    original_m: f64,
    thinned_separation: crate::seqcore::SeparationReport,
    dimension_check: Option<crate::thinning::ThinnedDimensionReport>,
    plan_file: String,
}

fn cmd_thin(s: &mut Session) -> Result<()> {
    let path = s
        .config
        .plan
        .clone()
        .ok_or_else(|| Error::validation("thin needs --plan"))?;
    let (plan, targets) = load_plan(&path)?;
    let thinned = apply_plan(&s.spec, &plan, DigitAssignment::Travel)?;
    let horizon = s.horizon(plan.horizon().min(DEFAULT_THINNING_HORIZON));
    let dimension_check = match targets {
        Some(t) => Some(thinned_dimension_check(
            &s.spec,
            &plan,
            t,
            horizon,
            (horizon / 10).max(1),
        )?),
        None => None,
    };
    s.write_file("plan.json", plan.to_json()?.as_bytes())?;
    let report = ThinReport {
        horizon: plan.horizon(),
        monotone: plan.is_monotone(),
        sandwich_i0: plan.sandwich_i0(),
        notes: plan.notes().to_vec(),
        original_m: s.spec.m(),
        thinned_separation: thinned.separation().clone(),
        dimension_check,
        plan_file: "plan.json".into(),
    };
    s.write_report("thin.json", "thin", &report)
}

fn boxcount_run(s: &mut Session) -> Result<crate::boxcount::BoxCountRun> {
    let level = s.level();
    let safety = s.config.safety.unwrap_or(DEFAULT_SAFETY);
    let grid = BoxGrid::auto(&s.spec, level, safety, GRID_POINTS)?;
    let run = estimate_dimension(&s.spec, level, &grid, safety, Some(s.budget()))?;
    let mut w = s.create("boxcount.csv")?;
    run.write_csv(&mut w)?;
    w.flush()?;
    Ok(run)
}

fn cmd_boxcount(s: &mut Session) -> Result<()> {
    let run = boxcount_run(s)?;
    s.write_report("boxcount.json", "boxcount", &run)
}

fn cmd_full_report(s: &mut Session) -> Result<()> {
    let dims = dims_exact(&s.spec, s.horizon(DEFAULT_HORIZON))?;
    s.write_report("dims.json", "dims", &dims)?;

    let h = DimensionFunction::power_law(dims.dim_h)?;
    let classification = classify(
        &s.spec,
        &h,
        0..=DEFAULT_CLASSIFY_RANGE,
        Scale::KappaTail,
        ClassifierConfig::default(),
    )?;
    s.write_report("classify.json", "classify", &classification)?;

    let built = if s.spec.m() < 1.0 {
        let j = s.config.breakpoints.unwrap_or(DEFAULT_BREAKPOINTS);
        let gauge = build_h(&s.spec, j)?;
        let audit = doubling_audit(&gauge, &s.spec, AUDIT_SAMPLES)?;
        if let DimensionFunction::Constructed(c) = &gauge {
            s.write_file("gauge.json", to_json_pretty(&c.to_table())?.as_bytes())?;
        }
        let report = BuildHReport {
            breakpoints: j,
            audit,
            gauge_file: "gauge.json".into(),
        };
        s.write_report("build-h.json", "build-h", &report)?;
        true
    } else {
        false
    };

    let run = boxcount_run(s)?;
    s.write_report("boxcount.json", "boxcount", &run)?;

    #[derive(Serialize)]
    struct Summary {
        dim_h: f64,
        dim_p: f64,
        certified: bool,
        classifier_items: Vec<u8>,
        gauge_built: bool,
        boxcount_slope: f64,
        boxcount_difference: Option<f64>,
    }
    let summary = Summary {
        dim_h: dims.dim_h,
        dim_p: dims.dim_p,
        certified: dims.certified,
        classifier_items: classification.verdicts.iter().map(|v| v.item()).collect(),
        gauge_built: built,
        boxcount_slope: run.slope,
        boxcount_difference: run.difference,
    };
    s.write_report("full-report.json", "full-report", &summary)
}
