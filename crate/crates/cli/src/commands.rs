use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use tdcfdr_core::montecarlo::{self, FdrMeasurement, Level, Scenario, RNG_ALGORITHM};
use tdcfdr_core::oracle::suites::{self, SuiteReport};
use tdcfdr_core::{
    control, count_profile, estimate_curve, fdp_of, monotone_min_fdr, rank, rollup_peptide_level, ControlPolicy,
    EstimatorConfig, Method, RankedList,
};

use crate::args::{Cli, Command, ControlArgs, EstimateArgs, InputArgs, SimulateArgs, Suite, VerifyArgs};
use crate::report::{ConfigEcho, RunReport};
use crate::table::{PsmTable, ReadOptions};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or invalid input files.
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
        }
    }
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => EXIT_OK,
            Status::VerificationFailed => EXIT_VERIFY_FAILED,
        }
    }
}

/// Execute a parsed command line. `argv` is echoed into reports; primary
/// output that has no `--out` goes to `stdout`.
pub fn run(cli: &Cli, argv: &[String], stdout: &mut dyn Write) -> Result<Status, CliError> {
    match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, argv, stdout),
        Command::Control(a) => cmd_control(a, argv, stdout),
        Command::Verify(a) => cmd_verify(a, argv, stdout),
        Command::Simulate(a) => cmd_simulate(a, argv, stdout),
    }
}

fn emit(out: Option<&PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| input_err(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn load(input: &InputArgs) -> Result<(PsmTable, RankedList), CliError> {
    let file = File::open(&input.input).map_err(|e| input_err(&input.input, e))?;
    let table = PsmTable::read(
        BufReader::new(file),
        ReadOptions {
            key: input.key,
            flip_sign: input.flip_sign,
        },
    )
    .map_err(|e| input_err(&input.input, e))?;
    let ranked = rank(table.identifications()).map_err(|e| input_err(&input.input, e))?;
    let ranked = match Level::from(input.level) {
        Level::Peptide => rollup_peptide_level(&ranked),
        Level::Spectrum => ranked,
    };
    Ok((table, ranked))
}

fn input_echo(input: &InputArgs) -> ConfigEcho {
    ConfigEcho {
        input: Some(input.input.display().to_string()),
        r: Some(input.r),
        level: Some(Level::from(input.level).name().to_string()),
        key: input.key.to_possible_value().map(|v| v.get_name().to_string()),
        flip_sign: Some(input.flip_sign),
        ..ConfigEcho::new()
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::TdcPlusC => "tdc",
        Method::BenjaminiHochberg => "bh",
    }
}

/// Estimates for every identification of `list`, one TSV row each, followed
/// by any extra input columns.
pub fn estimate_table(table: &PsmTable, list: &RankedList, cfg: &EstimatorConfig) -> String {
    let curve = estimate_curve(&count_profile(list), cfg);
    let min_fdr = monotone_min_fdr(&curve);
    let rows: HashMap<&str, usize> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.identification.spectrum_id.as_str(), i))
        .collect();
    let mut out = String::from("spectrum_id\tpeptide\tscore\tlabel\tn_tar\tn_dec\testimated_fdr\tmin_fdr");
    for col in &table.extra_columns {
        out.push('\t');
        out.push_str(col);
    }
    out.push('\n');
    for id in list {
        let k = curve.partition_point(|e| e.threshold > id.score);
        let est = &curve[k];
        let row = &table.rows[rows[id.spectrum_id.as_str()]];
        let label = if id.is_target() { "target" } else { "decoy" };
        let _ = write!(
            out,
            "{}\t{}\t{}\t{label}\t{}\t{}\t{}\t{}",
            id.spectrum_id, row.peptide, id.score, est.n_tar, est.n_dec, est.value, min_fdr[k]
        );
        for v in &row.extra {
            out.push('\t');
            out.push_str(v);
        }
        out.push('\n');
    }
    out
}

pub fn cmd_estimate(a: &EstimateArgs, argv: &[String], stdout: &mut dyn Write) -> Result<Status, CliError> {
    let (table, list) = load(&a.input)?;
    let cfg = EstimatorConfig::new(a.input.r, a.c)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .clamped(!a.no_clamp);
    emit(a.out.as_ref(), stdout, &estimate_table(&table, &list, &cfg))?;
    if let Some(path) = &a.report {
        let totals = count_profile(&list).totals();
        let config = ConfigEcho {
            c: Some(a.c),
            clamp: Some(!a.no_clamp),
            ..input_echo(&a.input)
        };
        let results = json!({
            "identifications": list.len(),
            "n_tar": totals.n_tar,
            "n_dec": totals.n_dec,
        });
        let report = RunReport::new(argv.to_vec(), config, results);
        fs::write(path, report.to_json()).map_err(|e| input_err(path, e))?;
    }
    Ok(Status::Ok)
}

pub fn control_report(list: &RankedList, policy: &ControlPolicy) -> serde_json::Value {
    let report = control(list, policy);
    let retained: Vec<_> = report
        .retained
        .iter()
        .map(|id| json!({ "spectrum_id": id.spectrum_id, "peptide": id.peptide_key, "score": id.score }))
        .collect();
    json!({
        "found": report.found(),
        "threshold": report.threshold,
        "n_retained": report.retained.len(),
        "fdp": fdp_of(&report).ok(),
        "retained": retained,
        "note": (!report.found()).then_some("no score qualified; nothing is retained"),
    })
}

pub fn cmd_control(a: &ControlArgs, argv: &[String], stdout: &mut dyn Write) -> Result<Status, CliError> {
    let (_, list) = load(&a.input)?;
    let usage = |e: tdcfdr_core::Error| CliError::Usage(e.to_string());
    let cfg = EstimatorConfig::new(a.input.r, a.c).map_err(usage)?;
    let policy = ControlPolicy::new(a.alpha, cfg, a.method.into()).map_err(usage)?;
    let config = ConfigEcho {
        alpha: Some(a.alpha),
        c: Some(a.c),
        clamp: Some(false),
        method: Some(method_name(policy.method()).to_string()),
        ..input_echo(&a.input)
    };
    let report = RunReport::new(argv.to_vec(), config, control_report(&list, &policy));
    emit(a.out.as_ref(), stdout, &report.to_json())?;
    Ok(Status::Ok)
}

fn with_threads<T: Send>(threads: Option<u64>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n as usize);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_suite(suite: Suite, a: &VerifyArgs) -> tdcfdr_core::Result<Vec<SuiteReport>> {
    let n = |default: usize| a.max_n.map_or(default, |n| n as usize);
    Ok(match suite {
        Suite::Theorem1 => vec![suites::theorem1(n(12), a.placements, a.seed)?],
        Suite::Theorem2 => vec![suites::theorem2(n(12), a.placements, a.seed)?],
        Suite::Theorem3 => vec![suites::theorem3()?],
        Suite::Lemmas => vec![suites::lemmas(n(20))?],
        Suite::Martingale => vec![suites::martingale(n(10))?],
        Suite::All => {
            let mut all = Vec::new();
            for s in [
                Suite::Theorem1,
                Suite::Theorem2,
                Suite::Theorem3,
                Suite::Lemmas,
                Suite::Martingale,
            ] {
                all.extend(run_suite(s, a)?);
            }
            all
        }
    })
}

pub fn suite_line(r: &SuiteReport) -> String {
    let mut line = format!(
        "{}: {} spaces={} checks={} violations={} worst_margin={:e}",
        r.name,
        if r.passed() { "PASS" } else { "FAIL" },
        r.spaces,
        r.checks,
        r.violations,
        r.worst_margin
    );
    for note in &r.notes {
        line.push_str(" | ");
        line.push_str(note);
    }
    line
}

pub fn cmd_verify(a: &VerifyArgs, argv: &[String], stdout: &mut dyn Write) -> Result<Status, CliError> {
    let reports = with_threads(a.threads, || run_suite(a.suite, a))?.map_err(|e| CliError::Usage(e.to_string()))?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&suite_line(r));
        text.push('\n');
    }
    emit(None, stdout, &text)?;
    if let Some(path) = &a.report {
        let config = ConfigEcho {
            seed: Some(a.seed),
            clamp: Some(false),
            ..ConfigEcho::new()
        };
        let report = RunReport::new(argv.to_vec(), config, json!({ "suites": reports }));
        fs::write(path, report.to_json()).map_err(|e| input_err(path, e))?;
    }
    Ok(if reports.iter().all(SuiteReport::passed) {
        Status::Ok
    } else {
        Status::VerificationFailed
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub scenario_id: String,
    pub criterion: String,
    pub level: Level,
    pub n_correct: usize,
    #[serde(flatten)]
    pub measurement: FdrMeasurement,
}

pub const SIM_COLUMNS: [&str; 10] = [
    "scenario_id",
    "criterion",
    "level",
    "n_correct",
    "mean_fdp",
    "std_error",
    "trials",
    "mean_retained",
    "found_fraction",
    "invariant_violations",
];

pub fn read_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| input_err(path, e))?;
    scenario.validate().map_err(|e| input_err(path, e))?;
    Ok(scenario)
}

fn criterion_name(policy: &ControlPolicy) -> String {
    match policy.method() {
        Method::TdcPlusC => format!("tdc_c{}", policy.cfg().c()),
        Method::BenjaminiHochberg => "bh".to_string(),
    }
}

pub fn simulate_rows(scenario: &Scenario) -> tdcfdr_core::Result<Vec<SimRow>> {
    match &scenario.sweep_n_correct {
        Some(values) => Ok(montecarlo::sweep_curve(scenario, values)?
            .into_iter()
            .map(|row| SimRow {
                scenario_id: scenario.id.clone(),
                criterion: row.criterion(),
                level: row.level,
                n_correct: row.n_correct,
                measurement: row.measurement,
            })
            .collect()),
        None => Ok(vec![SimRow {
            scenario_id: scenario.id.clone(),
            criterion: criterion_name(&scenario.policy),
            level: scenario.level,
            n_correct: scenario.n_correct,
            measurement: montecarlo::run(scenario)?,
        }]),
    }
}

/// Results TSV; floats use the shortest representation that reads back
/// exactly, and an undefined standard error is left blank.
pub fn simulate_tsv(rows: &[SimRow]) -> String {
    let mut out = SIM_COLUMNS.join("\t");
    out.push('\n');
    for r in rows {
        let m = &r.measurement;
        let se = m.std_error.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{se}\t{}\t{}\t{}\t{}",
            r.scenario_id,
            r.criterion,
            r.level.name(),
            r.n_correct,
            m.mean_fdp,
            m.trials,
            m.mean_retained,
            m.found_fraction,
            m.invariant_violations
        );
    }
    out
}

pub fn cmd_simulate(a: &SimulateArgs, argv: &[String], stdout: &mut dyn Write) -> Result<Status, CliError> {
    let scenario = read_scenario(&a.scenario)?;
    let rows = with_threads(a.threads, || simulate_rows(&scenario))?.map_err(|e| input_err(&a.scenario, e))?;
    emit(a.out.as_ref(), stdout, &simulate_tsv(&rows))?;
    if let Some(path) = &a.report {
        let policy = &scenario.policy;
        let config = ConfigEcho {
            input: Some(a.scenario.display().to_string()),
            alpha: Some(policy.alpha()),
            r: Some(scenario.r),
            c: Some(policy.cfg().c()),
            clamp: Some(policy.cfg().clamp()),
            level: Some(scenario.level.name().to_string()),
            method: Some(method_name(policy.method()).to_string()),
            seed: Some(scenario.seed),
            rng: Some(RNG_ALGORITHM.to_string()),
            scenario: Some(serde_json::to_value(&scenario).expect("scenario serializes")),
            ..ConfigEcho::new()
        };
        let report = RunReport::new(argv.to_vec(), config, json!({ "rows": rows }));
        fs::write(path, report.to_json()).map_err(|e| input_err(path, e))?;
    }
    Ok(Status::Ok)
}
