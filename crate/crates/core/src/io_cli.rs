//! Run configuration, command orchestration and CSV output.
//!
//! Configuration files use TOML syntax (INI-like sections). Times and time
//! steps are given in the units of the problem block: dimensionless for
//! `[problem.dimensionless]`, minutes for `[problem.dimensional]`.
//!
//! Every output file starts with `#` metadata lines (code version, config
//! hash, problem hash, seed, solver). Numbers are written in scientific
//! notation with a fixed number of significant digits (17 by default), so
//! two runs with equal headers have byte-equal bodies. Wall-clock time is
//! kept out of the default file set for the same reason; it goes to stderr
//! and, on request, to `timing.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::error::{ConfigError, Error, ObservableError, SolverError};
use crate::model::{nondimensionalize, redimensionalize, DimensionlessProblem, PhysicalParameters};
use crate::observables::{compare, ensemble_stats, ErrorReport};
use crate::reference::{solve_reference, transform_problem, ReferenceMesh};
use crate::rwm::{
    self, build_lattice, estimate_u_max, init_walkers, validate_timestep, LeftBoundary, Numerics,
    SigmaCoupling, TimestepReport,
};
use crate::trace::{digest, Diagnostics, Snapshot, SolutionTrace, SolverKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Acceptance thresholds applied by [`cmd_compare`].
pub const FRONT_TOLERANCE: f64 = 0.05;
pub const PROFILE_TOLERANCE: f64 = 0.10;
pub const MASS_TOLERANCE: f64 = 0.03;
pub const LEFT_TOLERANCE: f64 = 0.05;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    left: LeftBoundary,
    numerics: RawNumerics,
    #[serde(default)]
    reference: RawReference,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    dimensionless: Option<DimensionlessProblem>,
    dimensional: Option<PhysicalParameters>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    time_step: f64,
    n: u64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    snapshot_times: Vec<f64>,
    #[serde(default = "one")]
    record_every: usize,
    u_max: Option<f64>,
    #[serde(default)]
    strict: bool,
    #[serde(default)]
    sigma_coupling: SigmaCoupling,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    #[serde(default = "default_elements")]
    elements: usize,
    time_step: Option<f64>,
    #[serde(default = "one")]
    record_every: usize,
}

impl Default for RawReference {
    fn default() -> Self {
        RawReference {
            elements: default_elements(),
            time_step: None,
            record_every: 1,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    #[serde(default = "default_precision")]
    precision: usize,
}

impl Default for RawOutput {
    fn default() -> Self {
        RawOutput {
            dir: None,
            precision: default_precision(),
        }
    }
}

fn default_seed() -> u64 {
    1
}
fn one() -> usize {
    1
}
fn default_elements() -> usize {
    100
}
fn default_precision() -> usize {
    17
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSettings {
    pub dir: PathBuf,
    /// Significant digits of every number written.
    pub precision: usize,
}

/// A validated run configuration, already in dimensionless form.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub path: PathBuf,
    /// The configuration file as read.
    pub source: String,
    pub problem: DimensionlessProblem,
    /// Present for `[problem.dimensional]` inputs.
    pub physical: Option<PhysicalParameters>,
    pub left: LeftBoundary,
    pub numerics: Numerics,
    pub reference: ReferenceMesh,
    pub output: OutputSettings,
}

impl RunConfig {
    /// Hash of everything that determines the numbers in the output,
    /// except the seed, which every header records on its own.
    pub fn config_hash(&self) -> String {
        let numerics = Numerics {
            seed: 0,
            member: 0,
            ..self.numerics.clone()
        };
        digest(&format!(
            "{:?}\n{:?}\n{:?}\n{:?}\n{:?}\n{}",
            self.problem, self.physical, self.left, numerics, self.reference, self.output.precision
        ))
    }

    /// Factor from the problem's own time unit to dimensionless time.
    fn time_unit(&self) -> f64 {
        match &self.physical {
            Some(p) => 1.0 / p.scales().time_scale(),
            None => 1.0,
        }
    }
}

fn semantic(path: &Path, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Semantic {
        path: path.to_path_buf(),
        field: field.to_string(),
        message: message.into(),
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let source = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&source, path)
}

/// Parse and validate configuration text; `path` is used in messages only.
pub fn parse_config(source: &str, path: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(source).map_err(|e| {
        let line = e
            .span()
            .map(|s| source[..s.start.min(source.len())].matches('\n').count() + 1);
        let message = e.message().trim().to_string();
        ConfigError::Parse {
            path: path.to_path_buf(),
            message: match line {
                Some(l) => format!("line {l}: {message}"),
                None => message,
            },
        }
    })?;

    let (problem, physical, prefix) = match (raw.problem.dimensionless, raw.problem.dimensional) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(semantic(
                path,
                "problem",
                "exactly one of [problem.dimensionless] and [problem.dimensional] is required",
            ))
        }
        (Some(p), None) => {
            if p.h0 >= p.length {
                return Err(semantic(path, "problem.dimensionless.h0", "h0 must be < L"));
            }
            p.validate()
                .map_err(|e| semantic(path, "problem.dimensionless", e.to_string()))?;
            (p, None, "problem.dimensionless")
        }
        (None, Some(phys)) => {
            if phys.s0 >= phys.ell {
                return Err(semantic(path, "problem.dimensional.s0", "s0 must be < ell"));
            }
            let p = nondimensionalize(&phys)
                .map_err(|e| semantic(path, "problem.dimensional", e.to_string()))?;
            (p, Some(phys), "problem.dimensional")
        }
    };
    log::debug!("loaded {prefix} problem from {}", path.display());
    let unit = physical
        .as_ref()
        .map(|p| 1.0 / p.scales().time_scale())
        .unwrap_or(1.0);

    left_checks(path, &raw.left)?;

    let rn = raw.numerics;
    if !(rn.time_step > 0.0 && rn.time_step.is_finite()) {
        return Err(semantic(path, "numerics.time_step", "must be finite and > 0"));
    }
    if rn.n == 0 {
        return Err(semantic(path, "numerics.n", "must be >= 1"));
    }
    if rn.record_every == 0 {
        return Err(semantic(path, "numerics.record_every", "must be >= 1"));
    }
    let final_in_units = problem.final_time / unit;
    for &t in &rn.snapshot_times {
        if !(t >= 0.0 && t <= final_in_units * (1.0 + 1e-12)) {
            return Err(semantic(
                path,
                "numerics.snapshot_times",
                format!("time {t} lies outside [0, {final_in_units}]"),
            ));
        }
    }
    if let Some(u) = rn.u_max {
        if !(u >= 0.0 && u.is_finite()) {
            return Err(semantic(path, "numerics.u_max", "must be finite and >= 0"));
        }
    }
    let dtau = rn.time_step * unit;
    if problem.final_time > 0.0 {
        build_lattice(dtau, problem.length, problem.final_time)
            .map_err(|e| semantic(path, "numerics.time_step", e.to_string()))?;
    }
    let snapshot_times: Vec<f64> = rn
        .snapshot_times
        .iter()
        .map(|t| (t * unit).min(problem.final_time))
        .collect();
    let numerics = Numerics {
        dtau,
        n: rn.n,
        seed: rn.seed,
        member: 0,
        snapshot_times: snapshot_times.clone(),
        record_every: rn.record_every,
        u_max: rn.u_max,
        strict: rn.strict,
        coupling: rn.sigma_coupling,
    };

    let rr = raw.reference;
    if rr.elements < 2 {
        return Err(semantic(path, "reference.elements", "must be >= 2"));
    }
    let ref_dt = rr.time_step.unwrap_or(rn.time_step / 10.0);
    if !(ref_dt > 0.0 && ref_dt.is_finite()) {
        return Err(semantic(path, "reference.time_step", "must be finite and > 0"));
    }
    if rr.record_every == 0 {
        return Err(semantic(path, "reference.record_every", "must be >= 1"));
    }
    let reference = ReferenceMesh {
        elements: rr.elements,
        dt: ref_dt * unit,
        snapshot_times,
        record_every: rr.record_every,
    };

    if !(1..=17).contains(&raw.output.precision) {
        return Err(semantic(path, "output.precision", "must lie in 1..=17"));
    }
    let output = OutputSettings {
        dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
        precision: raw.output.precision,
    };

    Ok(RunConfig {
        path: path.to_path_buf(),
        source: source.to_string(),
        problem,
        physical,
        left: raw.left,
        numerics,
        reference,
        output,
    })
}

fn left_checks(path: &Path, left: &LeftBoundary) -> Result<(), ConfigError> {
    left.validate()
        .map_err(|e| semantic(path, "left.u_d", e.to_string()))
}

/// Command-line overrides shared by the run commands.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict: bool,
    /// Ensemble size; members use streams `0..seeds` of the base seed.
    pub seeds: Option<u64>,
    /// Also write `timing.csv`.
    pub timing: bool,
}

impl RunOptions {
    fn apply(&self, cfg: &RunConfig) -> RunConfig {
        let mut cfg = cfg.clone();
        if let Some(s) = self.seed {
            cfg.numerics.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        cfg.numerics.strict |= self.strict;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub final_tau: f64,
    pub final_front: f64,
    pub violators: u64,
    pub members: usize,
    pub wall_time: f64,
}

struct Header<'a> {
    config_hash: &'a str,
    problem_hash: &'a str,
    seed: Option<u64>,
    solver: SolverKind,
    members: usize,
}

impl Header<'_> {
    fn render(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!(
            "# rwfront {VERSION}\n# config_hash {}\n# problem_hash {}\n# seed {seed}\n# solver {}\n# members {}\n",
            self.config_hash,
            self.problem_hash,
            self.solver.as_str(),
            self.members
        )
    }
}

fn fmt_num(x: f64, precision: usize) -> String {
    format!("{:.*e}", precision - 1, x)
}

fn create(path: &Path) -> Result<fs::File, Error> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn write_csv(
    path: &Path,
    header: &str,
    extra: &[(&str, String)],
    columns: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
    precision: usize,
) -> Result<(), Error> {
    let mut file = create(path)?;
    let mut head = header.to_string();
    for (k, v) in extra {
        head.push_str(&format!("# {k} {v}\n"));
    }
    file.write_all(head.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io_err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(columns).map_err(io_err)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_num(x, precision)))
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Shortest scientific form at 12 significant digits, e.g. `1.55e-3`.
fn short_num(x: f64) -> String {
    let s = format!("{x:.11e}");
    let (mantissa, exp) = s.split_once('e').expect("scientific format");
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    format!("{mantissa}e{exp}")
}

fn profile_name(requested: f64) -> String {
    format!("profile_{}.csv", short_num(requested))
}

fn diagnostics_rows(d: &Diagnostics) -> Vec<(String, String)> {
    let mut rows = vec![
        ("pb_evaluations".into(), d.pb.evaluations.to_string()),
        ("pb_min".into(), format!("{:e}", d.pb.min)),
        ("pb_max".into(), format!("{:e}", d.pb.max)),
        ("front_arrivals".into(), d.front_arrivals.to_string()),
        ("adsorbed_count".into(), d.adsorbed.to_string()),
        ("violator_count".into(), d.violators.to_string()),
        ("max_increment".into(), format!("{:e}", d.max_increment)),
        ("realized_u_max".into(), format!("{:e}", d.realized_u_max)),
        (
            "realized_condition_ok".into(),
            d.realized_condition_ok.to_string(),
        ),
        ("injected_left".into(), d.injected_left.to_string()),
        ("absorbed_left".into(), d.absorbed_left.to_string()),
        ("steps".into(), d.steps.to_string()),
        ("reached_end".into(), d.reached_end.to_string()),
    ];
    let labels = std::iter::once("pb_hist_negative".to_string())
        .chain((0..10).map(|b| format!("pb_hist_{:.1}_{:.1}", b as f64 / 10.0, (b + 1) as f64 / 10.0)))
        .chain(std::iter::once("pb_hist_ge_1".to_string()));
    for (label, count) in labels.zip(d.pb.histogram) {
        rows.push((label, count.to_string()));
    }
    rows
}

/// Write the file set of one trace into `dir`.
fn write_trace(
    dir: &Path,
    cfg: &RunConfig,
    trace: &SolutionTrace,
    members: usize,
    timing: bool,
) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_hash = cfg.config_hash();
    let header = Header {
        config_hash: &config_hash,
        problem_hash: &trace.problem_hash,
        seed: trace.seed.or(if trace.solver == SolverKind::RandomWalk {
            Some(cfg.numerics.seed)
        } else {
            None
        }),
        solver: trace.solver,
        members,
    }
    .render();
    let p = cfg.output.precision;
    let dim = match &cfg.physical {
        Some(phys) => Some(redimensionalize(trace, phys)?),
        None => None,
    };

    let (front_cols, mass_cols, prof_cols, left_cols): (&[&str], &[&str], &[&str], &[&str]) =
        if dim.is_some() {
            (
                &["tau", "h", "t", "s"],
                &["tau", "mass", "t", "mass_dimensional"],
                &["z", "u", "x", "m"],
                &["tau", "u", "t", "m"],
            )
        } else {
            (&["tau", "h"], &["tau", "mass"], &["z", "u"], &["tau", "u"])
        };
    let series = |a: &[f64], b: &[f64], da: Option<&[f64]>, db: Option<&[f64]>| {
        (0..a.len())
            .map(|i| {
                let mut row = vec![a[i], b[i]];
                if let (Some(x), Some(y)) = (da, db) {
                    row.push(x[i]);
                    row.push(y[i]);
                }
                row
            })
            .collect::<Vec<_>>()
    };

    write_csv(
        &dir.join("front.csv"),
        &header,
        &[],
        front_cols,
        series(
            &trace.tau,
            &trace.front,
            dim.as_ref().map(|d| d.tau.as_slice()),
            dim.as_ref().map(|d| d.front.as_slice()),
        )
        .into_iter(),
        p,
    )?;
    write_csv(
        &dir.join("mass.csv"),
        &header,
        &[],
        mass_cols,
        series(
            &trace.tau,
            &trace.mass,
            dim.as_ref().map(|d| d.tau.as_slice()),
            dim.as_ref().map(|d| d.mass.as_slice()),
        )
        .into_iter(),
        p,
    )?;
    if matches!(cfg.left, LeftBoundary::Robin) {
        write_csv(
            &dir.join("left_boundary.csv"),
            &header,
            &[],
            left_cols,
            series(
                &trace.tau,
                &trace.left,
                dim.as_ref().map(|d| d.tau.as_slice()),
                dim.as_ref().map(|d| d.left.as_slice()),
            )
            .into_iter(),
            p,
        )?;
    }
    for (i, snap) in trace.snapshots.iter().enumerate() {
        let dsnap = dim.as_ref().map(|d| &d.snapshots[i]);
        write_csv(
            &dir.join(profile_name(snap.requested)),
            &header,
            &[
                ("requested", fmt_num(snap.requested, p)),
                ("tau", fmt_num(snap.tau, p)),
                ("h", fmt_num(snap.h, p)),
            ],
            prof_cols,
            series(
                &snap.z,
                &snap.u,
                dsnap.map(|d| d.z.as_slice()),
                dsnap.map(|d| d.u.as_slice()),
            )
            .into_iter(),
            p,
        )?;
    }

    let diag_path = dir.join("diagnostics.csv");
    let mut f = create(&diag_path)?;
    let mut body = header.clone();
    body.push_str("quantity,value\n");
    for (k, v) in diagnostics_rows(&trace.diagnostics) {
        body.push_str(&format!("{k},{v}\n"));
    }
    f.write_all(body.as_bytes())
        .map_err(|e| Error::io(&diag_path, e))?;

    let meta_path = dir.join("meta.txt");
    let mut meta = header.clone();
    meta.push_str(&format!(
        "# final_time {}\n# dimensional_output {}\n\n[problem]\n{}\n[config]\n{}",
        fmt_num(trace.final_time, p),
        dim.is_some(),
        trace.config_echo,
        cfg.source
    ));
    create(&meta_path)?
        .write_all(meta.as_bytes())
        .map_err(|e| Error::io(&meta_path, e))?;

    if timing {
        let path = dir.join("timing.csv");
        create(&path)?
            .write_all(format!("wall_time_seconds\n{}\n", trace.wall_time).as_bytes())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Run one random walk, or an ensemble with `--seeds N`.
///
/// Ensembles write every member into `member_<i>/` and the ensemble mean
/// at the top level, plus `ensemble.csv` with the spread of the front.
pub fn cmd_run_rwm(config: &RunConfig, opts: &RunOptions) -> Result<RunSummary, Error> {
    let cfg = opts.apply(config);
    let dir = cfg.output.dir.clone();
    let members = opts.seeds.unwrap_or(1).max(1);
    let started = Instant::now();
    if members == 1 && opts.seeds.is_none() {
        let trace = rwm::run(&cfg.problem, &cfg.numerics, &cfg.left)?;
        eprintln!("random walk finished in {:.3} s", trace.wall_time);
        write_trace(&dir, &cfg, &trace, 1, opts.timing)?;
        return Ok(RunSummary {
            out_dir: dir,
            final_tau: trace.final_tau(),
            final_front: trace.final_front(),
            violators: trace.diagnostics.violators,
            members: 1,
            wall_time: trace.wall_time,
        });
    }

    let mut traces = Vec::with_capacity(members as usize);
    for m in 0..members {
        let numerics = Numerics {
            member: m,
            ..cfg.numerics.clone()
        };
        let trace = rwm::run(&cfg.problem, &numerics, &cfg.left)?;
        write_trace(&dir.join(format!("member_{m:03}")), &cfg, &trace, 1, opts.timing)?;
        traces.push(trace);
    }
    let stats = ensemble_stats(&traces)?;
    let mean = stats.mean_trace(&traces[0], &traces);
    let mean = SolutionTrace {
        seed: Some(cfg.numerics.seed),
        ..mean
    };
    write_trace(&dir, &cfg, &mean, members as usize, opts.timing)?;
    let config_hash = cfg.config_hash();
    let header = Header {
        config_hash: &config_hash,
        problem_hash: &mean.problem_hash,
        seed: Some(cfg.numerics.seed),
        solver: SolverKind::RandomWalk,
        members: members as usize,
    }
    .render();
    write_csv(
        &dir.join("ensemble.csv"),
        &header,
        &[],
        &["tau", "mean_h", "std_h", "mean_mass"],
        (0..stats.tau.len())
            .map(|i| vec![stats.tau[i], stats.mean_front[i], stats.std_front[i], stats.mean_mass[i]]),
        cfg.output.precision,
    )?;
    let wall = started.elapsed().as_secs_f64();
    eprintln!("{members} random walks finished in {wall:.3} s");
    Ok(RunSummary {
        out_dir: dir,
        final_tau: mean.final_tau(),
        final_front: mean.final_front(),
        violators: mean.diagnostics.violators,
        members: members as usize,
        wall_time: wall,
    })
}

pub fn cmd_run_ref(config: &RunConfig, opts: &RunOptions) -> Result<RunSummary, Error> {
    let cfg = opts.apply(config);
    let tp = transform_problem(&cfg.problem, &cfg.left);
    let trace = solve_reference(&tp, &cfg.reference)?;
    eprintln!("reference solver finished in {:.3} s", trace.wall_time);
    write_trace(&cfg.output.dir, &cfg, &trace, 1, opts.timing)?;
    Ok(RunSummary {
        out_dir: cfg.output.dir.clone(),
        final_tau: trace.final_tau(),
        final_front: trace.final_front(),
        violators: 0,
        members: 1,
        wall_time: trace.wall_time,
    })
}

/// Parsed output CSV: `# key value` metadata plus numeric columns.
#[derive(Clone, Debug, Default)]
pub struct CsvTable {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut table = CsvTable::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let mut parts = line[1..].trim().splitn(2, ' ');
        if let (Some(k), Some(v)) = (parts.next(), parts.next()) {
            table.meta.insert(k.to_string(), v.trim().to_string());
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    table.columns = reader
        .headers()
        .map_err(|e| format_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    for record in reader.records() {
        let record = record.map_err(|e| format_err(e.to_string()))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| format_err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        table.rows.push(row);
    }
    Ok(table)
}

fn required(table: &CsvTable, name: &str, path: &Path) -> Result<Vec<f64>, Error> {
    table.column(name).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: format!("missing column `{name}`"),
    })
}

/// Rebuild the dimensionless trace stored in a run directory.
pub fn read_trace(dir: &Path) -> Result<SolutionTrace, Error> {
    let front_path = dir.join("front.csv");
    let front = read_csv(&front_path)?;
    let mass_path = dir.join("mass.csv");
    let mass = read_csv(&mass_path)?;
    let tau = required(&front, "tau", &front_path)?;
    let left_path = dir.join("left_boundary.csv");
    let left = if left_path.exists() {
        required(&read_csv(&left_path)?, "u", &left_path)?
    } else {
        vec![0.0; tau.len()]
    };

    let mut snapshots = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("profile_") && n.ends_with(".csv"))
        })
        .collect();
    entries.sort();
    for path in entries {
        let t = read_csv(&path)?;
        let meta = |key: &str| -> Result<f64, Error> {
            t.meta
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format {
                    path: path.clone(),
                    message: format!("missing `# {key}` header"),
                })
        };
        snapshots.push(Snapshot {
            requested: meta("requested")?,
            tau: meta("tau")?,
            h: meta("h")?,
            z: required(&t, "z", &path)?,
            u: required(&t, "u", &path)?,
        });
    }
    snapshots.sort_by(|a, b| a.tau.total_cmp(&b.tau));

    let solver = match front.meta.get("solver").map(String::as_str) {
        Some("random_walk") => SolverKind::RandomWalk,
        Some("reference") => SolverKind::Reference,
        other => {
            return Err(Error::Format {
                path: front_path,
                message: format!("unknown solver {other:?}"),
            })
        }
    };
    let final_time = fs::read_to_string(dir.join("meta.txt"))
        .ok()
        .and_then(|m| {
            m.lines()
                .find_map(|l| l.strip_prefix("# final_time "))
                .and_then(|v| v.trim().parse().ok())
        })
        .unwrap_or_else(|| tau.last().copied().unwrap_or(0.0));
    Ok(SolutionTrace {
        solver,
        front: required(&front, "h", &front_path)?,
        mass: required(&mass, "mass", &mass_path)?,
        left,
        snapshots,
        diagnostics: Diagnostics::default(),
        wall_time: 0.0,
        final_time,
        seed: front.meta.get("seed").and_then(|s| s.parse().ok()),
        problem_hash: front.meta.get("problem_hash").cloned().unwrap_or_default(),
        config_echo: String::new(),
        scales: None,
        dimensional: false,
        tau,
    })
}

/// One thresholded comparison line.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {:.6e} (tolerance {})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareOutcome {
    pub report: ErrorReport,
    pub verdicts: Vec<Verdict>,
}

impl CompareOutcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }
}

/// Compare two run directories and write `errors.csv` into `out`.
///
/// Metadata mismatches surface as [`ObservableError::Incompatible`].
pub fn cmd_compare(
    config: &RunConfig,
    rwm_dir: &Path,
    ref_dir: &Path,
    out: Option<&Path>,
) -> Result<CompareOutcome, Error> {
    let a = read_trace(rwm_dir)?;
    let b = read_trace(ref_dir)?;
    let expected = rwm::problem_hash(&config.problem, &config.left);
    for (dir, t) in [(rwm_dir, &a), (ref_dir, &b)] {
        if t.problem_hash != expected {
            return Err(ObservableError::Incompatible(format!(
                "{} was produced for a different problem than {}",
                dir.display(),
                config.path.display()
            ))
            .into());
        }
    }
    let times: Vec<f64> = a
        .snapshots
        .iter()
        .map(|s| s.requested)
        .filter(|t| b.snapshots.iter().any(|s| s.requested == *t))
        .collect();
    let report = compare(&a, &b, &times)?;

    let mut verdicts = vec![Verdict {
        name: "front_rel_error_at_T".into(),
        value: report.front_rel_error_at_t,
        tolerance: FRONT_TOLERANCE,
    }];
    for p in &report.profiles {
        verdicts.push(Verdict {
            name: format!("profile_linf_rel_at_{}", short_num(p.tau)),
            value: if p.reference_max > 0.0 {
                p.linf / p.reference_max
            } else {
                p.linf
            },
            tolerance: PROFILE_TOLERANCE,
        });
    }
    verdicts.push(Verdict {
        name: "mass_rel_error_at_T".into(),
        value: report.mass_rel_error_at_t,
        tolerance: MASS_TOLERANCE,
    });
    if matches!(config.left, LeftBoundary::Robin) {
        verdicts.push(Verdict {
            name: "left_rel_error_mean".into(),
            value: report.left_rel_error_mean,
            tolerance: LEFT_TOLERANCE,
        });
    }

    let out_dir = out.unwrap_or(rwm_dir);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join("errors.csv");
    let p = config.output.precision;
    let mut body = format!(
        "# rwfront {VERSION}\n# config_hash {}\n# problem_hash {}\n# rwm_dir {}\n# ref_dir {}\nmetric,value,tolerance,verdict\n",
        config.config_hash(),
        expected,
        rwm_dir.display(),
        ref_dir.display()
    );
    for v in &verdicts {
        body.push_str(&format!(
            "{},{},{},{}\n",
            v.name,
            fmt_num(v.value, p),
            v.tolerance,
            if v.passed() { "PASS" } else { "FAIL" }
        ));
    }
    for pe in &report.profiles {
        body.push_str(&format!(
            "profile_l2_at_{},{},,\n",
            short_num(pe.tau),
            fmt_num(pe.l2, p)
        ));
    }
    create(&path)?
        .write_all(body.as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    Ok(CompareOutcome { report, verdicts })
}

/// Least-squares line `y = slope·x + intercept` and its R².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: u64,
    pub dtau: f64,
    pub median_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Fit of wall time against `n`, one per time step with ≥ 2 values of `n`.
    pub fits: Vec<(f64, LinearFit)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Time the random walk over a grid of walker counts and time steps.
///
/// Time steps are in the problem's own units, like the config file.
pub fn cmd_bench(
    config: &RunConfig,
    n_list: &[u64],
    dtau_list: &[f64],
    repeats: usize,
    out: Option<&Path>,
) -> Result<BenchReport, Error> {
    if n_list.is_empty() || dtau_list.is_empty() || repeats == 0 {
        return Err(SolverError::Numerics(
            "bench needs at least one n, one time step and one repeat".into(),
        )
        .into());
    }
    let unit = config.time_unit();
    let mut rows = Vec::new();
    for &dt in dtau_list {
        for &n in n_list {
            let numerics = Numerics {
                dtau: dt * unit,
                n,
                snapshot_times: Vec::new(),
                record_every: usize::MAX,
                ..config.numerics.clone()
            };
            let mut times = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let t = rwm::run(&config.problem, &numerics, &config.left)?;
                times.push(t.wall_time);
            }
            let median_seconds = median(times);
            eprintln!("n = {n}, time step = {dt:e}: {median_seconds:.4} s");
            rows.push(BenchRow {
                n,
                dtau: dt,
                median_seconds,
            });
        }
    }
    let fits = dtau_list
        .iter()
        .filter_map(|&dt| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.dtau == dt)
                .map(|r| (r.n as f64, r.median_seconds))
                .unzip();
            linear_fit(&xs, &ys).map(|f| (dt, f))
        })
        .collect();
    let report = BenchReport { rows, fits };

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut body = format!(
            "# rwfront {VERSION}\n# config_hash {}\n# repeats {repeats}\nn,time_step,median_seconds\n",
            config.config_hash()
        );
        for r in &report.rows {
            body.push_str(&format!("{},{:e},{:e}\n", r.n, r.dtau, r.median_seconds));
        }
        let path = dir.join("bench.csv");
        create(&path)?
            .write_all(body.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        let mut body = "time_step,slope_seconds_per_walker,intercept_seconds,r_squared\n".to_string();
        for (dt, f) in &report.fits {
            body.push_str(&format!("{dt:e},{:e},{:e},{}\n", f.slope, f.intercept, f.r_squared));
        }
        let path = dir.join("bench_fit.csv");
        create(&path)?
            .write_all(body.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

/// Check the time-step condition for the configured run.
///
/// Returns the report; under `strict` a failing report is an error.
pub fn cmd_validate(config: &RunConfig, strict: bool) -> Result<TimestepReport, Error> {
    let numerics = &config.numerics;
    let u_max = match numerics.u_max {
        Some(u) => u,
        None => {
            let lattice = build_lattice(
                numerics.dtau,
                config.problem.length,
                config.problem.final_time.max(numerics.dtau),
            )?;
            let field = init_walkers(&config.problem.u0, numerics.n, &lattice, config.problem.h0)?;
            estimate_u_max(&config.problem, &config.left, &field)
        }
    };
    let report = validate_timestep(numerics.n, config.problem.a0, u_max, numerics.dtau);
    if strict && !report.ok() {
        return Err(SolverError::StrictTimestep(report.to_string()).into());
    }
    Ok(report)
}
