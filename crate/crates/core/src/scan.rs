//! Declarative parameter sweeps.
//!
//! A [`ScanSpec`] describes a grid of drives (direction × frequency ×
//! amplitude, amplitude fastest) and a set of initial conditions. Every work
//! item draws its randomness from a stream derived from the point's drive
//! values and the IC index only, so results do not depend on thread count,
//! chunking or which subset of the grid is run. Completed items are appended to a
//! partial-results file and skipped when the same scan is restarted.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{haar_entropy, CoverageResult, Histogram, HistogramSpec};
use crate::dynamics::{energy_static, Integrator, DEFAULT_DT};
use crate::ensemble::{make_ensemble, randomization_run, RandomizationConfig};
use crate::error::{Error, Result};
use crate::haar::{mix64, sample_haar, stream_id, RngSeed};
use crate::lyapunov::{benettin_batch, LleConfig, LleResult};
use crate::output::{num, opt_num, sha256_hex, write_csv, write_json, Header};
use crate::params::{presets as ic_presets, Direction, DriveSpec, Hamiltonian, SystemParams};
use crate::spin::{PhasePoint, SpinorState};

const DOMAIN_HAAR_IC: u64 = 1;
const DOMAIN_LLE: u64 = 2;
const DOMAIN_ENSEMBLE: u64 = 3;
const DOMAIN_HAAR_REF: u64 = 4;

/// Initial conditions of one chunked LLE task.
const IC_CHUNK: usize = 16;
/// Fraction of failed work items above which a scan is reported as failed.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Rough cost of one member step, used for the up-front estimate.
const NS_PER_MEMBER_STEP: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum IcSource {
    /// `count` Haar-random states; IC `i` is the same at every grid point.
    Haar { count: usize },
    /// Named states (`xR`, `xC`, `polar`) or `rho0,m,theta_s,theta_m` with
    /// angles in units of π.
    Points { points: Vec<String> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Diagnostics {
    pub lle: bool,
    pub coverage: bool,
    pub randomization: bool,
    /// Magnetization and per-iteration LLE traces per trajectory.
    pub traces: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    pub name: String,
    pub system: SystemParams,
    /// `ħD/ε_s` values.
    pub amplitudes: Vec<f64>,
    pub frequencies_hz: Vec<f64>,
    pub directions: Vec<Direction>,
    pub ics: IcSource,
    pub diagnostics: Diagnostics,
    pub lle: LleConfig,
    pub histogram: HistogramSpec,
    pub randomization: RandomizationConfig,
    pub dt: f64,
    pub seed: u64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            system: SystemParams::default(),
            amplitudes: vec![0.0],
            frequencies_hz: vec![60.0],
            directions: vec![Direction::Z],
            ics: IcSource::Haar { count: 200 },
            diagnostics: Diagnostics { lle: true, ..Default::default() },
            lle: LleConfig::default(),
            histogram: HistogramSpec::default(),
            randomization: RandomizationConfig::default(),
            dt: DEFAULT_DT,
            seed: 20240601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub index: usize,
    pub drive: DriveSpec,
}

impl ScanPoint {
    /// Hash of the drive parameters.
    pub fn key(&self) -> u64 {
        let d = &self.drive;
        let v = d.direction.vector();
        [d.amplitude_hbar_d_over_eps, d.freq_hz, v[0], v[1], v[2]]
            .iter()
            .fold(0u64, |h, x| mix64(h ^ x.to_bits()))
    }
}

/// `n` points from `a` to `b` inclusive, evenly spaced in `log10`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.log10(), b.log10());
    (0..n).map(|i| 10f64.powf(la + (lb - la) * i as f64 / (n.max(2) - 1) as f64)).collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n.max(2) - 1) as f64).collect()
}

/// Parses an initial-condition token.
pub fn parse_point(token: &str) -> Result<SpinorState> {
    if let Some(s) = ic_presets::by_name(token.trim()) {
        return Ok(s);
    }
    let v: Vec<f64> = token
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("bad initial condition '{token}': use xR, xC, polar or rho0,m,ts/pi,tm/pi")))?;
    let [rho0, m, ts, tm]: [f64; 4] = v
        .try_into()
        .map_err(|_| Error::Parse(format!("initial condition '{token}' needs four numbers")))?;
    let p = PhasePoint::new(rho0, m, ts * std::f64::consts::PI, tm * std::f64::consts::PI);
    if !p.is_physical() {
        return Err(Error::InvalidConfig(format!("initial condition '{token}' violates |m| <= 1 - rho0")));
    }
    Ok(p.to_spinor())
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        Integrator::new(self.dt)?;
        self.lle.validate()?;
        if self.amplitudes.is_empty() || self.frequencies_hz.is_empty() || self.directions.is_empty() {
            return Err(Error::InvalidConfig("scan grid has an empty axis".into()));
        }
        for p in self.points() {
            p.drive.validate()?;
        }
        match &self.ics {
            IcSource::Haar { count: 0 } => return Err(Error::InvalidConfig("no initial conditions".into())),
            IcSource::Points { points } if points.is_empty() => {
                return Err(Error::InvalidConfig("no initial conditions".into()))
            }
            IcSource::Points { points } => {
                for p in points {
                    parse_point(p)?;
                }
            }
            _ => {}
        }
        let d = &self.diagnostics;
        if !(d.lle || d.coverage || d.randomization || d.traces) {
            return Err(Error::InvalidConfig("scan requests no diagnostics".into()));
        }
        if d.coverage || d.traces {
            self.histogram.validate()?;
        }
        if d.randomization {
            self.randomization.validate()?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<ScanPoint> {
        let mut out = Vec::new();
        for &direction in &self.directions {
            for &freq_hz in &self.frequencies_hz {
                for &a in &self.amplitudes {
                    out.push(ScanPoint {
                        index: out.len(),
                        drive: DriveSpec { amplitude_hbar_d_over_eps: a, freq_hz, direction },
                    });
                }
            }
        }
        out
    }

    /// Labels and states of the initial conditions.
    pub fn initial_conditions(&self) -> Result<Vec<(String, SpinorState)>> {
        match &self.ics {
            IcSource::Haar { count } => Ok((0..*count)
                .map(|i| {
                    let mut rng = RngSeed::new(self.seed, stream_id(DOMAIN_HAAR_IC, i as u64, 0)).rng();
                    (format!("haar{i}"), sample_haar(&mut rng))
                })
                .collect()),
            IcSource::Points { points } => {
                points.iter().map(|p| Ok((p.clone(), parse_point(p)?))).collect()
            }
        }
    }

    /// Keyed by the point's drive values rather than its grid position, so a
    /// point run on its own or inside another grid draws the same stream.
    pub fn lle_seed(&self, point: &ScanPoint, ic: usize) -> RngSeed {
        RngSeed::new(self.seed, stream_id(DOMAIN_LLE, point.key(), ic as u64))
    }

    /// Ensemble seeds depend on the center only, so each center carries the
    /// same ensemble across the grid.
    pub fn ensemble_seed(&self, ic: usize) -> RngSeed {
        RngSeed::new(self.seed, stream_id(DOMAIN_ENSEMBLE, ic as u64, 0))
    }

    pub fn haar_reference_seed(&self) -> RngSeed {
        RngSeed::new(self.seed, stream_id(DOMAIN_HAAR_REF, 0, 0))
    }

    fn n_ics(&self) -> usize {
        match &self.ics {
            IcSource::Haar { count } => *count,
            IcSource::Points { points } => points.len(),
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }

    pub fn estimate(&self) -> CostEstimate {
        let points = self.points().len();
        let ics = self.n_ics();
        let d = &self.diagnostics;
        let mut member_steps = 0.0;
        let mut items = 0;
        if d.lle || d.coverage || d.traces {
            member_steps += (points * ics) as f64 * 2.0 * (self.lle.duration() / self.dt);
            items += points * ics;
        }
        if d.randomization {
            let r = &self.randomization;
            member_steps += (points * ics * r.n_ens) as f64 * r.t_final_tau * self.system.tau_s() / self.dt;
            items += points * ics;
        }
        CostEstimate { points, work_items: items, member_steps, seconds: member_steps * NS_PER_MEMBER_STEP * 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub points: usize,
    pub work_items: usize,
    pub member_steps: f64,
    /// Single-thread estimate.
    pub seconds: f64,
}

/// One trajectory's Lyapunov (and optionally coverage) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LleRow {
    pub point: usize,
    pub ic: usize,
    pub label: String,
    pub hbar_d_over_eps: f64,
    pub freq_hz: f64,
    pub direction: String,
    pub initial: PhasePoint,
    pub e_over_eps: f64,
    pub lambda: f64,
    pub stderr: f64,
    pub retries: u32,
    pub coverage: Option<CoverageResult>,
    pub degenerate_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandRow {
    pub point: usize,
    pub ic: usize,
    pub center: String,
    pub hbar_d_over_eps: f64,
    pub freq_hz: f64,
    pub direction: String,
    pub n_ens: usize,
    pub d_i: f64,
    pub floor: f64,
    pub r: f64,
    pub tau_r_over_tau_s: Option<f64>,
    pub seed: RngSeed,
    pub t_over_tau_s: Vec<f64>,
    pub delta2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub diagnostic: String,
    pub point: usize,
    pub ic: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
enum Record {
    Lle(LleRow),
    Rand(RandRow),
    Fail(Failure),
}

impl Record {
    fn key(&self) -> (&'static str, usize, usize) {
        match self {
            Record::Lle(r) => ("lle", r.point, r.ic),
            Record::Rand(r) => ("randomization", r.point, r.ic),
            Record::Fail(f) => (if f.diagnostic == "randomization" { "randomization" } else { "lle" }, f.point, f.ic),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanOptions {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Reuse results from an interrupted run of the same spec.
    pub resume: bool,
    pub progress: bool,
    /// Run at most this many work chunks, then stop with the partial results
    /// kept on disk for a later `resume`.
    pub max_tasks: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct ScanReport {
    pub lle: Vec<LleRow>,
    pub randomization: Vec<RandRow>,
    pub failures: Vec<Failure>,
    pub resumed: usize,
    pub computed: usize,
    pub wall_seconds: f64,
    pub files: Vec<PathBuf>,
    /// Stopped early by `max_tasks`; no output files were written.
    pub incomplete: bool,
}

impl ScanReport {
    pub fn total_items(&self) -> usize {
        self.lle.len() + self.randomization.len() + self.failures.len()
    }

    /// Rows at one grid point, in IC order.
    pub fn lle_at(&self, point: usize) -> impl Iterator<Item = &LleRow> {
        self.lle.iter().filter(move |r| r.point == point)
    }

    pub fn rand_at(&self, point: usize) -> impl Iterator<Item = &RandRow> {
        self.randomization.iter().filter(move |r| r.point == point)
    }
}

enum Task {
    Lle { point: ScanPoint, ics: Vec<usize> },
    Rand { point: ScanPoint, ic: usize },
}

struct PartialLog {
    file: Option<Mutex<File>>,
}

impl PartialLog {
    fn append(&self, records: &[Record]) -> Result<()> {
        let Some(f) = &self.file else { return Ok(()) };
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r).map_err(|e| Error::Parse(e.to_string()))?);
            text.push('\n');
        }
        let mut f = f.lock().expect("partial log lock");
        f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| Error::io("partial results", e))
    }
}

fn load_partial(path: &Path) -> Vec<Record> {
    let Ok(file) = File::open(path) else { return Vec::new() };
    // a torn last line from an interrupted write is skipped
    BufReader::new(file).lines().map_while(|l| l.ok()).filter_map(|l| serde_json::from_str(&l).ok()).collect()
}

/// Runs a scan. Outputs are written when `opts.out_dir` is set; the report
/// is returned either way. Individual failures are recorded; the call
/// returns [`Error::ScanFailed`] when more than 1% of work items fail.
pub fn run_scan(spec: &ScanSpec, opts: &ScanOptions) -> Result<ScanReport> {
    spec.validate()?;
    let start = Instant::now();
    let integ = Integrator::new(spec.dt)?;
    let ics = spec.initial_conditions()?;
    let points = spec.points();
    let d = spec.diagnostics;

    let partial_path = opts.out_dir.as_ref().map(|o| o.join(format!(".partial-{}.jsonl", &spec.hash()[..16])));
    let mut done: HashMap<(&'static str, usize, usize), Record> = HashMap::new();
    if let (true, Some(p)) = (opts.resume, &partial_path) {
        for r in load_partial(p) {
            done.insert(r.key(), r);
        }
    }
    let log = match &partial_path {
        Some(p) => {
            std::fs::create_dir_all(p.parent().expect("partial file has a parent"))
                .map_err(|e| Error::io(p.parent().unwrap(), e))?;
            if !opts.resume {
                let _ = std::fs::remove_file(p);
            }
            let f = OpenOptions::new().create(true).append(true).open(p).map_err(|e| Error::io(p, e))?;
            PartialLog { file: Some(Mutex::new(f)) }
        }
        None => PartialLog { file: None },
    };

    let mut tasks = Vec::new();
    let resumed = done.len();
    for p in &points {
        if d.lle || d.coverage || d.traces {
            let todo: Vec<usize> = (0..ics.len()).filter(|&i| !done.contains_key(&("lle", p.index, i))).collect();
            for chunk in todo.chunks(IC_CHUNK) {
                tasks.push(Task::Lle { point: *p, ics: chunk.to_vec() });
            }
        }
        if d.randomization {
            for i in 0..ics.len() {
                if !done.contains_key(&("randomization", p.index, i)) {
                    tasks.push(Task::Rand { point: *p, ic: i });
                }
            }
        }
    }

    let incomplete = opts.max_tasks.is_some_and(|m| m < tasks.len());
    if let Some(m) = opts.max_tasks {
        tasks.truncate(m);
    }

    let s_haar = if d.coverage { Some(haar_entropy(&spec.histogram, spec.haar_reference_seed())) } else { None };
    let counter = AtomicUsize::new(0);
    let n_tasks = tasks.len();
    let run_task = |task: &Task| -> Result<Vec<Record>> {
        let recs = match task {
            Task::Lle { point, ics: which } => lle_task(spec, integ, *point, which, &ics, s_haar, opts.out_dir.as_deref())?,
            Task::Rand { point, ic } => vec![rand_task(spec, integ, *point, *ic, &ics[*ic])],
        };
        log.append(&recs)?;
        let k = counter.fetch_add(1, Ordering::Relaxed) + 1;
        if opts.progress {
            eprintln!("[{}] {k}/{n_tasks} work chunks done", spec.name);
        }
        Ok(recs)
    };

    let results: Vec<Result<Vec<Record>>> = match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| tasks.par_iter().map(run_task).collect())
        }
        None => tasks.par_iter().map(run_task).collect(),
    };
    let computed = results.len();
    for r in results {
        for rec in r? {
            done.insert(rec.key(), rec);
        }
    }

    let mut report = ScanReport { resumed, computed, incomplete, ..Default::default() };
    let mut keys: Vec<_> = done.keys().copied().collect();
    keys.sort();
    for k in keys {
        match done.remove(&k).expect("key present") {
            Record::Lle(r) => report.lle.push(r),
            Record::Rand(r) => report.randomization.push(r),
            Record::Fail(f) => report.failures.push(f),
        }
    }
    report.lle.sort_by_key(|r| (r.point, r.ic));
    report.randomization.sort_by_key(|r| (r.point, r.ic));
    report.failures.sort_by(|a, b| (a.point, a.ic, &a.diagnostic).cmp(&(b.point, b.ic, &b.diagnostic)));
    report.wall_seconds = start.elapsed().as_secs_f64();

    if incomplete {
        return Ok(report);
    }
    if let Some(dir) = &opts.out_dir {
        write_outputs(spec, &report, dir, opts)?.into_iter().for_each(|f| report.files.push(f));
        if let Some(p) = &partial_path {
            let _ = std::fs::remove_file(p);
        }
    }
    let total = report.total_items();
    if total > 0 && report.failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::ScanFailed { failed: report.failures.len(), total });
    }
    Ok(report)
}

fn lle_task(
    spec: &ScanSpec,
    integ: Integrator,
    point: ScanPoint,
    which: &[usize],
    ics: &[(String, SpinorState)],
    s_haar: Option<f64>,
    out_dir: Option<&Path>,
) -> Result<Vec<Record>> {
    let d = spec.diagnostics;
    let ham = Hamiltonian::new(&spec.system, &point.drive);
    let initials: Vec<SpinorState> = which.iter().map(|&i| ics[i].1).collect();
    let seeds: Vec<RngSeed> = which.iter().map(|&i| spec.lle_seed(&point, i)).collect();
    let hspec = spec.histogram;
    let sampling = d.coverage || d.traces;
    let mut hists: Vec<Histogram> =
        if d.coverage { which.iter().map(|_| Histogram::new(hspec)).collect() } else { Vec::new() };
    let mut traces: Vec<Vec<f64>> = if d.traces {
        initials.iter().map(|s| vec![s.magnetization()]).collect()
    } else {
        Vec::new()
    };
    let mut observe = |ic: usize, k: usize, s: &SpinorState| {
        if d.coverage && k <= hspec.samples {
            hists[ic].add(s);
        }
        if d.traces {
            traces[ic].push(s.magnetization());
        }
    };
    let results = benettin_batch(
        &initials,
        &seeds,
        &ham,
        spec.system.tau_s(),
        integ,
        &spec.lle,
        sampling.then(|| hspec.sample_period()),
        &mut observe,
    )?;

    let mut out = Vec::with_capacity(which.len());
    for (j, (&i, res)) in which.iter().zip(results).enumerate() {
        let res: Result<LleResult> = res.and_then(|r| {
            if d.coverage && hists[j].total() < hspec.samples as u64 {
                return Err(Error::InsufficientSamples { needed: hspec.samples, available: hists[j].total() as usize });
            }
            Ok(r)
        });
        match res {
            Ok(r) => {
                if d.traces {
                    if let Some(dir) = out_dir {
                        write_traces(spec, dir, point, i, &ics[i].0, &traces[j], &r)?;
                    }
                }
                let coverage = s_haar.map(|sh| CoverageResult::from_entropies(hists[j].entropy(), sh));
                out.push(Record::Lle(LleRow {
                    point: point.index,
                    ic: i,
                    label: ics[i].0.clone(),
                    hbar_d_over_eps: point.drive.amplitude_hbar_d_over_eps,
                    freq_hz: point.drive.freq_hz,
                    direction: point.drive.direction.to_string(),
                    initial: ics[i].1.to_phase(),
                    e_over_eps: energy_static(&ics[i].1, &spec.system),
                    lambda: r.lambda,
                    stderr: r.stderr,
                    retries: r.retries,
                    coverage,
                    degenerate_samples: if d.coverage { hists[j].degenerate() } else { 0 },
                }))
            }
            Err(e) => out.push(Record::Fail(Failure {
                diagnostic: "lle".into(),
                point: point.index,
                ic: i,
                error: e.to_string(),
            })),
        }
    }
    Ok(out)
}

fn rand_task(spec: &ScanSpec, integ: Integrator, point: ScanPoint, ic: usize, center: &(String, SpinorState)) -> Record {
    let cfg = spec.randomization;
    let seed = spec.ensemble_seed(ic);
    let run = make_ensemble(&center.1, cfg.n_ens, cfg.d_i, seed)
        .and_then(|ens| randomization_run(&ens, &spec.system, &point.drive, integ, &cfg));
    match run {
        Ok(r) => {
            let tau = r.tau_s;
            Record::Rand(RandRow {
                point: point.index,
                ic,
                center: center.0.clone(),
                hbar_d_over_eps: point.drive.amplitude_hbar_d_over_eps,
                freq_hz: point.drive.freq_hz,
                direction: point.drive.direction.to_string(),
                n_ens: cfg.n_ens,
                d_i: cfg.d_i,
                floor: r.floor,
                r: r.r,
                tau_r_over_tau_s: r.tau_r_over_tau_s(),
                seed,
                t_over_tau_s: r.times.iter().map(|t| t / tau).collect(),
                delta2: r.delta2,
            })
        }
        Err(e) => Record::Fail(Failure { diagnostic: "randomization".into(), point: point.index, ic, error: e.to_string() }),
    }
}

fn spec_header(spec: &ScanSpec) -> Header {
    Header::tool()
        .with("preset", spec.name.clone())
        .with("seed", spec.seed.to_string())
        .with("spec_sha256", spec.hash())
        .with("spec", serde_json::to_string(spec).expect("spec serializes"))
}

fn write_traces(
    spec: &ScanSpec,
    dir: &Path,
    point: ScanPoint,
    ic: usize,
    label: &str,
    m: &[f64],
    r: &LleResult,
) -> Result<()> {
    let tdir = dir.join("traces");
    let ts = spec.histogram.sample_period() / spec.system.tau_s();
    let tr = spec.lle.reset_interval / spec.system.tau_s();
    let header = spec_header(spec)
        .with("point", point.index.to_string())
        .with("ic", format!("{ic} ({label})"))
        .with("hbar_d_over_eps", num(point.drive.amplitude_hbar_d_over_eps));
    write_csv(
        &tdir.join(format!("m_p{}_ic{}.csv", point.index, ic)),
        &header,
        &["t_over_tau_s", "m"],
        m.iter().enumerate().map(|(k, v)| vec![num(k as f64 * ts), num(*v)]),
    )?;
    write_csv(
        &tdir.join(format!("lle_p{}_ic{}.csv", point.index, ic)),
        &header,
        &["iteration", "t_over_tau_s", "lambda_n_tau_s", "cumulative_tau_s"],
        r.iterates.iter().zip(&r.cumulative).enumerate().map(|(n, (a, c))| {
            vec![(n + 1).to_string(), num((n + 1) as f64 * tr), num(*a), num(*c)]
        }),
    )
}

/// Column schema of `lle.csv`.
pub const LLE_COLUMNS: &[&str] = &[
    "point", "ic", "label", "hbar_d_over_eps", "freq_hz", "direction", "rho0", "m", "theta_s", "theta_m",
    "E_over_eps", "lambda_tau_s", "stderr_tau_s", "retries",
];
/// Column schema of `coverage.csv`.
pub const COVERAGE_COLUMNS: &[&str] = &[
    "id", "point", "ic", "hbar_d_over_eps", "freq_hz", "direction", "E_over_eps", "S", "S_haar", "deltaS", "V",
    "degenerate_samples",
];
/// Column schema of `randomization.csv`.
pub const RANDOMIZATION_COLUMNS: &[&str] = &[
    "point", "ic", "center", "hbar_d_over_eps", "freq_hz", "direction", "N_ens", "d_i", "floor", "R",
    "tau_r_over_tau_s", "seed", "stream",
];
/// Column schema of `delta2.csv`.
pub const DELTA2_COLUMNS: &[&str] = &["point", "ic", "center", "hbar_d_over_eps", "t_over_tau_s", "delta2"];

fn write_outputs(spec: &ScanSpec, report: &ScanReport, dir: &Path, opts: &ScanOptions) -> Result<Vec<PathBuf>> {
    let header = spec_header(spec);
    let mut files = Vec::new();
    let d = spec.diagnostics;
    if d.lle || d.traces || d.coverage {
        let p = dir.join("lle.csv");
        write_csv(
            &p,
            &header,
            LLE_COLUMNS,
            report.lle.iter().map(|r| {
                vec![
                    r.point.to_string(),
                    r.ic.to_string(),
                    r.label.clone(),
                    num(r.hbar_d_over_eps),
                    num(r.freq_hz),
                    r.direction.clone(),
                    num(r.initial.rho0),
                    num(r.initial.m),
                    num(r.initial.theta_s),
                    num(r.initial.theta_m),
                    num(r.e_over_eps),
                    num(r.lambda),
                    num(r.stderr),
                    r.retries.to_string(),
                ]
            }),
        )?;
        files.push(p);
    }
    if d.coverage {
        let p = dir.join("coverage.csv");
        write_csv(
            &p,
            &header,
            COVERAGE_COLUMNS,
            report.lle.iter().filter_map(|r| {
                let c = r.coverage?;
                Some(vec![
                    format!("p{}_ic{}", r.point, r.ic),
                    r.point.to_string(),
                    r.ic.to_string(),
                    num(r.hbar_d_over_eps),
                    num(r.freq_hz),
                    r.direction.clone(),
                    num(r.e_over_eps),
                    num(c.s),
                    num(c.s_haar),
                    num(c.delta_s),
                    num(c.v),
                    r.degenerate_samples.to_string(),
                ])
            }),
        )?;
        files.push(p);
    }
    if d.randomization {
        let p = dir.join("randomization.csv");
        write_csv(
            &p,
            &header,
            RANDOMIZATION_COLUMNS,
            report.randomization.iter().map(|r| {
                vec![
                    r.point.to_string(),
                    r.ic.to_string(),
                    r.center.clone(),
                    num(r.hbar_d_over_eps),
                    num(r.freq_hz),
                    r.direction.clone(),
                    r.n_ens.to_string(),
                    num(r.d_i),
                    num(r.floor),
                    num(r.r),
                    opt_num(r.tau_r_over_tau_s),
                    r.seed.seed.to_string(),
                    r.seed.stream.to_string(),
                ]
            }),
        )?;
        files.push(p);
        let p = dir.join("delta2.csv");
        write_csv(
            &p,
            &header,
            DELTA2_COLUMNS,
            report.randomization.iter().flat_map(|r| {
                r.t_over_tau_s.iter().zip(&r.delta2).map(move |(t, d2)| {
                    vec![r.point.to_string(), r.ic.to_string(), r.center.clone(), num(r.hbar_d_over_eps), num(*t), num(*d2)]
                })
            }),
        )?;
        files.push(p);
        let summaries: Vec<_> = report
            .randomization
            .iter()
            .map(|r| {
                serde_json::json!({
                    "point": r.point,
                    "center": r.center,
                    "hbar_d_over_eps": r.hbar_d_over_eps,
                    "omega_m_over_2pi_hz": r.freq_hz,
                    "direction": r.direction,
                    "N_ens": r.n_ens,
                    "d_i": r.d_i,
                    "floor": r.floor,
                    "R": r.r,
                    "tau_r_over_tau_s": r.tau_r_over_tau_s.map_or(serde_json::json!("inf"), |t| serde_json::json!(t)),
                    "seed": r.seed,
                })
            })
            .collect();
        let p = dir.join("randomization.json");
        write_json(&p, &summaries)?;
        files.push(p);
    }
    let manifest = serde_json::json!({
        "tool": "spinchaos",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "scan",
        "preset": spec.name,
        "spec": spec,
        "spec_sha256": spec.hash(),
        "seed": spec.seed,
        "threads": opts.threads.unwrap_or_else(rayon::current_num_threads),
        "estimate": spec.estimate(),
        "wall_seconds": report.wall_seconds,
        "work_items": report.total_items(),
        "resumed_items": report.resumed,
        "failures": report.failures,
        "outputs": files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let p = dir.join("manifest.json");
    write_json(&p, &manifest)?;
    files.push(p);
    Ok(files)
}

/// Local minima of `ys` below half the median of the surrounding ±5-point
/// window, located by a parabola through the minimum and its neighbours.
pub fn detect_dips(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = ys.len();
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(ys[i] <= ys[i - 1] && ys[i] < ys[i + 1]) {
            continue;
        }
        let lo = i.saturating_sub(5);
        let hi = (i + 5).min(n - 1);
        let mut window: Vec<f64> = ys[lo..=hi].iter().copied().filter(|v| v.is_finite()).collect();
        if window.is_empty() {
            continue;
        }
        window.sort_by(f64::total_cmp);
        let m = window.len();
        let median = if m % 2 == 1 { window[m / 2] } else { 0.5 * (window[m / 2 - 1] + window[m / 2]) };
        if ys[i] < 0.5 * median {
            out.push(parabola_vertex([xs[i - 1], xs[i], xs[i + 1]], [ys[i - 1], ys[i], ys[i + 1]]));
        }
    }
    out
}

fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if !(a > 0.0) {
        return x[1];
    }
    // vertex of y = y0 + d1 (x − x0) + a (x − x0)(x − x1)
    let v = 0.5 * (x[0] + x[1]) - d1 / (2.0 * a);
    v.clamp(x[0], x[2])
}

/// Named scan presets anchored to the figures they reproduce.
pub mod presets {
    use super::*;

    pub const NAMES: &[&str] =
        &["fig2", "fig3", "fig4", "fig5", "fig6", "fig7a", "fig7b", "fig7traces", "appB", "appB40", "appB100", "appC"];

    fn centers() -> IcSource {
        IcSource::Points { points: vec!["xR".into(), "xC".into()] }
    }

    fn lle_cov() -> Diagnostics {
        Diagnostics { lle: true, coverage: true, ..Default::default() }
    }

    fn lle_only() -> Diagnostics {
        Diagnostics { lle: true, ..Default::default() }
    }

    fn rand_only() -> Diagnostics {
        Diagnostics { randomization: true, ..Default::default() }
    }

    /// 40 log-spaced amplitudes in `[0.01, 3]`.
    pub fn weak_grid() -> Vec<f64> {
        logspace(0.01, 3.0, 40)
    }

    /// 120 linear amplitudes in `[0.2, 20]`.
    pub fn strong_grid() -> Vec<f64> {
        linspace(0.2, 20.0, 120)
    }

    pub fn by_name(name: &str) -> Option<ScanSpec> {
        let base = ScanSpec { name: name.to_string(), ..ScanSpec::default() };
        let spec = match name {
            "fig2" => ScanSpec { amplitudes: vec![0.0], diagnostics: lle_cov(), ..base },
            "fig3" => ScanSpec { amplitudes: weak_grid(), ics: centers(), diagnostics: lle_cov(), ..base },
            "fig4" => ScanSpec { amplitudes: weak_grid(), diagnostics: lle_only(), ..base },
            "fig5" => ScanSpec { amplitudes: weak_grid(), ics: centers(), diagnostics: rand_only(), ..base },
            "fig6" => ScanSpec { amplitudes: strong_grid(), ics: centers(), diagnostics: rand_only(), ..base },
            "fig7a" => ScanSpec { amplitudes: strong_grid(), diagnostics: lle_only(), ..base },
            "fig7b" => ScanSpec { amplitudes: vec![17.8], diagnostics: lle_only(), ..base },
            "fig7traces" => ScanSpec {
                amplitudes: vec![17.8],
                ics: IcSource::Points { points: vec!["xC".into()] },
                diagnostics: Diagnostics { lle: true, traces: true, ..Default::default() },
                ..base
            },
            "appB" => ScanSpec { amplitudes: vec![2.2], frequencies_hz: linspace(20.0, 120.0, 21), diagnostics: lle_only(), ..base },
            "appB40" => ScanSpec {
                amplitudes: linspace(0.2, 20.0, 120).iter().map(|a| a * 40.0 / 60.0).collect(),
                frequencies_hz: vec![40.0],
                diagnostics: lle_only(),
                ..base
            },
            "appB100" => ScanSpec {
                amplitudes: linspace(0.2, 20.0, 120).iter().map(|a| a * 100.0 / 60.0).collect(),
                frequencies_hz: vec![100.0],
                diagnostics: lle_only(),
                ..base
            },
            "appC" => ScanSpec {
                amplitudes: logspace(0.01, 20.0, 60),
                directions: vec![Direction::Y, Direction::Z],
                diagnostics: lle_only(),
                ..base
            },
            _ => return None,
        };
        Some(spec)
    }
}

/// Loads a scan spec from a TOML file.
pub fn load_spec(path: &Path) -> Result<ScanSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_dip_found() {
        let xs = linspace(0.2, 20.0, 120);
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 0.9 * (-(x - 9.35f64).powi(2) / 0.1).exp()).collect();
        let dips = detect_dips(&xs, &ys);
        assert_eq!(dips.len(), 1);
        assert!((dips[0] - 9.35).abs() <= 0.5 * (xs[1] - xs[0]), "{dips:?}");
    }

    #[test]
    fn monotone_has_no_dips() {
        let xs = linspace(0.0, 1.0, 50);
        assert!(detect_dips(&xs, &xs.iter().map(|x| x * x).collect::<Vec<_>>()).is_empty());
    }

    #[test]
    fn grid_order_is_amplitude_fastest() {
        let spec = ScanSpec {
            amplitudes: vec![1.0, 2.0],
            frequencies_hz: vec![40.0, 60.0],
            directions: vec![Direction::Y],
            ..ScanSpec::default()
        };
        let p = spec.points();
        assert_eq!(p.len(), 4);
        assert_eq!(p[1].drive.amplitude_hbar_d_over_eps, 2.0);
        assert_eq!(p[2].drive.freq_hz, 60.0);
        assert_eq!(p[3].index, 3);
    }

    #[test]
    fn presets_validate() {
        for name in presets::NAMES {
            let s = presets::by_name(name).unwrap();
            s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert_eq!(presets::by_name("fig6").unwrap().points().len(), 120);
        assert!(presets::by_name("nope").is_none());
    }

    #[test]
    fn spec_toml_round_trip() {
        for name in presets::NAMES {
            let s = presets::by_name(name).unwrap();
            let text = toml::to_string(&s).unwrap();
            let back: ScanSpec = toml::from_str(&text).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn point_parsing() {
        let s = parse_point("0.7,0.28,0,0").unwrap();
        assert!((s.rho0() - 0.7).abs() < 1e-12);
        assert!(parse_point("0.2,0.9,0,0").is_err());
        assert!(parse_point("xQ").is_err());
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(0.01, 3.0, 40);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[39] - 3.0).abs() < 1e-12);
    }
}
