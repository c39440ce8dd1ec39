use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use spinchaos::config::{RunConfig, FULL_ENSEMBLE};
use spinchaos::coverage::coverage;
use spinchaos::dynamics::{energy_static, evolve};
use spinchaos::ensemble::{make_ensemble, randomization_run};
use spinchaos::haar::{stream_id, RngSeed};
use spinchaos::lyapunov::lle_trace;
use spinchaos::output::{num, opt_num, read_header, write_csv, write_json, Header};
use spinchaos::params::{Direction, Hamiltonian};
use spinchaos::rotating::predict_dips;
use spinchaos::scan::{self, parse_point, run_scan, IcSource, ScanOptions, ScanSpec};
use spinchaos::validate::run_suite;
use spinchaos::{Error, Result};

/// Driven spin-1 condensate chaos toolkit.
#[derive(Debug, Parser)]
#[command(name = "spinchaos", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args, Clone, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Quadratic Zeeman shift q/h in Hz.
    #[arg(long, global = true)]
    q_hz: Option<f64>,
    /// Spin interaction energy ε_s/h in Hz.
    #[arg(long, global = true)]
    eps_hz: Option<f64>,
    /// Rabi frequency Ω/2π in Hz.
    #[arg(long, global = true)]
    rabi_hz: Option<f64>,
    /// Drive amplitude ħD/ε_s.
    #[arg(long, global = true)]
    drive_amp: Option<f64>,
    /// Modulation frequency ω_m/2π in Hz.
    #[arg(long, global = true, visible_alias = "omega-m")]
    drive_freq_hz: Option<f64>,
    /// Drive direction: x, y, z or ux,uy,uz.
    #[arg(long, global = true)]
    drive_dir: Option<Direction>,
    /// Integrator step in seconds.
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPINCHAOS_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use the large ensemble (128² members) for randomization runs.
    #[arg(long, global = true)]
    full: bool,
    /// Re-run the command recorded in an output file's header or a scan manifest.
    #[arg(long, global = true)]
    from_manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Clone)]
enum Command {
    /// Integrate one trajectory and write it as CSV.
    Evolve {
        /// xR, xC, polar or rho0,m,theta_s/pi,theta_m/pi.
        #[arg(long, default_value = "xC")]
        init: String,
        /// Duration in seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Output cadence in seconds.
        #[arg(long, default_value_t = 1e-3)]
        sample_every: f64,
    },
    /// Largest Lyapunov exponent of one trajectory, with traces.
    Lle {
        #[arg(long, default_value = "xC")]
        init: String,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Phase-space coverage entropy of one trajectory.
    Coverage {
        #[arg(long, default_value = "xC")]
        init: String,
        /// Number of histogram samples N_s.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Ensemble randomization toward Haar statistics.
    Randomize {
        #[arg(long, default_value = "xC")]
        center: String,
        #[arg(long)]
        n_ens: Option<usize>,
        /// Perturbation spread d_i.
        #[arg(long)]
        d_i: Option<f64>,
        /// Final time in τ_s.
        #[arg(long)]
        t_final: Option<f64>,
        /// Stop at the first sample that reaches the finite-size floor.
        #[arg(long)]
        stop_at_floor: bool,
    },
    /// Run a preset or a TOML scan spec.
    Scan {
        /// Preset name or path to a scan spec.
        target: String,
        /// Override the number of Haar initial conditions.
        #[arg(long)]
        ics: Option<usize>,
        /// Reuse results of an interrupted run of the same spec.
        #[arg(long)]
        resume: bool,
        /// Print the cost estimate and exit.
        #[arg(long)]
        estimate: bool,
        /// Print the resolved spec as TOML and exit.
        #[arg(long)]
        print_spec: bool,
        /// Stop after this many work chunks; finish later with --resume.
        #[arg(long)]
        max_tasks: Option<usize>,
    },
    /// Predicted suppression dips at zeros of J₁.
    Dips {
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
    /// Run the invariant suite.
    Validate {
        /// Shorter conservation run (10 s instead of 100 s).
        #[arg(long)]
        quick: bool,
    },
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                eprintln!("hint: fix the value named above; `spinchaos help <command>` lists flags and defaults");
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(cli: Cli, argv: Vec<String>) -> Result<()> {
    if let Some(path) = cli.common.from_manifest.clone() {
        return replay(&path, &cli.common);
    }
    let Some(command) = cli.command.clone() else {
        return Err(Error::InvalidConfig("no command given; try `spinchaos --help`".into()));
    };
    let base = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    run(command, &cli.common, base, argv)
}

/// Flags win over file values.
fn apply_overrides(mut cfg: RunConfig, c: &Common) -> RunConfig {
    if let Some(v) = c.q_hz {
        cfg.system.q_over_h = v;
    }
    if let Some(v) = c.eps_hz {
        cfg.system.eps_s_over_h = v;
    }
    if let Some(v) = c.rabi_hz {
        cfg.system.omega_rabi = v;
    }
    if let Some(v) = c.drive_amp {
        cfg.drive.amplitude_hbar_d_over_eps = v;
    }
    if let Some(v) = c.drive_freq_hz {
        cfg.drive.freq_hz = v;
    }
    if let Some(v) = c.drive_dir {
        cfg.drive.direction = v;
    }
    if let Some(v) = c.dt {
        cfg.dt = v;
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = &c.out {
        cfg.out = v.clone();
    }
    if c.full {
        cfg.randomization.n_ens = FULL_ENSEMBLE;
    }
    cfg
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // a second initialization only happens on replay and keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn header(cfg: &RunConfig, command: &str, argv: &[String]) -> Header {
    Header::tool()
        .with("command", command)
        .with("argv", serde_json::to_string(argv).expect("argv serializes"))
        .with("seed", cfg.seed.to_string())
        .with("config", cfg.to_json())
}

fn run(command: Command, common: &Common, base: RunConfig, argv: Vec<String>) -> Result<()> {
    let mut cfg = apply_overrides(base, common);
    init_threads(common.threads);
    match command {
        Command::Evolve { init, duration, sample_every } => {
            cfg.validate()?;
            let start = parse_point(&init)?;
            let ham = Hamiltonian::new(&cfg.system, &cfg.drive);
            let traj = evolve(start, &ham, cfg.integrator()?, 0.0, duration, sample_every)?;
            let tau = cfg.system.tau_s();
            let path = cfg.out.join("trajectory.csv");
            write_csv(
                &path,
                &header(&cfg, "evolve", &argv).with("init", init.clone()),
                &[
                    "t", "t_over_tau_s", "rho0", "m", "theta_s", "theta_m", "E_over_eps", "re_z1", "im_z1", "re_z0",
                    "im_z0", "re_zm1", "im_zm1",
                ],
                traj.states.iter().enumerate().map(|(k, s)| {
                    let t = traj.time(k);
                    let p = s.to_phase();
                    let z = s.amps();
                    vec![
                        num(t),
                        num(t / tau),
                        num(p.rho0),
                        num(p.m),
                        num(p.theta_s),
                        num(p.theta_m),
                        num(energy_static(s, &cfg.system)),
                        num(z[0].re),
                        num(z[0].im),
                        num(z[1].re),
                        num(z[1].im),
                        num(z[2].re),
                        num(z[2].im),
                    ]
                }),
            )?;
            println!("{} samples written to {}", traj.len(), path.display());
            println!("max per-step norm error {:.3e}", traj.max_norm_error);
        }
        Command::Lle { init, iterations } => {
            if let Some(n) = iterations {
                cfg.lle.iterations = n;
            }
            cfg.validate()?;
            let start = parse_point(&init)?;
            let seed = RngSeed::new(cfg.seed, stream_id(2, 0, 0));
            let period = cfg.histogram.sample_period();
            let tr = lle_trace(&start, &cfg.system, &cfg.drive, cfg.integrator()?, &cfg.lle, seed, period)?;
            let r = &tr.result;
            let tau = cfg.system.tau_s();
            let h = header(&cfg, "lle", &argv).with("init", init.clone());
            write_csv(
                &cfg.out.join("lle_iterates.csv"),
                &h,
                &["iteration", "t_over_tau_s", "lambda_n_tau_s", "cumulative_tau_s"],
                r.iterates.iter().zip(&r.cumulative).enumerate().map(|(n, (a, c))| {
                    vec![(n + 1).to_string(), num((n + 1) as f64 * cfg.lle.reset_interval / tau), num(*a), num(*c)]
                }),
            )?;
            write_csv(
                &cfg.out.join("magnetization.csv"),
                &h,
                &["t_over_tau_s", "m"],
                tr.magnetization.iter().enumerate().map(|(k, m)| vec![num(k as f64 * period / tau), num(*m)]),
            )?;
            write_json(
                &cfg.out.join("lle.json"),
                &serde_json::json!({
                    "init": init,
                    "E_over_eps": energy_static(&start, &cfg.system),
                    "lambda_tau_s": r.lambda,
                    "stderr_tau_s": r.stderr,
                    "retries": r.retries,
                    "seed": seed,
                    "config": cfg,
                }),
            )?;
            println!("lambda*tau_s = {:.4} +/- {:.4}", r.lambda, r.stderr);
        }
        Command::Coverage { init, samples } => {
            if let Some(n) = samples {
                cfg.histogram.samples = n;
            }
            cfg.validate()?;
            let start = parse_point(&init)?;
            let ham = Hamiltonian::new(&cfg.system, &cfg.drive);
            let hs = cfg.histogram;
            let period = hs.sample_period();
            let traj = evolve(start, &ham, cfg.integrator()?, 0.0, hs.samples as f64 * period, period)?;
            let c = coverage(&traj, &hs, RngSeed::new(cfg.seed, stream_id(4, 0, 0)))?;
            write_json(
                &cfg.out.join("coverage.json"),
                &serde_json::json!({
                    "init": init,
                    "E_over_eps": energy_static(&start, &cfg.system),
                    "S": c.s, "S_haar": c.s_haar, "deltaS": c.delta_s, "V": c.v,
                    "header": header(&cfg, "coverage", &argv).entries,
                }),
            )?;
            println!("S = {:.4}  S_haar = {:.4}  deltaS = {:.4}  V = {:.4}", c.s, c.s_haar, c.delta_s, c.v);
        }
        Command::Randomize { center, n_ens, d_i, t_final, stop_at_floor } => {
            if let Some(n) = n_ens {
                cfg.randomization.n_ens = n;
            }
            if let Some(d) = d_i {
                cfg.randomization.d_i = d;
            }
            if let Some(t) = t_final {
                cfg.randomization.t_final_tau = t;
            }
            cfg.randomization.stop_at_floor |= stop_at_floor;
            cfg.validate()?;
            let c = parse_point(&center)?;
            let seed = RngSeed::new(cfg.seed, stream_id(3, 0, 0));
            let rc = cfg.randomization;
            let ens = make_ensemble(&c, rc.n_ens, rc.d_i, seed)?;
            let r = randomization_run(&ens, &cfg.system, &cfg.drive, cfg.integrator()?, &rc)?;
            let h = header(&cfg, "randomize", &argv).with("center", center.clone());
            write_csv(
                &cfg.out.join("delta2.csv"),
                &h,
                &["t_over_tau_s", "delta2"],
                r.times.iter().zip(&r.delta2).map(|(t, d)| vec![num(t / r.tau_s), num(*d)]),
            )?;
            write_json(
                &cfg.out.join("randomization.json"),
                &serde_json::json!({
                    "center": center,
                    "N_ens": rc.n_ens,
                    "d_i": rc.d_i,
                    "floor": r.floor,
                    "R": r.r,
                    "tau_r_over_tau_s": opt_num(r.tau_r_over_tau_s()),
                    "seed": seed,
                    "config": cfg,
                }),
            )?;
            println!(
                "floor = {:.5}  R = {:.4}  tau_r/tau_s = {}",
                r.floor,
                r.r,
                r.tau_r_over_tau_s().map_or("inf".to_string(), |t| format!("{t:.2}"))
            );
        }
        Command::Scan { target, ics, resume, estimate, print_spec, max_tasks } => {
            let mut spec = if Path::new(&target).is_file() {
                scan::load_spec(Path::new(&target))?
            } else {
                scan::presets::by_name(&target).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "unknown scan '{target}'; presets are {}",
                        scan::presets::NAMES.join(", ")
                    ))
                })?
            };
            if let Some(n) = ics {
                spec.ics = IcSource::Haar { count: n };
            }
            apply_scan_overrides(&mut spec, common);
            if print_spec {
                print!("{}", toml::to_string(&spec).expect("spec serializes"));
                return Ok(());
            }
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out")).join(&spec.name);
            run_scan_command(&spec, out, common.threads, resume, estimate, max_tasks)?;
        }
        Command::Dips { count } => {
            cfg.validate()?;
            let dips = predict_dips(&cfg.system, cfg.drive.freq_hz, count)?;
            println!("n,j1_root,hbarD_over_eps");
            for d in &dips {
                println!("{},{:.6},{:.4}", d.index, d.j1_root, d.hbar_d_over_eps);
            }
            if common.out.is_some() {
                write_csv(
                    &cfg.out.join("dips.csv"),
                    &header(&cfg, "dips", &argv),
                    &["n", "j1_root", "hbarD_over_eps"],
                    dips.iter().map(|d| vec![d.index.to_string(), num(d.j1_root), num(d.hbar_d_over_eps)]),
                )?;
            }
        }
        Command::Validate { quick } => {
            let checks = run_suite(quick)?;
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {:<38} value {:.3e} (limit {:.1e}) {:.1}s  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.limit,
                    c.seconds,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if common.out.is_some() {
                write_json(&cfg.out.join("validate.json"), &checks)?;
            }
            if failed > 0 {
                return Err(Error::ScanFailed { failed, total: checks.len() });
            }
            println!("all {} checks passed", checks.len());
        }
    }
    Ok(())
}

fn apply_scan_overrides(spec: &mut ScanSpec, c: &Common) {
    if let Some(v) = c.q_hz {
        spec.system.q_over_h = v;
    }
    if let Some(v) = c.eps_hz {
        spec.system.eps_s_over_h = v;
    }
    if let Some(v) = c.rabi_hz {
        spec.system.omega_rabi = v;
    }
    if let Some(v) = c.drive_amp {
        spec.amplitudes = vec![v];
    }
    if let Some(v) = c.drive_freq_hz {
        spec.frequencies_hz = vec![v];
    }
    if let Some(v) = c.drive_dir {
        spec.directions = vec![v];
    }
    if let Some(v) = c.dt {
        spec.dt = v;
    }
    if let Some(v) = c.seed {
        spec.seed = v;
    }
    if c.full {
        spec.randomization.n_ens = FULL_ENSEMBLE;
    }
}

fn run_scan_command(
    spec: &ScanSpec,
    out: PathBuf,
    threads: Option<usize>,
    resume: bool,
    estimate_only: bool,
    max_tasks: Option<usize>,
) -> Result<()> {
    spec.validate()?;
    let est = spec.estimate();
    let workers = threads.unwrap_or_else(rayon::current_num_threads).max(1);
    let summary = format!(
        "scan '{}': {} points, {} work items, ~{:.2e} member-steps, ~{:.0} s on {} thread(s)",
        spec.name,
        est.points,
        est.work_items,
        est.member_steps,
        est.seconds / workers as f64,
        workers
    );
    if estimate_only {
        println!("{summary}");
        return Ok(());
    }
    eprintln!("{summary}");
    let opts = ScanOptions { out_dir: Some(out.clone()), threads, resume, progress: true, max_tasks };
    let report = run_scan(spec, &opts)?;
    if report.incomplete {
        eprintln!("stopped after {} work chunks; rerun with --resume to finish", report.computed);
        return Ok(());
    }
    eprintln!(
        "done in {:.1} s ({} resumed, {} failures); outputs in {}",
        report.wall_seconds,
        report.resumed,
        report.failures.len(),
        out.display()
    );
    Ok(())
}

fn replay(path: &Path, common: &Common) -> Result<()> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let spec: ScanSpec = serde_json::from_value(v.get("spec").cloned().ok_or_else(|| {
            Error::Parse(format!("{} has no 'spec' entry; pass a scan manifest.json or a CSV output", path.display()))
        })?)
        .map_err(|e| Error::Parse(e.to_string()))?;
        let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out")).join(&spec.name);
        return run_scan_command(&spec, out, common.threads, false, false, None);
    }
    let h = read_header(path)?;
    if let Some(s) = h.get("spec") {
        let spec: ScanSpec = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out")).join(&spec.name);
        return run_scan_command(&spec, out, common.threads, false, false, None);
    }
    let (Some(argv), Some(config)) = (h.get("argv"), h.get("config")) else {
        return Err(Error::Parse(format!("{} has no argv/config header lines", path.display())));
    };
    let argv: Vec<String> = serde_json::from_str(argv).map_err(|e| Error::Parse(e.to_string()))?;
    let cfg: RunConfig = serde_json::from_str(config).map_err(|e| Error::Parse(e.to_string()))?;
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::Parse(e.to_string()))?;
    let command = cli.command.clone().ok_or_else(|| Error::Parse("recorded argv has no command".into()))?;
    // the recorded config already folds in the original flags; only --out and --threads may change
    let mut replay_common = Common { out: common.out.clone(), threads: common.threads.or(cli.common.threads), ..Default::default() };
    replay_common.from_manifest = None;
    run(command, &replay_common, cfg, argv)
}
