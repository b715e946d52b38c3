mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use roskit::barrier::{find_safe_seeds, initialization_program, BarrierError, RosEstimate};
use roskit::hybrid::{
    critical_deadband, deactivation_window, guard_crossings, recovery_sequence_check, rotor_recovery_check, simulate,
    simulated_critical_switch, write_csv, write_events_json, CrossingDirection, HybridAutomaton, HybridError, Policy,
};
use roskit::plant::{format_table, quantify, ModeGains, ModelOrder, PlantAnalysis};
use roskit::sdp::export_sdpa;
use roskit::sos::compile;
use roskit::study::{mode_ros, mode_scenario, run_study, StudyError, RECOVERY_SUPPORT, SEQUENCE_TIME};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "roskit",
    version,
    about = "Regions of safety and safe mode switching for wind-turbine frequency support"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Mode id (1-5).
    #[arg(long, global = true)]
    mode: Option<u8>,
    /// Maximum barrier degree.
    #[arg(long, global = true)]
    degree: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Degree-4 run with the default settings otherwise.
    #[arg(long, global = true)]
    quick: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the wind-turbine operating point.
    Equilibrium,
    /// Linearize the wind-turbine model at its operating point.
    Linearize,
    /// Kron and participation-based reduction with the gain table.
    Reduce,
    /// Emulated inertia and damping of a mode over time.
    Quantify {
        /// End of the inertia window (s).
        #[arg(long, default_value_t = 2.0)]
        t_h: f64,
        /// Start of the damping window (s).
        #[arg(long, default_value_t = 15.0)]
        t_p: f64,
        /// End of the damping window (s).
        #[arg(long, default_value_t = 30.0)]
        t_s: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
    },
    /// Region of safety of a mode under the worst-case load step.
    Ros,
    /// Evaluate a guard at a state or along a simulated trajectory.
    GuardEval {
        /// Region-of-safety JSON; defaults to `<out>/ros_mode<N>.json`.
        #[arg(long)]
        ros: Option<PathBuf>,
        /// Comma-separated relevant state `dw,dPm,dPv,dwr`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        state: Option<Vec<f64>>,
        /// Policy of the trajectory whose crossings are reported.
        #[arg(long, default_value = "mode1-only")]
        policy: String,
    },
    /// Critical deadband for switching from Mode 1 to `--mode`.
    Deadband {
        #[arg(long)]
        ros: Option<PathBuf>,
    },
    /// Deactivation deadlines and the recovery sequence of the support mode.
    Recover {
        /// Time of leaving the support mode (s).
        #[arg(long, default_value_t = SEQUENCE_TIME)]
        at: f64,
    },
    /// Simulate the full-order switched system.
    Simulate {
        /// `mode1-only`, `fixed:<id>`, or `deadband:<Hz>:<id>`.
        #[arg(long, default_value = "mode1-only")]
        policy: String,
        #[arg(long)]
        horizon: Option<f64>,
        /// Simulate the reduced closed loops instead of the full ones.
        #[arg(long)]
        reduced: bool,
    },
    /// Write the initialization SDP of a mode in SDPA sparse format.
    ExportSdpa,
    /// Run the whole case study and report every acceptance criterion.
    Reproduce,
}

/// Failure that maps to exit code 2.
#[derive(Debug)]
struct Unverified(String);

impl std::fmt::Display for Unverified {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification infeasible: {}", self.0)
    }
}

impl std::error::Error for Unverified {}

fn classify_barrier(e: BarrierError) -> anyhow::Error {
    match e {
        BarrierError::InfeasibleInit(m) | BarrierError::NoneFound(m) => Unverified(m).into(),
        e => e.into(),
    }
}

fn classify_study(e: StudyError) -> anyhow::Error {
    match e {
        StudyError::Barrier(b) => classify_barrier(b),
        e => e.into(),
    }
}

fn classify_hybrid(e: HybridError) -> anyhow::Error {
    match e {
        HybridError::NeverEntered(m) | HybridError::NeverNegative(m) | HybridError::EmptyWindow(m) => {
            Unverified(m).into()
        }
        HybridError::Barrier(b) => classify_barrier(b),
        e => e.into(),
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    mode: Option<u8>,
}

impl Ctx {
    fn analysis(&self) -> Result<PlantAnalysis> {
        Ok(self.cfg.plant.analysis()?)
    }

    fn mode(&self) -> Result<ModeGains> {
        let id = self.mode.ok_or_else(|| anyhow!("--mode is required"))?;
        self.cfg
            .plant
            .modes()
            .into_iter()
            .find(|m| m.id == id)
            .ok_or_else(|| anyhow!("unknown mode {id}"))
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn ros_path(&self, id: u8) -> PathBuf {
        self.out.join(format!("ros_mode{id}.json"))
    }

    fn load_ros(&self, id: u8, explicit: Option<&Path>) -> Result<RosEstimate> {
        let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| self.ros_path(id));
        if !path.exists() {
            bail!(
                "missing region of safety {} (run `roskit ros --mode {id}` first)",
                path.display()
            );
        }
        RosEstimate::load(&path).with_context(|| format!("reading {}", path.display()))
    }

    fn automaton(&self, analysis: &PlantAnalysis, order: ModelOrder) -> Result<HybridAutomaton> {
        Ok(HybridAutomaton::new(analysis, &self.cfg.plant.modes(), order)?)
    }
}

fn parse_policy(s: &str) -> Result<Policy> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["mode1-only"] => Ok(Policy::fixed(1)),
        ["fixed", id] => Ok(Policy::fixed(id.parse()?)),
        ["deadband", db, id] => Ok(Policy::deadband(db.parse()?, id.parse()?)),
        _ => bail!("unknown policy `{s}`; use mode1-only, fixed:<id> or deadband:<Hz>:<id>"),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.quick {
        cfg.study.degree = 4;
    }
    if let Some(d) = cli.degree {
        cfg.study.degree = d;
    }
    if let Some(s) = cli.seed {
        cfg.study.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    let ctx = Ctx {
        out: cfg.out.clone(),
        mode: cli.mode,
        cfg,
    };

    match cli.command {
        Command::Equilibrium => {
            let a = ctx.analysis()?;
            let eq = &a.equilibrium;
            println!(
                "operating point after {} Newton iterations, max residual {:.2e}",
                eq.iterations, eq.max_residual
            );
            println!("{:#?}", eq.state);
            let p = ctx.write_json("equilibrium.json", eq)?;
            println!("wrote {}", p.display());
        }
        Command::Linearize => {
            let a = ctx.analysis()?;
            let p = ctx.write_json("linear_dae.json", &a.dae)?;
            let q = ctx.write_json("state_space.json", &a.state_space)?;
            println!("wrote {} and {}", p.display(), q.display());
        }
        Command::Reduce => {
            let a = ctx.analysis()?;
            let u = a.sma.unit;
            println!("A_rd = {:.4}", u.a_rd);
            println!("C_rd = {:.4}", u.c_rd);
            let rows = a.table(&ctx.cfg.plant.modes());
            print!("{}", format_table(&rows));
            ctx.write_json("reduction.json", &a.sma)?;
            let p = ctx.write_json("table.json", &rows)?;
            println!("wrote {}", p.display());
        }
        Command::Quantify { t_h, t_p, t_s, points } => {
            let a = ctx.analysis()?;
            let m = ctx.mode()?;
            let q = quantify(&a.sma, &m, a.sfr.omega_s, (t_h, t_p, t_s), points)?;
            let mut csv = String::from("t_inertia,h_e,t_damping,d_e\n");
            for k in 0..q.h_e.len() {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    q.inertia_t[k], q.h_e[k], q.damping_t[k], q.d_e[k]
                ));
            }
            let csv_path = ctx.path(&format!("quantify_mode{}.csv", m.id))?;
            fs::write(&csv_path, csv)?;
            ctx.write_json(&format!("quantify_mode{}.json", m.id), &q)?;
            println!(
                "mode {}: H_e(0) = {:.4} s, H_e({t_h}) = {:.4} s, D_e({t_p}) = {:.4} pu",
                m.id,
                q.h_e[0],
                q.h_e[q.h_e.len() - 1],
                q.d_e[0]
            );
            println!("wrote {}", csv_path.display());
        }
        Command::Ros => {
            let a = ctx.analysis()?;
            let m = ctx.mode()?;
            let (_, ros) = mode_ros(&a, &m, &ctx.cfg.study).map_err(classify_study)?;
            println!(
                "mode {}: degree {}, {} iterations, coverage {:.4}, B(0) = {:.4}",
                m.id,
                ros.degree,
                ros.iterations,
                ros.coverage(),
                ros.eval_physical(&[0.0; 4])
            );
            let p = ctx.ros_path(m.id);
            ctx.path("")?;
            ros.save(&p)?;
            println!("wrote {}", p.display());
        }
        Command::GuardEval { ros, state, policy } => {
            let m = ctx.mode()?;
            let guard = ctx.load_ros(m.id, ros.as_deref())?;
            if let Some(x) = state {
                if x.len() != 4 {
                    bail!("--state needs four comma-separated values");
                }
                let b = guard.eval_physical(&x);
                println!(
                    "B_d{}({x:?}) = {b:.6}: {}",
                    m.id,
                    if !guard.in_domain(&x) {
                        "outside the domain"
                    } else if b <= 0.0 {
                        "inside"
                    } else {
                        "outside"
                    }
                );
                return Ok(());
            }
            let a = ctx.analysis()?;
            let aut = ctx.automaton(&a, ModelOrder::Full)?;
            let traj = simulate(&aut, &ctx.cfg.scenario, &parse_policy(&policy)?)?;
            let crossings = guard_crossings(&traj, &guard, CrossingDirection::Both)?;
            for c in &crossings {
                println!("t = {:.4} s  Δω = {:.4} Hz  {:?}", c.time, c.dw, c.direction);
            }
            if crossings.is_empty() {
                println!("no crossings of B_d{} = 0", m.id);
            }
            let p = ctx.write_json(&format!("crossings_mode{}.json", m.id), &crossings)?;
            println!("wrote {}", p.display());
        }
        Command::Deadband { ros } => {
            let m = ctx.mode()?;
            let guard = ctx.load_ros(m.id, ros.as_deref())?;
            let a = ctx.analysis()?;
            let mut aut = ctx.automaton(&a, ModelOrder::Full)?;
            aut.set_guard(m.id, guard)?;
            let sc = &ctx.cfg.scenario;
            let reference = simulated_critical_switch(&aut, m.id, sc).ok();
            let cr = critical_deadband(&aut, m.id, sc).map_err(classify_hybrid)?;
            println!(
                "mode {}: switch at {:.4} s, deadband {:.4} Hz, max|Δω| {:.4} Hz ({})",
                m.id,
                cr.t_cr,
                cr.deadband,
                cr.switched_max_dw,
                if cr.safe { "safe" } else { "UNSAFE" }
            );
            if let Some(t) = reference {
                println!("latest safe switch found by simulation: {t:.4} s");
            }
            let p = ctx.write_json(&format!("deadband_mode{}.json", m.id), &cr)?;
            println!("wrote {}", p.display());
            if !cr.safe {
                return Err(Unverified("the guard-derived switch is unsafe in simulation".into()).into());
            }
        }
        Command::Recover { at } => {
            let (support, via, db) = RECOVERY_SUPPORT;
            let a = ctx.analysis()?;
            let mut aut = ctx.automaton(&a, ModelOrder::Full)?;
            aut.set_guard(1, ctx.load_ros(1, None)?)?;
            aut.set_guard(via, ctx.load_ros(via, None)?)?;
            let mut sc = ctx.cfg.scenario.clone();
            sc.horizon = sc.horizon.max(240.0);
            let window = deactivation_window(&aut, &sc, support, via, db).map_err(classify_hybrid)?;
            let (seq, traj) = recovery_sequence_check(&aut, &sc, support, via, db, at).map_err(classify_hybrid)?;
            let recovery = rotor_recovery_check(&traj).ok();
            println!(
                "support mode {support} from {:.3} s: leave for Mode 1 by {:.2} s, for mode {via} by {:.2} s",
                window.t_switch, window.direct, window.via
            );
            println!(
                "leaving at {at} s: direct max|Δω| {:.4} Hz, via mode {via} {:.4} Hz",
                seq.direct_max_dw, seq.sequence_max_dw
            );
            if let Some(r) = &recovery {
                println!(
                    "area imbalance {:.1}%, final rotor deviation {:.2e} Hz",
                    100.0 * r.imbalance,
                    r.final_rotor_deviation
                );
            }
            #[derive(Serialize)]
            struct Out<'a> {
                window: &'a roskit::hybrid::DeactivationWindow,
                sequence: &'a roskit::hybrid::SequenceCheck,
                recovery: Option<&'a roskit::hybrid::RecoveryReport>,
            }
            ctx.write_json(
                "recover.json",
                &Out {
                    window: &window,
                    sequence: &seq,
                    recovery: recovery.as_ref(),
                },
            )?;
            let mut buf = Vec::new();
            write_csv(&traj, &mut buf)?;
            let p = ctx.path("recover_sequence.csv")?;
            fs::write(&p, buf)?;
            println!("wrote {}", p.display());
        }
        Command::Simulate {
            policy,
            horizon,
            reduced,
        } => {
            let a = ctx.analysis()?;
            let order = if reduced { ModelOrder::Reduced } else { ModelOrder::Full };
            let aut = ctx.automaton(&a, order)?;
            let mut sc = ctx.cfg.scenario.clone();
            if let Some(h) = horizon {
                sc.horizon = h;
            }
            let traj = simulate(&aut, &sc, &parse_policy(&policy)?)?;
            let (t_n, nadir) = traj.nadir();
            println!(
                "nadir {nadir:.4} Hz at {t_n:.3} s, final {:.4} Hz, {} events, {}",
                traj.dw(traj.len() - 1),
                traj.events.len(),
                if traj.is_safe() { "safe" } else { "unsafe" }
            );
            let name = policy.replace(':', "_");
            let mut buf = Vec::new();
            write_csv(&traj, &mut buf)?;
            let p = ctx.path(&format!("simulate_{name}.csv"))?;
            fs::write(&p, buf)?;
            write_events_json(&traj.events, &ctx.path(&format!("events_{name}.json"))?)?;
            println!("wrote {}", p.display());
        }
        Command::ExportSdpa => {
            let a = ctx.analysis()?;
            let m = ctx.mode()?;
            let study = &ctx.cfg.study;
            let sc = mode_scenario(&a, &m, study).map_err(classify_study)?;
            let seeds = find_safe_seeds(&sc, study.algorithm.seeds, &study.algorithm).map_err(classify_barrier)?;
            let prog = initialization_program(&sc, &seeds, &study.algorithm, sc.degree_init)?;
            let compiled = compile(&prog)?;
            let p = ctx.path(&format!("init_mode{}_deg{}.dat-s", m.id, sc.degree_init))?;
            export_sdpa(&compiled.sdp, &p)?;
            println!(
                "{} seeds, {} constraints, {} blocks",
                seeds.len(),
                compiled.sdp.constraints.len(),
                compiled.sdp.blocks.len()
            );
            println!("wrote {}", p.display());
        }
        Command::Reproduce => {
            let mut study = ctx.cfg.study.clone();
            if study.cache.is_none() {
                study.cache = Some(ctx.out.join("cache"));
            }
            info!("reproducing the case study at degree {}", study.degree);
            let report = run_study(&ctx.cfg.plant, &study).map_err(classify_study)?;
            for line in report.lines() {
                println!("{line}");
            }
            let p = ctx.write_json("report.json", &report)?;
            println!("wrote {}", p.display());
            if !report.all_passed() {
                return Err(Unverified("some acceptance criteria failed".into()).into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = roskit::study::configure_threads() {
        info!("worker threads capped at {n}");
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Unverified>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
