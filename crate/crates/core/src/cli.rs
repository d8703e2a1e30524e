//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 infeasible scheduling or no
//! feasible parameter candidate, 3 invalid input (config, files, usage).
//! Failures print one JSON object `{"error": kind, "message": ...}` on stderr.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::assigner::{assign_with_guard_ladder, AssignResult};
use crate::config::Config;
use crate::datastore::{self, RunDir, RunManifest, Store};
use crate::error::{Error, Result};
use crate::experiments::{self, EndToEndSetup, Figure, FigureTable};
use crate::sim::{simulate, PerfReport};
use crate::surrogate::{self, select_params, RegressorSpec};
use crate::traffic::mix_seed;
use crate::types::{ProtocolParams, Scenario};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "msmac", version, about = "Mini-slot MAC assignment, simulation and parameter selection")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Store root for runs, datasets and models.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps and dataset generation (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign anchors for the configured scenario.
    Assign,
    /// Assign (or load an assignment) and simulate.
    Simulate {
        /// Use this assignment instead of running the assigner.
        #[arg(long)]
        assignment: Option<PathBuf>,
    },
    /// Assign and simulate every parameter setting of `[train].grid`.
    Sweep {
        #[arg(long, default_value_t = 1)]
        repeats: u32,
    },
    /// Regenerate the data behind one figure.
    Replicate {
        /// One of fig2a, fig2b, fig3a, fig3b, fig4a, fig4b, fig5a, fig5b, fig6.
        figure: String,
        /// Frames per run for the mini-slot figures.
        #[arg(long)]
        frames: Option<u32>,
        /// Independent repeats averaged for fig2a/fig2b.
        #[arg(long, default_value_t = 10)]
        repeats: u32,
        /// Simulated seconds for fig5a/fig5b/fig6.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Label random scenarios over the parameter grid.
    GenDataset {
        #[arg(long, default_value = "dataset")]
        name: String,
    },
    /// Train the surrogate on a dataset file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Rank the grid's parameter settings for the configured scenario.
    Select {
        #[arg(long)]
        model: PathBuf,
    },
    /// Print the class summary of a finished run.
    Report { run: PathBuf },
}

/// What a successful command produced.
#[derive(Debug)]
pub struct Outcome {
    pub run: Option<PathBuf>,
    pub infeasible: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } | Error::NoFeasibleCandidate | Error::Overload { .. } => EXIT_INFEASIBLE,
        Error::Parse { .. } | Error::SchemaVersion { .. } | Error::InvalidScenario(_) | Error::Range { .. } => EXIT_INPUT,
        _ => EXIT_RUNTIME,
    }
}

pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(o) if o.infeasible => EXIT_INFEASIBLE,
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidScenario(format!("worker pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn load_config(cli: &Cli) -> Result<Config> {
    match &cli.config {
        Some(p) => Config::load(p),
        None => Config::parse("", Path::new("<default>")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summaries serialize"));
}

fn finish(run: &RunDir, mut manifest: RunManifest, started: Instant) -> Result<()> {
    manifest.id = run.id.clone();
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    run.write_manifest(&manifest)
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let started = Instant::now();
    let store = Store::new(&cli.out);
    match &cli.command {
        Command::Assign => cmd_assign(cli, &store, started),
        Command::Simulate { assignment } => cmd_simulate(cli, &store, assignment.as_deref(), started),
        Command::Sweep { repeats } => cmd_sweep(cli, &store, *repeats, started),
        Command::Replicate { figure, frames, repeats, duration } => {
            cmd_replicate(cli, &store, figure.parse()?, *frames, *repeats, *duration, started)
        }
        Command::GenDataset { name } => cmd_gen_dataset(cli, &store, name, started),
        Command::Train { dataset, name } => cmd_train(cli, &store, dataset, name, started),
        Command::Select { model } => cmd_select(cli, &store, model, started),
        Command::Report { run } => cmd_report(run),
    }
}

fn base_manifest(command: &str, cli: &Cli, config: &Config) -> RunManifest {
    let mut m = RunManifest::new(command);
    m.seeds.push(("seed".into(), cli.seed));
    m.options = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
    m
}

fn write_estimates(path: &Path, scenario: &Scenario, r: &AssignResult) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "device_id,class,slot,mini_slot,delay_est_s,collision_est")?;
        for (d, e) in scenario.devices.iter().zip(&r.estimates.per_device) {
            let (slot, mini) = r.assignment.anchor(d.id).map_or((String::new(), String::new()), |a| (a.slot.to_string(), a.mini_slot.to_string()));
            let (delay, coll) = e.map_or((String::new(), String::new()), |e| (e.delay.to_string(), e.collision.to_string()));
            writeln!(w, "{},{},{slot},{mini},{delay},{coll}", d.id, d.class)?;
        }
        Ok(())
    })
}

fn save_assignment_files(run: &RunDir, scenario: &Scenario, r: &AssignResult) -> Result<()> {
    datastore::save_scenario(&run.file("scenario.json"), scenario)?;
    datastore::save_assignment(&run.file("assignment.json"), &r.assignment)?;
    write_with(&run.file("assignment.csv"), |w| datastore::write_assignment_csv(w, scenario, &r.assignment))?;
    write_estimates(&run.file("estimates.csv"), scenario, r)
}

fn save_report_files(run: &RunDir, report: &PerfReport) -> Result<()> {
    datastore::save_report(&run.file("report.json"), report)?;
    write_with(&run.file("report.csv"), |w| report.write_csv(w))?;
    write_json(&run.file("summary.json"), &report.summary())
}

fn cmd_assign(cli: &Cli, store: &Store, started: Instant) -> Result<Outcome> {
    let config = load_config(cli)?;
    let params = config.params()?;
    let scenario = config.scenario(cli.seed)?;
    let (r, g) = assign_with_guard_ladder(&scenario, &params, &config.sim.guard_ladder)?;
    let run = store.create_run("assign")?;
    save_assignment_files(&run, &scenario, &r)?;
    let mut m = base_manifest("assign", cli, &config);
    m.scenario_hash = Some(datastore::scenario_hash(&scenario));
    m.params = Some(params);
    finish(&run, m, started)?;
    print_json(&serde_json::json!({
        "run": run.path,
        "success": r.assignment.success,
        "assigned": r.assignment.assigned_count,
        "devices": scenario.devices.len(),
        "guard_margin": g,
        "failure": r.assignment.failure,
    }));
    Ok(Outcome { run: Some(run.path), infeasible: !r.assignment.success })
}

fn cmd_simulate(cli: &Cli, store: &Store, assignment: Option<&Path>, started: Instant) -> Result<Outcome> {
    let config = load_config(cli)?;
    let params = config.params()?;
    let scenario = config.scenario(cli.seed)?;
    let run = store.create_run("simulate")?;
    let assigned = match assignment {
        Some(p) => datastore::load_assignment(p)?,
        None => {
            let (r, _) = assign_with_guard_ladder(&scenario, &params, &config.sim.guard_ladder)?;
            save_assignment_files(&run, &scenario, &r)?;
            r.assignment
        }
    };
    let mut m = base_manifest("simulate", cli, &config);
    m.scenario_hash = Some(datastore::scenario_hash(&scenario));
    m.params = Some(params);
    if !assigned.success {
        finish(&run, m, started)?;
        print_json(&serde_json::json!({ "run": run.path, "success": false, "failure": assigned.failure }));
        return Ok(Outcome { run: Some(run.path), infeasible: true });
    }
    let sim_seed = mix_seed(cli.seed, 1);
    m.seeds.push(("sim".into(), sim_seed));
    let report = simulate(&scenario.devices, &params, &scenario.qos, &assigned, &config.sim.options(sim_seed))?;
    save_report_files(&run, &report)?;
    finish(&run, m, started)?;
    print_json(&serde_json::json!({ "run": run.path, "summary": report.summary() }));
    Ok(Outcome { run: Some(run.path), infeasible: false })
}

#[derive(Serialize)]
struct SweepRow {
    n_m: u32,
    r_h: u32,
    r_r: u32,
    r_l: u32,
    repeat: u32,
    success: bool,
    guard_margin: f64,
    qos_met: bool,
    class_mean_delay_s: [f64; 3],
    class_max_collision: [f64; 3],
}

fn cmd_sweep(cli: &Cli, store: &Store, repeats: u32, started: Instant) -> Result<Outcome> {
    let config = load_config(cli)?;
    let grid = config.grid();
    let jobs: Vec<(ProtocolParams, u32)> = grid.iter().flat_map(|p| (0..repeats).map(move |r| (*p, r))).collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(p, rep)| {
            let seed = mix_seed(cli.seed, rep as u64);
            let scenario = config.scenario(seed)?;
            let (r, g) = assign_with_guard_ladder(&scenario, &p, &config.sim.guard_ladder)?;
            let mut row = SweepRow {
                n_m: p.n_m,
                r_h: p.r_h,
                r_r: p.r_r,
                r_l: p.r_l,
                repeat: rep,
                success: r.assignment.success,
                guard_margin: g,
                qos_met: false,
                class_mean_delay_s: [0.0; 3],
                class_max_collision: [0.0; 3],
            };
            if r.assignment.success {
                let rep = simulate(&scenario.devices, &p, &scenario.qos, &r.assignment, &config.sim.options(mix_seed(seed, 1)))?;
                row.qos_met = rep.qos_met;
                for c in &rep.classes {
                    row.class_mean_delay_s[c.class.index()] = c.mean_delay;
                    row.class_max_collision[c.class.index()] = c.max_collision;
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let run = store.create_run("sweep")?;
    write_with(&run.file("sweep.csv"), |w| {
        writeln!(w, "n_m,r_h,r_r,r_l,repeat,success,guard_margin,qos_met,hp_mean_delay_s,rp_mean_delay_s,lp_mean_delay_s,hp_max_collision,rp_max_collision,lp_max_collision")?;
        for r in &rows {
            let d = r.class_mean_delay_s;
            let q = r.class_max_collision;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n_m, r.r_h, r.r_r, r.r_l, r.repeat, r.success, r.guard_margin, r.qos_met, d[0], d[1], d[2], q[0], q[1], q[2]
            )?;
        }
        Ok(())
    })?;
    finish(&run, base_manifest("sweep", cli, &config), started)?;
    print_json(&serde_json::json!({ "run": run.path, "rows": rows.len() }));
    Ok(Outcome { run: Some(run.path), infeasible: false })
}

fn write_class_csv<W: Write>(mut w: W, report: &PerfReport) -> std::io::Result<()> {
    writeln!(w, "class,devices,mean_delay_s,max_delay_s,mean_collision,max_collision,qos_met")?;
    for c in &report.classes {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            c.class, c.devices, c.mean_delay, c.max_delay, c.mean_collision, c.max_collision, c.qos_met
        )?;
    }
    Ok(())
}

fn two_curve_table(a_name: &str, a: &[f64], b_name: &str, b: &[f64]) -> FigureTable {
    FigureTable {
        header: vec!["mini_slot".into(), a_name.into(), b_name.into()],
        rows: a.iter().zip(b).enumerate().map(|(i, (x, y))| vec![(i + 1) as f64, *x, *y]).collect(),
    }
}

fn cmd_replicate(
    cli: &Cli,
    store: &Store,
    figure: Figure,
    frames: Option<u32>,
    repeats: u32,
    duration: Option<f64>,
    started: Instant,
) -> Result<Outcome> {
    let seed = cli.seed;
    let name = format!("{figure:?}").to_ascii_lowercase();
    let run = store.create_run(&format!("replicate-{name}"))?;
    let mut m = RunManifest::new("replicate");
    m.seeds.push(("seed".into(), seed));
    let shared_frames = frames.unwrap_or(2_000_000);
    let table = match figure {
        Figure::Fig2a | Figure::Fig2b => {
            let (lo, hi) = if figure == Figure::Fig2a { (0.2, 1.0) } else { (1.0, 5.0) };
            let setup = experiments::fig2_setup(lo, hi, frames.unwrap_or(20_000));
            m.options = serde_json::json!({ "setup": setup, "repeats": repeats });
            experiments::fig2(&setup, repeats, seed)?.table()
        }
        Figure::Fig3a | Figure::Fig3b => {
            let setup = experiments::fig3_setup(shared_frames);
            m.options = serde_json::json!({ "setup": setup, "buffer": figure == Figure::Fig3b });
            experiments::shared_curves(&setup, figure == Figure::Fig3b, seed)?.table()
        }
        Figure::Fig4a | Figure::Fig4b => {
            let base = experiments::fig3_setup(shared_frames);
            let (setup, label) = if figure == Figure::Fig4a {
                (experiments::fig4a_setup(shared_frames), "t_m_7us_s")
            } else {
                (experiments::fig4b_setup(shared_frames), "frame_5_slots_rates_x5_s")
            };
            m.options = serde_json::json!({ "baseline": base, "setup": setup });
            let (a, b) = rayon::join(
                || experiments::shared_curves(&base, true, seed),
                || experiments::shared_curves(&setup, true, seed),
            );
            two_curve_table("baseline_s", &a?.group_means(), label, &b?.group_means())
        }
        Figure::Fig5a | Figure::Fig5b | Figure::Fig6 => {
            let mut setup = match figure {
                Figure::Fig5a => EndToEndSetup::fig5a(),
                Figure::Fig5b => EndToEndSetup::fig5b(),
                _ => EndToEndSetup::fig6(),
            };
            if let Some(d) = duration {
                setup.duration = d;
            }
            m.options = serde_json::to_value(&setup).unwrap_or_default();
            m.params = Some(setup.params);
            let out = setup.run(seed)?;
            m.scenario_hash = Some(datastore::scenario_hash(&out.scenario));
            save_assignment_files(&run, &out.scenario, &out.assigned)?;
            let Some(report) = out.report else {
                finish(&run, m, started)?;
                print_json(&serde_json::json!({ "run": run.path, "success": false, "failure": out.assigned.assignment.failure }));
                return Ok(Outcome { run: Some(run.path), infeasible: true });
            };
            save_report_files(&run, &report)?;
            write_with(&run.file(&format!("{name}_devices.csv")), |w| report.write_csv(w))?;
            write_with(&run.file(&format!("{name}.csv")), |w| write_class_csv(w, &report))?;
            finish(&run, m, started)?;
            print_json(&serde_json::json!({ "run": run.path, "guard_margin": out.guard_margin, "summary": report.summary() }));
            return Ok(Outcome { run: Some(run.path), infeasible: false });
        }
    };
    write_with(&run.file(&format!("{name}.csv")), |w| table.write_csv(w))?;
    finish(&run, m, started)?;
    print_json(&serde_json::json!({ "run": run.path, "table": table }));
    Ok(Outcome { run: Some(run.path), infeasible: false })
}

fn cmd_gen_dataset(cli: &Cli, store: &Store, name: &str, started: Instant) -> Result<Outcome> {
    let config = load_config(cli)?;
    let dc = config.dataset_config(cli.seed);
    let ds = surrogate::generate_dataset(&dc)?;
    let path = store.datasets()?.join(format!("{name}.txt"));
    datastore::save_dataset(&path, &ds)?;
    let run = store.create_run("gen-dataset")?;
    let mut m = base_manifest("gen-dataset", cli, &config);
    m.options = serde_json::json!({ "dataset": dc, "path": path });
    finish(&run, m, started)?;
    let infeasible = ds.entries.iter().filter(|e| e.infeasible()).count();
    print_json(&serde_json::json!({ "run": run.path, "dataset": path, "entries": ds.entries.len(), "infeasible": infeasible }));
    Ok(Outcome { run: Some(run.path), infeasible: false })
}

fn cmd_train(cli: &Cli, store: &Store, dataset: &Path, name: &str, started: Instant) -> Result<Outcome> {
    let config = load_config(cli)?;
    let ds = datastore::load_dataset(dataset)?;
    let tc = config.train_config(cli.seed);
    let model = surrogate::train(RegressorSpec::standard(), &ds, &tc)?;
    let eval = model.evaluate(&ds, &model.split.test)?;
    let path = store.models()?.join(format!("{name}.json"));
    datastore::save_model(&path, &model)?;
    let run = store.create_run("train")?;
    write_with(&run.file("history.csv"), |w| {
        writeln!(w, "epoch,train_loss,train_eval_loss,val_loss,val_r2")?;
        for h in &model.history {
            writeln!(w, "{},{},{},{},{}", h.epoch, h.train_loss, h.train_eval_loss, h.val_loss, h.val_r2)?;
        }
        Ok(())
    })?;
    write_json(&run.file("evaluation.json"), &eval)?;
    let mut m = base_manifest("train", cli, &config);
    m.options = serde_json::json!({ "train": tc, "dataset": dataset, "model": path });
    finish(&run, m, started)?;
    print_json(&serde_json::json!({ "run": run.path, "model": path, "test": eval }));
    Ok(Outcome { run: Some(run.path), infeasible: false })
}

fn cmd_select(cli: &Cli, store: &Store, model: &Path, started: Instant) -> Result<Outcome> {
    let config = load_config(cli)?;
    let scenario = config.scenario(cli.seed)?;
    let model = datastore::load_model(model)?;
    let run = store.create_run("select")?;
    let mut m = base_manifest("select", cli, &config);
    m.scenario_hash = Some(datastore::scenario_hash(&scenario));
    let sel = match select_params(&scenario, &config.grid(), &model) {
        Ok(s) => s,
        Err(e) => {
            finish(&run, m, started)?;
            return Err(e);
        }
    };
    write_with(&run.file("ranked.csv"), |w| {
        writeln!(w, "rank,n_m,r_h,r_r,r_l,feasible,slack,predicted_bit")?;
        for (i, c) in sel.ranked.iter().enumerate() {
            let p = c.params;
            writeln!(w, "{},{},{},{},{},{},{},{}", i + 1, p.n_m, p.r_h, p.r_r, p.r_l, c.feasible, c.slack, c.predicted[surrogate::dataset::BIT])?;
        }
        Ok(())
    })?;
    m.params = Some(sel.chosen.params);
    finish(&run, m, started)?;
    print_json(&serde_json::json!({ "run": run.path, "chosen": sel.chosen, "rejected": sel.rejected }));
    Ok(Outcome { run: Some(run.path), infeasible: false })
}

fn cmd_report(run: &Path) -> Result<Outcome> {
    let report = datastore::load_report(&run.join("report.json"))?;
    let mut out = std::io::stdout().lock();
    write_class_csv(&mut out, &report).map_err(|e| Error::io("<stdout>", e))?;
    Ok(Outcome { run: Some(run.to_path_buf()), infeasible: false })
}
