use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use oseen_core::diagnostics::{decay_fit, estimate_ratio_suite, oscillator_spectrum, transport_invariant_report, CorpusConfig, Suite};
use oseen_core::evolution::{initial_state, self_similar_to_physical, simulate_with};
use oseen_core::io::{
    emit_plot_data, load_checkpoint, load_checkpoint_for, parse_config, save_checkpoint, write_physical_csv, PlotKind,
    RunDir, RunStore,
};
use oseen_core::picard::picard_solve;
use oseen_core::{make_grid, Error, PerturbationState, RunConfig};

#[derive(Parser)]
#[command(name = "oseen", version, about = "Oseen vortex stability lab for weakly inhomogeneous 2D flows")]
struct Cli {
    /// Directory holding run directories.
    #[arg(long, global = true, default_value = "runs")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full perturbation system and record diagnostics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Start from this checkpoint manifest instead of the configured initial data.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the iterative (frozen-coefficient) scheme to convergence.
    Iterate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        kmax: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Estimate-ratio and transport-law checks on a seeded corpus.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corpus size.
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Lowest eigenvalues of the conjugated oscillator.
    Spectrum {
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long, default_value_t = 16.0)]
        half_length: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Fit an exponential rate to the weighted L2 norm of a stored run.
    DecayFit {
        #[arg(long)]
        run: String,
        /// Fit window `a,b`; defaults to the run's configured window.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Write original-variable fields of a stored run at a checkpointed tau.
    ToPhysical {
        #[arg(long)]
        run: String,
        #[arg(long)]
        tau: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Operators,
    Pressure,
    Transport,
    All,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected a,b")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    if !(a < b) {
        return Err("window must be increasing".into());
    }
    Ok((a, b))
}

/// Outcome of a command: a failed check is a validation failure.
enum Outcome {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let store = RunStore::new(&cli.store);
    let result = match cli.command {
        Command::Simulate { config, resume } => simulate(&store, &config, resume.as_deref()),
        Command::Iterate { config, kmax, tol } => iterate(&store, &config, kmax, tol),
        Command::Verify { suite, seed, count } => verify(&store, suite, seed, count),
        Command::Spectrum { n, k, half_length, tol } => spectrum(&store, n, k, half_length, tol),
        Command::DecayFit { run, window } => decay(&store, &run, window),
        Command::ToPhysical { run, tau } => to_physical(&store, &run, tau),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn print_json(v: &Value) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn simulate(store: &RunStore, config: &Path, resume: Option<&Path>) -> Result<Outcome, Error> {
    let cfg = parse_config(config)?;
    let grid = make_grid(cfg.n, cfg.half_length)?;
    let start = match resume {
        Some(p) => {
            let ck = load_checkpoint_for(p, &grid)?;
            if ck.alpha != cfg.alpha {
                return Err(Error::Config {
                    field: "alpha".into(),
                    message: format!("checkpoint has alpha = {}, config {}", ck.alpha, cfg.alpha),
                });
            }
            ck.state
        }
        None => initial_state(&grid, &cfg)?,
    };
    let run = store.create(&std::fs::read(config)?)?;
    eprintln!("run {}", run.id);
    let ck_dir = run.checkpoints_dir();
    let mut writer = run.diagnostics_writer()?;
    let mut rows = 0usize;
    let mut last_saved = None;
    let result = simulate_with(&cfg, start, |state, rec| {
        writer.push(rec)?;
        if cfg.checkpoint_every > 0 && rows % cfg.checkpoint_every == 0 {
            save_checkpoint(state, cfg.alpha, &ck_dir, &format!("row{rows:06}"))?;
            last_saved = Some(rows);
        }
        rows += 1;
        Ok(())
    });
    drop(writer);
    let (traj, error) = match result {
        Ok(t) => (t, None),
        Err(a) => (a.partial, Some(a.error)),
    };
    if rows > 0 && last_saved != Some(rows - 1) {
        save_checkpoint(&traj.final_state, cfg.alpha, &ck_dir, &format!("row{:06}", rows - 1))?;
    }
    let series: Vec<(f64, f64)> = traj.records.iter().map(|r| (r.tau, r.w_l2w)).collect();
    let fit = decay_fit(&series, (cfg.fit_window[0], cfg.fit_window[1])).ok();
    let kind = if cfg.plot { PlotKind::Decay } else { PlotKind::Table };
    emit_plot_data(&traj.records, kind, &run.path, "decay", fit.as_ref())?;
    let max_mean = traj.records.iter().map(|r| r.mean.abs()).fold(0.0, f64::max);
    let report = json!({
        "run": run.id,
        "status": if error.is_none() { "completed" } else { "aborted" },
        "error": error.as_ref().map(|e| e.to_string()),
        "steps": traj.steps,
        "rows": traj.records.len(),
        "final_tau": traj.final_state.tau,
        "max_abs_mean": max_mean,
        "fit": fit,
        "k_hat": fit.map(|f| f.k_hat(cfg.epsilon)),
    });
    run.write_report(&report)?;
    print_json(&report)?;
    match error {
        Some(e) => Err(e),
        None => Ok(Outcome::Ok),
    }
}

fn iterate(store: &RunStore, config: &Path, kmax: usize, tol: f64) -> Result<Outcome, Error> {
    let cfg = parse_config(config)?;
    let run = store.create(&std::fs::read(config)?)?;
    eprintln!("run {}", run.id);
    let outcome = picard_solve(&cfg, kmax, tol);
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            run.write_report(&json!({ "run": run.id, "status": "aborted", "error": e.to_string() }))?;
            return Err(e);
        }
    };
    let mut csv = String::from("k,sup_delta_b,sup_delta_w,sup_delta\n");
    for h in &outcome.history {
        csv.push_str(&format!("{},{},{},{}\n", h.index, h.sup_delta_b, h.sup_delta_w, h.sup_delta));
    }
    std::fs::write(run.path.join("iterates.csv"), csv)?;
    let report = json!({
        "run": run.id,
        "status": "completed",
        "converged": outcome.converged,
        "iterates": outcome.history.len(),
        "history": outcome.history,
    });
    run.write_report(&report)?;
    print_json(&json!({
        "run": run.id,
        "converged": outcome.converged,
        "iterates": outcome.history.len(),
        "last_sup_delta": outcome.history.last().map(|h| h.sup_delta),
    }))?;
    Ok(if outcome.converged { Outcome::Ok } else { Outcome::CheckFailed })
}

/// Short paired runs for the density transport laws.
fn transport_check(seed: u64) -> Result<Value, Error> {
    let mut cfg = RunConfig::new(1.0, 1e-2);
    cfg.n = 128;
    cfg.t_end = 1.0;
    cfg.seed = seed;
    cfg.shape = oseen_core::Shape::RandomBandlimited;
    let collect = |cfg: &RunConfig| -> Result<Vec<PerturbationState>, Error> {
        let grid = make_grid(cfg.n, cfg.half_length)?;
        let mut states = Vec::new();
        simulate_with(cfg, initial_state(&grid, cfg)?, |s, _| {
            states.push(s.clone());
            Ok(())
        })?;
        Ok(states)
    };
    let a = collect(&cfg)?;
    let mut other = cfg.clone();
    other.density_scale = 1.1;
    let b = collect(&other)?;
    let report = transport_invariant_report(&a, &[2.0, 4.0], Some(&b))?;
    let pass = report.laws.iter().all(|l| l.max_relative_drift < 1e-2)
        && report.paired.as_ref().is_some_and(|p| p.empirical_constant.is_finite());
    Ok(json!({ "pass": pass, "report": report }))
}

fn verify(store: &RunStore, suite: SuiteArg, seed: u64, count: usize) -> Result<Outcome, Error> {
    let estimates = match suite {
        SuiteArg::Transport => None,
        SuiteArg::Operators | SuiteArg::Pressure | SuiteArg::All => {
            let corpus = CorpusConfig {
                seed,
                count,
                suite: match suite {
                    SuiteArg::Operators => Suite::Operators,
                    SuiteArg::Pressure => Suite::Pressure,
                    _ => Suite::All,
                },
                ..CorpusConfig::default()
            };
            Some(estimate_ratio_suite(&corpus)?)
        }
    };
    let transport = match suite {
        SuiteArg::Transport | SuiteArg::All => Some(transport_check(seed)?),
        _ => None,
    };
    let pass = estimates.as_ref().is_none_or(|s| s.pass)
        && transport.as_ref().is_none_or(|t| t["pass"] == Value::Bool(true));
    let name = match suite {
        SuiteArg::Operators => "operators",
        SuiteArg::Pressure => "pressure",
        SuiteArg::Transport => "transport",
        SuiteArg::All => "all",
    };
    let summary = json!({
        "suite": name,
        "seed": seed,
        "pass": pass,
        "estimates": estimates,
        "transport": transport,
    });
    std::fs::create_dir_all(store.root())?;
    std::fs::write(
        store.root().join(format!("verify-{name}-seed{seed}.json")),
        serde_json::to_string_pretty(&summary)?,
    )?;
    print_json(&summary)?;
    Ok(if pass { Outcome::Ok } else { Outcome::CheckFailed })
}

fn spectrum(store: &RunStore, n: usize, k: usize, half_length: f64, tol: f64) -> Result<Outcome, Error> {
    let grid = make_grid(n, half_length)?;
    let s = oscillator_spectrum(&grid, k, tol)?;
    let out = json!({
        "n": n,
        "half_length": half_length,
        "eigenvalues": s.eigenvalues,
        "residuals": s.residuals,
        "sweeps": s.sweeps,
        "ground_cosine": s.ground_cosine(),
    });
    std::fs::create_dir_all(store.root())?;
    std::fs::write(
        store.root().join(format!("spectrum-n{n}-k{k}.json")),
        serde_json::to_string_pretty(&out)?,
    )?;
    print_json(&out)?;
    Ok(Outcome::Ok)
}

fn decay(store: &RunStore, run: &str, window: Option<(f64, f64)>) -> Result<Outcome, Error> {
    let run: RunDir = store.open(run)?;
    let cfg = run.read_config()?;
    let records = run.read_diagnostics()?;
    let window = window.unwrap_or((cfg.fit_window[0], cfg.fit_window[1]));
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.tau, r.w_l2w)).collect();
    let fit = decay_fit(&series, window)?;
    emit_plot_data(&records, PlotKind::Decay, &run.path, "decay", Some(&fit))?;
    let out = json!({
        "run": run.id,
        "window": [window.0, window.1],
        "gamma_hat": fit.gamma,
        "k_hat": fit.k_hat(cfg.epsilon),
        "r_squared": fit.r_squared,
        "samples": fit.samples,
    });
    std::fs::write(run.path.join("decay_fit.json"), serde_json::to_string_pretty(&out)?)?;
    print_json(&out)?;
    Ok(Outcome::Ok)
}

fn to_physical(store: &RunStore, run: &str, tau: f64) -> Result<Outcome, Error> {
    let run = store.open(run)?;
    let checkpoints = run.checkpoints()?;
    let Some((path, _)) = checkpoints.iter().find(|(_, m)| (m.tau - tau).abs() <= 1e-9 * tau.abs().max(1.0)) else {
        let have: Vec<f64> = checkpoints.iter().map(|(_, m)| m.tau).collect();
        return Err(Error::Config {
            field: "tau".into(),
            message: format!("no checkpoint at tau = {tau}; available {have:?}"),
        });
    };
    let ck = load_checkpoint(path)?;
    let phys = self_similar_to_physical(&ck.state, ck.alpha)?;
    let file = run.path.join(format!("physical_tau{tau}.csv"));
    write_physical_csv(&phys, &file)?;
    print_json(&json!({
        "run": run.id,
        "tau": ck.state.tau,
        "t": phys.t,
        "file": file.display().to_string(),
        "omega_l1": phys.lp_norm(&phys.omega, 1.0),
        "omega_l2": phys.lp_norm(&phys.omega, 2.0),
    }))?;
    Ok(Outcome::Ok)
}
