//! Command-line surface: simulate / verify / probe / report.
//!
//! Exit codes: 0 success, 1 validation or config error, 2 solver failure
//! (degeneracy or non-convergence), 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use tlens::config::{parse_config, render_document};
use tlens::coupled::{run_simulation, SimConfig};
use tlens::energy::{certify_gronwall_bound, gronwall_check};
use tlens::error::{Result, SimError};
use tlens::io;
use tlens::verify;

#[derive(Parser)]
#[command(
    name = "tlens",
    version,
    about = "Coupled nonlinear ultrasound heating simulator with thermal lensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for output files (created if missing).
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for multi-run studies.
    #[arg(long, global = true, default_value_t = 4)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a config file and write series + snapshots.
    Simulate { config: PathBuf },
    /// Run verification workflows against a config.
    Verify {
        #[arg(value_enum)]
        what: VerifyKind,
        config: PathBuf,
    },
    /// Sampled probes of model structure.
    Probe {
        #[arg(value_enum)]
        what: ProbeKind,
        config: PathBuf,
        /// Perturbation size for the dependence probe.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Summarize an energy series CSV.
    Report {
        series: PathBuf,
        /// Pass/fail cap for the fitted Gronwall constant.
        #[arg(long, default_value_t = 1e9)]
        cap: f64,
    },
    /// Parse a config, apply defaults, and print the canonical rendering.
    ShowConfig { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    /// Manufactured-solution error at the configured resolution.
    Mms,
    /// Single-mode comparisons against closed-form oracles.
    Modal,
    /// Refinement study with fitted orders.
    Convergence,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeKind {
    /// Sampled Lipschitz constant of the absorption map on two grids.
    Lipschitz,
    /// Continuous dependence on the initial data.
    Dependence,
}

fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (cfg, _) = parse_config(&text)?;
    Ok(cfg)
}

fn cmd_simulate(cfg: &SimConfig, out_dir: &Path, prefix: &str, quiet: bool) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|source| SimError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let started = Instant::now();
    let out = run_simulation(cfg);
    let elapsed = started.elapsed().as_secs_f64();

    let series_path = out_dir.join(format!("{prefix}_series.csv"));
    io::write_timeseries(&out.reports, &series_path)?;
    if let Some(last) = out.snapshots.last() {
        io::write_snapshot(&last.p, &out_dir.join(format!("{prefix}_final_p.tlns")))?;
        io::write_snapshot(
            &last.theta,
            &out_dir.join(format!("{prefix}_final_theta.tlns")),
        )?;
    }
    let ball = out.diagnostics.ball;
    io::write_sidecar(
        &out_dir.join(format!("{prefix}_meta.toml")),
        &[
            ("tool", format!("tlens {}", env!("CARGO_PKG_VERSION"))),
            ("steps_completed", out.diagnostics.steps_completed.to_string()),
            ("runtime_seconds", format!("{elapsed:.3}")),
            ("min_alpha", format!("{:.6e}", out.diagnostics.min_alpha)),
            ("clamp_events", out.diagnostics.clamp_events.to_string()),
            ("gamma_observed", format!("{:.6e}", ball.gamma_observed)),
            ("smallness_margin", format!("{:.6e}", ball.margin)),
            (
                "note",
                "H^-1 norms in D_theta and Fterm are replaced by L2 upper surrogates".to_string(),
            ),
        ],
    )?;

    if !quiet {
        println!(
            "completed {} steps to t = {:.6e} s in {:.2} s",
            out.diagnostics.steps_completed,
            out.snapshots.last().map(|s| s.t).unwrap_or(0.0),
            elapsed
        );
        println!(
            "min(1 - 2k(theta)p) = {:.6e}, clamp events = {}",
            out.diagnostics.min_alpha, out.diagnostics.clamp_events
        );
        println!(
            "gamma_observed = {:.6e}, R1-style = {:.6e}, R2-style = {:.6e}, margin = {:.4}",
            ball.gamma_observed, ball.r1_style_norm, ball.r2_style_norm, ball.margin
        );
        let cap = cfg.gamma_cap_fraction / (2.0 * cfg.medium.k1());
        if ball.gamma_observed > cap {
            println!(
                "warning: gamma_observed exceeds {:.3} of the non-degeneracy cap 1/(2 k1)",
                cfg.gamma_cap_fraction
            );
        }
        println!("series written to {}", series_path.display());
    }
    match out.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_verify_modal(cfg: &SimConfig, quiet: bool) -> Result<()> {
    // run the heat mode over one e-fold of its own decay
    let kappa_h = cfg.grid.stencil_eigenvalue([1, 1]);
    let rate = (cfg.medium.kappa_a * kappa_h
        + cfg.medium.rho_b * cfg.medium.cap_b * cfg.medium.perfusion)
        / (cfg.medium.rho_a * cfg.medium.cap_a);
    let t_heat = 1.0 / rate;
    let base_dt = t_heat / 200.0;
    let dts = [base_dt * 4.0, base_dt * 2.0, base_dt];
    let heat = verify::heat_modal_check(cfg.grid, &cfg.medium, t_heat, &dts)?;
    if !quiet {
        for (dt, e) in &heat.errors {
            println!("heat modal: dt = {dt:.3e}  rel error = {e:.3e}");
        }
    }
    println!(
        "heat modal: finest error = {:.3e}, temporal order = {:.2}",
        heat.finest_error, heat.temporal_order
    );

    let q_const = tlens::material::q_of_theta(&cfg.law, cfg.medium.theta_a);
    let kappa = cfg.grid.stencil_eigenvalue([1, 1]);
    let period = 2.0 * std::f64::consts::PI / (q_const * kappa).sqrt();
    let t_end = 3.0 * period;
    let base_dt = period / 400.0;
    let wave_dts = [base_dt * 4.0, base_dt * 2.0, base_dt];
    let under = verify::wave_modal_check(cfg.grid, q_const, cfg.medium.b, t_end, &wave_dts)?;
    println!(
        "wave modal (underdamped b = {:.3e}): finest error = {:.3e}, temporal order = {:.2}",
        cfg.medium.b, under.finest_error, under.temporal_order
    );
    let b_over = 3.0 * (q_const / kappa).sqrt();
    let over = verify::wave_modal_check(cfg.grid, q_const, b_over, t_end, &wave_dts)?;
    println!(
        "wave modal (overdamped b = {b_over:.3e}): finest error = {:.3e}, temporal order = {:.2}",
        over.finest_error, over.temporal_order
    );
    Ok(())
}

fn cmd_verify_convergence(cfg: &SimConfig, threads: usize) -> Result<()> {
    let ms = match &cfg.forcing {
        tlens::coupled::Forcing::Manufactured(ms) => *ms,
        tlens::coupled::Forcing::None => {
            // default coupled manufactured solution at small amplitude
            default_mms(cfg)
        }
    };
    let mut base = cfg.clone();
    base.forcing = tlens::coupled::Forcing::Manufactured(ms);
    let levels = [(63usize, cfg.dt), (127, cfg.dt), (255, cfg.dt)];
    let study = verify::convergence_study(&base, &levels, verify::StudyAxis::Spatial, threads)?;
    for l in &study.levels {
        println!(
            "n = {:>4}  dt = {:.3e}  error_p = {:.6e}  error_theta = {:.6e}",
            l.n, l.dt, l.error_p, l.error_theta
        );
    }
    println!("spatial order = {:.3}", study.order);
    Ok(())
}

fn default_mms(cfg: &SimConfig) -> tlens::mms::ManufacturedSolution {
    let k1 = cfg.medium.k1();
    // beta = 0 has no pressure nonlinearity; verify the heat path alone
    let p_amp = if k1 > 0.0 { 1e-3 / (2.0 * k1) } else { 0.0 };
    let q_ambient = tlens::material::q_of_theta(&cfg.law, 0.0);
    let kappa = (std::f64::consts::PI / cfg.grid.extent(0)).powi(2);
    let natural = (q_ambient * kappa).sqrt();
    tlens::mms::ManufacturedSolution {
        p_amp,
        p_modes: [1, 1],
        p_freq: 0.7 * natural,
        theta_amp: 5.0,
        theta_modes: [2, 1],
        theta_freq: std::f64::consts::PI / cfg.t_end,
    }
}

fn cmd_verify_mms(cfg: &SimConfig) -> Result<()> {
    let mut base = cfg.clone();
    if matches!(base.forcing, tlens::coupled::Forcing::None) {
        base.forcing = tlens::coupled::Forcing::Manufactured(default_mms(cfg));
    }
    let (err_p, err_theta) = verify::mms_errors(&base)?;
    println!("mms final-time errors: p = {err_p:.6e}, theta = {err_theta:.6e}");
    Ok(())
}

fn cmd_probe_lipschitz(cfg: &SimConfig) -> Result<()> {
    let coarse = cfg.grid;
    let fine = if coarse.dims() == 1 {
        tlens::grid::Grid::new_1d(coarse.extent(0), coarse.n(0) * 2 + 1)?
    } else {
        tlens::grid::Grid::new_2d(
            [coarse.extent(0), coarse.extent(1)],
            [coarse.n(0) * 2 + 1, coarse.n(1) * 2 + 1],
        )?
    };
    let model = &cfg.absorption.model;
    let r_coarse = verify::lipschitz_ratio_study(model, coarse, 100, 8, 42)?;
    let r_fine = verify::lipschitz_ratio_study(model, fine, 100, 8, 42)?;
    let drift = (r_fine - r_coarse).abs() / r_coarse.max(1e-300);
    println!(
        "lipschitz ratio: coarse = {r_coarse:.6e}, fine = {r_fine:.6e}, drift = {:.2}%",
        drift * 100.0
    );
    println!(
        "dt of completed averages: identically zero (time-averaged absorption is constant after its interval)"
    );
    Ok(())
}

fn cmd_probe_dependence(cfg: &SimConfig, delta: f64) -> Result<()> {
    let deltas = [0.0, delta, 2.0 * delta];
    let probe = verify::continuous_dependence_probe(cfg, &deltas)?;
    for (d, norm, ratio) in &probe.entries {
        println!("delta = {d:.3e}  diff norm = {norm:.6e}  norm/delta = {ratio:.6e}");
    }
    if probe.entries.len() == 3 {
        let n1 = probe.entries[1].1;
        let n2 = probe.entries[2].1;
        if n1 > 0.0 {
            println!("norm(2 delta) / norm(delta) = {:.3}", n2 / n1);
        }
    }
    Ok(())
}

fn cmd_report(series_path: &Path, cap: f64) -> Result<()> {
    let series = io::read_timeseries(series_path)?;
    if series.is_empty() {
        println!("empty series");
        return Ok(());
    }
    let first = series.first().unwrap();
    let last = series.last().unwrap();
    println!(
        "{} reports spanning t = {:.6e} .. {:.6e} s",
        series.len(),
        first.t,
        last.t
    );
    println!(
        "acoustic energy: E(0) = {:.6e}, E(end) = {:.6e}, max = {:.6e}",
        first.e_total(),
        last.e_total(),
        series.iter().map(|r| r.e_total()).fold(0.0f64, f64::max)
    );
    println!(
        "heat energy: E(0) = {:.6e}, E(end) = {:.6e}",
        first.e_theta, last.e_theta
    );
    let min_alpha = series.iter().map(|r| r.min_alpha).fold(f64::INFINITY, f64::min);
    println!("min(1 - 2k(theta)p) over reports = {min_alpha:.6e}");
    let fit = gronwall_check(&series, cap);
    println!(
        "gronwall fit: C = {:.6e}, passes = {}, worst step = {}",
        fit.fitted_c, fit.passes, fit.worst_step
    );
    let (holds, worst) = certify_gronwall_bound(&series, fit.fitted_c);
    println!("integrated bound holds = {holds} (worst ratio {worst:.3e})");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = load_config(config)?;
            let text = std::fs::read_to_string(config).map_err(|source| SimError::Io {
                path: config.clone(),
                source,
            })?;
            let (_, doc) = parse_config(&text)?;
            cmd_simulate(&cfg, &cli.output_dir, &doc.output.prefix, cli.quiet)
        }
        Command::Verify { what, config } => {
            let cfg = load_config(config)?;
            match what {
                VerifyKind::Modal => cmd_verify_modal(&cfg, cli.quiet),
                VerifyKind::Mms => cmd_verify_mms(&cfg),
                VerifyKind::Convergence => cmd_verify_convergence(&cfg, cli.threads),
            }
        }
        Command::Probe {
            what,
            config,
            delta,
        } => {
            let cfg = load_config(config)?;
            match what {
                ProbeKind::Lipschitz => cmd_probe_lipschitz(&cfg),
                ProbeKind::Dependence => cmd_probe_dependence(&cfg, *delta),
            }
        }
        Command::Report { series, cap } => cmd_report(series, *cap),
        Command::ShowConfig { config } => {
            let text = std::fs::read_to_string(config).map_err(|source| SimError::Io {
                path: config.clone(),
                source,
            })?;
            let (_, doc) = parse_config(&text)?;
            print!("{}", render_document(&doc));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
