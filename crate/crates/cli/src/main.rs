mod oracles;
mod plot;

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ransig_core::netmodel::Position;
use ransig_core::orchestrator::{
    compare_schemes, design_time_cycle, read_training_log, run, stream_seed, DesignContext, Mode,
    RunConfig,
};
use ransig_core::sigraph::{
    enumerate_action_space, import_action_space, BsAssignment, OperationCombo, SigModel,
};
use ransig_core::simkernel::{MetricCsvWriter, NetworkState, SimConfig, Simulator};

#[derive(Parser)]
#[command(name = "ransig", version, about = "Energy-saving RAN experiments with a SIG-assisted DQN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulator under one fixed combo, no agent.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Fixed combo, e.g. `53@5;sleep;50@25;52@15`; all BSs awake at
        /// the highest power and lowest tilt by default.
        #[arg(long)]
        combo: Option<String>,
    },
    /// Train the agent.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// One design-time pass over a training log.
    DesignCycle {
        #[command(flatten)]
        run: RunArgs,
        /// Training log to read samples from.
        #[arg(long)]
        log: PathBuf,
        /// Action space to filter; the full enumeration by default.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Paired comparison of schemes over the configured seeds.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Modes to compare, comma separated; all three by default.
        #[arg(long, value_delimiter = ',')]
        modes: Vec<Mode>,
        /// Trailing steps the comparison averages over.
        #[arg(long, default_value_t = 100)]
        final_steps: usize,
    },
    /// Check the model formulas against independent computations.
    Validate,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Root seed; replaces the configured seed list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    episodes: Option<u32>,
    /// Steps per episode.
    #[arg(long)]
    steps: Option<u32>,
    /// Render SVG curves from the training logs.
    #[arg(long)]
    emit_plots: bool,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config).with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(e) = self.episodes {
            cfg.episodes = e;
        }
        if let Some(s) = self.steps {
            cfg.steps_per_episode = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn simulate(args: &RunArgs, combo: Option<&str>) -> Result<()> {
    let cfg = args.load()?;
    let seed = cfg.seeds[0];
    let net = NetworkState::new(cfg.load_scenario()?, cfg.load_cqi_table()?)?;
    let positions: Vec<Position> = net.bss.iter().map(|b| b.position).collect();
    let combo = match combo {
        Some(text) => OperationCombo::parse_compact(text)?,
        None => {
            let g = &cfg.action_space.granularities;
            let p = g.tx_powers_dbm.iter().copied().filter(|&p| p != 0.0).fold(f64::NEG_INFINITY, f64::max);
            let t = g.tilts_deg.iter().copied().filter(|&t| t != 0.0).fold(f64::INFINITY, f64::min);
            OperationCombo {
                bs: (0..positions.len()).map(|id| BsAssignment::awake(id, p, t)).collect(),
            }
        }
    };
    let sim_cfg = SimConfig {
        ttis_per_step: cfg.ttis_per_step,
        steps_per_episode: cfg.steps_per_episode,
        window_len: cfg.tti_window_len,
        bounds: cfg.bounds,
        record_events: false,
    };
    let mut sim = Simulator::new(net, ChaCha8Rng::seed_from_u64(stream_seed(seed, "traffic")), sim_cfg);
    sim.apply_configs(&combo.to_configs(&positions)?)?;
    let dir = cfg.out_dir.join("simulate").join(format!("seed-{seed}"));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("metrics.csv");
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = MetricCsvWriter::new(BufWriter::new(file))?;
    let steps = u64::from(cfg.episodes) * u64::from(cfg.steps_per_episode);
    let (mut e, mut c, mut t) = (0.0, 0.0, 0.0);
    for _ in 0..steps {
        let (ttis, avg) = sim.run_step()?;
        for s in &ttis {
            w.write(s)?;
        }
        e += avg.energy_w;
        c += avg.throughput_bps;
        t += avg.delay_ttis;
    }
    w.into_inner().flush()?;
    let n = steps as f64;
    println!("combo {}", combo.compact());
    println!("{steps} steps, {} TTIs -> {}", steps * u64::from(cfg.ttis_per_step), path.display());
    println!("mean energy {:.2} W, throughput {:.0} bit/s, delay {:.4} TTI", e / n, c / n, t / n);
    Ok(())
}

fn train(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    for &seed in &cfg.seeds {
        let r = run(&cfg, cfg.mode, seed)?;
        let [e, c, t] = r.final_averages(100);
        println!(
            "{} seed {seed}: {} steps, {} updates, final space {} combos",
            cfg.mode,
            r.rewards.len(),
            r.updates,
            r.space_sizes.last().copied().unwrap_or(0)
        );
        println!(
            "  last 100 steps: energy {e:.2} W, throughput {c:.0} bit/s, delay {t:.4} TTI, reward {:.4}",
            r.final_reward(100)
        );
        match r.increase_phase_step() {
            Some(s) => println!("  cumulative reward turns upward at step {s}"),
            None => println!("  cumulative reward never turns upward"),
        }
        for cyc in &r.cycles {
            println!(
                "  cycle at {}:{} sg_score {:.3} checked {} space {} -> {} ({:.3} s)",
                cyc.episode, cyc.step, cyc.sg_score, cyc.checked, cyc.space_before, cyc.space_after, cyc.latency_s
            );
        }
        println!("  outputs in {}", r.dir.display());
        if args.emit_plots {
            for p in plot::emit_plots(&r.training_log)? {
                println!("  plot {}", p.display());
            }
        }
    }
    Ok(())
}

fn design_cycle(args: &RunArgs, log: &Path, space: Option<&Path>) -> Result<()> {
    let cfg = args.load()?;
    let scenario = cfg.load_scenario()?;
    let samples = read_training_log(log)?;
    if samples.is_empty() {
        bail!("{} holds no steps", log.display());
    }
    let combos = match space {
        Some(p) => import_action_space(p)?,
        None => {
            let a = &cfg.action_space;
            enumerate_action_space(scenario.n_bs, &a.granularities, a.cap, a.sample_size, stream_seed(cfg.seeds[0], "sampling"))?.combos
        }
    };
    let rules = cfg.load_rules()?;
    let ctx = DesignContext {
        rules: &rules,
        granularities: &cfg.action_space.granularities,
        thresholds: cfg.conflict.thresholds,
        alpha: cfg.conflict.alpha,
        desired: cfg.desired_targets(&scenario),
        recent_steps: cfg.recent_steps,
        identify_conflicts: cfg.mode == Mode::Assisted,
    };
    let tail = &samples[samples.len().saturating_sub(cfg.design_window_steps)..];
    let mut model = SigModel::new(cfg.sg_threshold);
    std::fs::create_dir_all(&cfg.out_dir)?;
    let out = cfg.out_dir.join("action_space.json");
    let stamp = format!("design-cycle:{}", tail.len());
    let outcome = design_time_cycle(&ctx, &mut model, tail, &combos, Some((&out, &stamp)))?;
    let snapshot = serde_json::json!({ "model": &model, "outcome": &outcome });
    let snap_path = cfg.out_dir.join("sig_snapshot.json");
    std::fs::write(&snap_path, serde_json::to_vec_pretty(&snapshot)?)?;
    println!("samples {} sg_score {:.4} threshold {}", tail.len(), outcome.sg_score, cfg.sg_threshold);
    if let Some(report) = &outcome.report {
        for p in &report.objective_pairs {
            let rho = p.rho.map(|r| format!("{r:.4}")).unwrap_or_else(|| "-".into());
            println!("  {:?}-{:?} rho {rho} level {:?}", p.a, p.b, p.level);
        }
        let conflicting = report.operation_pairs.iter().filter(|p| p.conflicting).count();
        println!("  operation pairs {} conflicting {conflicting}", report.operation_pairs.len());
        println!("  triggered {:?} relaxed {:?}", outcome.triggered, outcome.relaxed);
    } else {
        println!("  pass: no conflict identification");
    }
    println!("space {} -> {}", outcome.space_before, outcome.space_after);
    if let Some(p) = &outcome.exported {
        println!("exported {}", p.display());
    }
    println!("latency {:.4} s", outcome.latency_s);
    println!("snapshot {}", snap_path.display());
    Ok(())
}

fn compare(args: &RunArgs, modes: &[Mode], final_steps: usize) -> Result<()> {
    let cfg = args.load()?;
    let modes = if modes.is_empty() { Mode::ALL.to_vec() } else { modes.to_vec() };
    let cmp = compare_schemes(&cfg, &modes, final_steps)?;
    print!("{}", cmp.summary_table());
    println!("comparison written to {}", cmp.csv.display());
    if args.emit_plots {
        for &mode in &modes {
            for &seed in &cfg.seeds {
                plot::emit_plots(&cfg.run_dir(mode, seed).join("training_log.csv"))?;
            }
        }
    }
    Ok(())
}

fn validate() -> Result<()> {
    let start = Instant::now();
    let rows = oracles::run_all();
    println!("{:<22} {:<28} {:>22} {:>22} {:>10}  result", "function", "case", "expected", "got", "rel_err");
    for r in &rows {
        println!(
            "{:<22} {:<28} {:>22.12} {:>22.12} {:>10.2e}  {}",
            r.function,
            r.case,
            r.expected,
            r.got,
            r.rel_err(),
            if r.pass() { "PASS" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.pass()).count();
    println!(
        "{} cases, {failed} failed, tolerance {:e} relative, {:.3} s",
        rows.len(),
        oracles::TOLERANCE,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        bail!("{failed} oracle cases failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = match &cli.command {
        Command::Simulate { run, combo } => simulate(run, combo.as_deref()),
        Command::Train { run } => train(run),
        Command::DesignCycle { run, log, space } => design_cycle(run, log, space.as_deref()),
        Command::Compare { run, modes, final_steps } => compare(run, modes, *final_steps),
        Command::Validate => validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
