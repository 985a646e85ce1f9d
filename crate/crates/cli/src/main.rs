//! `tsdetect` command line.
//!
//! Exit status: 0 on success, 1 for configuration errors, 2 for runtime failures.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tsdetect::harness::{
    load_or_calibrate_psi, run_approx, run_per_experiment, run_variance_mismatch, CsvSink, PerRow, ScenarioConfig,
};
use tsdetect::interference::InterfererClass;
use tsdetect::markov::{build_full_chain, build_reduced_chain, count_unsorted_states, enumerate_full_states};
use tsdetect::perf::{calibrate_psi, complexity_example, default_psi_grid};
use tsdetect::rng::{substream, Stream};
use tsdetect::scalable::{baum_welch_refine, train};
use tsdetect::{Error, Result};

#[derive(Parser)]
#[command(name = "tsdetect", version, about = "Telegram-splitting interference detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Replace the SNR grid, comma separated dB values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    esn0_db: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run only these detectors (labels or kinds, comma separated).
    #[arg(long, value_delimiter = ',')]
    detector: Option<Vec<String>>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record per-detector CPU seconds (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

impl Overrides {
    fn apply(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(g) = &self.esn0_db {
            cfg.esn0_db = g.clone();
            cfg.sigma2_n.clear();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.detector {
            cfg.select_detectors(d)?;
        }
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        cfg.timing |= self.timing;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// PER of every configured detector over the SNR grid.
    Simulate(Overrides),
    /// PER with perturbed class variances for the MAP detectors.
    Mismatch {
        #[command(flatten)]
        common: Overrides,
        /// Relative STDs; defaults to the config's list, else 0.2,0.3,0.5.
        #[arg(long, value_delimiter = ',')]
        fraction: Option<Vec<f64>>,
    },
    /// Monte Carlo AWGN PER table of the configured code.
    CalibratePsi {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Code rate shorthand when no config is given.
        #[arg(long, default_value = "1/3")]
        rate: String,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Semi-analytic PER averaged over interference realizations.
    Approx {
        #[command(flatten)]
        common: Overrides,
        /// PER table from calibrate-psi; calibrated on the fly when absent.
        #[arg(long)]
        psi: Option<PathBuf>,
        #[arg(long)]
        realizations: Option<u64>,
    },
    /// State counts of the interference chains.
    States {
        /// Interferer length of a single class.
        #[arg(long)]
        li: Option<usize>,
        /// Lengths of several classes, comma separated.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<usize>>,
        /// Print the symbol-extended full chain as JSON.
        #[arg(long)]
        dump_chain: bool,
    },
    /// BCJR multiplication counts of the worked examples.
    Complexity {
        #[arg(long, default_value_t = 1)]
        example: u8,
    },
    /// Learns a partition model from a signal-free observation.
    TrainScalable {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        partitions: usize,
        /// SNR of the observation; defaults to the first grid point.
        #[arg(long, allow_negative_numbers = true)]
        esn0_db: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        train_length: usize,
        #[arg(long, default_value_t = 0)]
        refine_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn sink_for(path: Option<&Path>) -> Result<CsvSink> {
    CsvSink::create(path)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(o) => {
            let cfg = o.apply()?;
            let mut sink = sink_for(cfg.output.as_deref())?;
            run_per_experiment(&cfg, &mut |rows: &[PerRow]| sink.write(rows))?;
        }
        Command::Mismatch { common, fraction } => {
            let cfg = common.apply()?;
            let fractions = fraction
                .or_else(|| (!cfg.mismatch_fractions.is_empty()).then(|| cfg.mismatch_fractions.clone()))
                .unwrap_or_else(|| vec![0.2, 0.3, 0.5]);
            let mut sink = sink_for(cfg.output.as_deref())?;
            for f in fractions {
                run_variance_mismatch(&cfg, f, &mut |rows: &[PerRow]| sink.write(rows))?;
            }
        }
        Command::CalibratePsi { config, rate, trials, seed, out } => {
            let table = match config {
                Some(path) => {
                    let mut cfg = ScenarioConfig::load(&path)?;
                    if let Some(t) = trials {
                        cfg.psi.trials = t;
                    }
                    cfg.psi.table = None;
                    cfg.seed = seed;
                    load_or_calibrate_psi(&cfg)?
                }
                None => {
                    let code = tsdetect::harness::CodeChoice::Rate(rate).resolve()?;
                    calibrate_psi(&code, &default_psi_grid(), trials.unwrap_or(2000), seed)?
                }
            };
            match out {
                Some(p) => table.write_csv(std::fs::File::create(p)?)?,
                None => table.write_csv(std::io::stdout())?,
            }
        }
        Command::Approx { common, psi, realizations } => {
            let mut cfg = common.apply()?;
            if psi.is_some() {
                cfg.psi.table = psi;
            }
            if let Some(r) = realizations {
                cfg.approx_realizations = r;
            }
            cfg.validate()?;
            let table = load_or_calibrate_psi(&cfg)?;
            let mut sink = sink_for(cfg.output.as_deref())?;
            run_approx(&cfg, &table, &mut |rows: &[PerRow]| sink.write(rows))?;
        }
        Command::States { li, classes, dump_chain } => {
            let lengths = match (li, classes) {
                (Some(l), None) => vec![l],
                (None, Some(c)) if !c.is_empty() => c,
                _ => return Err(Error::Config("give exactly one of --li or --classes".into())),
            };
            let classes = lengths
                .iter()
                .map(|&l| InterfererClass::with_arrival_prob(l, 1.0, 0.5))
                .collect::<Result<Vec<_>>>()?;
            for &l in &lengths {
                println!("L_I = {l}");
                match enumerate_full_states(l) {
                    Ok(s) => println!("  sorted states: {}", s.len()),
                    Err(e) => println!("  sorted states: {} ({e})", 1u128 << l.min(127)),
                }
                println!("  unsorted states: {}", count_unsorted_states(l));
            }
            let total: usize = lengths.iter().sum();
            let full = (1u128 << total.min(126)) * 2;
            let reduced: u128 = 2 * lengths.iter().map(|&l| l as u128 + 1).product::<u128>();
            println!("symbol-extended full-state chain: {full}");
            println!("symbol-extended reduced-state chain: {reduced}");
            if dump_chain {
                let chain = if lengths.len() == 1 {
                    build_full_chain(&classes, 1.0)?
                } else {
                    build_reduced_chain(&classes, 1.0)?
                };
                println!("{}", serde_json::to_string_pretty(&chain.to_json())?);
            }
        }
        Command::Complexity { example } => {
            println!("example {example} (window 36)");
            println!("{:<10} {:>10} {:>14} {:>14}", "detector", "states", "exact", "3*L*S^2");
            for row in complexity_example(example)? {
                println!(
                    "{:<10} {:>10} {:>14.3e} {:>14.2e}",
                    row.detector, row.states, row.complexity.exact, row.complexity.asymptotic
                );
            }
        }
        Command::TrainScalable { config, partitions, esn0_db, train_length, refine_iters, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let point = cfg.grid()?[0];
            let db = esn0_db.unwrap_or(point.esn0_db);
            let sigma2 = 10f64.powf(-db / 10.0);
            let classes = match &cfg.ring {
                Some(r) => tsdetect::harness::generate_ring_scenario(r, &mut substream(cfg.seed, 0, Stream::Ring))?,
                None => cfg.classes.clone(),
            };
            let obs = tsdetect::interference::observe_silence(
                train_length,
                &classes,
                sigma2,
                &mut substream(cfg.seed, u64::MAX, Stream::Training),
            )?;
            let mut pm = train(&obs, partitions)?;
            if refine_iters > 0 {
                pm = baum_welch_refine(&pm, &obs, refine_iters, false)?.model;
            }
            pm.save(&out)?;
            println!("{} partitions, variances {:?}", pm.partitions(), pm.state_variance);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
