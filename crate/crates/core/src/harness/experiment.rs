//! Monte Carlo PER experiments.
//!
//! Every trial draws from substreams of the master seed keyed by the trial
//! index, so results do not depend on scheduling or batching. Channel draws
//! are standard normals scaled by the noise level, which makes all grid
//! points and detectors see the same underlying randomness.

use super::config::{DetectorSpec, GridPoint, ScenarioConfig};
use super::ring::generate_ring_scenario;
use crate::detector::{detect_const_var, detect_erasure, detect_genie, detect_map};
use crate::fec::{encode, viterbi_decode, CodeSpec, Codeword, InfoBlock, Interleaver};
use crate::interference::{observe_silence, synthesize, ChannelRealization, InterfererClass};
use crate::markov::{build_full_chain, build_reduced_chain, MarkovChainModel};
use crate::perf::{approx_per, calibrate_psi, default_psi_grid, sinr_trace, PsiTable};
use crate::rng::{substream, substream_keyed, Stream};
use crate::scalable::{baum_welch_refine, build_scalable_chain, train, train_erasure_model};
use crate::telegram::{reassemble, split, FrameSpec};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::borrow::Cow;
use std::time::Instant;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_964;

/// Mismatched variances never drop below this fraction of the true value.
pub const MISMATCH_FLOOR: f64 = 0.1;

/// Wilson score interval for `errors` out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One detector at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerRow {
    pub detector: String,
    pub esn0_db: f64,
    pub per: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: u64,
    pub seconds: f64,
    #[serde(skip)]
    pub errors: u64,
}

impl PerRow {
    fn counted(detector: String, esn0_db: f64, errors: u64, trials: u64, seconds: f64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(errors, trials);
        PerRow { detector, esn0_db, per: errors as f64 / trials as f64, ci_lo, ci_hi, trials, seconds, errors }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerResult {
    pub rows: Vec<PerRow>,
}

impl PerResult {
    pub fn get(&self, detector: &str, esn0_db: f64) -> Option<&PerRow> {
        self.rows.iter().find(|r| r.detector == detector && (r.esn0_db - esn0_db).abs() < 1e-9)
    }

    /// Rows of one detector in grid order.
    pub fn series(&self, detector: &str) -> Vec<&PerRow> {
        self.rows.iter().filter(|r| r.detector == detector).collect()
    }
}

/// Callback receiving the rows of each finished grid point.
pub type Sink<'a> = dyn FnMut(&[PerRow]) -> Result<()> + 'a;

/// Detector state shared by all trials of one grid point.
enum Prepared {
    Genie,
    ConstVar,
    Map(MarkovChainModel),
    Erasure(MarkovChainModel),
    /// Full or reduced chain on per-trial perturbed variances.
    Mismatched { full: bool },
    /// Learned model trained per trial on that trial's environment.
    PerTrial(DetectorSpec),
}

struct Setup<'a> {
    cfg: &'a ScenarioConfig,
    code: CodeSpec,
    fs: &'a FrameSpec,
    interleaver: Interleaver,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let code = cfg.code_spec()?;
        let interleaver = Interleaver::new(code.codeword_len(), cfg.interleaver_seed);
        Ok(Setup { cfg, code, fs: &cfg.frame, interleaver })
    }

    /// Interferer classes of one trial.
    fn classes(&self, trial: u64) -> Result<Cow<'a, [InterfererClass]>> {
        match &self.cfg.ring {
            Some(ring) => Ok(Cow::Owned(generate_ring_scenario(ring, &mut substream(self.cfg.seed, trial, Stream::Ring))?)),
            None => Ok(Cow::Borrowed(&self.cfg.classes)),
        }
    }

    fn realizations(&self, cw: &Codeword, classes: &[InterfererClass], sigma2: f64, trial: u64) -> Result<Vec<ChannelRealization>> {
        split(cw, self.fs)?
            .iter()
            .map(|sp| {
                let mut rng = substream_keyed(self.cfg.seed, trial, Stream::Channel, sp.index as u64);
                synthesize(sp, self.fs, classes, sigma2, &mut rng)
            })
            .collect()
    }
}

fn learned_model(spec: &DetectorSpec, classes: &[InterfererClass], sigma2: f64, rng_seed: (u64, u64)) -> Result<MarkovChainModel> {
    let mut rng = substream(rng_seed.0, rng_seed.1, Stream::Training);
    match *spec {
        DetectorSpec::Scalable { partitions, train_length, refine_iters } => {
            let obs = observe_silence(train_length, classes, sigma2, &mut rng)?;
            let mut pm = train(&obs, partitions)?;
            if refine_iters > 0 {
                pm = baum_welch_refine(&pm, &obs, refine_iters, false)?.model;
            }
            build_scalable_chain(&pm)
        }
        DetectorSpec::Erasure { train_length } => {
            let obs = observe_silence(train_length, classes, sigma2, &mut rng)?;
            train_erasure_model(&obs, sigma2)
        }
        _ => unreachable!("only learned detectors are trained"),
    }
}

fn prepare(setup: &Setup, spec: &DetectorSpec, point: GridPoint, mismatch: Option<f64>) -> Result<Prepared> {
    let cfg = setup.cfg;
    let s2 = point.sigma2_n;
    Ok(match spec {
        DetectorSpec::Genie => Prepared::Genie,
        DetectorSpec::ConstVar => Prepared::ConstVar,
        DetectorSpec::MapFull | DetectorSpec::MapReduced => {
            let full = matches!(spec, DetectorSpec::MapFull);
            if mismatch.is_some_and(|f| f > 0.0) {
                Prepared::Mismatched { full }
            } else if full {
                Prepared::Map(build_full_chain(&cfg.classes, s2)?)
            } else {
                Prepared::Map(build_reduced_chain(&cfg.classes, s2)?)
            }
        }
        DetectorSpec::Scalable { .. } | DetectorSpec::Erasure { .. } => {
            if cfg.ring.is_some() {
                Prepared::PerTrial(spec.clone())
            } else {
                // one long observation per grid point, same stream at every point
                let m = learned_model(spec, &cfg.classes, s2, (cfg.seed, u64::MAX))?;
                match spec {
                    DetectorSpec::Erasure { .. } => Prepared::Erasure(m),
                    _ => Prepared::Map(m),
                }
            }
        }
    })
}

/// Assumed classes with each variance perturbed by `N(0, (f sigma^2)^2)`.
pub fn perturb_classes<R: Rng + ?Sized>(classes: &[InterfererClass], fraction: f64, rng: &mut R) -> Result<Vec<InterfererClass>> {
    classes
        .iter()
        .map(|c| {
            let v = c.variance();
            let e: f64 = rng.sample(StandardNormal);
            c.with_variance((v * (1.0 + fraction * e)).max(MISMATCH_FLOOR * v))
        })
        .collect()
}

struct TrialOutcome {
    errors: Vec<u64>,
    seconds: Vec<f64>,
}

fn detect_all(
    prepared: &Prepared,
    reals: &[ChannelRealization],
    fs: &FrameSpec,
    trial_model: &mut dyn FnMut() -> Result<MarkovChainModel>,
) -> Result<Vec<Vec<f64>>> {
    let owned;
    let (model, erasure) = match prepared {
        Prepared::Genie => return Ok(reals.iter().map(|r| detect_genie(r, fs).into_inner()).collect()),
        Prepared::ConstVar => return Ok(reals.iter().map(|r| detect_const_var(r, fs).into_inner()).collect()),
        Prepared::Map(m) => (m, false),
        Prepared::Erasure(m) => (m, true),
        Prepared::Mismatched { .. } => {
            owned = trial_model()?;
            (&owned, false)
        }
        Prepared::PerTrial(spec) => {
            owned = trial_model()?;
            (&owned, matches!(spec, DetectorSpec::Erasure { .. }))
        }
    };
    reals
        .iter()
        .map(|r| {
            let l = if erasure { detect_erasure(r, model, fs)? } else { detect_map(r, model, fs)? };
            Ok(l.into_inner())
        })
        .collect()
}

fn run_trial(
    setup: &Setup,
    prepared: &[Prepared],
    labels: &[String],
    point: GridPoint,
    mismatch: Option<f64>,
    trial: u64,
) -> Result<TrialOutcome> {
    let cfg = setup.cfg;
    let s2 = point.sigma2_n;
    let mut rng = substream(cfg.seed, trial, Stream::Info);
    let info = InfoBlock::random(setup.code.info_bits(), &mut rng);
    let cw = setup.interleaver.interleave(&encode(&info, &setup.code)?)?;
    let classes = setup.classes(trial)?;
    let reals = setup.realizations(&cw, &classes, s2, trial)?;
    let assumed = match mismatch {
        Some(f) if f > 0.0 => Some(perturb_classes(&classes, f, &mut substream(cfg.seed, trial, Stream::Mismatch))?),
        _ => None,
    };

    let mut out = TrialOutcome { errors: vec![0; prepared.len()], seconds: vec![0.0; prepared.len()] };
    for (k, p) in prepared.iter().enumerate() {
        let start = cfg.timing.then(Instant::now);
        let decoded = (|| -> Result<InfoBlock> {
            let mut trial_model = || match p {
                Prepared::Mismatched { full: true } => build_full_chain(assumed.as_deref().unwrap_or(&classes), s2),
                Prepared::Mismatched { full: false } => build_reduced_chain(assumed.as_deref().unwrap_or(&classes), s2),
                Prepared::PerTrial(spec) => learned_model(spec, &classes, s2, (cfg.seed, trial)),
                _ => unreachable!("fixed models need no per-trial build"),
            };
            let frames = detect_all(p, &reals, setup.fs, &mut trial_model)?;
            let llr = setup.interleaver.deinterleave(&reassemble(&frames, setup.fs)?)?;
            viterbi_decode(&llr, &setup.code)
        })()
        .map_err(|e| Error::Trial { trial, detector: labels[k].clone(), source: Box::new(e) })?;
        out.errors[k] = u64::from(decoded != info);
        if let Some(s) = start {
            out.seconds[k] = s.elapsed().as_secs_f64();
        }
    }
    Ok(out)
}

fn run(cfg: &ScenarioConfig, mismatch: Option<f64>, sink: &mut Sink) -> Result<PerResult> {
    let setup = Setup::new(cfg)?;
    let labels: Vec<String> = cfg
        .detectors
        .iter()
        .map(|d| match mismatch {
            Some(f) => format!("{}@{f}", d.label()),
            None => d.label(),
        })
        .collect();
    let mut result = PerResult::default();
    for point in cfg.grid()? {
        let prepared = cfg.detectors.iter().map(|d| prepare(&setup, d, point, mismatch)).collect::<Result<Vec<_>>>()?;
        let n = prepared.len();
        let total = (cfg.first_trial..cfg.first_trial + cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(&setup, &prepared, &labels, point, mismatch, t))
            .try_reduce(
                || TrialOutcome { errors: vec![0; n], seconds: vec![0.0; n] },
                |mut a, b| {
                    a.errors.iter_mut().zip(&b.errors).for_each(|(x, y)| *x += y);
                    a.seconds.iter_mut().zip(&b.seconds).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )?;
        let rows: Vec<PerRow> = labels
            .iter()
            .enumerate()
            .map(|(k, l)| PerRow::counted(l.clone(), point.esn0_db, total.errors[k], cfg.trials, total.seconds[k]))
            .collect();
        for r in &rows {
            log::info!("{} at {:.2} dB: PER {:.3e} ({}/{})", r.detector, r.esn0_db, r.per, r.errors, r.trials);
        }
        sink(&rows)?;
        result.rows.extend(rows);
    }
    Ok(result)
}

/// PER of every configured detector at every grid point.
pub fn run_per_experiment(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<PerResult> {
    run(cfg, None, sink)
}

/// Same trials with the MAP detectors assuming perturbed class variances.
/// Labels carry an `@fraction` suffix.
pub fn run_variance_mismatch(cfg: &ScenarioConfig, fraction: f64, sink: &mut Sink) -> Result<PerResult> {
    if !(fraction.is_finite() && fraction >= 0.0) {
        return Err(Error::config(format!("mismatch fraction {fraction} must be non-negative")));
    }
    run(cfg, Some(fraction), sink)
}

/// The configured table, or a fresh calibration.
pub fn load_or_calibrate_psi(cfg: &ScenarioConfig) -> Result<PsiTable> {
    match &cfg.psi.table {
        Some(path) => PsiTable::read_csv(std::fs::File::open(path)?),
        None => {
            let grid = cfg.psi.grid_db.clone().unwrap_or_else(default_psi_grid);
            calibrate_psi(&cfg.code_spec()?, &grid, cfg.psi.trials, cfg.seed)
        }
    }
}

/// Label of the semi-analytic rows.
pub const APPROX_LABEL: &str = "approx_cesm";

/// Semi-analytic PER averaged over interference realizations. Realization
/// `r` reuses the channel streams of trial `r`.
pub fn run_approx(cfg: &ScenarioConfig, psi: &PsiTable, sink: &mut Sink) -> Result<PerResult> {
    let setup = Setup::new(cfg)?;
    let cw = Codeword(vec![1; setup.code.codeword_len()]);
    let count = cfg.approx_realizations;
    let mut result = PerResult::default();
    for point in cfg.grid()? {
        let (sum, clamped) = (cfg.first_trial..cfg.first_trial + count)
            .into_par_iter()
            .map(|r| -> Result<(f64, u64)> {
                let classes = setup.classes(r)?;
                let reals = setup.realizations(&cw, &classes, point.sigma2_n, r)?;
                let trace = sinr_trace(&reals, setup.fs, &setup.interleaver)?;
                let v = approx_per(&trace, psi, cfg.cesm_b)?;
                Ok((v.per, u64::from(v.clamped)))
            })
            .try_reduce(|| (0.0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
        if clamped > 0 {
            log::warn!("{clamped} of {count} effective SINRs at {} dB fell outside the PER table", point.esn0_db);
        }
        let per = sum / count as f64;
        let row = PerRow {
            detector: APPROX_LABEL.into(),
            esn0_db: point.esn0_db,
            per,
            ci_lo: per,
            ci_hi: per,
            trials: count,
            seconds: 0.0,
            errors: 0,
        };
        sink(std::slice::from_ref(&row))?;
        result.rows.push(row);
    }
    Ok(result)
}
