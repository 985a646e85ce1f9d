//! Semi-analytic PER model and detector complexity.
//!
//! A codeword's per-symbol SINRs are collapsed into one effective SINR with
//! the capacity mapping `I(x) = log2(1 + x)`, and the PER is read from the
//! code's AWGN curve `Psi`.

use crate::fec::{encode, viterbi_decode, CodeSpec, InfoBlock, Interleaver};
use crate::interference::ChannelRealization;
use crate::rng::{substream_keyed, Stream};
use crate::telegram::FrameSpec;
use crate::{Error, LlrFrame, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Per-symbol SINR in codeword order, `1 / (sigma_z^2 + sigma_N^2)`.
///
/// Realizations are the sub-packets in transmission order; the interleaver
/// maps transmitted positions back to codeword positions.
pub fn sinr_trace(realizations: &[ChannelRealization], fs: &FrameSpec, interleaver: &Interleaver) -> Result<Vec<f64>> {
    let mut slots = Vec::with_capacity(realizations.len() * fs.data_symbols);
    for r in realizations {
        if r.variance.len() != fs.window_len() || r.guard != fs.guard_symbols {
            return Err(Error::input("realization window does not match the frame"));
        }
        slots.extend(r.data_indices(fs).map(|w| 1.0 / r.variance[w]));
    }
    interleaver.unpermute(&slots)
}

fn check_trace(trace: &[f64]) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::input("empty SINR trace"));
    }
    if let Some(v) = trace.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::input(format!("SINR {v} is not positive")));
    }
    Ok(())
}

/// Capacity effective SINR `b * I^-1(mean I(SINR_l / b))`.
pub fn effective_sinr_cesm(trace: &[f64], b: f64) -> Result<f64> {
    check_trace(trace)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::config(format!("CESM scale b must be positive, got {b}")));
    }
    let mean = trace.iter().map(|s| (s / b).ln_1p()).sum::<f64>() / trace.len() as f64;
    Ok(b * mean.exp_m1())
}

/// Geometric mean of the SINRs.
pub fn effective_sinr_geomean(trace: &[f64]) -> Result<f64> {
    check_trace(trace)?;
    Ok((trace.iter().map(|s| s.ln()).sum::<f64>() / trace.len() as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiPoint {
    #[serde(rename = "EsN0_dB")]
    pub esn0_db: f64,
    #[serde(rename = "PER")]
    pub per: f64,
    pub trials: u64,
}

/// AWGN packet error rate curve of one code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiTable {
    points: Vec<PsiPoint>,
}

/// Table lookup result; `clamped` marks a query outside the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub per: f64,
    pub clamped: bool,
}

impl PsiTable {
    pub fn new(points: Vec<PsiPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("PER table is empty"));
        }
        if !points.windows(2).all(|w| w[0].esn0_db < w[1].esn0_db) {
            return Err(Error::config("PER table grid must be strictly increasing"));
        }
        if points.iter().any(|p| !(0.0..=1.0).contains(&p.per)) {
            return Err(Error::config("PER table values must lie in [0, 1]"));
        }
        if !points.windows(2).all(|w| w[1].per <= w[0].per) {
            return Err(Error::config("PER table must be non-increasing"));
        }
        Ok(PsiTable { points })
    }

    pub fn points(&self) -> &[PsiPoint] {
        &self.points
    }

    /// Piecewise-linear in `(dB, ln PER)`, linear in PER on a segment that
    /// touches zero; clamped outside the grid.
    pub fn eval(&self, esn0_db: f64) -> PsiValue {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if esn0_db.is_nan() {
            return PsiValue { per: first.per, clamped: true };
        }
        if esn0_db <= first.esn0_db {
            return PsiValue { per: first.per, clamped: esn0_db < first.esn0_db };
        }
        if esn0_db >= last.esn0_db {
            return PsiValue { per: last.per, clamped: esn0_db > last.esn0_db };
        }
        let k = pts.partition_point(|p| p.esn0_db <= esn0_db);
        let (a, b) = (pts[k - 1], pts[k]);
        let t = (esn0_db - a.esn0_db) / (b.esn0_db - a.esn0_db);
        let per = if a.per > 0.0 && b.per > 0.0 {
            (a.per.ln() + t * (b.per.ln() - a.per.ln())).exp()
        } else {
            a.per + t * (b.per - a.per)
        };
        PsiValue { per: per.clamp(0.0, 1.0), clamped: false }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let points = r.deserialize().collect::<std::result::Result<Vec<PsiPoint>, _>>()?;
        Self::new(points)
    }
}

/// Default calibration grid, -8 dB to 12 dB in 0.25 dB steps.
pub fn default_psi_grid() -> Vec<f64> {
    (0..=80).map(|k| -8.0 + 0.25 * k as f64).collect()
}

/// Pool-adjacent-violators fit of a non-increasing sequence, weighted by trials.
fn isotonic_decreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m2 <= m1 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, c1 + c2));
        }
    }
    blocks.into_iter().flat_map(|(m, _, c)| std::iter::repeat_n(m, c)).collect()
}

/// Packet errors over `trials` AWGN transmissions at `sigma2` noise variance.
pub fn awgn_packet_errors(code: &CodeSpec, sigma2: f64, trials: u64, seed: u64, key: u64) -> Result<u64> {
    let sigma = sigma2.sqrt();
    (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let mut rng = substream_keyed(seed, t, Stream::Awgn, key);
            let info = InfoBlock::random(code.info_bits(), &mut rng);
            let cw = encode(&info, code)?;
            let llr: Vec<f64> = cw
                .symbols()
                .iter()
                .map(|&x| {
                    let y = x as f64 + sigma * rng.sample::<f64, _>(StandardNormal);
                    crate::llr::clamp_llr(2.0 * y / sigma2)
                })
                .collect();
            let decoded = viterbi_decode(&LlrFrame(llr), code)?;
            Ok(u64::from(decoded != info))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Monte Carlo `Psi` curve with isotonic smoothing.
pub fn calibrate_psi(code: &CodeSpec, grid_db: &[f64], trials: u64, seed: u64) -> Result<PsiTable> {
    if grid_db.is_empty() || !grid_db.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("calibration grid must be nonempty and increasing"));
    }
    if trials == 0 {
        return Err(Error::config("calibration needs at least one trial per point"));
    }
    let mut raw = Vec::with_capacity(grid_db.len());
    for (k, &db) in grid_db.iter().enumerate() {
        let sigma2 = 10f64.powf(-db / 10.0);
        let errors = awgn_packet_errors(code, sigma2, trials, seed, k as u64)?;
        log::debug!("psi {db:.2} dB: {errors}/{trials}");
        raw.push(errors as f64 / trials as f64);
    }
    let smooth = isotonic_decreasing(&raw, &vec![trials as f64; raw.len()]);
    PsiTable::new(
        grid_db
            .iter()
            .zip(smooth)
            .map(|(&esn0_db, per)| PsiPoint { esn0_db, per, trials })
            .collect(),
    )
}

/// `Psi(10 log10 SINR_eff)` for one SINR trace.
pub fn approx_per(trace: &[f64], psi: &PsiTable, b: f64) -> Result<PsiValue> {
    let eff = effective_sinr_cesm(trace, b)?;
    Ok(psi.eval(10.0 * eff.log10()))
}

/// Multiplications of one BCJR pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    /// `L (1 + S + 3 S^2)`.
    pub exact: f64,
    /// `3 L S^2`.
    pub asymptotic: f64,
}

pub fn complexity_estimate(states: u64, window: u64) -> Result<Complexity> {
    if states == 0 {
        return Err(Error::config("state count must be at least 1"));
    }
    let (s, l) = (states as f64, window as f64);
    Ok(Complexity { exact: l * (1.0 + s + 3.0 * s * s), asymptotic: 3.0 * l * s * s })
}

/// Symbol-extended states of the full chain, `2 * 2^(sum L_I)`.
pub fn full_state_count(lengths: &[usize]) -> u64 {
    2u64.saturating_mul(1u64.checked_shl(lengths.iter().sum::<usize>() as u32).unwrap_or(u64::MAX))
}

/// Symbol-extended states of the reduced chain, `2 * prod (L_I + 1)`.
pub fn reduced_state_count(lengths: &[usize]) -> u64 {
    lengths.iter().fold(2u64, |acc, &l| acc.saturating_mul(l as u64 + 1))
}

/// Symbol-extended states of the learned chain, `2 P`.
pub fn scalable_state_count(partitions: usize) -> u64 {
    2 * partitions as u64
}

/// One detector row of the worked complexity comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub detector: &'static str,
    pub states: u64,
    pub complexity: Complexity,
}

/// Worked examples: window 36, two classes of length 5 with `P = 3`
/// (example 1) or length 10 with `P = 5` (example 2).
pub fn complexity_example(example: u8) -> Result<Vec<ComplexityRow>> {
    let (lengths, p): (&[usize], usize) = match example {
        1 => (&[5, 5], 3),
        2 => (&[10, 10], 5),
        _ => return Err(Error::config(format!("unknown complexity example {example}, expected 1 or 2"))),
    };
    let window = 36;
    [
        ("full", full_state_count(lengths)),
        ("reduced", reduced_state_count(lengths)),
        ("scalable", scalable_state_count(p)),
    ]
    .into_iter()
    .map(|(detector, states)| Ok(ComplexityRow { detector, states, complexity: complexity_estimate(states, window)? }))
    .collect()
}
