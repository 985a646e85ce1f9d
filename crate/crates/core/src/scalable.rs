//! Blind variance-state model learned from signal-free observations.
//!
//! Samples are clustered by 1-D Lloyd iteration on `z = ln y^2`. Each
//! partition's variance is the linear mean of `y^2` over its members, which
//! already includes the noise. Transitions are counted on the quantized
//! sequence. Nothing here sees the interferer parameters.

use crate::markov::{Columns, MarkovChainModel, Substate};
use crate::{Error, Result};
use log::warn;
use serde::{Deserialize, Serialize};
use std::path::Path;

const MOVE_TOL: f64 = 1e-9;
const MAX_ITERS: usize = 500;
const MIN_SAMPLES_PER_PARTITION: usize = 100;
const TINY: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionModel {
    /// `P - 1` increasing thresholds on `ln y^2`.
    pub boundaries: Vec<f64>,
    /// Variance per partition, increasing.
    pub state_variance: Vec<f64>,
    /// `transition[to][from]`, column-stochastic.
    pub transition: Vec<Vec<f64>>,
    /// Samples used for training.
    pub train_length: usize,
}

impl PartitionModel {
    pub fn partitions(&self) -> usize {
        self.state_variance.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.partitions();
        if p == 0 || self.boundaries.len() + 1 != p {
            return Err(Error::config("partition model needs P variances and P-1 boundaries"));
        }
        if !self.boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("partition boundaries must be strictly increasing"));
        }
        if !self.state_variance.windows(2).all(|w| w[0] < w[1]) || !(self.state_variance[0] > 0.0) {
            return Err(Error::config("partition variances must be positive and strictly increasing"));
        }
        if self.transition.len() != p || self.transition.iter().any(|r| r.len() != p) {
            return Err(Error::config("transition matrix must be P x P"));
        }
        for from in 0..p {
            let s: f64 = self.transition.iter().map(|r| r[from]).sum();
            if (s - 1.0).abs() > 1e-9 || self.transition.iter().any(|r| !(r[from] >= 0.0)) {
                return Err(Error::config(format!("transition column {from} is not a distribution")));
            }
        }
        Ok(())
    }

    /// Partition index of each sample.
    pub fn quantize(&self, samples: &[f64]) -> Vec<usize> {
        samples
            .iter()
            .map(|y| {
                let z = (y * y).max(TINY).ln();
                self.boundaries.partition_point(|&b| b <= z)
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let pm: PartitionModel = serde_json::from_reader(f)?;
        pm.validate()?;
        Ok(pm)
    }
}

/// Outcome of the clustering step.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Log-domain centroids, increasing.
    pub centroids: Vec<f64>,
    /// Midpoints between neighbouring centroids.
    pub boundaries: Vec<f64>,
    /// Linear mean of `y^2` per partition.
    pub variances: Vec<f64>,
    /// Mean squared log-domain error after each iteration.
    pub distortion: Vec<f64>,
}

/// Sorted log-squared samples with prefix sums for O(1) range statistics.
struct Sorted {
    z: Vec<f64>,
    sum_z: Vec<f64>,
    sum_z2: Vec<f64>,
    sum_y2: Vec<f64>,
}

impl Sorted {
    fn new(samples: &[f64]) -> Self {
        let mut y2: Vec<f64> = samples.iter().map(|y| y * y).collect();
        y2.sort_by(f64::total_cmp);
        let z: Vec<f64> = y2.iter().map(|v| v.max(TINY).ln()).collect();
        let prefix = |f: &dyn Fn(usize) -> f64| {
            let mut out = Vec::with_capacity(z.len() + 1);
            out.push(0.0);
            let mut acc = 0.0;
            for i in 0..z.len() {
                acc += f(i);
                out.push(acc);
            }
            out
        };
        let sum_z = prefix(&|i| z[i]);
        let sum_z2 = prefix(&|i| z[i] * z[i]);
        let sum_y2 = prefix(&|i| y2[i]);
        Sorted { z, sum_z, sum_z2, sum_y2 }
    }

    fn len(&self) -> usize {
        self.z.len()
    }

    /// Start index of each partition for the given boundaries; ties go up.
    fn splits(&self, boundaries: &[f64]) -> Vec<usize> {
        let mut s = Vec::with_capacity(boundaries.len() + 2);
        s.push(0);
        s.extend(boundaries.iter().map(|&b| self.z.partition_point(|&z| z < b)));
        s.push(self.len());
        s
    }

    fn sse(&self, lo: usize, hi: usize, c: f64) -> f64 {
        let n = (hi - lo) as f64;
        let s1 = self.sum_z[hi] - self.sum_z[lo];
        let s2 = self.sum_z2[hi] - self.sum_z2[lo];
        (s2 - 2.0 * c * s1 + n * c * c).max(0.0)
    }
}

fn midpoints(c: &[f64]) -> Vec<f64> {
    c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Lloyd clustering of `ln y^2` into at most `p` partitions.
///
/// Centroids start at the `(k + 1/2) / P` quantiles. An empty partition is
/// reseeded at the sample with the largest distortion. If fewer than `p`
/// distinct values exist, or centroids coincide at convergence, `P` shrinks
/// with a warning.
pub fn lloyd_partition(samples: &[f64], p: usize) -> Result<Clustering> {
    if p == 0 {
        return Err(Error::config("number of partitions must be at least 1"));
    }
    if samples.len() < MIN_SAMPLES_PER_PARTITION * p {
        return Err(Error::input(format!(
            "{} samples are too few for {p} partitions (need {})",
            samples.len(),
            MIN_SAMPLES_PER_PARTITION * p
        )));
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("sample {i} is not finite")));
    }
    let data = Sorted::new(samples);
    let n = data.len();
    let distinct = 1 + data.z.windows(2).filter(|w| w[0] != w[1]).count();
    let mut p = p;
    if distinct < p {
        warn!("only {distinct} distinct sample values; reducing partitions from {p} to {distinct}");
        p = distinct;
    }

    let mut centroids: Vec<f64> = (0..p)
        .map(|k| data.z[(((k as f64 + 0.5) / p as f64) * n as f64).floor().min((n - 1) as f64) as usize])
        .collect();
    let mut distortion = Vec::new();
    for _ in 0..MAX_ITERS {
        let splits = data.splits(&midpoints(&centroids));
        let mut next = centroids.clone();
        let mut empty = Vec::new();
        for k in 0..p {
            let (lo, hi) = (splits[k], splits[k + 1]);
            if hi > lo {
                next[k] = (data.sum_z[hi] - data.sum_z[lo]) / (hi - lo) as f64;
            } else {
                empty.push(k);
            }
        }
        for k in empty {
            // worst-fitting sample is an end point of some partition
            let mut best = (f64::NEG_INFINITY, next[k]);
            for j in 0..p {
                let (lo, hi) = (splits[j], splits[j + 1]);
                if hi > lo {
                    for idx in [lo, hi - 1] {
                        let d = (data.z[idx] - next[j]).powi(2);
                        if d > best.0 {
                            best = (d, data.z[idx]);
                        }
                    }
                }
            }
            next[k] = best.1;
        }
        next.sort_by(f64::total_cmp);
        let splits = data.splits(&midpoints(&next));
        let sse: f64 = (0..p).map(|k| data.sse(splits[k], splits[k + 1], next[k])).sum();
        distortion.push(sse / n as f64);
        let moved = centroids.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        centroids = next;
        if moved < MOVE_TOL {
            break;
        }
    }

    // drop empty partitions and merge coinciding centroids
    let splits = data.splits(&midpoints(&centroids));
    let mut kept_c: Vec<f64> = Vec::with_capacity(p);
    let mut kept_v: Vec<f64> = Vec::with_capacity(p);
    for k in 0..p {
        let (lo, hi) = (splits[k], splits[k + 1]);
        if hi == lo {
            continue;
        }
        let v = (data.sum_y2[hi] - data.sum_y2[lo]) / (hi - lo) as f64;
        if let (Some(&last_c), Some(&last_v)) = (kept_c.last(), kept_v.last()) {
            if centroids[k] <= last_c || v <= last_v {
                continue;
            }
        }
        kept_c.push(centroids[k]);
        kept_v.push(v);
    }
    if kept_c.len() < p {
        warn!("partition count collapsed from {p} to {}", kept_c.len());
        let boundaries = midpoints(&kept_c);
        let splits = data.splits(&boundaries);
        kept_v = (0..kept_c.len())
            .map(|k| {
                let (lo, hi) = (splits[k], splits[k + 1]);
                (data.sum_y2[hi] - data.sum_y2[lo]) / (hi - lo).max(1) as f64
            })
            .collect();
    }
    let boundaries = midpoints(&kept_c);
    Ok(Clustering { centroids: kept_c, boundaries, variances: kept_v, distortion })
}

/// Counts `sequence[t] -> sequence[t + 1]` transitions with add-one smoothing;
/// returns `matrix[to][from]`.
pub fn estimate_transitions(sequence: &[usize], p: usize) -> Result<Vec<Vec<f64>>> {
    if sequence.len() < 2 {
        return Err(Error::input("transition estimation needs at least two samples"));
    }
    if let Some(&s) = sequence.iter().find(|&&s| s >= p) {
        return Err(Error::input(format!("state {s} out of range for {p} partitions")));
    }
    let mut counts = vec![vec![1.0; p]; p];
    for w in sequence.windows(2) {
        counts[w[1]][w[0]] += 1.0;
    }
    for from in 0..p {
        let total: f64 = counts.iter().map(|r| r[from]).sum();
        counts.iter_mut().for_each(|r| r[from] /= total);
    }
    Ok(counts)
}

/// Clustering plus transition counting on one signal-free observation.
pub fn train(samples: &[f64], p: usize) -> Result<PartitionModel> {
    let c = lloyd_partition(samples, p)?;
    let mut pm = PartitionModel {
        boundaries: c.boundaries,
        state_variance: c.variances,
        transition: Vec::new(),
        train_length: samples.len(),
    };
    let seq = pm.quantize(samples);
    pm.transition = estimate_transitions(&seq, pm.partitions())?;
    pm.validate()?;
    Ok(pm)
}

fn columns_of(transition: &[Vec<f64>]) -> Columns {
    let p = transition.len();
    (0..p).map(|from| (0..p).filter(|&to| transition[to][from] > 0.0).map(|to| (to, transition[to][from])).collect()).collect()
}

/// Chain over the learned partitions. The variances are used as-is since
/// they already contain the noise.
pub fn build_scalable_chain(pm: &PartitionModel) -> Result<MarkovChainModel> {
    pm.validate()?;
    MarkovChainModel::from_parts(
        (0..pm.partitions()).map(Substate::Partition).collect(),
        pm.state_variance.clone(),
        columns_of(&pm.transition),
    )
}

/// A fitted bad state weaker than this multiple of `sigma_N^2` is taken to be
/// a noise tail rather than interference.
pub const ERASURE_MIN_RATIO: f64 = 2.0;

const ERASURE_EM_ITERS: usize = 50;

/// Two-state good/bad model for the erasure detector. Starts from a
/// two-partition fit with sticky transitions, then runs Baum-Welch with the
/// good variance pinned to `sigma2_n`; the bad variance and the transitions
/// are learned. When the fit finds no interference the bad state is made
/// unreachable.
pub fn train_erasure_model(samples: &[f64], sigma2_n: f64) -> Result<MarkovChainModel> {
    let unreachable = |bad: f64| {
        MarkovChainModel::from_parts(
            vec![Substate::Partition(0), Substate::Partition(1)],
            vec![sigma2_n, bad.max(sigma2_n)],
            vec![vec![(0, 1.0)], vec![(0, 1.0)]],
        )
    };
    let pm = train(samples, 2)?;
    let upper = pm.state_variance[pm.partitions() - 1];
    if pm.partitions() < 2 || upper <= sigma2_n {
        return unreachable(upper);
    }
    // per-sample labels carry no persistence, so the counted transitions are a poor start
    let start = PartitionModel {
        state_variance: vec![sigma2_n, upper],
        transition: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        ..pm
    };
    let fit = em(&start, samples, ERASURE_EM_ITERS, &[false, true])?.model;
    let bad = fit.state_variance[1];
    if bad < ERASURE_MIN_RATIO * sigma2_n {
        return unreachable(bad);
    }
    MarkovChainModel::from_parts(
        vec![Substate::Partition(0), Substate::Partition(1)],
        vec![sigma2_n, bad],
        columns_of(&fit.transition),
    )
}

/// Result of EM refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub model: PartitionModel,
    /// Log-likelihood of the observation before each update, then after the last.
    pub log_likelihood: Vec<f64>,
}

fn log_normal0(y: f64, v: f64) -> f64 {
    -0.5 * (y * y / v + (2.0 * std::f64::consts::PI * v).ln())
}

/// Baum-Welch refinement of the transitions (and optionally the variances)
/// on a zero-mean Gaussian HMM. Stops when the per-sample log-likelihood gain
/// drops below `1e-6` or after `max_iters` updates.
pub fn baum_welch_refine(
    pm: &PartitionModel,
    samples: &[f64],
    max_iters: usize,
    update_variances: bool,
) -> Result<Refinement> {
    let r = em(pm, samples, max_iters, &vec![update_variances; pm.partitions()])?;
    if update_variances && !r.model.state_variance.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Numeric("refined variances are no longer ordered".into()));
    }
    r.model.validate()?;
    Ok(r)
}

/// EM core; `update[j]` selects which state variances are re-estimated.
fn em(pm: &PartitionModel, samples: &[f64], max_iters: usize, update: &[bool]) -> Result<Refinement> {
    pm.validate()?;
    let p = pm.partitions();
    let n = samples.len();
    if n < 2 {
        return Err(Error::input("refinement needs at least two samples"));
    }
    let mut model = pm.clone();
    let mut init = vec![1.0 / p as f64; p];
    let mut trace: Vec<f64> = Vec::new();
    let mut alpha = vec![vec![0.0; p]; n];
    let mut scale = vec![0.0; n];
    let mut beta = vec![vec![0.0; p]; n];
    let mut emis = vec![vec![0.0; p]; n];
    for iter in 0..=max_iters {
        // E-step with scaled recursions; emissions shifted per sample
        let mut shift_sum = 0.0;
        let mut logs = vec![0.0; p];
        for t in 0..n {
            for (l, &v) in logs.iter_mut().zip(&model.state_variance) {
                *l = log_normal0(samples[t], v);
            }
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            shift_sum += m;
            for j in 0..p {
                emis[t][j] = (logs[j] - m).exp();
            }
        }
        let tr = &model.transition;
        for t in 0..n {
            for j in 0..p {
                let prior = if t == 0 { init[j] } else { (0..p).map(|i| tr[j][i] * alpha[t - 1][i]).sum() };
                alpha[t][j] = prior * emis[t][j];
            }
            let s: f64 = alpha[t].iter().sum();
            if !(s > 0.0) {
                return Err(Error::Degenerate { step: t });
            }
            scale[t] = s;
            alpha[t].iter_mut().for_each(|a| *a /= s);
        }
        let ll = shift_sum + scale.iter().map(|s| s.ln()).sum::<f64>();
        if let Some(&prev) = trace.last() {
            if ll < prev - 1e-9 * prev.abs().max(1.0) {
                return Err(Error::Numeric(format!(
                    "log-likelihood decreased from {prev} to {ll} at iteration {iter}"
                )));
            }
            trace.push(ll);
            if (ll - prev) / (n as f64) < 1e-6 || iter == max_iters {
                break;
            }
        } else {
            trace.push(ll);
            if max_iters == 0 {
                break;
            }
        }
        beta[n - 1].iter_mut().for_each(|b| *b = 1.0);
        for t in (0..n - 1).rev() {
            for i in 0..p {
                beta[t][i] = (0..p).map(|j| tr[j][i] * emis[t + 1][j] * beta[t + 1][j]).sum::<f64>() / scale[t + 1];
            }
        }
        // M-step
        let mut xi = vec![vec![0.0; p]; p];
        let mut gamma_sum = vec![0.0; p];
        let mut power = vec![0.0; p];
        for t in 0..n {
            for j in 0..p {
                let g = alpha[t][j] * beta[t][j];
                gamma_sum[j] += g;
                power[j] += g * samples[t] * samples[t];
            }
            if t + 1 < n {
                for i in 0..p {
                    for j in 0..p {
                        xi[j][i] += alpha[t][i] * tr[j][i] * emis[t + 1][j] * beta[t + 1][j] / scale[t + 1];
                    }
                }
            }
        }
        let g0: f64 = (0..p).map(|j| alpha[0][j] * beta[0][j]).sum();
        init = (0..p).map(|j| alpha[0][j] * beta[0][j] / g0).collect();
        let mut next = vec![vec![0.0; p]; p];
        for i in 0..p {
            let total: f64 = (0..p).map(|j| xi[j][i]).sum();
            for j in 0..p {
                next[j][i] = if total > 0.0 { xi[j][i] / total } else { model.transition[j][i] };
            }
        }
        model.transition = next;
        for j in 0..p {
            if update[j] && gamma_sum[j] > 0.0 {
                model.state_variance[j] = (power[j] / gamma_sum[j]).max(TINY);
            }
        }
    }
    Ok(Refinement { model, log_likelihood: trace })
}
