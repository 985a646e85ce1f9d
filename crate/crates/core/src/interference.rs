//! Bursty interference: Bernoulli arrivals per symbol slot, each arrival
//! overlapping a fixed number of symbols with Gaussian power.

use crate::telegram::{FrameSpec, SubPacket};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One class of interferers sharing length, variance and load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClassFile", into = "ClassFile")]
pub struct InterfererClass {
    length: usize,
    variance: f64,
    arrival_prob: f64,
    node_variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassFile {
    length: usize,
    #[serde(default)]
    variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    load: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_variances: Option<Vec<f64>>,
}

impl TryFrom<ClassFile> for InterfererClass {
    type Error = Error;

    fn try_from(f: ClassFile) -> Result<Self> {
        let mut class = match (f.load, f.arrival_prob) {
            (Some(g), None) => InterfererClass::new(f.length, f.variance, g)?,
            (None, Some(p)) => InterfererClass::with_arrival_prob(f.length, f.variance, p)?,
            _ => return Err(Error::config("interferer class needs exactly one of `load` or `arrival_prob`")),
        };
        if let Some(nodes) = f.node_variances {
            class = class.with_node_variances(nodes)?;
        }
        Ok(class)
    }
}

impl From<InterfererClass> for ClassFile {
    fn from(c: InterfererClass) -> Self {
        ClassFile {
            length: c.length,
            variance: c.variance,
            load: None,
            arrival_prob: Some(c.arrival_prob),
            node_variances: c.node_variances,
        }
    }
}

fn check_variance(v: f64, what: &str) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::config(format!("{what} must be finite and non-negative, got {v}")));
    }
    Ok(())
}

impl InterfererClass {
    /// Class with interference load `G`; the per-slot arrival probability is `1 - exp(-G / L_I)`.
    pub fn new(length: usize, variance: f64, load: f64) -> Result<Self> {
        if !(load.is_finite() && load >= 0.0) {
            return Err(Error::config(format!("load must be finite and non-negative, got {load}")));
        }
        let p = if length == 0 { 0.0 } else { 1.0 - (-load / length as f64).exp() };
        Self::with_arrival_prob(length, variance, p)
    }

    pub fn with_arrival_prob(length: usize, variance: f64, arrival_prob: f64) -> Result<Self> {
        if length == 0 {
            return Err(Error::config("interferer length must be at least 1"));
        }
        check_variance(variance, "interferer variance")?;
        if !(0.0..=1.0).contains(&arrival_prob) {
            return Err(Error::config(format!("arrival probability {arrival_prob} outside [0, 1]")));
        }
        Ok(InterfererClass { length, variance, arrival_prob, node_variances: None })
    }

    /// Each arrival draws its variance uniformly from `nodes` instead of using the class variance.
    pub fn with_node_variances(mut self, nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::config("node variance list is empty"));
        }
        for &v in &nodes {
            check_variance(v, "node variance")?;
        }
        self.variance = nodes.iter().sum::<f64>() / nodes.len() as f64;
        self.node_variances = Some(nodes);
        Ok(self)
    }

    /// Copy with a different per-interferer variance (used for mismatched detectors).
    pub fn with_variance(&self, variance: f64) -> Result<Self> {
        check_variance(variance, "interferer variance")?;
        Ok(InterfererClass { variance, node_variances: None, ..self.clone() })
    }

    /// `L_I`.
    pub fn length(&self) -> usize {
        self.length
    }

    /// `sigma_I^2`; the mean node variance when node variances are set.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `p_a`.
    pub fn arrival_prob(&self) -> f64 {
        self.arrival_prob
    }

    /// `G = -L_I ln(1 - p_a)`.
    pub fn load(&self) -> f64 {
        -(self.length as f64) * (1.0 - self.arrival_prob).ln()
    }

    pub fn node_variances(&self) -> Option<&[f64]> {
        self.node_variances.as_deref()
    }

    fn draw_variance<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.node_variances {
            Some(nodes) => nodes[rng.random_range(0..nodes.len())],
            None => self.variance,
        }
    }
}

/// Arrival indicators and active-interferer counts over an observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTrace {
    pub arrivals: Vec<bool>,
    pub active: Vec<u32>,
}

/// Bernoulli(`p_a`) arrivals over `num_slots`, preceded by `L_I` warm-up slots.
///
/// The active count at slot `m` is the number of arrivals in `(m - L_I, m]`.
pub fn sample_arrivals<R: Rng + ?Sized>(class: &InterfererClass, num_slots: usize, rng: &mut R) -> ArrivalTrace {
    let warm = class.length;
    let total = warm + num_slots;
    let arrivals: Vec<bool> = (0..total).map(|_| rng.random::<f64>() < class.arrival_prob).collect();
    let mut active = Vec::with_capacity(num_slots);
    let mut count = arrivals[..warm].iter().filter(|&&a| a).count() as u32;
    for t in warm..total {
        count += arrivals[t] as u32;
        count -= arrivals[t - warm] as u32;
        active.push(count);
    }
    ArrivalTrace { arrivals: arrivals[warm..].to_vec(), active }
}

/// Received samples over a sub-packet window and the ground truth behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `y[m]` for `-L_add <= m < L_tot + L_add`, stored from index 0.
    pub y: Vec<f64>,
    /// Transmitted symbols over the window (0 in guard periods).
    pub symbols: Vec<i8>,
    /// True `sigma_tot^2[m]`, noise included.
    pub variance: Vec<f64>,
    /// Active interferers per class, `active_counts[class][slot]`.
    pub active_counts: Vec<Vec<u32>>,
    /// Noise variance used for the realization.
    pub noise_variance: f64,
    /// `L_add`; window index `w` corresponds to `m = w - guard`.
    pub guard: usize,
}

impl ChannelRealization {
    /// Interference-only variance `sigma_z^2[m]`.
    pub fn interference_variance(&self) -> impl Iterator<Item = f64> + '_ {
        self.variance.iter().map(move |v| (v - self.noise_variance).max(0.0))
    }

    /// Window indices of the data symbols, in codeword order.
    pub fn data_indices<'a>(&self, fs: &'a FrameSpec) -> impl Iterator<Item = usize> + 'a {
        let g = fs.guard_symbols;
        fs.data_positions().map(move |m| m + g)
    }

    /// Writes `m, sigma2, count_0, count_1, ...` rows.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["m".to_string(), "sigma2".to_string()];
        header.extend((0..self.active_counts.len()).map(|c| format!("count_{c}")));
        w.write_record(&header)?;
        for (idx, v) in self.variance.iter().enumerate() {
            let mut row = vec![(idx as i64 - self.guard as i64).to_string(), v.to_string()];
            row.extend(self.active_counts.iter().map(|c| c[idx].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_classes(classes: &[InterfererClass], sigma2_n: f64) -> Result<()> {
    check_variance(sigma2_n, "noise variance")?;
    for c in classes {
        check_variance(c.variance, "interferer variance")?;
    }
    Ok(())
}

/// Synthesizes `y = x + n + z` for an arbitrary symbol window.
///
/// Arrivals cover a warm-up of `max(L_I)` slots ahead of the window so the
/// interference process is stationary at the first sample.
pub fn synthesize_window<R: Rng + ?Sized>(
    symbols: &[i8],
    guard: usize,
    classes: &[InterfererClass],
    sigma2_n: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    check_classes(classes, sigma2_n)?;
    let len = symbols.len();
    let warm = classes.iter().map(|c| c.length).max().unwrap_or(0);
    let total = warm + len;
    let mut interference = vec![0.0; total];
    let mut active_counts = Vec::with_capacity(classes.len());
    for class in classes {
        let mut counts = vec![0u32; total];
        for t in 0..total {
            if rng.random::<f64>() < class.arrival_prob {
                let v = class.draw_variance(rng);
                for s in t..(t + class.length).min(total) {
                    counts[s] += 1;
                    interference[s] += v;
                }
            }
        }
        active_counts.push(counts.split_off(warm));
    }
    let interference = &interference[warm..];
    let noise_std = sigma2_n.sqrt();
    let mut y = Vec::with_capacity(len);
    let mut variance = Vec::with_capacity(len);
    for (&x, &vz) in symbols.iter().zip(interference) {
        let n: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        y.push(x as f64 + noise_std * n + vz.sqrt() * z);
        variance.push(sigma2_n + vz);
    }
    Ok(ChannelRealization {
        y,
        symbols: symbols.to_vec(),
        variance,
        active_counts,
        noise_variance: sigma2_n,
        guard,
    })
}

/// Received window for one sub-packet, with `L_add` silent symbols on both sides.
pub fn synthesize<R: Rng + ?Sized>(
    subpacket: &SubPacket,
    fs: &FrameSpec,
    classes: &[InterfererClass],
    sigma2_n: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if subpacket.symbols.len() != fs.total_len() {
        return Err(Error::input(format!(
            "sub-packet has {} symbols, frame expects {}",
            subpacket.symbols.len(),
            fs.total_len()
        )));
    }
    let g = fs.guard_symbols;
    let mut window = vec![0i8; fs.window_len()];
    window[g..g + fs.total_len()].copy_from_slice(&subpacket.symbols);
    synthesize_window(&window, g, classes, sigma2_n, rng)
}

/// Signal-free observation of `len` samples (noise plus interference only).
pub fn observe_silence<R: Rng + ?Sized>(
    len: usize,
    classes: &[InterfererClass],
    sigma2_n: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(synthesize_window(&vec![0; len], 0, classes, sigma2_n, rng)?.y)
}
