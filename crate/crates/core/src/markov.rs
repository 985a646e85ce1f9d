//! Interference Markov chains.
//!
//! Chains are stored at the interferer level: a list of interference
//! substates, their disturbance variance, and a sparse column-stochastic
//! transition structure (`columns[from] = [(to, prob), ..]`). The transmit
//! symbol is i.i.d. and independent of the interference, so the
//! symbol-extended product chain has entries
//! `P[(to, x'), (from, x)] = T[to, from] / 2` during data. The extended view
//! is materialized on request ([`MarkovChainModel::transition_matrix`]) with
//! states ordered `+1` block first, then `-1`, each block in substate order.

use crate::interference::InterfererClass;
use crate::{Error, Result};
use serde::Serialize;

/// Largest interferer-level state space a chain may have.
pub const STATE_BUDGET: usize = 1 << 16;

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITERS: usize = 100_000;

/// Transmit-symbol component of a product-chain state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Plus,
    Minus,
    Silent,
}

impl Symbol {
    pub fn value(self) -> i8 {
        match self {
            Symbol::Plus => 1,
            Symbol::Minus => -1,
            Symbol::Silent => 0,
        }
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            1 => Some(Symbol::Plus),
            -1 => Some(Symbol::Minus),
            0 => Some(Symbol::Silent),
            _ => None,
        }
    }
}

/// Interference part of a chain state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Substate {
    /// Remaining-overlap counters, one vector per interferer class.
    /// Full-state chains keep each vector sorted descending; reduced chains
    /// carry a single counter per class.
    Counters(Vec<Vec<u16>>),
    /// Index of a learned variance partition.
    Partition(usize),
}

impl Substate {
    /// Number of nonzero counters per class (empty for partitions).
    pub fn active_per_class(&self) -> Vec<usize> {
        match self {
            Substate::Counters(cs) => cs.iter().map(|c| c.iter().filter(|&&v| v > 0).count()).collect(),
            Substate::Partition(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceState {
    pub substate: Substate,
    pub symbol: Symbol,
}

/// Sparse column-stochastic transitions.
pub type Columns = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainModel {
    substates: Vec<Substate>,
    variance: Vec<f64>,
    columns: Columns,
    stationary: Vec<f64>,
}

impl MarkovChainModel {
    /// Builds a chain after checking shapes, non-negativity and column sums.
    pub fn from_parts(substates: Vec<Substate>, variance: Vec<f64>, columns: Columns) -> Result<Self> {
        let n = substates.len();
        if n == 0 {
            return Err(Error::config("chain has no states"));
        }
        if variance.len() != n || columns.len() != n {
            return Err(Error::config("chain parts have inconsistent lengths"));
        }
        if let Some(v) = variance.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::config(format!("invalid state variance {v}")));
        }
        for (from, col) in columns.iter().enumerate() {
            let mut sum = 0.0;
            for &(to, p) in col {
                if to >= n || !(p >= 0.0) {
                    return Err(Error::config(format!("bad transition entry ({to}, {p}) in column {from}")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::config(format!("column {from} sums to {sum}")));
            }
        }
        let stationary = stationary_distribution(&columns)?;
        Ok(MarkovChainModel { substates, variance, columns, stationary })
    }

    /// One interference state with fixed variance: a memoryless channel.
    pub fn memoryless(variance: f64) -> Result<Self> {
        Self::from_parts(vec![Substate::Partition(0)], vec![variance], vec![vec![(0, 1.0)]])
    }

    /// Interferer-level states, in canonical order.
    pub fn substates(&self) -> &[Substate] {
        &self.substates
    }

    pub fn num_substates(&self) -> usize {
        self.substates.len()
    }

    /// Symbol-extended state count (`+1` and `-1` copies).
    pub fn num_states(&self) -> usize {
        2 * self.substates.len()
    }

    /// `sigma_tot^2` per interferer-level state.
    pub fn variances(&self) -> &[f64] {
        &self.variance
    }

    pub fn columns(&self) -> &Columns {
        &self.columns
    }

    /// Stationary distribution of the interferer-level chain.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Symbol-extended states: the `+1` block then the `-1` block.
    pub fn states(&self) -> Vec<InterferenceState> {
        [Symbol::Plus, Symbol::Minus]
            .into_iter()
            .flat_map(|symbol| {
                self.substates.iter().map(move |s| InterferenceState { substate: s.clone(), symbol })
            })
            .collect()
    }

    /// Silent-period states `S_0`.
    pub fn silent_states(&self) -> Vec<InterferenceState> {
        self.substates
            .iter()
            .map(|s| InterferenceState { substate: s.clone(), symbol: Symbol::Silent })
            .collect()
    }

    /// Dense interferer-level matrix, `m[to][from]`.
    pub fn interferer_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.num_substates();
        let mut m = vec![vec![0.0; n]; n];
        for (from, col) in self.columns.iter().enumerate() {
            for &(to, p) in col {
                m[to][from] += p;
            }
        }
        m
    }

    /// Dense symbol-extended data-phase matrix, `m[to][from]`.
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.num_substates();
        let small = self.interferer_matrix();
        let mut m = vec![vec![0.0; 2 * n]; 2 * n];
        for (to, row) in m.iter_mut().enumerate() {
            for (from, v) in row.iter_mut().enumerate() {
                *v = 0.5 * small[to % n][from % n];
            }
        }
        m
    }

    /// Stationary distribution of the symbol-extended chain.
    pub fn stationary_extended(&self) -> Vec<f64> {
        self.stationary.iter().chain(&self.stationary).map(|p| 0.5 * p).collect()
    }

    /// Copy with the state variances replaced, same dynamics.
    pub fn with_variances(&self, variance: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.substates.clone(), variance, self.columns.clone())
    }

    /// Debug dump: extended states and the dense matrix, row-major.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct StateDump {
            #[serde(skip_serializing_if = "Option::is_none")]
            counters: Option<Vec<Vec<u16>>>,
            #[serde(skip_serializing_if = "Option::is_none")]
            partition: Option<usize>,
            symbol: i8,
            variance: f64,
        }
        let n = self.num_substates();
        let states: Vec<StateDump> = self
            .states()
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let (counters, partition) = match s.substate {
                    Substate::Counters(c) => (Some(c), None),
                    Substate::Partition(p) => (None, Some(p)),
                };
                StateDump { counters, partition, symbol: s.symbol.value(), variance: self.variance[i % n] }
            })
            .collect();
        serde_json::json!({
            "states": states,
            "matrix": self.transition_matrix(),
            "stationary": self.stationary_extended(),
        })
    }
}

/// Sorted interferer states for one class: every subset of `{1..L_I}` as a
/// descending vector padded with zeros, in ascending lexicographic order.
pub fn enumerate_full_states(length: usize) -> Result<Vec<Vec<u16>>> {
    if length == 0 {
        return Err(Error::config("interferer length must be at least 1"));
    }
    if length >= usize::BITS as usize || (1usize << length) > STATE_BUDGET {
        return Err(Error::Capacity { requested: 1u128 << length.min(127), budget: STATE_BUDGET });
    }
    let mut states: Vec<Vec<u16>> = (0u64..(1 << length))
        .map(|mask| {
            let mut v: Vec<u16> = (1..=length as u16).rev().filter(|&c| mask >> (c - 1) & 1 == 1).collect();
            v.resize(length, 0);
            v
        })
        .collect();
    states.sort();
    Ok(states)
}

/// State count without sorting: `sum_l C(L_I, l)^2 l!`. Saturates at `u128::MAX`.
pub fn count_unsorted_states(length: usize) -> u128 {
    let mut total: u128 = 0;
    // term_l = C(L,l)^2 l! ; term_{l+1} = term_l * (L-l)^2 / (l+1)
    let mut term: u128 = 1;
    for l in 0..=length as u128 {
        total = total.saturating_add(term);
        let r = length as u128 - l.min(length as u128);
        term = match term.checked_mul(r * r) {
            Some(t) => t / (l + 1),
            None => return u128::MAX,
        };
    }
    total
}

/// `sigma_N^2 + sum_c (#nonzero counters of class c) * sigma_{I,c}^2`.
pub fn state_variance(counters: &[Vec<u16>], sigma2_n: f64, classes: &[InterfererClass]) -> f64 {
    sigma2_n
        + counters
            .iter()
            .zip(classes)
            .map(|(c, class)| c.iter().filter(|&&v| v > 0).count() as f64 * class.variance())
            .sum::<f64>()
}

/// One class's sub-chain: states plus sparse transitions.
struct SubChain {
    states: Vec<Vec<u16>>,
    columns: Columns,
}

fn push_nonzero(col: &mut Vec<(usize, f64)>, to: usize, p: f64) {
    if p > 0.0 {
        col.push((to, p));
    }
}

fn full_subchain(class: &InterfererClass) -> Result<SubChain> {
    let length = class.length();
    let states = enumerate_full_states(length)?;
    let index: std::collections::HashMap<&[u16], usize> =
        states.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let p = class.arrival_prob();
    let columns = states
        .iter()
        .map(|s| {
            // every counter advances; expired ones drop out
            let mut dec: Vec<u16> = s.iter().filter(|&&c| c > 1).map(|&c| c - 1).collect();
            dec.resize(length, 0);
            let mut arr = vec![length as u16];
            arr.extend(dec.iter().copied().filter(|&c| c > 0));
            arr.resize(length, 0);
            let mut col = Vec::with_capacity(2);
            push_nonzero(&mut col, index[dec.as_slice()], 1.0 - p);
            push_nonzero(&mut col, index[arr.as_slice()], p);
            col
        })
        .collect();
    Ok(SubChain { states, columns })
}

fn reduced_subchain(class: &InterfererClass) -> SubChain {
    let length = class.length() as u16;
    let p = class.arrival_prob();
    let states: Vec<Vec<u16>> = (0..=length).map(|c| vec![c]).collect();
    let columns = (0..=length)
        .map(|c| {
            let mut col = Vec::with_capacity(2);
            if c > 1 {
                // a new arrival is blocked while one of this class is active
                col.push(((c - 1) as usize, 1.0));
            } else {
                push_nonzero(&mut col, 0, 1.0 - p);
                push_nonzero(&mut col, length as usize, p);
            }
            col
        })
        .collect();
    SubChain { states, columns }
}

/// Product of independent per-class sub-chains; class 0 is the slowest index,
/// which keeps the concatenated counters in lexicographic order.
fn product(subs: &[SubChain], sigma2_n: f64, classes: &[InterfererClass]) -> Result<MarkovChainModel> {
    let requested: u128 = subs.iter().map(|s| s.states.len() as u128).product();
    if requested > STATE_BUDGET as u128 {
        return Err(Error::Capacity { requested, budget: STATE_BUDGET });
    }
    let total = requested as usize;
    let sizes: Vec<usize> = subs.iter().map(|s| s.states.len()).collect();
    let decode = |mut idx: usize| -> Vec<usize> {
        let mut digits = vec![0; sizes.len()];
        for k in (0..sizes.len()).rev() {
            digits[k] = idx % sizes[k];
            idx /= sizes[k];
        }
        digits
    };
    let mut substates = Vec::with_capacity(total);
    let mut variance = Vec::with_capacity(total);
    let mut columns = Vec::with_capacity(total);
    for idx in 0..total {
        let digits = decode(idx);
        let counters: Vec<Vec<u16>> = digits.iter().zip(subs).map(|(&d, s)| s.states[d].clone()).collect();
        variance.push(state_variance(&counters, sigma2_n, classes));
        substates.push(Substate::Counters(counters));
        let mut col: Vec<(usize, f64)> = vec![(0, 1.0)];
        for (k, &d) in digits.iter().enumerate() {
            let mut next = Vec::with_capacity(col.len() * 2);
            for &(acc, p) in &col {
                for &(to, q) in &subs[k].columns[d] {
                    next.push((acc * sizes[k] + to, p * q));
                }
            }
            col = next;
        }
        columns.push(col);
    }
    MarkovChainModel::from_parts(substates, variance, columns)
}

fn check_inputs(classes: &[InterfererClass], sigma2_n: f64) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::config("at least one interferer class is required"));
    }
    if !(sigma2_n.is_finite() && sigma2_n >= 0.0) {
        return Err(Error::config(format!("noise variance {sigma2_n} is invalid")));
    }
    Ok(())
}

/// Full-state chain: every overlap pattern within a class, sorted counters,
/// `2^{sum L_I}` interferer states.
pub fn build_full_chain(classes: &[InterfererClass], sigma2_n: f64) -> Result<MarkovChainModel> {
    check_inputs(classes, sigma2_n)?;
    let total_len: usize = classes.iter().map(|c| c.length()).sum();
    if total_len >= 127 || (1u128 << total_len) > STATE_BUDGET as u128 {
        return Err(Error::Capacity { requested: 1u128 << total_len.min(127), budget: STATE_BUDGET });
    }
    let subs = classes.iter().map(full_subchain).collect::<Result<Vec<_>>>()?;
    product(&subs, sigma2_n, classes)
}

/// Reduced-state chain: at most one active interferer per class,
/// `prod (L_I + 1)` interferer states.
pub fn build_reduced_chain(classes: &[InterfererClass], sigma2_n: f64) -> Result<MarkovChainModel> {
    check_inputs(classes, sigma2_n)?;
    let subs: Vec<SubChain> = classes.iter().map(reduced_subchain).collect();
    product(&subs, sigma2_n, classes)
}

/// Stationary distribution by power iteration on the lazy chain `(I + T) / 2`,
/// which has the same fixed point and is aperiodic.
pub fn stationary_distribution(columns: &Columns) -> Result<Vec<f64>> {
    let n = columns.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_ITERS {
        next.iter_mut().zip(&pi).for_each(|(x, p)| *x = 0.5 * p);
        for (from, col) in columns.iter().enumerate() {
            let mass = 0.5 * pi[from];
            for &(to, p) in col {
                next[to] += p * mass;
            }
        }
        let sum: f64 = next.iter().sum();
        delta = 0.0;
        for (p, x) in pi.iter_mut().zip(&next) {
            let v = x / sum;
            delta = delta.max((v - *p).abs());
            *p = v;
        }
        if delta < STATIONARY_TOL {
            return Ok(pi);
        }
    }
    Err(Error::Numeric(format!(
        "stationary distribution did not converge in {STATIONARY_MAX_ITERS} iterations (last change {delta:e})"
    )))
}
