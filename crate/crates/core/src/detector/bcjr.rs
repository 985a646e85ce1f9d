//! Forward-backward recursion over the symbol-extended chain.
//!
//! The transmit symbol is independent of the interference state, so the
//! backward value of `(j, x)` does not depend on `x`. Only interferer-level
//! vectors are stored: the one-step prediction `pred_t(j)` and the backward
//! value `b_t(j)`. The joint posterior is then
//! `lambda_t(j, x) ~ pred_t(j) * rho_t(x) * e_t(j, x) * b_t(j)`.

use super::TrellisSection;
use crate::telegram::SlotKind;
use crate::llr::clamp_llr;
use crate::markov::MarkovChainModel;
use crate::{Error, Result};

const VARIANCE_FLOOR: f64 = 1e-300;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorFrame {
    /// `Pr(x = +1 | y)` per window position (0 in silent positions).
    pub plus: Vec<f64>,
    /// `Pr(x = -1 | y)` per window position (0 in silent positions).
    pub minus: Vec<f64>,
    /// Clamped LLR per window position (0 in silent positions).
    pub llr: Vec<f64>,
    /// Interferer-state marginals per window position, if requested.
    pub states: Option<Vec<Vec<f64>>>,
}

fn log_gaussian(y: f64, mean: f64, variance: f64) -> f64 {
    let v = variance.max(VARIANCE_FLOOR);
    let d = y - mean;
    -0.5 * (d * d / v + LN_2PI + v.ln())
}

/// Gaussian density of `y` around `mean`; a zero variance is floored, so a
/// miss evaluates to 0 and a hit to a very large value.
pub fn emission_likelihood(y: f64, mean: f64, variance: f64) -> f64 {
    log_gaussian(y, mean, variance).exp()
}

/// Distinct state variances and each state's group.
struct VarianceGroups {
    values: Vec<f64>,
    group_of: Vec<usize>,
}

impl VarianceGroups {
    fn new(variances: &[f64]) -> Self {
        let mut values: Vec<f64> = variances.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let group_of = variances
            .iter()
            .map(|v| values.binary_search_by(|x| x.total_cmp(v)).unwrap())
            .collect();
        VarianceGroups { values, group_of }
    }
}

/// Emission weights of one step, `(weight of +1 or single symbol, weight of -1)`,
/// per variance group, scaled so the largest is 1.
fn step_emissions(y: f64, section: SlotKind, groups: &VarianceGroups, out: &mut Vec<(f64, f64)>) {
    out.clear();
    let symbols: (f64, Option<f64>) = match section {
        SlotKind::Silent => (0.0, None),
        SlotKind::Training(r) => (r as f64, None),
        SlotKind::Data => (1.0, Some(-1.0)),
    };
    let mut max = f64::NEG_INFINITY;
    for &v in &groups.values {
        let a = log_gaussian(y, symbols.0, v);
        let b = symbols.1.map_or(f64::NEG_INFINITY, |m| log_gaussian(y, m, v));
        max = max.max(a).max(b);
        out.push((a, b));
    }
    let rho = if symbols.1.is_some() { 0.5 } else { 1.0 };
    for e in out.iter_mut() {
        *e = (rho * (e.0 - max).exp(), rho * (e.1 - max).exp());
    }
}

fn normalize(v: &mut [f64], step: usize) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::Degenerate { step });
    }
    v.iter_mut().for_each(|x| *x /= sum);
    Ok(())
}

/// Runs the forward-backward recursion.
///
/// The forward recursion starts from the stationary distribution; the
/// backward values start uniform. Both are normalized at every step.
pub fn bcjr(
    model: &MarkovChainModel,
    sections: &[TrellisSection],
    y: &[f64],
    keep_states: bool,
) -> Result<PosteriorFrame> {
    if sections.len() != y.len() {
        return Err(Error::input(format!(
            "{} observations for {} trellis sections",
            y.len(),
            sections.len()
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("observation {i} is not finite")));
    }
    let len = y.len();
    if len == 0 {
        return Ok(PosteriorFrame { plus: vec![], minus: vec![], llr: vec![], states: keep_states.then(Vec::new) });
    }
    let n = model.num_substates();
    let columns = model.columns();
    let groups = VarianceGroups::new(model.variances());

    let mut emissions: Vec<Vec<(f64, f64)>> = vec![Vec::new(); len];
    for t in 0..len {
        step_emissions(y[t], sections[t].kind, &groups, &mut emissions[t]);
    }
    // per-state emission summed over the permitted symbols
    let marginal = |t: usize, j: usize| {
        let e = emissions[t][groups.group_of[j]];
        e.0 + e.1
    };

    // forward: pred[t] is the distribution of s_t given y_0..y_{t-1}
    let mut pred = vec![vec![0.0; n]; len];
    pred[0].copy_from_slice(model.stationary());
    let mut alpha = vec![0.0; n];
    for t in 0..len {
        for j in 0..n {
            alpha[j] = pred[t][j] * marginal(t, j);
        }
        normalize(&mut alpha, t)?;
        if t + 1 < len {
            let next = &mut pred[t + 1];
            for (i, col) in columns.iter().enumerate() {
                let a = alpha[i];
                if a != 0.0 {
                    for &(j, p) in col {
                        next[j] += p * a;
                    }
                }
            }
        }
    }

    // backward
    let mut back = vec![vec![0.0; n]; len];
    back[len - 1].iter_mut().for_each(|b| *b = 1.0 / n as f64);
    let mut weighted = vec![0.0; n];
    for t in (1..len).rev() {
        for j in 0..n {
            weighted[j] = back[t][j] * marginal(t, j);
        }
        let prev = &mut back[t - 1];
        for (i, col) in columns.iter().enumerate() {
            prev[i] = col.iter().map(|&(j, p)| p * weighted[j]).sum();
        }
        normalize(prev, t - 1)?;
    }

    let mut frame = PosteriorFrame {
        plus: vec![0.0; len],
        minus: vec![0.0; len],
        llr: vec![0.0; len],
        states: keep_states.then(|| Vec::with_capacity(len)),
    };
    for t in 0..len {
        let (mut sp, mut sm) = (0.0, 0.0);
        let mut marg = keep_states.then(|| vec![0.0; n]);
        for j in 0..n {
            let w = pred[t][j] * back[t][j];
            let e = emissions[t][groups.group_of[j]];
            sp += w * e.0;
            sm += w * e.1;
            if let Some(m) = marg.as_mut() {
                m[j] = w * (e.0 + e.1);
            }
        }
        let total = sp + sm;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Degenerate { step: t });
        }
        match sections[t].kind {
            SlotKind::Silent => {}
            SlotKind::Training(r) => {
                if r > 0 {
                    frame.plus[t] = 1.0;
                } else {
                    frame.minus[t] = 1.0;
                }
            }
            SlotKind::Data => {
                frame.plus[t] = sp / total;
                frame.minus[t] = sm / total;
                frame.llr[t] = if sp == 0.0 && sm == 0.0 { 0.0 } else { clamp_llr(sp.ln() - sm.ln()) };
            }
        }
        if let (Some(states), Some(mut m)) = (frame.states.as_mut(), marg) {
            m.iter_mut().for_each(|x| *x /= total);
            states.push(m);
        }
    }
    Ok(frame)
}
