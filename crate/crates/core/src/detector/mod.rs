//! Symbol detectors producing per-bit LLRs for one sub-packet window.
//!
//! The MAP detectors run [`bcjr`] over an injected [`MarkovChainModel`]
//! (full-state, reduced-state or learned). Guard and training positions
//! constrain the trellis through their [`SlotKind`].

mod baselines;
mod bcjr;

pub use baselines::{detect_const_var, detect_erasure, detect_genie, erasure_mask};
pub use bcjr::{bcjr, emission_likelihood, PosteriorFrame};

use crate::interference::ChannelRealization;
use crate::markov::MarkovChainModel;
use crate::telegram::{FrameSpec, SlotKind};
use crate::{Error, LlrFrame, Result};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisSection {
    /// Time index `m`, `-L_add <= m < L_tot + L_add`.
    pub m: isize,
    pub kind: SlotKind,
}

/// Trellis sections covering the observed window of a sub-packet.
pub fn sections(fs: &FrameSpec) -> Vec<TrellisSection> {
    let g = fs.guard_symbols as isize;
    fs.window_kinds()
        .into_iter()
        .enumerate()
        .map(|(w, kind)| TrellisSection { m: w as isize - g, kind })
        .collect()
}

fn check_window(realization: &ChannelRealization, fs: &FrameSpec) -> Result<()> {
    fs.validate()?;
    if realization.y.len() != fs.window_len() || realization.guard != fs.guard_symbols {
        return Err(Error::input(format!(
            "realization window {} (guard {}) does not match frame window {} (guard {})",
            realization.y.len(),
            realization.guard,
            fs.window_len(),
            fs.guard_symbols
        )));
    }
    Ok(())
}

/// Full posteriors for a sub-packet window.
pub fn posteriors(
    realization: &ChannelRealization,
    model: &MarkovChainModel,
    fs: &FrameSpec,
    keep_states: bool,
) -> Result<PosteriorFrame> {
    check_window(realization, fs)?;
    bcjr(model, &sections(fs), &realization.y, keep_states)
}

/// MAP detection: LLRs of the `L_S` data symbols in codeword order.
pub fn detect_map(realization: &ChannelRealization, model: &MarkovChainModel, fs: &FrameSpec) -> Result<LlrFrame> {
    let post = posteriors(realization, model, fs, false)?;
    Ok(LlrFrame(realization.data_indices(fs).map(|w| post.llr[w]).collect()))
}

/// Per-position dump: `m, y, posterior_plus, llr, sigma2`.
pub fn write_diagnostics<W: Write>(
    realization: &ChannelRealization,
    post: &PosteriorFrame,
    fs: &FrameSpec,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "y", "posterior_plus", "llr", "sigma2"])?;
    for (s, idx) in sections(fs).iter().zip(0..) {
        w.write_record([
            s.m.to_string(),
            realization.y[idx].to_string(),
            post.plus[idx].to_string(),
            post.llr[idx].to_string(),
            realization.variance[idx].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fec::{bit_to_symbol, Codeword};
    use crate::interference::{synthesize, InterfererClass};
    use crate::markov::{build_full_chain, build_reduced_chain, Substate};
    use crate::telegram::{split, SubPacket};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn kinds(fs: &FrameSpec) -> Vec<TrellisSection> {
        sections(fs)
    }

    /// Exhaustive path sum over the dense symbol-extended chain. Constrained
    /// positions keep only the extended states of the permitted symbol.
    fn brute_force(model: &MarkovChainModel, secs: &[TrellisSection], y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = model.num_substates();
        let ext = model.transition_matrix();
        let init = model.stationary_extended();
        let var = model.variances();
        let allowed = |t: usize, s: usize| match secs[t].kind {
            SlotKind::Data => true,
            SlotKind::Silent => s < n,
            SlotKind::Training(r) => (r > 0) == (s < n),
        };
        let emission = |t: usize, s: usize| {
            let mean = match secs[t].kind {
                SlotKind::Silent => 0.0,
                _ => if s < n { 1.0 } else { -1.0 },
            };
            let v = var[s % n];
            (-(y[t] - mean).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
        };
        let len = y.len();
        let mut acc = vec![vec![0.0; 2 * n]; len];
        let mut path = vec![0usize; len];
        fn rec(
            t: usize,
            w: f64,
            path: &mut Vec<usize>,
            acc: &mut Vec<Vec<f64>>,
            ext: &[Vec<f64>],
            init: &[f64],
            allowed: &dyn Fn(usize, usize) -> bool,
            emission: &dyn Fn(usize, usize) -> f64,
        ) {
            let len = path.len();
            if t == len {
                for (tt, &s) in path.iter().enumerate() {
                    acc[tt][s] += w;
                }
                return;
            }
            for s in 0..init.len() {
                if !allowed(t, s) {
                    continue;
                }
                let p = if t == 0 { init[s] } else { ext[s][path[t - 1]] };
                let nw = w * p * emission(t, s);
                if nw == 0.0 {
                    continue;
                }
                path[t] = s;
                rec(t + 1, nw, path, acc, ext, init, allowed, emission);
            }
        }
        rec(0, 1.0, &mut path, &mut acc, &ext, &init, &allowed, &emission);
        let plus = acc
            .iter()
            .map(|a| {
                let total: f64 = a.iter().sum();
                a[..n].iter().sum::<f64>() / total
            })
            .collect();
        let marg = acc
            .iter()
            .map(|a| {
                let total: f64 = a.iter().sum();
                (0..n).map(|j| (a[j] + a[j + n]) / total).collect()
            })
            .collect();
        (plus, marg)
    }

    fn random_y(len: usize, seed: u64, scale: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| {
                let x: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
                x + scale * rng.sample::<f64, _>(StandardNormal)
            })
            .collect()
    }

    fn check_against_brute_force(model: &MarkovChainModel, secs: &[TrellisSection], y: &[f64]) {
        let post = bcjr(model, secs, y, true).unwrap();
        let (plus, marg) = brute_force(model, secs, y);
        for t in 0..y.len() {
            let p = match secs[t].kind {
                SlotKind::Silent => 0.0,
                _ => plus[t],
            };
            assert!((post.plus[t] - p).abs() < 1e-9, "t={t}: {} vs {p}", post.plus[t]);
            if secs[t].kind != SlotKind::Silent {
                assert!((post.plus[t] + post.minus[t] - 1.0).abs() < 1e-9);
            }
            for (a, b) in post.states.as_ref().unwrap()[t].iter().zip(&marg[t]) {
                assert!((a - b).abs() < 1e-9, "t={t} state marginal {a} vs {b}");
            }
        }
    }

    #[test]
    fn matches_exhaustive_path_sum_on_small_chains() {
        let framed = FrameSpec { data_symbols: 2, training: vec![-1, 1], guard_symbols: 2 };
        let data_only = FrameSpec { data_symbols: 8, training: vec![], guard_symbols: 0 };
        let models = [
            build_full_chain(&[InterfererClass::new(2, 2.0, 0.5).unwrap()], 0.5).unwrap(),
            build_reduced_chain(&[InterfererClass::new(3, 4.0, 0.9).unwrap()], 0.3).unwrap(),
            build_full_chain(&[InterfererClass::new(1, 1.0, 0.4).unwrap(), InterfererClass::new(1, 3.0, 0.2).unwrap()], 0.2)
                .unwrap(),
        ];
        for (k, model) in models.iter().enumerate() {
            assert!(model.num_states() <= 8);
            for (f, fs) in [&framed, &data_only].into_iter().enumerate() {
                let secs = kinds(fs);
                assert_eq!(secs.len(), 8);
                let y = random_y(8, (k * 10 + f) as u64, 1.2);
                check_against_brute_force(model, &secs, &y);
            }
        }
    }

    #[test]
    fn matches_exhaustive_path_sum_on_learned_style_chain() {
        let columns = vec![
            vec![(0, 0.7), (1, 0.2), (3, 0.1)],
            vec![(0, 0.3), (1, 0.4), (2, 0.3)],
            vec![(2, 0.5), (3, 0.5)],
            vec![(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)],
        ];
        let model = MarkovChainModel::from_parts(
            (0..4).map(Substate::Partition).collect(),
            vec![0.1, 0.8, 3.0, 12.0],
            columns,
        )
        .unwrap();
        let fs = FrameSpec { data_symbols: 4, training: vec![1], guard_symbols: 1 };
        let secs: Vec<TrellisSection> = kinds(&fs).into_iter().chain([TrellisSection { m: 5, kind: SlotKind::Data }]).collect();
        let secs = &secs[..7];
        let y = random_y(7, 99, 2.0);
        check_against_brute_force(&model, secs, &y);
    }

    #[test]
    fn memoryless_chain_gives_closed_form() {
        let fs = FrameSpec::default();
        let y = random_y(fs.window_len(), 5, 1.0);
        for sigma2 in [0.3, 1.0, 2.5] {
            let model = MarkovChainModel::memoryless(sigma2).unwrap();
            let post = bcjr(&model, &sections(&fs), &y, false).unwrap();
            for (t, s) in sections(&fs).iter().enumerate() {
                match s.kind {
                    SlotKind::Data => assert!((post.llr[t] - 2.0 * y[t] / sigma2).abs() < 1e-9),
                    SlotKind::Training(r) => {
                        assert_eq!(if r > 0 { post.plus[t] } else { post.minus[t] }, 1.0)
                    }
                    SlotKind::Silent => assert_eq!(post.llr[t], 0.0),
                }
            }
        }
    }

    #[test]
    fn equal_variance_states_are_memoryless() {
        let model = build_full_chain(&[InterfererClass::new(3, 0.0, 0.7).unwrap()], 0.8).unwrap();
        let fs = FrameSpec::default();
        let y = random_y(fs.window_len(), 6, 1.0);
        let post = bcjr(&model, &sections(&fs), &y, false).unwrap();
        for w in fs.data_positions().map(|m| m + fs.guard_symbols) {
            assert!((post.llr[w] - 2.0 * y[w] / 0.8).abs() < 1e-9);
        }
    }

    #[test]
    fn emission_values() {
        assert!((emission_likelihood(0.0, 1.0, 1.0) - 0.241_970_724_519_143_37).abs() < 1e-15);
        let peak = emission_likelihood(0.7, 0.7, 3.0);
        assert!((peak - 1.0 / (2.0 * std::f64::consts::PI * 3.0).sqrt()).abs() < 1e-15);
        assert!((emission_likelihood(0.0, 0.0, 2.0) - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(emission_likelihood(0.1, 0.0, 0.0), 0.0);
    }

    fn default_subpacket(seed: u64, fs: &FrameSpec) -> SubPacket {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cw = Codeword((0..fs.data_symbols).map(|_| bit_to_symbol(rng.random_range(0..2))).collect());
        split(&cw, fs).unwrap().remove(0)
    }

    #[test]
    fn guard_observations_change_posteriors() {
        let class = InterfererClass::new(2, 2.0, 0.5).unwrap();
        let model = build_full_chain(&[class.clone()], 0.5).unwrap();
        let fs = FrameSpec::default();
        let sp = default_subpacket(1, &fs);
        let r = synthesize(&sp, &fs, &[class], 0.5, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let with_guard = detect_map(&r, &model, &fs).unwrap();
        let fs0 = FrameSpec { guard_symbols: 0, ..fs.clone() };
        let mut r0 = r.clone();
        let g = fs.guard_symbols;
        r0.y = r.y[g..g + fs.total_len()].to_vec();
        r0.variance = r.variance[g..g + fs.total_len()].to_vec();
        r0.guard = 0;
        let without = detect_map(&r0, &model, &fs0).unwrap();
        let diff = with_guard.as_slice().iter().zip(without.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff > 1e-6, "max difference {diff}");
    }

    #[test]
    fn sign_flip_symmetry() {
        let model = build_reduced_chain(&[InterfererClass::new(4, 3.0, 0.5).unwrap()], 0.4).unwrap();
        let fs = FrameSpec::default();
        let flipped = FrameSpec { training: fs.training.iter().map(|r| -r).collect(), ..fs.clone() };
        let y = random_y(fs.window_len(), 11, 1.5);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = bcjr(&model, &sections(&fs), &y, false).unwrap();
        let b = bcjr(&model, &sections(&flipped), &neg, false).unwrap();
        for (x, z) in a.llr.iter().zip(&b.llr) {
            assert_eq!(*x, -*z);
        }
    }

    #[test]
    fn high_snr_without_interference_is_error_free() {
        let class = InterfererClass::with_arrival_prob(2, 2.0, 0.0).unwrap();
        let sigma2 = 0.01;
        let model = build_full_chain(&[class.clone()], sigma2).unwrap();
        let fs = FrameSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut errors, mut total) = (0usize, 0usize);
        while total < 10_000 {
            let sp = default_subpacket(total as u64, &fs);
            let r = synthesize(&sp, &fs, &[class.clone()], sigma2, &mut rng).unwrap();
            let llr = detect_map(&r, &model, &fs).unwrap();
            for (l, x) in llr.as_slice().iter().zip(sp.data(&fs)) {
                errors += usize::from((*l > 0.0) != (x > 0));
                total += 1;
            }
        }
        assert!((errors as f64) / (total as f64) < 1e-3);
    }

    #[test]
    fn impossible_observation_is_degenerate() {
        let model = build_full_chain(&[InterfererClass::with_arrival_prob(1, 1.0, 0.0).unwrap()], 0.0).unwrap();
        let secs = [TrellisSection { m: 0, kind: SlotKind::Silent }, TrellisSection { m: 1, kind: SlotKind::Data }];
        assert!(matches!(bcjr(&model, &secs, &[0.0, 0.5], false), Err(Error::Degenerate { step: 1 })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = MarkovChainModel::memoryless(1.0).unwrap();
        let secs = sections(&FrameSpec::default());
        assert!(bcjr(&model, &secs, &[0.0; 3], false).is_err());
        let mut y = vec![0.0; secs.len()];
        y[4] = f64::NAN;
        assert!(matches!(bcjr(&model, &secs, &y, false), Err(Error::Input(_))));
    }

    #[test]
    fn diagnostics_csv() {
        let class = InterfererClass::new(2, 2.0, 0.5).unwrap();
        let fs = FrameSpec::default();
        let r = synthesize(&default_subpacket(2, &fs), &fs, &[class.clone()], 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let model = build_full_chain(&[class], 0.5).unwrap();
        let post = posteriors(&r, &model, &fs, false).unwrap();
        let mut buf = Vec::new();
        write_diagnostics(&r, &post, &fs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m,y,posterior_plus,llr,sigma2\n-10,"));
        assert_eq!(text.lines().count(), fs.window_len() + 1);
    }
}
