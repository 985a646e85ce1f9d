//! Non-trellis and two-state reference detectors.

use super::posteriors;
use crate::interference::ChannelRealization;
use crate::llr::clamp_llr;
use crate::markov::MarkovChainModel;
use crate::telegram::FrameSpec;
use crate::{Error, LlrFrame, Result};

/// Genie-aided detector: knows the true `sigma_tot^2` of every symbol.
pub fn detect_genie(realization: &ChannelRealization, fs: &FrameSpec) -> LlrFrame {
    LlrFrame(
        realization
            .data_indices(fs)
            .map(|w| clamp_llr(2.0 * realization.y[w] / realization.variance[w]))
            .collect(),
    )
}

/// Constant-variance detector: `llr = y`, which leaves max-correlation
/// decoding unchanged for any positive scale.
pub fn detect_const_var(realization: &ChannelRealization, fs: &FrameSpec) -> LlrFrame {
    LlrFrame(realization.data_indices(fs).map(|w| clamp_llr(realization.y[w])).collect())
}

fn good_state(model: &MarkovChainModel) -> Result<usize> {
    if model.num_substates() != 2 {
        return Err(Error::config(format!(
            "erasure detector needs a two-state model, got {} states",
            model.num_substates()
        )));
    }
    let v = model.variances();
    Ok(if v[0] <= v[1] { 0 } else { 1 })
}

/// Data positions (codeword order) whose bad-state posterior exceeds 0.5.
/// A posterior of exactly 0.5 counts as good.
pub fn erasure_mask(realization: &ChannelRealization, model: &MarkovChainModel, fs: &FrameSpec) -> Result<Vec<bool>> {
    let good = good_state(model)?;
    let post = posteriors(realization, model, fs, true)?;
    let states = post.states.expect("state marginals requested");
    Ok(realization.data_indices(fs).map(|w| states[w][1 - good] > 0.5).collect())
}

/// Erasure detector: zero LLR on bad symbols, `2y / sigma_good^2` elsewhere.
pub fn detect_erasure(realization: &ChannelRealization, model: &MarkovChainModel, fs: &FrameSpec) -> Result<LlrFrame> {
    let good = good_state(model)?;
    let sigma2_good = model.variances()[good];
    let mask = erasure_mask(realization, model, fs)?;
    Ok(LlrFrame(
        realization
            .data_indices(fs)
            .zip(mask)
            .map(|(w, bad)| if bad { 0.0 } else { clamp_llr(2.0 * realization.y[w] / sigma2_good) })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::Substate;

    fn realization(y: Vec<f64>, variance: Vec<f64>, fs: &FrameSpec) -> ChannelRealization {
        let len = y.len();
        ChannelRealization {
            y,
            symbols: vec![0; len],
            variance,
            active_counts: vec![],
            noise_variance: 1.0,
            guard: fs.guard_symbols,
        }
    }

    fn tiny_frame() -> FrameSpec {
        FrameSpec { data_symbols: 2, training: vec![], guard_symbols: 0 }
    }

    fn two_state(good: f64, bad: f64, stay: f64) -> MarkovChainModel {
        MarkovChainModel::from_parts(
            vec![Substate::Partition(0), Substate::Partition(1)],
            vec![good, bad],
            vec![vec![(0, stay), (1, 1.0 - stay)], vec![(0, 1.0 - stay), (1, stay)]],
        )
        .unwrap()
    }

    #[test]
    fn genie_arithmetic() {
        let fs = tiny_frame();
        let r = realization(vec![1.0, -0.5], vec![2.0, 1.0], &fs);
        assert_eq!(detect_genie(&r, &fs).as_slice(), &[1.0, -1.0]);
        let r = realization(vec![0.7, 0.7], vec![7.0, 14.0], &fs);
        let l = detect_genie(&r, &fs);
        assert_eq!(l[0], 2.0 * 0.7 / 7.0);
        assert_eq!(l[1], l[0] / 2.0);
    }

    #[test]
    fn const_var_is_identity_and_matches_genie_at_two() {
        let fs = tiny_frame();
        let r = realization(vec![0.3, -1.2], vec![2.0, 2.0], &fs);
        assert_eq!(detect_const_var(&r, &fs).as_slice(), &[0.3, -1.2]);
        assert_eq!(detect_const_var(&r, &fs), detect_genie(&r, &fs));
    }

    #[test]
    fn clean_high_snr_has_no_erasures() {
        let fs = FrameSpec { data_symbols: 20, training: vec![], guard_symbols: 0 };
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { -1.02 } else { 0.97 }).collect();
        let r = realization(y.clone(), vec![0.01; 20], &fs);
        let model = two_state(0.01, 5.0, 0.9);
        let llr = detect_erasure(&r, &model, &fs).unwrap();
        for (l, v) in llr.as_slice().iter().zip(&y) {
            assert_eq!(*l, clamp_llr(2.0 * v / 0.01));
        }
    }

    #[test]
    fn heavy_burst_is_erased() {
        let fs = FrameSpec { data_symbols: 12, training: vec![], guard_symbols: 0 };
        let mut y = vec![1.0, -1.0, 0.9, -1.1, 1.05, -0.95, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        for (k, v) in [9.0, -12.0, 11.0, -8.5].into_iter().enumerate() {
            y[4 + k] = v;
        }
        let r = realization(y, vec![0.05; 12], &fs);
        let model = two_state(0.05, 5.0, 0.8);
        let mask = erasure_mask(&r, &model, &fs).unwrap();
        assert_eq!(&mask[4..8], &[true; 4]);
        assert!(mask[..3].iter().all(|b| !b) && mask[9..].iter().all(|b| !b));
        let llr = detect_erasure(&r, &model, &fs).unwrap();
        assert!(llr.as_slice()[4..8].iter().all(|&l| l == 0.0));
    }

    #[test]
    fn tie_counts_as_good() {
        // equal variances make the state posterior exactly the prior 1/2
        let fs = tiny_frame();
        let model = two_state(1.0, 1.0, 0.5);
        let r = realization(vec![0.4, -0.2], vec![1.0; 2], &fs);
        assert_eq!(erasure_mask(&r, &model, &fs).unwrap(), vec![false, false]);
        assert_eq!(detect_erasure(&r, &model, &fs).unwrap().as_slice(), &[0.8, -0.4]);
    }

    #[test]
    fn needs_two_states() {
        let fs = tiny_frame();
        let r = realization(vec![0.0, 0.0], vec![1.0; 2], &fs);
        let m = MarkovChainModel::memoryless(1.0).unwrap();
        assert!(detect_erasure(&r, &m, &fs).unwrap_err().is_config());
    }
}
