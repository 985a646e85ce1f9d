//! Telegram splitting.
//!
//! A codeword of `n` symbols is cut into `n / L_S` sub-packets. Each sub-packet
//! carries `L_S / 2` data symbols, the training sequence, then the next
//! `L_S / 2` data symbols. The receiver additionally observes `L_add` silent
//! guard symbols on either side.

use crate::fec::Codeword;
use crate::{Error, LlrFrame, Result};
use serde::{Deserialize, Serialize};

/// Training sequence of the default frame.
pub const DEFAULT_TRAINING: [i8; 8] = [-1, -1, -1, 1, -1, 1, 1, 1];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSpec {
    /// `L_S`, data symbols per sub-packet. Must be even.
    pub data_symbols: usize,
    /// Training symbols `r[nu]`, antipodal.
    pub training: Vec<i8>,
    /// `L_add`, silent observations on each side of a sub-packet.
    pub guard_symbols: usize,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec { data_symbols: 28, training: DEFAULT_TRAINING.to_vec(), guard_symbols: 10 }
    }
}

/// What the transmitter sends at one trellis position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Silent,
    Data,
    Training(i8),
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if self.data_symbols == 0 || !self.data_symbols.is_multiple_of(2) {
            return Err(Error::config(format!(
                "data_symbols must be positive and even, got {}",
                self.data_symbols
            )));
        }
        if self.training.iter().any(|&r| r != 1 && r != -1) {
            return Err(Error::config("training symbols must be +1 or -1"));
        }
        Ok(())
    }

    pub fn training_len(&self) -> usize {
        self.training.len()
    }

    /// `L_tot = L_S + L_tr`.
    pub fn total_len(&self) -> usize {
        self.data_symbols + self.training.len()
    }

    /// Observed window `L_tot + 2 L_add`.
    pub fn window_len(&self) -> usize {
        self.total_len() + 2 * self.guard_symbols
    }

    /// Number of sub-packets for a codeword of `n` symbols.
    pub fn subpackets_for(&self, n: usize) -> Result<usize> {
        self.validate()?;
        if n == 0 || !n.is_multiple_of(self.data_symbols) {
            return Err(Error::config(format!(
                "codeword length {n} is not a multiple of L_S = {}",
                self.data_symbols
            )));
        }
        Ok(n / self.data_symbols)
    }

    /// Kind of position `m` within a sub-packet, `0 <= m < L_tot`.
    pub fn kind_at(&self, m: usize) -> SlotKind {
        let half = self.data_symbols / 2;
        if m >= half && m < half + self.training.len() {
            SlotKind::Training(self.training[m - half])
        } else if m < self.total_len() {
            SlotKind::Data
        } else {
            SlotKind::Silent
        }
    }

    /// Kind of each window position, guard symbols included.
    pub fn window_kinds(&self) -> Vec<SlotKind> {
        let g = self.guard_symbols;
        (0..self.window_len())
            .map(|w| if w < g { SlotKind::Silent } else { self.kind_at(w - g) })
            .collect()
    }

    /// Sub-packet positions `m` carrying data, in codeword order.
    pub fn data_positions(&self) -> impl Iterator<Item = usize> + '_ {
        let half = self.data_symbols / 2;
        (0..half).chain(half + self.training.len()..self.total_len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubPacket {
    /// Zero-based sub-packet index.
    pub index: usize,
    /// `x_i[m]` for `0 <= m < L_tot`.
    pub symbols: Vec<i8>,
}

impl SubPacket {
    /// Data symbols in codeword order.
    pub fn data(&self, fs: &FrameSpec) -> Vec<i8> {
        fs.data_positions().map(|m| self.symbols[m]).collect()
    }
}

/// Splits a codeword into sub-packets with the training sequence in the middle.
pub fn split(cw: &Codeword, fs: &FrameSpec) -> Result<Vec<SubPacket>> {
    let count = fs.subpackets_for(cw.len())?;
    let half = fs.data_symbols / 2;
    Ok(cw
        .symbols()
        .chunks_exact(fs.data_symbols)
        .take(count)
        .enumerate()
        .map(|(index, block)| {
            let mut symbols = Vec::with_capacity(fs.total_len());
            symbols.extend_from_slice(&block[..half]);
            symbols.extend_from_slice(&fs.training);
            symbols.extend_from_slice(&block[half..]);
            SubPacket { index, symbols }
        })
        .collect())
}

/// Concatenates per-sub-packet data LLRs (each `L_S` long, codeword order) into one frame.
pub fn reassemble(frames: &[Vec<f64>], fs: &FrameSpec) -> Result<LlrFrame> {
    fs.validate()?;
    if frames.is_empty() {
        return Err(Error::input("no sub-packet LLRs to reassemble"));
    }
    let mut out = Vec::with_capacity(frames.len() * fs.data_symbols);
    for (i, f) in frames.iter().enumerate() {
        if f.len() != fs.data_symbols {
            return Err(Error::input(format!(
                "sub-packet {i} has {} LLRs, expected {}",
                f.len(),
                fs.data_symbols
            )));
        }
        out.extend_from_slice(f);
    }
    Ok(LlrFrame(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fec::{encode, CodeSpec, InfoBlock};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tiny_split_follows_layout() {
        let fs = FrameSpec { data_symbols: 4, training: vec![1, -1], guard_symbols: 0 };
        let subs = split(&Codeword(vec![1, -1, -1, 1]), &fs).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].symbols, vec![1, -1, 1, -1, -1, 1]);
    }

    #[test]
    fn default_frame_has_18_subpackets() {
        let fs = FrameSpec::default();
        let cw = encode(&InfoBlock(vec![1; 162]), &CodeSpec::rate_1_3()).unwrap();
        let subs = split(&cw, &fs).unwrap();
        assert_eq!(subs.len(), 18);
        for sp in &subs {
            assert_eq!(sp.symbols.len(), 36);
            assert_eq!(&sp.symbols[14..22], &DEFAULT_TRAINING);
        }
    }

    #[test]
    fn split_matches_closed_form_indexing() {
        let fs = FrameSpec::default();
        let cw = Codeword((0..504).map(|l| if (l * 7) % 3 == 0 { 1 } else { -1 }).collect());
        let (ls, ltot) = (fs.data_symbols, fs.total_len());
        for (k, sp) in split(&cw, &fs).unwrap().iter().enumerate() {
            let i = k + 1;
            for m in 0..ltot {
                let expect = if m < ls / 2 {
                    cw.0[m + ls * (i - 1)]
                } else if m < ls / 2 + fs.training.len() {
                    fs.training[m - ls / 2]
                } else {
                    cw.0[m + ls * i - ltot]
                };
                assert_eq!(sp.symbols[m], expect);
            }
        }
    }

    #[test]
    fn single_subpacket_reassembles_halves() {
        let fs = FrameSpec { data_symbols: 6, training: vec![1, 1], guard_symbols: 3 };
        let cw = Codeword(vec![1, -1, -1, 1, 1, -1]);
        let subs = split(&cw, &fs).unwrap();
        let llrs: Vec<Vec<f64>> = subs.iter().map(|s| s.data(&fs).iter().map(|&x| x as f64).collect()).collect();
        assert_eq!(reassemble(&llrs, &fs).unwrap().0, vec![1.0, -1.0, -1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn positional_mapping_is_constant_across_trials() {
        let fs = FrameSpec::default();
        let code = CodeSpec::rate_1_3();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let cw = encode(&InfoBlock::random(162, &mut rng), &code).unwrap();
            // Tag each symbol with its index so the mapping is visible.
            let tagged: Vec<Vec<f64>> = split(&cw, &fs)
                .unwrap()
                .iter()
                .map(|sp| {
                    fs.data_positions()
                        .map(|m| (sp.index * fs.data_symbols + if m < 14 { m } else { m - 8 }) as f64)
                        .collect()
                })
                .collect();
            let frame = reassemble(&tagged, &fs).unwrap();
            assert!(frame.0.iter().enumerate().all(|(l, &v)| v == l as f64));
        }
    }

    #[test]
    fn errors() {
        let fs = FrameSpec::default();
        assert!(split(&Codeword(vec![1; 30]), &fs).is_err());
        assert!(reassemble(&[vec![0.0; 27]], &fs).is_err());
        let odd = FrameSpec { data_symbols: 5, ..FrameSpec::default() };
        assert!(odd.validate().is_err());
    }

    #[test]
    fn window_kinds_layout() {
        let fs = FrameSpec { data_symbols: 4, training: vec![1, -1], guard_symbols: 2 };
        use SlotKind::*;
        assert_eq!(
            fs.window_kinds(),
            vec![Silent, Silent, Data, Data, Training(1), Training(-1), Data, Data, Silent, Silent]
        );
    }

    proptest! {
        #[test]
        fn split_reassemble_inverse(half in 1usize..20, ltr in 0usize..10, count in 1usize..6, seed in any::<u64>()) {
            let fs = FrameSpec { data_symbols: 2 * half, training: vec![1; ltr], guard_symbols: 0 };
            let n = fs.data_symbols * count;
            let mut s = crate::rng::SplitMix64::new(seed);
            let cw = Codeword((0..n).map(|_| if s.next_u64() & 1 == 0 { 1 } else { -1 }).collect());
            let subs = split(&cw, &fs).unwrap();
            let llrs: Vec<Vec<f64>> = subs.iter().map(|sp| sp.data(&fs).iter().map(|&x| x as f64 * 2.0).collect()).collect();
            let frame = reassemble(&llrs, &fs).unwrap();
            prop_assert_eq!(frame.len(), n);
            for (l, &c) in cw.symbols().iter().enumerate() {
                prop_assert_eq!(frame[l], c as f64 * 2.0);
            }
        }
    }
}
