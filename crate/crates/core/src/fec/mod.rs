//! Convolutional coding chain: encoder with zero tail, periodic puncturing,
//! a seeded interleaver and a soft-input Viterbi decoder.
//!
//! Bits map to antipodal symbols as `0 -> +1`, `1 -> -1` everywhere in the crate.

mod interleaver;
mod viterbi;

pub use interleaver::Interleaver;
pub use viterbi::{path_metric, viterbi_decode};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Generators of the default rate-1/3 code, octal.
pub const DEFAULT_GENERATORS: [u32; 3] = [0o133, 0o145, 0o175];
/// Information bits per telegram; with 6 tail bits this gives 168 encoder inputs.
pub const DEFAULT_INFO_BITS: usize = 162;
/// Keep mask giving rate 2/5 from the rate-1/3 mother code.
pub const PUNCTURE_2_5: [bool; 6] = [true, true, true, true, false, true];
/// Keep mask giving rate 1/2 from the rate-1/3 mother code.
pub const PUNCTURE_1_2: [bool; 6] = [true, false, true, true, false, true];

/// Antipodal mapping of a code bit.
#[inline]
pub fn bit_to_symbol(bit: u8) -> i8 {
    if bit == 0 {
        1
    } else {
        -1
    }
}

/// Convolutional code description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CodeSpecFile", into = "CodeSpecFile")]
pub struct CodeSpec {
    memory: usize,
    generators: Vec<u32>,
    puncture: Vec<bool>,
    info_bits: usize,
}

/// On-disk layout of [`CodeSpec`]: octal generator strings and a 0/1 keep mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CodeSpecFile {
    memory: usize,
    generators: Vec<String>,
    #[serde(default)]
    puncture: Vec<u8>,
    info_bits: usize,
}

impl TryFrom<CodeSpecFile> for CodeSpec {
    type Error = Error;

    fn try_from(file: CodeSpecFile) -> Result<Self> {
        let generators = file
            .generators
            .iter()
            .map(|g| {
                u32::from_str_radix(g.trim(), 8)
                    .map_err(|_| Error::config(format!("generator {g:?} is not octal")))
            })
            .collect::<Result<Vec<_>>>()?;
        let puncture = file
            .puncture
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::config("puncture mask entries must be 0 or 1")),
            })
            .collect::<Result<Vec<_>>>()?;
        CodeSpec::new(file.memory, generators, puncture, file.info_bits)
    }
}

impl From<CodeSpec> for CodeSpecFile {
    fn from(code: CodeSpec) -> Self {
        CodeSpecFile {
            memory: code.memory,
            generators: code.generators.iter().map(|g| format!("{g:o}")).collect(),
            puncture: code.puncture.iter().map(|&b| b as u8).collect(),
            info_bits: code.info_bits,
        }
    }
}

impl CodeSpec {
    pub fn new(memory: usize, generators: Vec<u32>, puncture: Vec<bool>, info_bits: usize) -> Result<Self> {
        if memory == 0 || memory > 16 {
            return Err(Error::config(format!("memory {memory} outside 1..=16")));
        }
        if generators.is_empty() {
            return Err(Error::config("at least one generator is required"));
        }
        let limit = 1u32 << (memory + 1);
        if let Some(g) = generators.iter().find(|&&g| g == 0 || g >= limit) {
            return Err(Error::config(format!(
                "generator {g:o} does not fit constraint length {}",
                memory + 1
            )));
        }
        if info_bits == 0 {
            return Err(Error::config("info_bits must be positive"));
        }
        let code = CodeSpec { memory, generators, puncture, info_bits };
        if !code.puncture.is_empty() {
            if !code.puncture.iter().any(|&k| k) {
                return Err(Error::config("puncture mask drops every bit"));
            }
            if !code.mother_len().is_multiple_of(code.puncture.len()) {
                return Err(Error::config(format!(
                    "puncture period {} does not divide {} coded bits",
                    code.puncture.len(),
                    code.mother_len()
                )));
            }
        }
        Ok(code)
    }

    /// Rate-1/3 mother code, 162 information bits, no puncturing.
    pub fn rate_1_3() -> Self {
        Self::new(6, DEFAULT_GENERATORS.to_vec(), Vec::new(), DEFAULT_INFO_BITS).unwrap()
    }

    pub fn rate_2_5() -> Self {
        Self::new(6, DEFAULT_GENERATORS.to_vec(), PUNCTURE_2_5.to_vec(), DEFAULT_INFO_BITS).unwrap()
    }

    pub fn rate_1_2() -> Self {
        Self::new(6, DEFAULT_GENERATORS.to_vec(), PUNCTURE_1_2.to_vec(), DEFAULT_INFO_BITS).unwrap()
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn puncture_pattern(&self) -> &[bool] {
        &self.puncture
    }

    pub fn info_bits(&self) -> usize {
        self.info_bits
    }

    pub fn outputs(&self) -> usize {
        self.generators.len()
    }

    pub fn num_states(&self) -> usize {
        1 << self.memory
    }

    /// Encoder input length including the zero tail.
    pub fn input_len(&self) -> usize {
        self.info_bits + self.memory
    }

    /// Coded bits before puncturing.
    pub fn mother_len(&self) -> usize {
        self.input_len() * self.outputs()
    }

    /// Transmitted coded bits `n`.
    pub fn codeword_len(&self) -> usize {
        if self.puncture.is_empty() {
            return self.mother_len();
        }
        let kept = self.puncture.iter().filter(|&&k| k).count();
        self.mother_len() / self.puncture.len() * kept
    }

    /// `(1, outputs)`.
    pub fn base_rate(&self) -> (usize, usize) {
        (1, self.outputs())
    }

    /// Base rate scaled by `period / kept`, reduced.
    pub fn effective_rate(&self) -> (usize, usize) {
        let (num, den) = if self.puncture.is_empty() {
            (1, self.outputs())
        } else {
            let kept = self.puncture.iter().filter(|&&k| k).count();
            (self.puncture.len(), self.outputs() * kept)
        };
        let g = gcd(num, den);
        (num / g, den / g)
    }

    /// Shift-register update: the newest input becomes the most significant state bit.
    #[inline]
    pub(crate) fn next_state(&self, state: usize, input: u8) -> usize {
        ((input as usize) << (self.memory - 1)) | (state >> 1)
    }

    /// Output bits for the transition (`state`, `input`), one per generator.
    ///
    /// Generator bit `memory` taps the current input and bit `memory - j` taps the
    /// input delayed by `j`.
    #[inline]
    pub(crate) fn output_bits(&self, state: usize, input: u8) -> impl Iterator<Item = u8> + '_ {
        let register = ((input as u32) << self.memory) | state as u32;
        self.generators.iter().map(move |g| ((g & register).count_ones() & 1) as u8)
    }

    /// True if coded-bit position `index` (pre-puncturing) is transmitted.
    #[inline]
    pub(crate) fn keeps(&self, index: usize) -> bool {
        self.puncture.is_empty() || self.puncture[index % self.puncture.len()]
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Information bits of one telegram.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InfoBlock(pub Vec<u8>);

impl InfoBlock {
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn random<R: rand::Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        InfoBlock((0..len).map(|_| rng.random::<bool>() as u8).collect())
    }
}

/// Antipodal coded symbols `c[l]` in transmit order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Codeword(pub Vec<i8>);

impl Codeword {
    pub fn symbols(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mother-code bits (0/1) for `info` followed by the zero tail, no puncturing.
pub fn encode_bits(info: &InfoBlock, code: &CodeSpec) -> Result<Vec<u8>> {
    if info.len() != code.info_bits() {
        return Err(Error::config(format!(
            "info block has {} bits, code expects {}",
            info.len(),
            code.info_bits()
        )));
    }
    let mut out = Vec::with_capacity(code.mother_len());
    let mut state = 0usize;
    let tail = std::iter::repeat_n(0u8, code.memory());
    for bit in info.bits().iter().copied().chain(tail) {
        out.extend(code.output_bits(state, bit));
        state = code.next_state(state, bit);
    }
    debug_assert_eq!(state, 0);
    Ok(out)
}

/// Encodes, punctures and maps to antipodal symbols.
pub fn encode(info: &InfoBlock, code: &CodeSpec) -> Result<Codeword> {
    let bits = encode_bits(info, code)?;
    Ok(Codeword(
        bits.iter()
            .enumerate()
            .filter(|&(l, _)| code.keeps(l))
            .map(|(_, &b)| bit_to_symbol(b))
            .collect(),
    ))
}

/// Expands transmitted-order LLRs to mother-code length, inserting 0 at punctured positions.
pub fn depuncture(llrs: &[f64], code: &CodeSpec) -> Result<Vec<f64>> {
    if llrs.len() != code.codeword_len() {
        return Err(Error::input(format!(
            "expected {} LLRs, got {}",
            code.codeword_len(),
            llrs.len()
        )));
    }
    let mut it = llrs.iter();
    Ok((0..code.mother_len())
        .map(|l| if code.keeps(l) { *it.next().unwrap() } else { 0.0 })
        .collect())
}
