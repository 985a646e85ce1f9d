use crate::rng::SplitMix64;
use crate::{Error, LlrFrame, Result};

use super::Codeword;

/// Seeded pseudo-random permutation of the coded symbols.
///
/// The permutation is a Fisher-Yates shuffle driven by [`SplitMix64`]: starting
/// from the identity, for `i` from `n-1` down to `1` swap positions `i` and
/// `next_u64() % (i + 1)`. The interleaved sequence is `out[i] = in[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    permutation: Vec<usize>,
    seed: Option<u64>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut permutation: Vec<usize> = (0..len).collect();
        let mut rng = SplitMix64::new(seed);
        for i in (1..len).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            permutation.swap(i, j);
        }
        Interleaver { permutation, seed: Some(seed) }
    }

    pub fn identity(len: usize) -> Self {
        Interleaver { permutation: (0..len).collect(), seed: None }
    }

    /// Wraps an explicit permutation after checking it is a bijection.
    pub fn from_permutation(permutation: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; permutation.len()];
        for &p in &permutation {
            if p >= seen.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::input("interleaver permutation is not a bijection"));
            }
        }
        Ok(Interleaver { permutation, seed: None })
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::input(format!(
                "interleaver length {} does not match sequence length {len}",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn permute<T: Copy>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        Ok(self.permutation.iter().map(|&p| input[p]).collect())
    }

    pub fn unpermute<T: Copy + Default>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        let mut out = vec![T::default(); input.len()];
        for (&p, &v) in self.permutation.iter().zip(input) {
            out[p] = v;
        }
        Ok(out)
    }

    pub fn interleave(&self, cw: &Codeword) -> Result<Codeword> {
        Ok(Codeword(self.permute(cw.symbols())?))
    }

    pub fn deinterleave_codeword(&self, cw: &Codeword) -> Result<Codeword> {
        Ok(Codeword(self.unpermute(cw.symbols())?))
    }

    pub fn deinterleave(&self, llrs: &LlrFrame) -> Result<LlrFrame> {
        Ok(LlrFrame(self.unpermute(llrs.as_slice())?))
    }
}
