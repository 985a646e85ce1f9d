use serde::{Deserialize, Serialize};

/// Largest LLR magnitude handed to the decoder.
pub const LLR_MAX: f64 = 50.0;

/// Clamps an LLR to `[-LLR_MAX, LLR_MAX]`. NaN maps to 0 (no information).
#[inline]
pub fn clamp_llr(value: f64) -> f64 {
    if value.is_nan() {
        0.0
    } else {
        value.clamp(-LLR_MAX, LLR_MAX)
    }
}

/// Per-coded-bit log-likelihood ratios, `ln Pr(+1)/Pr(-1)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LlrFrame(pub Vec<f64>);

impl LlrFrame {
    pub fn new(values: Vec<f64>) -> Self {
        LlrFrame(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for LlrFrame {
    fn from(values: Vec<f64>) -> Self {
        LlrFrame(values)
    }
}

impl std::ops::Index<usize> for LlrFrame {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}
