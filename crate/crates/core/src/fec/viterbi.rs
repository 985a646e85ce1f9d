use super::{bit_to_symbol, depuncture, CodeSpec, Codeword, InfoBlock};
use crate::{Error, LlrFrame, Result};

/// Correlation `sum_l c[l] * llr[l]` between a codeword and LLRs of equal length.
pub fn path_metric(llrs: &[f64], codeword: &Codeword) -> f64 {
    llrs.iter().zip(codeword.symbols()).map(|(&l, &c)| l * c as f64).sum()
}

/// Maximum-correlation decoding over the zero-terminated trellis.
///
/// `llrs` are in transmit order (length `code.codeword_len()`); punctured
/// positions are filled with 0 before decoding. Among equal metrics the
/// survivor from the lower-indexed predecessor state wins.
pub fn viterbi_decode(llrs: &LlrFrame, code: &CodeSpec) -> Result<InfoBlock> {
    if let Some(pos) = llrs.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("non-finite LLR at position {pos}")));
    }
    let soft = depuncture(llrs.as_slice(), code)?;
    let outputs = code.outputs();
    let states = code.num_states();
    let mask = states - 1;
    let top = code.memory() - 1;

    // expected[(state << 1) | input] holds the antipodal outputs of that branch.
    let expected: Vec<Vec<f64>> = (0..states * 2)
        .map(|k| {
            code.output_bits(k >> 1, (k & 1) as u8)
                .map(|b| bit_to_symbol(b) as f64)
                .collect()
        })
        .collect();

    let steps = code.input_len();
    let mut metric = vec![f64::NEG_INFINITY; states];
    metric[0] = 0.0;
    let mut next = vec![0.0; states];
    let mut decisions = vec![0u8; steps * states];
    let mut branch = vec![0.0; states * 2];

    for t in 0..steps {
        let seg = &soft[t * outputs..(t + 1) * outputs];
        for (k, exp) in expected.iter().enumerate() {
            branch[k] = exp.iter().zip(seg).map(|(e, l)| e * l).sum();
        }
        let row = &mut decisions[t * states..(t + 1) * states];
        for ns in 0..states {
            let input = ns >> top;
            let p0 = (ns << 1) & mask;
            let p1 = p0 | 1;
            let m0 = metric[p0] + branch[(p0 << 1) | input];
            let m1 = metric[p1] + branch[(p1 << 1) | input];
            if m1 > m0 {
                next[ns] = m1;
                row[ns] = 1;
            } else {
                next[ns] = m0;
                row[ns] = 0;
            }
        }
        std::mem::swap(&mut metric, &mut next);
    }

    let mut bits = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        bits[t] = (state >> top) as u8;
        let low = decisions[t * states + state] as usize;
        state = ((state << 1) & mask) | low;
    }
    debug_assert_eq!(state, 0);
    bits.truncate(code.info_bits());
    Ok(InfoBlock(bits))
}
