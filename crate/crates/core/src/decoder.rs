//! [[7,1,3]] decoding of the seven parity bits of an encoded Bell measurement.
//!
//! Words are 7-bit masks: bit `i` holds pair `i + 1`. Column `j` of the
//! parity-check matrix is the binary expansion of `j`, so the syndrome of a
//! word is the XOR of the (1-based) positions of its set bits.

use std::sync::OnceLock;

/// Rows of the parity-check matrix, pair 1 first.
pub const PARITY_CHECK: [[u8; 7]; 3] = [
    [0, 0, 0, 1, 1, 1, 1],
    [0, 1, 1, 0, 0, 1, 1],
    [1, 0, 1, 0, 1, 0, 1],
];

pub const WORD_MASK: u8 = 0x7f;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SteaneWord {
    pub bits: u8,
    /// Row 1 is the most significant syndrome bit.
    pub syndrome: u8,
    pub s_flag: bool,
}

impl SteaneWord {
    pub fn new(bits: u8) -> Self {
        let syndrome = steane_syndrome(bits);
        SteaneWord { bits: bits & WORD_MASK, syndrome, s_flag: syndrome != 0 }
    }
}

/// `H · bits (mod 2)` packed as a 3-bit integer.
pub fn steane_syndrome(bits: u8) -> u8 {
    let mut s = 0u8;
    for (row, h) in PARITY_CHECK.iter().enumerate() {
        let parity = h
            .iter()
            .enumerate()
            .filter(|(j, &hj)| hj == 1 && bits >> j & 1 == 1)
            .count()
            % 2;
        s |= (parity as u8) << (2 - row);
    }
    s
}

/// The four error patterns consistent with a non-zero syndrome: the unique
/// weight-1 pattern first, then the three weight-2 patterns.
pub fn candidates(syndrome: u8) -> [u8; 4] {
    static TABLE: OnceLock<[[u8; 4]; 8]> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [[0u8; 4]; 8];
        for s in 1..8u8 {
            let mut row = vec![];
            for a in 0..7 {
                if steane_syndrome(1 << a) == s {
                    row.push(1u8 << a);
                }
            }
            for a in 0..7 {
                for b in a + 1..7 {
                    let e = (1u8 << a) | (1 << b);
                    if steane_syndrome(e) == s {
                        row.push(e);
                    }
                }
            }
            assert_eq!(row.len(), 4, "syndrome {s} has {} candidates", row.len());
            t[s as usize].copy_from_slice(&row);
        }
        t
    });
    assert!(syndrome != 0 && syndrome < 8);
    table[syndrome as usize]
}

/// Flip likelihood of a pair from the analog likelihoods of all its
/// corrections, `(1 - Π(1 - 2p_i)) / 2`.
pub fn pair_error_likelihood(ps: &[f64]) -> f64 {
    let prod: f64 = ps.iter().map(|p| 1.0 - 2.0 * p).product();
    (1.0 - prod) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub corrected: u8,
    pub logical: bool,
    pub s_flag: bool,
}

/// Log-likelihood of an error pattern given per-pair flip likelihoods.
pub fn pattern_log_likelihood(pattern: u8, probs: &[f64; 7]) -> f64 {
    (0..7)
        .map(|j| {
            let p = probs[j];
            if pattern >> j & 1 == 1 { p.ln() } else { (-p).ln_1p() }
        })
        .sum()
}

/// Corrects `bits` with the most likely of the four candidate patterns.
/// Ties go to the earliest candidate, i.e. the weight-1 pattern.
pub fn decode_with_analog(bits: u8, probs: &[f64; 7]) -> Decoded {
    let bits = bits & WORD_MASK;
    let syndrome = steane_syndrome(bits);
    if syndrome == 0 {
        return Decoded { corrected: bits, logical: bits.count_ones() % 2 == 1, s_flag: false };
    }
    let cands = candidates(syndrome);
    let mut best = cands[0];
    let mut best_score = pattern_log_likelihood(best, probs);
    for &c in &cands[1..] {
        let score = pattern_log_likelihood(c, probs);
        if score > best_score {
            best = c;
            best_score = score;
        }
    }
    let corrected = bits ^ best;
    Decoded { corrected, logical: corrected.count_ones() % 2 == 1, s_flag: true }
}
