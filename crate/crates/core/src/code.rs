//! Binary linear codes in systematic form, small enough for exhaustive decoding.
//!
//! Words are stored in a `u64` with position `i` at bit `i`. A code of length `m` and
//! dimension `k` has generator rows `e_j | A_j` for `j < k`; the parity-check row for
//! redundancy position `p` is `e_p` plus every message position whose `A_j` covers `p`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::bits::{low_mask, word_parity, BitString};

/// Dimension limit for exhaustive distance computation and decoding.
pub const MAX_DIMENSION: usize = 20;
const RESAMPLE_LIMIT: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum CodeError {
    #[error("dimension {k} does not fit length {m}")]
    Dimension { m: usize, k: usize },
    #[error("dimension {0} exceeds exhaustive limit {MAX_DIMENSION}")]
    TooLarge(usize),
    #[error("no [{m},{k}] code with distance above {min_distance} found")]
    Infeasible { m: usize, k: usize, min_distance: f64 },
    #[error("malformed code description: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    m: usize,
    k: usize,
    d: usize,
    t: usize,
    /// Redundancy part of each generator row, already shifted to positions `k..m`.
    redundancy: Vec<u64>,
    generator: Vec<u64>,
    parity_check: Vec<u64>,
    codewords: Vec<u64>,
}

/// Dimension used by the committed-OT protocol: the smallest `k` with `k > (1/2 + 2σ) m`.
pub fn gcot_dimension(m: usize, sigma: f64) -> usize {
    ((0.5 + 2.0 * sigma) * m as f64).floor() as usize + 1
}

impl LinearCode {
    /// Builds the code whose generator row `j` is `e_j` plus `redundancy[j]`, where
    /// `redundancy[j]` is a word over positions `0..m-k` mapped to positions `k..m`.
    pub fn systematic(m: usize, redundancy: &[u64]) -> Result<Self, CodeError> {
        let k = redundancy.len();
        if k == 0 || k > m || m > 64 {
            return Err(CodeError::Dimension { m, k });
        }
        if k > MAX_DIMENSION {
            return Err(CodeError::TooLarge(k));
        }
        let r = m - k;
        let redundancy: Vec<u64> = redundancy.iter().map(|a| (a & low_mask(r)) << k).collect();
        let generator: Vec<u64> = redundancy
            .iter()
            .enumerate()
            .map(|(j, a)| (1u64 << j) | a)
            .collect();
        let parity_check = (k..m)
            .map(|p| {
                let mut row = 1u64 << p;
                for (j, a) in redundancy.iter().enumerate() {
                    if a >> p & 1 == 1 {
                        row |= 1 << j;
                    }
                }
                row
            })
            .collect();
        // Gray-code walk over all messages
        let mut codewords = vec![0u64; 1 << k];
        let mut word = 0u64;
        for i in 1..(1usize << k) {
            word ^= generator[i.trailing_zeros() as usize];
            codewords[i ^ (i >> 1)] = word;
        }
        let d = codewords[1..]
            .iter()
            .map(|c| c.count_ones() as usize)
            .min()
            .unwrap_or(m);
        Ok(Self {
            m,
            k,
            d,
            t: (d - 1) / 2,
            redundancy,
            generator,
            parity_check,
            codewords,
        })
    }

    pub fn repetition(m: usize) -> Result<Self, CodeError> {
        Self::systematic(m, &[low_mask(m.saturating_sub(1))])
    }

    /// Random systematic code with `k = floor((1/2 + 2σ) m) + 1`, resampled until its
    /// exact minimum distance exceeds `ε m`.
    pub fn build<R: Rng + ?Sized>(m: usize, sigma: f64, epsilon: f64, rng: &mut R) -> Result<Self, CodeError> {
        let k = gcot_dimension(m, sigma);
        if k > m || m > 64 {
            return Err(CodeError::Dimension { m, k });
        }
        if k > MAX_DIMENSION {
            return Err(CodeError::TooLarge(k));
        }
        let min_distance = epsilon * m as f64;
        for _ in 0..RESAMPLE_LIMIT {
            let rows: Vec<u64> = (0..k).map(|_| rng.gen::<u64>()).collect();
            let code = Self::systematic(m, &rows)?;
            if code.d as f64 > min_distance {
                return Ok(code);
            }
        }
        Err(CodeError::Infeasible { m, k, min_distance })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dimension(&self) -> usize {
        self.k
    }

    pub fn min_distance(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> usize {
        self.t
    }

    pub fn generator(&self) -> &[u64] {
        &self.generator
    }

    /// Parity-check rows; a word is a codeword iff every row has even overlap with it.
    pub fn parity_check(&self) -> &[u64] {
        &self.parity_check
    }

    pub fn codewords(&self) -> &[u64] {
        &self.codewords
    }

    pub fn encode_word(&self, msg: u64) -> u64 {
        self.generator
            .iter()
            .enumerate()
            .filter(|(j, _)| msg >> j & 1 == 1)
            .fold(0, |acc, (_, g)| acc ^ g)
    }

    pub fn encode(&self, msg: &BitString) -> BitString {
        assert_eq!(msg.len(), self.k, "message length");
        BitString::from_word(self.encode_word(msg.word()), self.m)
    }

    pub fn is_codeword_word(&self, w: u64) -> bool {
        w & !low_mask(self.m) == 0 && self.parity_check.iter().all(|h| !word_parity(h & w))
    }

    pub fn is_codeword(&self, w: &BitString) -> bool {
        w.len() == self.m && self.is_codeword_word(w.word())
    }

    /// Nearest codeword if it lies within the decoding radius.
    pub fn decode_word(&self, w: u64) -> Option<u64> {
        self.codewords
            .iter()
            .copied()
            .find(|c| ((c ^ w).count_ones() as usize) <= self.t)
    }

    pub fn decode(&self, w: &BitString) -> Option<BitString> {
        assert_eq!(w.len(), self.m, "word length");
        self.decode_word(w.word())
            .map(|c| BitString::from_word(c, self.m))
    }

    pub fn random_codeword<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.codewords[rng.gen_range(0..self.codewords.len())]
    }
}

/// `m,k,d,t:` followed by the hex redundancy rows.
impl fmt::Display for LinearCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}:", self.m, self.k, self.d, self.t)?;
        let rows: Vec<String> = self
            .redundancy
            .iter()
            .map(|a| format!("{:x}", a >> self.k))
            .collect();
        f.write_str(&rows.join(","))
    }
}

impl FromStr for LinearCode {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodeError::Parse(s.to_string());
        let (dims, rows) = s.split_once(':').ok_or_else(bad)?;
        let dims: Vec<usize> = dims
            .split(',')
            .map(|x| x.parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let [m, k, d, t] = dims[..] else {
            return Err(bad());
        };
        let rows: Vec<u64> = rows
            .split(',')
            .map(|x| u64::from_str_radix(x, 16).map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let code = Self::systematic(m, &rows)?;
        if code.k != k || code.d != d || code.t != t {
            return Err(bad());
        }
        Ok(code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(s: &str) -> BitString {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn repetition_code() {
        let c = LinearCode::repetition(3).unwrap();
        assert_eq!((c.len(), c.dimension(), c.min_distance(), c.radius()), (3, 1, 3, 1));
        assert!(c.is_codeword(&w("111")));
        assert!(c.is_codeword(&w("000")));
        assert!(!c.is_codeword(&w("110")));
        assert_eq!(c.decode(&w("110")), Some(w("111")));
        assert_eq!(c.decode(&w("001")), Some(w("000")));
    }

    #[test]
    fn gcot_default_dimension() {
        assert_eq!(gcot_dimension(16, 0.125), 13);
        assert_eq!(gcot_dimension(8, 0.125), 7);
    }

    #[test]
    fn built_code_distance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let code = LinearCode::build(16, 0.125, 1.0 / 16.0, &mut rng).unwrap();
        assert_eq!(code.dimension(), 13);
        // independent scan: encode every message directly from the generator
        let brute = (1u64..1 << 13)
            .map(|msg| {
                (0..13)
                    .filter(|j| msg >> j & 1 == 1)
                    .fold(0u64, |acc, j| acc ^ code.generator()[j])
                    .count_ones() as usize
            })
            .min()
            .unwrap();
        assert_eq!(code.min_distance(), brute);
        assert!(code.min_distance() as f64 > 1.0);
        assert!(code.generator().iter().all(|&g| code.is_codeword_word(g)));
    }

    #[test]
    fn zero_word_is_codeword() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let code = LinearCode::build(12, 0.0, 0.1, &mut rng).unwrap();
        assert!(code.is_codeword(&BitString::zeros(12)));
    }

    #[test]
    fn infeasible_distance_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // [8,7] codes have distance at most 2
        assert!(matches!(
            LinearCode::build(8, 0.125, 0.5, &mut rng),
            Err(CodeError::Infeasible { .. })
        ));
        assert!(matches!(
            LinearCode::build(8, 0.3, 0.0, &mut rng),
            Err(CodeError::Dimension { .. })
        ));
    }

    #[test]
    fn decode_round_trip_under_correctable_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // low-rate code so that t >= 1
        let code = LinearCode::build(12, -0.125, 0.25, &mut rng).unwrap();
        assert!(code.radius() >= 1, "{code}");
        for &c in code.codewords() {
            assert_eq!(code.decode_word(c), Some(c));
            for i in 0..12 {
                assert_eq!(code.decode_word(c ^ (1 << i)), Some(c));
            }
        }
    }

    #[test]
    fn description_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let code = LinearCode::build(16, 0.125, 1.0 / 16.0, &mut rng).unwrap();
        let back: LinearCode = code.to_string().parse().unwrap();
        assert_eq!(back, code);
        assert!("16,13,2".parse::<LinearCode>().is_err());
    }

    proptest! {
        #[test]
        fn linearity(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let code = LinearCode::build(14, 0.125, 0.0, &mut rng).unwrap();
            let mask = low_mask(code.dimension());
            let (x, y) = (code.encode_word(a & mask), code.encode_word(b & mask));
            prop_assert!(code.is_codeword_word(x ^ y));
            prop_assert_eq!(x ^ y, code.encode_word((a ^ b) & mask));
        }

        #[test]
        fn decode_returns_codeword_or_nothing(seed in any::<u64>(), word in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let code = LinearCode::build(10, -0.1, 0.2, &mut rng).unwrap();
            if let Some(c) = code.decode_word(word & low_mask(10)) {
                prop_assert!(code.is_codeword_word(c));
            }
        }
    }
}
