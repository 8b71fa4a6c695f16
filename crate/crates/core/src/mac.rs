//! One-time information-theoretic message authentication.
//!
//! The tag of a message split into field elements `m_1..m_l` under key `(a, b)` is
//! `b + m_1 a + m_2 a^2 + ... + m_l a^l` over GF(2^f). Two distinct messages of at most
//! `l` chunks collide on at most `l` values of `a`, so a forger who has seen one
//! (message, tag) pair succeeds with probability at most `l / 2^f`.
//!
//! Messages are zero-padded to whole chunks; callers authenticate fixed-length messages
//! under any one key.

use rand::Rng;
use thiserror::Error;

use crate::bits::BitString;

pub const DEFAULT_DEGREE: u32 = 32;
pub const DEFAULT_MAX_CHUNKS: usize = 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MacError {
    #[error("field degree {0} outside 1..=64")]
    Degree(u32),
    #[error("message of {chunks} chunks exceeds limit {max}")]
    TooLong { chunks: usize, max: usize },
}

/// GF(2^degree) with a fixed irreducible modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    degree: u32,
    /// Modulus including the `x^degree` term.
    modulus: u128,
}

fn poly_degree(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

fn poly_mod(mut a: u128, m: u128) -> u128 {
    let dm = poly_degree(m);
    while a != 0 && poly_degree(a) >= dm {
        a ^= m << (poly_degree(a) - dm);
    }
    a
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Multiplication modulo an arbitrary polynomial of degree `deg`.
fn mulmod(a: u64, b: u64, modulus: u128, deg: u32) -> u64 {
    let mut acc: u128 = 0;
    let mut x = a as u128;
    let mut y = b;
    let top = 1u128 << deg;
    while y != 0 {
        if y & 1 == 1 {
            acc ^= x;
        }
        y >>= 1;
        x <<= 1;
        if x & top != 0 {
            x ^= modulus;
        }
    }
    acc as u64
}

/// Ben-Or irreducibility test.
fn is_irreducible(modulus: u128, deg: u32) -> bool {
    if deg == 1 {
        return true;
    }
    let x: u64 = 2;
    let mut power = x;
    for _ in 1..=deg / 2 {
        power = mulmod(power, power, modulus, deg);
        if poly_gcd(modulus, (power ^ x) as u128) != 1 {
            return false;
        }
    }
    true
}

impl Field {
    /// The field of the given degree, using the numerically smallest irreducible modulus.
    pub fn new(degree: u32) -> Result<Self, MacError> {
        if !(1..=64).contains(&degree) {
            return Err(MacError::Degree(degree));
        }
        let top = 1u128 << degree;
        let mut low: u128 = 1;
        loop {
            let modulus = top | low;
            if is_irreducible(modulus, degree) {
                return Ok(Self { degree, modulus });
            }
            low += 2;
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    pub fn order(&self) -> u128 {
        1u128 << self.degree
    }

    pub fn mask(&self) -> u64 {
        crate::bits::low_mask(self.degree as usize)
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mulmod(a, b, self.modulus, self.degree)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen::<u64>() & self.mask()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AuthKey {
    pub a: u64,
    pub b: u64,
}

impl AuthKey {
    pub fn random<R: Rng + ?Sized>(field: &Field, rng: &mut R) -> Self {
        Self {
            a: field.random(rng),
            b: field.random(rng),
        }
    }

    /// `2f` bits: `a` then `b`.
    pub fn to_bits(&self, field: &Field) -> BitString {
        let f = field.degree() as usize;
        BitString::from_word(self.a, f).concat(&BitString::from_word(self.b, f))
    }

    pub fn from_bits(bits: &BitString, field: &Field) -> Option<Self> {
        let f = field.degree() as usize;
        (bits.len() == 2 * f).then(|| Self {
            a: bits.slice(0, f).word(),
            b: bits.slice(f, f).word(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AuthTag(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mac {
    field: Field,
    max_chunks: usize,
}

impl Mac {
    pub fn new(degree: u32) -> Result<Self, MacError> {
        Ok(Self {
            field: Field::new(degree)?,
            max_chunks: DEFAULT_MAX_CHUNKS,
        })
    }

    pub fn with_max_chunks(mut self, max_chunks: usize) -> Self {
        self.max_chunks = max_chunks;
        self
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn chunks(&self, msg: &BitString) -> Vec<u64> {
        let f = self.field.degree() as usize;
        (0..msg.len().div_ceil(f))
            .map(|c| {
                let start = c * f;
                let len = f.min(msg.len() - start);
                msg.slice(start, len).word()
            })
            .collect()
    }

    pub fn auth(&self, msg: &BitString, key: &AuthKey) -> Result<AuthTag, MacError> {
        let chunks = self.chunks(msg);
        if chunks.len() > self.max_chunks {
            return Err(MacError::TooLong {
                chunks: chunks.len(),
                max: self.max_chunks,
            });
        }
        // Horner: sum_i m_i a^i = a (m_1 + a (m_2 + ... a m_l))
        let mut acc = 0u64;
        for &m in chunks.iter().rev() {
            acc = self.field.mul(acc ^ m, key.a);
        }
        Ok(AuthTag(acc ^ key.b))
    }

    pub fn verify(&self, msg: &BitString, tag: &AuthTag, key: &AuthKey) -> bool {
        self.auth(msg, key).is_ok_and(|t| t == *tag)
    }
}
