//! Global bit commitments built from erasure channels.
//!
//! To commit to `b`, the committer sends every other player `k` strings of length `m`,
//! each of parity `b`. Each receiver sees about half of every string. Opening publishes
//! the strings; receivers compare them with the positions they saw.

use std::collections::HashMap;

use rand::Rng;
use serde::Deserialize;

use crate::bits::{low_mask, word_parity};
use crate::cheat::CheatAction;
use crate::model::{PlayerId, Step};
use crate::simnet::Sim;
use crate::transcript::{Actor, EventKind, ObserverAccess, PayloadWriter, Visibility};

/// Which channel carries the commitment strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    /// Independent strings per receiver over the anonymous channel.
    Aot,
    /// One shared set of strings over the oblivious broadcast channel.
    Ob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbcParams {
    /// Strings per receiver.
    pub k: usize,
    /// String length.
    pub m: usize,
}

impl Default for GbcParams {
    fn default() -> Self {
        Self { k: 8, m: 16 }
    }
}

impl GbcParams {
    pub fn new(k: usize, m: usize) -> Self {
        Self { k, m }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("gbc.k must be at least 1".into());
        }
        if !(2..=64).contains(&self.m) {
            return Err(format!("gbc.m = {} outside 2..=64", self.m));
        }
        Ok(())
    }
}

/// One global bit commitment as held by all players together.
///
/// `strings[r * k + j]` is string `j` sent to receiver `r`; the committer's own slot is
/// empty. Shared (oblivious broadcast) strings are replicated into every slot.
#[derive(Debug, Clone)]
pub struct Gbc {
    id: u64,
    committer: PlayerId,
    origin: Origin,
    n: usize,
    k: usize,
    m: usize,
    strings: Vec<u64>,
    known: Vec<u64>,
}

/// Uniform string of length `m` with the given parity.
pub(crate) fn parity_string<R: Rng + ?Sized>(rng: &mut R, m: usize, parity: bool) -> u64 {
    let mut s = rng.gen::<u64>() & low_mask(m);
    if word_parity(s) != parity {
        s ^= 1 << (m - 1);
    }
    s
}

impl Gbc {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn committer(&self) -> PlayerId {
        self.committer
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn params(&self) -> GbcParams {
        GbcParams::new(self.k, self.m)
    }

    /// The committed bit (parity of the strings actually sent).
    pub fn value(&self) -> bool {
        let r = self.some_receiver();
        word_parity(self.strings[r * self.k])
    }

    fn some_receiver(&self) -> usize {
        if self.committer.0 == 0 {
            1
        } else {
            0
        }
    }

    /// String `j` as sent to `receiver`.
    pub fn string(&self, receiver: PlayerId, j: usize) -> u64 {
        self.strings[receiver.0 * self.k + j]
    }

    /// Known-position mask of string `j` at `receiver`.
    pub fn known(&self, receiver: PlayerId, j: usize) -> u64 {
        self.known[receiver.0 * self.k + j]
    }

    /// `(bits, known)` of each string as seen by `receiver`.
    pub fn view(&self, receiver: PlayerId) -> Vec<(u64, u64)> {
        (0..self.k)
            .map(|j| {
                let known = self.known(receiver, j);
                (self.string(receiver, j) & known, known)
            })
            .collect()
    }

    /// The strings an honest opening publishes.
    pub fn strings(&self) -> &[u64] {
        &self.strings
    }

    /// Whether `claimed` (laid out like [`Gbc::strings`]) agrees with everything
    /// `receiver` saw.
    pub fn consistent_for(&self, receiver: PlayerId, claimed: &[u64]) -> bool {
        let base = receiver.0 * self.k;
        (base..base + self.k).all(|i| (claimed[i] ^ self.strings[i]) & self.known[i] == 0)
    }

    /// Common parity of the claimed strings over all receiver slots, if there is one.
    pub fn claimed_parity(&self, claimed: &[u64]) -> Option<bool> {
        let mut parity = None;
        for r in (0..self.n).filter(|&r| r != self.committer.0) {
            for &s in &claimed[r * self.k..(r + 1) * self.k] {
                let p = word_parity(s);
                if *parity.get_or_insert(p) != p {
                    return None;
                }
            }
        }
        parity
    }

    /// Strings claiming the opposite bit: one random position flipped in each string
    /// (shared strings are flipped identically for everyone).
    pub(crate) fn flipped_claim<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let mut claimed = self.strings.clone();
        match self.origin {
            Origin::Aot => {
                for s in claimed.iter_mut() {
                    *s ^= 1 << rng.gen_range(0..self.m);
                }
            }
            Origin::Ob => {
                let flips: Vec<u64> = (0..self.k).map(|_| 1 << rng.gen_range(0..self.m)).collect();
                for (i, s) in claimed.iter_mut().enumerate() {
                    *s ^= flips[i % self.k];
                }
            }
        }
        claimed
    }

    fn receivers(&self) -> impl Iterator<Item = PlayerId> + '_ {
        (0..self.n).filter(move |&r| r != self.committer.0).map(PlayerId)
    }

    fn opening_payload(&self, sim: &Sim, value: bool, claimed: &[u64]) -> Vec<u8> {
        let mut w = PayloadWriter::new().u64(self.id).bool(value);
        if sim.records_deliveries() {
            w = w.u8(self.k as u8).u8(self.m as u8);
            let slots: Vec<usize> = match self.origin {
                Origin::Aot => self.receivers().map(|r| r.0).collect(),
                Origin::Ob => vec![self.some_receiver()],
            };
            for r in slots {
                for &s in &claimed[r * self.k..(r + 1) * self.k] {
                    w = w.u64(s);
                }
            }
        }
        w.finish()
    }
}

fn commit_inner(
    sim: &mut Sim,
    committer: PlayerId,
    b: bool,
    params: GbcParams,
    origin: Origin,
    anonymous: bool,
) -> Gbc {
    let (n, k, m) = (sim.n(), params.k, params.m);
    let id = sim.fresh_id();
    let mut strings = vec![0u64; n * k];
    let mut known = vec![0u64; n * k];
    let shared: Vec<u64> = match origin {
        Origin::Ob => {
            let mut rng = sim.session_coins("gbc", id, u64::MAX);
            (0..k).map(|_| parity_string(&mut rng, m, b)).collect()
        }
        Origin::Aot => Vec::new(),
    };
    for r in (0..n).filter(|&r| r != committer.0) {
        let receiver = PlayerId(r);
        let slot = &mut strings[r * k..(r + 1) * k];
        match origin {
            Origin::Aot => {
                let mut rng = sim.session_coins("gbc", id, r as u64);
                for s in slot.iter_mut() {
                    *s = parity_string(&mut rng, m, b);
                }
            }
            Origin::Ob => slot.copy_from_slice(&shared),
        }
        for j in 0..k {
            known[r * k + j] = match origin {
                Origin::Aot => sim.aot_erasure_word(receiver, m),
                Origin::Ob => sim.ob_erasure_word(receiver, m),
            };
        }
        if sim.records_deliveries() {
            let mut w = PayloadWriter::new().u64(id);
            for j in r * k..(r + 1) * k {
                w = w.u64(known[j]).u64(strings[j] & known[j]);
            }
            let actor = match origin {
                Origin::Aot => Actor::Anonymous,
                Origin::Ob => Actor::Player(committer),
            };
            let vis = Visibility::private(crate::model::PlayerSet::singleton(receiver))
                .with_observer(ObserverAccess::Length);
            sim.record(actor, EventKind::GbcCommit, w.finish(), vis);
        }
    }
    let note = PayloadWriter::new()
        .u64(id)
        .bool(origin == Origin::Ob)
        .finish();
    if anonymous {
        sim.announce_functionality(EventKind::GbcCommit, note);
    } else {
        sim.announce(committer, EventKind::GbcCommit, note);
    }
    Gbc {
        id,
        committer,
        origin,
        n,
        k,
        m,
        strings,
        known,
    }
}

/// Commitment attributed to `committer`.
pub fn gbc_commit(sim: &mut Sim, committer: PlayerId, b: bool, params: GbcParams, origin: Origin) -> Gbc {
    commit_inner(sim, committer, b, params, origin, false)
}

/// Commitment over the anonymous channel with no public attribution. The strings are
/// drawn from session coins, so the receivers' records do not depend on who commits.
pub fn gbc_commit_anonymous(sim: &mut Sim, committer: PlayerId, b: bool, params: GbcParams) -> Gbc {
    commit_inner(sim, committer, b, params, Origin::Aot, true)
}

/// Public opening. The committer publishes its strings; mixed parities are a public
/// failure, and any receiver whose positions disagree complains, which names the
/// committer.
pub fn gbc_open(sim: &mut Sim, g: Gbc) -> Step<bool> {
    let c = g.committer;
    let claimed = match sim.cheat(c, EventKind::GbcOpen) {
        Some(CheatAction::Withhold) => {
            sim.announce(c, EventKind::GbcOpen, PayloadWriter::new().u64(g.id).finish());
            return Err(sim.blame(c, EventKind::GbcOpen));
        }
        Some(CheatAction::FlipBits) => g.flipped_claim(sim.coins(c)),
        _ => g.strings.clone(),
    };
    open_claiming(sim, g, claimed)
}

/// Public opening in which the committer publishes `claimed` as its strings.
pub(crate) fn open_claiming(sim: &mut Sim, g: Gbc, claimed: Vec<u64>) -> Step<bool> {
    let c = g.committer;
    let Some(value) = g.claimed_parity(&claimed) else {
        let payload = g.opening_payload(sim, false, &claimed);
        sim.announce(c, EventKind::GbcOpen, payload);
        return Err(sim.blame(c, EventKind::GbcOpen));
    };
    let payload = g.opening_payload(sim, value, &claimed);
    sim.announce(c, EventKind::GbcOpen, payload);
    if claimed != g.strings {
        let mut complained = false;
        for r in g.receivers() {
            if sim.is_honest(r) && !g.consistent_for(r, &claimed) {
                sim.complain(r, c, EventKind::GbcOpen);
                complained = true;
            }
        }
        if complained {
            return Err(sim.blame(c, EventKind::GbcOpen));
        }
    }
    Ok(value)
}

/// Exact fraction `num / den` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: u128,
    pub den: u128,
}

impl Fraction {
    pub fn new(num: u128, den: u128) -> Self {
        let g = gcd(num, den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact statistical distance between one receiver's view of a commitment to 0 and to 1,
/// enumerated over all strings and erasure patterns. Needs `(2m - 1) k <= 120`.
pub fn hiding_distance(params: GbcParams) -> Fraction {
    let (k, m) = (params.k, params.m);
    assert!((2 * m - 1) * k <= 120, "enumeration too large");
    // per-string view -> (count under b=0, count under b=1)
    let mut views: HashMap<(u64, u64), (u128, u128)> = HashMap::new();
    for s in 0..1u64 << m {
        let b = word_parity(s);
        for known in 0..1u64 << m {
            let e = views.entry((s & known, known)).or_default();
            if b {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        }
    }
    // views with equal count pairs contribute identically; group them
    let mut groups: HashMap<(u128, u128), u128> = HashMap::new();
    for counts in views.into_values() {
        *groups.entry(counts).or_default() += 1;
    }
    let groups: Vec<((u128, u128), u128)> = groups.into_iter().collect();
    let per_string: u128 = 1u128 << (2 * m - 1);
    let mut total: u128 = 0;
    let mut idx = vec![0usize; k];
    loop {
        let (mut p0, mut p1, mut mult) = (1u128, 1u128, 1u128);
        for &i in &idx {
            let ((c0, c1), g) = groups[i];
            p0 *= c0;
            p1 *= c1;
            mult *= g;
        }
        total += mult * p0.abs_diff(p1);
        // odometer
        let mut pos = 0;
        loop {
            if pos == k {
                return Fraction::new(total, 2 * per_string.pow(k as u32));
            }
            idx[pos] += 1;
            if idx[pos] < groups.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Highest probability that a committer opens the opposite bit to a single receiver
/// without a detected mismatch, maximized over every claimed string of flipped parity.
pub fn best_equivocation(params: GbcParams) -> Fraction {
    let (k, m) = (params.k, params.m);
    assert!(m * k <= 120 && m <= 20, "enumeration too large");
    // by symmetry the true string can be fixed; check against the opening rule
    let mut best_single: u128 = 0;
    let sent = 0u64;
    for claimed in (0..1u64 << m).filter(|&c| word_parity(c) != word_parity(sent)) {
        let undetected = (0..1u64 << m)
            .filter(|&known| (claimed ^ sent) & known == 0)
            .count() as u128;
        best_single = best_single.max(undetected);
    }
    // strings and erasures are independent, so the best joint strategy is the product
    Fraction::new(best_single.pow(k as u32), 1u128 << (m * k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::SimConfig;

    #[test]
    fn strings_have_committed_parity() {
        let mut sim = Sim::new(SimConfig::new(3, 1)).unwrap();
        for b in [false, true] {
            for origin in [Origin::Aot, Origin::Ob] {
                let g = gbc_commit(&mut sim, PlayerId(0), b, GbcParams::new(4, 8), origin);
                assert_eq!(g.value(), b);
                for r in 1..3 {
                    for j in 0..4 {
                        assert_eq!(word_parity(g.string(PlayerId(r), j)), b);
                    }
                }
            }
        }
    }

    #[test]
    fn ob_strings_are_shared_aot_strings_are_not() {
        let mut sim = Sim::new(SimConfig::new(3, 2)).unwrap();
        let ob = gbc_commit(&mut sim, PlayerId(0), true, GbcParams::default(), Origin::Ob);
        assert_eq!(ob.string(PlayerId(1), 0), ob.string(PlayerId(2), 0));
        let aot = gbc_commit(&mut sim, PlayerId(0), true, GbcParams::default(), Origin::Aot);
        let same = (0..8).all(|j| aot.string(PlayerId(1), j) == aot.string(PlayerId(2), j));
        assert!(!same);
    }

    #[test]
    fn ob_known_bits_average_half() {
        let mut sim = Sim::new(SimConfig::new(3, 3)).unwrap();
        let mut total = 0u32;
        let runs = 2000;
        for _ in 0..runs {
            let g = gbc_commit(&mut sim, PlayerId(0), false, GbcParams::new(4, 8), Origin::Ob);
            total += g.known(PlayerId(1), 0).count_ones();
        }
        let mean = total as f64 / runs as f64;
        assert!((mean - 4.0).abs() < 0.15, "{mean}");
    }

    #[test]
    fn honest_open_returns_bit() {
        let mut sim = Sim::new(SimConfig::new(4, 4)).unwrap();
        let g = gbc_commit(&mut sim, PlayerId(2), true, GbcParams::default(), Origin::Aot);
        assert_eq!(gbc_open(&mut sim, g), Ok(true));
    }

    #[test]
    fn single_flip_detected_at_half_rate() {
        // one string, one flipped position: a receiver notices iff it knew that position
        let mut caught = 0;
        let runs = 4000;
        let mut sim = Sim::new(SimConfig::new(2, 5)).unwrap();
        for _ in 0..runs {
            let g = gbc_commit(&mut sim, PlayerId(0), false, GbcParams::new(1, 8), Origin::Aot);
            let mut claimed = g.strings().to_vec();
            claimed[1] ^= 1 << 3;
            if !g.consistent_for(PlayerId(1), &claimed) {
                caught += 1;
            }
        }
        let rate = caught as f64 / runs as f64;
        assert!((rate - 0.5).abs() < 0.03, "{rate}");
    }

    #[test]
    fn whole_string_flip_breaks_parity_agreement() {
        let mut sim = Sim::new(SimConfig::new(3, 6)).unwrap();
        let g = gbc_commit(&mut sim, PlayerId(0), false, GbcParams::new(2, 8), Origin::Aot);
        let mut claimed = g.strings().to_vec();
        // change parity of receiver 1's first string only
        claimed[2] ^= 1;
        assert_eq!(g.claimed_parity(&claimed), None);
    }

    #[test]
    fn hiding_small_cases_by_hand() {
        // one string of length 2: the view reveals b only when both bits are known
        assert_eq!(hiding_distance(GbcParams::new(1, 2)), Fraction::new(1, 4));
    }

    #[test]
    fn equivocation_single_string() {
        assert_eq!(best_equivocation(GbcParams::new(1, 4)), Fraction::new(1, 2));
    }
}
