//! Undeniable oblivious transfer from a commitment's erasure pattern, and the
//! one-out-of-two variant built from a batch of them.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;

use crate::commit::gbc::{gbc_commit, Gbc, GbcParams, Origin};
use crate::model::{Halt, PlayerId, Step};
use crate::simnet::Sim;
use crate::transcript::{EventKind, PayloadWriter};

/// Attempts before a degenerate erasure pattern aborts the transfer.
pub const RETRY_CAP: usize = 16;

/// Transfers per one-out-of-two UOT, and the size of each of the two index sets.
pub const BATCH: usize = 6;
pub const SET_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UotParams {
    pub gbc: GbcParams,
    pub origin: Origin,
}

impl Default for UotParams {
    fn default() -> Self {
        Self {
            gbc: GbcParams::default(),
            origin: Origin::Aot,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UotOutcome {
    /// What the receiver learned (`None` means erased).
    pub learned: Option<bool>,
    /// The commitment that binds the sender to the bit.
    pub commitment: Gbc,
    pub attempts: usize,
}

fn bits_at(word: u64, positions: &[usize]) -> Vec<bool> {
    positions.iter().map(|&p| word >> p & 1 == 1).collect()
}

fn ones(mask: u64, m: usize) -> Vec<usize> {
    (0..m).filter(|&i| mask >> i & 1 == 1).collect()
}

/// The receiver's choice for one commitment: a string with at least one erased
/// position and at least as many known ones, giving an erased set and an equally
/// large known set.
fn pick_sets<R: Rng + ?Sized>(g: &Gbc, bob: PlayerId, rng: &mut R) -> Option<(usize, Vec<usize>, Vec<usize>)> {
    let p = g.params();
    let full = crate::bits::low_mask(p.m);
    for j in 0..p.k {
        let known = g.known(bob, j) & full;
        let erased = ones(!known & full, p.m);
        let mut kept = ones(known, p.m);
        if !erased.is_empty() && kept.len() >= erased.len() {
            kept.shuffle(rng);
            kept.truncate(erased.len());
            kept.sort_unstable();
            return Some((j, erased, kept));
        }
    }
    None
}

/// Undeniable OT of `b` from `alice` to `bob`.
///
/// Alice commits to `b`; Bob announces two equally large position sets of one string he
/// received, one fully erased and one fully known, in random order. Alice opens one of
/// them by a fair coin. If she opened the erased set Bob now holds the whole string and
/// its parity is `b`.
pub fn uot(sim: &mut Sim, alice: PlayerId, bob: PlayerId, b: bool, params: &UotParams) -> Step<UotOutcome> {
    for attempt in 1..=RETRY_CAP {
        let g = gbc_commit(sim, alice, b, params.gbc, params.origin);
        let choice = pick_sets(&g, bob, sim.coins(bob));
        let Some((j, erased, kept)) = choice else {
            let payload = PayloadWriter::new().u64(g.id()).bool(false).finish();
            sim.announce(bob, EventKind::Uot, payload);
            continue;
        };
        let swap = sim.coins(bob).gen::<bool>();
        let sets = if swap { [&kept, &erased] } else { [&erased, &kept] };
        let payload = PayloadWriter::new()
            .u64(g.id())
            .bool(true)
            .u8(j as u8)
            .indices(sets[0])
            .indices(sets[1])
            .finish();
        sim.announce(bob, EventKind::Uot, payload);
        let pick = sim.coins(alice).gen_range(0..2usize);
        let string = g.string(bob, j);
        let opened = bits_at(string, sets[pick]);
        let payload = PayloadWriter::new().u64(g.id()).u8(pick as u8).bools(&opened).finish();
        sim.announce(alice, EventKind::Uot, payload);
        let opened_erased = std::ptr::eq(sets[pick], &erased);
        let learned = if opened_erased {
            Some(g.value())
        } else {
            let mine = bits_at(string & g.known(bob, j), &kept);
            if sim.is_honest(bob) && mine != opened {
                sim.complain(bob, alice, EventKind::Uot);
                return Err(sim.blame(alice, EventKind::Uot));
            }
            None
        };
        return Ok(UotOutcome {
            learned,
            commitment: g,
            attempts: attempt,
        });
    }
    Err(Halt::Aborted("functionality pathology".into()))
}

pub fn uot_via_aot(sim: &mut Sim, alice: PlayerId, bob: PlayerId, b: bool, gbc: GbcParams) -> Step<UotOutcome> {
    uot(sim, alice, bob, b, &UotParams { gbc, origin: Origin::Aot })
}

pub fn uot_via_ob(sim: &mut Sim, alice: PlayerId, bob: PlayerId, b: bool, gbc: GbcParams) -> Step<UotOutcome> {
    uot(sim, alice, bob, b, &UotParams { gbc, origin: Origin::Ob })
}

/// Record of a one-out-of-two transfer, kept so a later dispute can be audited.
#[derive(Debug, Clone)]
pub struct OneOfTwo {
    /// What the receiver computed for its chosen bit.
    pub value: bool,
    /// Committed random bits, one per transfer.
    pub masks: Vec<Gbc>,
    /// Index sets labelled 0 and 1.
    pub sets: [Vec<usize>; 2],
    /// Announced `a_0 ⊕ parity(set 0)` and `a_1 ⊕ parity(set 1)`.
    pub masked: [bool; 2],
}

impl OneOfTwo {
    /// Whether the announced bits match `(a0, a1)` under the given mask values.
    pub fn consistent_with(&self, a: [bool; 2], mask_values: &[bool]) -> bool {
        (0..2).all(|s| {
            let parity = self.sets[s].iter().fold(false, |acc, &i| acc ^ mask_values[i]);
            self.masked[s] == a[s] ^ parity
        })
    }
}

/// One-out-of-two UOT: Bob receives `a_c` and nothing about the other bit.
pub fn one_of_two_uot(
    sim: &mut Sim,
    alice: PlayerId,
    a: [bool; 2],
    bob: PlayerId,
    c: bool,
    params: &UotParams,
) -> Step<OneOfTwo> {
    one_of_two_inner(sim, alice, a, bob, c, params, false)
}

/// As [`one_of_two_uot`]; `garble` makes Alice announce both masked bits inverted.
pub(crate) fn one_of_two_inner(
    sim: &mut Sim,
    alice: PlayerId,
    a: [bool; 2],
    bob: PlayerId,
    c: bool,
    params: &UotParams,
    garble: bool,
) -> Step<OneOfTwo> {
    for _ in 0..RETRY_CAP {
        let mut masks = Vec::with_capacity(BATCH);
        let mut learned = Vec::with_capacity(BATCH);
        for _ in 0..BATCH {
            let x = sim.coins(alice).gen::<bool>();
            let out = uot(sim, alice, bob, x, params)?;
            learned.push(out.learned);
            masks.push(out.commitment);
        }
        let mut known: Vec<usize> = (0..BATCH).filter(|&i| learned[i].is_some()).collect();
        let mut unknown: Vec<usize> = (0..BATCH).filter(|&i| learned[i].is_none()).collect();
        if known.len() < SET_SIZE || unknown.is_empty() {
            let payload = PayloadWriter::new().bool(false).finish();
            sim.announce(bob, EventKind::Uot, payload);
            continue;
        }
        let rng = sim.coins(bob);
        known.shuffle(rng);
        unknown.shuffle(rng);
        let chosen: Vec<usize> = known.drain(..SET_SIZE).collect();
        let mut rest: Vec<usize> = vec![unknown.remove(0)];
        let mut pool: Vec<usize> = known.into_iter().chain(unknown).collect();
        pool.shuffle(rng);
        rest.extend(pool.into_iter().take(SET_SIZE - 1));
        let (mut chosen, mut rest) = (chosen, rest);
        chosen.sort_unstable();
        rest.sort_unstable();
        let sets = if c { [rest, chosen] } else { [chosen, rest] };
        let payload = PayloadWriter::new().bool(true).indices(&sets[0]).indices(&sets[1]).finish();
        sim.announce(bob, EventKind::Uot, payload);
        let mut masked = [false; 2];
        for s in 0..2 {
            masked[s] = sets[s].iter().fold(a[s], |acc, &i| acc ^ masks[i].value()) ^ garble;
        }
        let payload = PayloadWriter::new().bool(masked[0]).bool(masked[1]).finish();
        sim.announce(alice, EventKind::Uot, payload);
        let side = c as usize;
        let value = sets[side]
            .iter()
            .fold(masked[side], |acc, &i| acc ^ learned[i].expect("chosen set is known"));
        return Ok(OneOfTwo {
            value,
            masks,
            sets,
            masked,
        });
    }
    Err(Halt::Aborted("functionality pathology".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::SimConfig;
    use crate::transcript::Viewer;

    fn sim(n: usize, seed: u64) -> Sim {
        let mut s = Sim::new(SimConfig::new(n, seed)).unwrap();
        s.set_record_deliveries(false);
        s
    }

    #[test]
    fn learned_bit_is_committed_bit() {
        let mut s = sim(3, 1);
        let mut learned = 0;
        for i in 0..400 {
            let b = i % 3 == 1;
            let out = uot_via_aot(&mut s, PlayerId(0), PlayerId(1), b, GbcParams::default()).unwrap();
            if let Some(v) = out.learned {
                assert_eq!(v, b);
                learned += 1;
            }
        }
        assert!((150..250).contains(&learned), "{learned}");
    }

    #[test]
    fn ob_variant_learns_half() {
        let mut s = sim(3, 2);
        let hits = (0..400)
            .filter(|_| {
                uot_via_ob(&mut s, PlayerId(2), PlayerId(0), true, GbcParams::default())
                    .unwrap()
                    .learned
                    .is_some()
            })
            .count();
        assert!((150..250).contains(&hits), "{hits}");
    }

    #[test]
    fn degenerate_pattern_retries() {
        // one string of one position: Bob either knows it (no erased set) or not (no
        // known set of equal size), so every attempt is degenerate
        let mut s = sim(2, 3);
        let out = uot_via_aot(&mut s, PlayerId(0), PlayerId(1), true, GbcParams::new(1, 1));
        assert_eq!(out.unwrap_err(), Halt::Aborted("functionality pathology".into()));
    }

    #[test]
    fn one_of_two_all_inputs() {
        let p = UotParams::default();
        let mut s = sim(2, 4);
        for bits in 0..8u8 {
            let a = [bits & 1 == 1, bits & 2 == 2];
            let c = bits & 4 == 4;
            let r = one_of_two_uot(&mut s, PlayerId(0), a, PlayerId(1), c, &p).unwrap();
            assert_eq!(r.value, a[c as usize]);
            let masks: Vec<bool> = r.masks.iter().map(|g| g.value()).collect();
            assert!(r.consistent_with(a, &masks));
        }
    }

    #[test]
    fn garbled_announcement_detectable() {
        let p = UotParams::default();
        let mut s = sim(2, 5);
        let r = one_of_two_inner(&mut s, PlayerId(0), [true, false], PlayerId(1), true, &p, true).unwrap();
        assert_eq!(r.value, true);
        let masks: Vec<bool> = r.masks.iter().map(|g| g.value()).collect();
        assert!(!r.consistent_with([true, false], &masks));
    }

    #[test]
    fn choice_only_relabels_sets() {
        let view = |c: bool| {
            let mut s = sim(2, 6);
            one_of_two_uot(&mut s, PlayerId(0), [false, true], PlayerId(1), c, &UotParams::default()).unwrap();
            s.transcript().view(Viewer::Player(PlayerId(0)))
        };
        // same coins: only the set announcement and the masked bits differ
        let (v0, v1) = (view(false), view(true));
        assert_eq!(v0.len(), v1.len());
        let differing = v0.iter().zip(&v1).filter(|(a, b)| a != b).count();
        assert!(differing <= 2, "{differing}");
    }
}
