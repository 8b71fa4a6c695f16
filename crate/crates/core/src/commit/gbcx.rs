//! XOR-pair commitments, linear-relation proofs, copying and coin tossing.
//!
//! A commitment to `b` is `m_x` pairs of bit commitments whose two halves XOR to `b`.
//! To prove that a set of such commitments XORs to a constant, the prover announces
//! for each pair index the XOR of the left halves; a public coin then opens either all
//! left halves or all right halves at that index. A false relation survives each index
//! with probability exactly 1/2. Every commitment that takes part in a proof is spent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::bits::BitString;
use crate::cheat::CheatAction;
use crate::commit::gbc::{gbc_commit, gbc_open, open_claiming, Gbc, GbcParams, Origin};
use crate::model::{PlayerId, PlayerSet, Step};
use crate::simnet::Sim;
use crate::transcript::{EventKind, PayloadWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommitParams {
    pub gbc: GbcParams,
    /// Pairs per XOR-pair commitment; a false proof escapes with probability `2^-m_x`.
    pub m_x: usize,
    pub origin: Origin,
}

impl Default for CommitParams {
    fn default() -> Self {
        Self {
            gbc: GbcParams::default(),
            m_x: 8,
            origin: Origin::Aot,
        }
    }
}

impl CommitParams {
    pub fn validate(&self) -> Result<(), String> {
        self.gbc.validate()?;
        if !(1..=64).contains(&self.m_x) {
            return Err(format!("m_x = {} outside 1..=64", self.m_x));
        }
        Ok(())
    }
}

/// Bits of shared randomness drawn to partition the pairs of a copy.
const PARTITION_SEED_BITS: usize = 32;

#[derive(Debug, Clone)]
pub struct Gbcx {
    id: u64,
    committer: PlayerId,
    value: bool,
    pairs: Vec<(Gbc, Gbc)>,
}

impl Gbcx {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn committer(&self) -> PlayerId {
        self.committer
    }

    /// The bit the committer claims; an honest committer's pairs all XOR to it.
    pub fn value(&self) -> bool {
        self.value
    }

    pub fn m_x(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(Gbc, Gbc)] {
        &self.pairs
    }

    /// Whether every pair really XORs to the claimed value.
    pub fn is_consistent(&self) -> bool {
        self.pairs
            .iter()
            .all(|(l, r)| l.value() ^ r.value() == self.value)
    }

    fn half(&self, i: usize, right: bool) -> &Gbc {
        let (l, r) = &self.pairs[i];
        if right {
            r
        } else {
            l
        }
    }
}

fn commit_pairs(
    sim: &mut Sim,
    committer: PlayerId,
    value: bool,
    halves: &[(bool, bool)],
    params: &CommitParams,
) -> Gbcx {
    let id = sim.fresh_id();
    let pairs = halves
        .iter()
        .map(|&(l, r)| {
            (
                gbc_commit(sim, committer, l, params.gbc, params.origin),
                gbc_commit(sim, committer, r, params.gbc, params.origin),
            )
        })
        .collect();
    Gbcx {
        id,
        committer,
        value,
        pairs,
    }
}

pub fn gbcx_commit(sim: &mut Sim, committer: PlayerId, b: bool, params: &CommitParams) -> Gbcx {
    let halves: Vec<(bool, bool)> = (0..params.m_x)
        .map(|_| {
            let l = sim.coins(committer).gen::<bool>();
            (l, l ^ b)
        })
        .collect();
    commit_pairs(sim, committer, b, &halves, params)
}

/// Opens every pair publicly. Pairs that disagree name the committer.
pub fn gbcx_open(sim: &mut Sim, g: Gbcx) -> Step<bool> {
    let committer = g.committer;
    let mut value = None;
    for (l, r) in g.pairs {
        let v = gbc_open(sim, l)? ^ gbc_open(sim, r)?;
        if *value.get_or_insert(v) != v {
            return Err(sim.blame(committer, EventKind::GbcOpen));
        }
    }
    Ok(value.unwrap_or(false))
}

/// Public opening by a committer that claims the opposite bit for every left half.
pub(crate) fn gbcx_open_garbled(sim: &mut Sim, g: Gbcx) -> Step<bool> {
    let committer = g.committer;
    let mut value = None;
    for (l, r) in g.pairs {
        let claimed = l.flipped_claim(sim.coins(committer));
        let v = open_claiming(sim, l, claimed)? ^ gbc_open(sim, r)?;
        if *value.get_or_insert(v) != v {
            return Err(sim.blame(committer, EventKind::GbcOpen));
        }
    }
    Ok(value.unwrap_or(false))
}

/// Opens `g` to `to` alone. Returns the value if `to` accepts the opening, `None` if
/// `to` found it inconsistent (or received nothing). Deviations are looked up at `hook`.
pub fn gbcx_open_private(sim: &mut Sim, g: &Gbcx, to: PlayerId, hook: EventKind) -> Option<bool> {
    let c = g.committer;
    let action = sim.cheat(c, hook);
    if action == Some(CheatAction::Withhold) {
        return None;
    }
    let mut w = PayloadWriter::new().u64(g.id);
    let mut value = None;
    let mut accepted = true;
    for (l, r) in &g.pairs {
        let mut pair_value = false;
        for (half, gbc) in [(false, l), (true, r)] {
            // a cheating helper claims the opposite bit for every left half
            let claimed = if action == Some(CheatAction::FlipBits) && !half {
                gbc.flipped_claim(sim.coins(c))
            } else {
                gbc.strings().to_vec()
            };
            let parity = gbc.claimed_parity(&claimed);
            w = w.u64(gbc.id()).bool(parity.unwrap_or(false));
            if to != c && !gbc.consistent_for(to, &claimed) {
                accepted = false;
            }
            match parity {
                Some(p) => pair_value ^= p,
                None => accepted = false,
            }
        }
        if *value.get_or_insert(pair_value) != pair_value {
            accepted = false;
        }
    }
    sim.p2p(c, to, EventKind::GbcOpen, w.finish());
    if !sim.is_honest(to) {
        accepted = true;
    }
    accepted.then(|| value.unwrap_or(false))
}

/// `⊕ terms = constant`, proved by `prover`.
#[derive(Debug, Clone)]
pub struct Relation {
    pub prover: PlayerId,
    pub terms: Vec<Gbcx>,
    pub constant: bool,
    /// The prover announces a wrong first column (scripted deviation).
    pub tamper: bool,
}

impl Relation {
    pub fn xor(prover: PlayerId, terms: Vec<Gbcx>, constant: bool) -> Self {
        Self {
            prover,
            terms,
            constant,
            tamper: false,
        }
    }

    pub fn equal(prover: PlayerId, a: Gbcx, b: Gbcx) -> Self {
        Self::xor(prover, vec![a, b], false)
    }

    pub fn unequal(prover: PlayerId, a: Gbcx, b: Gbcx) -> Self {
        Self::xor(prover, vec![a, b], true)
    }

    pub fn tampered(mut self, tamper: bool) -> Self {
        self.tamper = tamper;
        self
    }

    /// Whether the committed values really satisfy the relation.
    pub fn holds(&self) -> bool {
        self.terms.iter().fold(self.constant, |acc, t| acc ^ t.value()) == false
    }
}

/// Where the per-column challenge bits come from.
#[derive(Debug, Clone)]
pub enum Challenge {
    /// Public coin toss among all active players.
    Coin,
    /// Fixed bits (challenge enumeration).
    Fixed(BitString),
}

/// Outcome of one proof batch, as recorded publicly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofRecord {
    pub challenge: BitString,
    /// Per relation: announced column XORs and the XORs of the opened halves.
    pub columns: Vec<(BitString, BitString)>,
    pub accepted: bool,
}

pub fn prove(sim: &mut Sim, relations: Vec<Relation>, params: &CommitParams) -> Step<()> {
    prove_with(sim, relations, Challenge::Coin, params).map(|_| ())
}

/// Proves every relation with one shared challenge vector. The first failing relation
/// names its prover.
pub fn prove_with(
    sim: &mut Sim,
    relations: Vec<Relation>,
    challenge: Challenge,
    params: &CommitParams,
) -> Step<ProofRecord> {
    if relations.is_empty() {
        return Ok(ProofRecord {
            challenge: BitString::zeros(0),
            columns: Vec::new(),
            accepted: true,
        });
    }
    let m_x = relations
        .iter()
        .flat_map(|r| r.terms.iter().map(|t| t.m_x()))
        .max()
        .unwrap_or(params.m_x);
    // announcements
    let mut announced = Vec::with_capacity(relations.len());
    for rel in &relations {
        let mut d = BitString::zeros(m_x);
        for i in 0..m_x {
            let x = rel
                .terms
                .iter()
                .fold(false, |acc, t| acc ^ t.half(i, false).value());
            d.set(i, x);
        }
        let cheat = sim.cheat(rel.prover, EventKind::Proof) == Some(CheatAction::FlipBits);
        if (rel.tamper || cheat) && m_x > 0 {
            d.flip(0);
        }
        let payload = PayloadWriter::new()
            .u8(rel.terms.len() as u8)
            .bool(rel.constant)
            .bits(&d)
            .finish();
        sim.announce(rel.prover, EventKind::Proof, payload);
        announced.push(d);
    }
    let e = match challenge {
        Challenge::Coin => coin_toss(sim, sim.active(), m_x, params)?,
        Challenge::Fixed(bits) => bits,
    };
    let mut columns = Vec::with_capacity(relations.len());
    let mut failed: Option<PlayerId> = None;
    for (rel, d) in relations.into_iter().zip(announced) {
        let mut opened = BitString::zeros(m_x);
        let mut halves: Vec<Vec<Gbc>> = (0..m_x).map(|_| Vec::new()).collect();
        for t in rel.terms {
            for (i, (l, r)) in t.pairs.into_iter().enumerate() {
                halves[i].push(if e.get(i) { r } else { l });
            }
        }
        for (i, col) in halves.into_iter().enumerate() {
            let mut x = false;
            for g in col {
                x ^= gbc_open(sim, g)?;
            }
            opened.set(i, x);
            let expected = d.get(i) ^ (e.get(i) && rel.constant);
            if x != expected && failed.is_none() {
                failed = Some(rel.prover);
            }
        }
        columns.push((d, opened));
    }
    let mut w = PayloadWriter::new().bits(&e).u8(columns.len() as u8);
    for (d, o) in &columns {
        w = w.bits(d).bits(o);
    }
    let record = ProofRecord {
        challenge: e,
        columns,
        accepted: failed.is_none(),
    };
    sim.announce_functionality(EventKind::Proof, w.bool(record.accepted).finish());
    match failed {
        Some(p) => Err(sim.blame(p, EventKind::Proof)),
        None => Ok(record),
    }
}

/// Recomputes a recorded proof verdict from its public data alone.
pub fn recheck(challenge: &BitString, columns: &[(BitString, BitString)], constants: &[bool]) -> bool {
    columns.iter().zip(constants).all(|((d, opened), &c)| {
        (0..d.len()).all(|i| opened.get(i) == d.get(i) ^ (challenge.get(i) && c))
    })
}

/// Public random bits: every participant commits to a random string bit by bit, then
/// all commitments are opened and XORed.
pub fn coin_toss(sim: &mut Sim, participants: PlayerSet, bits: usize, params: &CommitParams) -> Step<BitString> {
    let mut commitments = Vec::new();
    for p in participants.iter() {
        let own = BitString::random(sim.coins(p), bits);
        let gbcs: Vec<Gbc> = own
            .iter()
            .map(|b| gbc_commit(sim, p, b, params.gbc, params.origin))
            .collect();
        commitments.push((p, gbcs));
    }
    let mut result = BitString::zeros(bits);
    for (p, gbcs) in commitments {
        if sim.cheat(p, EventKind::Coin) == Some(CheatAction::Withhold) {
            return Err(sim.blame(p, EventKind::Coin));
        }
        for (i, g) in gbcs.into_iter().enumerate() {
            let b = gbc_open(sim, g)?;
            result.set(i, result.get(i) ^ b);
        }
    }
    sim.announce_functionality(EventKind::Coin, PayloadWriter::new().bits(&result).finish());
    Ok(result)
}

/// Copies every item: `3 m_x` fresh pairs are committed, a public coin partitions them
/// into three commitments, the first is proved equal to the item (spending both), and
/// the other two are returned.
pub fn copy_batch(sim: &mut Sim, items: Vec<Gbcx>, params: &CommitParams) -> Step<Vec<(Gbcx, Gbcx)>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let mut fresh = Vec::with_capacity(items.len());
    for g in &items {
        let c = g.committer;
        let m_x = g.m_x();
        let bad = match sim.cheat(c, EventKind::Copy) {
            Some(CheatAction::FlipBits) => sim.cheat_count(c, EventKind::Copy).unwrap_or(3 * m_x),
            _ => 0,
        };
        let pairs: Vec<(Gbc, Gbc)> = (0..3 * m_x)
            .map(|i| {
                let l = sim.coins(c).gen::<bool>();
                let r = l ^ g.value ^ (i < bad);
                (
                    gbc_commit(sim, c, l, params.gbc, params.origin),
                    gbc_commit(sim, c, r, params.gbc, params.origin),
                )
            })
            .collect();
        fresh.push(pairs);
    }
    let seed = coin_toss(sim, sim.active(), PARTITION_SEED_BITS, params)?.word();
    let mut proofs = Vec::with_capacity(items.len());
    let mut survivors = Vec::with_capacity(items.len());
    for (idx, (g, mut pairs)) in items.into_iter().zip(fresh).enumerate() {
        let m_x = g.m_x();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        pairs.shuffle(&mut rng);
        let mut parts: Vec<Gbcx> = Vec::with_capacity(3);
        for _ in 0..3 {
            let chunk: Vec<(Gbc, Gbc)> = pairs.drain(..m_x).collect();
            parts.push(Gbcx {
                id: sim.fresh_id(),
                committer: g.committer,
                value: g.value,
                pairs: chunk,
            });
        }
        let payload = PayloadWriter::new()
            .u64(g.id)
            .u64(parts[0].id)
            .u64(parts[1].id)
            .u64(parts[2].id)
            .finish();
        sim.announce(g.committer, EventKind::Copy, payload);
        let c_part = parts.pop().expect("three parts");
        let b_part = parts.pop().expect("three parts");
        let a_part = parts.pop().expect("three parts");
        proofs.push(Relation::equal(g.committer, g, a_part));
        survivors.push((b_part, c_part));
    }
    prove(sim, proofs, params)?;
    Ok(survivors)
}

/// Turns each `(item, count)` into `count` commitments to the same value.
pub fn replicate(sim: &mut Sim, items: Vec<(Gbcx, usize)>, params: &CommitParams) -> Step<Vec<Vec<Gbcx>>> {
    let want: Vec<usize> = items.iter().map(|(_, c)| *c).collect();
    let mut pools: Vec<Vec<Gbcx>> = items.into_iter().map(|(g, _)| vec![g]).collect();
    loop {
        let mut batch = Vec::new();
        let mut owners = Vec::new();
        for (i, pool) in pools.iter_mut().enumerate() {
            let need = want[i].saturating_sub(pool.len()).min(pool.len());
            for _ in 0..need {
                batch.push(pool.pop().expect("pool holds need items"));
                owners.push(i);
            }
        }
        if batch.is_empty() {
            break;
        }
        for (i, (b, c)) in owners.into_iter().zip(copy_batch(sim, batch, params)?) {
            pools[i].push(b);
            pools[i].push(c);
        }
    }
    for (pool, &w) in pools.iter_mut().zip(&want) {
        // a zero count discards the item unopened
        pool.truncate(w);
    }
    Ok(pools)
}

/// Exact probability that a copy with `bad` inconsistent pairs among its `3 m_x` fresh
/// pairs passes the equality proof, averaged over partitions and challenges.
pub fn copy_escape_probability(m_x: usize, bad: usize) -> f64 {
    // bad pairs landing in the proved third each survive with probability 1/2
    let total = 3 * m_x;
    let mut p = 0.0;
    for j in 0..=bad.min(m_x) {
        let ways = binom(bad, j) * binom(total - bad, m_x - j);
        p += ways / binom(total, m_x) * 0.5f64.powi(j as i32);
    }
    p
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheat::{CheatBook, CheatScript};
    use crate::model::Halt;
    use crate::simnet::SimConfig;

    fn small() -> CommitParams {
        CommitParams {
            gbc: GbcParams::new(4, 8),
            m_x: 4,
            origin: Origin::Aot,
        }
    }

    fn sim(n: usize, seed: u64) -> Sim {
        let mut s = Sim::new(SimConfig::new(n, seed)).unwrap();
        s.set_record_deliveries(false);
        s
    }

    #[test]
    fn pairs_xor_to_value() {
        let mut s = sim(3, 1);
        let g = gbcx_commit(&mut s, PlayerId(0), true, &CommitParams { m_x: 3, ..small() });
        assert_eq!(g.m_x(), 3);
        assert!(g.is_consistent());
        assert_eq!(gbcx_open(&mut s, g), Ok(true));
    }

    #[test]
    fn honest_equality_accepted_under_every_challenge() {
        let p = small();
        for e in 0..16u64 {
            let mut s = sim(2, e);
            let a = gbcx_commit(&mut s, PlayerId(0), true, &p);
            let b = gbcx_commit(&mut s, PlayerId(0), true, &p);
            let rec = prove_with(
                &mut s,
                vec![Relation::equal(PlayerId(0), a, b)],
                Challenge::Fixed(BitString::from_word(e, 4)),
                &p,
            )
            .unwrap();
            assert!(rec.accepted);
        }
    }

    #[test]
    fn inequality_and_constants() {
        let p = small();
        let mut s = sim(3, 2);
        let a = gbcx_commit(&mut s, PlayerId(1), true, &p);
        let b = gbcx_commit(&mut s, PlayerId(1), false, &p);
        let c = gbcx_commit(&mut s, PlayerId(1), true, &p);
        prove(
            &mut s,
            vec![
                Relation::unequal(PlayerId(1), a, b),
                // 1 ⊕ 1 = 0
                Relation::xor(PlayerId(1), vec![c], true),
            ],
            &p,
        )
        .unwrap();
    }

    #[test]
    fn repetition_membership() {
        // 111 passes both parity checks of the [3,1,3] code, 110 does not
        let p = small();
        for (word, ok) in [([true, true, true], true), ([true, true, false], false)] {
            let mut s = sim(2, 3);
            let bits: Vec<Vec<Gbcx>> = word
                .iter()
                .map(|&b| {
                    let g = gbcx_commit(&mut s, PlayerId(0), b, &p);
                    replicate(&mut s, vec![(g, 2)], &p).unwrap().remove(0)
                })
                .collect();
            let mut bits: Vec<std::vec::IntoIter<Gbcx>> = bits.into_iter().map(|v| v.into_iter()).collect();
            let mut take = |i: usize| bits[i].next().unwrap();
            let rels = vec![
                Relation::xor(PlayerId(0), vec![take(0), take(1)], false),
                Relation::xor(PlayerId(0), vec![take(0), take(2)], false),
            ];
            let r = prove(&mut s, rels, &p);
            assert_eq!(r.is_ok(), ok, "{word:?}");
        }
    }

    #[test]
    fn honest_copy_both_open_to_value() {
        let p = small();
        for seed in 0..20 {
            let mut s = sim(3, seed);
            let b = seed % 2 == 1;
            let g = gbcx_commit(&mut s, PlayerId(2), b, &p);
            let (x, y) = copy_batch(&mut s, vec![g], &p).unwrap().remove(0);
            assert_eq!(gbcx_open(&mut s, x), Ok(b));
            assert_eq!(gbcx_open(&mut s, y), Ok(b));
        }
    }

    #[test]
    fn copy_twice_gives_four() {
        let p = small();
        let mut s = sim(2, 9);
        let g = gbcx_commit(&mut s, PlayerId(0), true, &p);
        let copies = replicate(&mut s, vec![(g, 4)], &p).unwrap().remove(0);
        assert_eq!(copies.len(), 4);
        for c in copies {
            assert_eq!(gbcx_open(&mut s, c), Ok(true));
        }
    }

    #[test]
    fn fully_bad_copy_is_caught() {
        let p = small();
        let mut caught = 0;
        for seed in 0..40 {
            let book = CheatBook::new(vec![CheatScript::new(PlayerId(0), EventKind::Copy, CheatAction::FlipBits)]);
            let mut s = Sim::with_cheats(SimConfig::new(3, seed), book).unwrap();
            let g = gbcx_commit(&mut s, PlayerId(0), false, &p);
            match copy_batch(&mut s, vec![g], &p) {
                Err(Halt::Cheater(c)) => {
                    assert_eq!(c, PlayerId(0));
                    caught += 1;
                }
                Err(other) => panic!("{other:?}"),
                Ok(_) => {}
            }
        }
        // escape probability 2^-4 per copy
        assert!(caught >= 33, "{caught}");
    }

    #[test]
    fn copy_escape_formula_limits() {
        assert_eq!(copy_escape_probability(4, 0), 1.0);
        // all pairs bad: every proved pair is bad
        assert!((copy_escape_probability(4, 12) - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn coin_withholder_named() {
        let p = small();
        let book = CheatBook::new(vec![CheatScript::new(PlayerId(1), EventKind::Coin, CheatAction::Withhold)]);
        let mut s = Sim::with_cheats(SimConfig::new(3, 1), book).unwrap();
        let all = s.active();
        assert_eq!(
            coin_toss(&mut s, all, 8, &p),
            Err(Halt::Cheater(PlayerId(1)))
        );
    }

    #[test]
    fn recheck_matches_verdict() {
        let p = small();
        let mut s = sim(2, 4);
        let a = gbcx_commit(&mut s, PlayerId(0), true, &p);
        let b = gbcx_commit(&mut s, PlayerId(0), true, &p);
        let rec = prove_with(&mut s, vec![Relation::equal(PlayerId(0), a, b)], Challenge::Coin, &p).unwrap();
        assert!(recheck(&rec.challenge, &rec.columns, &[false]));
        assert!(!recheck(&rec.challenge, &rec.columns, &[true]) || rec.challenge.count_ones() == 0);
    }
}
