//! Committed oblivious transfer with public verification. Alice is committed to
//! `a0, a1`, Bob to a selector `b`; afterwards Bob is committed to `a_b` and every
//! player has checked it. A dispute over the transfers themselves is settled by
//! opening Alice's codewords and transfer masks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::bits::{low_mask, word_parity};
use crate::cheat::CheatAction;
use crate::code::{CodeError, LinearCode};
use crate::commit::gbc::gbc_open;
use crate::commit::gbcx::{coin_toss, gbcx_commit, gbcx_open, prove, replicate, CommitParams, Gbcx, Relation};
use crate::model::{Halt, PlayerId, PlayerSet, ProtocolOutcome, Step};
use crate::ot::uot::{one_of_two_inner, OneOfTwo, UotParams};
use crate::simnet::Sim;
use crate::transcript::{Actor, EventKind, PayloadWriter, Visibility};

/// Attempts at drawing a suitable parity subset before giving up.
const H_TRIES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcotParams {
    /// Code length.
    pub m: usize,
    /// Fraction of positions in each of the three index sets.
    pub sigma: f64,
    /// Minimum distance must exceed `epsilon * m`.
    pub epsilon: f64,
}

impl Default for GcotParams {
    fn default() -> Self {
        Self {
            m: 16,
            sigma: 0.125,
            epsilon: 0.0625,
        }
    }
}

impl GcotParams {
    /// Size of each index set, `σ m` rounded.
    pub fn set_size(&self) -> usize {
        (self.sigma * self.m as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..0.25).contains(&self.sigma) || self.sigma == 0.0 {
            return Err(format!("sigma {} outside (0, 1/4)", self.sigma));
        }
        if self.epsilon <= 0.0 {
            return Err(format!("epsilon {} must be positive", self.epsilon));
        }
        let s = self.set_size();
        if s == 0 || 3 * s > self.m {
            return Err(format!("sigma * m = {s} leaves no room for three sets in {}", self.m));
        }
        Ok(())
    }
}

/// Everything the players agree on before any transfer.
#[derive(Debug, Clone)]
pub struct GcotSetup {
    pub code: LinearCode,
    pub params: GcotParams,
    pub commit: CommitParams,
    pub uot: UotParams,
}

/// Draws the code from shared coins and records it publicly.
pub fn gcot_setup(
    sim: &mut Sim,
    params: GcotParams,
    commit: CommitParams,
    uot: UotParams,
) -> Result<GcotSetup, CodeError> {
    let id = sim.fresh_id();
    let code = LinearCode::build(params.m, params.sigma, params.epsilon, &mut sim.session_coins("gcot-code", id, 0))?;
    let text = code.to_string();
    sim.transcript_mut().set_header("code", text.clone());
    sim.announce_functionality(EventKind::GcotStep1, PayloadWriter::new().bytes(text.as_bytes()).finish());
    Ok(GcotSetup {
        code,
        params,
        commit,
        uot,
    })
}

/// What each party held during one run, for inspection by tests and tools.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GcotSession {
    /// Alice's codewords as committed.
    pub c: [u64; 2],
    /// Bob's per-position selectors.
    pub flags: u64,
    /// Bob's corrected word.
    pub w: u64,
    pub i0: Vec<usize>,
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    /// Parity subset mapping the codewords to Alice's bits.
    pub h: u64,
    /// Positions of each codeword opened publicly.
    pub opened: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GcotRun {
    /// Bob's commitment to the selected bit.
    pub result: Gbcx,
    pub session: GcotSession,
}

/// Replicates every bit so each parity-check row gets its own copy, proves all rows,
/// and returns one unspent copy per bit.
fn prove_membership(
    sim: &mut Sim,
    prover: PlayerId,
    code: &LinearCode,
    words: Vec<Vec<Gbcx>>,
    params: &CommitParams,
) -> Step<Vec<Vec<Option<Gbcx>>>> {
    let rows = code.parity_check();
    let m = code.len();
    let uses: Vec<usize> = (0..m)
        .map(|i| rows.iter().filter(|&&r| r >> i & 1 == 1).count() + 1)
        .collect();
    let count = words.len();
    let items: Vec<(Gbcx, usize)> = words
        .into_iter()
        .flat_map(|w| w.into_iter().enumerate().map(|(i, g)| (g, uses[i])).collect::<Vec<_>>())
        .collect();
    let mut pools = replicate(sim, items, params)?;
    let mut relations = Vec::new();
    for word in 0..count {
        for &row in rows {
            let terms = (0..m)
                .filter(|&i| row >> i & 1 == 1)
                .map(|i| pools[word * m + i].pop().expect("one copy per row"))
                .collect();
            relations.push(Relation::xor(prover, terms, false));
        }
    }
    prove(sim, relations, params)?;
    let mut live: Vec<Vec<Option<Gbcx>>> = Vec::with_capacity(count);
    let mut it = pools.into_iter();
    for _ in 0..count {
        live.push((0..m).map(|_| it.next().and_then(|mut p| p.pop())).collect());
    }
    Ok(live)
}

fn take(live: &mut [Option<Gbcx>], i: usize) -> Gbcx {
    live[i].take().expect("copy not yet spent")
}

fn mask_of(idx: &[usize]) -> u64 {
    idx.iter().fold(0, |acc, &i| acc | 1 << i)
}

fn pick_h<R: Rng + ?Sized>(rng: &mut R, code: &LinearCode, c: [u64; 2], a: [bool; 2], opened: u64) -> Option<u64> {
    let full = low_mask(code.len());
    for _ in 0..H_TRIES {
        let h = rng.gen::<u64>() & full;
        if word_parity(h & c[0]) != a[0] || word_parity(h & c[1]) != a[1] {
            continue;
        }
        // the bit must still depend on a codeword that vanishes on the opened positions
        if code
            .codewords()
            .iter()
            .any(|&x| x & opened == 0 && word_parity(h & x))
        {
            return Some(h);
        }
    }
    None
}

struct Dispute<'a> {
    code: &'a LinearCode,
    alice: PlayerId,
    bob: PlayerId,
    live: Vec<Vec<Option<Gbcx>>>,
    opened: [Vec<Option<bool>>; 2],
    transfers: Vec<OneOfTwo>,
}

/// Settles a complaint about the transfers: Alice opens both codewords and every
/// transfer mask. Anything inconsistent names Alice, otherwise Bob complained falsely.
fn resolve(sim: &mut Sim, d: Dispute) -> Halt {
    let m = d.code.len();
    let hook = EventKind::gcot_step(5);
    let mut words = [0u64; 2];
    for (s, live) in d.live.into_iter().enumerate() {
        for (i, g) in live.into_iter().enumerate() {
            let bit = match (d.opened[s][i], g) {
                (Some(v), _) => v,
                (None, Some(g)) => match gbcx_open(sim, g) {
                    Ok(v) => v,
                    Err(h) => return h,
                },
                (None, None) => return sim.blame(d.alice, hook),
            };
            words[s] |= (bit as u64) << i;
        }
    }
    if !d.code.is_codeword_word(words[0]) || !d.code.is_codeword_word(words[1]) {
        return sim.blame(d.alice, hook);
    }
    for (i, t) in d.transfers.into_iter().enumerate().take(m) {
        let mut masks = Vec::with_capacity(t.masks.len());
        for g in t.masks.iter().cloned() {
            match gbc_open(sim, g) {
                Ok(v) => masks.push(v),
                Err(h) => return h,
            }
        }
        let a = [words[0] >> i & 1 == 1, words[1] >> i & 1 == 1];
        if !t.consistent_with(a, &masks) {
            return sim.blame(d.alice, hook);
        }
    }
    sim.blame(d.bob, hook)
}

/// Runs the transfer. Consumes Alice's commitments `a` and Bob's selector `b`; returns
/// Bob's commitment to `a[b]`.
pub fn gcot(
    sim: &mut Sim,
    setup: &GcotSetup,
    alice: PlayerId,
    bob: PlayerId,
    a: [Gbcx; 2],
    b: Gbcx,
) -> Step<GcotRun> {
    let code = &setup.code;
    let cp = &setup.commit;
    let m = code.len();
    let s = setup.params.set_size();
    let mut session = GcotSession::default();

    // random distinct nonzero codewords, committed bit by bit
    let (c0, c1) = loop {
        let rng = sim.coins(alice);
        let x = code.random_codeword(rng);
        let y = code.random_codeword(rng);
        if x != 0 && y != 0 && x != y {
            break (x, y);
        }
    };
    let mut c = [c0, c1];
    if sim.cheat(alice, EventKind::gcot_step(2)) == Some(CheatAction::FlipBits) {
        c[0] ^= 1;
    }
    session.c = c;
    let mut words = Vec::with_capacity(2);
    let mut w2 = PayloadWriter::new();
    for word in c {
        let bits: Vec<Gbcx> = (0..m).map(|i| gbcx_commit(sim, alice, word >> i & 1 == 1, cp)).collect();
        for g in &bits {
            w2 = w2.u64(g.id());
        }
        words.push(bits);
    }
    sim.announce(alice, EventKind::gcot_step(2), w2.finish());
    let mut live = prove_membership(sim, alice, code, words, cp)?;

    // Bob's secret index sets; the selector is inverted on the first
    let bv = b.value();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(sim.coins(bob));
    let mut i0 = order[..s].to_vec();
    let mut i1 = order[s..2 * s].to_vec();
    i0.sort_unstable();
    i1.sort_unstable();
    let i0_mask = mask_of(&i0);
    session.flags = (0..m).fold(0, |acc, i| acc | (((bv ^ (i0_mask >> i & 1 == 1)) as u64) << i));
    let note = PayloadWriter::new().indices(&i0).indices(&i1).finish();
    sim.record(
        Actor::Player(bob),
        EventKind::gcot_step(3),
        note,
        Visibility::private(PlayerSet::singleton(bob)),
    );

    // one transfer per position
    let garble = sim.cheat(alice, EventKind::gcot_step(4)) == Some(CheatAction::FlipBits);
    let mut transfers = Vec::with_capacity(m);
    let mut w = 0u64;
    for i in 0..m {
        let pair = [c[0] >> i & 1 == 1, c[1] >> i & 1 == 1];
        let flag = session.flags >> i & 1 == 1;
        let t = one_of_two_inner(sim, alice, pair, bob, flag, &setup.uot, garble)?;
        w |= (t.value as u64) << i;
        transfers.push(t);
    }
    let mut union: Vec<usize> = i0.iter().chain(&i1).copied().collect();
    union.sort_unstable();
    sim.announce(bob, EventKind::gcot_step(4), PayloadWriter::new().indices(&union).finish());
    let mut opened: [Vec<Option<bool>>; 2] = [vec![None; m], vec![None; m]];
    for &i in &union {
        for side in 0..2 {
            let g = take(&mut live[side], i);
            opened[side][i] = Some(gbcx_open(sim, g)?);
        }
    }
    session.opened.extend(&union);

    // Bob's checks and correction
    let sel = |side: bool| side as usize;
    let mut complain = sim.cheat(bob, EventKind::gcot_step(5)) == Some(CheatAction::FalseComplain);
    if sim.is_honest(bob) {
        let bad0 = i0.iter().any(|&i| Some(w >> i & 1 == 1) != opened[sel(!bv)][i]);
        let bad1 = i1.iter().any(|&i| Some(w >> i & 1 == 1) != opened[sel(bv)][i]);
        complain |= bad0 || bad1;
    }
    for &i in &i0 {
        let bit = opened[sel(bv)][i].expect("opened on I");
        w = (w & !(1 << i)) | ((bit as u64) << i);
    }
    // the transfers are erasure-free, so an honest Alice's word needs no correction
    if sim.is_honest(bob) && code.decode_word(w) != Some(w) {
        complain = true;
    }
    if complain {
        sim.complain(bob, alice, EventKind::gcot_step(5));
        return Err(resolve(
            sim,
            Dispute {
                code,
                alice,
                bob,
                live,
                opened,
                transfers,
            },
        ));
    }
    session.w = w;
    let mut committed_w = w;
    if sim.cheat(bob, EventKind::gcot_step(5)) == Some(CheatAction::FlipBits) {
        let outside = (0..m).find(|i| !union.contains(i)).expect("room outside I");
        committed_w ^= 1 << outside;
    }
    let w_bits: Vec<Gbcx> = (0..m)
        .map(|i| gbcx_commit(sim, bob, committed_w >> i & 1 == 1, cp))
        .collect();
    let mut w5 = PayloadWriter::new();
    for g in &w_bits {
        w5 = w5.u64(g.id());
    }
    sim.announce(bob, EventKind::gcot_step(5), w5.finish());
    let mut live_w = prove_membership(sim, bob, code, vec![w_bits], cp)?.pop().expect("one word");

    // public check set outside I
    let seed = coin_toss(sim, sim.active(), 32, cp)?.word();
    let mut rest: Vec<usize> = (0..m).filter(|i| !union.contains(i)).collect();
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut i2 = rest[..s].to_vec();
    i2.sort_unstable();
    sim.announce_functionality(EventKind::gcot_step(6), PayloadWriter::new().indices(&i2).finish());
    for &i in &i2 {
        for side in 0..2 {
            let g = take(&mut live[side], i);
            opened[side][i] = Some(gbcx_open(sim, g)?);
        }
    }
    session.opened.extend(&i2);
    session.opened.sort_unstable();

    // Bob shows his word agrees with the selected codeword on the check set
    let differing: Vec<usize> = i2
        .iter()
        .copied()
        .filter(|&i| opened[0][i] != opened[1][i])
        .collect();
    let mut b_copies = replicate(sim, vec![(b, differing.len())], cp)?.pop().expect("one item");
    let mut w_copies = replicate(sim, i2.iter().map(|&i| (take(&mut live_w, i), 2)).collect(), cp)?;
    let tamper = sim.cheat(bob, EventKind::gcot_step(7)) == Some(CheatAction::FlipBits);
    let mut relations = Vec::with_capacity(s);
    for (k, &i) in i2.iter().enumerate() {
        let copy = w_copies[k].pop().expect("two copies");
        live_w[i] = w_copies[k].pop();
        let c0i = opened[0][i].expect("opened on I2");
        let terms = if differing.contains(&i) {
            vec![copy, b_copies.pop().expect("one per differing position")]
        } else {
            vec![copy]
        };
        relations.push(Relation::xor(bob, terms, c0i).tampered(tamper && k == 0));
    }
    sim.announce(bob, EventKind::gcot_step(7), PayloadWriter::new().indices(&i2).finish());
    prove(sim, relations, cp)?;

    // Alice's parity subset
    let opened_mask = mask_of(&session.opened);
    let [a0, a1] = a;
    let av = [a0.value(), a1.value()];
    let Some(h) = pick_h(sim.coins(alice), code, c, av, opened_mask) else {
        return Err(Halt::Aborted("no admissible parity subset".into()));
    };
    session.h = h;
    sim.announce(alice, EventKind::gcot_step(8), PayloadWriter::new().u64(h).finish());
    let mut relations = Vec::with_capacity(2);
    for (side, a_s) in [a0, a1].into_iter().enumerate() {
        let constant = word_parity(h & opened_mask & c[side]);
        let mut terms: Vec<Gbcx> = (0..m)
            .filter(|&i| h >> i & 1 == 1 && opened_mask >> i & 1 == 0)
            .map(|i| take(&mut live[side], i))
            .collect();
        terms.push(a_s);
        relations.push(Relation::xor(alice, terms, constant));
    }
    prove(sim, relations, cp)?;

    // Bob's result
    let mut result_bit = word_parity(h & w);
    if sim.cheat(bob, EventKind::gcot_step(9)) == Some(CheatAction::FlipBits) {
        result_bit = !result_bit;
    }
    let committed = gbcx_commit(sim, bob, result_bit, cp);
    sim.announce(bob, EventKind::gcot_step(9), PayloadWriter::new().u64(committed.id()).finish());
    let mut pair = replicate(sim, vec![(committed, 2)], cp)?.pop().expect("one item");
    let result = pair.pop().expect("two copies");
    let mut terms: Vec<Gbcx> = (0..m)
        .filter(|&i| h >> i & 1 == 1)
        .map(|i| take(&mut live_w, i))
        .collect();
    terms.push(pair.pop().expect("two copies"));
    prove(sim, vec![Relation::xor(bob, terms, false)], cp)?;
    session.i0 = i0;
    session.i1 = i1;
    session.i2 = i2;
    Ok(GcotRun { result, session })
}

/// Commits the inputs, runs the transfer and opens Bob's result publicly.
pub fn gcot_outcome(
    sim: &mut Sim,
    setup: &GcotSetup,
    alice: PlayerId,
    bob: PlayerId,
    a: [bool; 2],
    b: bool,
) -> ProtocolOutcome {
    let mut run = || -> Step<bool> {
        let a0 = gbcx_commit(sim, alice, a[0], &setup.commit);
        let a1 = gbcx_commit(sim, alice, a[1], &setup.commit);
        let bb = gbcx_commit(sim, bob, b, &setup.commit);
        let out = gcot(sim, setup, alice, bob, [a0, a1], bb)?;
        gbcx_open(sim, out.result)
    };
    match run() {
        Ok(v) => ProtocolOutcome::Success(vec![v]),
        Err(h) => h.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheat::{CheatBook, CheatScript};
    use crate::commit::gbc::GbcParams;
    use crate::simnet::SimConfig;

    fn setup(sim: &mut Sim) -> GcotSetup {
        let commit = CommitParams {
            gbc: GbcParams::new(4, 8),
            m_x: 6,
            ..Default::default()
        };
        let uot = UotParams {
            gbc: GbcParams::new(2, 8),
            ..Default::default()
        };
        gcot_setup(sim, GcotParams::default(), commit, uot).unwrap()
    }

    fn fresh(seed: u64, cheats: Vec<CheatScript>) -> Sim {
        let mut sim = Sim::with_cheats(SimConfig::new(2, seed), CheatBook::new(cheats)).unwrap();
        sim.set_record_deliveries(false);
        sim
    }

    #[test]
    fn selects_and_opens_six() {
        for combo in 0..8u8 {
            let mut sim = fresh(combo as u64, vec![]);
            let st = setup(&mut sim);
            let a = [combo & 1 == 1, combo & 2 == 2];
            let b = combo & 4 == 4;
            let a0 = gbcx_commit(&mut sim, PlayerId(0), a[0], &st.commit);
            let a1 = gbcx_commit(&mut sim, PlayerId(0), a[1], &st.commit);
            let bb = gbcx_commit(&mut sim, PlayerId(1), b, &st.commit);
            let run = gcot(&mut sim, &st, PlayerId(0), PlayerId(1), [a0, a1], bb).unwrap();
            assert_eq!(run.result.value(), a[b as usize]);
            let ses = &run.session;
            assert_eq!(ses.opened.len(), 6);
            assert_eq!(ses.w, ses.c[b as usize]);
            assert_eq!(word_parity(ses.h & ses.c[0]), a[0]);
            assert_eq!(word_parity(ses.h & ses.c[1]), a[1]);
            let i0 = mask_of(&ses.i0);
            for i in 0..16 {
                assert_eq!(ses.flags >> i & 1 == 1, b ^ (i0 >> i & 1 == 1));
            }
            assert_eq!(gbcx_open(&mut sim, run.result), Ok(a[b as usize]));
        }
    }

    #[test]
    fn garbled_transfers_name_alice() {
        let mut sim = fresh(11, vec![CheatScript::new(PlayerId(0), EventKind::gcot_step(4), CheatAction::FlipBits)]);
        let st = setup(&mut sim);
        let out = gcot_outcome(&mut sim, &st, PlayerId(0), PlayerId(1), [true, false], true);
        assert_eq!(out, ProtocolOutcome::CheaterIdentified(PlayerId(0)));
    }

    #[test]
    fn false_complaint_names_bob() {
        let mut sim = fresh(12, vec![CheatScript::new(PlayerId(1), EventKind::gcot_step(5), CheatAction::FalseComplain)]);
        let st = setup(&mut sim);
        let out = gcot_outcome(&mut sim, &st, PlayerId(0), PlayerId(1), [false, true], false);
        assert_eq!(out, ProtocolOutcome::CheaterIdentified(PlayerId(1)));
    }

    #[test]
    fn bob_deviations_name_bob() {
        for step in [5u8, 7, 9] {
            let mut sim = fresh(13 + step as u64, vec![CheatScript::new(PlayerId(1), EventKind::gcot_step(step), CheatAction::FlipBits)]);
            let st = setup(&mut sim);
            let out = gcot_outcome(&mut sim, &st, PlayerId(0), PlayerId(1), [true, true], true);
            assert_eq!(out, ProtocolOutcome::CheaterIdentified(PlayerId(1)), "step {step}");
        }
    }

    #[test]
    fn non_codeword_names_alice() {
        let mut sim = fresh(21, vec![CheatScript::new(PlayerId(0), EventKind::gcot_step(2), CheatAction::FlipBits)]);
        let st = setup(&mut sim);
        let out = gcot_outcome(&mut sim, &st, PlayerId(0), PlayerId(1), [true, false], false);
        assert_eq!(out, ProtocolOutcome::CheaterIdentified(PlayerId(0)));
    }

    #[test]
    fn parity_subset_keeps_other_bit_open() {
        let mut sim = fresh(30, vec![]);
        let st = setup(&mut sim);
        let code = &st.code;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = [code.random_codeword(&mut rng), code.random_codeword(&mut rng)];
        if c[0] == c[1] || c[0] == 0 || c[1] == 0 {
            return;
        }
        let opened = 0b0000_0000_0011_1111;
        let h = pick_h(&mut rng, code, c, [true, false], opened).unwrap();
        // some codeword agreeing with c1 on the opened positions has the other parity
        let other = code
            .codewords()
            .iter()
            .any(|&x| (x ^ c[1]) & opened == 0 && word_parity(h & x) != word_parity(h & c[1]));
        assert!(other);
    }
}
