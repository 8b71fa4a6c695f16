//! Gates on distributed commitments. XOR and NOT act on each player's share with a
//! linear proof; AND splits into pairwise products, each computed by committed OT,
//! plus one local product per player checked by cut-and-choose over committed triples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commit::dbc::Dbc;
use crate::commit::gbcx::{coin_toss, gbcx_commit, gbcx_open, prove, replicate, CommitParams, Gbcx, Relation};
use crate::model::{PlayerId, Step};
use crate::ot::gcot::{gcot, GcotSetup};
use crate::simnet::Sim;
use crate::transcript::{EventKind, PayloadWriter};

/// Splits replicated copies back into `count` commitments of the same shape.
pub fn copy_dbc(sim: &mut Sim, dbc: Dbc, count: usize, params: &CommitParams) -> Step<Vec<Dbc>> {
    let mut pools = replicate(sim, dbc.into_shares().into_iter().map(|s| (s, count)).collect(), params)?;
    Ok((0..count)
        .map(|_| Dbc::from_shares(pools.iter_mut().map(|p| p.pop().expect("count copies")).collect()))
        .collect())
}

/// Commits `p` to `value` and returns two copies: one to spend in a proof, one to keep.
fn commit_twice(sim: &mut Sim, p: PlayerId, value: bool, params: &CommitParams) -> Step<(Gbcx, Gbcx)> {
    let g = gbcx_commit(sim, p, value, params);
    let mut pair = replicate(sim, vec![(g, 2)], params)?.pop().expect("one item");
    let keep = pair.pop().expect("two copies");
    Ok((pair.pop().expect("two copies"), keep))
}

/// Each player commits to the XOR of its two shares and proves it.
pub fn xor_dbc(sim: &mut Sim, x: Dbc, y: Dbc, params: &CommitParams) -> Step<Dbc> {
    let mut relations = Vec::new();
    let mut shares = Vec::new();
    for (i, (a, b)) in x.into_shares().into_iter().zip(y.into_shares()).enumerate() {
        let p = PlayerId(i);
        let (spent, keep) = commit_twice(sim, p, a.value() ^ b.value(), params)?;
        relations.push(Relation::xor(p, vec![spent, a, b], false));
        shares.push(keep);
    }
    prove(sim, relations, params)?;
    Ok(Dbc::from_shares(shares))
}

/// The lowest-index active player inverts its share and proves the new one differs.
pub fn not_dbc(sim: &mut Sim, x: Dbc, params: &CommitParams) -> Step<Dbc> {
    let p = sim.active().first().expect("someone is active");
    let mut shares = x.into_shares();
    let old = shares[p.0].clone();
    let (spent, keep) = commit_twice(sim, p, !old.value(), params)?;
    prove(sim, vec![Relation::unequal(p, spent, old)], params)?;
    shares[p.0] = keep;
    Ok(Dbc::from_shares(shares))
}

/// Alice, committed to `a`, and Bob, committed to `b`, end up with commitments to
/// `a'` and `b'` where `a' ⊕ b' = a ∧ b`: Alice picks `a'` at random and sends
/// `(a', a' ⊕ a)` by committed OT with Bob's selector `b`.
pub fn and_commitments(
    sim: &mut Sim,
    setup: &GcotSetup,
    alice: PlayerId,
    a: Gbcx,
    bob: PlayerId,
    b: Gbcx,
) -> Step<(Gbcx, Gbcx)> {
    let cp = &setup.commit;
    let r = sim.coins(alice).gen::<bool>();
    let masked = gbcx_commit(sim, alice, r ^ a.value(), cp);
    let own = gbcx_commit(sim, alice, r, cp);
    let mut pools = replicate(sim, vec![(own, 3), (masked, 2)], cp)?;
    let mut masked = pools.pop().expect("two items");
    let mut own = pools.pop().expect("two items");
    let relation = Relation::xor(
        alice,
        vec![
            own.pop().expect("copy"),
            masked.pop().expect("copy"),
            a,
        ],
        false,
    );
    prove(sim, vec![relation], cp)?;
    let run = gcot(
        sim,
        setup,
        alice,
        bob,
        [own.pop().expect("copy"), masked.pop().expect("copy")],
        b,
    )?;
    Ok((own.pop().expect("copy"), run.result))
}

/// Product of two bits committed by the same player.
///
/// The player commits to `2s` triples `(u, v, u ∧ v)`; a public coin opens half of
/// them, which must be correct. With each remaining triple the player publishes
/// `d = x ⊕ u` and `e = y ⊕ v`, commits to `w ⊕ d v ⊕ e u ⊕ d e` and proves it
/// linearly; all `s` results are then proved equal and the first is kept.
pub fn local_and(sim: &mut Sim, p: PlayerId, x: Gbcx, y: Gbcx, s: usize, params: &CommitParams) -> Step<Gbcx> {
    let s = s.max(1);
    let mut triples = Vec::with_capacity(2 * s);
    for _ in 0..2 * s {
        let u = sim.coins(p).gen::<bool>();
        let v = sim.coins(p).gen::<bool>();
        triples.push((
            gbcx_commit(sim, p, u, params),
            gbcx_commit(sim, p, v, params),
            gbcx_commit(sim, p, u & v, params),
        ));
    }
    let seed = coin_toss(sim, sim.active(), 32, params)?.word();
    triples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let kept: Vec<_> = triples.split_off(s);
    for (u, v, w) in triples {
        let (u, v, w) = (gbcx_open(sim, u)?, gbcx_open(sim, v)?, gbcx_open(sim, w)?);
        if w != (u & v) {
            return Err(sim.blame(p, EventKind::Gate));
        }
    }
    let (xv, yv) = (x.value(), y.value());
    let masks: Vec<(bool, bool)> = kept
        .iter()
        .map(|(u, v, _)| (xv ^ u.value(), yv ^ v.value()))
        .collect();
    let mut w = PayloadWriter::new().u8(p.0 as u8).u8(s as u8);
    for &(d, e) in &masks {
        w = w.bool(d).bool(e);
    }
    sim.announce(p, EventKind::Gate, w.finish());

    let mut items = vec![(x, s), (y, s)];
    for ((u, v, _), &(d, e)) in kept.iter().zip(&masks) {
        items.push((u.clone(), 1 + e as usize));
        items.push((v.clone(), 1 + d as usize));
    }
    let mut pools = replicate(sim, items, params)?;
    let mut relations = Vec::new();
    let mut results = Vec::with_capacity(s);
    for (t, ((_, _, w), &(d, e))) in kept.into_iter().zip(&masks).enumerate() {
        let (ui, vi) = (2 + 2 * t, 3 + 2 * t);
        let u = pools[ui].pop().expect("copy");
        let v = pools[vi].pop().expect("copy");
        let xc = pools[0].pop().expect("copy");
        let yc = pools[1].pop().expect("copy");
        relations.push(Relation::xor(p, vec![xc, u], d));
        relations.push(Relation::xor(p, vec![yc, v], e));
        let value = w.value() ^ (d & (yv ^ e)) ^ (e & (xv ^ d)) ^ (d & e);
        let r = gbcx_commit(sim, p, value, params);
        let mut terms = vec![w];
        if d {
            terms.push(pools[vi].pop().expect("copy"));
        }
        if e {
            terms.push(pools[ui].pop().expect("copy"));
        }
        results.push((r, terms, d & e));
    }
    let counts: Vec<(Gbcx, usize)> = results
        .iter()
        .enumerate()
        .map(|(t, (r, _, _))| (r.clone(), if t == 0 { s + 1 } else { 2 }))
        .collect();
    let mut copies = replicate(sim, counts, params)?;
    for (t, (_, mut terms, constant)) in results.into_iter().enumerate() {
        terms.push(copies[t].pop().expect("copy"));
        relations.push(Relation::xor(p, terms, constant));
    }
    for t in 1..s {
        let other = copies[t].pop().expect("copy");
        let first = copies[0].pop().expect("copy");
        relations.push(Relation::equal(p, first, other));
    }
    prove(sim, relations, params)?;
    Ok(copies[0].pop().expect("kept copy"))
}

/// AND of two distributed commitments: every ordered pair of players `(i, j)` computes
/// a sharing of `x_i ∧ y_j`, in lexicographic order; each player then commits to the
/// XOR of everything it collected and proves it.
pub fn and_dbc(sim: &mut Sim, setup: &GcotSetup, x: Dbc, y: Dbc, local_checks: usize) -> Step<Dbc> {
    let cp = &setup.commit;
    let n = x.shares().len();
    let mut items: Vec<(Gbcx, usize)> = x.into_shares().into_iter().map(|g| (g, n)).collect();
    items.extend(y.into_shares().into_iter().map(|g| (g, n)));
    let mut pools = replicate(sim, items, cp)?;
    let mut collected: Vec<Vec<Gbcx>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            let a = pools[i].pop().expect("one copy per pair");
            let b = pools[n + j].pop().expect("one copy per pair");
            if i == j {
                let r = local_and(sim, PlayerId(i), a, b, local_checks, cp)?;
                collected[i].push(r);
            } else {
                let (ai, bj) = and_commitments(sim, setup, PlayerId(i), a, PlayerId(j), b)?;
                collected[i].push(ai);
                collected[j].push(bj);
            }
        }
    }
    let mut relations = Vec::with_capacity(n);
    let mut shares = Vec::with_capacity(n);
    for (i, parts) in collected.into_iter().enumerate() {
        let p = PlayerId(i);
        let value = parts.iter().fold(false, |acc, g| acc ^ g.value());
        let (spent, keep) = commit_twice(sim, p, value, cp)?;
        let mut terms = parts;
        terms.push(spent);
        relations.push(Relation::xor(p, terms, false));
        shares.push(keep);
    }
    prove(sim, relations, cp)?;
    Ok(Dbc::from_shares(shares))
}
