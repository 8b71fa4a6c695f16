//! Distributed bit commitments: one XOR-pair commitment per player, XORing to the bit.

use rand::Rng;

use crate::cheat::CheatAction;
use crate::commit::gbcx::{gbcx_commit, gbcx_open, gbcx_open_garbled, gbcx_open_private, replicate, CommitParams, Gbcx};
use crate::model::{PlayerId, Step};
use crate::simnet::Sim;
use crate::transcript::{EventKind, PayloadWriter};

#[derive(Debug, Clone)]
pub struct Dbc {
    shares: Vec<Gbcx>,
    /// The player who can open every share (user inputs only).
    owner: Option<PlayerId>,
}

impl Dbc {
    /// Intermediate result from one share per player (index = player).
    pub fn from_shares(shares: Vec<Gbcx>) -> Self {
        Self { shares, owner: None }
    }

    pub fn shares(&self) -> &[Gbcx] {
        &self.shares
    }

    pub fn into_shares(self) -> Vec<Gbcx> {
        self.shares
    }

    pub fn owner(&self) -> Option<PlayerId> {
        self.owner
    }

    /// XOR of the claimed share values.
    pub fn value(&self) -> bool {
        self.shares.iter().fold(false, |acc, s| acc ^ s.value())
    }
}

/// Commits `owner` to `b` so that only `owner` can open all shares.
///
/// Every other player commits to a random share and opens a copy of it privately to the
/// owner. If the owner rejects that opening, the copy is opened publicly instead; a
/// helper who refuses that too is named. The owner's own share completes the parity.
pub fn dbc_create_user(sim: &mut Sim, owner: PlayerId, b: bool, params: &CommitParams) -> Step<Dbc> {
    let n = sim.n();
    let mut helpers = Vec::new();
    for j in (0..n).map(PlayerId).filter(|&j| j != owner) {
        let r = sim.coins(j).gen::<bool>();
        helpers.push((j, gbcx_commit(sim, j, r, params)));
    }
    let (players, gs): (Vec<PlayerId>, Vec<Gbcx>) = helpers.into_iter().unzip();
    let copies = replicate(sim, gs.into_iter().map(|g| (g, 2)).collect(), params)?;
    let mut shares: Vec<Option<Gbcx>> = vec![None; n];
    let mut parity = b;
    for (j, mut pair) in players.into_iter().zip(copies) {
        let spare = pair.pop().expect("two copies");
        let share = pair.pop().expect("two copies");
        let value = match gbcx_open_private(sim, &spare, owner, EventKind::Dbc) {
            Some(v) => v,
            None => {
                sim.complain(owner, j, EventKind::Dbc);
                if sim.cheat(j, EventKind::Dbc) == Some(CheatAction::Withhold) {
                    return Err(sim.blame(j, EventKind::Dbc));
                }
                // a garbling helper keeps garbling in public unless scripted for one opening
                let garbling = sim.cheat(j, EventKind::Dbc) == Some(CheatAction::FlipBits)
                    && sim.cheat_count(j, EventKind::Dbc) != Some(1);
                if garbling {
                    gbcx_open_garbled(sim, spare)?
                } else {
                    gbcx_open(sim, spare)?
                }
            }
        };
        parity ^= value;
        shares[j.0] = Some(share);
    }
    shares[owner.0] = Some(gbcx_commit(sim, owner, parity, params));
    let shares: Vec<Gbcx> = shares.into_iter().map(|s| s.expect("every slot filled")).collect();
    let mut w = PayloadWriter::new().u8(owner.0 as u8);
    for s in &shares {
        w = w.u64(s.id());
    }
    sim.announce(owner, EventKind::Dbc, w.finish());
    Ok(Dbc {
        shares,
        owner: Some(owner),
    })
}

/// Opens every share publicly in player order. `hook` names the phase whose deviations
/// apply: a player scripted to withhold there is named.
pub fn dbc_open(sim: &mut Sim, dbc: Dbc, hook: EventKind) -> Step<bool> {
    let mut value = false;
    for (i, share) in dbc.shares.into_iter().enumerate() {
        let p = PlayerId(i);
        if sim.cheat(p, hook) == Some(CheatAction::Withhold) {
            return Err(sim.blame(p, hook));
        }
        value ^= gbcx_open(sim, share)?;
    }
    Ok(value)
}
