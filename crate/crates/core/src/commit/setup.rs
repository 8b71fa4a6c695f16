//! Anonymous setup: every player creates commitments whose author stays hidden until a
//! dispute forces it to identify itself. Once complaints stop producing new conflicts the
//! phase ends, splitting the players if any conflict was recorded.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;

use crate::bits::BitString;
use crate::broadcast::{anonymous_broadcast_identifiable, identify_sender, BroadcastParams, RelayPolicy};
use crate::cheat::CheatAction;
use crate::commit::gbc::{gbc_commit_anonymous, Gbc, GbcParams};
use crate::model::{PlayerId, Step};
use crate::simnet::Sim;
use crate::transcript::{EventKind, PayloadWriter};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetupParams {
    /// Quiet rounds (one commitment per player each) needed before the phase ends.
    /// Zero means the number of players.
    pub l: usize,
    pub gbc: GbcParams,
    pub broadcast: BroadcastParams,
}

impl Default for SetupParams {
    fn default() -> Self {
        Self {
            l: 0,
            gbc: GbcParams::new(4, 8),
            broadcast: BroadcastParams::default(),
        }
    }
}

impl SetupParams {
    pub fn quiet_rounds(&self, n: usize) -> usize {
        if self.l == 0 {
            n
        } else {
            self.l
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SetupReport {
    pub rounds: usize,
    /// Accepted commitments per player.
    pub accepted: Vec<usize>,
    pub complaints: usize,
}

fn claimed_bits(g: &Gbc, claimed: &[u64]) -> BitString {
    let p = g.params();
    claimed
        .iter()
        .fold(BitString::zeros(0), |acc, &s| acc.concat(&BitString::from_word(s, p.m)))
}

/// Runs the setup phase over the active players.
///
/// Each round every player commits once anonymously and opens the strings through an
/// identifiable anonymous broadcast. A receiver whose positions disagree complains; the
/// author then identifies itself and the two are put in conflict. Ends after `l`
/// consecutive rounds without a new conflict; if any conflict exists the players split.
pub fn anonymous_setup(sim: &mut Sim, params: &SetupParams) -> Step<SetupReport> {
    let n = sim.n();
    let quiet_needed = params.quiet_rounds(n);
    // every new conflict resets the count, and there are at most n^2 of them
    let max_rounds = quiet_needed * (n * n + 1);
    let mut report = SetupReport {
        accepted: vec![0; n],
        ..Default::default()
    };
    let mut quiet = 0;
    while quiet < quiet_needed && report.rounds < max_rounds {
        report.rounds += 1;
        sim.next_round();
        let edges_before = sim.conflicts().edge_count();
        let mut order: Vec<PlayerId> = sim.active().iter().collect();
        order.shuffle(&mut sim.session_coins("setup-order", report.rounds as u64, 0));
        for creator in order {
            let b = sim.coins(creator).gen::<bool>();
            let g = gbc_commit_anonymous(sim, creator, b, params.gbc);
            let claimed = if sim.cheat(creator, EventKind::GbcOpen) == Some(CheatAction::FlipBits) {
                g.flipped_claim(sim.coins(creator))
            } else {
                g.strings().to_vec()
            };
            let handle = anonymous_broadcast_identifiable(
                sim,
                creator,
                &claimed_bits(&g, &claimed),
                &params.broadcast,
                &RelayPolicy::Random,
            )?;
            let mut complainers = Vec::new();
            for r in sim.active().without(creator).iter() {
                let disagrees = !g.consistent_for(r, &claimed);
                let false_claim = sim.cheat(r, EventKind::GbcCommit) == Some(CheatAction::FalseComplain);
                if (disagrees && sim.is_honest(r)) || false_claim {
                    let payload = PayloadWriter::new().u64(g.id()).finish();
                    sim.announce(r, EventKind::Complaint, payload);
                    complainers.push(r);
                }
            }
            if complainers.is_empty() {
                report.accepted[creator.0] += 1;
                continue;
            }
            report.complaints += complainers.len();
            // the disputed commitment is dropped once its author steps forward
            if identify_sender(sim, &handle, creator, &params.broadcast) {
                for c in complainers {
                    sim.add_conflict(c, creator);
                }
            }
        }
        if sim.conflicts().edge_count() == edges_before {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }
    if sim.conflicts().edge_count() > 0 {
        return Err(sim.split());
    }
    Ok(report)
}
