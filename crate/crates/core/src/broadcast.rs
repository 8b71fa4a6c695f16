//! Broadcast channels built on the anonymous channel: authenticated broadcast,
//! anonymous transfer, anonymous broadcast through relays, and anonymous broadcast whose
//! sender can later identify itself.

use rand::seq::SliceRandom;
use serde::Deserialize;

use crate::bits::BitString;
use crate::cheat::CheatAction;
use crate::mac::{AuthKey, AuthTag, Mac};
use crate::model::{Halt, PlayerId, PlayerSet, ProtocolOutcome, Step};
use crate::simnet::Sim;
use crate::transcript::{EventKind, PayloadWriter};

/// Resends before an anonymous transfer gives up.
pub const SEND_RETRY_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BroadcastParams {
    /// Keys each player sends the broadcaster per attempt.
    pub l: usize,
    /// Repetition factor of the erasure code.
    pub r: usize,
    /// Evidence level above which a suspect is expelled.
    pub cheat_threshold: f64,
    /// Degree of the authentication field.
    pub field_degree: u32,
    /// Attempts before an unsettled broadcast aborts.
    pub max_attempts: usize,
}

impl Default for BroadcastParams {
    fn default() -> Self {
        Self {
            l: 2,
            r: 8,
            cheat_threshold: 0.99,
            field_degree: crate::mac::DEFAULT_DEGREE,
            max_attempts: 64,
        }
    }
}

impl BroadcastParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.l == 0 || self.r == 0 {
            return Err("broadcast.l and broadcast.r must be at least 1".into());
        }
        if !(self.cheat_threshold > 0.0 && self.cheat_threshold < 1.0) {
            return Err(format!("cheat_threshold {} outside (0, 1)", self.cheat_threshold));
        }
        Mac::new(self.field_degree).map_err(|e| e.to_string())?;
        Ok(())
    }

    fn mac(&self) -> Mac {
        Mac::new(self.field_degree).expect("validated degree")
    }

    /// Number of independent pieces of evidence needed to pass the threshold.
    pub fn evidence_needed(&self) -> usize {
        let mut count = 0;
        while evidence(count) <= self.cheat_threshold {
            count += 1;
        }
        count
    }
}

/// Confidence after `count` independent observations: `1 - 2^-count`.
pub fn evidence(count: usize) -> f64 {
    1.0 - 0.5f64.powi(count as i32)
}

fn repeat_encode(msg: &BitString, r: usize) -> BitString {
    msg.iter().flat_map(|b| std::iter::repeat(b).take(r)).collect()
}

/// Sends `msg` to `receiver` without revealing the sender. Each bit is repeated `r`
/// times; if some bit loses every copy the receiver asks for a resend.
pub fn anonymous_send(
    sim: &mut Sim,
    sender: PlayerId,
    receiver: PlayerId,
    msg: &BitString,
    params: &BroadcastParams,
) -> Step<BitString> {
    let r = params.r;
    let encoded = repeat_encode(msg, r);
    for _ in 0..SEND_RETRY_CAP {
        let d = sim.aot_send_as(sender, receiver, &encoded, EventKind::AnonSend);
        let decoded: Option<BitString> = (0..msg.len())
            .map(|i| (i * r..(i + 1) * r).find_map(|j| d.get(j)))
            .collect();
        if let Some(bits) = decoded {
            return Ok(bits);
        }
        sim.announce(receiver, EventKind::AnonSend, PayloadWriter::new().bool(false).finish());
    }
    Err(Halt::Aborted("anonymous send retries exhausted".into()))
}

fn envelope_payload(msg: &BitString, tags: &[AuthTag]) -> Vec<u8> {
    let mut w = PayloadWriter::new().bits(msg).u16(tags.len() as u16);
    for t in tags {
        w = w.u64(t.0);
    }
    w.finish()
}

fn authenticated_by(mac: &Mac, msg: &BitString, tags: &[AuthTag], keys: &[AuthKey]) -> bool {
    keys.iter()
        .all(|k| tags.iter().any(|t| mac.verify(msg, t, k)))
}

fn altered(msg: &BitString) -> BitString {
    if msg.is_empty() {
        return BitString::ones(1);
    }
    let mut m = msg.clone();
    m.flip(0);
    m
}

/// Authenticated broadcast of `msg` by `sender`.
///
/// Every other player sends the sender `l` keys anonymously, the sender tags the message
/// under all of them and sends it to everyone, and everyone echoes what they got. The
/// attempt repeats until the echoes agree, the sender is in conflict with everyone,
/// the same players keep echoing unauthenticated messages, or enough authenticated
/// conflicting messages have been seen to pass the threshold.
pub fn authenticated_broadcast(
    sim: &mut Sim,
    sender: PlayerId,
    msg: &BitString,
    params: &BroadcastParams,
) -> Step<BitString> {
    let mac = params.mac();
    let needed = params.evidence_needed();
    let mut equivocations = 0;
    let mut repeated: Option<(PlayerSet, usize)> = None;
    let others: Vec<PlayerId> = sim.active().without(sender).iter().collect();
    for _ in 0..params.max_attempts {
        sim.next_round();
        let mut keys: Vec<Vec<AuthKey>> = vec![Vec::new(); sim.n()];
        let mut inbox = Vec::new();
        for &j in &others {
            for _ in 0..params.l {
                let key = AuthKey::random(mac.field(), sim.coins(j));
                let got = anonymous_send(sim, j, sender, &key.to_bits(mac.field()), params)?;
                inbox.push(AuthKey::from_bits(&got, mac.field()).expect("key length"));
                keys[j.0].push(key);
            }
        }
        inbox.shuffle(sim.coins(sender));
        let equivocate = sim.cheat(sender, EventKind::AuthBcast) == Some(CheatAction::Equivocate);
        let mut received = vec![(BitString::zeros(0), Vec::new()); sim.n()];
        for (idx, &j) in others.iter().enumerate() {
            let m = if equivocate && idx >= others.len() / 2 {
                altered(msg)
            } else {
                msg.clone()
            };
            let tags: Vec<AuthTag> = inbox
                .iter()
                .map(|k| mac.auth(&m, k).expect("message fits"))
                .collect();
            sim.p2p(sender, j, EventKind::AuthBcast, envelope_payload(&m, &tags));
            received[j.0] = (m, tags);
        }
        // echoes
        let mut echoes: Vec<(PlayerId, BitString, Vec<AuthTag>)> = Vec::new();
        for &j in &others {
            let (m, tags) = if sim.cheat(j, EventKind::AuthBcast) == Some(CheatAction::FalseComplain) {
                let fake = altered(msg);
                let tags = (0..inbox.len())
                    .map(|_| AuthTag(mac.field().random(sim.coins(j))))
                    .collect();
                (fake, tags)
            } else {
                received[j.0].clone()
            };
            sim.announce(j, EventKind::AuthBcast, envelope_payload(&m, &tags));
            echoes.push((j, m, tags));
        }
        for &j in &others {
            let (m, tags) = &received[j.0];
            if sim.is_honest(j) && !authenticated_by(&mac, m, tags, &keys[j.0]) {
                sim.complain(j, sender, EventKind::AuthBcast);
            }
        }
        let first = &echoes[0].1;
        if echoes.iter().all(|(_, m, _)| m == first) {
            return Ok(first.clone());
        }
        if sim.conflicts().in_conflict_with_all(sender) {
            return Err(sim.blame(sender, EventKind::AuthBcast));
        }
        // judged with the keys of the players who follow the protocol
        let honest: Vec<PlayerId> = others.iter().copied().filter(|&j| sim.is_honest(j)).collect();
        let is_authentic = |m: &BitString, tags: &[AuthTag]| {
            honest
                .iter()
                .all(|j| authenticated_by(&mac, m, tags, &keys[j.0]))
        };
        let mut authentic: Vec<&BitString> = Vec::new();
        let mut complainers = PlayerSet::default();
        for (j, m, tags) in &echoes {
            if is_authentic(m, tags) {
                if !authentic.contains(&m) {
                    authentic.push(m);
                }
            } else {
                complainers.insert(*j);
            }
        }
        if authentic.len() >= 2 {
            equivocations += 1;
            if equivocations >= needed {
                return Err(sim.blame(sender, EventKind::AuthBcast));
            }
        }
        if !complainers.is_empty() {
            let count = match repeated {
                Some((set, c)) if set == complainers => c + 1,
                _ => 1,
            };
            repeated = Some((complainers, count));
            if count >= needed {
                let culprit = complainers.first().expect("nonempty");
                return Err(sim.blame(culprit, EventKind::AuthBcast));
            }
        }
    }
    Err(Halt::Aborted("authenticated broadcast did not settle".into()))
}

pub fn authenticated_broadcast_outcome(
    sim: &mut Sim,
    sender: PlayerId,
    msg: &BitString,
    params: &BroadcastParams,
) -> ProtocolOutcome {
    match authenticated_broadcast(sim, sender, msg, params) {
        Ok(m) => ProtocolOutcome::Success(m.to_bools()),
        Err(h) => h.into(),
    }
}

/// How the anonymous broadcaster picks relays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelayPolicy {
    /// A permutation of all players drawn from session coins. If the sender itself comes
    /// first it simply broadcasts, which looks the same as relaying.
    Random,
    /// Relays tried in this order.
    Fixed(Vec<PlayerId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastReceipt {
    pub id: u64,
    pub relay: PlayerId,
    pub failed_relays: Vec<PlayerId>,
}

/// A sender that relays for itself still draws its own channel erasures and asks for
/// resends as a relay would, so the public record does not single it out.
fn self_relay(sim: &mut Sim, sender: PlayerId, msg: &BitString, params: &BroadcastParams) -> Step<BitString> {
    let r = params.r;
    let encoded = repeat_encode(msg, r);
    for _ in 0..SEND_RETRY_CAP {
        let d = sim.aot_loopback(sender, &encoded, EventKind::AnonSend);
        if (0..msg.len()).all(|i| (i * r..(i + 1) * r).any(|j| d.get(j).is_some())) {
            return Ok(msg.clone());
        }
        sim.announce(sender, EventKind::AnonSend, PayloadWriter::new().bool(false).finish());
    }
    Err(Halt::Aborted("anonymous send retries exhausted".into()))
}

/// Anonymous broadcast: the message goes anonymously to a relay, who broadcasts it.
/// When a relay broadcasts something else the sender complains (revealing itself) and
/// tries another player. A sender in conflict with every other player leaves.
pub fn anonymous_broadcast(
    sim: &mut Sim,
    sender: PlayerId,
    msg: &BitString,
    params: &BroadcastParams,
    policy: &RelayPolicy,
) -> Step<BroadcastReceipt> {
    let id = sim.fresh_id();
    let order: Vec<PlayerId> = match policy {
        RelayPolicy::Random => {
            let mut all: Vec<PlayerId> = sim.players().collect();
            all.shuffle(&mut sim.session_coins("relay", id, 0));
            all
        }
        RelayPolicy::Fixed(v) => v.clone(),
    };
    let mut failed = Vec::new();
    for relay in order {
        if relay == sender && !failed.is_empty() {
            continue;
        }
        if !sim.active().contains(relay) || sim.conflicts().in_conflict(sender, relay) {
            continue;
        }
        let got = if relay == sender {
            self_relay(sim, sender, msg, params)?
        } else {
            anonymous_send(sim, sender, relay, msg, params)?
        };
        let relayed = if relay != sender && sim.cheat(relay, EventKind::AnonBcast) == Some(CheatAction::BadRelay) {
            got.not()
        } else {
            got
        };
        let payload = PayloadWriter::new().u64(id).bits(&relayed).finish();
        sim.announce(relay, EventKind::AnonBcast, payload);
        if relayed == *msg {
            return Ok(BroadcastReceipt {
                id,
                relay,
                failed_relays: failed,
            });
        }
        sim.complain(sender, relay, EventKind::AnonBcast);
        failed.push(relay);
        if sim.conflicts().in_conflict_with_all(sender) {
            break;
        }
    }
    Err(Halt::Aborted("sender expelled".into()))
}

/// An anonymous broadcast that carries one authentication tag per player.
#[derive(Debug, Clone)]
pub struct AnonymousHandle {
    pub receipt: BroadcastReceipt,
    pub msg: BitString,
    pub tags: Vec<AuthTag>,
    /// Key held by each player, as received anonymously (the sender keeps its own slot).
    received_keys: Vec<AuthKey>,
    sender_keys: Vec<AuthKey>,
    sender: PlayerId,
}

impl AnonymousHandle {
    pub fn received_key(&self, p: PlayerId) -> AuthKey {
        self.received_keys[p.0]
    }
}

fn key_bits(keys: &[AuthKey], mac: &Mac) -> BitString {
    keys.iter()
        .fold(BitString::zeros(0), |acc, k| acc.concat(&k.to_bits(mac.field())))
}

/// Anonymous broadcast with later identification: the sender first hands every other
/// player one key anonymously and broadcasts the message with a tag under each key.
/// Keys come from per-session coins so the messages do not depend on who sends.
pub fn anonymous_broadcast_identifiable(
    sim: &mut Sim,
    sender: PlayerId,
    msg: &BitString,
    params: &BroadcastParams,
    policy: &RelayPolicy,
) -> Step<AnonymousHandle> {
    let mac = params.mac();
    let session = sim.fresh_id();
    let keys: Vec<AuthKey> = (0..sim.n())
        .map(|j| AuthKey::random(mac.field(), &mut sim.session_coins("anon-key", session, j as u64)))
        .collect();
    let mut received = keys.clone();
    for j in sim.players().collect::<Vec<_>>() {
        let bits = keys[j.0].to_bits(mac.field());
        if j == sender {
            // the sender's own slot goes through the same motions as everyone else's
            self_relay(sim, sender, &bits, params)?;
            continue;
        }
        let got = anonymous_send(sim, sender, j, &bits, params)?;
        received[j.0] = AuthKey::from_bits(&got, mac.field()).expect("key length");
    }
    let tags: Vec<AuthTag> = keys
        .iter()
        .map(|k| mac.auth(msg, k).expect("message fits"))
        .collect();
    let mut envelope = msg.clone();
    for t in &tags {
        envelope = envelope.concat(&BitString::from_word(t.0, mac.field().degree() as usize));
    }
    let receipt = anonymous_broadcast(sim, sender, &envelope, params, policy)?;
    Ok(AnonymousHandle {
        receipt,
        msg: msg.clone(),
        tags,
        received_keys: received,
        sender_keys: keys,
        sender,
    })
}

/// `claimant` claims authorship by publishing the keys of all players. Every other
/// player that follows the protocol compares its own slot with the key it received and
/// checks the broadcast tag. Accepted only if all of them agree.
pub fn identify_sender(
    sim: &mut Sim,
    handle: &AnonymousHandle,
    claimant: PlayerId,
    params: &BroadcastParams,
) -> bool {
    let mac = params.mac();
    let claimed: Vec<AuthKey> = if claimant == handle.sender {
        handle.sender_keys.clone()
    } else {
        // an impostor knows only the key it received itself
        (0..sim.n())
            .map(|j| {
                if j == claimant.0 {
                    handle.received_keys[j]
                } else {
                    AuthKey::random(mac.field(), sim.coins(claimant))
                }
            })
            .collect()
    };
    let payload = PayloadWriter::new()
        .u64(handle.receipt.id)
        .bits(&key_bits(&claimed, &mac))
        .finish();
    sim.announce(claimant, EventKind::Identify, payload);
    sim.players()
        .filter(|&j| j != claimant && sim.is_honest(j))
        .all(|j| {
            claimed[j.0] == handle.received_keys[j.0]
                && mac.verify(&handle.msg, &handle.tags[j.0], &claimed[j.0])
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheat::{CheatBook, CheatScript};
    use crate::simnet::SimConfig;
    use crate::transcript::Viewer;

    fn msg() -> BitString {
        BitString::from_word(0b1011_0010_1110_0001, 16)
    }

    #[test]
    fn evidence_threshold() {
        let p = BroadcastParams::default();
        assert_eq!(p.evidence_needed(), 7);
        assert!(evidence(7) > 0.99 && evidence(6) < 0.99);
    }

    #[test]
    fn anonymous_send_delivers() {
        let mut sim = Sim::new(SimConfig::new(3, 1)).unwrap();
        let p = BroadcastParams::default();
        for _ in 0..20 {
            assert_eq!(anonymous_send(&mut sim, PlayerId(0), PlayerId(2), &msg(), &p), Ok(msg()));
        }
    }

    #[test]
    fn repetition_one_is_raw_channel() {
        let p = BroadcastParams { r: 1, ..Default::default() };
        let mut sim = Sim::new(SimConfig::new(2, 2)).unwrap();
        let one = BitString::ones(1);
        let mut sends = 0;
        for _ in 0..2000 {
            anonymous_send(&mut sim, PlayerId(0), PlayerId(1), &one, &p).unwrap();
        }
        for e in sim.transcript().of_kind(EventKind::AnonSend) {
            if e.actor == crate::transcript::Actor::Anonymous {
                sends += 1;
            }
        }
        // expected 2 transmissions per delivered bit
        let ratio = sends as f64 / 2000.0;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn anonymous_send_coupling() {
        let view = |sender: usize| {
            let mut sim = Sim::new(SimConfig::new(3, 4)).unwrap();
            anonymous_send(&mut sim, PlayerId(sender), PlayerId(2), &msg(), &BroadcastParams::default()).unwrap();
            sim.transcript().view(Viewer::Player(PlayerId(2)))
        };
        assert_eq!(view(0), view(1));
    }

    #[test]
    fn honest_authenticated_broadcast() {
        let mut sim = Sim::new(SimConfig::new(4, 5)).unwrap();
        let p = BroadcastParams::default();
        assert_eq!(authenticated_broadcast(&mut sim, PlayerId(1), &msg(), &p), Ok(msg()));
        assert_eq!(sim.round(), 1);
    }

    #[test]
    fn equivocating_sender_expelled() {
        let book = CheatBook::new(vec![CheatScript::new(PlayerId(0), EventKind::AuthBcast, CheatAction::Equivocate)]);
        let mut sim = Sim::with_cheats(SimConfig::new(4, 6), book).unwrap();
        let p = BroadcastParams::default();
        assert_eq!(
            authenticated_broadcast(&mut sim, PlayerId(0), &msg(), &p),
            Err(Halt::Cheater(PlayerId(0)))
        );
        assert_eq!(sim.round(), 7);
    }

    #[test]
    fn persistent_complainer_expelled() {
        let book = CheatBook::new(vec![CheatScript::new(PlayerId(3), EventKind::AuthBcast, CheatAction::FalseComplain)]);
        let mut sim = Sim::with_cheats(SimConfig::new(4, 7), book).unwrap();
        let p = BroadcastParams::default();
        assert_eq!(
            authenticated_broadcast(&mut sim, PlayerId(0), &msg(), &p),
            Err(Halt::Cheater(PlayerId(3)))
        );
    }

    #[test]
    fn honest_relay_first_try() {
        let mut sim = Sim::new(SimConfig::new(4, 8)).unwrap();
        let r = anonymous_broadcast(&mut sim, PlayerId(0), &msg(), &BroadcastParams::default(), &RelayPolicy::Random).unwrap();
        assert!(r.failed_relays.is_empty());
    }

    #[test]
    fn two_bad_relays_then_success() {
        let book = CheatBook::new(vec![
            CheatScript::new(PlayerId(1), EventKind::AnonBcast, CheatAction::BadRelay),
            CheatScript::new(PlayerId(2), EventKind::AnonBcast, CheatAction::BadRelay),
        ]);
        let mut sim = Sim::with_cheats(SimConfig::new(4, 9), book).unwrap();
        let order = RelayPolicy::Fixed(vec![PlayerId(1), PlayerId(2), PlayerId(3)]);
        let r = anonymous_broadcast(&mut sim, PlayerId(0), &msg(), &BroadcastParams::default(), &order).unwrap();
        assert_eq!(r.relay, PlayerId(3));
        assert_eq!(r.failed_relays, vec![PlayerId(1), PlayerId(2)]);
        assert!(sim.conflicts().in_conflict(PlayerId(0), PlayerId(1)));
        assert!(sim.conflicts().in_conflict(PlayerId(0), PlayerId(2)));
    }

    #[test]
    fn all_relays_bad_sender_leaves() {
        let book = CheatBook::new(
            (1..4)
                .map(|i| CheatScript::new(PlayerId(i), EventKind::AnonBcast, CheatAction::BadRelay))
                .collect(),
        );
        let mut sim = Sim::with_cheats(SimConfig::new(4, 10), book).unwrap();
        let order = RelayPolicy::Fixed(vec![PlayerId(1), PlayerId(2), PlayerId(0), PlayerId(3)]);
        let r = anonymous_broadcast(&mut sim, PlayerId(0), &msg(), &BroadcastParams::default(), &order);
        assert_eq!(r, Err(Halt::Aborted("sender expelled".into())));
        assert_eq!(sim.transcript().of_kind(EventKind::AnonBcast).filter(|e| e.actor != crate::transcript::Actor::Anonymous).count(), 3);
    }

    #[test]
    fn identification_only_for_true_sender() {
        let p = BroadcastParams::default();
        let mut sim = Sim::new(SimConfig::new(4, 11)).unwrap();
        let h = anonymous_broadcast_identifiable(&mut sim, PlayerId(2), &msg(), &p, &RelayPolicy::Random).unwrap();
        assert!(identify_sender(&mut sim, &h, PlayerId(2), &p));
        for impostor in [0, 1, 3] {
            assert!(!identify_sender(&mut sim, &h, PlayerId(impostor), &p));
        }
    }

    #[test]
    fn impersonation_rate_small_field() {
        let p = BroadcastParams {
            field_degree: 8,
            r: 10,
            ..Default::default()
        };
        let mut accepted = 0;
        let runs = 300;
        for seed in 0..runs {
            let mut sim = Sim::new(SimConfig::new(3, seed)).unwrap();
            let h = anonymous_broadcast_identifiable(&mut sim, PlayerId(0), &msg(), &p, &RelayPolicy::Random).unwrap();
            if identify_sender(&mut sim, &h, PlayerId(1), &p) {
                accepted += 1;
            }
        }
        assert!(accepted as f64 / runs as f64 <= 2.0 / 256.0, "{accepted}");
    }
}
