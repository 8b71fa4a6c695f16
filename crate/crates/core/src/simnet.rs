//! Deterministic round scheduler and the ideal channel functionalities.
//!
//! Everything random in a run is drawn from streams derived from one root seed, so a run
//! is a pure function of its [`SimConfig`] and cheat scripts. Functionality coins are keyed
//! by receiver rather than by sender: an anonymous transfer draws the same erasure pattern
//! whoever sends it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bits::BitString;
use crate::cheat::{CheatAction, CheatBook};
use crate::model::{partition_by_conflicts, ConflictGraph, Halt, PlayerId, PlayerSet, MAX_PLAYERS};
use crate::transcript::{
    Actor, Event, EventKind, ObserverAccess, PayloadWriter, Transcript, Visibility,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, seed }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("player count {0} outside supported range 2..={MAX_PLAYERS}")]
    PlayerCount(usize),
    #[error("stream label {0:?} collides with a reserved namespace")]
    ReservedLabel(String),
}

/// Labels under these prefixes belong to the functionalities and players.
const RESERVED_NAMESPACES: &[&str] = &["aot/", "ob/", "player/", "session/"];

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Deterministic stream for `(seed, label)`.
pub fn derive_stream(seed: u64, label: &str) -> ChaCha8Rng {
    derive_keyed(seed, fnv1a(label.as_bytes()), 0, 0)
}

fn derive_keyed(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut state = seed ^ domain.rotate_left(17);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        let extra = match i {
            1 => a,
            2 => b,
            _ => 0,
        };
        state ^= extra;
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// What a receiver of an anonymous or oblivious transfer holds: each position is known
/// (the bit in `bits`) or erased (`known` is 0 there and `bits` is 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub bits: BitString,
    pub known: BitString,
}

impl Delivery {
    pub fn get(&self, i: usize) -> Option<bool> {
        self.known.get(i).then(|| self.bits.get(i))
    }

    pub fn known_count(&self) -> usize {
        self.known.count_ones()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    fn payload(&self) -> Vec<u8> {
        PayloadWriter::new().bits(&self.known).bits(&self.bits).finish()
    }
}

pub type AotDelivery = Delivery;
pub type ObDelivery = Delivery;

/// One simulation run: scheduler, functionalities, transcript and conflict state.
#[derive(Debug)]
pub struct Sim {
    n: usize,
    seed: u64,
    round: u64,
    next_id: u64,
    transcript: Transcript,
    conflicts: ConflictGraph,
    cheats: CheatBook,
    players: Vec<ChaCha8Rng>,
    aot: Vec<ChaCha8Rng>,
    ob: Vec<ChaCha8Rng>,
    user_labels: Vec<String>,
    record_deliveries: bool,
}

impl Sim {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        Self::with_cheats(config, CheatBook::default())
    }

    pub fn with_cheats(config: SimConfig, cheats: CheatBook) -> Result<Self, SimError> {
        let n = config.n;
        if !(2..=MAX_PLAYERS).contains(&n) {
            return Err(SimError::PlayerCount(n));
        }
        let per_player = |ns: &str| -> Vec<ChaCha8Rng> {
            (0..n)
                .map(|i| derive_stream(config.seed, &format!("{ns}/{i}")))
                .collect()
        };
        let mut transcript = Transcript::new();
        transcript.set_header("n", n.to_string());
        transcript.set_header("seed", config.seed.to_string());
        Ok(Self {
            n,
            seed: config.seed,
            round: 0,
            next_id: 0,
            transcript,
            conflicts: ConflictGraph::new(n),
            cheats,
            players: per_player("player"),
            aot: per_player("aot"),
            ob: per_player("ob"),
            user_labels: Vec::new(),
            record_deliveries: true,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn all(&self) -> PlayerSet {
        PlayerSet::all(self.n)
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> {
        (0..self.n).map(PlayerId)
    }

    /// Players not yet expelled.
    pub fn active(&self) -> PlayerSet {
        self.conflicts.active()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn next_round(&mut self) -> u64 {
        self.round += 1;
        self.round
    }

    pub fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn transcript_mut(&mut self) -> &mut Transcript {
        &mut self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn conflicts(&self) -> &ConflictGraph {
        &self.conflicts
    }

    pub fn cheats(&self) -> &CheatBook {
        &self.cheats
    }

    /// Whether `actor` runs `action` at `hook`.
    pub fn cheat(&self, actor: PlayerId, hook: EventKind) -> Option<CheatAction> {
        self.cheats.action(actor, hook)
    }

    pub fn cheat_count(&self, actor: PlayerId, hook: EventKind) -> Option<usize> {
        self.cheats.lookup(actor, hook).and_then(|s| s.count)
    }

    pub fn is_honest(&self, p: PlayerId) -> bool {
        self.cheats.is_honest(p)
    }

    /// Players without scripts.
    pub fn honest(&self) -> PlayerSet {
        self.all().difference(self.cheats.collusion())
    }

    /// Turns off per-delivery transcript records for bulk commitment traffic.
    pub fn set_record_deliveries(&mut self, on: bool) {
        self.record_deliveries = on;
        self.transcript
            .set_header("deliveries", if on { "full" } else { "omitted" });
    }

    pub fn records_deliveries(&self) -> bool {
        self.record_deliveries
    }

    /// Private coins of player `p`.
    pub fn coins(&mut self, p: PlayerId) -> &mut ChaCha8Rng {
        &mut self.players[p.0]
    }

    /// Coins for one protocol instance, independent of who runs it.
    pub fn session_coins(&self, domain: &str, a: u64, b: u64) -> ChaCha8Rng {
        derive_keyed(self.seed, fnv1a(domain.as_bytes()), a, b)
    }

    /// A caller-named deterministic stream. Labels in the functionality and player
    /// namespaces are rejected, as is reopening a label in the same run.
    pub fn rng_stream(&mut self, label: &str) -> Result<ChaCha8Rng, SimError> {
        if RESERVED_NAMESPACES.iter().any(|ns| label.starts_with(ns))
            || self.user_labels.iter().any(|l| l == label)
        {
            return Err(SimError::ReservedLabel(label.to_string()));
        }
        self.user_labels.push(label.to_string());
        Ok(derive_stream(self.seed, label))
    }

    pub fn record(&mut self, actor: Actor, kind: EventKind, payload: Vec<u8>, visibility: Visibility) {
        let event = Event {
            round: self.round,
            actor,
            kind,
            payload,
            visibility,
        };
        self.transcript.push(event);
    }

    /// Public, authenticated announcement.
    pub fn announce(&mut self, actor: PlayerId, kind: EventKind, payload: Vec<u8>) {
        let vis = Visibility::public(self.n);
        self.record(Actor::Player(actor), kind, payload, vis);
    }

    /// Public record attributed to the simulator itself.
    pub fn announce_functionality(&mut self, kind: EventKind, payload: Vec<u8>) {
        let vis = Visibility::public(self.n);
        self.record(Actor::Functionality, kind, payload, vis);
    }

    /// Authenticated private message.
    pub fn p2p(&mut self, from: PlayerId, to: PlayerId, kind: EventKind, payload: Vec<u8>) {
        let vis = Visibility::private(PlayerSet::singleton(from).with(to));
        self.record(Actor::Player(from), kind, payload, vis);
    }

    /// Erasure pattern of the anonymous channel into `receiver`, without recording.
    pub fn aot_erasures(&mut self, receiver: PlayerId, len: usize) -> BitString {
        BitString::random(&mut self.aot[receiver.0], len)
    }

    /// Erasure word (low `len` bits) of the anonymous channel into `receiver`.
    pub fn aot_erasure_word(&mut self, receiver: PlayerId, len: usize) -> u64 {
        self.aot[receiver.0].gen::<u64>() & crate::bits::low_mask(len)
    }

    /// Erasure word of the oblivious broadcast channel into `receiver`.
    pub fn ob_erasure_word(&mut self, receiver: PlayerId, len: usize) -> u64 {
        self.ob[receiver.0].gen::<u64>() & crate::bits::low_mask(len)
    }

    /// Anonymous oblivious transfer of `bits` to `receiver`, recorded under `kind`.
    ///
    /// The receiver's record names no sender; the sender learns nothing about erasures.
    pub fn aot_send_as(
        &mut self,
        sender: PlayerId,
        receiver: PlayerId,
        bits: &BitString,
        kind: EventKind,
    ) -> AotDelivery {
        assert_ne!(sender, receiver, "AOT needs distinct sender and receiver");
        self.aot_loopback(receiver, bits, kind)
    }

    /// A player feeding its own anonymous channel: same erasures and same record as a
    /// transfer from anyone else, so third parties cannot tell the two apart.
    pub fn aot_loopback(&mut self, receiver: PlayerId, bits: &BitString, kind: EventKind) -> AotDelivery {
        let known = self.aot_erasures(receiver, bits.len());
        let delivery = Delivery {
            bits: bits.and(&known),
            known,
        };
        let vis = Visibility::private(PlayerSet::singleton(receiver))
            .with_observer(ObserverAccess::Length);
        self.record(Actor::Anonymous, kind, delivery.payload(), vis);
        delivery
    }

    pub fn aot_send(&mut self, sender: PlayerId, receiver: PlayerId, bits: &BitString) -> AotDelivery {
        self.aot_send_as(sender, receiver, bits, EventKind::Aot)
    }

    /// Oblivious broadcast: every other player gets an independent erasure pattern.
    /// The sender is visible to each receiver.
    pub fn ob_send_as(
        &mut self,
        sender: PlayerId,
        bits: &BitString,
        kind: EventKind,
    ) -> Vec<(PlayerId, ObDelivery)> {
        let receivers: Vec<PlayerId> = self.players().filter(|&p| p != sender).collect();
        receivers
            .into_iter()
            .map(|r| {
                let known = BitString::random(&mut self.ob[r.0], bits.len());
                let delivery = Delivery {
                    bits: bits.and(&known),
                    known,
                };
                let vis = Visibility::private(PlayerSet::singleton(r))
                    .with_observer(ObserverAccess::Length);
                self.record(Actor::Player(sender), kind, delivery.payload(), vis);
                (r, delivery)
            })
            .collect()
    }

    pub fn ob_send(&mut self, sender: PlayerId, bits: &BitString) -> Vec<(PlayerId, ObDelivery)> {
        self.ob_send_as(sender, bits, EventKind::Ob)
    }

    /// Public complaint by `from` against `against`; adds a conflict edge.
    pub fn complain(&mut self, from: PlayerId, against: PlayerId, context: EventKind) {
        let payload = PayloadWriter::new()
            .u8(against.0 as u8)
            .bytes(context.name().as_bytes())
            .finish();
        self.announce(from, EventKind::Complaint, payload);
        if self.conflicts.add(from, against) {
            let payload = PayloadWriter::new()
                .u8(from.0 as u8)
                .u8(against.0 as u8)
                .finish();
            self.announce_functionality(EventKind::Conflict, payload);
        }
    }

    /// Records a conflict edge without a complaint message (e.g. one inferred after an
    /// anonymous party identified itself).
    pub fn add_conflict(&mut self, a: PlayerId, b: PlayerId) {
        if self.conflicts.add(a, b) {
            let payload = PayloadWriter::new().u8(a.0 as u8).u8(b.0 as u8).finish();
            self.announce_functionality(EventKind::Conflict, payload);
        }
    }

    /// Names `culprit` publicly and returns the halt that ends the run.
    pub fn blame(&mut self, culprit: PlayerId, context: EventKind) -> Halt {
        let payload = PayloadWriter::new()
            .u8(culprit.0 as u8)
            .bytes(context.name().as_bytes())
            .finish();
        self.announce_functionality(EventKind::Verdict, payload);
        self.conflicts.expel(culprit);
        Halt::Cheater(culprit)
    }

    /// Splits the players by their conflict sets.
    pub fn split(&mut self) -> Halt {
        let blocks = partition_by_conflicts(&self.conflicts, self.all());
        let mut w = PayloadWriter::new().u8(blocks.len() as u8);
        for b in &blocks {
            w = w.u64(b.0);
        }
        self.announce_functionality(EventKind::Split, w.finish());
        Halt::Split(blocks)
    }

    /// Ends a dispute that cannot be settled from public data: the sole player in
    /// conflict with everyone is expelled, otherwise the players split into groups.
    pub fn settle_disputes(&mut self, context: EventKind) -> Halt {
        match self.conflicts.sole_outcast() {
            Some(p) => self.blame(p, context),
            None => self.split(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_transfer() {
        let mut sim = Sim::new(SimConfig::new(2, 1)).unwrap();
        let d = sim.aot_send(PlayerId(0), PlayerId(1), &BitString::zeros(0));
        assert!(d.is_empty());
        let obs = sim.ob_send(PlayerId(0), &BitString::zeros(0));
        assert!(obs.iter().all(|(_, d)| d.is_empty()));
    }

    #[test]
    fn eight_bits_about_half_known() {
        let mut total = 0;
        let mut sim = Sim::new(SimConfig::new(3, 5)).unwrap();
        for _ in 0..1000 {
            total += sim
                .aot_send(PlayerId(0), PlayerId(1), &BitString::ones(8))
                .known_count();
        }
        let mean = total as f64 / 1000.0;
        assert!((mean - 4.0).abs() < 0.2, "mean known {mean}");
    }

    #[test]
    fn same_label_same_stream() {
        let draw = || {
            let mut sim = Sim::new(SimConfig::new(2, 1)).unwrap();
            let mut r = sim.rng_stream("user/a").unwrap();
            (0..4).map(|_| r.gen::<u64>()).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn reserved_and_repeated_labels_rejected() {
        let mut sim = Sim::new(SimConfig::new(2, 1)).unwrap();
        assert!(matches!(sim.rng_stream("aot/0→1"), Err(SimError::ReservedLabel(_))));
        sim.rng_stream("mine").unwrap();
        assert!(sim.rng_stream("mine").is_err());
    }

    #[test]
    fn round_counter_counts() {
        let mut sim = Sim::new(SimConfig::new(2, 1)).unwrap();
        for _ in 0..7 {
            sim.next_round();
        }
        assert_eq!(sim.round(), 7);
    }

    #[test]
    fn anonymous_record_hides_sender() {
        let run = |sender: usize| {
            let mut sim = Sim::new(SimConfig::new(3, 9)).unwrap();
            sim.aot_send(PlayerId(sender), PlayerId(2), &BitString::from_word(0b1011_0110, 8));
            sim.transcript().view(crate::transcript::Viewer::Player(PlayerId(2)))
        };
        assert_eq!(run(0), run(1));
    }

    #[test]
    fn rejects_single_player() {
        assert_eq!(Sim::new(SimConfig::new(1, 0)).unwrap_err(), SimError::PlayerCount(1));
    }
}
