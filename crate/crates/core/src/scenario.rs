//! Scenario files: a TOML description of one simulated run (players, seeds, the
//! protocol to exercise, scripted cheats, the expected outcome), the runner, a
//! transcript checker and a batch summary.
//!
//! ```toml
//! name = "majority"
//! n = 3
//! seeds = [1, 2, 3]
//! mode = "mpc"
//! circuit = "builtin:majority3"
//! inputs = "101"
//! expect = "success:1"
//!
//! [params]
//! local_checks = 2
//!
//! [[cheat]]
//! actor = 2
//! hook = "REVEAL"
//! action = "withhold"
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::bits::BitString;
use crate::broadcast::{anonymous_broadcast, authenticated_broadcast_outcome, BroadcastParams, RelayPolicy};
use crate::cheat::{CheatBook, CheatScript, CheatSpec};
use crate::code::{gcot_dimension, LinearCode};
use crate::commit::gbcx::{recheck, CommitParams};
use crate::commit::setup::{anonymous_setup, SetupParams};
use crate::model::{monotone_close, AdversaryStructure, PlayerId, PlayerSet, ProtocolOutcome};
use crate::mpc::{circuit, run_protocol, Circuit, MpcParams};
use crate::ot::gcot::{gcot_outcome, gcot_setup, GcotParams};
use crate::ot::uot::{uot, UotParams};
use crate::simnet::{Sim, SimConfig};
use crate::transcript::{Actor, EventKind, PayloadReader, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Mpc,
    Gcot,
    Uot,
    Channel,
    Broadcast,
    AnonymousBroadcast,
    AnonymousSetup,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mpc => "mpc",
            Mode::Gcot => "gcot",
            Mode::Uot => "uot",
            Mode::Channel => "channel",
            Mode::Broadcast => "broadcast",
            Mode::AnonymousBroadcast => "anonymous-broadcast",
            Mode::AnonymousSetup => "anonymous-setup",
        }
    }

    fn default_trials(self) -> usize {
        match self {
            Mode::Uot => 1000,
            Mode::Channel => 10_000,
            Mode::AnonymousBroadcast => 16,
            _ => 1,
        }
    }
}

/// What a run should end in. Bits and culprit are optional refinements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    Success(Option<Vec<bool>>),
    Cheater(Option<PlayerId>),
    Split,
    Aborted,
}

impl Expectation {
    pub fn matches(&self, outcome: &ProtocolOutcome) -> bool {
        match (self, outcome) {
            (Expectation::Success(None), ProtocolOutcome::Success(_)) => true,
            (Expectation::Success(Some(want)), ProtocolOutcome::Success(got)) => want == got,
            (Expectation::Cheater(None), ProtocolOutcome::CheaterIdentified(_)) => true,
            (Expectation::Cheater(Some(want)), ProtocolOutcome::CheaterIdentified(got)) => want == got,
            (Expectation::Split, ProtocolOutcome::GroupSplit(_)) => true,
            (Expectation::Aborted, ProtocolOutcome::Aborted(_)) => true,
            _ => false,
        }
    }
}

impl FromStr for Expectation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (tag, rest) = match s.split_once(':') {
            Some((t, r)) => (t, Some(r)),
            None => (s, None),
        };
        match (tag, rest) {
            ("success", None) => Ok(Expectation::Success(None)),
            ("success", Some(bits)) => parse_bits(bits).map(|b| Expectation::Success(Some(b))),
            ("cheater", None) => Ok(Expectation::Cheater(None)),
            ("cheater", Some(p)) => p
                .parse()
                .map(|p| Expectation::Cheater(Some(PlayerId(p))))
                .map_err(|_| format!("bad culprit {p:?}")),
            ("split", None) => Ok(Expectation::Split),
            ("aborted", None) => Ok(Expectation::Aborted),
            _ => Err(format!("bad expectation {s:?}")),
        }
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Success(None) => f.write_str("success"),
            Expectation::Success(Some(bits)) => write!(f, "success:{}", bit_text(bits)),
            Expectation::Cheater(None) => f.write_str("cheater"),
            Expectation::Cheater(Some(p)) => write!(f, "cheater:{}", p.0),
            Expectation::Split => f.write_str("split"),
            Expectation::Aborted => f.write_str("aborted"),
        }
    }
}

fn parse_bits(s: &str) -> Result<Vec<bool>, String> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(format!("bad bit {c:?} in {s:?}")),
        })
        .collect()
}

fn bit_text(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub commit: CommitParams,
    pub gcot: GcotParams,
    pub uot: UotParams,
    pub broadcast: BroadcastParams,
    pub setup: SetupParams,
    pub local_checks: usize,
    /// Repetitions within one run; zero picks the mode's default.
    pub trials: usize,
    /// Message length for the channel and broadcast modes.
    pub length: usize,
    /// Sending player (Alice in the transfer modes).
    pub sender: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            commit: CommitParams::default(),
            gcot: GcotParams::default(),
            uot: UotParams::default(),
            broadcast: BroadcastParams::default(),
            setup: SetupParams::default(),
            local_checks: 4,
            trials: 0,
            length: 8,
            sender: 0,
        }
    }
}

impl ScenarioParams {
    pub fn mpc(&self) -> MpcParams {
        MpcParams {
            commit: self.commit,
            gcot: self.gcot,
            uot: self.uot,
            local_checks: self.local_checks,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    n: usize,
    seeds: Option<Vec<u64>>,
    mode: Mode,
    circuit: Option<String>,
    inputs: Option<String>,
    #[serde(default)]
    adversary: Vec<Vec<usize>>,
    expect: Option<String>,
    #[serde(default)]
    params: ScenarioParams,
    #[serde(default)]
    cheat: Vec<CheatSpec>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    pub circuit: Option<Circuit>,
    pub inputs: Option<Vec<bool>>,
    pub adversary: Option<AdversaryStructure>,
    pub expect: Option<Expectation>,
    pub params: ScenarioParams,
    pub cheats: CheatBook,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent())
    }

    /// Parses and validates `text`; circuit paths are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ScenarioError> {
        let raw: RawConfig = toml::from_str(text)?;
        let n = raw.n;
        if !(2..=crate::model::MAX_PLAYERS).contains(&n) {
            return Err(invalid(format!("n = {n} outside 2..={}", crate::model::MAX_PLAYERS)));
        }
        let p = &raw.params;
        p.mpc().validate().map_err(invalid)?;
        p.broadcast.validate().map_err(invalid)?;
        p.setup.gbc.validate().map_err(invalid)?;
        p.setup.broadcast.validate().map_err(invalid)?;
        if p.sender >= n {
            return Err(invalid(format!("sender P{} but only {n} players", p.sender)));
        }
        if p.length > 64 {
            return Err(invalid("length must be at most 64"));
        }

        let scripts = raw
            .cheat
            .iter()
            .map(CheatScript::try_from)
            .collect::<Result<Vec<_>, _>>()
            .map_err(invalid)?;
        let cheats = CheatBook::new(scripts);
        cheats.validate(n).map_err(invalid)?;

        let adversary = if raw.adversary.is_empty() {
            None
        } else {
            let mut sets = Vec::with_capacity(raw.adversary.len());
            for s in &raw.adversary {
                if let Some(&bad) = s.iter().find(|&&i| i >= n) {
                    return Err(invalid(format!("adversary set names P{bad} but only {n} players")));
                }
                sets.push(s.iter().map(|&i| PlayerId(i)).collect::<PlayerSet>());
            }
            let a = monotone_close(n, &sets).map_err(|e| invalid(e.to_string()))?;
            if !a.contains(cheats.collusion()) {
                return Err(invalid(format!(
                    "scripted collusion {} is not in the adversary structure",
                    cheats.collusion()
                )));
            }
            Some(a)
        };

        let circuit = match (&raw.circuit, raw.mode) {
            (Some(spec), Mode::Mpc) => Some(load_circuit(spec, base)?),
            (None, Mode::Mpc) => return Err(invalid("mode mpc needs a circuit")),
            (Some(_), _) => return Err(invalid("circuit given for a mode that does not use one")),
            (None, _) => None,
        };
        if let Some(c) = &circuit {
            c.check_players(n).map_err(|e| invalid(e.to_string()))?;
        }

        let inputs = raw.inputs.as_deref().map(parse_bits).transpose().map_err(invalid)?;
        if let Some(bits) = &inputs {
            let want = match raw.mode {
                Mode::Mpc => circuit.as_ref().map(|c| c.inputs().len()),
                Mode::Gcot => Some(3),
                _ => return Err(invalid(format!("inputs are not used in mode {}", raw.mode.name()))),
            };
            if let Some(want) = want {
                if bits.len() != want {
                    return Err(invalid(format!("expected {want} input bits, got {}", bits.len())));
                }
            }
        }

        let expect = raw.expect.as_deref().map(str::parse).transpose().map_err(invalid)?;
        let seeds = raw.seeds.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(invalid("seeds may not be empty"));
        }
        Ok(Self {
            name: raw.name,
            n,
            seeds,
            mode: raw.mode,
            circuit,
            inputs,
            adversary,
            expect,
            params: raw.params,
            cheats,
        })
    }

    pub fn collusion(&self) -> PlayerSet {
        self.cheats.collusion()
    }

    fn trials(&self) -> usize {
        if self.params.trials == 0 {
            self.mode.default_trials()
        } else {
            self.params.trials
        }
    }
}

fn load_circuit(spec: &str, base: Option<&Path>) -> Result<Circuit, ScenarioError> {
    match spec {
        "builtin:majority3" => return Ok(circuit::majority3()),
        "builtin:adder2" => return Ok(circuit::adder2()),
        _ => {}
    }
    if let Some(name) = spec.strip_prefix("builtin:") {
        return Err(invalid(format!("unknown builtin circuit {name:?}")));
    }
    let path = base.map_or_else(|| PathBuf::from(spec), |b| b.join(spec));
    let text = fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
    text.parse()
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Measured rates; `None` where the mode does not measure them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    /// Fraction of undeniable transfers in which the receiver learned the bit.
    pub learn_rate: Option<f64>,
    /// Fraction of anonymous-channel positions erased.
    pub erasure_rate: Option<f64>,
    /// Fraction of oblivious broadcasts in which every position reached some receiver.
    pub cover_rate: Option<f64>,
    /// Most relays that failed a single anonymous broadcast.
    pub max_relay_failures: Option<usize>,
}

#[derive(Debug)]
pub struct RunReport {
    pub seed: u64,
    pub outcome: ProtocolOutcome,
    pub transcript: Transcript,
    pub metrics: Metrics,
    pub expected_met: bool,
    /// Violations of the success / named-culprit / split trichotomy.
    pub findings: Vec<String>,
}

impl RunReport {
    pub fn ok(&self) -> bool {
        self.expected_met && self.findings.is_empty()
    }
}

struct ModeResult {
    outcome: ProtocolOutcome,
    /// Output an honest run must produce.
    reference: Option<Vec<bool>>,
    metrics: Metrics,
    findings: Vec<String>,
}

impl ModeResult {
    fn new(outcome: ProtocolOutcome) -> Self {
        Self {
            outcome,
            reference: None,
            metrics: Metrics::default(),
            findings: Vec::new(),
        }
    }
}

/// Runs the scenario once with `seed`.
pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<RunReport, ScenarioError> {
    let mut sim = Sim::with_cheats(SimConfig::new(config.n, seed), config.cheats.clone())
        .map_err(|e| invalid(e.to_string()))?;
    {
        let t = sim.transcript_mut();
        t.set_header("scenario", config.name.clone());
        t.set_header("mode", config.mode.name());
        t.set_header("n", config.n.to_string());
        t.set_header("seed", seed.to_string());
    }
    let mut coins = sim.rng_stream("scenario/inputs").map_err(|e| invalid(e.to_string()))?;
    let sender = PlayerId(config.params.sender);
    let receiver = PlayerId((config.params.sender + 1) % config.n);
    let trials = config.trials();
    let p = &config.params;

    let result = match config.mode {
        Mode::Mpc => {
            let circuit = config.circuit.as_ref().expect("validated");
            let inputs = config
                .inputs
                .clone()
                .unwrap_or_else(|| (0..circuit.inputs().len()).map(|_| coins.gen()).collect());
            let outcome = run_protocol(&mut sim, circuit, &inputs, config.adversary.as_ref(), &p.mpc())
                .map_err(|e| invalid(e.to_string()))?;
            let mut r = ModeResult::new(outcome);
            r.reference = Some(circuit.evaluate(&inputs).expect("input count checked"));
            r
        }
        Mode::Gcot => {
            let bits = config
                .inputs
                .clone()
                .unwrap_or_else(|| (0..3).map(|_| coins.gen()).collect());
            let (a, b) = ([bits[0], bits[1]], bits[2]);
            sim.set_record_deliveries(false);
            let setup = gcot_setup(&mut sim, p.gcot, p.commit, p.uot).map_err(|e| invalid(e.to_string()))?;
            let mut r = ModeResult::new(gcot_outcome(&mut sim, &setup, sender, receiver, a, b));
            r.reference = Some(vec![a[b as usize]]);
            r
        }
        Mode::Uot => run_uot(&mut sim, &mut coins, sender, receiver, trials, &p.uot),
        Mode::Channel => run_channel(&mut sim, &mut coins, sender, receiver, trials, p.length),
        Mode::Broadcast => {
            let msg = BitString::random(&mut coins, p.length);
            let mut r = ModeResult::new(authenticated_broadcast_outcome(&mut sim, sender, &msg, &p.broadcast));
            r.reference = Some(msg.to_bools());
            r
        }
        Mode::AnonymousBroadcast => run_anonymous_broadcast(&mut sim, &mut coins, trials, p.length, &p.broadcast),
        Mode::AnonymousSetup => ModeResult::new(match anonymous_setup(&mut sim, &p.setup) {
            Ok(_) => ProtocolOutcome::Success(Vec::new()),
            Err(h) => h.into(),
        }),
    };

    let already = sim
        .transcript()
        .events()
        .last()
        .is_some_and(|e| e.kind == EventKind::Outcome);
    if !already {
        sim.announce_functionality(EventKind::Outcome, result.outcome.to_string().into_bytes());
    }

    let mut findings = result.findings;
    findings.extend(trichotomy(&result.outcome, config.n, config.collusion(), result.reference.as_deref()));
    let expected_met = match &config.expect {
        Some(e) => e.matches(&result.outcome),
        None => result.outcome.is_robust_for(config.n, config.collusion()),
    };
    Ok(RunReport {
        seed,
        outcome: result.outcome,
        transcript: sim.into_transcript(),
        metrics: result.metrics,
        expected_met,
        findings,
    })
}

/// Runs every seed of the scenario.
pub fn run_all(config: &ScenarioConfig) -> Result<Vec<RunReport>, ScenarioError> {
    config.seeds.iter().map(|&s| run_scenario(config, s)).collect()
}

fn run_uot<R: Rng>(
    sim: &mut Sim,
    coins: &mut R,
    alice: PlayerId,
    bob: PlayerId,
    trials: usize,
    params: &UotParams,
) -> ModeResult {
    sim.set_record_deliveries(false);
    let mut learned = 0;
    let mut findings = Vec::new();
    for t in 0..trials {
        let b: bool = coins.gen();
        match uot(sim, alice, bob, b, params) {
            Ok(out) => match out.learned {
                Some(v) if v == b => learned += 1,
                Some(_) => findings.push(format!("transfer {t}: receiver learned the wrong bit")),
                None => {}
            },
            Err(h) => return ModeResult::new(h.into()),
        }
    }
    let mut r = ModeResult::new(ProtocolOutcome::Success(Vec::new()));
    r.metrics.learn_rate = Some(learned as f64 / trials.max(1) as f64);
    r.findings = findings;
    r
}

fn run_channel<R: Rng>(
    sim: &mut Sim,
    coins: &mut R,
    sender: PlayerId,
    receiver: PlayerId,
    trials: usize,
    length: usize,
) -> ModeResult {
    let (mut erased, mut covered) = (0usize, 0usize);
    for _ in 0..trials {
        let bits = BitString::random(coins, length);
        erased += length - sim.aot_send(sender, receiver, &bits).known_count();
        let got = sim.ob_send(sender, &bits);
        if (0..length).all(|i| got.iter().any(|(_, d)| d.get(i).is_some())) {
            covered += 1;
        }
    }
    let mut r = ModeResult::new(ProtocolOutcome::Success(Vec::new()));
    let sent = (trials * length).max(1);
    r.metrics.erasure_rate = Some(erased as f64 / sent as f64);
    r.metrics.cover_rate = Some(covered as f64 / trials.max(1) as f64);
    r
}

/// Every active player broadcasts a random message through random relays, `rounds`
/// times. Accumulated relay complaints are settled at the end.
fn run_anonymous_broadcast<R: Rng>(
    sim: &mut Sim,
    coins: &mut R,
    rounds: usize,
    length: usize,
    params: &BroadcastParams,
) -> ModeResult {
    let mut worst = 0;
    let mut halted = None;
    'rounds: for _ in 0..rounds {
        sim.next_round();
        for p in sim.active().iter().collect::<Vec<_>>() {
            let msg = BitString::random(coins, length);
            match anonymous_broadcast(sim, p, &msg, params, &RelayPolicy::Random) {
                Ok(receipt) => worst = worst.max(receipt.failed_relays.len()),
                Err(h) => {
                    halted = Some(h);
                    break 'rounds;
                }
            }
        }
    }
    let outcome = match halted {
        Some(h) => h.into(),
        None if sim.conflicts().is_empty() => ProtocolOutcome::Success(Vec::new()),
        None => sim.settle_disputes(EventKind::AnonBcast).into(),
    };
    let mut r = ModeResult::new(outcome);
    r.metrics.max_relay_failures = Some(worst);
    if worst > sim.n() {
        r.findings.push(format!("{worst} relays failed one broadcast, more than n = {}", sim.n()));
    }
    r
}

/// Checks one outcome against the robustness trichotomy.
pub fn trichotomy(
    outcome: &ProtocolOutcome,
    n: usize,
    collusion: PlayerSet,
    reference: Option<&[bool]>,
) -> Vec<String> {
    let honest = PlayerSet::all(n).difference(collusion);
    let mut findings = Vec::new();
    match outcome {
        ProtocolOutcome::Success(bits) => {
            if let Some(want) = reference {
                if bits.as_slice() != want {
                    findings.push(format!("output {} differs from plaintext {}", bit_text(bits), bit_text(want)));
                }
            }
        }
        ProtocolOutcome::CheaterIdentified(p) => {
            if !collusion.contains(*p) {
                findings.push(format!("honest player {p} accused"));
            }
        }
        ProtocolOutcome::GroupSplit(blocks) => {
            if !outcome.is_robust_for(n, collusion) {
                findings.push(format!("split {blocks:?} does not keep the honest players {honest} together"));
            }
        }
        ProtocolOutcome::Aborted(_) => {}
    }
    findings
}

fn reader_err(e: impl fmt::Display) -> String {
    e.to_string()
}

/// Re-derives what can be checked from public data in a transcript: every proof
/// verdict, the sizes and disjointness of the committed-OT check sets, the recorded
/// code, the parity of recorded openings, and the final outcome.
pub fn verify_transcript(t: &Transcript, config: &ScenarioConfig) -> Vec<String> {
    let mut findings = Vec::new();
    let gp = config.params.gcot;
    let s = gp.set_size();

    if let Some(text) = t.header("code") {
        match text.parse::<LinearCode>() {
            Ok(code) => {
                if code.len() != gp.m {
                    findings.push(format!("code length {} but m = {}", code.len(), gp.m));
                }
                if code.dimension() != gcot_dimension(gp.m, gp.sigma) {
                    findings.push(format!("code dimension {} is not {}", code.dimension(), gcot_dimension(gp.m, gp.sigma)));
                }
                if code.min_distance() as f64 <= gp.epsilon * gp.m as f64 {
                    findings.push(format!("code distance {} does not exceed epsilon * m", code.min_distance()));
                }
            }
            Err(e) => findings.push(format!("code header unreadable: {e}")),
        }
    }

    let events = t.events();
    let mut pending: Vec<(bool, BitString)> = Vec::new();
    let mut last_union: Option<Vec<usize>> = None;
    let mut outcome_seen = false;
    for (idx, ev) in events.iter().enumerate() {
        let mut r = PayloadReader::new(&ev.payload);
        match (ev.kind, ev.actor) {
            (EventKind::Proof, Actor::Player(_)) => {
                let parsed = (|| -> Result<(bool, BitString), String> {
                    r.u8().map_err(reader_err)?;
                    let c = r.bool().map_err(reader_err)?;
                    Ok((c, r.bits().map_err(reader_err)?))
                })();
                match parsed {
                    Ok(x) => pending.push(x),
                    Err(e) => findings.push(format!("event {idx}: proof announcement unreadable: {e}")),
                }
            }
            (EventKind::Proof, Actor::Functionality) => {
                let parsed = (|| -> Result<(BitString, Vec<(BitString, BitString)>, bool), String> {
                    let e = r.bits().map_err(reader_err)?;
                    let count = r.u8().map_err(reader_err)? as usize;
                    let mut cols = Vec::with_capacity(count);
                    for _ in 0..count {
                        let d = r.bits().map_err(reader_err)?;
                        cols.push((d, r.bits().map_err(reader_err)?));
                    }
                    Ok((e, cols, r.bool().map_err(reader_err)?))
                })();
                match parsed {
                    Ok((e, cols, verdict)) => {
                        if pending.len() < cols.len() {
                            findings.push(format!("event {idx}: proof verdict without announcements"));
                        } else {
                            let announced = pending.split_off(pending.len() - cols.len());
                            if announced.iter().zip(&cols).any(|((_, d), (col, _))| d != col) {
                                findings.push(format!("event {idx}: proof columns differ from announcements"));
                            }
                            let constants: Vec<bool> = announced.iter().map(|(c, _)| *c).collect();
                            if recheck(&e, &cols, &constants) != verdict {
                                findings.push(format!("event {idx}: proof verdict does not recheck"));
                            }
                        }
                        pending.clear();
                    }
                    Err(e) => findings.push(format!("event {idx}: proof record unreadable: {e}")),
                }
            }
            (EventKind::GcotStep4, Actor::Player(_)) => match r.indices() {
                Ok(union) => {
                    if union.len() != 2 * s {
                        findings.push(format!("event {idx}: announced {} transfer checks, expected {}", union.len(), 2 * s));
                    }
                    last_union = Some(union);
                }
                Err(e) => findings.push(format!("event {idx}: {e}")),
            },
            (EventKind::GcotStep6, Actor::Functionality) => match r.indices() {
                Ok(i2) => {
                    if i2.len() != s {
                        findings.push(format!("event {idx}: {} public checks, expected {s}", i2.len()));
                    }
                    match &last_union {
                        Some(u) if i2.iter().any(|i| u.contains(i)) => {
                            findings.push(format!("event {idx}: public checks overlap the transfer checks"))
                        }
                        None => findings.push(format!("event {idx}: public checks before transfer checks")),
                        _ => {}
                    }
                }
                Err(e) => findings.push(format!("event {idx}: {e}")),
            },
            (EventKind::GbcOpen, Actor::Player(c)) => {
                if let Some(msg) = check_opening(&ev.payload, c, &events[idx + 1..]) {
                    findings.push(format!("event {idx}: {msg}"));
                }
            }
            (EventKind::Outcome, Actor::Functionality) => {
                outcome_seen = true;
                match String::from_utf8_lossy(&ev.payload).parse::<ProtocolOutcome>() {
                    Ok(o) => findings.extend(trichotomy(&o, config.n, config.collusion(), None)),
                    Err(e) => findings.push(format!("event {idx}: {e}")),
                }
            }
            _ => {}
        }
    }
    if !outcome_seen {
        findings.push("no outcome recorded".into());
    }
    findings
}

/// An opening whose recorded strings disagree with the announced value must be
/// followed by a verdict against the committer.
fn check_opening(payload: &[u8], committer: PlayerId, rest: &[crate::transcript::Event]) -> Option<String> {
    let mut r = PayloadReader::new(payload);
    r.u64().ok()?;
    let value = r.bool().ok()?;
    if r.is_done() {
        return None;
    }
    let k = r.u8().ok()? as usize;
    let m = r.u8().ok()? as usize;
    let mut consistent = true;
    let mut strings = 0;
    while !r.is_done() {
        let Ok(word) = r.u64() else {
            return Some("opening strings unreadable".into());
        };
        strings += 1;
        consistent &= crate::bits::word_parity(word & crate::bits::low_mask(m)) == value;
    }
    if k == 0 || strings % k != 0 {
        return Some(format!("opening carries {strings} strings, not a multiple of {k}"));
    }
    if consistent {
        return None;
    }
    let blamed = rest.iter().any(|e| {
        e.kind == EventKind::Verdict
            && e.actor == Actor::Functionality
            && e.payload.first() == Some(&(committer.0 as u8))
    });
    (!blamed).then(|| format!("opening by {committer} has mixed parities but no verdict followed"))
}

/// Batch summary, one TSV row per scenario.
pub fn stats_table(runs: &[(ScenarioConfig, Vec<RunReport>)]) -> String {
    let mut out = String::from(
        "scenario\tmode\truns\tsuccess\tcheater\tsplit\taborted\texpected_met\tculprit_in_collusion\tlearn_rate\terasure_rate\tcover_rate\n",
    );
    for (config, reports) in runs {
        let count = |f: &dyn Fn(&RunReport) -> bool| reports.iter().filter(|r| f(r)).count();
        let honest = PlayerSet::all(config.n).difference(config.collusion());
        let accusing = count(&|r| !r.outcome.accused(honest).is_empty());
        let inside = count(&|r| {
            let a = r.outcome.accused(honest);
            !a.is_empty() && a.is_subset(config.collusion())
        });
        let mean = |f: &dyn Fn(&Metrics) -> Option<f64>| {
            let xs: Vec<f64> = reports.iter().filter_map(|r| f(&r.metrics)).collect();
            if xs.is_empty() {
                "-".to_string()
            } else {
                format!("{:.4}", xs.iter().sum::<f64>() / xs.len() as f64)
            }
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            config.name,
            config.mode.name(),
            reports.len(),
            count(&|r| matches!(r.outcome, ProtocolOutcome::Success(_))),
            count(&|r| matches!(r.outcome, ProtocolOutcome::CheaterIdentified(_))),
            count(&|r| matches!(r.outcome, ProtocolOutcome::GroupSplit(_))),
            count(&|r| matches!(r.outcome, ProtocolOutcome::Aborted(_))),
            count(&|r| r.ok()),
            if accusing == 0 { "-".to_string() } else { format!("{inside}/{accusing}") },
            mean(&|m| m.learn_rate),
            mean(&|m| m.erasure_rate),
            mean(&|m| m.cover_rate),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        ScenarioConfig::parse(text, None)
    }

    #[test]
    fn expectation_forms() {
        assert_eq!("success".parse(), Ok(Expectation::Success(None)));
        assert_eq!("success:10".parse(), Ok(Expectation::Success(Some(vec![true, false]))));
        assert_eq!("cheater:2".parse(), Ok(Expectation::Cheater(Some(PlayerId(2)))));
        assert_eq!("split".parse(), Ok(Expectation::Split));
        assert!("split:1".parse::<Expectation>().is_err());
        assert!(Expectation::Cheater(None).matches(&ProtocolOutcome::CheaterIdentified(PlayerId(0))));
        assert!(!Expectation::Aborted.matches(&ProtocolOutcome::Success(vec![])));
    }

    #[test]
    fn toml_errors_carry_lines() {
        let err = parse("name = \"x\"\nn = 3\nmode = \"mpc\"\ncircuit = [\n").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        let err = parse("name = \"x\"\nn = 3\nmode = \"teleport\"\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn validation() {
        let base = "name = \"x\"\nn = 3\nmode = \"mpc\"\ncircuit = \"builtin:majority3\"\n";
        assert!(parse(base).is_ok());
        assert!(parse(&format!("{base}inputs = \"10\"\n")).is_err());
        let cheat = "[[cheat]]\nactor = 1\nhook = \"REVEAL\"\naction = \"withhold\"\n";
        assert!(parse(&format!("{base}{cheat}")).is_ok());
        assert!(parse(&format!("{base}adversary = [[2]]\n{cheat}")).is_err());
        assert!(parse(&format!("{base}adversary = [[1]]\n{cheat}")).is_ok());
        let unsupported = "[[cheat]]\nactor = 1\nhook = \"REVEAL\"\naction = \"bad-relay\"\n";
        assert!(parse(&format!("{base}{unsupported}")).is_err());
        let outsider = "[[cheat]]\nactor = 3\nhook = \"REVEAL\"\naction = \"withhold\"\n";
        assert!(parse(&format!("{base}{outsider}")).is_err());
        assert!(parse("name = \"x\"\nn = 2\nmode = \"mpc\"\ncircuit = \"builtin:majority3\"\n").is_err());
        assert!(parse("name = \"x\"\nn = 3\nmode = \"uot\"\ncircuit = \"builtin:adder2\"\n").is_err());
    }

    #[test]
    fn channel_metrics() {
        let c = parse("name = \"c\"\nn = 4\nmode = \"channel\"\n[params]\ntrials = 2000\n").unwrap();
        let r = run_scenario(&c, 3).unwrap();
        assert!(r.ok());
        let erasure = r.metrics.erasure_rate.unwrap();
        assert!((erasure - 0.5).abs() < 0.02, "{erasure}");
        let cover = r.metrics.cover_rate.unwrap();
        assert!((cover - (7.0f64 / 8.0).powi(8)).abs() < 0.04, "{cover}");
        assert!(verify_transcript(&r.transcript, &c).is_empty());
    }

    #[test]
    fn broadcast_and_stats() {
        let c = parse("name = \"b\"\nn = 3\nseeds = [1, 2]\nmode = \"broadcast\"\nexpect = \"success\"\n").unwrap();
        let reports = run_all(&c).unwrap();
        assert!(reports.iter().all(|r| r.ok()));
        let table = stats_table(&[(c, reports)]);
        let row: Vec<&str> = table.lines().nth(1).unwrap().split('\t').collect();
        assert_eq!(row, ["b", "broadcast", "2", "2", "0", "0", "0", "2", "-", "-", "-", "-"]);
    }

    #[test]
    fn tampered_transcript_detected() {
        let c = parse("name = \"g\"\nn = 2\nmode = \"gcot\"\ninputs = \"101\"\nexpect = \"success:0\"\n").unwrap();
        let r = run_scenario(&c, 5).unwrap();
        assert!(r.ok(), "{:?}", r.outcome);
        assert!(verify_transcript(&r.transcript, &c).is_empty());
        let mut t = Transcript::new();
        for (k, v) in r.transcript.headers() {
            t.set_header(k, v.clone());
        }
        for ev in r.transcript.events() {
            let mut ev = ev.clone();
            if ev.kind == EventKind::Outcome {
                ev.payload = b"cheater:1".to_vec();
            }
            t.push(ev);
        }
        assert!(!verify_transcript(&t, &c).is_empty());
    }
}
