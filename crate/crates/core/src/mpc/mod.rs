//! Circuit evaluation on distributed commitments: every input becomes a distributed
//! commitment of its owner, gates are evaluated share-wise, and outputs are opened
//! share by share in player order.

pub mod circuit;
pub mod gates;

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::code::CodeError;
use crate::commit::dbc::{dbc_create_user, dbc_open, Dbc};
use crate::commit::gbcx::CommitParams;
use crate::model::{AdversaryStructure, ProtocolOutcome, Step};
use crate::ot::gcot::{gcot_setup, GcotParams, GcotSetup};
use crate::ot::uot::UotParams;
use crate::simnet::Sim;
use crate::transcript::{EventKind, PayloadWriter};

pub use circuit::{Circuit, CircuitError, Gate, Wire};
pub use gates::{and_commitments, and_dbc, copy_dbc, local_and, not_dbc, xor_dbc};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcParams {
    pub commit: CommitParams,
    pub gcot: GcotParams,
    pub uot: UotParams,
    /// Unopened triples per local product; a bad triple set survives with
    /// probability `1 / C(2s, s)`.
    pub local_checks: usize,
}

impl Default for MpcParams {
    fn default() -> Self {
        Self {
            commit: CommitParams::default(),
            gcot: GcotParams::default(),
            uot: UotParams::default(),
            local_checks: 4,
        }
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<(), String> {
        self.commit.validate()?;
        self.gcot.validate()?;
        self.uot.gbc.validate()?;
        if self.local_checks == 0 {
            return Err("local_checks must be at least 1".into());
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!(
            "gbc.k={} gbc.m={} m_x={} origin={:?} gcot.m={} sigma={} epsilon={} uot.k={} uot.m={} local_checks={}",
            self.commit.gbc.k,
            self.commit.gbc.m,
            self.commit.m_x,
            self.commit.origin,
            self.gcot.m,
            self.gcot.sigma,
            self.gcot.epsilon,
            self.uot.gbc.k,
            self.uot.gbc.m,
            self.local_checks
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    Compute,
    Reveal,
    Done,
}

#[derive(Debug)]
pub enum MpcError {
    Circuit(CircuitError),
    Code(CodeError),
}

impl std::fmt::Display for MpcError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MpcError::Circuit(e) => write!(f, "{e}"),
            MpcError::Code(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for MpcError {}

pub struct MpcSession {
    phase: Phase,
    circuit: Circuit,
    params: MpcParams,
    setup: GcotSetup,
    /// Unspent copies of each wire's commitment.
    wires: BTreeMap<Wire, Vec<Dbc>>,
    reads_left: BTreeMap<Wire, usize>,
}

impl MpcSession {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn setup(&self) -> &GcotSetup {
        &self.setup
    }

    /// Next copy of `w`, replicating on first read if it is read more than once.
    fn read(&mut self, sim: &mut Sim, w: Wire) -> Step<Dbc> {
        let left = self.reads_left.get(&w).copied().unwrap_or(0);
        let pool = self.wires.get_mut(&w).expect("wire written");
        if pool.len() == 1 && left > 1 {
            let dbc = pool.pop().expect("one copy");
            *pool = copy_dbc(sim, dbc, left, &self.params.commit)?;
        }
        self.reads_left.insert(w, left.saturating_sub(1));
        Ok(pool.pop().expect("copy per read"))
    }

    fn write(&mut self, w: Wire, dbc: Dbc) {
        self.wires.insert(w, vec![dbc]);
    }
}

/// Records the agreed parameters, draws the code, and commits every input.
/// `inputs` follow the order of the circuit's INPUT lines.
pub fn init_phase(
    sim: &mut Sim,
    circuit: &Circuit,
    inputs: &[bool],
    structure: Option<&AdversaryStructure>,
    params: &MpcParams,
) -> Result<Step<MpcSession>, MpcError> {
    circuit.check_players(sim.n()).map_err(MpcError::Circuit)?;
    if inputs.len() != circuit.inputs().len() {
        return Err(MpcError::Circuit(CircuitError::InputCount {
            expected: circuit.inputs().len(),
            got: inputs.len(),
        }));
    }
    {
        let t = sim.transcript_mut();
        t.set_header("params", params.describe());
        t.set_header("fairness", "simplified");
        if let Some(a) = structure {
            let sets: Vec<String> = a.maximal_sets().iter().map(|s| s.to_string()).collect();
            t.set_header("adversary", sets.join(";"));
        }
    }
    let setup = gcot_setup(sim, params.gcot, params.commit, params.uot).map_err(MpcError::Code)?;
    let mut session = MpcSession {
        phase: Phase::Init,
        circuit: circuit.clone(),
        params: *params,
        setup,
        wires: BTreeMap::new(),
        reads_left: circuit.reads(),
    };
    for (&(w, owner), &b) in circuit.inputs().iter().zip(inputs) {
        match dbc_create_user(sim, owner, b, &params.commit) {
            Ok(dbc) => session.write(w, dbc),
            Err(h) => return Ok(Err(h)),
        }
    }
    session.phase = Phase::Compute;
    Ok(Ok(session))
}

pub fn compute_phase(sim: &mut Sim, session: &mut MpcSession) -> Step<()> {
    assert_eq!(session.phase, Phase::Compute, "gates run after initialization");
    let gates = session.circuit.gates().to_vec();
    for (idx, gate) in gates.into_iter().enumerate() {
        sim.next_round();
        let payload = PayloadWriter::new().u32(idx as u32).u32(gate.output() as u32).finish();
        sim.announce_functionality(EventKind::Gate, payload);
        let out = match gate {
            Gate::And(a, b, _) => {
                let x = session.read(sim, a)?;
                let y = session.read(sim, b)?;
                and_dbc(sim, &session.setup, x, y, session.params.local_checks)?
            }
            Gate::Xor(a, b, _) => {
                let x = session.read(sim, a)?;
                let y = session.read(sim, b)?;
                xor_dbc(sim, x, y, &session.params.commit)?
            }
            Gate::Not(a, _) => {
                let x = session.read(sim, a)?;
                not_dbc(sim, x, &session.params.commit)?
            }
        };
        session.write(gate.output(), out);
    }
    session.phase = Phase::Reveal;
    Ok(())
}

/// Opens every output share by share. Fairness of the release is not attempted.
pub fn reveal_phase(sim: &mut Sim, session: &mut MpcSession) -> Step<Vec<bool>> {
    assert_eq!(session.phase, Phase::Reveal, "reveal follows computation");
    let outputs = session.circuit.outputs().to_vec();
    let mut values = Vec::with_capacity(outputs.len());
    for w in outputs {
        let dbc = session.read(sim, w)?;
        values.push(dbc_open(sim, dbc, EventKind::Reveal)?);
    }
    sim.announce_functionality(EventKind::Reveal, PayloadWriter::new().bools(&values).finish());
    session.phase = Phase::Done;
    Ok(values)
}

/// All three phases. Delivery details are left out of the transcript to keep it small.
pub fn run_protocol(
    sim: &mut Sim,
    circuit: &Circuit,
    inputs: &[bool],
    structure: Option<&AdversaryStructure>,
    params: &MpcParams,
) -> Result<ProtocolOutcome, MpcError> {
    sim.set_record_deliveries(false);
    let run = |sim: &mut Sim| -> Result<Step<Vec<bool>>, MpcError> {
        let mut session = match init_phase(sim, circuit, inputs, structure, params)? {
            Ok(s) => s,
            Err(h) => return Ok(Err(h)),
        };
        Ok(compute_phase(sim, &mut session).and_then(|_| reveal_phase(sim, &mut session)))
    };
    let outcome: ProtocolOutcome = match run(sim)? {
        Ok(values) => ProtocolOutcome::Success(values),
        Err(h) => h.into(),
    };
    sim.announce_functionality(EventKind::Outcome, outcome.to_string().into_bytes());
    Ok(outcome)
}
