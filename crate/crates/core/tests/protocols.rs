use std::path::PathBuf;

use proptest::prelude::*;

use aotmpc::cheat::{CheatBook, CheatScript, SUPPORTED};
use aotmpc::commit::dbc::{dbc_create_user, dbc_open};
use aotmpc::commit::gbc::{gbc_commit, gbc_open, GbcParams, Origin};
use aotmpc::commit::gbcx::CommitParams;
use aotmpc::mpc::xor_dbc;
use aotmpc::scenario::{run_scenario, trichotomy, ScenarioConfig};
use aotmpc::transcript::{EventKind, Transcript};
use aotmpc::{PlayerId, ProtocolOutcome, Sim, SimConfig};

fn quick() -> CommitParams {
    CommitParams {
        gbc: GbcParams::new(3, 8),
        m_x: 4,
        origin: Origin::Aot,
    }
}

fn scenario(file: &str) -> ScenarioConfig {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    ScenarioConfig::load(&dir.join(file)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn honest_gbc_opens_to_its_bit(b: bool, k in 1usize..6, m in 2usize..12, ob: bool, seed: u64) {
        let mut sim = Sim::new(SimConfig::new(3, seed)).unwrap();
        let origin = if ob { Origin::Ob } else { Origin::Aot };
        let g = gbc_commit(&mut sim, PlayerId(1), b, GbcParams::new(k, m), origin);
        prop_assert_eq!(gbc_open(&mut sim, g), Ok(b));
    }

    #[test]
    fn dbc_shares_xor_to_the_committed_bit(a: bool, b: bool, n in 2usize..5, seed: u64) {
        let mut sim = Sim::new(SimConfig::new(n, seed)).unwrap();
        let cp = quick();
        let x = dbc_create_user(&mut sim, PlayerId(0), a, &cp).unwrap();
        let y = dbc_create_user(&mut sim, PlayerId(n - 1), b, &cp).unwrap();
        prop_assert_eq!(x.value(), a);
        prop_assert_eq!(y.value(), b);
        let z = xor_dbc(&mut sim, x, y, &cp).unwrap();
        prop_assert_eq!(z.value(), a ^ b);
        prop_assert_eq!(dbc_open(&mut sim, z, EventKind::Reveal), Ok(a ^ b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Any scripted collusion on a small circuit: the honest players are never accused,
    // a split keeps them together, and a success matches the plaintext.
    #[test]
    fn outcomes_respect_the_trichotomy(
        picks in proptest::collection::vec((0usize..SUPPORTED.len(), 0usize..3), 1..3),
        seed in 0u64..1000,
    ) {
        let mut cfg = scenario("cheat-reveal-withhold.toml");
        let scripts = picks
            .iter()
            .map(|&(i, p)| CheatScript::new(PlayerId(p), SUPPORTED[i].0, SUPPORTED[i].1))
            .collect();
        cfg.cheats = CheatBook::new(scripts);
        let circuit = cfg.circuit.clone().unwrap();
        let inputs: Vec<bool> = (0..circuit.inputs().len()).map(|i| seed >> i & 1 == 1).collect();
        cfg.inputs = Some(inputs.clone());
        let reference = circuit.evaluate(&inputs).unwrap();
        let rep = run_scenario(&cfg, seed).unwrap();
        let findings = trichotomy(&rep.outcome, cfg.n, cfg.collusion(), Some(&reference));
        prop_assert!(findings.is_empty(), "{}: {:?}", rep.outcome, findings);
    }
}

#[test]
fn same_seed_same_transcript() {
    let cfg = scenario("majority3.toml");
    let a = run_scenario(&cfg, 7).unwrap().transcript.to_text();
    let b = run_scenario(&cfg, 7).unwrap().transcript.to_text();
    assert_eq!(a, b);
    let c = run_scenario(&cfg, 8).unwrap().transcript.to_text();
    assert_ne!(a, c);
}

#[test]
fn transcript_text_round_trips() {
    let cfg = scenario("cheat-gbc-open-flip.toml");
    let rep = run_scenario(&cfg, 1).unwrap();
    let text = rep.transcript.to_text();
    let parsed = Transcript::parse(&text).unwrap();
    assert_eq!(parsed.len(), rep.transcript.len());
    assert_eq!(parsed.to_text(), text);
}

#[test]
fn honest_runs_succeed() {
    let cfg = scenario("adder2.toml");
    let rep = run_scenario(&cfg, 3).unwrap();
    assert_eq!(rep.outcome, ProtocolOutcome::Success(vec![false, false, true]));
    assert!(rep.ok());
}
