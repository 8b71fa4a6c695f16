//! Boolean circuits over AND, XOR and NOT, in a line-oriented text format:
//!
//! ```text
//! INPUT w0 P0
//! INPUT w1 P1
//! AND w0 w1 -> w2
//! NOT w2 -> w3
//! OUTPUT w3
//! ```
//!
//! Gates are listed in evaluation order; `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::PlayerId;

pub type Wire = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    And(Wire, Wire, Wire),
    Xor(Wire, Wire, Wire),
    Not(Wire, Wire),
}

impl Gate {
    pub fn inputs(&self) -> Vec<Wire> {
        match *self {
            Gate::And(a, b, _) | Gate::Xor(a, b, _) => vec![a, b],
            Gate::Not(a, _) => vec![a],
        }
    }

    pub fn output(&self) -> Wire {
        match *self {
            Gate::And(_, _, c) | Gate::Xor(_, _, c) | Gate::Not(_, c) => c,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("wire w{0} written twice")]
    Rewritten(Wire),
    #[error("wire w{0} read before it is written")]
    Undefined(Wire),
    #[error("circuit has no outputs")]
    NoOutputs,
    #[error("input w{wire} owned by P{owner} but only {players} players")]
    Owner { wire: Wire, owner: usize, players: usize },
    #[error("expected {expected} input bits, got {got}")]
    InputCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    inputs: Vec<(Wire, PlayerId)>,
    gates: Vec<Gate>,
    outputs: Vec<Wire>,
}

impl Circuit {
    /// Checks that every wire is written once and before it is read.
    pub fn new(inputs: Vec<(Wire, PlayerId)>, gates: Vec<Gate>, outputs: Vec<Wire>) -> Result<Self, CircuitError> {
        let mut written = BTreeSet::new();
        for &(w, _) in &inputs {
            if !written.insert(w) {
                return Err(CircuitError::Rewritten(w));
            }
        }
        for g in &gates {
            if let Some(&w) = g.inputs().iter().find(|w| !written.contains(*w)) {
                return Err(CircuitError::Undefined(w));
            }
            if !written.insert(g.output()) {
                return Err(CircuitError::Rewritten(g.output()));
            }
        }
        if outputs.is_empty() {
            return Err(CircuitError::NoOutputs);
        }
        if let Some(&w) = outputs.iter().find(|w| !written.contains(*w)) {
            return Err(CircuitError::Undefined(w));
        }
        Ok(Self { inputs, gates, outputs })
    }

    pub fn inputs(&self) -> &[(Wire, PlayerId)] {
        &self.inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[Wire] {
        &self.outputs
    }

    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::And(..))).count()
    }

    pub fn check_players(&self, n: usize) -> Result<(), CircuitError> {
        match self.inputs.iter().find(|(_, p)| p.0 >= n) {
            Some(&(wire, owner)) => Err(CircuitError::Owner {
                wire,
                owner: owner.0,
                players: n,
            }),
            None => Ok(()),
        }
    }

    /// How many times each wire is read (outputs count once each).
    pub fn reads(&self) -> BTreeMap<Wire, usize> {
        let mut uses = BTreeMap::new();
        for w in self.gates.iter().flat_map(|g| g.inputs()).chain(self.outputs.iter().copied()) {
            *uses.entry(w).or_insert(0) += 1;
        }
        uses
    }

    /// Plaintext evaluation; `inputs` follow the order of the INPUT lines.
    pub fn evaluate(&self, inputs: &[bool]) -> Result<Vec<bool>, CircuitError> {
        if inputs.len() != self.inputs.len() {
            return Err(CircuitError::InputCount {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let mut val: BTreeMap<Wire, bool> = self.inputs.iter().map(|&(w, _)| w).zip(inputs.iter().copied()).collect();
        for g in &self.gates {
            let v = match *g {
                Gate::And(a, b, _) => val[&a] & val[&b],
                Gate::Xor(a, b, _) => val[&a] ^ val[&b],
                Gate::Not(a, _) => !val[&a],
            };
            val.insert(g.output(), v);
        }
        Ok(self.outputs.iter().map(|w| val[w]).collect())
    }
}

fn wire(tok: &str, line: usize) -> Result<Wire, CircuitError> {
    tok.strip_prefix('w')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CircuitError::Syntax {
            line,
            msg: format!("bad wire {tok:?}"),
        })
}

impl FromStr for Circuit {
    type Err = CircuitError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let (mut inputs, mut gates, mut outputs) = (Vec::new(), Vec::new(), Vec::new());
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            let bad = |msg: &str| CircuitError::Syntax { line, msg: msg.into() };
            match toks.as_slice() {
                ["INPUT", w, p] => {
                    let owner = p
                        .strip_prefix('P')
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad owner"))?;
                    inputs.push((wire(w, line)?, PlayerId(owner)));
                }
                ["AND", a, b, "->", c] => gates.push(Gate::And(wire(a, line)?, wire(b, line)?, wire(c, line)?)),
                ["XOR", a, b, "->", c] => gates.push(Gate::Xor(wire(a, line)?, wire(b, line)?, wire(c, line)?)),
                ["NOT", a, "->", b] => gates.push(Gate::Not(wire(a, line)?, wire(b, line)?)),
                ["OUTPUT", w] => outputs.push(wire(w, line)?),
                _ => return Err(bad("unrecognized line")),
            }
        }
        Circuit::new(inputs, gates, outputs)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (w, p) in &self.inputs {
            writeln!(f, "INPUT w{w} P{}", p.0)?;
        }
        for g in &self.gates {
            match g {
                Gate::And(a, b, c) => writeln!(f, "AND w{a} w{b} -> w{c}")?,
                Gate::Xor(a, b, c) => writeln!(f, "XOR w{a} w{b} -> w{c}")?,
                Gate::Not(a, b) => writeln!(f, "NOT w{a} -> w{b}")?,
            }
        }
        for w in &self.outputs {
            writeln!(f, "OUTPUT w{w}")?;
        }
        Ok(())
    }
}

/// Majority of three bits, one per player.
pub fn majority3() -> Circuit {
    "INPUT w0 P0
INPUT w1 P1
INPUT w2 P2
AND w0 w1 -> w3
AND w0 w2 -> w4
AND w1 w2 -> w5
XOR w3 w4 -> w6
XOR w6 w5 -> w7
OUTPUT w7"
        .parse()
        .expect("valid circuit")
}

/// Two-bit adder: players 0,1 hold `x1 x0`, players 2,3 hold `y1 y0`; outputs the
/// three sum bits, least significant first.
pub fn adder2() -> Circuit {
    "INPUT w0 P0  # x0
INPUT w1 P1  # x1
INPUT w2 P2  # y0
INPUT w3 P3  # y1
XOR w0 w2 -> w4  # s0
AND w0 w2 -> w5  # carry into bit 1
XOR w1 w3 -> w6
XOR w6 w5 -> w7  # s1
AND w1 w3 -> w8
AND w6 w5 -> w9
XOR w8 w9 -> w10  # s2
OUTPUT w4
OUTPUT w7
OUTPUT w10"
        .parse()
        .expect("valid circuit")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_truth_table() {
        let c = majority3();
        for x in 0..8u8 {
            let bits = [x & 1 == 1, x & 2 == 2, x & 4 == 4];
            let ones = bits.iter().filter(|&&b| b).count();
            assert_eq!(c.evaluate(&bits).unwrap(), vec![ones >= 2]);
        }
    }

    #[test]
    fn adder_truth_table() {
        let c = adder2();
        for x in 0..4u8 {
            for y in 0..4u8 {
                let out = c
                    .evaluate(&[x & 1 == 1, x & 2 == 2, y & 1 == 1, y & 2 == 2])
                    .unwrap();
                let sum = out.iter().enumerate().fold(0, |acc, (i, &b)| acc | (b as u8) << i);
                assert_eq!(sum, x + y);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let c = adder2();
        assert_eq!(c.to_string().parse::<Circuit>().unwrap(), c);
    }

    #[test]
    fn rejects_bad_circuits() {
        assert_eq!("AND w0 w1 -> w2\nOUTPUT w2".parse::<Circuit>(), Err(CircuitError::Undefined(0)));
        assert_eq!(
            "INPUT w0 P0\nNOT w0 -> w0\nOUTPUT w0".parse::<Circuit>(),
            Err(CircuitError::Rewritten(0))
        );
        assert_eq!("INPUT w0 P0".parse::<Circuit>(), Err(CircuitError::NoOutputs));
        assert!(matches!(
            "INPUT w0 X0".parse::<Circuit>(),
            Err(CircuitError::Syntax { line: 1, .. })
        ));
        assert!(majority3().check_players(2).is_err());
    }
}
