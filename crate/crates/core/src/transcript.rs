//! Append-only event log shared by every protocol layer.
//!
//! Each event carries a visibility set, so any player's view (and the external
//! observer's) can be reconstructed after the fact. The text form is one record per line:
//!
//! ```text
//! round|actor|kind|hex-payload|visibility-csv
//! ```
//!
//! preceded by `# key=value` header lines. Visibility lists player indices, plus `obs`
//! when the observer sees the full record or `obs:len` when it sees only that the event
//! happened and how long its payload is.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bits::BitString;
use crate::model::{PlayerId, PlayerSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Actor {
    Player(PlayerId),
    Anonymous,
    Functionality,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Player(p) => write!(f, "{p}"),
            Actor::Anonymous => f.write_str("ANON"),
            Actor::Functionality => f.write_str("FUNC"),
        }
    }
}

impl FromStr for Actor {
    type Err = TranscriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ANON" => Ok(Actor::Anonymous),
            "FUNC" => Ok(Actor::Functionality),
            _ => s
                .strip_prefix('P')
                .and_then(|i| i.parse().ok())
                .map(|i| Actor::Player(PlayerId(i)))
                .ok_or_else(|| TranscriptError::Field(format!("bad actor {s:?}"))),
        }
    }
}

macro_rules! event_kinds {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Fixed vocabulary of transcript record kinds. Cheat hooks use the same names.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum EventKind {
            $($variant),*
        }

        impl EventKind {
            pub const ALL: &'static [EventKind] = &[$(EventKind::$variant),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(EventKind::$variant => $name),*
                }
            }
        }

        impl FromStr for EventKind {
            type Err = TranscriptError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(EventKind::$variant),)*
                    _ => Err(TranscriptError::Field(format!("unknown event kind {s:?}"))),
                }
            }
        }
    };
}

event_kinds! {
    Aot => "AOT",
    Ob => "OB",
    P2p => "P2P",
    Announce => "ANNOUNCE",
    AuthBcast => "AUTH_BCAST",
    AnonSend => "ANON_SEND",
    AnonBcast => "ANON_BCAST",
    Complaint => "COMPLAINT",
    Identify => "IDENTIFY",
    GbcCommit => "GBC_COMMIT",
    GbcOpen => "GBC_OPEN",
    Proof => "PROOF",
    Copy => "COPY",
    Coin => "COIN",
    Dbc => "DBC",
    Uot => "UOT",
    GcotStep1 => "GCOT_STEP1",
    GcotStep2 => "GCOT_STEP2",
    GcotStep3 => "GCOT_STEP3",
    GcotStep4 => "GCOT_STEP4",
    GcotStep5 => "GCOT_STEP5",
    GcotStep6 => "GCOT_STEP6",
    GcotStep7 => "GCOT_STEP7",
    GcotStep8 => "GCOT_STEP8",
    GcotStep9 => "GCOT_STEP9",
    Conflict => "CONFLICT",
    Verdict => "VERDICT",
    Gate => "GATE",
    Reveal => "REVEAL",
    Split => "SPLIT",
    Outcome => "OUTCOME",
}

impl EventKind {
    pub fn gcot_step(step: u8) -> EventKind {
        match step {
            1 => EventKind::GcotStep1,
            2 => EventKind::GcotStep2,
            3 => EventKind::GcotStep3,
            4 => EventKind::GcotStep4,
            5 => EventKind::GcotStep5,
            6 => EventKind::GcotStep6,
            7 => EventKind::GcotStep7,
            8 => EventKind::GcotStep8,
            9 => EventKind::GcotStep9,
            _ => panic!("GCOT has steps 1..=9, got {step}"),
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObserverAccess {
    None,
    /// Existence and payload length only.
    Length,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Visibility {
    pub players: PlayerSet,
    pub observer: ObserverAccess,
}

impl Visibility {
    pub fn public(n: usize) -> Self {
        Self {
            players: PlayerSet::all(n),
            observer: ObserverAccess::Full,
        }
    }

    pub fn private(players: PlayerSet) -> Self {
        Self {
            players,
            observer: ObserverAccess::None,
        }
    }

    pub fn with_observer(mut self, access: ObserverAccess) -> Self {
        self.observer = access;
        self
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.players.iter().map(|p| p.0.to_string()).collect();
        match self.observer {
            ObserverAccess::None => {}
            ObserverAccess::Length => parts.push("obs:len".into()),
            ObserverAccess::Full => parts.push("obs".into()),
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Visibility {
    type Err = TranscriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut vis = Visibility::private(PlayerSet::EMPTY);
        for part in s.split(',').filter(|p| !p.is_empty()) {
            match part {
                "obs" => vis.observer = ObserverAccess::Full,
                "obs:len" => vis.observer = ObserverAccess::Length,
                _ => {
                    let i: usize = part
                        .parse()
                        .map_err(|_| TranscriptError::Field(format!("bad visibility entry {part:?}")))?;
                    if i >= crate::model::MAX_PLAYERS {
                        return Err(TranscriptError::Field(format!("player index {i} too large")));
                    }
                    vis.players.insert(PlayerId(i));
                }
            }
        }
        Ok(vis)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub round: u64,
    pub actor: Actor,
    pub kind: EventKind,
    pub payload: Vec<u8>,
    pub visibility: Visibility,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}|", self.round, self.actor, self.kind)?;
        for b in &self.payload {
            write!(f, "{b:02x}")?;
        }
        write!(f, "|{}", self.visibility)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("{0}")]
    Field(String),
    #[error("payload truncated or malformed")]
    Payload,
}

fn decode_hex(s: &str) -> Result<Vec<u8>, TranscriptError> {
    if s.len() % 2 != 0 {
        return Err(TranscriptError::Field("odd-length hex payload".into()));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16)
                .map_err(|_| TranscriptError::Field(format!("bad hex {:?}", &s[i..i + 2])))
        })
        .collect()
}

impl FromStr for Event {
    type Err = TranscriptError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != 5 {
            return Err(TranscriptError::Field(format!(
                "expected 5 fields, found {}",
                fields.len()
            )));
        }
        Ok(Event {
            round: fields[0]
                .parse()
                .map_err(|_| TranscriptError::Field(format!("bad round {:?}", fields[0])))?,
            actor: fields[1].parse()?,
            kind: fields[2].parse()?,
            payload: decode_hex(fields[3])?,
            visibility: fields[4].parse()?,
        })
    }
}

/// Who is looking at the transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Viewer {
    Player(PlayerId),
    Observer,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    header: Vec<(String, String)>,
    events: Vec<Event>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_header(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.header.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.header.push((key.to_string(), value)),
        }
    }

    pub fn header(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn headers(&self) -> &[(String, String)] {
        &self.header
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Everything `viewer` can see, one line per event. Length-only observer access
    /// renders the payload as its byte count.
    pub fn view(&self, viewer: Viewer) -> Vec<String> {
        self.events
            .iter()
            .filter_map(|e| match viewer {
                Viewer::Player(p) => e.visibility.players.contains(p).then(|| e.to_string()),
                Viewer::Observer => match e.visibility.observer {
                    ObserverAccess::None => None,
                    ObserverAccess::Length => Some(format!(
                        "{}|{}|{}|len={}",
                        e.round,
                        e.actor,
                        e.kind,
                        e.payload.len()
                    )),
                    ObserverAccess::Full => Some(e.to_string()),
                },
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            out.push_str(&format!("# {k}={v}\n"));
        }
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TranscriptError> {
        let mut t = Transcript::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix("# ") {
                let (k, v) = h.split_once('=').ok_or(TranscriptError::Line {
                    line: line_no,
                    msg: "header without '='".into(),
                })?;
                t.header.push((k.to_string(), v.to_string()));
                continue;
            }
            let e: Event = line.parse().map_err(|e: TranscriptError| TranscriptError::Line {
                line: line_no,
                msg: e.to_string(),
            })?;
            t.events.push(e);
        }
        Ok(t)
    }
}

/// Little-endian payload encoder used by the protocol layers.
#[derive(Debug, Default)]
pub struct PayloadWriter(Vec<u8>);

impl PayloadWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(mut self, v: u8) -> Self {
        self.0.push(v);
        self
    }

    pub fn bool(self, v: bool) -> Self {
        self.u8(v as u8)
    }

    pub fn u16(mut self, v: u16) -> Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u32(mut self, v: u32) -> Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    /// Length-prefixed bit string.
    pub fn bits(self, b: &BitString) -> Self {
        let mut w = self.u32(b.len() as u32);
        w.0.extend_from_slice(&b.to_bytes());
        w
    }

    pub fn bools(self, b: &[bool]) -> Self {
        self.bits(&BitString::from_bools(b))
    }

    /// Length-prefixed list of small indices.
    pub fn indices(self, idx: &[usize]) -> Self {
        let mut w = self.u32(idx.len() as u32);
        for &i in idx {
            w = w.u32(i as u32);
        }
        w
    }

    pub fn bytes(mut self, b: &[u8]) -> Self {
        self.0.extend_from_slice(b);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.0
    }
}

/// Decoder matching [`PayloadWriter`].
#[derive(Debug)]
pub struct PayloadReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], TranscriptError> {
        let end = self.pos.checked_add(n).ok_or(TranscriptError::Payload)?;
        let s = self.buf.get(self.pos..end).ok_or(TranscriptError::Payload)?;
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, TranscriptError> {
        Ok(self.take(1)?[0])
    }

    pub fn bool(&mut self) -> Result<bool, TranscriptError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(TranscriptError::Payload),
        }
    }

    pub fn u16(&mut self) -> Result<u16, TranscriptError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, TranscriptError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, TranscriptError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bits(&mut self) -> Result<BitString, TranscriptError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len.div_ceil(8))?;
        BitString::from_bytes(bytes, len).ok_or(TranscriptError::Payload)
    }

    pub fn bools(&mut self) -> Result<Vec<bool>, TranscriptError> {
        Ok(self.bits()?.to_bools())
    }

    pub fn indices(&mut self) -> Result<Vec<usize>, TranscriptError> {
        let n = self.u32()? as usize;
        if n > self.buf.len() {
            return Err(TranscriptError::Payload);
        }
        (0..n).map(|_| Ok(self.u32()? as usize)).collect()
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Transcript {
        let mut t = Transcript::new();
        t.set_header("n", "3");
        t.push(Event {
            round: 1,
            actor: Actor::Anonymous,
            kind: EventKind::Aot,
            payload: vec![0xab, 0x01],
            visibility: Visibility::private(PlayerSet::singleton(PlayerId(2)))
                .with_observer(ObserverAccess::Length),
        });
        t.push(Event {
            round: 2,
            actor: Actor::Player(PlayerId(0)),
            kind: EventKind::GcotStep4,
            payload: vec![],
            visibility: Visibility::public(3),
        });
        t
    }

    #[test]
    fn line_format() {
        let t = sample();
        let text = t.to_text();
        assert_eq!(
            text,
            "# n=3\n1|ANON|AOT|ab01|2,obs:len\n2|P0|GCOT_STEP4||0,1,2,obs\n"
        );
        assert_eq!(Transcript::parse(&text).unwrap(), t);
    }

    #[test]
    fn views_respect_visibility() {
        let t = sample();
        assert_eq!(t.view(Viewer::Player(PlayerId(2))).len(), 2);
        assert_eq!(t.view(Viewer::Player(PlayerId(1))).len(), 1);
        assert_eq!(t.view(Viewer::Observer)[0], "1|ANON|AOT|len=2");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Transcript::parse("# a=b\n1|P0|NOPE||0\n").unwrap_err();
        assert!(matches!(err, TranscriptError::Line { line: 2, .. }));
    }

    #[test]
    fn kinds_round_trip() {
        for k in EventKind::ALL {
            assert_eq!(k.name().parse::<EventKind>().unwrap(), *k);
        }
    }

    #[test]
    fn payload_codec() {
        let b = BitString::from_bools(&[true, false, true]);
        let bytes = PayloadWriter::new()
            .u8(7)
            .u64(99)
            .bits(&b)
            .indices(&[1, 5])
            .finish();
        let mut r = PayloadReader::new(&bytes);
        assert_eq!(r.u8().unwrap(), 7);
        assert_eq!(r.u64().unwrap(), 99);
        assert_eq!(r.bits().unwrap(), b);
        assert_eq!(r.indices().unwrap(), vec![1, 5]);
        assert!(r.is_done());
        assert_eq!(r.u8(), Err(TranscriptError::Payload));
    }
}
