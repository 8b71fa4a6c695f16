//! Players, adversary structures, conflict bookkeeping and protocol outcomes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Largest supported number of players. Player sets are 64-bit masks.
pub const MAX_PLAYERS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlayerId(pub usize);

impl PlayerId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// A subset of the players, stored as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PlayerSet(pub u64);

impl PlayerSet {
    pub const EMPTY: PlayerSet = PlayerSet(0);

    /// `{P0, ..., P(n-1)}`.
    pub fn all(n: usize) -> Self {
        assert!(n <= MAX_PLAYERS);
        if n == 64 {
            PlayerSet(u64::MAX)
        } else {
            PlayerSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(p: PlayerId) -> Self {
        PlayerSet(1 << p.0)
    }

    pub fn from_players<I: IntoIterator<Item = PlayerId>>(it: I) -> Self {
        it.into_iter().fold(Self::EMPTY, |s, p| s.with(p))
    }

    pub fn contains(self, p: PlayerId) -> bool {
        p.0 < MAX_PLAYERS && (self.0 >> p.0) & 1 == 1
    }

    pub fn with(self, p: PlayerId) -> Self {
        PlayerSet(self.0 | (1 << p.0))
    }

    pub fn without(self, p: PlayerId) -> Self {
        PlayerSet(self.0 & !(1 << p.0))
    }

    pub fn insert(&mut self, p: PlayerId) {
        *self = self.with(p);
    }

    pub fn remove(&mut self, p: PlayerId) {
        *self = self.without(p);
    }

    pub fn union(self, other: Self) -> Self {
        PlayerSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        PlayerSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        PlayerSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = PlayerId> {
        (0..MAX_PLAYERS)
            .filter(move |i| (self.0 >> i) & 1 == 1)
            .map(PlayerId)
    }

    /// Lowest-index member.
    pub fn first(self) -> Option<PlayerId> {
        (self.0 != 0).then(|| PlayerId(self.0.trailing_zeros() as usize))
    }

    /// Every subset of this set, including the empty set and the set itself.
    pub fn subsets(self) -> impl Iterator<Item = PlayerSet> {
        // Standard submask enumeration, descending, terminated after the empty set.
        let full = self.0;
        let mut next = Some(full);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == 0 { None } else { Some((cur - 1) & full) };
            Some(PlayerSet(cur))
        })
    }
}

impl fmt::Debug for PlayerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PlayerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<PlayerId> for PlayerSet {
    fn from_iter<I: IntoIterator<Item = PlayerId>>(iter: I) -> Self {
        Self::from_players(iter)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("player count {0} outside supported range 2..={MAX_PLAYERS}")]
    PlayerCount(usize),
    #[error("set {set} is not a subset of the {n} players")]
    OutsidePlayers { set: PlayerSet, n: usize },
    #[error("adversary structure may not contain the full player set")]
    ContainsAllPlayers,
}

/// A monotone family of player subsets: the collusions a protocol must tolerate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryStructure {
    n: usize,
    sets: BTreeSet<PlayerSet>,
}

/// Smallest monotone family over `n` players containing every set in `sets`.
///
/// The result always contains the empty set.
pub fn monotone_close(n: usize, sets: &[PlayerSet]) -> Result<AdversaryStructure, ModelError> {
    if !(2..=MAX_PLAYERS).contains(&n) {
        return Err(ModelError::PlayerCount(n));
    }
    let all = PlayerSet::all(n);
    let mut closed = BTreeSet::new();
    closed.insert(PlayerSet::EMPTY);
    for &s in sets {
        if !s.is_subset(all) {
            return Err(ModelError::OutsidePlayers { set: s, n });
        }
        if s == all {
            return Err(ModelError::ContainsAllPlayers);
        }
        if closed.contains(&s) {
            continue;
        }
        closed.extend(s.subsets());
    }
    Ok(AdversaryStructure { n, sets: closed })
}

impl AdversaryStructure {
    pub fn players(&self) -> usize {
        self.n
    }

    pub fn contains(&self, s: PlayerSet) -> bool {
        self.sets.contains(&s)
    }

    pub fn sets(&self) -> impl Iterator<Item = PlayerSet> + '_ {
        self.sets.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Members not strictly contained in another member.
    pub fn maximal_sets(&self) -> Vec<PlayerSet> {
        self.sets
            .iter()
            .copied()
            .filter(|s| {
                !self
                    .sets
                    .iter()
                    .any(|t| t != s && s.is_subset(*t))
            })
            .collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.sets
            .iter()
            .all(|s| s.subsets().all(|t| self.sets.contains(&t)))
    }
}

/// Whether robust computation over pairwise OT channels and a broadcast channel is possible:
/// true iff `n == 2` or no two members of the structure together cover all players but one.
pub fn two_cover_check(structure: &AdversaryStructure) -> bool {
    let n = structure.players();
    if n == 2 {
        return true;
    }
    let all = PlayerSet::all(n);
    let maximal = structure.maximal_sets();
    for i in 0..n {
        let rest = all.without(PlayerId(i));
        for (a_idx, a) in maximal.iter().enumerate() {
            for b in &maximal[a_idx..] {
                if rest.is_subset(a.union(*b)) {
                    return false;
                }
            }
        }
    }
    true
}

/// Symmetric, irreflexive accusation relation plus the set of expelled players.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    n: usize,
    adj: Vec<PlayerSet>,
    expelled: PlayerSet,
}

impl ConflictGraph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![PlayerSet::EMPTY; n],
            expelled: PlayerSet::EMPTY,
        }
    }

    pub fn players(&self) -> usize {
        self.n
    }

    /// Records a conflict. Returns `true` if the edge is new. Self-conflicts are ignored.
    pub fn add(&mut self, a: PlayerId, b: PlayerId) -> bool {
        if a == b {
            return false;
        }
        let fresh = !self.adj[a.0].contains(b);
        self.adj[a.0].insert(b);
        self.adj[b.0].insert(a);
        fresh
    }

    pub fn in_conflict(&self, a: PlayerId, b: PlayerId) -> bool {
        self.adj[a.0].contains(b)
    }

    pub fn conflicts_of(&self, p: PlayerId) -> PlayerSet {
        self.adj[p.0]
    }

    pub fn is_empty(&self) -> bool {
        self.adj.iter().all(|s| s.is_empty())
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    pub fn expel(&mut self, p: PlayerId) {
        self.expelled.insert(p);
    }

    pub fn expelled(&self) -> PlayerSet {
        self.expelled
    }

    pub fn active(&self) -> PlayerSet {
        PlayerSet::all(self.n).difference(self.expelled)
    }

    /// In conflict with every other active player.
    pub fn in_conflict_with_all(&self, p: PlayerId) -> bool {
        let others = self.active().without(p);
        !others.is_empty() && others.is_subset(self.adj[p.0])
    }

    /// The unique active player in conflict with all other active players, if exactly one exists.
    pub fn sole_outcast(&self) -> Option<PlayerId> {
        let mut outcasts = self.active().iter().filter(|&p| self.in_conflict_with_all(p));
        let first = outcasts.next()?;
        outcasts.next().is_none().then_some(first)
    }
}

/// Groups players with identical conflict sets. Blocks are disjoint, cover `players`,
/// and are ordered by their lowest member.
pub fn partition_by_conflicts(graph: &ConflictGraph, players: PlayerSet) -> Vec<PlayerSet> {
    let mut groups: BTreeMap<PlayerSet, PlayerSet> = BTreeMap::new();
    for p in players.iter() {
        let key = graph.conflicts_of(p).intersection(players);
        groups.entry(key).or_default().insert(p);
    }
    let mut blocks: Vec<PlayerSet> = groups.into_values().collect();
    blocks.sort_by_key(|b| b.first());
    blocks
}

/// How a protocol run terminated, as seen by the honest players.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolOutcome {
    Success(Vec<bool>),
    CheaterIdentified(PlayerId),
    GroupSplit(Vec<PlayerSet>),
    Aborted(String),
}

impl ProtocolOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, ProtocolOutcome::Success(_))
    }

    /// Players the outcome blames. For a split this is everyone outside the block
    /// holding all of `honest`.
    pub fn accused(&self, honest: PlayerSet) -> PlayerSet {
        match self {
            ProtocolOutcome::CheaterIdentified(p) => PlayerSet::singleton(*p),
            ProtocolOutcome::GroupSplit(blocks) => {
                let all = blocks.iter().fold(PlayerSet::EMPTY, |a, b| a.union(*b));
                match blocks.iter().find(|b| honest.is_subset(**b)) {
                    Some(block) => all.difference(*block),
                    None => all,
                }
            }
            _ => PlayerSet::EMPTY,
        }
    }

    /// Robustness trichotomy check: success, a culprit inside `collusion`, or a split
    /// whose honest players share one block.
    pub fn is_robust_for(&self, n: usize, collusion: PlayerSet) -> bool {
        let honest = PlayerSet::all(n).difference(collusion);
        match self {
            ProtocolOutcome::Success(_) => true,
            ProtocolOutcome::CheaterIdentified(p) => collusion.contains(*p),
            ProtocolOutcome::GroupSplit(blocks) => {
                let covered = blocks.iter().fold(PlayerSet::EMPTY, |a, b| a.union(*b));
                let disjoint = blocks.iter().map(|b| b.len()).sum::<usize>() == covered.len();
                disjoint
                    && covered == PlayerSet::all(n)
                    && blocks.iter().any(|b| honest.is_subset(*b))
            }
            ProtocolOutcome::Aborted(_) => false,
        }
    }
}

impl fmt::Display for ProtocolOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolOutcome::Success(bits) => {
                f.write_str("success:")?;
                for b in bits {
                    f.write_str(if *b { "1" } else { "0" })?;
                }
                Ok(())
            }
            ProtocolOutcome::CheaterIdentified(p) => write!(f, "cheater:{}", p.0),
            ProtocolOutcome::GroupSplit(blocks) => {
                f.write_str("split:")?;
                let parts: Vec<String> = blocks
                    .iter()
                    .map(|b| b.iter().map(|p| p.0.to_string()).collect::<Vec<_>>().join(","))
                    .collect();
                f.write_str(&parts.join("/"))
            }
            ProtocolOutcome::Aborted(reason) => write!(f, "aborted:{reason}"),
        }
    }
}

impl std::str::FromStr for ProtocolOutcome {
    type Err = String;

    /// Parses the form written by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (tag, rest) = s.split_once(':').ok_or_else(|| format!("bad outcome {s:?}"))?;
        let player = |t: &str| t.parse::<usize>().map(PlayerId).map_err(|_| format!("bad player {t:?}"));
        match tag {
            "success" => rest
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(format!("bad output bit {c:?}")),
                })
                .collect::<Result<_, _>>()
                .map(ProtocolOutcome::Success),
            "cheater" => Ok(ProtocolOutcome::CheaterIdentified(player(rest)?)),
            "split" => rest
                .split('/')
                .map(|block| {
                    block
                        .split(',')
                        .filter(|t| !t.is_empty())
                        .map(player)
                        .collect::<Result<PlayerSet, _>>()
                })
                .collect::<Result<_, _>>()
                .map(ProtocolOutcome::GroupSplit),
            "aborted" => Ok(ProtocolOutcome::Aborted(rest.to_string())),
            _ => Err(format!("bad outcome {s:?}")),
        }
    }
}

/// A non-successful termination travelling up through nested sub-protocols.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Halt {
    #[error("cheater identified: {0}")]
    Cheater(PlayerId),
    #[error("players split into groups {0:?}")]
    Split(Vec<PlayerSet>),
    #[error("aborted: {0}")]
    Aborted(String),
}

impl From<Halt> for ProtocolOutcome {
    fn from(h: Halt) -> Self {
        match h {
            Halt::Cheater(p) => ProtocolOutcome::CheaterIdentified(p),
            Halt::Split(blocks) => ProtocolOutcome::GroupSplit(blocks),
            Halt::Aborted(r) => ProtocolOutcome::Aborted(r),
        }
    }
}

/// Result type of every protocol step.
pub type Step<T> = Result<T, Halt>;
