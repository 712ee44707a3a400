//! Subshifts of finite type: alphabets, 0/1 transition systems,
//! sub-alphabets, higher-block recoding, and word enumeration.
//!
//! Symbols are dense indices `0..ℓ-1` internally; user-facing labels are
//! kept in [`Alphabet`]. All structural flags (irreducibility, aperiodicity)
//! are computed exactly from the directed graph of allowed transitions.

use std::sync::Arc;

use crate::tol;

/// Errors from structural construction and enumeration.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SftError {
    #[error("transition matrix is not square: {rows} rows, {cols} columns in row {row}")]
    NotSquare { rows: usize, cols: usize, row: usize },
    #[error("transition matrix entry at ({row},{col}) is {value}; entries must be 0 or 1")]
    InvalidEntry { row: usize, col: usize, value: i64 },
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("expected {symbols} labels, got {labels}")]
    LabelCountMismatch { labels: usize, symbols: usize },
    #[error("duplicate symbol label {label:?}")]
    DuplicateLabel { label: String },
    #[error("symbol {symbol:?} has no allowed successor (zero row)")]
    ZeroRow { symbol: String },
    #[error("symbol {symbol:?} has no allowed predecessor (zero column)")]
    ZeroColumn { symbol: String },
    #[error("sub-alphabet must be a nonempty proper subset of the alphabet")]
    NotProperSubset,
    #[error("unknown symbol label {label:?}")]
    UnknownSymbol { label: String },
    #[error("symbol index {index} out of range for alphabet of size {size}")]
    SymbolOutOfRange { index: usize, size: usize },
    #[error("word has a disallowed transition at position {position}")]
    DisallowedWord { position: usize },
    #[error("word length must be at least 1")]
    ZeroWordLength,
    #[error("system has no allowed words of the requested length")]
    NoAllowedWords,
    #[error("{count} words exceed the enumeration cap of {cap}")]
    LengthOverflow { count: u128, cap: u128 },
    #[error("higher-block recoding needs block length k ≥ 2, got {k}")]
    BlockLengthTooSmall { k: usize },
}

/// Ordered finite symbol set with unique printable labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    /// Builds an alphabet from labels; rejects empty or duplicated label sets.
    pub fn new(labels: Vec<String>) -> Result<Self, SftError> {
        if labels.is_empty() {
            return Err(SftError::EmptyAlphabet);
        }
        let mut seen = std::collections::HashSet::new();
        for label in &labels {
            if !seen.insert(label.clone()) {
                return Err(SftError::DuplicateLabel {
                    label: label.clone(),
                });
            }
        }
        Ok(Self { labels })
    }

    /// Default labels "1", "2", … matching the usual 1-based presentation.
    pub fn numeric(size: usize) -> Self {
        Self {
            labels: (1..=size).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index of a label.
    pub fn index_of(&self, label: &str) -> Result<usize, SftError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| SftError::UnknownSymbol {
                label: label.to_string(),
            })
    }

    /// Joins block labels into one label: plain concatenation when every
    /// factor is a single character, '-'-separated otherwise.
    pub fn join_labels(parts: &[&str]) -> String {
        if parts.iter().all(|p| p.chars().count() == 1) {
            parts.concat()
        } else {
            parts.join("-")
        }
    }
}

/// A 0/1 transition matrix over an alphabet, with exact structural flags.
///
/// Transition `i → j` is allowed iff entry `(i, j)` is 1. Every symbol must
/// have at least one successor and one predecessor so that one-sided
/// sequences extend forever in both reading directions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSystem {
    alphabet: Alphabet,
    /// Row-major adjacency, `matrix[i*len + j]`.
    matrix: Vec<bool>,
    irreducible: bool,
    aperiodic: bool,
}

impl TransitionSystem {
    /// Validates a 0/1 matrix and computes the structural flags.
    pub fn new(rows: &[Vec<i64>]) -> Result<Arc<Self>, SftError> {
        Self::with_labels(rows, None)
    }

    /// As [`TransitionSystem::new`], with explicit symbol labels.
    pub fn with_labels(
        rows: &[Vec<i64>],
        labels: Option<Vec<String>>,
    ) -> Result<Arc<Self>, SftError> {
        let size = rows.len();
        if size == 0 {
            return Err(SftError::EmptyAlphabet);
        }
        let alphabet = match labels {
            Some(l) => {
                if l.len() != size {
                    return Err(SftError::LabelCountMismatch {
                        labels: l.len(),
                        symbols: size,
                    });
                }
                Alphabet::new(l)?
            }
            None => Alphabet::numeric(size),
        };
        let mut matrix = vec![false; size * size];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(SftError::NotSquare {
                    rows: size,
                    cols: row.len(),
                    row: i,
                });
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => matrix[i * size + j] = true,
                    other => {
                        return Err(SftError::InvalidEntry {
                            row: i,
                            col: j,
                            value: other,
                        })
                    }
                }
            }
        }
        Self::from_bool_matrix(alphabet, matrix)
    }

    /// Internal constructor from an already validated boolean adjacency.
    fn from_bool_matrix(alphabet: Alphabet, matrix: Vec<bool>) -> Result<Arc<Self>, SftError> {
        let size = alphabet.len();
        for i in 0..size {
            if !(0..size).any(|j| matrix[i * size + j]) {
                return Err(SftError::ZeroRow {
                    symbol: alphabet.label(i).to_string(),
                });
            }
        }
        for j in 0..size {
            if !(0..size).any(|i| matrix[i * size + j]) {
                return Err(SftError::ZeroColumn {
                    symbol: alphabet.label(j).to_string(),
                });
            }
        }
        let adj = |i: usize, j: usize| matrix[i * size + j];
        let irreducible = strongly_connected(size, adj);
        let aperiodic = period_through_zero(size, adj) == 1;
        Ok(Arc::new(Self {
            alphabet,
            matrix,
            irreducible,
            aperiodic,
        }))
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one symbol
    }

    /// Whether `from → to` is an allowed transition.
    #[inline]
    pub fn allowed(&self, from: usize, to: usize) -> bool {
        self.matrix[from * self.len() + to]
    }

    /// Whether every ordered pair of symbols is joined by some path.
    pub fn irreducible(&self) -> bool {
        self.irreducible
    }

    /// Whether the gcd of cycle lengths through symbol 0 is 1.
    pub fn aperiodic(&self) -> bool {
        self.aperiodic
    }

    /// Irreducible and aperiodic, i.e. some power of the matrix is positive.
    pub fn primitive(&self) -> bool {
        self.irreducible && self.aperiodic
    }

    /// Successors of a symbol in increasing order.
    pub fn successors(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.allowed(from, j))
    }

    /// Number of allowed words of length `n`, saturating at `u128::MAX`.
    ///
    /// With `restrict`, only words whose symbols all lie in the sub-alphabet
    /// are counted. The count equals the entry sum of the (restricted)
    /// adjacency power `A^{n-1}`.
    pub fn word_count(&self, n: usize, restrict: Option<&SubAlphabet>) -> Result<u128, SftError> {
        if n == 0 {
            return Err(SftError::ZeroWordLength);
        }
        let symbols: Vec<usize> = match restrict {
            Some(sub) => sub.members().to_vec(),
            None => (0..self.len()).collect(),
        };
        let mut counts: Vec<u128> = vec![1; symbols.len()];
        for _ in 1..n {
            let mut next = vec![0u128; symbols.len()];
            for (ai, &a) in symbols.iter().enumerate() {
                if counts[ai] == 0 {
                    continue;
                }
                for (bi, &b) in symbols.iter().enumerate() {
                    if self.allowed(a, b) {
                        next[bi] = next[bi].saturating_add(counts[ai]);
                    }
                }
            }
            counts = next;
        }
        Ok(counts.iter().fold(0u128, |acc, &c| acc.saturating_add(c)))
    }

    /// Streaming lexicographic enumeration of allowed words of length `n`.
    ///
    /// Fails with [`SftError::LengthOverflow`] when more than
    /// [`tol::WORD_ENUMERATION_CAP`] words exist, and with
    /// [`SftError::NoAllowedWords`] when none do (possible only for
    /// restricted enumeration, kept as a defensive check otherwise).
    pub fn words<'a>(
        self: &'a Arc<Self>,
        n: usize,
        restrict: Option<&'a SubAlphabet>,
    ) -> Result<WordIter<'a>, SftError> {
        let count = self.word_count(n, restrict)?;
        if count == 0 {
            return Err(SftError::NoAllowedWords);
        }
        if count > tol::WORD_ENUMERATION_CAP {
            return Err(SftError::LengthOverflow {
                count,
                cap: tol::WORD_ENUMERATION_CAP,
            });
        }
        Ok(WordIter {
            system: self,
            restrict,
            n,
            state: Vec::new(),
            started: false,
            done: false,
        })
    }

    /// Higher-block recoding with block length `k ≥ 2`.
    ///
    /// The new symbols are the allowed words of length `k−1`; the transition
    /// `u → v` is allowed iff `u` and `v` overlap in their last/first `k−2`
    /// symbols (so each new transition corresponds to one allowed `k`-word).
    /// `k = 2` reproduces the original system symbol for symbol.
    pub fn recode_higher_block(
        self: &Arc<Self>,
        k: usize,
    ) -> Result<(Arc<TransitionSystem>, RecodingMap), SftError> {
        if k < 2 {
            return Err(SftError::BlockLengthTooSmall { k });
        }
        let blocks: Vec<Vec<usize>> = self
            .words(k - 1, None)?
            .map(|w| w.symbols().to_vec())
            .collect();
        let size = blocks.len();
        let labels: Vec<String> = blocks
            .iter()
            .map(|b| {
                let parts: Vec<&str> = b.iter().map(|&s| self.alphabet.label(s)).collect();
                Alphabet::join_labels(&parts)
            })
            .collect();
        let mut matrix = vec![false; size * size];
        for (ui, u) in blocks.iter().enumerate() {
            for (vi, v) in blocks.iter().enumerate() {
                let overlap = u[1..] == v[..k - 2];
                if overlap && self.allowed(u[k - 2], v[k - 2]) {
                    matrix[ui * size + vi] = true;
                }
            }
        }
        let alphabet = Alphabet::new(labels)?;
        let recoded = TransitionSystem::from_bool_matrix(alphabet, matrix)?;
        Ok((
            recoded,
            RecodingMap {
                block_length: k,
                blocks,
            },
        ))
    }
}

/// Strong connectivity: every ordered pair is joined by a path of length ≥ 1.
fn strongly_connected(size: usize, adj: impl Fn(usize, usize) -> bool) -> bool {
    let forward = reach_from_zero(size, &adj, false);
    let backward = reach_from_zero(size, &adj, true);
    forward.iter().all(|&r| r) && backward.iter().all(|&r| r)
}

/// Symbols reachable from symbol 0 in at least one step (transposed when
/// `reverse`). Symbol 0 itself is included only if it lies on a cycle.
fn reach_from_zero(size: usize, adj: &impl Fn(usize, usize) -> bool, reverse: bool) -> Vec<bool> {
    let mut reached = vec![false; size];
    let mut queue = std::collections::VecDeque::new();
    let push_successors =
        |of: usize, reached: &mut Vec<bool>, queue: &mut std::collections::VecDeque<usize>| {
            for to in 0..size {
                let edge = if reverse { adj(to, of) } else { adj(of, to) };
                if edge && !reached[to] {
                    reached[to] = true;
                    queue.push_back(to);
                }
            }
        };
    push_successors(0, &mut reached, &mut queue);
    while let Some(v) = queue.pop_front() {
        push_successors(v, &mut reached, &mut queue);
    }
    reached
}

/// Gcd of cycle lengths through symbol 0, via BFS level differences:
/// for every edge (u, v) with u reachable, `level(u) + 1 − level(v)` is a
/// multiple of the period. Returns 0 when no cycle passes through symbol 0.
fn period_through_zero(size: usize, adj: impl Fn(usize, usize) -> bool) -> u64 {
    let mut level = vec![i64::MIN; size];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut g: u64 = 0;
    while let Some(u) = queue.pop_front() {
        for v in 0..size {
            if !adj(u, v) {
                continue;
            }
            if level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1 - level[v]).unsigned_abs());
            }
        }
    }
    g
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Nonempty proper subset Δ of an alphabet, with the structural flags of
/// the restricted transition matrix `A_Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubAlphabet {
    parent: Arc<TransitionSystem>,
    members: Vec<usize>,
    mask: Vec<bool>,
    restricted_irreducible: bool,
    restricted_aperiodic: bool,
}

impl SubAlphabet {
    /// Builds Δ from member indices (deduplicated, sorted).
    pub fn new(parent: &Arc<TransitionSystem>, members: &[usize]) -> Result<Self, SftError> {
        let size = parent.len();
        for &m in members {
            if m >= size {
                return Err(SftError::SymbolOutOfRange {
                    index: m,
                    size,
                });
            }
        }
        let mut members: Vec<usize> = members.to_vec();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() || members.len() == size {
            return Err(SftError::NotProperSubset);
        }
        let mut mask = vec![false; size];
        for &m in &members {
            mask[m] = true;
        }
        let adj = |i: usize, j: usize| parent.allowed(members[i], members[j]);
        let restricted_irreducible = strongly_connected(members.len(), adj);
        let restricted_aperiodic = period_through_zero(members.len(), adj) == 1;
        Ok(Self {
            parent: Arc::clone(parent),
            members,
            mask,
            restricted_irreducible,
            restricted_aperiodic,
        })
    }

    /// Builds Δ from symbol labels.
    pub fn from_labels(parent: &Arc<TransitionSystem>, labels: &[&str]) -> Result<Self, SftError> {
        let members: Vec<usize> = labels
            .iter()
            .map(|l| parent.alphabet().index_of(l))
            .collect::<Result<_, _>>()?;
        Self::new(parent, &members)
    }

    pub fn parent(&self) -> &Arc<TransitionSystem> {
        &self.parent
    }

    /// Member symbol indices in increasing order.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one member
    }

    #[inline]
    pub fn contains(&self, symbol: usize) -> bool {
        self.mask[symbol]
    }

    /// Membership mask over the full alphabet.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Position of a symbol within the member list.
    pub fn position(&self, symbol: usize) -> Option<usize> {
        if self.contains(symbol) {
            self.members.binary_search(&symbol).ok()
        } else {
            None
        }
    }

    /// Whether `A_Δ` is irreducible.
    pub fn restricted_irreducible(&self) -> bool {
        self.restricted_irreducible
    }

    /// Whether the restricted cycle gcd through the first member is 1.
    pub fn restricted_aperiodic(&self) -> bool {
        self.restricted_aperiodic
    }

    /// Whether `A_Δ` is primitive, the standing assumption for the open
    /// subsystem analysis.
    pub fn restricted_mixing(&self) -> bool {
        self.restricted_irreducible && self.restricted_aperiodic
    }

    /// Symbols reachable from Δ in exactly one step:
    /// `{a : A(b, a) = 1 for some b in Δ}`. This is the support of the
    /// conditionally invariant density.
    pub fn one_step_successors(&self) -> Vec<usize> {
        (0..self.parent.len())
            .filter(|&a| self.members.iter().any(|&b| self.parent.allowed(b, a)))
            .collect()
    }

    /// The restricted system on Δ as a standalone [`TransitionSystem`],
    /// with labels inherited from the parent. Fails when some member loses
    /// all successors or predecessors inside Δ.
    pub fn restricted_system(&self) -> Result<Arc<TransitionSystem>, SftError> {
        let labels: Vec<String> = self
            .members
            .iter()
            .map(|&m| self.parent.alphabet().label(m).to_string())
            .collect();
        let k = self.members.len();
        let mut matrix = vec![false; k * k];
        for (i, &a) in self.members.iter().enumerate() {
            for (j, &b) in self.members.iter().enumerate() {
                matrix[i * k + j] = self.parent.allowed(a, b);
            }
        }
        TransitionSystem::from_bool_matrix(Alphabet::new(labels)?, matrix)
    }
}

/// A finite symbol sequence whose adjacent pairs are all allowed.
/// The empty word denotes the whole space (the trivial cylinder).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    symbols: Vec<usize>,
}

impl Word {
    /// Validates symbol range and all adjacent transitions.
    pub fn new(system: &TransitionSystem, symbols: Vec<usize>) -> Result<Self, SftError> {
        for &s in &symbols {
            if s >= system.len() {
                return Err(SftError::SymbolOutOfRange {
                    index: s,
                    size: system.len(),
                });
            }
        }
        for (pos, pair) in symbols.windows(2).enumerate() {
            if !system.allowed(pair[0], pair[1]) {
                return Err(SftError::DisallowedWord { position: pos });
            }
        }
        Ok(Self { symbols })
    }

    /// Builds a word from symbol labels.
    pub fn from_labels(system: &TransitionSystem, labels: &[&str]) -> Result<Self, SftError> {
        let symbols = labels
            .iter()
            .map(|l| system.alphabet().index_of(l))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(system, symbols)
    }

    /// The empty word (whole space).
    pub fn empty() -> Self {
        Self { symbols: Vec::new() }
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Render using the system's labels.
    pub fn display(&self, system: &TransitionSystem) -> String {
        let parts: Vec<&str> = self
            .symbols
            .iter()
            .map(|&s| system.alphabet().label(s))
            .collect();
        Alphabet::join_labels(&parts)
    }
}

/// Streaming lexicographic word enumeration. Single-consumer; the word
/// count was checked against the cap at construction.
pub struct WordIter<'a> {
    system: &'a Arc<TransitionSystem>,
    restrict: Option<&'a SubAlphabet>,
    n: usize,
    state: Vec<usize>,
    started: bool,
    done: bool,
}

impl WordIter<'_> {
    fn symbol_ok(&self, prev: Option<usize>, s: usize) -> bool {
        if let Some(r) = self.restrict {
            if !r.contains(s) {
                return false;
            }
        }
        match prev {
            Some(p) => self.system.allowed(p, s),
            None => true,
        }
    }

    /// Extends the current prefix to the lexicographically smallest
    /// completion of length `n`, trying symbols `≥ from` at the current
    /// depth. Returns false when no completion exists.
    fn descend(&mut self, mut from: usize) -> bool {
        while self.state.len() < self.n {
            let prev = self.state.last().copied();
            let next = (from..self.system.len()).find(|&s| self.symbol_ok(prev, s));
            match next {
                Some(s) => {
                    self.state.push(s);
                    from = 0;
                }
                None => {
                    // Backtrack: advance the last placed symbol.
                    match self.state.pop() {
                        Some(last) => from = last + 1,
                        None => return false,
                    }
                }
            }
        }
        true
    }
}

impl Iterator for WordIter<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        let found = if !self.started {
            self.started = true;
            self.descend(0)
        } else {
            match self.state.pop() {
                Some(last) => self.descend(last + 1),
                None => false,
            }
        };
        if !found {
            self.done = true;
            return None;
        }
        Some(Word {
            symbols: self.state.clone(),
        })
    }
}

/// Mapping from a higher-block recoding back to original blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecodingMap {
    /// Block length `k` of the recoding; new transitions ↔ `k`-words.
    pub block_length: usize,
    /// For each new symbol, the original word (length `k−1`) it stands for.
    pub blocks: Vec<Vec<usize>>,
}

impl RecodingMap {
    /// Original word spelled by a recoded word (overlapping blocks).
    pub fn decode(&self, word: &Word) -> Word {
        let mut symbols = Vec::new();
        for (i, &s) in word.symbols().iter().enumerate() {
            let block = &self.blocks[s];
            if i == 0 {
                symbols.extend_from_slice(block);
            } else {
                symbols.push(block[self.block_length - 2]);
            }
        }
        Word { symbols }
    }

    /// Recoded symbol index of an original `(k−1)`-block, if allowed.
    pub fn encode_block(&self, block: &[usize]) -> Option<usize> {
        self.blocks.iter().position(|b| b == block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{banded4, full_shift, golden_mean};

    #[test]
    fn rejects_malformed_matrices() {
        assert!(matches!(
            TransitionSystem::new(&[vec![1, 1], vec![1]]),
            Err(SftError::NotSquare { .. })
        ));
        assert!(matches!(
            TransitionSystem::new(&[vec![1, 2], vec![1, 0]]),
            Err(SftError::InvalidEntry { value: 2, .. })
        ));
        assert!(matches!(
            TransitionSystem::new(&[vec![0, 0], vec![1, 1]]),
            Err(SftError::ZeroRow { .. })
        ));
        assert!(matches!(
            TransitionSystem::new(&[vec![1, 0], vec![1, 0]]),
            Err(SftError::ZeroColumn { .. })
        ));
        assert!(matches!(
            TransitionSystem::new(&[]),
            Err(SftError::EmptyAlphabet)
        ));
    }

    #[test]
    fn structural_flags() {
        let gm = golden_mean();
        assert!(gm.irreducible() && gm.aperiodic());

        // Identity matrix: two fixed points, not irreducible.
        let id = TransitionSystem::new(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert!(!id.irreducible());

        // Two-cycle: irreducible with period 2.
        let cyc = TransitionSystem::new(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert!(cyc.irreducible());
        assert!(!cyc.aperiodic());

        let b4 = banded4();
        assert!(b4.irreducible() && b4.aperiodic());
    }

    #[test]
    fn banded4_has_ten_transitions() {
        let b4 = banded4();
        let ones = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| b4.allowed(i, j))
            .count();
        assert_eq!(ones, 10);
    }

    #[test]
    fn word_counts_match_matrix_powers() {
        let gm = golden_mean();
        // Fibonacci: 2, 3, 5, 8, 13 words of lengths 1..=5.
        let expect = [2u128, 3, 5, 8, 13];
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(gm.word_count(i + 1, None).unwrap(), e);
        }
        assert_eq!(full_shift(3).word_count(4, None).unwrap(), 81);
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let gm = golden_mean();
        let words: Vec<Vec<usize>> = gm
            .words(4, None)
            .unwrap()
            .map(|w| w.symbols().to_vec())
            .collect();
        assert_eq!(words.len(), 8);
        let mut sorted = words.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, words, "not lexicographic or not unique");
        for w in &words {
            assert!(Word::new(&gm, w.clone()).is_ok());
        }
        assert_eq!(words[0], vec![0, 0, 0, 0]);
        assert_eq!(words.last().unwrap(), &vec![1, 0, 1, 0]);
    }

    #[test]
    fn restricted_enumeration() {
        let b4 = banded4();
        let sub = SubAlphabet::new(&b4, &[0, 1]).unwrap();
        let words: Vec<Word> = b4.words(3, Some(&sub)).unwrap().collect();
        // Δ = {1,2} restricts to a full 2-shift: 8 words of length 3.
        assert_eq!(words.len(), 8);
        assert_eq!(b4.word_count(3, Some(&sub)).unwrap(), 8);
        for w in &words {
            assert!(w.symbols().iter().all(|&s| sub.contains(s)));
        }
    }

    #[test]
    fn enumeration_cap_and_empty_cases() {
        let fs = full_shift(3);
        // 3^20 words is far beyond the cap.
        assert!(matches!(
            fs.words(20, None),
            Err(SftError::LengthOverflow { .. })
        ));
        let gm = golden_mean();
        let sub = SubAlphabet::new(&gm, &[1]).unwrap();
        // Symbol 2 has no self-transition: no restricted words of length 2.
        assert!(matches!(
            gm.words(2, Some(&sub)),
            Err(SftError::NoAllowedWords)
        ));
        assert!(matches!(fs.word_count(0, None), Err(SftError::ZeroWordLength)));
    }

    #[test]
    fn sub_alphabet_structure() {
        let gm = golden_mean();
        let s1 = SubAlphabet::new(&gm, &[0]).unwrap();
        assert!(s1.restricted_irreducible() && s1.restricted_aperiodic());
        assert_eq!(s1.one_step_successors(), vec![0, 1]);

        let s2 = SubAlphabet::new(&gm, &[1]).unwrap();
        assert!(!s2.restricted_irreducible());

        assert!(matches!(
            SubAlphabet::new(&gm, &[0, 1]),
            Err(SftError::NotProperSubset)
        ));
        assert!(matches!(
            SubAlphabet::new(&gm, &[]),
            Err(SftError::NotProperSubset)
        ));
        assert!(matches!(
            SubAlphabet::new(&gm, &[5]),
            Err(SftError::SymbolOutOfRange { .. })
        ));
    }

    #[test]
    fn restricted_system_of_banded4() {
        let b4 = banded4();
        let sub = SubAlphabet::from_labels(&b4, &["1", "2"]).unwrap();
        assert!(sub.restricted_mixing());
        let rs = sub.restricted_system().unwrap();
        assert_eq!(rs.len(), 2);
        assert!(rs.allowed(0, 0) && rs.allowed(0, 1) && rs.allowed(1, 0) && rs.allowed(1, 1));
        assert_eq!(sub.one_step_successors(), vec![0, 1, 2]);
    }

    #[test]
    fn words_validate_transitions() {
        let gm = golden_mean();
        assert!(Word::new(&gm, vec![0, 1, 0, 0]).is_ok());
        assert!(matches!(
            Word::new(&gm, vec![0, 1, 1]),
            Err(SftError::DisallowedWord { position: 1 })
        ));
        let w = Word::from_labels(&gm, &["1", "2", "1"]).unwrap();
        assert_eq!(w.display(&gm), "121");
        assert_eq!(Word::empty().len(), 0);
    }

    #[test]
    fn recode_identity_at_k2() {
        let b4 = banded4();
        let (recoded, map) = b4.recode_higher_block(2).unwrap();
        assert_eq!(recoded.len(), 4);
        assert_eq!(map.block_length, 2);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(recoded.allowed(i, j), b4.allowed(i, j));
            }
        }
    }

    #[test]
    fn recode_golden_mean_k3() {
        let gm = golden_mean();
        let (recoded, map) = gm.recode_higher_block(3).unwrap();
        let labels: Vec<&str> = (0..recoded.len())
            .map(|i| recoded.alphabet().label(i))
            .collect();
        assert_eq!(labels, vec!["11", "12", "21"]);
        assert_eq!(map.blocks, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        // 11 → {11, 12}, 12 → {21}, 21 → {11, 12}
        assert!(recoded.allowed(0, 0) && recoded.allowed(0, 1) && !recoded.allowed(0, 2));
        assert!(!recoded.allowed(1, 0) && !recoded.allowed(1, 1) && recoded.allowed(1, 2));
        assert!(recoded.allowed(2, 0) && recoded.allowed(2, 1) && !recoded.allowed(2, 2));
    }

    #[test]
    fn recode_full_2_shift_k3() {
        let fs = full_shift(2);
        let (recoded, _) = fs.recode_higher_block(3).unwrap();
        assert_eq!(recoded.len(), 4);
        // (ab, cd) allowed iff b = c: each block has exactly 2 successors.
        for i in 0..4 {
            assert_eq!(recoded.successors(i).count(), 2);
        }
    }

    #[test]
    fn recode_banded4_k3_symbol_count_is_transition_count() {
        let b4 = banded4();
        let (recoded, _) = b4.recode_higher_block(3).unwrap();
        // Length-2 words of the original = 1-entries of A = 10.
        assert_eq!(recoded.len(), 10);
        assert!(recoded.irreducible() && recoded.aperiodic());
    }

    #[test]
    fn recode_preserves_word_counts() {
        for system in [golden_mean(), banded4()] {
            for k in 2..=4usize {
                let (recoded, _) = system.recode_higher_block(k).unwrap();
                for m in 1..=6usize {
                    assert_eq!(
                        recoded.word_count(m, None).unwrap(),
                        system.word_count(m + k - 2, None).unwrap(),
                        "k={k}, m={m}"
                    );
                }
            }
        }
    }

    #[test]
    fn recode_decodes_back_to_original_words() {
        let gm = golden_mean();
        let (recoded, map) = gm.recode_higher_block(3).unwrap();
        for w in recoded.words(4, None).unwrap() {
            let decoded = map.decode(&w);
            assert_eq!(decoded.len(), 4 + 3 - 2);
            assert!(Word::new(&gm, decoded.symbols().to_vec()).is_ok());
        }
    }
}
