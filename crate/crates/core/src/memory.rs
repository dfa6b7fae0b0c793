//! Associative long-term store, the short-term memory row, novelty-gated
//! memorization, and the background cue editor.
//!
//! Searches are conjunctive: a cue set matches every stored image whose
//! bits are TRUE at all cue indices. FALSE bits impose no constraint, so
//! removing cues can only grow the match set — the property the cue editor
//! relies on to turn a NO-HIT into a HIT.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kernel::SimTime;

/// A subset of attribute indices. Used both for cue sets and for the
/// configured major/significance masks.
pub type AttributeMask = BTreeSet<usize>;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("store holds {capacity} images and is full")]
    CapacityExhausted { capacity: usize },
    #[error("attribute vector has width {got}, expected {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("bit string char '{ch}' is not 0 or 1")]
    BadBitChar { ch: char },
    #[error("snapshot line {line}: {msg}")]
    SnapshotParse { line: usize, msg: String },
}

/// A K-bit attribute pattern — the unit of short-term memory content and
/// long-term storage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeVector {
    bits: Vec<bool>,
}

impl AttributeVector {
    pub fn new(width: usize) -> Self {
        AttributeVector { bits: vec![false; width] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        AttributeVector { bits }
    }

    /// Parses a string of `0`/`1` chars; char `i` is attribute `i`.
    pub fn from_bitstring(s: &str) -> Result<Self, MemoryError> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => return Err(MemoryError::BadBitChar { ch: other }),
            }
        }
        Ok(AttributeVector { bits })
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn true_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn matches(&self, cues: &CueSet) -> bool {
        cues.iter().all(|i| self.bits.get(i).copied().unwrap_or(false))
    }
}

impl fmt::Display for AttributeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Identity of a memorized image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ImageId(pub u64);

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: ImageId,
    pub bits: AttributeVector,
    pub memorized_at: SimTime,
}

/// Conjunctive set of attributes required TRUE in a search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CueSet {
    indices: BTreeSet<usize>,
}

impl CueSet {
    pub fn new() -> Self {
        CueSet::default()
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        CueSet { indices: indices.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn remove(&mut self, index: usize) -> bool {
        self.indices.remove(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn is_subset(&self, other: &CueSet) -> bool {
        self.indices.is_subset(&other.indices)
    }
}

impl fmt::Display for CueSet {
    /// Comma-joined ascending indices, or `-` when empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.indices.is_empty() {
            return f.write_str("-");
        }
        let mut first = true;
        for i in &self.indices {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
            first = false;
        }
        Ok(())
    }
}

/// Search verdict: the matching records in id order, or nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Hit(Vec<ImageRecord>),
    NoHit,
}

impl SearchOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, SearchOutcome::Hit(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemorizeOutcome {
    Stored(ImageId),
    Duplicate,
}

/// Long-term associative store. Append-only up to `capacity`; no two
/// records hold identical bits.
#[derive(Debug, Clone)]
pub struct LtmStore {
    records: Vec<ImageRecord>,
    capacity: usize,
    width: usize,
    next_id: u64,
}

impl LtmStore {
    pub fn new(width: usize, capacity: usize) -> Self {
        LtmStore { records: Vec::new(), capacity, width, next_id: 0 }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn contains_bits(&self, bits: &AttributeVector) -> bool {
        self.records.iter().any(|r| &r.bits == bits)
    }

    /// Conjunctive cue search. HIT carries every record whose bits are TRUE
    /// at all cue indices, in id order; an empty cue set matches everything.
    pub fn search(&self, cues: &CueSet) -> SearchOutcome {
        let matches: Vec<ImageRecord> =
            self.records.iter().filter(|r| r.bits.matches(cues)).cloned().collect();
        if matches.is_empty() {
            SearchOutcome::NoHit
        } else {
            SearchOutcome::Hit(matches)
        }
    }

    /// Appends an image with a fresh id. Identical bits are a no-op; a full
    /// store refuses with `CapacityExhausted`.
    pub fn memorize(
        &mut self,
        bits: &AttributeVector,
        at: SimTime,
    ) -> Result<MemorizeOutcome, MemoryError> {
        if bits.width() != self.width {
            return Err(MemoryError::WidthMismatch { expected: self.width, got: bits.width() });
        }
        if self.contains_bits(bits) {
            return Ok(MemorizeOutcome::Duplicate);
        }
        if self.records.len() >= self.capacity {
            return Err(MemoryError::CapacityExhausted { capacity: self.capacity });
        }
        let id = ImageId(self.next_id);
        self.next_id += 1;
        self.records.push(ImageRecord { id, bits: bits.clone(), memorized_at: at });
        Ok(MemorizeOutcome::Stored(id))
    }

    /// Snapshot text: header `K=<int> M=<int>`, then one record per line
    /// `id<TAB>memorized_at<TAB><K-bit binary string>`.
    pub fn save_snapshot(&self) -> String {
        let mut out = format!("K={} M={}\n", self.width, self.capacity);
        for r in &self.records {
            out.push_str(&format!("{}\t{}\t{}\n", r.id, r.memorized_at, r.bits));
        }
        out
    }

    pub fn load_snapshot(text: &str) -> Result<LtmStore, MemoryError> {
        let err = |line: usize, msg: String| MemoryError::SnapshotParse { line, msg };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| err(1, "missing header".into()))?;
        let parse_field = |lineno: usize, field: &str, key: &str| -> Result<usize, MemoryError> {
            field
                .strip_prefix(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(lineno, format!("expected '{key}<int>', got '{field}'")))
        };
        let mut parts = header.split_whitespace();
        let width = parse_field(1, parts.next().unwrap_or(""), "K=")?;
        let capacity = parse_field(1, parts.next().unwrap_or(""), "M=")?;

        let mut store = LtmStore::new(width, capacity);
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id: u64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| err(lineno, "bad id".into()))?;
            let at: u64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| err(lineno, "bad timestamp".into()))?;
            let bits_str = fields.next().ok_or_else(|| err(lineno, "missing bits".into()))?;
            let bits = AttributeVector::from_bitstring(bits_str)
                .map_err(|e| err(lineno, e.to_string()))?;
            if bits.width() != width {
                return Err(err(lineno, format!("bits width {} != K={width}", bits.width())));
            }
            if id < store.next_id {
                return Err(err(lineno, format!("id {id} not strictly increasing")));
            }
            if store.contains_bits(&bits) {
                return Err(err(lineno, "duplicate image bits".into()));
            }
            if store.records.len() >= capacity {
                return Err(err(lineno, format!("more than M={capacity} records")));
            }
            store.records.push(ImageRecord { id: ImageId(id), bits, memorized_at: SimTime(at) });
            store.next_id = id + 1;
        }
        Ok(store)
    }
}

/// Cues are the STM's TRUE bits restricted to the configured major
/// attributes.
pub fn derive_cues(stm: &StmRow, major_mask: &AttributeMask) -> CueSet {
    CueSet::from_indices(
        major_mask.iter().copied().filter(|&i| i < stm.read().width() && stm.read().get(i)),
    )
}

/// One background edit: drop a uniformly chosen cue, making the next search
/// match more. `None` means the editor is exhausted (no cues left to drop).
pub fn cue_editor_step(cues: &CueSet, rng: &mut ChaCha8Rng) -> Option<(CueSet, usize)> {
    if cues.is_empty() {
        return None;
    }
    let pick = rng.random_range(0..cues.len());
    let removed = cues.iter().nth(pick).expect("index in range");
    let mut next = cues.clone();
    next.remove(removed);
    Some((next, removed))
}

/// Who wrote the current short-term memory content.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Sensory,
    Recall,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Sensory => "SENSORY",
            Origin::Recall => "RECALL",
        })
    }
}

/// The single current image. Loads overwrite atomically.
#[derive(Debug, Clone)]
pub struct StmRow {
    bits: AttributeVector,
    origin: Origin,
}

impl StmRow {
    pub fn new(width: usize) -> Self {
        StmRow { bits: AttributeVector::new(width), origin: Origin::Sensory }
    }

    pub fn load(&mut self, bits: &AttributeVector, origin: Origin) -> Result<(), MemoryError> {
        if bits.width() != self.bits.width() {
            return Err(MemoryError::WidthMismatch {
                expected: self.bits.width(),
                got: bits.width(),
            });
        }
        self.bits = bits.clone();
        self.origin = origin;
        Ok(())
    }

    pub fn read(&self) -> &AttributeVector {
        &self.bits
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }
}

/// Tracks what makes a sensory frame worth memorizing: a significance-mask
/// bit, or the same frame arriving `threshold` times in a row.
#[derive(Debug, Clone)]
pub struct NoveltyState {
    last: Option<AttributeVector>,
    repeats: u32,
    threshold: u32,
    significance: AttributeMask,
}

impl NoveltyState {
    pub fn new(threshold: u32, significance: AttributeMask) -> Self {
        NoveltyState { last: None, repeats: 0, threshold, significance }
    }

    pub fn repeats(&self) -> u32 {
        self.repeats
    }

    /// Observes one sensory frame and decides whether to enable
    /// memorization. `key_search` is the store's verdict on the frame's key
    /// attributes: a HIT means already memorized and suppresses the gate.
    pub fn novelty_gate(
        &mut self,
        sensory: &AttributeVector,
        key_search: &SearchOutcome,
    ) -> bool {
        let repeated = self.last.as_ref() == Some(sensory);
        let repeats_now = if repeated { self.repeats + 1 } else { 1 };
        let significant = sensory.true_indices().any(|i| self.significance.contains(&i))
            || (repeated && repeats_now >= self.threshold);
        let enable = significant && !key_search.is_hit();
        self.last = Some(sensory.clone());
        self.repeats = repeats_now;
        enable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn av(s: &str) -> AttributeVector {
        AttributeVector::from_bitstring(s).unwrap()
    }

    fn mask(v: &[usize]) -> AttributeMask {
        v.iter().copied().collect()
    }

    #[test]
    fn empty_store_never_hits() {
        let store = LtmStore::new(3, 8);
        assert_eq!(store.search(&CueSet::from_indices([0])), SearchOutcome::NoHit);
        assert_eq!(store.search(&CueSet::new()), SearchOutcome::NoHit);
    }

    #[test]
    fn search_matches_linear_scan_oracle() {
        let mut store = LtmStore::new(3, 8);
        store.memorize(&av("110"), SimTime(0)).unwrap();
        store.memorize(&av("011"), SimTime(1)).unwrap();
        match store.search(&CueSet::from_indices([0])) {
            SearchOutcome::Hit(records) => {
                assert_eq!(records.len(), 1);
                assert_eq!(records[0].bits, av("110"));
            }
            SearchOutcome::NoHit => panic!("expected hit"),
        }
    }

    #[test]
    fn empty_cues_match_every_record() {
        let mut store = LtmStore::new(3, 8);
        store.memorize(&av("110"), SimTime(0)).unwrap();
        store.memorize(&av("011"), SimTime(1)).unwrap();
        match store.search(&CueSet::new()) {
            SearchOutcome::Hit(records) => assert_eq!(records.len(), 2),
            SearchOutcome::NoHit => panic!("vacuous conjunction must hit"),
        }
    }

    #[test]
    fn derive_cues_masks_and_filters() {
        let mut stm = StmRow::new(4);
        stm.load(&av("1011"), Origin::Sensory).unwrap();
        assert_eq!(derive_cues(&stm, &mask(&[0, 1])), CueSet::from_indices([0]));
        assert_eq!(derive_cues(&stm, &mask(&[])), CueSet::new());
        stm.load(&av("0000"), Origin::Sensory).unwrap();
        assert_eq!(derive_cues(&stm, &mask(&[0, 1, 2, 3])), CueSet::new());
    }

    #[test]
    fn significance_bit_enables_on_no_hit() {
        let mut state = NoveltyState::new(3, mask(&[2]));
        let enable = state.novelty_gate(&av("0010"), &SearchOutcome::NoHit);
        assert!(enable);
    }

    #[test]
    fn repetition_enables_on_the_threshold() {
        let mut state = NoveltyState::new(3, mask(&[]));
        let frame = av("1000");
        assert!(!state.novelty_gate(&frame, &SearchOutcome::NoHit));
        assert!(!state.novelty_gate(&frame, &SearchOutcome::NoHit));
        assert!(state.novelty_gate(&frame, &SearchOutcome::NoHit), "third arrival enables");
    }

    #[test]
    fn hit_suppresses_the_gate() {
        let mut state = NoveltyState::new(3, mask(&[2]));
        let hit = SearchOutcome::Hit(vec![ImageRecord {
            id: ImageId(0),
            bits: av("0010"),
            memorized_at: SimTime(0),
        }]);
        assert!(!state.novelty_gate(&av("0010"), &hit));
    }

    #[test]
    fn interruption_resets_the_repeat_count() {
        let mut state = NoveltyState::new(3, mask(&[]));
        let frame = av("1000");
        state.novelty_gate(&frame, &SearchOutcome::NoHit);
        state.novelty_gate(&frame, &SearchOutcome::NoHit);
        state.novelty_gate(&av("0100"), &SearchOutcome::NoHit);
        assert!(!state.novelty_gate(&frame, &SearchOutcome::NoHit));
        assert_eq!(state.repeats(), 1);
    }

    #[test]
    fn memorize_dedups_and_bounds() {
        let mut store = LtmStore::new(3, 2);
        assert_eq!(
            store.memorize(&av("100"), SimTime(0)).unwrap(),
            MemorizeOutcome::Stored(ImageId(0))
        );
        assert_eq!(store.memorize(&av("100"), SimTime(1)).unwrap(), MemorizeOutcome::Duplicate);
        assert_eq!(store.len(), 1);
        store.memorize(&av("010"), SimTime(2)).unwrap();
        let err = store.memorize(&av("001"), SimTime(3)).unwrap_err();
        assert!(matches!(err, MemoryError::CapacityExhausted { capacity: 2 }));
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn editor_removes_exactly_one_cue() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cues = CueSet::from_indices([4]);
        let (next, removed) = cue_editor_step(&cues, &mut rng).unwrap();
        assert_eq!(removed, 4);
        assert!(next.is_empty());

        let cues = CueSet::from_indices([1, 3, 5, 7]);
        let (next, removed) = cue_editor_step(&cues, &mut rng).unwrap();
        assert_eq!(next.len(), 3);
        assert!(cues.contains(removed) && !next.contains(removed));

        assert!(cue_editor_step(&CueSet::new(), &mut rng).is_none());
    }

    #[test]
    fn editor_sequence_is_seed_reproducible() {
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cues = CueSet::from_indices([0, 2, 4, 6, 8]);
            let mut removals = Vec::new();
            while let Some((next, removed)) = cue_editor_step(&cues, &mut rng) {
                removals.push(removed);
                cues = next;
            }
            removals
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn stm_load_then_read() {
        let mut stm = StmRow::new(4);
        stm.load(&av("1010"), Origin::Sensory).unwrap();
        assert_eq!(stm.read(), &av("1010"));
        stm.load(&av("0001"), Origin::Recall).unwrap();
        assert_eq!(stm.read(), &av("0001"));
        assert_eq!(stm.origin(), Origin::Recall);
        assert!(stm.load(&av("10"), Origin::Sensory).is_err());
    }

    #[test]
    fn snapshot_round_trips_bit_exactly() {
        let mut store = LtmStore::new(5, 10);
        store.memorize(&av("10110"), SimTime(3)).unwrap();
        store.memorize(&av("01001"), SimTime(7)).unwrap();
        let text = store.save_snapshot();
        let back = LtmStore::load_snapshot(&text).unwrap();
        assert_eq!(back.save_snapshot(), text);
        assert_eq!(back.records(), store.records());
        // Fresh ids continue past the loaded ones.
        let mut back = back;
        let MemorizeOutcome::Stored(id) = back.memorize(&av("11111"), SimTime(9)).unwrap() else {
            panic!("expected store");
        };
        assert_eq!(id, ImageId(2));
    }

    #[test]
    fn snapshot_parse_errors_name_the_line() {
        let text = "K=3 M=4\n0\t0\t101\n1\t2\t10\n";
        match LtmStore::load_snapshot(text) {
            Err(MemoryError::SnapshotParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_store(width: usize) -> impl Strategy<Value = LtmStore> {
        proptest::collection::vec(proptest::collection::vec(any::<bool>(), width), 1..6)
            .prop_map(move |rows| {
                let mut store = LtmStore::new(width, 64);
                for row in rows {
                    let _ = store.memorize(&AttributeVector::from_bits(row), SimTime(0));
                }
                store
            })
    }

    proptest! {
        // Removing cues never loses matches.
        #[test]
        fn match_set_is_monotone_under_cue_removal(
            store in arb_store(6),
            cue_bits in proptest::collection::vec(any::<bool>(), 6),
            drop_index in 0usize..6,
        ) {
            let cues = CueSet::from_indices(
                cue_bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)),
            );
            let ids = |outcome: SearchOutcome| -> Vec<ImageId> {
                match outcome {
                    SearchOutcome::Hit(rs) => rs.iter().map(|r| r.id).collect(),
                    SearchOutcome::NoHit => vec![],
                }
            };
            let before = ids(store.search(&cues));
            let mut fewer = cues.clone();
            fewer.remove(drop_index);
            let after = ids(store.search(&fewer));
            for id in &before {
                prop_assert!(after.contains(id));
            }
        }

        // After memorize(v), any cue subset of v's TRUE bits finds v.
        #[test]
        fn memorize_then_search_hits(
            bits in proptest::collection::vec(any::<bool>(), 6),
            subset_mask in proptest::collection::vec(any::<bool>(), 6),
        ) {
            let v = AttributeVector::from_bits(bits);
            let mut store = LtmStore::new(6, 8);
            store.memorize(&v, SimTime(0)).unwrap();
            let cues = CueSet::from_indices(
                v.true_indices().zip(subset_mask.iter()).filter_map(|(i, &keep)| keep.then_some(i)),
            );
            match store.search(&cues) {
                SearchOutcome::Hit(rs) => prop_assert!(rs.iter().any(|r| r.bits == v)),
                SearchOutcome::NoHit => prop_assert!(false, "subset cues must hit"),
            }
        }
    }
}
