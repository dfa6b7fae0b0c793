//! The autonomous loop: an oscillator alternates what short-term memory
//! receives, sensory frames on one half-period and recalled images on the
//! other. Every STM load triggers a memory search; a HIT feeds the register
//! bank, whose summed priorities pick the one image recalled next. A NO-HIT
//! arms the cue editor, which drops one cue per recall cycle in the
//! background until a search succeeds.

use std::fmt;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::Config;
use crate::kernel::{EventQueue, KernelError, SimTime};
use crate::memory::{
    cue_editor_step, derive_cues, AttributeVector, CueSet, ImageId, ImageRecord, LtmStore,
    MemorizeOutcome, MemoryError, NoveltyState, Origin, SearchOutcome, StmRow,
};
use crate::priority::{
    gen_adder_microcode, AdderMicrocode, ImportanceMap, PriorityError, RegisterBank,
    RegisterLayout,
};
use crate::selector::{
    route_winner, select_max, PriorityValue, SelectionResult, SelectorError,
};
use crate::stimulus::StimulusTrace;

#[derive(Debug, Error)]
pub enum BrainError {
    #[error("store width {got} differs from configured attribute count {expected}")]
    StoreWidth { expected: usize, got: usize },
    #[error(transparent)]
    Priority(#[from] PriorityError),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Which half of the oscillation the loop is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Sense,
    Recall,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Sense => "SENSE",
            Phase::Recall => "RECALL",
        })
    }
}

/// Square-wave phase source with half-period D ticks. Only its alternation
/// matters to the loop; the self-delaying neuron it stands for is not
/// modeled below this.
#[derive(Debug, Clone, Copy)]
pub struct Oscillator {
    phase: Phase,
    half_period: u64,
}

impl Oscillator {
    pub fn new(half_period: u64) -> Self {
        Oscillator { phase: Phase::Sense, half_period }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn half_period(&self) -> u64 {
        self.half_period
    }

    pub fn advance(&mut self) {
        self.phase = match self.phase {
            Phase::Sense => Phase::Recall,
            Phase::Recall => Phase::Sense,
        };
    }
}

/// One externally visible action, emitted on every STM load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionEvent {
    pub time: SimTime,
    pub origin: Origin,
    pub bits: AttributeVector,
    /// The winning priority when a recall caused the load.
    pub priority: Option<u64>,
    /// TRUE when the loaded image carries the danger attribute.
    pub danger: bool,
}

/// One run-log line. The text forms are the acceptance surface and stay
/// stable; each starts with the cycle index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogEvent {
    LoadStm { cycle: u64, origin: Origin, bits: AttributeVector },
    Search { cycle: u64, cues: CueSet },
    Hit { cycle: u64, ids: Vec<ImageId> },
    NoHit { cycle: u64 },
    Memorize { cycle: u64, id: ImageId, bits: AttributeVector },
    Select { cycle: u64, winner: ImageId, priority: u64, contenders: usize },
    Action { cycle: u64, origin: Origin, bits: AttributeVector, danger: bool, priority: Option<u64> },
    CueEdit { cycle: u64, removed: usize, remaining: CueSet },
}

impl fmt::Display for LogEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogEvent::LoadStm { cycle, origin, bits } => {
                write!(f, "{cycle}\tLOAD_STM\t{origin}\t{bits}")
            }
            LogEvent::Search { cycle, cues } => write!(f, "{cycle}\tSEARCH\t{cues}"),
            LogEvent::Hit { cycle, ids } => {
                write!(f, "{cycle}\tHIT\t")?;
                for (i, id) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{id}")?;
                }
                Ok(())
            }
            LogEvent::NoHit { cycle } => write!(f, "{cycle}\tNO_HIT"),
            LogEvent::Memorize { cycle, id, bits } => {
                write!(f, "{cycle}\tMEMORIZE\t{id}\t{bits}")
            }
            LogEvent::Select { cycle, winner, priority, contenders } => {
                write!(f, "{cycle}\tSELECT\t{winner}\t{priority}\t{contenders}")
            }
            LogEvent::Action { cycle, origin, bits, danger, priority } => {
                write!(f, "{cycle}\tACTION\t{origin}\t{bits}\t{}\t", u8::from(*danger))?;
                match priority {
                    Some(p) => write!(f, "{p}"),
                    None => f.write_str("-"),
                }
            }
            LogEvent::CueEdit { cycle, removed, remaining } => {
                write!(f, "{cycle}\tCUE_EDIT\t{removed}\t{remaining}")
            }
        }
    }
}

/// Everything one run produced: the brain-level event log, the kernel's
/// pulse log, and the count of memorizations refused by a full store.
#[derive(Debug, Clone)]
pub struct RunLog {
    events: Vec<LogEvent>,
    kernel_log: String,
    capacity_misses: u32,
}

impl RunLog {
    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn capacity_misses(&self) -> u32 {
        self.capacity_misses
    }

    /// The kernel's `tick<TAB>line-name` delivery log.
    pub fn kernel_text(&self) -> &str {
        &self.kernel_log
    }

    /// One line per event; the byte-determinism surface.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            writeln!(out, "{event}").unwrap();
        }
        out
    }
}

struct PendingRecall {
    result: SelectionResult,
    records: Vec<ImageRecord>,
}

/// The assembled front end. Owns all mutable state; one `cycle` call is one
/// oscillator half-period.
pub struct Brain {
    config: Config,
    map: ImportanceMap,
    layout: RegisterLayout,
    microcode: AdderMicrocode,
    oscillator: Oscillator,
    stm: StmRow,
    ltm: LtmStore,
    novelty: NoveltyState,
    pending: Option<PendingRecall>,
    editor: Option<CueSet>,
    rng: ChaCha8Rng,
    cycle_index: u64,
    capacity_misses: u32,
    log: Vec<LogEvent>,
}

impl Brain {
    /// `ltm` may come from a snapshot; its width must match the config.
    pub fn new(config: Config, ltm: LtmStore) -> Result<Brain, BrainError> {
        if ltm.width() != config.attributes {
            return Err(BrainError::StoreWidth {
                expected: config.attributes,
                got: ltm.width(),
            });
        }
        let map = config.importance_map()?;
        let layout = RegisterLayout::for_map(&map)?;
        let microcode = gen_adder_microcode(layout.kappa(), layout.n1(), &layout)?;
        Ok(Brain {
            oscillator: Oscillator::new(config.half_period),
            stm: StmRow::new(config.attributes),
            novelty: NoveltyState::new(
                config.repeat_threshold,
                config.significance_mask.clone(),
            ),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            map,
            layout,
            microcode,
            config,
            ltm,
            pending: None,
            editor: None,
            cycle_index: 0,
            capacity_misses: 0,
            log: Vec::new(),
        })
    }

    pub fn ltm(&self) -> &LtmStore {
        &self.ltm
    }

    pub fn stm(&self) -> &StmRow {
        &self.stm
    }

    pub fn phase(&self) -> Phase {
        self.oscillator.phase()
    }

    pub fn cycle_index(&self) -> u64 {
        self.cycle_index
    }

    pub fn microcode(&self) -> &AdderMicrocode {
        &self.microcode
    }

    pub fn capacity_misses(&self) -> u32 {
        self.capacity_misses
    }

    fn now(&self) -> SimTime {
        SimTime(self.cycle_index.saturating_mul(self.config.half_period))
    }

    fn emit_action(
        &mut self,
        cycle: u64,
        origin: Origin,
        bits: &AttributeVector,
        priority: Option<u64>,
        actions: &mut Vec<ActionEvent>,
    ) {
        let danger = bits.get(self.map.danger_attribute());
        self.log.push(LogEvent::Action {
            cycle,
            origin,
            bits: bits.clone(),
            danger,
            priority,
        });
        actions.push(ActionEvent {
            time: self.now(),
            origin,
            bits: bits.clone(),
            priority,
            danger,
        });
    }

    /// Searches on a cue set, logs the outcome, and on a HIT runs the whole
    /// prioritize-and-select pipeline, leaving the winner pending for the
    /// next recall. A NO-HIT hands the cues to the editor.
    fn search_and_select(&mut self, cycle: u64, cues: CueSet) -> Result<(), BrainError> {
        self.log.push(LogEvent::Search { cycle, cues: cues.clone() });
        match self.ltm.search(&cues) {
            SearchOutcome::Hit(records) => {
                self.log.push(LogEvent::Hit {
                    cycle,
                    ids: records.iter().map(|r| r.id).collect(),
                });
                self.editor = None;
                let mut bank = RegisterBank::load(&records, &self.map, &self.layout)?;
                let sums = bank.compute_all(&self.microcode)?;
                let w = self.layout.accumulator_width();
                let priorities = sums
                    .iter()
                    .map(|&(id, v)| PriorityValue::new(id, v, w))
                    .collect::<Result<Vec<_>, _>>()?;
                let result = select_max(&priorities)?.expect("a HIT carries records");
                self.log.push(LogEvent::Select {
                    cycle,
                    winner: result.winner,
                    priority: result.priority,
                    contenders: result.contenders,
                });
                self.pending = Some(PendingRecall { result, records });
            }
            SearchOutcome::NoHit => {
                self.log.push(LogEvent::NoHit { cycle });
                self.editor = Some(cues);
            }
        }
        Ok(())
    }

    /// Runs one half-period. `sensory` is the frame due at this boundary,
    /// if the phase is SENSE and the environment supplied one; it is
    /// ignored during RECALL (the multiplexer is switched the other way).
    /// A silent SENSE phase leaves STM and the recall chain untouched.
    pub fn cycle(
        &mut self,
        sensory: Option<&AttributeVector>,
    ) -> Result<Vec<ActionEvent>, BrainError> {
        let cycle = self.cycle_index;
        let mut actions = Vec::new();
        match self.oscillator.phase() {
            Phase::Sense => {
                if let Some(frame) = sensory {
                    self.stm.load(frame, Origin::Sensory)?;
                    self.log.push(LogEvent::LoadStm {
                        cycle,
                        origin: Origin::Sensory,
                        bits: frame.clone(),
                    });
                    self.emit_action(cycle, Origin::Sensory, frame, None, &mut actions);
                    // Gate 4: significance AND not-already-memorized. The
                    // key search here is internal to the gate.
                    let key_cues = derive_cues(&self.stm, &self.config.major_mask);
                    let key_result = self.ltm.search(&key_cues);
                    if self.novelty.novelty_gate(frame, &key_result) {
                        let at = self.now();
                        match self.ltm.memorize(frame, at) {
                            Ok(MemorizeOutcome::Stored(id)) => {
                                self.log.push(LogEvent::Memorize {
                                    cycle,
                                    id,
                                    bits: frame.clone(),
                                });
                            }
                            Ok(MemorizeOutcome::Duplicate) => {}
                            Err(MemoryError::CapacityExhausted { .. }) => {
                                self.capacity_misses += 1;
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                    let cues = derive_cues(&self.stm, &self.config.major_mask);
                    self.search_and_select(cycle, cues)?;
                }
            }
            Phase::Recall => {
                if let Some(PendingRecall { result, records }) = self.pending.take() {
                    let record = route_winner(&result, &records, &mut self.stm)?;
                    self.log.push(LogEvent::LoadStm {
                        cycle,
                        origin: Origin::Recall,
                        bits: record.bits.clone(),
                    });
                    self.emit_action(
                        cycle,
                        Origin::Recall,
                        &record.bits,
                        Some(result.priority),
                        &mut actions,
                    );
                    // A recall is an image in STM like any other: it
                    // triggers its own search, keeping the chain going.
                    let cues = derive_cues(&self.stm, &self.config.major_mask);
                    self.search_and_select(cycle, cues)?;
                }
                // One background editor step per recall cycle, after the
                // routed search has had its say.
                if let Some(cues) = self.editor.clone() {
                    match cue_editor_step(&cues, &mut self.rng) {
                        Some((next, removed)) => {
                            self.log.push(LogEvent::CueEdit {
                                cycle,
                                removed,
                                remaining: next.clone(),
                            });
                            self.search_and_select(cycle, next)?;
                        }
                        None => self.editor = None,
                    }
                }
            }
        }
        self.oscillator.advance();
        self.cycle_index += 1;
        Ok(actions)
    }

    /// Drives `cycles` half-periods through the kernel, feeding trace
    /// frames at their times. A frame becomes visible at the first SENSE
    /// boundary at or after its time; of several frames due at one
    /// boundary, the latest wins (sensory input overwrites itself).
    pub fn run(&mut self, trace: &StimulusTrace, cycles: u64) -> Result<RunLog, BrainError> {
        let mut q = match self.config.horizon {
            Some(h) => EventQueue::with_horizon(SimTime(h)),
            None => EventQueue::new(),
        };
        q.enable_log();
        let osc = q.line("osc");
        let stim = q.line("stim");
        for frame in trace.frames() {
            q.schedule(frame.time, stim)?;
        }
        if cycles > 0 {
            q.schedule(SimTime::ZERO, osc)?;
        }

        let mut frame_iter = trace.frames().iter();
        let mut due: Option<AttributeVector> = None;
        let mut done = 0u64;
        while done < cycles {
            let Some((_, line)) = q.step() else { break };
            if line == stim {
                due = frame_iter.next().map(|f| f.bits.clone());
            } else if line == osc {
                let sensory = match self.oscillator.phase() {
                    Phase::Sense => due.take(),
                    Phase::Recall => None,
                };
                self.cycle(sensory.as_ref())?;
                done += 1;
                if done < cycles {
                    q.schedule(SimTime(self.oscillator.half_period()), osc)?;
                }
            }
        }
        Ok(RunLog {
            events: std::mem::take(&mut self.log),
            kernel_log: q.log_text(),
            capacity_misses: self.capacity_misses,
        })
    }
}
