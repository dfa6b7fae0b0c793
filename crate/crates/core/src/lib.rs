//! Deterministic simulator of a brain built from controlled toggles.
//!
//! The machine under simulation is a network of one-bit neurons that flip
//! only when all of their controlling neurons are TRUE, arranged into:
//!
//! - a discrete-event [`kernel`] carrying timed pulses between elements,
//! - a toggle [`fabric`] executing source/target instructions, with an
//!   atomic evaluator and a pulse-level evaluator that provably agree,
//! - [`priority`] registers that sum per-attribute subpriority codes into
//!   an image priority using reversible microcoded addition,
//! - an associative long-term [`memory`] answering conjunctive cue
//!   searches, with novelty-gated memorization and a background cue editor,
//! - a [`selector`] that compares priorities inside the fabric and routes
//!   the winner into short-term memory,
//! - and the [`brain`] loop alternating sensing and recalling on an
//!   oscillator, the autonomous front end tying it all together.
//!
//! Everything is reproducible: time is integer ticks, randomness comes
//! from one seeded stream, and a run's log is a pure function of
//! (config, stimuli, seed).

pub mod brain;
pub mod config;
pub mod fabric;
pub mod kernel;
pub mod memory;
pub mod priority;
pub mod selector;
pub mod stimulus;

pub use brain::{ActionEvent, Brain, BrainError, LogEvent, Oscillator, Phase, RunLog};
pub use config::{Config, ConfigError};
pub use fabric::{
    exec_logical, exec_pulse, run_program, run_program_pulse, FabricError, Instruction,
    Program, PulseCircuit, PulseTiming, ToggleFabric, ToggleId,
};
pub use kernel::{EventQueue, KernelError, LineId, PulseEvent, SimTime};
pub use memory::{
    cue_editor_step, derive_cues, AttributeMask, AttributeVector, CueSet, ImageId,
    ImageRecord, LtmStore, MemorizeOutcome, MemoryError, NoveltyState, Origin,
    SearchOutcome, StmRow,
};
pub use priority::{
    ceil_log2, compute_priority, encode_subpriorities, gen_adder_microcode, load_register,
    AdderMicrocode, ImportanceMap, PriorityError, RegisterBank, RegisterLayout,
    SubpriorityCode,
};
pub use selector::{
    compare, comparator_program, route_winner, select_max, Comparison, PriorityValue,
    SelectionResult, SelectorError,
};
pub use stimulus::{StimulusError, StimulusFrame, StimulusTrace};
