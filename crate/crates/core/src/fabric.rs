//! Controlled-toggle fabric: the toggle array, instruction semantics, and
//! the shared inhibitory bus.
//!
//! An instruction names source toggles and target toggles. Sources gate the
//! bus: every FALSE source pulses the bus during the instruction window, and
//! any bus pulse vetoes the flip. Targets flip only when the bus stays at
//! rest, which happens exactly when all sources are TRUE. An empty source
//! set leaves the bus trivially at rest, so a bare target always flips.
//!
//! Two evaluators are provided. [`exec_logical`] applies the state change
//! atomically. [`exec_pulse`] plays the bus protocol out as timed pulse
//! events on an [`EventQueue`]. They must agree on every instruction and
//! state, which the test suite checks exhaustively at small sizes.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::kernel::{EventQueue, KernelError, LineId, SimTime};

/// Index of one toggle within a fabric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ToggleId(pub u32);

impl ToggleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error)]
pub enum FabricError {
    #[error("toggle {0} appears as both source and target")]
    SourceTargetOverlap(u32),
    #[error("instruction has no targets")]
    EmptyTargets,
    #[error("toggle id {id} out of range for fabric of {size}")]
    OutOfRange { id: u32, size: usize },
    #[error("pulse circuit covers {circuit} toggles but fabric has {fabric}")]
    CircuitMismatch { circuit: usize, fabric: usize },
    #[error("bus delay {bus} must be shorter than sample delay {sample}")]
    BadTiming { bus: u64, sample: u64 },
    #[error("program line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// An array of controlled toggles. Each toggle holds one bit of state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToggleFabric {
    states: Vec<bool>,
}

impl ToggleFabric {
    /// All toggles start FALSE.
    pub fn new(size: usize) -> Self {
        ToggleFabric { states: vec![false; size] }
    }

    pub fn from_states(states: Vec<bool>) -> Self {
        ToggleFabric { states }
    }

    pub fn size(&self) -> usize {
        self.states.len()
    }

    pub fn get(&self, id: ToggleId) -> bool {
        self.states[id.index()]
    }

    pub fn set(&mut self, id: ToggleId, value: bool) {
        self.states[id.index()] = value;
    }

    pub fn flip(&mut self, id: ToggleId) {
        self.states[id.index()] ^= true;
    }

    pub fn states(&self) -> &[bool] {
        &self.states
    }
}

/// One micro-operation: test the sources, flip the targets if the bus
/// stays at rest. Sources and targets are disjoint sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    sources: Vec<ToggleId>,
    targets: Vec<ToggleId>,
}

impl Instruction {
    pub fn new(
        mut sources: Vec<ToggleId>,
        mut targets: Vec<ToggleId>,
    ) -> Result<Self, FabricError> {
        sources.sort_unstable();
        sources.dedup();
        targets.sort_unstable();
        targets.dedup();
        if targets.is_empty() {
            return Err(FabricError::EmptyTargets);
        }
        if let Some(id) = sources.iter().find(|s| targets.binary_search(s).is_ok()) {
            return Err(FabricError::SourceTargetOverlap(id.0));
        }
        Ok(Instruction { sources, targets })
    }

    /// Unconditional flip of one toggle.
    pub fn flip(target: ToggleId) -> Self {
        Instruction { sources: vec![], targets: vec![target] }
    }

    /// Single-source controlled flip.
    pub fn controlled(source: ToggleId, target: ToggleId) -> Self {
        Instruction::new(vec![source], vec![target]).expect("distinct ids")
    }

    /// Two-source controlled flip.
    pub fn doubly_controlled(a: ToggleId, b: ToggleId, target: ToggleId) -> Self {
        Instruction::new(vec![a, b], vec![target]).expect("distinct ids")
    }

    pub fn sources(&self) -> &[ToggleId] {
        &self.sources
    }

    pub fn targets(&self) -> &[ToggleId] {
        &self.targets
    }

    pub fn validate_for(&self, fabric: &ToggleFabric) -> Result<(), FabricError> {
        for id in self.sources.iter().chain(&self.targets) {
            if id.index() >= fabric.size() {
                return Err(FabricError::OutOfRange { id: id.0, size: fabric.size() });
            }
        }
        Ok(())
    }
}

/// Ordered instruction sequence. Every instruction is its own inverse, so
/// running a program twice with the order reversed in between restores the
/// fabric.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    instructions: Vec<Instruction>,
}

impl Program {
    pub fn new(instructions: Vec<Instruction>) -> Self {
        Program { instructions }
    }

    pub fn push(&mut self, instr: Instruction) {
        self.instructions.push(instr);
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn extend(&mut self, other: &Program) {
        self.instructions.extend(other.instructions.iter().cloned());
    }

    /// Same instructions in reverse order; undoes this program.
    pub fn inverted(&self) -> Program {
        Program { instructions: self.instructions.iter().rev().cloned().collect() }
    }

    /// One instruction per line: `SRC i j ... ; TGT k l ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for instr in &self.instructions {
            out.push_str("SRC");
            for s in &instr.sources {
                write!(out, " {}", s.0).unwrap();
            }
            out.push_str(" ; TGT");
            for t in &instr.targets {
                write!(out, " {}", t.0).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text form. Blank lines are skipped.
    pub fn parse_text(text: &str) -> Result<Program, FabricError> {
        let mut instructions = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            instructions.push(parse_instruction(idx + 1, line)?);
        }
        Ok(Program { instructions })
    }
}

fn parse_instruction(lineno: usize, line: &str) -> Result<Instruction, FabricError> {
    let err = |msg: &str| FabricError::Parse { line: lineno, msg: msg.to_owned() };
    let (src_part, tgt_part) =
        line.split_once(';').ok_or_else(|| err("expected 'SRC ... ; TGT ...'"))?;
    let parse_ids = |part: &str, keyword: &str| -> Result<Vec<ToggleId>, FabricError> {
        let mut tokens = part.split_whitespace();
        match tokens.next() {
            Some(k) if k == keyword => {}
            _ => return Err(err(&format!("expected '{keyword}'"))),
        }
        tokens
            .map(|t| {
                t.parse::<u32>()
                    .map(ToggleId)
                    .map_err(|_| err(&format!("bad toggle id '{t}'")))
            })
            .collect()
    };
    let sources = parse_ids(src_part, "SRC")?;
    let targets = parse_ids(tgt_part, "TGT")?;
    Instruction::new(sources, targets)
        .map_err(|e| err(&e.to_string()))
}

/// Atomic evaluator: every target flips iff all sources are TRUE.
pub fn exec_logical(fabric: &mut ToggleFabric, instr: &Instruction) -> Result<(), FabricError> {
    instr.validate_for(fabric)?;
    let enable = instr.sources().iter().all(|&s| fabric.get(s));
    if enable {
        for &t in instr.targets() {
            fabric.flip(t);
        }
    }
    Ok(())
}

/// Runs a program front to back with the atomic evaluator.
pub fn run_program(fabric: &mut ToggleFabric, prog: &Program) -> Result<(), FabricError> {
    for instr in prog.instructions() {
        exec_logical(fabric, instr)?;
    }
    Ok(())
}

/// Timing constants for the pulse protocol, in ticks.
///
/// A FALSE source fires `open_delay` after the instruction starts; its pulse
/// reaches the bus `bus_delay` later; targets sample the bus at
/// `open_delay + sample_delay`. Sampling must come after the last possible
/// bus arrival, so `bus_delay < sample_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseTiming {
    pub open_delay: u64,
    pub bus_delay: u64,
    pub sample_delay: u64,
}

impl Default for PulseTiming {
    fn default() -> Self {
        PulseTiming { open_delay: 0, bus_delay: 1, sample_delay: 2 }
    }
}

impl PulseTiming {
    pub fn validate(&self) -> Result<(), FabricError> {
        if self.bus_delay >= self.sample_delay {
            return Err(FabricError::BadTiming {
                bus: self.bus_delay,
                sample: self.sample_delay,
            });
        }
        Ok(())
    }

    /// Ticks one instruction occupies on the timeline.
    pub fn span(&self) -> u64 {
        self.open_delay + self.sample_delay
    }
}

enum PulseRole {
    Bus,
    SourceFire,
    TargetSample(ToggleId),
}

/// The pulse-level wiring of one fabric: a single bus line, one firing line
/// per toggle, and one sampling line per toggle.
pub struct PulseCircuit {
    size: usize,
    bus: LineId,
    src: Vec<LineId>,
    smp: Vec<LineId>,
    roles: HashMap<LineId, usize>,
}

impl PulseCircuit {
    pub fn new(q: &mut EventQueue, size: usize) -> Self {
        let bus = q.line("bus");
        let src: Vec<LineId> = (0..size).map(|i| q.line(&format!("src.{i}"))).collect();
        let smp: Vec<LineId> = (0..size).map(|i| q.line(&format!("smp.{i}"))).collect();
        let mut roles = HashMap::new();
        roles.insert(bus, 0);
        for (i, &l) in src.iter().enumerate() {
            roles.insert(l, 1 + i);
        }
        for (i, &l) in smp.iter().enumerate() {
            roles.insert(l, 1 + size + i);
        }
        PulseCircuit { size, bus, src, smp, roles }
    }

    pub fn bus_line(&self) -> LineId {
        self.bus
    }

    fn role(&self, line: LineId) -> Option<PulseRole> {
        let &slot = self.roles.get(&line)?;
        Some(if slot == 0 {
            PulseRole::Bus
        } else if slot <= self.size {
            PulseRole::SourceFire
        } else {
            PulseRole::TargetSample(ToggleId((slot - 1 - self.size) as u32))
        })
    }
}

/// Pulse-level evaluator. Schedules the instruction's pulse protocol on the
/// kernel and drains it: FALSE sources fire at window open, their pulses
/// disturb the bus, and each target flips at sample time iff the bus stayed
/// at rest. The final fabric state equals [`exec_logical`] on the same
/// instruction and state.
pub fn exec_pulse(
    fabric: &mut ToggleFabric,
    instr: &Instruction,
    q: &mut EventQueue,
    circuit: &PulseCircuit,
    timing: &PulseTiming,
) -> Result<(), FabricError> {
    instr.validate_for(fabric)?;
    timing.validate()?;
    if circuit.size != fabric.size() {
        return Err(FabricError::CircuitMismatch {
            circuit: circuit.size,
            fabric: fabric.size(),
        });
    }

    for &s in instr.sources() {
        if !fabric.get(s) {
            q.schedule(SimTime(timing.open_delay), circuit.src[s.index()])?;
        }
    }
    for &t in instr.targets() {
        q.schedule(SimTime(timing.open_delay + timing.sample_delay), circuit.smp[t.index()])?;
    }

    let window_end = q.now() + SimTime(timing.span());
    let bus_delay = SimTime(timing.bus_delay);
    let mut bus_disturbed = false;
    let mut deferred: Result<(), KernelError> = Ok(());
    q.run_until(window_end, |q, _time, line| match circuit.role(line) {
        Some(PulseRole::SourceFire) => {
            if let Err(e) = q.schedule(bus_delay, circuit.bus) {
                deferred = Err(e);
            }
        }
        Some(PulseRole::Bus) => bus_disturbed = true,
        Some(PulseRole::TargetSample(t)) => {
            if !bus_disturbed {
                fabric.flip(t);
            }
        }
        None => {}
    });
    deferred?;
    Ok(())
}

/// Runs a program instruction by instruction under the pulse protocol.
pub fn run_program_pulse(
    fabric: &mut ToggleFabric,
    prog: &Program,
    q: &mut EventQueue,
    circuit: &PulseCircuit,
    timing: &PulseTiming,
) -> Result<(), FabricError> {
    for instr in prog.instructions() {
        exec_pulse(fabric, instr, q, circuit, timing)?;
    }
    Ok(())
}
