//! Discrete-event pulse kernel.
//!
//! Carries timed pulses between logic elements on named lines. A pulse is
//! pure presence: a line either pulses at a tick or it does not, and events
//! carry no payload. Delivery order is total and deterministic: events pop
//! in `(time, sequence)` order, where sequence is insertion order. Two runs
//! that make the same schedule calls see the same delivery sequence.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use thiserror::Error;

/// Simulated time in ticks. One tick is one simulated microsecond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_add(rhs.0).map(SimTime)
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Handle to a pulse-carrying line registered with an [`EventQueue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineId(u32);

impl LineId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A scheduled pulse on a line. Presence is the whole signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseEvent {
    pub time: SimTime,
    pub line: LineId,
    pub seq: u64,
}

impl Ord for PulseEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for PulseEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("pulse on line '{line}' at tick {at} exceeds horizon {horizon}")]
    HorizonExceeded { line: String, at: u64, horizon: u64 },
    #[error("pulse on line '{line}' overflows the tick counter")]
    TimeOverflow { line: String },
}

/// Deterministic event queue with a line registry and an optional
/// delivery log.
///
/// `now` never decreases. Events scheduled at equal times pop in insertion
/// order, so delivery is a pure function of the schedule-call sequence.
#[derive(Debug, Clone)]
pub struct EventQueue {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<PulseEvent>>,
    horizon: SimTime,
    line_names: Vec<String>,
    log: Option<Vec<(SimTime, LineId)>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::with_horizon(SimTime(u64::MAX))
    }

    pub fn with_horizon(horizon: SimTime) -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            horizon,
            line_names: Vec::new(),
            log: None,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    /// Registers a line and returns its handle. Names are for logs and
    /// diagnostics; ids are what the queue orders on.
    pub fn line(&mut self, name: &str) -> LineId {
        let id = LineId(self.line_names.len() as u32);
        self.line_names.push(name.to_owned());
        id
    }

    pub fn line_name(&self, line: LineId) -> &str {
        &self.line_names[line.index()]
    }

    /// Starts recording delivered events. One record per delivery.
    pub fn enable_log(&mut self) {
        if self.log.is_none() {
            self.log = Some(Vec::new());
        }
    }

    pub fn log_records(&self) -> &[(SimTime, LineId)] {
        self.log.as_deref().unwrap_or(&[])
    }

    /// Rendered delivery log, one `tick<TAB>line-name` line per event.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        for &(t, line) in self.log_records() {
            out.push_str(&format!("{}\t{}\n", t, self.line_name(line)));
        }
        out
    }

    /// Enqueues a pulse at `now + delay`.
    pub fn schedule(&mut self, delay: SimTime, line: LineId) -> Result<(), KernelError> {
        let at = self.now.checked_add(delay).ok_or_else(|| KernelError::TimeOverflow {
            line: self.line_name(line).to_owned(),
        })?;
        if at > self.horizon {
            return Err(KernelError::HorizonExceeded {
                line: self.line_name(line).to_owned(),
                at: at.ticks(),
                horizon: self.horizon.ticks(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(PulseEvent { time: at, line, seq }));
        Ok(())
    }

    /// Removes and returns the minimum-(time, sequence) event, advancing
    /// `now` to its time. Empty queue returns `None` and leaves `now` alone.
    pub fn step(&mut self) -> Option<(SimTime, LineId)> {
        let Reverse(ev) = self.heap.pop()?;
        self.now = ev.time;
        if let Some(log) = &mut self.log {
            log.push((ev.time, ev.line));
        }
        Some((ev.time, ev.line))
    }

    /// Delivers every event with time ≤ `t` to `sink` in order, then sets
    /// `now = t`. The sink may schedule further events; those that fall due
    /// within the window are delivered in the same call.
    pub fn run_until<F>(&mut self, t: SimTime, mut sink: F)
    where
        F: FnMut(&mut EventQueue, SimTime, LineId),
    {
        if t < self.now {
            return;
        }
        while let Some(Reverse(ev)) = self.heap.peek() {
            if ev.time > t {
                break;
            }
            let (time, line) = self.step().expect("peeked event must pop");
            sink(self, time, line);
        }
        self.now = t;
    }
}

impl Default for EventQueue {
    fn default() -> Self {
        Self::new()
    }
}
