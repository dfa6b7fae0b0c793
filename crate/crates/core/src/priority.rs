//! Per-image toggle registers and the microcoded addition that computes
//! image priorities entirely inside the fabric.
//!
//! Each recalled image gets its own register of L toggles: κ subpriority
//! fields of N1 bits, an accumulator A, and a carry scratchpad C. One shared
//! program of κ−1 adder blocks sums the fields into A; the scheme is a
//! reversible ripple add (carry-compute, sum, carry-uncompute) built from
//! 1- and 2-source instructions only, so C ends all-FALSE and the addend
//! fields survive the run.

use thiserror::Error;

use crate::fabric::{FabricError, Instruction, Program, ToggleFabric, ToggleId};
use crate::memory::{AttributeVector, ImageId, ImageRecord};

#[derive(Debug, Error)]
pub enum PriorityError {
    #[error("subpriority value {value} does not fit in {width} bits")]
    CodeOverflow { value: u64, width: usize },
    #[error("code width {got} differs from register field width {expected}")]
    CodeWidth { expected: usize, got: usize },
    #[error("importance map needs at least 2 entries, got {got}")]
    TooFewEntries { got: usize },
    #[error("importance attribute {attr} appears twice")]
    DuplicateAttribute { attr: usize },
    #[error("importance attribute {attr} out of range for {width} attributes")]
    AttributeOutOfRange { attr: usize, width: usize },
    #[error("importance weights must be non-increasing, saw {prev} then {next}")]
    WeightOrder { prev: u64, next: u64 },
    #[error("expected {expected} subpriority codes, got {got}")]
    CodeCount { expected: usize, got: usize },
    #[error("layout built for kappa={layout_kappa} N1={layout_n1}, asked for kappa={kappa} N1={n1}")]
    LayoutMismatch { layout_kappa: usize, layout_n1: usize, kappa: usize, n1: usize },
    #[error(transparent)]
    Fabric(#[from] FabricError),
}

/// Smallest e with 2^e ≥ k; 0 for k ≤ 1.
pub fn ceil_log2(k: usize) -> usize {
    if k <= 1 {
        0
    } else {
        (usize::BITS - (k - 1).leading_zeros()) as usize
    }
}

/// An N1-bit weight derived from one importance attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubpriorityCode {
    value: u64,
    width: usize,
}

impl SubpriorityCode {
    pub fn new(value: u64, width: usize) -> Result<Self, PriorityError> {
        if width >= 64 || value >= 1u64 << width {
            return Err(PriorityError::CodeOverflow { value, width });
        }
        Ok(SubpriorityCode { value, width })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn width(self) -> usize {
        self.width
    }
}

/// The κ importance attributes in weight order, most important first.
/// Weight order is an invariant: the head entry is the danger attribute.
#[derive(Debug, Clone)]
pub struct ImportanceMap {
    entries: Vec<(usize, SubpriorityCode)>,
    n1: usize,
}

impl ImportanceMap {
    /// `entries` pairs attribute index with weight; `n1` is the code width
    /// and `k` the attribute-vector width.
    pub fn new(entries: &[(usize, u64)], n1: usize, k: usize) -> Result<Self, PriorityError> {
        if entries.len() < 2 {
            return Err(PriorityError::TooFewEntries { got: entries.len() });
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut prev: Option<u64> = None;
        let mut coded = Vec::with_capacity(entries.len());
        for &(attr, weight) in entries {
            if attr >= k {
                return Err(PriorityError::AttributeOutOfRange { attr, width: k });
            }
            if !seen.insert(attr) {
                return Err(PriorityError::DuplicateAttribute { attr });
            }
            if let Some(p) = prev {
                if weight > p {
                    return Err(PriorityError::WeightOrder { prev: p, next: weight });
                }
            }
            prev = Some(weight);
            coded.push((attr, SubpriorityCode::new(weight, n1)?));
        }
        Ok(ImportanceMap { entries: coded, n1 })
    }

    pub fn kappa(&self) -> usize {
        self.entries.len()
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn entries(&self) -> &[(usize, SubpriorityCode)] {
        &self.entries
    }

    /// The attribute carrying the highest weight.
    pub fn danger_attribute(&self) -> usize {
        self.entries[0].0
    }
}

/// Code i = the map's weight i if the image has that attribute TRUE, else 0.
pub fn encode_subpriorities(image: &AttributeVector, map: &ImportanceMap) -> Vec<SubpriorityCode> {
    map.entries
        .iter()
        .map(|&(attr, code)| {
            if attr < image.width() && image.get(attr) {
                code
            } else {
                SubpriorityCode { value: 0, width: map.n1 }
            }
        })
        .collect()
}

/// Toggle-index geometry of one register: κ addend fields X_1..X_κ of N1
/// bits, accumulator A and scratchpad C of W = N1 + ceil(log2 κ) bits each.
/// W is the smallest width in which Σ X_i cannot overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterLayout {
    kappa: usize,
    n1: usize,
    w: usize,
}

impl RegisterLayout {
    pub fn new(kappa: usize, n1: usize) -> Result<Self, PriorityError> {
        if kappa < 2 {
            return Err(PriorityError::TooFewEntries { got: kappa });
        }
        Ok(RegisterLayout { kappa, n1, w: n1 + ceil_log2(kappa) })
    }

    pub fn for_map(map: &ImportanceMap) -> Result<Self, PriorityError> {
        RegisterLayout::new(map.kappa(), map.n1())
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn accumulator_width(&self) -> usize {
        self.w
    }

    /// L, the register's toggle count.
    pub fn total_toggles(&self) -> usize {
        self.kappa * self.n1 + 2 * self.w
    }

    /// Bit `bit` of addend field `field` (both 0-based), little-endian.
    pub fn x_bit(&self, field: usize, bit: usize) -> ToggleId {
        debug_assert!(field < self.kappa && bit < self.n1);
        ToggleId((field * self.n1 + bit) as u32)
    }

    pub fn a_bit(&self, bit: usize) -> ToggleId {
        debug_assert!(bit < self.w);
        ToggleId((self.kappa * self.n1 + bit) as u32)
    }

    pub fn c_bit(&self, bit: usize) -> ToggleId {
        debug_assert!(bit < self.w);
        ToggleId((self.kappa * self.n1 + self.w + bit) as u32)
    }

    pub fn read_x(&self, fabric: &ToggleFabric, field: usize) -> u64 {
        (0..self.n1).fold(0, |acc, bit| {
            acc | (u64::from(fabric.get(self.x_bit(field, bit))) << bit)
        })
    }

    pub fn read_a(&self, fabric: &ToggleFabric) -> u64 {
        (0..self.w).fold(0, |acc, bit| acc | (u64::from(fabric.get(self.a_bit(bit))) << bit))
    }

    pub fn read_c(&self, fabric: &ToggleFabric) -> u64 {
        (0..self.w).fold(0, |acc, bit| acc | (u64::from(fabric.get(self.c_bit(bit))) << bit))
    }
}

/// Builds one register: X fields hold the codes bitwise, A and C all-FALSE.
pub fn load_register(
    codes: &[SubpriorityCode],
    layout: &RegisterLayout,
) -> Result<ToggleFabric, PriorityError> {
    if codes.len() != layout.kappa {
        return Err(PriorityError::CodeCount { expected: layout.kappa, got: codes.len() });
    }
    let mut fabric = ToggleFabric::new(layout.total_toggles());
    for (field, code) in codes.iter().enumerate() {
        if code.width != layout.n1 {
            return Err(PriorityError::CodeWidth { expected: layout.n1, got: code.width });
        }
        for bit in 0..layout.n1 {
            if code.value >> bit & 1 == 1 {
                fabric.set(layout.x_bit(field, bit), true);
            }
        }
    }
    Ok(fabric)
}

/// The adder program, kept block by block so the block structure stays
/// inspectable. Block 1 computes A ← X_1 + X_2; block i adds X_{i+1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderMicrocode {
    blocks: Vec<Program>,
}

impl AdderMicrocode {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Program] {
        &self.blocks
    }

    /// All blocks as one flat program, in execution order.
    pub fn flatten(&self) -> Program {
        let mut prog = Program::default();
        for block in &self.blocks {
            prog.extend(block);
        }
        prog
    }

    /// Blocks separated by blank lines. The whole text still parses as one
    /// flat [`Program`] because its parser skips blanks.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&block.to_text());
        }
        out
    }

    /// Inverse of [`to_text`]: blank lines delimit blocks.
    pub fn parse_text(text: &str) -> Result<AdderMicrocode, FabricError> {
        let mut blocks = Vec::new();
        let mut chunk = String::new();
        for line in text.lines().chain(std::iter::once("")) {
            if line.trim().is_empty() {
                if !chunk.is_empty() {
                    blocks.push(Program::parse_text(&chunk)?);
                    chunk.clear();
                }
            } else {
                chunk.push_str(line);
                chunk.push('\n');
            }
        }
        Ok(AdderMicrocode { blocks })
    }
}

/// Emits the carry gates for ripple position `pos` when adding field
/// `field`: C_pos picks up the majority of (A_pos, X_pos, C_{pos-1}) via
/// 2-source flips. The triple's controls never include its own target, so
/// the same gates uncompute the carry.
fn carry_gates(prog: &mut Program, layout: &RegisterLayout, field: usize, pos: usize) {
    let a = layout.a_bit(pos);
    let c = layout.c_bit(pos);
    if pos == 0 {
        prog.push(Instruction::doubly_controlled(a, layout.x_bit(field, 0), c));
    } else if pos < layout.n1 {
        let x = layout.x_bit(field, pos);
        let c_in = layout.c_bit(pos - 1);
        prog.push(Instruction::doubly_controlled(a, x, c));
        prog.push(Instruction::doubly_controlled(a, c_in, c));
        prog.push(Instruction::doubly_controlled(x, c_in, c));
    } else {
        // The addend has no bit here; the carry is just A_pos AND C_{pos-1}.
        prog.push(Instruction::doubly_controlled(a, layout.c_bit(pos - 1), c));
    }
}

/// One ripple-add block: A ← A + X_field mod 2^W, C restored to all-FALSE,
/// X_field untouched. Descending sum order keeps each position's inputs
/// original until its own carry is uncomputed.
fn ripple_add_block(layout: &RegisterLayout, field: usize) -> Program {
    let w = layout.w;
    let mut prog = Program::default();
    for pos in 0..w.saturating_sub(1) {
        carry_gates(&mut prog, layout, field, pos);
    }
    for pos in (1..w).rev() {
        prog.push(Instruction::controlled(layout.c_bit(pos - 1), layout.a_bit(pos)));
        if pos < layout.n1 {
            prog.push(Instruction::controlled(layout.x_bit(field, pos), layout.a_bit(pos)));
        }
        carry_gates(&mut prog, layout, field, pos - 1);
    }
    prog.push(Instruction::controlled(layout.x_bit(field, 0), layout.a_bit(0)));
    prog
}

/// Generates the κ−1 adder blocks. Block 1 copies X_1 into the empty
/// accumulator with controlled flips and ripple-adds X_2; each later block
/// ripple-adds the next field. Every instruction has at most 2 sources.
pub fn gen_adder_microcode(
    kappa: usize,
    n1: usize,
    layout: &RegisterLayout,
) -> Result<AdderMicrocode, PriorityError> {
    if layout.kappa != kappa || layout.n1 != n1 {
        return Err(PriorityError::LayoutMismatch {
            layout_kappa: layout.kappa,
            layout_n1: layout.n1,
            kappa,
            n1,
        });
    }
    let mut first = Program::default();
    for bit in 0..n1 {
        first.push(Instruction::controlled(layout.x_bit(0, bit), layout.a_bit(bit)));
    }
    first.extend(&ripple_add_block(layout, 1));
    let mut blocks = vec![first];
    for field in 2..kappa {
        blocks.push(ripple_add_block(layout, field));
    }
    Ok(AdderMicrocode { blocks })
}

/// Runs the adder on one loaded register and decodes the accumulator.
pub fn compute_priority(
    register: &mut ToggleFabric,
    microcode: &AdderMicrocode,
    layout: &RegisterLayout,
) -> Result<u64, PriorityError> {
    for block in &microcode.blocks {
        crate::fabric::run_program(register, block)?;
    }
    Ok(layout.read_a(register))
}

/// Registers for one HIT's worth of images, all sharing a layout.
#[derive(Debug, Clone)]
pub struct RegisterBank {
    layout: RegisterLayout,
    rows: Vec<(ImageId, ToggleFabric)>,
}

impl RegisterBank {
    /// One register per record, loaded from its encoded subpriorities.
    pub fn load(
        records: &[ImageRecord],
        map: &ImportanceMap,
        layout: &RegisterLayout,
    ) -> Result<RegisterBank, PriorityError> {
        let mut rows = Vec::with_capacity(records.len());
        for record in records {
            let codes = encode_subpriorities(&record.bits, map);
            rows.push((record.id, load_register(&codes, layout)?));
        }
        Ok(RegisterBank { layout: *layout, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn rows(&self) -> &[(ImageId, ToggleFabric)] {
        &self.rows
    }

    /// Runs the shared microcode over every register. Registers are
    /// independent, so the result is the same as computing each in
    /// isolation, in bank order.
    pub fn compute_all(
        &mut self,
        microcode: &AdderMicrocode,
    ) -> Result<Vec<(ImageId, u64)>, PriorityError> {
        let layout = self.layout;
        self.rows
            .iter_mut()
            .map(|(id, register)| Ok((*id, compute_priority(register, microcode, &layout)?)))
            .collect()
    }
}
