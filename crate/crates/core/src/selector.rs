//! Magnitude comparison over computed priorities and routing of the single
//! highest-priority image into short-term memory.
//!
//! The comparator is itself a toggle program: subtract one value from the
//! other and inspect the final borrow. Selection folds that pairwise
//! comparison over the contender list, breaking ties toward the lowest
//! image id so runs stay reproducible.

use thiserror::Error;

use crate::fabric::{run_program, FabricError, Instruction, Program, ToggleFabric, ToggleId};
use crate::memory::{ImageId, ImageRecord, MemoryError, Origin, StmRow};

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("priority widths differ: {a} vs {b}")]
    WidthMismatch { a: usize, b: usize },
    #[error("priority value {value} does not fit in {width} bits")]
    ValueOverflow { value: u64, width: usize },
    #[error("winner {id} has no recalled image record")]
    MissingWinner { id: ImageId },
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// One image's computed priority, W bits wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriorityValue {
    id: ImageId,
    value: u64,
    width: usize,
}

impl PriorityValue {
    pub fn new(id: ImageId, value: u64, width: usize) -> Result<Self, SelectorError> {
        if width >= 64 || value >= 1u64 << width {
            return Err(SelectorError::ValueOverflow { value, width });
        }
        Ok(PriorityValue { id, value, width })
    }

    pub fn id(self) -> ImageId {
        self.id
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn width(self) -> usize {
        self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    AGreater,
    BGreater,
    Equal,
}

/// Comparator fabric geometry: A in [0, w), B in [w, 2w), borrow chain in
/// [2w, 3w).
fn a_bit(_w: usize, i: usize) -> ToggleId {
    ToggleId(i as u32)
}

fn b_bit(w: usize, i: usize) -> ToggleId {
    ToggleId((w + i) as u32)
}

fn br_bit(w: usize, i: usize) -> ToggleId {
    ToggleId((2 * w + i) as u32)
}

/// Emits the borrow gates for position `i`: BR_i picks up the majority of
/// (NOT A_i, B_i, BR_{i-1}), the borrow out of bit i when computing A − B.
/// Callers flip A around the chain so the fabric holds NOT A in place.
fn borrow_gates(prog: &mut Program, w: usize, i: usize) {
    let (a, b, br) = (a_bit(w, i), b_bit(w, i), br_bit(w, i));
    if i == 0 {
        prog.push(Instruction::doubly_controlled(a, b, br));
    } else {
        let br_in = br_bit(w, i - 1);
        prog.push(Instruction::doubly_controlled(a, b, br));
        prog.push(Instruction::doubly_controlled(a, br_in, br));
        prog.push(Instruction::doubly_controlled(b, br_in, br));
    }
}

/// The subtract-and-inspect program for width `w`. After the run the borrow
/// chain holds the borrows of A − B, A is back to its input value, and each
/// B bit holds the XOR difference A_i ⊕ B_i. A final borrow means B is the
/// larger; otherwise any surviving difference bit means A is.
pub fn comparator_program(w: usize) -> Program {
    let mut prog = Program::default();
    for i in 0..w {
        prog.push(Instruction::flip(a_bit(w, i)));
    }
    for i in 0..w {
        borrow_gates(&mut prog, w, i);
    }
    for i in 0..w {
        prog.push(Instruction::flip(a_bit(w, i)));
    }
    for i in 0..w {
        prog.push(Instruction::controlled(a_bit(w, i), b_bit(w, i)));
    }
    prog
}

/// Compares two equal-width priorities by running the comparator fabric.
pub fn compare(a: PriorityValue, b: PriorityValue) -> Result<Comparison, SelectorError> {
    if a.width != b.width {
        return Err(SelectorError::WidthMismatch { a: a.width, b: b.width });
    }
    let w = a.width;
    if w == 0 {
        return Ok(Comparison::Equal);
    }
    let mut fabric = ToggleFabric::new(3 * w);
    for i in 0..w {
        fabric.set(a_bit(w, i), a.value >> i & 1 == 1);
        fabric.set(b_bit(w, i), b.value >> i & 1 == 1);
    }
    run_program(&mut fabric, &comparator_program(w))?;
    if fabric.get(br_bit(w, w - 1)) {
        Ok(Comparison::BGreater)
    } else if (0..w).any(|i| fabric.get(b_bit(w, i))) {
        Ok(Comparison::AGreater)
    } else {
        Ok(Comparison::Equal)
    }
}

/// The survivor of a selection round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionResult {
    pub winner: ImageId,
    pub priority: u64,
    pub contenders: usize,
}

/// Folds [`compare`] over the list: the winner has maximal value, ties
/// break toward the lowest image id. `None` means no contenders.
pub fn select_max(priorities: &[PriorityValue]) -> Result<Option<SelectionResult>, SelectorError> {
    let Some(&first) = priorities.first() else {
        return Ok(None);
    };
    let mut best = first;
    for &challenger in &priorities[1..] {
        match compare(best, challenger)? {
            Comparison::AGreater => {}
            Comparison::BGreater => best = challenger,
            Comparison::Equal => {
                if challenger.id < best.id {
                    best = challenger;
                }
            }
        }
    }
    Ok(Some(SelectionResult {
        winner: best.id,
        priority: best.value,
        contenders: priorities.len(),
    }))
}

/// Imposes the winner's image on short-term memory, overwriting its current
/// contents. `recalled` is the record list the HIT produced; the winner
/// must be in it.
pub fn route_winner(
    result: &SelectionResult,
    recalled: &[ImageRecord],
    stm: &mut StmRow,
) -> Result<ImageRecord, SelectorError> {
    let record = recalled
        .iter()
        .find(|r| r.id == result.winner)
        .ok_or(SelectorError::MissingWinner { id: result.winner })?
        .clone();
    stm.load(&record.bits, Origin::Recall)?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SimTime;
    use crate::memory::AttributeVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(id: u64, value: u64, width: usize) -> PriorityValue {
        PriorityValue::new(ImageId(id), value, width).unwrap()
    }

    fn oracle(a: u64, b: u64) -> Comparison {
        match a.cmp(&b) {
            std::cmp::Ordering::Greater => Comparison::AGreater,
            std::cmp::Ordering::Less => Comparison::BGreater,
            std::cmp::Ordering::Equal => Comparison::Equal,
        }
    }

    #[test]
    fn compare_examples() {
        assert_eq!(compare(pv(0, 8, 4), pv(1, 5, 4)).unwrap(), Comparison::AGreater);
        assert_eq!(compare(pv(0, 3, 4), pv(1, 3, 4)).unwrap(), Comparison::Equal);
        assert!(matches!(
            compare(pv(0, 1, 3), pv(1, 1, 4)),
            Err(SelectorError::WidthMismatch { a: 3, b: 4 })
        ));
    }

    #[test]
    fn comparator_matches_oracle_exhaustively() {
        for w in 1..=4 {
            for a in 0..1u64 << w {
                for b in 0..1u64 << w {
                    assert_eq!(
                        compare(pv(0, a, w), pv(1, b, w)).unwrap(),
                        oracle(a, b),
                        "w={w} a={a} b={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn comparator_matches_oracle_at_width_8() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2_000 {
            let a = rng.random_range(0..256);
            let b = rng.random_range(0..256);
            assert_eq!(compare(pv(0, a, 8), pv(1, b, 8)).unwrap(), oracle(a, b), "a={a} b={b}");
        }
    }

    #[test]
    fn select_breaks_ties_toward_lowest_id() {
        let list = [pv(0, 8, 4), pv(1, 15, 4), pv(2, 15, 4)];
        let result = select_max(&list).unwrap().unwrap();
        assert_eq!(result.winner, ImageId(1));
        assert_eq!(result.priority, 15);
        assert_eq!(result.contenders, 3);
    }

    #[test]
    fn select_singleton_and_empty() {
        let result = select_max(&[pv(7, 3, 4)]).unwrap().unwrap();
        assert_eq!(result.winner, ImageId(7));
        assert!(select_max(&[]).unwrap().is_none());
    }

    #[test]
    fn select_matches_argmax_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10_000 {
            let n = rng.random_range(1..=8);
            let list: Vec<PriorityValue> = (0..n)
                .map(|i| pv(i as u64, rng.random_range(0..16), 4))
                .collect();
            let result = select_max(&list).unwrap().unwrap();
            let max = list.iter().map(|p| p.value()).max().unwrap();
            let expect_id = list
                .iter()
                .filter(|p| p.value() == max)
                .map(|p| p.id())
                .min()
                .unwrap();
            assert_eq!(result.winner, expect_id);
            assert_eq!(result.priority, max);
            assert!(list.iter().all(|p| result.priority >= p.value()));
        }
    }

    #[test]
    fn select_winner_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let list = [pv(0, 9, 4), pv(1, 15, 4), pv(2, 15, 4), pv(3, 2, 4)];
        for _ in 0..50 {
            let mut shuffled = list;
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let result = select_max(&shuffled).unwrap().unwrap();
            assert_eq!(result.winner, ImageId(1));
        }
    }

    #[test]
    fn route_winner_lands_in_stm() {
        let bits = AttributeVector::from_bitstring("1010").unwrap();
        let recalled = vec![ImageRecord { id: ImageId(4), bits: bits.clone(), memorized_at: SimTime(1) }];
        let result = SelectionResult { winner: ImageId(4), priority: 9, contenders: 1 };
        let mut stm = StmRow::new(4);
        let record = route_winner(&result, &recalled, &mut stm).unwrap();
        assert_eq!(stm.read(), &bits);
        assert_eq!(stm.origin(), Origin::Recall);
        assert_eq!(record.id, ImageId(4));

        let missing = SelectionResult { winner: ImageId(9), priority: 9, contenders: 1 };
        assert!(matches!(
            route_winner(&missing, &recalled, &mut stm),
            Err(SelectorError::MissingWinner { id: ImageId(9) })
        ));
    }
}
