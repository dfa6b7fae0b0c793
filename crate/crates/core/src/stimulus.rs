//! Sensory input as a timed trace of attribute frames, standing in for the
//! front end that would decode raw senses into attributes.

use thiserror::Error;

use crate::kernel::SimTime;
use crate::memory::AttributeVector;

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: time {time} is before the previous frame at {prev}")]
    NonMonotone { line: usize, prev: u64, time: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StimulusFrame {
    pub time: SimTime,
    pub bits: AttributeVector,
}

/// Frames in non-decreasing time order. The brain samples the most recent
/// frame at each sense boundary; frames never repeat themselves.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StimulusTrace {
    frames: Vec<StimulusFrame>,
}

impl StimulusTrace {
    pub fn frames(&self) -> &[StimulusFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// One frame per line: `<time>,<K-char binary string>`, char i being
    /// attribute i. Blank lines and `#` comment lines are skipped.
    pub fn parse_text(text: &str, k: usize) -> Result<StimulusTrace, StimulusError> {
        let err = |line: usize, msg: String| StimulusError::Parse { line, msg };
        let mut frames: Vec<StimulusFrame> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((time_str, bits_str)) = line.split_once(',') else {
                return Err(err(lineno, format!("expected '<time>,<bits>', got '{line}'")));
            };
            let time: u64 = time_str
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("bad time '{}'", time_str.trim())))?;
            if let Some(prev) = frames.last() {
                if time < prev.time.0 {
                    return Err(StimulusError::NonMonotone { line: lineno, prev: prev.time.0, time });
                }
            }
            let bits_str = bits_str.trim();
            let bits = AttributeVector::from_bitstring(bits_str)
                .map_err(|e| err(lineno, e.to_string()))?;
            if bits.width() != k {
                return Err(err(
                    lineno,
                    format!("frame has {} attributes, expected {k}", bits.width()),
                ));
            }
            frames.push(StimulusFrame { time: SimTime(time), bits });
        }
        Ok(StimulusTrace { frames })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for frame in &self.frames {
            out.push_str(&format!("{},{}\n", frame.time.0, frame.bits));
        }
        out
    }
}
