//! Run configuration: the free parameters of the architecture plus the
//! operational knobs of the simulator, parsed from `key = value` text.
//!
//! Parsing validates everything up front; a `Config` in hand is safe to
//! build a brain from. The seed is mandatory: autonomy must never depend
//! on ambient entropy.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::fabric::PulseTiming;
use crate::memory::AttributeMask;
use crate::priority::{ImportanceMap, PriorityError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("{field}: {msg}")]
    Field { field: &'static str, msg: String },
    #[error("missing required key '{key}'")]
    Missing { key: &'static str },
}

fn field_err(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field { field, msg: msg.into() }
}

/// All knobs of one run. K = `attributes`, N1 = `subpriority_width`,
/// M = `capacity`, R = `repeat_threshold`, D = `half_period`; κ is the
/// importance list's length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub attributes: usize,
    pub subpriority_width: usize,
    pub capacity: usize,
    pub repeat_threshold: u32,
    pub half_period: u64,
    /// Ordered (attribute, weight) pairs, most important first.
    pub importance: Vec<(usize, u64)>,
    /// Attributes whose TRUE bits become search cues.
    pub major_mask: AttributeMask,
    /// Attributes that make a sensory frame significant on sight.
    pub significance_mask: AttributeMask,
    pub pulse: PulseTiming,
    pub seed: u64,
    pub horizon: Option<u64>,
}

impl Config {
    pub fn kappa(&self) -> usize {
        self.importance.len()
    }

    pub fn importance_map(&self) -> Result<ImportanceMap, PriorityError> {
        ImportanceMap::new(&self.importance, self.subpriority_width, self.attributes)
    }

    /// Parses and fully validates. Lines are `key = value`; `#` starts a
    /// comment; blank lines are skipped.
    pub fn parse_text(text: &str) -> Result<Config, ConfigError> {
        let mut raw: Vec<(usize, String, String)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line: lineno, text: content.into() });
            };
            let key = key.trim().to_string();
            if !seen.insert(key.clone()) {
                return Err(ConfigError::DuplicateKey { line: lineno, key });
            }
            raw.push((lineno, key, value.trim().to_string()));
        }

        let mut attributes = None;
        let mut subpriority_width = 3usize;
        let mut capacity = 64usize;
        let mut repeat_threshold = 3u32;
        let mut half_period = 20_000u64;
        let mut importance = None;
        let mut major_mask = None;
        let mut significance_mask = AttributeMask::new();
        let mut pulse = PulseTiming::default();
        let mut seed = None;
        let mut horizon = None;
        let mut kappa_claim = None;

        for (lineno, key, value) in raw {
            match key.as_str() {
                "attributes" => attributes = Some(parse_num("attributes", &value)?),
                "subpriority_width" => {
                    subpriority_width = parse_num("subpriority_width", &value)?
                }
                "capacity" => capacity = parse_num("capacity", &value)?,
                "repeat_threshold" => repeat_threshold = parse_num("repeat_threshold", &value)?,
                "half_period" => half_period = parse_num("half_period", &value)?,
                "importance" => importance = Some(parse_importance(&value)?),
                "major_mask" => major_mask = Some(parse_mask("major_mask", &value)?),
                "significance_mask" => {
                    significance_mask = parse_mask("significance_mask", &value)?
                }
                "pulse_open" => pulse.open_delay = parse_num("pulse_open", &value)?,
                "pulse_bus" => pulse.bus_delay = parse_num("pulse_bus", &value)?,
                "pulse_sample" => pulse.sample_delay = parse_num("pulse_sample", &value)?,
                "seed" => seed = Some(parse_num("seed", &value)?),
                "horizon" => horizon = Some(parse_num("horizon", &value)?),
                "kappa" => kappa_claim = Some(parse_num::<usize>("kappa", &value)?),
                _ => return Err(ConfigError::UnknownKey { line: lineno, key }),
            }
        }

        let attributes = attributes.ok_or(ConfigError::Missing { key: "attributes" })?;
        let importance = importance.ok_or(ConfigError::Missing { key: "importance" })?;
        let seed = seed.ok_or(ConfigError::Missing { key: "seed" })?;
        let major_mask =
            major_mask.unwrap_or_else(|| (0..attributes).collect::<AttributeMask>());

        let config = Config {
            attributes,
            subpriority_width,
            capacity,
            repeat_threshold,
            half_period,
            importance,
            major_mask,
            significance_mask,
            pulse,
            seed,
            horizon,
        };
        config.validate(kappa_claim)?;
        Ok(config)
    }

    fn validate(&self, kappa_claim: Option<usize>) -> Result<(), ConfigError> {
        if self.attributes == 0 {
            return Err(field_err("attributes", "must be at least 1"));
        }
        if self.subpriority_width == 0 {
            return Err(field_err("subpriority_width", "must be at least 1"));
        }
        if self.half_period == 0 {
            return Err(field_err("half_period", "must be at least 1"));
        }
        if self.repeat_threshold == 0 {
            return Err(field_err("repeat_threshold", "must be at least 1"));
        }
        if self.kappa() > self.attributes {
            return Err(field_err(
                "importance",
                format!("kappa {} exceeds attribute count {}", self.kappa(), self.attributes),
            ));
        }
        if let Some(claim) = kappa_claim {
            if claim != self.kappa() {
                return Err(field_err(
                    "kappa",
                    format!("claims {claim} but importance lists {} entries", self.kappa()),
                ));
            }
        }
        self.importance_map().map_err(|e| field_err("importance", e.to_string()))?;
        for (field, mask) in
            [("major_mask", &self.major_mask), ("significance_mask", &self.significance_mask)]
        {
            if let Some(&idx) = mask.iter().find(|&&i| i >= self.attributes) {
                return Err(field_err(
                    field,
                    format!("index {idx} out of range for {} attributes", self.attributes),
                ));
            }
        }
        self.pulse.validate().map_err(|e| field_err("pulse_bus", e.to_string()))?;
        Ok(())
    }

    /// Emits every knob explicitly; `parse_text` of the result reproduces
    /// this config exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("attributes = {}\n", self.attributes));
        out.push_str(&format!("subpriority_width = {}\n", self.subpriority_width));
        out.push_str(&format!("capacity = {}\n", self.capacity));
        out.push_str(&format!("repeat_threshold = {}\n", self.repeat_threshold));
        out.push_str(&format!("half_period = {}\n", self.half_period));
        let imp: Vec<String> =
            self.importance.iter().map(|(a, w)| format!("{a}:{w}")).collect();
        out.push_str(&format!("importance = {}\n", imp.join(", ")));
        out.push_str(&format!("major_mask = {}\n", mask_text(&self.major_mask)));
        out.push_str(&format!("significance_mask = {}\n", mask_text(&self.significance_mask)));
        out.push_str(&format!("pulse_open = {}\n", self.pulse.open_delay));
        out.push_str(&format!("pulse_bus = {}\n", self.pulse.bus_delay));
        out.push_str(&format!("pulse_sample = {}\n", self.pulse.sample_delay));
        out.push_str(&format!("seed = {}\n", self.seed));
        if let Some(h) = self.horizon {
            out.push_str(&format!("horizon = {h}\n"));
        }
        out
    }
}

fn parse_num<T: std::str::FromStr>(field: &'static str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| field_err(field, format!("'{value}' is not a valid number")))
}

/// `attr:weight` pairs, comma separated, most important first.
fn parse_importance(value: &str) -> Result<Vec<(usize, u64)>, ConfigError> {
    let mut entries = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((attr, weight)) = part.split_once(':') else {
            return Err(field_err("importance", format!("'{part}' is not 'attr:weight'")));
        };
        let attr = attr
            .trim()
            .parse()
            .map_err(|_| field_err("importance", format!("bad attribute in '{part}'")))?;
        let weight = weight
            .trim()
            .parse()
            .map_err(|_| field_err("importance", format!("bad weight in '{part}'")))?;
        entries.push((attr, weight));
    }
    Ok(entries)
}

fn parse_mask(field: &'static str, value: &str) -> Result<AttributeMask, ConfigError> {
    let mut mask = AttributeMask::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let idx = part
            .parse()
            .map_err(|_| field_err(field, format!("'{part}' is not an index")))?;
        mask.insert(idx);
    }
    Ok(mask)
}

fn mask_text(mask: &AttributeMask) -> String {
    let parts: Vec<String> = mask.iter().map(|i| i.to_string()).collect();
    parts.join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "attributes = 8\nimportance = 1:7, 2:5, 3:3\nseed = 7\n";

    #[test]
    fn minimal_file_fills_defaults() {
        let config = Config::parse_text(MINIMAL).unwrap();
        assert_eq!(config.attributes, 8);
        assert_eq!(config.subpriority_width, 3);
        assert_eq!(config.capacity, 64);
        assert_eq!(config.repeat_threshold, 3);
        assert_eq!(config.half_period, 20_000);
        assert_eq!(config.kappa(), 3);
        assert_eq!(config.major_mask, (0..8).collect::<AttributeMask>());
        assert!(config.significance_mask.is_empty());
        assert_eq!(config.pulse, PulseTiming::default());
        assert_eq!(config.seed, 7);
        assert_eq!(config.horizon, None);
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let text = "# run setup\nattributes = 4  # K\n\nimportance = 0:3, 1:1\nseed = 1\n";
        let config = Config::parse_text(text).unwrap();
        assert_eq!(config.attributes, 4);
    }

    #[test]
    fn kappa_exceeding_attributes_is_rejected() {
        let text = "attributes = 2\nimportance = 0:3, 1:2, 2:1\nseed = 1\n";
        match Config::parse_text(text) {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "importance"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weight_at_width_boundary_is_rejected() {
        // 2^N1 itself must not fit.
        let text = "attributes = 8\nsubpriority_width = 3\nimportance = 1:8, 2:5\nseed = 1\n";
        match Config::parse_text(text) {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "importance"),
            other => panic!("unexpected {other:?}"),
        }
        let ok = "attributes = 8\nsubpriority_width = 3\nimportance = 1:7, 2:5\nseed = 1\n";
        assert!(Config::parse_text(ok).is_ok());
    }

    #[test]
    fn missing_required_keys_are_named() {
        match Config::parse_text("importance = 1:7, 2:5\nseed = 1\n") {
            Err(ConfigError::Missing { key }) => assert_eq!(key, "attributes"),
            other => panic!("unexpected {other:?}"),
        }
        match Config::parse_text("attributes = 8\nimportance = 1:7, 2:5\n") {
            Err(ConfigError::Missing { key }) => assert_eq!(key, "seed"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_keys_are_named_with_lines() {
        match Config::parse_text("attributes = 8\nwat = 1\n") {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!((line, key.as_str()), (2, "wat"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match Config::parse_text("seed = 1\nseed = 2\n") {
            Err(ConfigError::DuplicateKey { line, key }) => {
                assert_eq!((line, key.as_str()), (2, "seed"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mask_bounds_are_checked() {
        let text = "attributes = 4\nimportance = 0:3, 1:1\nseed = 1\nmajor_mask = 0, 5\n";
        match Config::parse_text(text) {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "major_mask"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kappa_claim_is_cross_checked() {
        let text = "attributes = 8\nimportance = 1:7, 2:5\nseed = 1\nkappa = 3\n";
        match Config::parse_text(text) {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "kappa"),
            other => panic!("unexpected {other:?}"),
        }
        let ok = "attributes = 8\nimportance = 1:7, 2:5\nseed = 1\nkappa = 2\n";
        assert!(Config::parse_text(ok).is_ok());
    }

    #[test]
    fn bad_pulse_timing_is_rejected() {
        let text = "attributes = 8\nimportance = 1:7, 2:5\nseed = 1\npulse_bus = 2\npulse_sample = 2\n";
        match Config::parse_text(text) {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "pulse_bus"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn text_round_trips() {
        let mut config = Config::parse_text(MINIMAL).unwrap();
        config.significance_mask = [1, 2].into_iter().collect();
        config.horizon = Some(1_000_000);
        let text = config.to_text();
        assert_eq!(Config::parse_text(&text).unwrap(), config);
    }
}
