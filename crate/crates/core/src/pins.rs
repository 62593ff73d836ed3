//! Oracle-pin manifests: empirically measured extremal ratios committed as
//! regression thresholds in place of unknown implied constants.
//!
//! A pin records the extreme (max or min) a sweep observed. Regression runs
//! re-measure and assert the new value stays within [`PIN_MARGIN`] of the
//! pinned one: observed ≤ pin·1.05 for maxima, observed ≥ pin·0.95 for
//! minima. Pins are never hardcoded guesses; `residue-lab pin-oracle`
//! regenerates the manifest from the same sweeps the checks run.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Relative slack applied when asserting against a pin.
pub const PIN_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PinKind {
    /// The pinned value is a maximum; regressions must not exceed it.
    Max,
    /// The pinned value is a minimum; regressions must not fall below it.
    Min,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pin {
    pub kind: PinKind,
    pub value: f64,
    /// Human-readable sweep parameters and argmax/argmin location.
    pub params: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PinManifest {
    pub version: u32,
    pub pins: BTreeMap<String, Pin>,
}

impl Default for PinManifest {
    fn default() -> Self {
        PinManifest {
            version: 1,
            pins: BTreeMap::new(),
        }
    }
}

impl PinManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text.as_bytes())
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn insert(&mut self, key: &str, kind: PinKind, value: f64, params: String) {
        self.pins.insert(
            key.to_string(),
            Pin {
                kind,
                value,
                params,
            },
        );
    }

    pub fn get(&self, key: &str) -> Result<&Pin> {
        self.pins
            .get(key)
            .ok_or_else(|| Error::Parse(format!("pin {key:?} missing from manifest")))
    }

    /// Checks an observed extreme against a pin with the 5% margin.
    /// Returns the allowed threshold on success.
    pub fn check(&self, key: &str, observed: f64) -> Result<f64> {
        let pin = self.get(key)?;
        let ok = match pin.kind {
            PinKind::Max => {
                let allowed = pin.value * (1.0 + PIN_MARGIN);
                if observed <= allowed {
                    return Ok(allowed);
                }
                false
            }
            PinKind::Min => {
                let allowed = pin.value * (1.0 - PIN_MARGIN);
                if observed >= allowed {
                    return Ok(allowed);
                }
                false
            }
        };
        debug_assert!(!ok);
        Err(Error::PreconditionViolated(format!(
            "pin {key:?} violated: observed {observed}, pinned {} ({:?} with 5% margin)",
            pin.value, pin.kind
        )))
    }
}
