//! Bundled trap and noise presets.
//!
//! * `cs133.json`: Cs in a 1052-nm red-detuned tweezer, radial/axial trap
//!   frequencies 2π·(30.3, 30.3, 2.7) kHz. The trap depth follows from the
//!   1.65 µm waist, `U0 = −Mω_r²w0²/4`. Power and its rms are placeholders
//!   with `σ_P/P0 = 10⁻³`.
//! * `bbt780.json`: Cs in a 780-nm blue-detuned bottle beam trap, 9 mW, with
//!   a residual center potential of 1.5 % of a `k_B·50 µK` barrier and
//!   `σ_P/P0 = 1.5·10⁻⁴`.
//! * `rin_free_running.json`, `rin_40db.json`: fractional intensity noise of
//!   the 1052-nm laser at twice the trap frequencies, free running and with
//!   40 dB of added noise.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::phonon::TrapNoise;
use crate::trap::TrapConfig;

pub const CS133_ODT: &str = "cs133.json";
pub const BBT780: &str = "bbt780.json";
pub const RIN_FREE_RUNNING: &str = "rin_free_running.json";
pub const RIN_40DB: &str = "rin_40db.json";

const BUNDLED: [(&str, &str); 4] = [
    (CS133_ODT, include_str!("../presets/cs133.json")),
    (BBT780, include_str!("../presets/bbt780.json")),
    (RIN_FREE_RUNNING, include_str!("../presets/rin_free_running.json")),
    (RIN_40DB, include_str!("../presets/rin_40db.json")),
];

/// Atom temperature in the tweezer for which the classical rate estimate is
/// evaluated, K.
pub const ODT_TEMPERATURE: f64 = 14e-6;

/// A named set of preset documents, parsed on access.
#[derive(Clone, Debug)]
pub struct Presets {
    docs: BTreeMap<String, String>,
}

impl Presets {
    pub fn bundled() -> Self {
        Presets {
            docs: BUNDLED.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Bundled presets, with any same-named file in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::config(format!("preset directory {} not found", dir.display())));
        }
        let mut p = Presets::bundled();
        for name in BUNDLED.map(|(k, _)| k) {
            let path = dir.join(name);
            if path.is_file() {
                p.docs.insert(name.to_string(), std::fs::read_to_string(&path)?);
            }
        }
        Ok(p)
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        self.docs
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::config(format!("unknown preset {name}")))
    }

    pub fn trap(&self, name: &str) -> Result<TrapConfig> {
        TrapConfig::from_json(self.text(name)?).map_err(|e| Error::config(format!("preset {name}: {e}")))
    }

    pub fn noise(&self, name: &str) -> Result<TrapNoise> {
        TrapNoise::from_json(self.text(name)?).map_err(|e| Error::config(format!("preset {name}: {e}")))
    }
}

pub fn cs133_odt() -> TrapConfig {
    Presets::bundled().trap(CS133_ODT).expect("bundled preset parses")
}

pub fn bbt780() -> TrapConfig {
    Presets::bundled().trap(BBT780).expect("bundled preset parses")
}

pub fn rin_free_running() -> TrapNoise {
    Presets::bundled()
        .noise(RIN_FREE_RUNNING)
        .expect("bundled preset parses")
}

pub fn rin_40db() -> TrapNoise {
    Presets::bundled().noise(RIN_40DB).expect("bundled preset parses")
}
