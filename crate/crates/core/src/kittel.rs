//! Kittel dispersion for an in-plane magnetized film, `w = gamma * sqrt(H (H + 4 pi M))`.
//!
//! `gamma` carries the model frequency unit per oersted; `H` is in oersted and
//! `4 pi M` in gauss. The built-in presets use the tabulated YIG and permalloy
//! constants as given. Note the permalloy gyromagnetic ratio there is an order
//! of magnitude below the YIG value, unlike textbook figures; the presets keep
//! it verbatim so simulated crossings sit where the reference spectra put them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magnetic material parameters entering the Kittel relation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KittelMaterial {
    pub gamma: f64,
    pub four_pi_m: f64,
}

impl KittelMaterial {
    pub const YIG: KittelMaterial = KittelMaterial {
        gamma: 1.76e-2,
        four_pi_m: 1750.0,
    };

    pub const PERMALLOY: KittelMaterial = KittelMaterial {
        gamma: 2.94e-3,
        four_pi_m: 10900.0,
    };

    pub fn new(gamma: f64, four_pi_m: f64) -> Result<Self> {
        let m = KittelMaterial { gamma, four_pi_m };
        m.validate()?;
        Ok(m)
    }

    /// Looks up a built-in preset by name (`yig`, `permalloy`/`py`).
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "yig" => Some(Self::YIG),
            "permalloy" | "py" | "nife" => Some(Self::PERMALLOY),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidMaterial(format!(
                "gamma must be finite and > 0, got {}",
                self.gamma
            )));
        }
        if !(self.four_pi_m.is_finite() && self.four_pi_m > 0.0) {
            return Err(Error::InvalidMaterial(format!(
                "4piM must be finite and > 0, got {}",
                self.four_pi_m
            )));
        }
        Ok(())
    }
}

/// Magnon resonance frequency at applied field `h` (Oe).
pub fn kittel_frequency(material: &KittelMaterial, h: f64) -> Result<f64> {
    if h < 0.0 || h.is_nan() {
        return Err(Error::NegativeField(h));
    }
    Ok(material.gamma * (h * (h + material.four_pi_m)).sqrt())
}

/// The field at which the Kittel mode sits at `omega`.
///
/// Uses the rationalized root `2 w^2 / (g^2 (4piM + sqrt(4piM^2 + 4 w^2 / g^2)))`,
/// which avoids cancellation when `omega` is small against `gamma * 4piM`.
pub fn field_for_frequency(material: &KittelMaterial, omega: f64) -> Result<f64> {
    if omega < 0.0 || omega.is_nan() {
        return Err(Error::NegativeFrequency(omega));
    }
    let m = material.four_pi_m;
    let w2 = (omega / material.gamma).powi(2);
    Ok(2.0 * w2 / (m + (m * m + 4.0 * w2).sqrt()))
}
