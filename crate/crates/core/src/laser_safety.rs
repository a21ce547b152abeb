//! Eye-safety arithmetic for the spoofer's pulsed laser: pulse energy,
//! maximum permissible exposure, and the smallest beam area that keeps the
//! exposure under it.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BAND_NM: (f64, f64) = (700.0, 1050.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaserParams {
    pub peak_power_w: f64,
    pub pulse_width_s: f64,
    pub wavelength_nm: f64,
    pub exposure_time_s: f64,
    pub pulses_in_exposure: u64,
}

impl Default for LaserParams {
    /// 70 W, 40 ns pulses at 905 nm over a 0.25 s blink, with the
    /// 4000-per-scan pulse rate bounded over three scans.
    fn default() -> Self {
        Self {
            peak_power_w: 70.0,
            pulse_width_s: 40e-9,
            wavelength_nm: 905.0,
            exposure_time_s: 0.25,
            pulses_in_exposure: 12_000,
        }
    }
}

impl LaserParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("peak_power_w", self.peak_power_w),
            ("pulse_width_s", self.pulse_width_s),
            ("wavelength_nm", self.wavelength_nm),
            ("exposure_time_s", self.exposure_time_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.pulses_in_exposure == 0 {
            return Err(Error::InvalidConfig("pulses_in_exposure must be positive".into()));
        }
        Ok(())
    }
}

/// Joules per pulse.
pub fn pulse_energy(p: &LaserParams) -> f64 {
    p.peak_power_w * p.pulse_width_s
}

/// `18 · t^0.75 · 10^((λ − 700)/500)` in J/m².
pub fn mpe(t_s: f64, wavelength_nm: f64) -> Result<f64> {
    if !(wavelength_nm >= BAND_NM.0 && wavelength_nm <= BAND_NM.1) {
        return Err(Error::WavelengthOutOfBand(wavelength_nm));
    }
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(Error::InvalidConfig(format!("exposure time must be positive, got {t_s}")));
    }
    Ok(18.0 * t_s.powf(0.75) * 10f64.powf((wavelength_nm - 700.0) / 500.0))
}

/// Square metres over which `total_energy_j` must spread to stay at `mpe_jm2`.
pub fn min_radiated_area(total_energy_j: f64, mpe_jm2: f64) -> Result<f64> {
    if !(mpe_jm2.is_finite() && mpe_jm2 > 0.0) {
        return Err(Error::InvalidConfig(format!("mpe must be positive, got {mpe_jm2}")));
    }
    if !(total_energy_j.is_finite() && total_energy_j >= 0.0) {
        return Err(Error::InvalidConfig(format!("energy must be non-negative, got {total_energy_j}")));
    }
    Ok(total_energy_j / mpe_jm2)
}

/// Published reference values the calculator is compared against.
pub const PUBLISHED_MPE_JM2: f64 = 6.36;
pub const PUBLISHED_AREA_MM2: f64 = 26.42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyRow {
    pub quantity: String,
    pub value: f64,
    pub unit: String,
    pub note: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub params: LaserParams,
    pub rows: Vec<SafetyRow>,
    pub footnotes: Vec<String>,
}

impl SafetyReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.quantity.len()).max().unwrap_or(0);
        for r in &self.rows {
            let mark = r.note.map(|n| format!(" [{n}]")).unwrap_or_default();
            let _ = writeln!(out, "{:<width$}  {:>14.6e} {}{}", r.quantity, r.value, r.unit, mark);
        }
        for (i, f) in self.footnotes.iter().enumerate() {
            let _ = writeln!(out, "[{}] {}", i + 1, f);
        }
        out
    }
}

pub fn safety_report(p: &LaserParams) -> Result<SafetyReport> {
    p.validate()?;
    let e = pulse_energy(p);
    let m = mpe(p.exposure_time_s, p.wavelength_nm)?;
    let m_no_lambda = mpe(p.exposure_time_s, BAND_NM.0)?;
    let total = e * p.pulses_in_exposure as f64;
    let row = |quantity: &str, value: f64, unit: &str, note: Option<usize>| SafetyRow {
        quantity: quantity.into(),
        value,
        unit: unit.into(),
        note,
    };
    let rows = vec![
        row("pulse_energy", e, "J", None),
        row("mpe", m, "J/m^2", None),
        row("mpe_without_wavelength_factor", m_no_lambda, "J/m^2", Some(1)),
        row("min_area_single_pulse", min_radiated_area(e, m)? * 1e6, "mm^2", Some(2)),
        row("min_area_single_pulse_at_6.36", min_radiated_area(e, PUBLISHED_MPE_JM2)? * 1e6, "mm^2", Some(2)),
        row("energy_in_exposure", total, "J", None),
        row("min_area_exposure", min_radiated_area(total, m)? * 1e6, "mm^2", Some(2)),
    ];
    let footnotes = vec![
        format!(
            "The published MPE of {PUBLISHED_MPE_JM2} J/m^2 equals 18 * t^0.75 without the wavelength factor; \
             the printed formula including 10^((lambda-700)/500) gives {m:.4} J/m^2 here."
        ),
        format!(
            "The published area of {PUBLISHED_AREA_MM2} mm^2 does not follow from one {:.1} uJ pulse over \
             {PUBLISHED_MPE_JM2} J/m^2 ({:.4} mm^2); it matches {:.0} pulses. Values above are plain division.",
            e * 1e6,
            e / PUBLISHED_MPE_JM2 * 1e6,
            PUBLISHED_AREA_MM2 * 1e-6 * PUBLISHED_MPE_JM2 / e,
        ),
    ];
    Ok(SafetyReport {
        params: *p,
        rows,
        footnotes,
    })
}
