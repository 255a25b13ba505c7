//! Modified Butterworth-Van Dyke equivalent circuit.
//!
//! Topology: `Rs` in series with the parallel combination of the motional
//! branch (`Rm`, `Lm`, `Cm` in series) and the static branch (`R0`, `C0` in
//! series). The source voltage is referenced at the network input, before
//! `Rs`, and normalized to 1 V; its scale is absorbed into `B`.
//!
//! The current-induced magnetic Rabi field is `A |Y|` and the acoustic DQ Rabi
//! field is `B |V_Cm|`.

mod fit;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::C64;

pub use fit::{fit, FitOptions, MbvdFit, GAUGE_DIRECTION};

/// Eight-parameter circuit with the scalings to Rabi fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbvdParams {
    #[serde(rename = "A_MHz_per_S")]
    pub a_mhz_per_s: f64,
    #[serde(rename = "B_kHz_per_V")]
    pub b_khz_per_v: f64,
    #[serde(rename = "Rm_ohm")]
    pub rm_ohm: f64,
    #[serde(rename = "Lm_uH")]
    pub lm_uh: f64,
    #[serde(rename = "Cm_fF")]
    pub cm_ff: f64,
    #[serde(rename = "R0_ohm")]
    pub r0_ohm: f64,
    #[serde(rename = "C0_pF")]
    pub c0_pf: f64,
    #[serde(rename = "Rs_ohm")]
    pub rs_ohm: f64,
}

pub const PARAM_NAMES: [&str; 8] = [
    "A_MHz_per_S",
    "B_kHz_per_V",
    "Rm_ohm",
    "Lm_uH",
    "Cm_fF",
    "R0_ohm",
    "C0_pF",
    "Rs_ohm",
];

impl MbvdParams {
    /// Fitted set for the 3.132 GHz mode.
    pub fn mode_3132() -> Self {
        Self {
            a_mhz_per_s: 235.0,
            b_khz_per_v: 2.6,
            rm_ohm: 219.0,
            lm_uh: 13.0,
            cm_ff: 0.20,
            r0_ohm: 46.0,
            c0_pf: 0.20,
            rs_ohm: 98.0,
        }
    }

    /// Fitted set for the 2.732 GHz mode.
    pub fn mode_2732() -> Self {
        Self {
            a_mhz_per_s: 624.0,
            b_khz_per_v: 4.9,
            rm_ohm: 69.0,
            lm_uh: 10.0,
            cm_ff: 0.33,
            r0_ohm: 149.0,
            c0_pf: 0.13,
            rs_ohm: 732.0,
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.a_mhz_per_s,
            self.b_khz_per_v,
            self.rm_ohm,
            self.lm_uh,
            self.cm_ff,
            self.r0_ohm,
            self.c0_pf,
            self.rs_ohm,
        ]
    }

    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            a_mhz_per_s: v[0],
            b_khz_per_v: v[1],
            rm_ohm: v[2],
            lm_uh: v[3],
            cm_ff: v[4],
            r0_ohm: v[5],
            c0_pf: v[6],
            rs_ohm: v[7],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in PARAM_NAMES.iter().zip(self.to_array()) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }

    /// Series resonance `1 / (2 pi sqrt(Lm Cm))`, GHz.
    pub fn resonance_ghz(&self) -> f64 {
        1.0 / (2.0 * PI * (self.lm_uh * 1e-6 * self.cm_ff * 1e-15).sqrt()) / 1e9
    }

    /// Motional quality factor `2 pi f_r Lm / Rm`.
    pub fn quality_factor(&self) -> f64 {
        2.0 * PI * self.resonance_ghz() * 1e9 * self.lm_uh * 1e-6 / self.rm_ohm
    }

    fn impedances(&self, f_ghz: f64) -> Result<(C64, C64)> {
        self.validate()?;
        if !(f_ghz > 0.0 && f_ghz.is_finite()) {
            return Err(Error::validation(format!("frequency {f_ghz} GHz must be > 0")));
        }
        let w = 2.0 * PI * f_ghz * 1e9;
        let j = C64::new(0.0, 1.0);
        let zm = C64::new(self.rm_ohm, 0.0) + j * w * self.lm_uh * 1e-6
            - j / (w * self.cm_ff * 1e-15);
        let z0 = C64::new(self.r0_ohm, 0.0) - j / (w * self.c0_pf * 1e-12);
        Ok((zm, z0))
    }
}

/// Input admittance, S.
pub fn admittance(params: &MbvdParams, f_ghz: f64) -> Result<C64> {
    let (zm, z0) = params.impedances(f_ghz)?;
    let zp = zm * z0 / (zm + z0);
    Ok(1.0 / (zp + params.rs_ohm))
}

/// Complex voltage across `Cm` for a source amplitude `v_source`, V.
pub fn motional_voltage(params: &MbvdParams, f_ghz: f64, v_source: f64) -> Result<C64> {
    let (zm, z0) = params.impedances(f_ghz)?;
    let zp = zm * z0 / (zm + z0);
    let v_branch = zp / (zp + params.rs_ohm) * v_source;
    let w = 2.0 * PI * f_ghz * 1e9;
    let z_cm = C64::new(0.0, -1.0 / (w * params.cm_ff * 1e-15));
    Ok(v_branch * z_cm / zm)
}

/// Complex lead magnetic Rabi field `A Y(f)`, MHz.
pub fn magnetic_rabi(params: &MbvdParams, f_ghz: f64) -> Result<C64> {
    Ok(admittance(params, f_ghz)? * params.a_mhz_per_s)
}

/// Complex DQ acoustic Rabi field `B V(f)`, MHz (B in kHz/V, 1 V source).
pub fn acoustic_rabi(params: &MbvdParams, f_ghz: f64) -> Result<C64> {
    Ok(motional_voltage(params, f_ghz, 1.0)? * (params.b_khz_per_v * 1e-3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    pub f_r_ghz: f64,
    pub f_a_ghz: f64,
    pub q: f64,
}

/// `f_r` and `Q` in closed form; `f_a` as the first `|Y|` minimum above `f_r`.
pub fn derived_quantities(params: &MbvdParams) -> Result<DerivedQuantities> {
    params.validate()?;
    let f_r = params.resonance_ghz();
    let q = params.quality_factor();
    let f_a = antiresonance_ghz(params, f_r)?;
    Ok(DerivedQuantities {
        f_r_ghz: f_r,
        f_a_ghz: f_a,
        q,
    })
}

fn antiresonance_ghz(params: &MbvdParams, f_r: f64) -> Result<f64> {
    // scan upward from f_r over 5% of f_r, at a resolution of f_r / (20 Q)
    let q = params.quality_factor().max(10.0);
    let step = f_r / (20.0 * q);
    let n = ((0.05 * f_r / step).ceil() as usize).clamp(100, 200_000);
    let mag = |f: f64| admittance(params, f).map(|y| y.norm());
    let mut prev = mag(f_r)?;
    let mut cur = mag(f_r + step)?;
    for k in 2..=n {
        let f_next = f_r + k as f64 * step;
        let next = mag(f_next)?;
        if cur < prev && cur <= next {
            return golden_min(&mag, f_next - 2.0 * step, f_next);
        }
        prev = cur;
        cur = next;
    }
    Err(Error::Convergence {
        what: "anti-resonance search",
        detail: format!("no |Y| minimum within 5% above f_r = {f_r} GHz"),
    })
}

fn golden_min(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Rabi-field amplitude (and optionally phase) versus drive frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    pub freq_ghz: Vec<f64>,
    pub amplitude_mhz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_rad: Option<Vec<f64>>,
}

impl ComplexSpectrum {
    pub fn amplitude_only(freq_ghz: Vec<f64>, amplitude_mhz: Vec<f64>) -> Result<Self> {
        let s = Self {
            freq_ghz,
            amplitude_mhz,
            phase_rad: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_phasors(freq_ghz: Vec<f64>, values: &[C64]) -> Result<Self> {
        let s = Self {
            freq_ghz,
            amplitude_mhz: values.iter().map(|v| v.norm()).collect(),
            phase_rad: Some(values.iter().map(|v| v.arg()).collect()),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.freq_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_ghz.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitude_mhz.len() != self.freq_ghz.len() {
            return Err(Error::validation("spectrum arrays differ in length"));
        }
        if let Some(p) = &self.phase_rad {
            if p.len() != self.freq_ghz.len() {
                return Err(Error::validation("spectrum phase array differs in length"));
            }
        }
        if self.freq_ghz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("spectrum frequencies must be strictly increasing"));
        }
        if self
            .amplitude_mhz
            .iter()
            .any(|a| !(a.is_finite() && *a >= 0.0))
        {
            return Err(Error::validation("spectrum amplitudes must be finite and >= 0"));
        }
        Ok(())
    }

    /// Keep only samples inside `[lo, hi]` GHz.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.freq_ghz[i] >= lo && self.freq_ghz[i] <= hi)
            .collect();
        Self {
            freq_ghz: keep.iter().map(|&i| self.freq_ghz[i]).collect(),
            amplitude_mhz: keep.iter().map(|&i| self.amplitude_mhz[i]).collect(),
            phase_rad: self
                .phase_rad
                .as_ref()
                .map(|p| keep.iter().map(|&i| p[i]).collect()),
        }
    }
}

/// Unwrap a phase sequence so adjacent samples never jump by more than pi.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let prev = phase[i - 1];
            let d = p - prev;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(p + offset);
    }
    out
}
