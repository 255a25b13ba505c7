//! Spin-1 operator algebra and the rotating-wave Hamiltonian of the NV ground
//! state under simultaneous magnetic and acoustic driving.
//!
//! The basis is always ordered `{|+1>, |0>, |-1>}`; [`BASIS`] records the
//! `m_s` value of each index. Hamiltonians are expressed as `H/h` in MHz and
//! times in microseconds, so a coupling of `Ω/2` on an off-diagonal element
//! produces population oscillations at `Ω` MHz.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix3c = Matrix3<C64>;

/// `m_s` quantum number of each basis index.
pub const BASIS: [i8; 3] = [1, 0, -1];
pub const PLUS: usize = 0;
pub const ZERO: usize = 1;
pub const MINUS: usize = 2;

const _: () = assert!(BASIS[PLUS] == 1 && BASIS[ZERO] == 0 && BASIS[MINUS] == -1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinConstants {
    /// Zero-field splitting, GHz.
    pub zfs_ghz: f64,
    /// Electron gyromagnetic ratio, MHz/G.
    pub gamma_e_mhz_per_g: f64,
}

impl Default for SpinConstants {
    fn default() -> Self {
        Self {
            zfs_ghz: 2.870,
            gamma_e_mhz_per_g: 2.802,
        }
    }
}

impl SpinConstants {
    pub fn zfs_mhz(&self) -> f64 {
        self.zfs_ghz * 1e3
    }
}

/// Which single-quantum transition is driven. Selects the sign of the
/// acoustic term in the composed Rabi field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transition {
    /// `|0> <-> |+1>`
    Plus,
    /// `|0> <-> |-1>`
    Minus,
}

impl Transition {
    pub fn sign(self) -> f64 {
        match self {
            Transition::Plus => 1.0,
            Transition::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Transition::Plus => Transition::Minus,
            Transition::Minus => Transition::Plus,
        }
    }
}

impl std::str::FromStr for Transition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" | "+1" => Ok(Transition::Plus),
            "minus" | "-" | "-1" => Ok(Transition::Minus),
            other => Err(Error::validation(format!(
                "unknown transition `{other}` (expected plus or minus)"
            ))),
        }
    }
}

/// Drive fields seen by a single NV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveFields {
    /// Axial magnetic field, G.
    pub b_parallel_g: f64,
    /// Transverse magnetic Rabi field inside the resonator, MHz.
    pub omega_b: C64,
    /// Double-quantum acoustic Rabi field, MHz. The single-quantum acoustic
    /// field is `alpha * omega_sigma2`.
    pub omega_sigma2: C64,
    /// Drive frequency, GHz.
    pub drive_freq_ghz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRatios {
    /// SQ/DQ acoustic field ratio, `b' / (sqrt(2) b)`.
    pub alpha: f64,
    /// Lead-to-resonator scaling of the current-induced magnetic field.
    pub beta: f64,
    /// Spatial phase offset between magnetic and acoustic phasors, rad.
    pub phi: f64,
}

impl CouplingRatios {
    pub fn new(alpha: f64, beta: f64, phi: f64) -> Result<Self> {
        let r = Self { alpha, beta, phi };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.5).contains(&self.alpha) {
            return Err(Error::validation(format!(
                "alpha = {} outside [0, 1.5]",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::validation(format!("beta = {} must be > 0", self.beta)));
        }
        if !(self.phi > -PI - 1e-12 && self.phi <= PI + 1e-12) {
            return Err(Error::validation(format!(
                "phi = {} rad outside (-pi, pi]",
                self.phi
            )));
        }
        Ok(())
    }
}

/// Uniaxial stress along the crystal [001] axis and the susceptibilities that
/// enter the uniaxial Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StressState {
    pub sigma_zz_gpa: f64,
    /// MHz/GPa
    pub a1: f64,
    /// MHz/GPa
    pub b: f64,
    /// MHz/GPa
    pub b_prime: f64,
}

impl StressState {
    /// Diagonal shift of both `|±1>` levels, MHz.
    pub fn axial_shift_mhz(&self) -> f64 {
        self.a1 * self.sigma_zz_gpa
    }

    /// DQ Rabi phasor generated by the stress, `4 b sigma`.
    pub fn dq_rabi(&self) -> f64 {
        4.0 * self.b * self.sigma_zz_gpa
    }

    /// SQ Rabi phasor generated by the stress, `2 sqrt(2) b' sigma`.
    pub fn sq_rabi(&self) -> f64 {
        2.0 * SQRT_2 * self.b_prime * self.sigma_zz_gpa
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub sx: Matrix3c,
    pub sy: Matrix3c,
    pub sz: Matrix3c,
}

pub fn spin1_operators() -> SpinOperators {
    let z = C64::new(0.0, 0.0);
    let r = C64::new(1.0 / SQRT_2, 0.0);
    let i = C64::new(0.0, 1.0 / SQRT_2);
    let one = C64::new(1.0, 0.0);
    SpinOperators {
        sx: Matrix3c::new(z, r, z, r, z, r, z, r, z),
        sy: Matrix3c::new(z, -i, z, i, z, -i, z, i, z),
        sz: Matrix3c::new(one, z, z, z, z, z, z, z, -one),
    }
}

/// Single-quantum and double-quantum Rabi amplitudes (MHz) that fill the
/// off-diagonal elements of the rotating-wave matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RwaCouplings {
    /// `|0> <-> |+1>`
    pub omega_plus: f64,
    /// `|0> <-> |-1>`
    pub omega_minus: f64,
    /// `|+1> <-> |-1>`
    pub omega_dq: f64,
}

/// Lab-frame rotating-wave Hamiltonian with explicit `e^{±iωt}` drive factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwaHamiltonian {
    /// Energy of `|+1>`, MHz.
    pub plus_level_mhz: f64,
    /// Energy of `|-1>`, MHz.
    pub minus_level_mhz: f64,
    pub couplings: RwaCouplings,
    pub drive_freq_mhz: f64,
}

impl RwaHamiltonian {
    pub fn lab_matrix(&self, t_us: f64) -> Result<Matrix3c> {
        if t_us < 0.0 || !t_us.is_finite() {
            return Err(Error::validation(format!("time {t_us} us must be >= 0")));
        }
        let w = 2.0 * PI * self.drive_freq_mhz * t_us;
        let em = C64::from_polar(1.0, -w);
        let ep = C64::from_polar(1.0, w);
        let c = &self.couplings;
        let mut h = Matrix3c::zeros();
        h[(PLUS, PLUS)] = self.plus_level_mhz.into();
        h[(MINUS, MINUS)] = self.minus_level_mhz.into();
        h[(PLUS, ZERO)] = em * (0.5 * c.omega_plus);
        h[(ZERO, PLUS)] = ep * (0.5 * c.omega_plus);
        h[(PLUS, MINUS)] = em * (0.5 * c.omega_dq);
        h[(MINUS, PLUS)] = ep * (0.5 * c.omega_dq);
        h[(ZERO, MINUS)] = ep * (0.5 * c.omega_minus);
        h[(MINUS, ZERO)] = em * (0.5 * c.omega_minus);
        Ok(h)
    }

    /// Transform into the frame `U = diag(e^{iωt}, 1, e^{iωt})`. The SQ
    /// couplings become static; the DQ coupling keeps a residual `e^{-iωt}`.
    pub fn rotating(&self) -> RotatingHamiltonian {
        let c = &self.couplings;
        let mut h = Matrix3c::zeros();
        h[(PLUS, PLUS)] = (self.plus_level_mhz - self.drive_freq_mhz).into();
        h[(MINUS, MINUS)] = (self.minus_level_mhz - self.drive_freq_mhz).into();
        h[(PLUS, ZERO)] = (0.5 * c.omega_plus).into();
        h[(ZERO, PLUS)] = (0.5 * c.omega_plus).into();
        h[(ZERO, MINUS)] = (0.5 * c.omega_minus).into();
        h[(MINUS, ZERO)] = (0.5 * c.omega_minus).into();
        RotatingHamiltonian {
            secular: h,
            dq_half_rabi: 0.5 * c.omega_dq,
            drive_freq_mhz: self.drive_freq_mhz,
        }
    }
}

/// Rotating-frame Hamiltonian: a static part plus the DQ element that still
/// oscillates at the drive frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingHamiltonian {
    pub secular: Matrix3c,
    pub dq_half_rabi: f64,
    pub drive_freq_mhz: f64,
}

impl RotatingHamiltonian {
    pub fn at(&self, t_us: f64) -> Matrix3c {
        let mut h = self.secular;
        if self.dq_half_rabi != 0.0 {
            let e = C64::from_polar(self.dq_half_rabi, -2.0 * PI * self.drive_freq_mhz * t_us);
            h[(PLUS, MINUS)] += e;
            h[(MINUS, PLUS)] += e.conj();
        }
        h
    }
}

/// Compose the RWA Hamiltonian parameters from drive fields and stress.
///
/// The acoustic DQ phasor is `omega_sigma2 + 4 b sigma` and the acoustic SQ
/// phasor `alpha * omega_sigma2 + 2 sqrt(2) b' sigma`. Magnetic and acoustic
/// SQ phasors add as complex numbers before the magnitude is taken.
/// `ratios.beta` and `ratios.phi` are not applied here; `omega_b` is already
/// the in-resonator field.
pub fn rwa_hamiltonian(
    constants: &SpinConstants,
    fields: &DriveFields,
    stress: &StressState,
    ratios: &CouplingRatios,
) -> Result<RwaHamiltonian> {
    let finite = [
        fields.b_parallel_g,
        fields.omega_b.re,
        fields.omega_b.im,
        fields.omega_sigma2.re,
        fields.omega_sigma2.im,
        fields.drive_freq_ghz,
        stress.sigma_zz_gpa,
        stress.a1,
        stress.b,
        stress.b_prime,
    ];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite drive field or stress value"));
    }
    if fields.drive_freq_ghz <= 0.0 {
        return Err(Error::validation("drive frequency must be set and positive"));
    }
    let acoustic_dq = fields.omega_sigma2 + stress.dq_rabi();
    let acoustic_sq = fields.omega_sigma2 * ratios.alpha + stress.sq_rabi();
    let zeeman = constants.gamma_e_mhz_per_g * fields.b_parallel_g;
    let d = constants.zfs_mhz() + stress.axial_shift_mhz();
    Ok(RwaHamiltonian {
        plus_level_mhz: d + zeeman,
        minus_level_mhz: d - zeeman,
        couplings: RwaCouplings {
            omega_plus: (fields.omega_b + acoustic_sq).norm(),
            omega_minus: (fields.omega_b - acoustic_sq).norm(),
            omega_dq: acoustic_dq.norm(),
        },
        drive_freq_mhz: fields.drive_freq_ghz * 1e3,
    })
}

pub fn build_rwa_hamiltonian(
    constants: &SpinConstants,
    fields: &DriveFields,
    stress: &StressState,
    ratios: &CouplingRatios,
    t_us: f64,
) -> Result<Matrix3c> {
    rwa_hamiltonian(constants, fields, stress, ratios)?.lab_matrix(t_us)
}

/// Local SQ Rabi phasor of an NV at depth `z` in a standing acoustic wave:
/// `beta * lead * e^{i phi} ± alpha * sigma2 * cos(2 pi z / lambda)`.
pub fn compose_sq_rabi(
    omega_b_lead: C64,
    omega_sigma2: C64,
    ratios: &CouplingRatios,
    z_um: f64,
    wavelength_um: f64,
    transition: Transition,
) -> Result<C64> {
    if !(wavelength_um > 0.0) {
        return Err(Error::validation(format!(
            "wavelength {wavelength_um} um must be > 0"
        )));
    }
    let quarter = wavelength_um / 4.0;
    if z_um < -1e-12 || z_um > quarter * (1.0 + 1e-12) {
        return Err(Error::validation(format!(
            "z = {z_um} um outside [0, lambda/4 = {quarter}]"
        )));
    }
    let magnetic = omega_b_lead * ratios.beta * C64::from_polar(1.0, ratios.phi);
    let standing = (2.0 * PI * z_um / wavelength_um).cos();
    Ok(magnetic + omega_sigma2 * (transition.sign() * ratios.alpha * standing))
}

/// Max absolute row sum; bounds the spectral radius.
pub fn norm_bound(h: &Matrix3c) -> f64 {
    (0..3)
        .map(|r| (0..3).map(|c| h[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
