//! Lindblad evolution of the 3-level density matrix with pure dephasing.
//!
//! `d rho/dt = -2 pi i [H, rho] + sum_i g_i (P_i rho P_i - {P_i, rho}/2)` with
//! `P_i = |i><i|`, `H` in MHz and time in microseconds. Coherence `rho_jk`
//! decays at `(g_j + g_k)/2`; populations are untouched (no T1 channel).
//!
//! Two integrators share the same generator:
//! * [`evolve`] is a fixed-step RK4 scheme for arbitrary `H(t)`.
//! * [`StaticPropagator`] exponentiates the 9x9 Liouvillian once for a
//!   time-independent `H`; the spectrogram and scan paths use it.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{norm_bound, Matrix3c, RotatingHamiltonian, C64, MINUS, PLUS, ZERO};

/// Longest pulse duration the simulator accepts, us.
pub const MAX_TAU_US: f64 = 4.0;

const TRACE_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-9;
const POPULATION_TOL: f64 = 1e-6;
const MAX_SUBSTEPS: usize = 50_000_000;

type Super = SMatrix<C64, 9, 9>;
type SuperVec = SVector<C64, 9>;

/// A validated 3x3 density matrix over `{|+1>, |0>, |-1>}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Matrix3c);

impl DensityMatrix {
    pub fn new(rho: Matrix3c) -> Result<Self> {
        check_state(&rho).map_err(Error::Validation)?;
        Ok(Self(rho))
    }

    pub fn pure(index: usize) -> Self {
        let mut m = Matrix3c::zeros();
        m[(index, index)] = C64::new(1.0, 0.0);
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3c {
        &self.0
    }

    pub fn population(&self, index: usize) -> f64 {
        self.0[(index, index)].re
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Optically polarized `|0>`.
    Ground,
    /// `|-1>`, as left by an ideal adiabatic passage.
    MinusOne,
    Custom(Matrix3c),
}

pub fn prepare_state(kind: InitialState) -> Result<DensityMatrix> {
    match kind {
        InitialState::Ground => Ok(DensityMatrix::pure(ZERO)),
        InitialState::MinusOne => Ok(DensityMatrix::pure(MINUS)),
        InitialState::Custom(m) => DensityMatrix::new(m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceParams {
    /// Dephasing rate of each level `g_i`, 1/us, in basis order.
    pub level_rates: [f64; 3],
}

impl DecoherenceParams {
    pub fn from_t2(t2_us: f64) -> Result<Self> {
        if !(t2_us > 0.0) {
            return Err(Error::validation(format!("T2 = {t2_us} us must be > 0")));
        }
        Ok(Self {
            level_rates: [1.0 / t2_us; 3],
        })
    }

    pub fn none() -> Self {
        Self {
            level_rates: [0.0; 3],
        }
    }

    /// Full `gamma_ij` matrix; off-diagonal channels are absent.
    pub fn gamma_matrix(&self) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            g[i][i] = self.level_rates[i];
        }
        g
    }

    fn coherence_rate(&self, j: usize, k: usize) -> f64 {
        if j == k {
            0.0
        } else {
            0.5 * (self.level_rates[j] + self.level_rates[k])
        }
    }

    fn validate(&self) -> Result<()> {
        if self.level_rates.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::validation("dephasing rates must be finite and >= 0"));
        }
        Ok(())
    }
}

impl Default for DecoherenceParams {
    fn default() -> Self {
        Self::from_t2(2.0).expect("positive T2")
    }
}

/// `rho_00(tau)` sampled on a pulse-duration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub tau_us: Vec<f64>,
    pub population: Vec<f64>,
}

/// A Hamiltonian that can be sampled in time.
pub trait Hamiltonian {
    fn at(&self, t_us: f64) -> Matrix3c;
    /// Upper bound on the fastest frequency (MHz) present, including any
    /// explicit time dependence. Sets the RK4 step.
    fn rate_bound_mhz(&self) -> f64;
}

impl Hamiltonian for Matrix3c {
    fn at(&self, _t_us: f64) -> Matrix3c {
        *self
    }

    fn rate_bound_mhz(&self) -> f64 {
        norm_bound(self)
    }
}

impl Hamiltonian for RotatingHamiltonian {
    fn at(&self, t_us: f64) -> Matrix3c {
        RotatingHamiltonian::at(self, t_us)
    }

    fn rate_bound_mhz(&self) -> f64 {
        let mut rate = norm_bound(&self.secular) + self.dq_half_rabi.abs();
        if self.dq_half_rabi != 0.0 {
            rate = rate.max(self.drive_freq_mhz.abs());
        }
        rate
    }
}

/// Closure-backed Hamiltonian with a caller-supplied rate bound.
pub struct FnHamiltonian<F> {
    pub f: F,
    pub rate_mhz: f64,
}

impl<F: Fn(f64) -> Matrix3c> Hamiltonian for FnHamiltonian<F> {
    fn at(&self, t_us: f64) -> Matrix3c {
        (self.f)(t_us)
    }

    fn rate_bound_mhz(&self) -> f64 {
        self.rate_mhz
    }
}

fn lindblad_rhs(h: &Matrix3c, rho: &Matrix3c, dec: &DecoherenceParams) -> Matrix3c {
    let minus_two_pi_i = C64::new(0.0, -2.0 * PI);
    let mut d = (h * rho - rho * h) * minus_two_pi_i;
    for j in 0..3 {
        for k in 0..3 {
            let g = dec.coherence_rate(j, k);
            if g != 0.0 {
                d[(j, k)] -= rho[(j, k)] * g;
            }
        }
    }
    d
}

fn validate_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return Err(Error::validation("empty tau grid"));
    }
    if tau_grid[0] < 0.0 {
        return Err(Error::validation("tau grid must start at tau >= 0"));
    }
    if tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::validation("tau grid must be strictly increasing"));
    }
    let last = *tau_grid.last().unwrap();
    if last > MAX_TAU_US * (1.0 + 1e-12) {
        return Err(Error::validation(format!(
            "tau grid reaches {last} us; maximum supported pulse is {MAX_TAU_US} us"
        )));
    }
    Ok(())
}

/// Hermiticity, trace and positivity check. Returns a description of the
/// first violation.
fn check_state(rho: &Matrix3c) -> std::result::Result<(), String> {
    if rho.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err("non-finite element".into());
    }
    let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > HERMITIAN_TOL {
        return Err(format!("|rho - rho^dag| = {herm:e}"));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(format!("trace = {tr}"));
    }
    // rho + tol I positive definite <=> every eigenvalue > -tol
    let shifted = rho + Matrix3c::identity() * C64::from(POSITIVITY_TOL);
    if !ldl_pivots_positive(&shifted) {
        return Err(format!("negative eigenvalue {:e}", min_eigenvalue(rho)));
    }
    Ok(())
}

/// LDL^dag factorisation without pivoting; a Hermitian matrix is positive
/// definite iff every pivot is positive.
fn ldl_pivots_positive(a: &Matrix3c) -> bool {
    let mut l = Matrix3c::identity();
    let mut d = [0.0f64; 3];
    for j in 0..3 {
        let mut dj = a[(j, j)].re;
        for k in 0..j {
            dj -= l[(j, k)].norm_sqr() * d[k];
        }
        if !(dj > 0.0) {
            return false;
        }
        d[j] = dj;
        for i in j + 1..3 {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj() * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    true
}

/// Smallest eigenvalue of a Hermitian 3x3 matrix, for diagnostics.
pub fn min_eigenvalue(m: &Matrix3c) -> f64 {
    m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

fn sample_check(rho: &Matrix3c, tau_us: f64) -> Result<f64> {
    check_state(rho).map_err(|detail| Error::Invariant { tau_us, detail })?;
    let p = rho[(ZERO, ZERO)].re;
    if !(-POPULATION_TOL..=1.0 + POPULATION_TOL).contains(&p) {
        return Err(Error::Invariant {
            tau_us,
            detail: format!("population {p} outside [0, 1]"),
        });
    }
    Ok(p)
}

/// Full state history produced by an integrator.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub tau_us: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Evolution {
    pub fn trace(&self) -> TimeTrace {
        TimeTrace {
            tau_us: self.tau_us.clone(),
            population: self.states.iter().map(|s| s.population(ZERO)).collect(),
        }
    }
}

/// RK4 step bound for a given generator: `1 / (200 * 2 pi * rate)`, i.e.
/// two hundred steps per radian of the fastest phase.
pub fn rk4_step_bound(rate_mhz: f64, dec: &DecoherenceParams) -> f64 {
    let gmax = dec.level_rates.iter().cloned().fold(0.0, f64::max) / (2.0 * PI);
    let rate = rate_mhz.max(gmax).max(1e-6);
    1.0 / (200.0 * 2.0 * PI * rate)
}

pub fn evolve<H: Hamiltonian + ?Sized>(
    rho0: &DensityMatrix,
    hamiltonian: &H,
    dec: &DecoherenceParams,
    tau_grid: &[f64],
) -> Result<TimeTrace> {
    evolve_states(rho0, hamiltonian, dec, tau_grid, 1.0).map(|e| e.trace())
}

/// RK4 integration returning every sampled state. `step_scale` multiplies the
/// default step bound (`0.5` halves the step, for convergence checks).
pub fn evolve_states<H: Hamiltonian + ?Sized>(
    rho0: &DensityMatrix,
    hamiltonian: &H,
    dec: &DecoherenceParams,
    tau_grid: &[f64],
    step_scale: f64,
) -> Result<Evolution> {
    validate_grid(tau_grid)?;
    dec.validate()?;
    if !(step_scale > 0.0) {
        return Err(Error::validation("step scale must be > 0"));
    }
    let h_max = rk4_step_bound(hamiltonian.rate_bound_mhz(), dec) * step_scale;
    let mut rho = *rho0.matrix();
    let mut t = 0.0;
    let mut states = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let span = tau - t;
        if span > 0.0 {
            let n = (span / h_max).ceil();
            if !n.is_finite() || n as usize > MAX_SUBSTEPS {
                return Err(Error::Integrator {
                    tau_us: tau,
                    reason: format!("step underflow: {n} substeps needed"),
                });
            }
            let n = n as usize;
            let dt = span / n as f64;
            for s in 0..n {
                let t0 = t + s as f64 * dt;
                let h0 = hamiltonian.at(t0);
                let hm = hamiltonian.at(t0 + 0.5 * dt);
                let h1 = hamiltonian.at(t0 + dt);
                let k1 = lindblad_rhs(&h0, &rho, dec);
                let k2 = lindblad_rhs(&hm, &(rho + k1 * C64::from(0.5 * dt)), dec);
                let k3 = lindblad_rhs(&hm, &(rho + k2 * C64::from(0.5 * dt)), dec);
                let k4 = lindblad_rhs(&h1, &(rho + k3 * C64::from(dt)), dec);
                rho += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(dt / 6.0);
            }
            if rho.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::Integrator {
                    tau_us: tau,
                    reason: "non-finite state".into(),
                });
            }
            t = tau;
        }
        sample_check(&rho, tau)?;
        states.push(DensityMatrix(rho));
    }
    Ok(Evolution {
        tau_us: tau_grid.to_vec(),
        states,
    })
}

fn vec_index(j: usize, k: usize) -> usize {
    3 * j + k
}

/// Liouvillian superoperator acting on row-major `vec(rho)`.
fn liouvillian(h: &Matrix3c, dec: &DecoherenceParams) -> Super {
    let minus_two_pi_i = C64::new(0.0, -2.0 * PI);
    let mut l = Super::zeros();
    for j in 0..3 {
        for k in 0..3 {
            let row = vec_index(j, k);
            for m in 0..3 {
                // (H rho)_jk = sum_m H_jm rho_mk
                l[(row, vec_index(m, k))] += minus_two_pi_i * h[(j, m)];
                // (rho H)_jk = sum_m rho_jm H_mk
                l[(row, vec_index(j, m))] -= minus_two_pi_i * h[(m, k)];
            }
            l[(row, row)] -= C64::from(dec.coherence_rate(j, k));
        }
    }
    l
}

/// Exact propagator for a time-independent Hamiltonian.
pub struct StaticPropagator {
    generator: Super,
    cached: Option<(f64, Super)>,
}

impl StaticPropagator {
    pub fn new(h: &Matrix3c, dec: &DecoherenceParams) -> Result<Self> {
        dec.validate()?;
        if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::validation("non-finite Hamiltonian"));
        }
        Ok(Self {
            generator: liouvillian(h, dec),
            cached: None,
        })
    }

    fn step(&mut self, dt: f64) -> Super {
        if let Some((cached_dt, m)) = &self.cached {
            if (cached_dt - dt).abs() <= 1e-12 * dt.abs().max(1.0) {
                return *m;
            }
        }
        let m = (self.generator * C64::from(dt)).exp();
        self.cached = Some((dt, m));
        m
    }

    pub fn evolve_states(&mut self, rho0: &DensityMatrix, tau_grid: &[f64]) -> Result<Evolution> {
        validate_grid(tau_grid)?;
        let mut v = SuperVec::from_iterator(rho0.matrix().transpose().iter().cloned());
        let mut t = 0.0;
        let mut states = Vec::with_capacity(tau_grid.len());
        for &tau in tau_grid {
            if tau > t {
                let m = self.step(tau - t);
                v = m * v;
                t = tau;
            }
            let rho = Matrix3c::from_row_slice(v.as_slice());
            sample_check(&rho, tau)?;
            states.push(DensityMatrix(rho));
        }
        Ok(Evolution {
            tau_us: tau_grid.to_vec(),
            states,
        })
    }

    pub fn evolve(&mut self, rho0: &DensityMatrix, tau_grid: &[f64]) -> Result<TimeTrace> {
        self.evolve_states(rho0, tau_grid).map(|e| e.trace())
    }
}

/// Populations of `|+1>` and `|-1>` are occasionally useful for diagnostics.
pub fn outer_populations(rho: &DensityMatrix) -> (f64, f64) {
    (rho.population(PLUS), rho.population(MINUS))
}
