//! Spin-stress coupling coefficients for a [111] NV and the map from stress
//! susceptibilities to strain susceptibilities through the cubic stiffness
//! tensor.
//!
//! Stress enters in the crystal frame (cubic axes X, Y, Z). Strain-side
//! expressions live in the NV frame `x = [-1,-1,2]/sqrt6`, `y = [1,-1,0]/sqrt2`,
//! `z = [1,1,1]/sqrt3`. Strain tensors carry their frame so the two cannot be
//! mixed.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measured::Measured;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Crystal-frame stress, GPa, as six Voigt components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StressTensor {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub yz: f64,
    pub zx: f64,
    pub xy: f64,
}

impl StressTensor {
    pub fn uniaxial_z(sigma_gpa: f64) -> Self {
        Self {
            zz: sigma_gpa,
            ..Default::default()
        }
    }

    pub fn hydrostatic(p_gpa: f64) -> Self {
        Self {
            xx: p_gpa,
            yy: p_gpa,
            zz: p_gpa,
            ..Default::default()
        }
    }

    pub fn voigt(&self) -> Vector6<f64> {
        Vector6::new(self.xx, self.yy, self.zz, self.yz, self.zx, self.xy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.voigt().iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("stress components must be finite"));
        }
        Ok(())
    }
}

/// Coefficient set in MHz/GPa. Absent entries are `None`, never zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SusceptibilitySet {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_prime: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_prime: Option<Measured>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessConstants {
    pub c11: Measured,
    pub c12: Measured,
    pub c44: Measured,
}

impl Default for StiffnessConstants {
    fn default() -> Self {
        Self {
            c11: Measured::new(1079.0, 5.0),
            c12: Measured::new(124.0, 5.0),
            c44: Measured::new(578.0, 2.0),
        }
    }
}

impl StiffnessConstants {
    pub fn validate(&self) -> Result<()> {
        let (c11, c12, c44) = (self.c11.value, self.c12.value, self.c44.value);
        if !(c11 > 0.0 && c12 > 0.0 && c44 > 0.0 && c11 > c12) {
            return Err(Error::validation(format!(
                "stiffness C11={c11}, C12={c12}, C44={c44} GPa must be positive with C11 > C12"
            )));
        }
        Ok(())
    }

    /// Voigt stiffness matrix acting on engineering strain.
    pub fn matrix(&self) -> Matrix6<f64> {
        let (c11, c12, c44) = (self.c11.value, self.c12.value, self.c44.value);
        let mut m = Matrix6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = if i == j { c11 } else { c12 };
            }
            m[(i + 3, i + 3)] = c44;
        }
        m
    }

    pub fn compliance(&self) -> Result<Matrix6<f64>> {
        self.validate()?;
        self.matrix()
            .try_inverse()
            .ok_or_else(|| Error::validation("singular stiffness matrix"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Crystal,
    Nv,
}

/// Symmetric (tensor, not engineering) strain with its frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainTensor {
    pub frame: Frame,
    pub m: Matrix3<f64>,
}

/// Rows are the NV-frame axes in crystal coordinates.
pub fn nv_frame() -> Matrix3<f64> {
    let s6 = 6f64.sqrt();
    Matrix3::new(
        -1.0 / s6, -1.0 / s6, 2.0 / s6,
        1.0 / SQRT_2, -1.0 / SQRT_2, 0.0,
        1.0 / SQRT_3, 1.0 / SQRT_3, 1.0 / SQRT_3,
    )
}

impl StrainTensor {
    pub fn to_nv(&self) -> StrainTensor {
        match self.frame {
            Frame::Nv => *self,
            Frame::Crystal => {
                let r = nv_frame();
                StrainTensor {
                    frame: Frame::Nv,
                    m: r * self.m * r.transpose(),
                }
            }
        }
    }
}

/// Crystal-frame strain produced by a crystal-frame stress.
pub fn strain_from_stress(sigma: &StressTensor, c: &StiffnessConstants) -> Result<StrainTensor> {
    sigma.validate()?;
    let e = c.compliance()? * sigma.voigt();
    Ok(StrainTensor {
        frame: Frame::Crystal,
        m: Matrix3::new(
            e[0], 0.5 * e[5], 0.5 * e[4],
            0.5 * e[5], e[1], 0.5 * e[3],
            0.5 * e[4], 0.5 * e[3], e[2],
        ),
    })
}

/// Hamiltonian coefficients, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingCoefficients {
    pub m_z: f64,
    pub m_x: f64,
    pub m_y: f64,
    pub n_x: f64,
    pub n_y: f64,
}

/// `coef * combo`, requiring the coefficient only when `combo` is non-zero.
fn term(coef: Option<Measured>, name: &'static str, combo: f64) -> Result<f64> {
    if combo == 0.0 {
        return Ok(0.0);
    }
    coef.map(|m| m.value * combo)
        .ok_or(Error::MissingCoefficient(name))
}

pub fn coupling_coefficients(
    sigma: &StressTensor,
    sus: &SusceptibilitySet,
) -> Result<CouplingCoefficients> {
    sigma.validate()?;
    let s = sigma;
    let trace = s.xx + s.yy + s.zz;
    let shear_sum = s.yz + s.zx + s.xy;
    let axial = 2.0 * s.zz - s.xx - s.yy;
    let shear_axial = 2.0 * s.xy - s.yz - s.zx;
    let normal_diff = s.xx - s.yy;
    let shear_diff = s.yz - s.zx;
    Ok(CouplingCoefficients {
        m_z: term(sus.a1, "a1", trace)? + term(sus.a2, "a2", 2.0 * shear_sum)?,
        m_x: term(sus.b, "b", axial)? + term(sus.c, "c", shear_axial)?,
        m_y: SQRT_3 * (term(sus.b, "b", normal_diff)? + term(sus.c, "c", shear_diff)?),
        n_x: term(sus.b_prime, "b_prime", axial)? + term(sus.c_prime, "c_prime", shear_axial)?,
        n_y: SQRT_3
            * (term(sus.b_prime, "b_prime", normal_diff)?
                + term(sus.c_prime, "c_prime", shear_diff)?),
    })
}

/// Strain susceptibilities, GHz/strain.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrainSusceptibilities {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_a1: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_a2: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_b: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_c: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_b_prime: Option<Measured>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_c_prime: Option<Measured>,
}

/// Both members of a pair, neither, or a named error.
fn pair(
    p: Option<Measured>,
    q: Option<Measured>,
    names: (&'static str, &'static str),
) -> Result<Option<(Measured, Measured)>> {
    match (p, q) {
        (Some(p), Some(q)) => Ok(Some((p, q))),
        (None, None) => Ok(None),
        (None, Some(_)) => Err(Error::MissingCoefficient(names.0)),
        (Some(_), None) => Err(Error::MissingCoefficient(names.1)),
    }
}

/// `value = u*x + v*y` with first-order uncertainty from all four inputs.
fn lin2(u: Measured, x: Measured, v: Measured, y: Measured) -> Measured {
    let value = u.value * x.value + v.value * y.value;
    let sigma = ((u.sigma * x.value).powi(2)
        + (u.value * x.sigma).powi(2)
        + (v.sigma * y.value).powi(2)
        + (v.value * y.sigma).powi(2))
    .sqrt();
    Measured::new(value, sigma)
}

fn scaled(m: Measured, k: f64) -> Measured {
    Measured::new(m.value * k, m.sigma * k.abs())
}

pub fn stress_to_strain_susceptibility(
    sus: &SusceptibilitySet,
    c: &StiffnessConstants,
) -> Result<StrainSusceptibilities> {
    c.validate()?;
    let sum = Measured::new(
        c.c11.value + 2.0 * c.c12.value,
        (c.c11.sigma.powi(2) + 4.0 * c.c12.sigma.powi(2)).sqrt(),
    );
    let diff = Measured::new(
        c.c11.value - c.c12.value,
        (c.c11.sigma.powi(2) + c.c12.sigma.powi(2)).sqrt(),
    );
    let c44 = c.c44;
    let mhz_to_ghz = 1e-3;
    let mut out = StrainSusceptibilities::default();
    if let Some((a1, a2)) = pair(sus.a1, sus.a2, ("a1", "a2"))? {
        out.lambda_a1 = Some(scaled(lin2(a1, sum, scaled(a2, 4.0), c44), mhz_to_ghz));
        out.lambda_a2 = Some(scaled(lin2(a1, sum, scaled(a2, -2.0), c44), mhz_to_ghz));
    }
    if let Some((b, cc)) = pair(sus.b, sus.c, ("b", "c"))? {
        out.lambda_b = Some(scaled(lin2(b, diff, scaled(cc, 2.0), c44), mhz_to_ghz));
        out.lambda_c = Some(scaled(lin2(b, diff, scaled(cc, -1.0), c44), SQRT_2 * mhz_to_ghz));
    }
    if let Some((bp, cp)) = pair(sus.b_prime, sus.c_prime, ("b_prime", "c_prime"))? {
        out.lambda_b_prime = Some(scaled(lin2(bp, diff, scaled(cp, 2.0), c44), mhz_to_ghz));
        out.lambda_c_prime =
            Some(scaled(lin2(bp, diff, scaled(cp, -1.0), c44), SQRT_2 * mhz_to_ghz));
    }
    Ok(out)
}

/// Hamiltonian coefficients from an NV-frame strain, MHz. `N_x` uses the
/// primed pair, matching `N_y`.
pub fn strain_coefficients(
    strain: &StrainTensor,
    lambdas: &StrainSusceptibilities,
) -> Result<CouplingCoefficients> {
    if strain.frame != Frame::Nv {
        return Err(Error::validation("strain coefficients need an NV-frame strain tensor"));
    }
    let e = &strain.m;
    let get = |m: Option<Measured>, name: &'static str| {
        m.map(|v| v.value * 1e3).ok_or(Error::MissingCoefficient(name))
    };
    let (la1, la2) = (get(lambdas.lambda_a1, "lambda_a1")?, get(lambdas.lambda_a2, "lambda_a2")?);
    let (lb, lc) = (get(lambdas.lambda_b, "lambda_b")?, get(lambdas.lambda_c, "lambda_c")?);
    let (lbp, lcp) = (
        get(lambdas.lambda_b_prime, "lambda_b_prime")?,
        get(lambdas.lambda_c_prime, "lambda_c_prime")?,
    );
    let (xx, yy, zz) = (e[(0, 0)], e[(1, 1)], e[(2, 2)]);
    let (xy, xz, yz) = (e[(0, 1)], e[(0, 2)], e[(1, 2)]);
    Ok(CouplingCoefficients {
        m_z: la1 * zz + la2 * (xx + yy),
        m_x: lb * (xx - yy) + 2.0 * lc * xz,
        m_y: -2.0 * lb * xy + 2.0 * lc * yz,
        n_x: lbp * (xx - yy) + 2.0 * lcp * xz,
        n_y: -2.0 * lbp * xy + 2.0 * lcp * yz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticScalars {
    pub young_gpa: f64,
    pub poisson: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniaxialStrain {
    pub eps_xx: f64,
    pub eps_yy: f64,
    pub eps_zz: f64,
}

pub fn uniaxial_strain(sigma_zz_gpa: f64, elastic: &ElasticScalars) -> Result<UniaxialStrain> {
    if !(elastic.young_gpa > 0.0) {
        return Err(Error::validation(format!(
            "Young's modulus {} GPa must be > 0",
            elastic.young_gpa
        )));
    }
    if !(elastic.poisson > 0.0 && elastic.poisson < 0.5) {
        return Err(Error::validation(format!(
            "Poisson ratio {} must lie in (0, 0.5)",
            elastic.poisson
        )));
    }
    let e = sigma_zz_gpa / elastic.young_gpa;
    Ok(UniaxialStrain {
        eps_xx: -elastic.poisson * e,
        eps_yy: -elastic.poisson * e,
        eps_zz: e,
    })
}

/// Early axial/transverse strain parameterization, GHz/strain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegacyStrainRow {
    pub source: String,
    pub d_parallel: Measured,
    pub d_perp: Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrainRow {
    pub source: String,
    pub lambdas: StrainSusceptibilities,
}

/// Ratio result `b' = sqrt(2) alpha b` stored as its factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub source: String,
    /// `b' / b`
    pub b_prime_over_b: Measured,
    pub alpha: Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub stress: Vec<SusceptibilitySet>,
    pub ratio: RatioRow,
    pub strain: Vec<StrainRow>,
    pub legacy: Vec<LegacyStrainRow>,
}

impl Catalog {
    pub fn stress_row(&self, source: &str) -> Option<&SusceptibilitySet> {
        self.stress.iter().find(|r| r.source == source)
    }

    pub fn strain_row(&self, source: &str) -> Option<&StrainRow> {
        self.strain.iter().find(|r| r.source == source)
    }
}

fn m(v: f64, s: f64) -> Option<Measured> {
    Some(Measured::new(v, s))
}

/// Literature coupling coefficients, verbatim with uncertainties.
pub fn susceptibility_catalog() -> Catalog {
    let alpha = Measured::new(0.5, 0.2);
    Catalog {
        stress: vec![
            SusceptibilitySet {
                source: "barson".into(),
                a1: m(4.86, 0.02),
                a2: m(-3.7, 0.2),
                b: m(-2.3, 0.3),
                c: m(3.5, 0.3),
                b_prime: None,
                c_prime: None,
            },
            SusceptibilitySet {
                source: "barfuss".into(),
                a1: m(-11.7, 3.2),
                a2: m(6.5, 3.2),
                b: m(7.1, 0.8),
                c: m(-5.4, 0.8),
                b_prime: None,
                c_prime: None,
            },
            SusceptibilitySet {
                source: "theory".into(),
                a1: m(2.66, 0.07),
                a2: m(-2.51, 0.06),
                b: m(-1.94, 0.02),
                c: m(2.83, 0.03),
                b_prime: m(-0.12, 0.01),
                c_prime: m(0.66, 0.01),
            },
        ],
        ratio: RatioRow {
            source: "dual-drive".into(),
            b_prime_over_b: Measured::new(SQRT_2 * alpha.value, SQRT_2 * alpha.sigma),
            alpha,
        },
        strain: vec![
            StrainRow {
                source: "barfuss".into(),
                lambdas: StrainSusceptibilities {
                    lambda_a1: m(-0.5, 8.6),
                    lambda_a2: m(-9.2, 5.7),
                    lambda_b: m(-0.5, 1.2),
                    lambda_c: m(14.0, 1.3),
                    lambda_b_prime: None,
                    lambda_c_prime: None,
                },
            },
            StrainRow {
                source: "theory".into(),
                lambdas: StrainSusceptibilities {
                    lambda_a1: m(2.3, 0.2),
                    lambda_a2: m(-6.42, 0.09),
                    lambda_b: m(-1.425, 0.050),
                    lambda_c: m(4.915, 0.022),
                    lambda_b_prime: m(0.65, 0.02),
                    lambda_c_prime: m(-0.707, 0.018),
                },
            },
        ],
        legacy: vec![
            LegacyStrainRow {
                source: "teissier".into(),
                d_parallel: Measured::new(5.46, 0.31),
                d_perp: Measured::new(19.63, 0.40),
            },
            LegacyStrainRow {
                source: "ovartchaiyapong".into(),
                d_parallel: Measured::new(13.3, 1.1),
                d_perp: Measured::new(21.5, 1.2),
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn exact(a1: f64, a2: f64, b: f64, c: f64, bp: f64, cp: f64) -> SusceptibilitySet {
        SusceptibilitySet {
            source: "test".into(),
            a1: Some(Measured::exact(a1)),
            a2: Some(Measured::exact(a2)),
            b: Some(Measured::exact(b)),
            c: Some(Measured::exact(c)),
            b_prime: Some(Measured::exact(bp)),
            c_prime: Some(Measured::exact(cp)),
        }
    }

    #[test]
    fn uniaxial_reduction() {
        let sus = SusceptibilitySet {
            source: "x".into(),
            a1: m(4.86, 0.0),
            b: m(-2.3, 0.0),
            b_prime: m(-1.63, 0.0),
            ..Default::default()
        };
        let k = coupling_coefficients(&StressTensor::uniaxial_z(1.0), &sus).unwrap();
        assert_abs_diff_eq!(k.m_z, 4.86, epsilon = 1e-12);
        assert_abs_diff_eq!(k.m_x, -4.6, epsilon = 1e-12);
        assert_eq!(k.m_y, 0.0);
        assert_abs_diff_eq!(k.n_x, -3.26, epsilon = 1e-12);
        assert_eq!(k.n_y, 0.0);
    }

    #[test]
    fn zero_and_hydrostatic() {
        let sus = exact(2.66, -2.51, -1.94, 2.83, -0.12, 0.66);
        let z = coupling_coefficients(&StressTensor::default(), &sus).unwrap();
        assert_eq!(z, CouplingCoefficients::default());
        let only_a1 = SusceptibilitySet {
            a1: m(2.66, 0.0),
            ..Default::default()
        };
        let h = coupling_coefficients(&StressTensor::hydrostatic(0.7), &only_a1).unwrap();
        assert_abs_diff_eq!(h.m_z, 3.0 * 2.66 * 0.7, epsilon = 1e-12);
        assert_eq!((h.m_x, h.m_y, h.n_x, h.n_y), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn missing_coefficient_named() {
        let sus = SusceptibilitySet {
            a1: m(1.0, 0.0),
            ..Default::default()
        };
        match coupling_coefficients(&StressTensor::uniaxial_z(1.0), &sus) {
            Err(Error::MissingCoefficient(name)) => assert_eq!(name, "b"),
            other => panic!("{other:?}"),
        }
        let half_pair = SusceptibilitySet {
            b_prime: m(-0.12, 0.01),
            ..Default::default()
        };
        match stress_to_strain_susceptibility(&half_pair, &StiffnessConstants::default()) {
            Err(Error::MissingCoefficient(name)) => assert_eq!(name, "c_prime"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn primed_theory_row() {
        let cat = susceptibility_catalog();
        let theory = cat.stress_row("theory").unwrap();
        let l = stress_to_strain_susceptibility(theory, &StiffnessConstants::default()).unwrap();
        let bp = l.lambda_b_prime.unwrap();
        let cp = l.lambda_c_prime.unwrap();
        // (-0.12)(955) + 2(0.66)(578) = 648.36 MHz
        assert_abs_diff_eq!(bp.value, 0.64836, epsilon = 1e-12);
        // sqrt2 [(-0.12)(955) - (0.66)(578)] = -701.57 MHz
        assert_abs_diff_eq!(cp.value, SQRT_2 * (-114.6 - 381.48) * 1e-3, epsilon = 1e-12);
        let table = cat.strain_row("theory").unwrap().lambdas;
        assert!(table.lambda_b_prime.unwrap().contains(bp.value, 1.0));
        assert!(table.lambda_c_prime.unwrap().contains(cp.value, 1.0));
    }

    #[test]
    fn unprimed_theory_row_magnitudes() {
        // magnitudes agree with the tabulated strain row, signs are opposite
        let cat = susceptibility_catalog();
        let l = stress_to_strain_susceptibility(
            cat.stress_row("theory").unwrap(),
            &StiffnessConstants::default(),
        )
        .unwrap();
        let t = cat.strain_row("theory").unwrap().lambdas;
        for (got, want) in [(l.lambda_b, t.lambda_b), (l.lambda_c, t.lambda_c)] {
            let (g, w) = (got.unwrap().value, want.unwrap().value);
            assert!((g.abs() / w.abs() - 1.0).abs() < 0.01, "{g} vs {w}");
            assert!(g.signum() != w.signum());
        }
        for (got, want) in [(l.lambda_a1, t.lambda_a1), (l.lambda_a2, t.lambda_a2)] {
            let (g, w) = (got.unwrap(), want.unwrap());
            assert!((g.value.abs() - w.value.abs()).abs() <= w.sigma, "{g} vs {w}");
        }
    }

    #[test]
    fn zero_set_maps_to_zero() {
        let l = stress_to_strain_susceptibility(
            &exact(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            &StiffnessConstants::default(),
        )
        .unwrap();
        for v in [
            l.lambda_a1,
            l.lambda_a2,
            l.lambda_b,
            l.lambda_c,
            l.lambda_b_prime,
            l.lambda_c_prime,
        ] {
            assert_eq!(v.unwrap().value, 0.0);
        }
    }

    #[test]
    fn uniaxial_strain_values() {
        let el = ElasticScalars {
            young_gpa: 1050.0,
            poisson: 0.2,
        };
        let s = uniaxial_strain(1.0, &el).unwrap();
        assert_abs_diff_eq!(s.eps_zz, 9.52e-4, epsilon = 5e-7);
        assert_abs_diff_eq!(s.eps_xx, -1.90e-4, epsilon = 5e-7);
        let unit = uniaxial_strain(1050.0, &el).unwrap();
        assert_eq!(unit.eps_zz, 1.0);
        assert_abs_diff_eq!(unit.eps_yy, -0.2, epsilon = 1e-15);
        assert_eq!(uniaxial_strain(0.0, &el).unwrap().eps_zz, 0.0);
        assert!(uniaxial_strain(1.0, &ElasticScalars { young_gpa: 0.0, poisson: 0.2 }).is_err());
    }

    #[test]
    fn frame_axes_are_orthonormal() {
        let r = nv_frame();
        assert!((r * r.transpose() - Matrix3::identity()).abs().max() < 1e-15);
        assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn catalog_rows() {
        let c = susceptibility_catalog();
        let b = c.stress_row("barson").unwrap();
        assert_eq!(b.a1, m(4.86, 0.02));
        assert_eq!(b.b, m(-2.3, 0.3));
        assert!(b.b_prime.is_none());
        let t = c.stress_row("theory").unwrap();
        assert_eq!(t.c_prime, m(0.66, 0.01));
        assert_abs_diff_eq!(c.ratio.b_prime_over_b.value, SQRT_2 * 0.5, epsilon = 1e-15);
        let json = serde_json::to_string(&c).unwrap();
        let back: Catalog = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    fn stress_strategy() -> impl Strategy<Value = StressTensor> {
        prop::array::uniform6(-2.0f64..2.0).prop_map(|v| StressTensor {
            xx: v[0],
            yy: v[1],
            zz: v[2],
            yz: v[3],
            zx: v[4],
            xy: v[5],
        })
    }

    proptest! {
        #[test]
        fn coefficients_are_linear(s1 in stress_strategy(), s2 in stress_strategy(), k in -3.0f64..3.0) {
            let sus = exact(2.66, -2.51, -1.94, 2.83, -0.12, 0.66);
            let sum = StressTensor {
                xx: s1.xx + k * s2.xx,
                yy: s1.yy + k * s2.yy,
                zz: s1.zz + k * s2.zz,
                yz: s1.yz + k * s2.yz,
                zx: s1.zx + k * s2.zx,
                xy: s1.xy + k * s2.xy,
            };
            let a = coupling_coefficients(&s1, &sus).unwrap();
            let b = coupling_coefficients(&s2, &sus).unwrap();
            let c = coupling_coefficients(&sum, &sus).unwrap();
            prop_assert!((c.m_z - a.m_z - k * b.m_z).abs() < 1e-9);
            prop_assert!((c.m_x - a.m_x - k * b.m_x).abs() < 1e-9);
            prop_assert!((c.m_y - a.m_y - k * b.m_y).abs() < 1e-9);
            prop_assert!((c.n_x - a.n_x - k * b.n_x).abs() < 1e-9);
            prop_assert!((c.n_y - a.n_y - k * b.n_y).abs() < 1e-9);
        }

        #[test]
        fn reduction_for_any_coefficients(a1 in -10.0f64..10.0, b in -10.0f64..10.0, bp in -5.0f64..5.0, s in -2.0f64..2.0) {
            let sus = SusceptibilitySet {
                a1: Some(Measured::exact(a1)),
                b: Some(Measured::exact(b)),
                b_prime: Some(Measured::exact(bp)),
                ..Default::default()
            };
            let k = coupling_coefficients(&StressTensor::uniaxial_z(s), &sus).unwrap();
            prop_assert_eq!(k.m_z, a1 * s);
            prop_assert_eq!(k.m_x, b * (2.0 * s));
            prop_assert_eq!(k.n_x, bp * (2.0 * s));
            prop_assert_eq!((k.m_y, k.n_y), (0.0, 0.0));
        }

        /// Stress -> strain -> NV frame -> strain-side coefficients must give
        /// the stress-side coefficients back.
        #[test]
        fn stress_and_strain_sides_agree(s in stress_strategy()) {
            let sus = exact(2.66, -2.51, -1.94, 2.83, -0.12, 0.66);
            let c = StiffnessConstants::default();
            let lambdas = stress_to_strain_susceptibility(&sus, &c).unwrap();
            let eps = strain_from_stress(&s, &c).unwrap().to_nv();
            let via_strain = strain_coefficients(&eps, &lambdas).unwrap();
            let direct = coupling_coefficients(&s, &sus).unwrap();
            for (x, y) in [
                (via_strain.m_z, direct.m_z),
                (via_strain.m_x, direct.m_x),
                (via_strain.m_y, direct.m_y),
                (via_strain.n_x, direct.n_x),
                (via_strain.n_y, direct.n_y),
            ] {
                prop_assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn crystal_frame_strain_rejected() {
        let eps = strain_from_stress(&StressTensor::uniaxial_z(1.0), &StiffnessConstants::default())
            .unwrap();
        let l = stress_to_strain_susceptibility(
            &exact(2.66, -2.51, -1.94, 2.83, -0.12, 0.66),
            &StiffnessConstants::default(),
        )
        .unwrap();
        assert!(strain_coefficients(&eps, &l).is_err());
        assert!(strain_coefficients(&eps.to_nv(), &l).is_ok());
    }
}
