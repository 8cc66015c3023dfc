//! Classical electro-optic relations: index ellipsoid under a transverse
//! field, modulator retardation for NPP- and MNA-type crystals, and
//! one-oscillator Sellmeier dispersion.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crystal::PhysicalConstants;
use crate::error::{QpmError, Result};

const PM: f64 = 1e-12;
const V_PER_M_PER_V_PER_UM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    X,
    Y,
}

impl FromStr for Polarization {
    type Err = QpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Polarization::X),
            "y" => Ok(Polarization::Y),
            other => Err(QpmError::invalid("polarization", format!("expected x or y, got `{other}`"))),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::X => "x",
            Polarization::Y => "y",
        })
    }
}

/// Electro-optic coefficients in pm/V. Absent entries are `None`.
///
/// `r61` and `r51` describe principal-axis rotation and are carried for
/// completeness; none of the simplified formulas below read them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EoCoefficients {
    pub r11: Option<f64>,
    pub r12: Option<f64>,
    pub r21: Option<f64>,
    pub r22: Option<f64>,
    pub r31: Option<f64>,
    pub r51: Option<f64>,
    pub r61: Option<f64>,
}

impl EoCoefficients {
    fn require(value: Option<f64>, name: &'static str) -> Result<f64> {
        match value {
            Some(v) if v.is_finite() => Ok(v),
            Some(_) => Err(QpmError::invalid(format!("eo.{name}"), "must be finite")),
            None => Err(QpmError::MissingCoefficient(name)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEllipsoid {
    pub n_x: f64,
    pub n_y: f64,
    pub n_z: f64,
    pub eo: EoCoefficients,
}

impl IndexEllipsoid {
    pub fn new(n_x: f64, n_y: f64, n_z: f64, eo: EoCoefficients) -> Result<Self> {
        for (key, n) in [("n_x", n_x), ("n_y", n_y), ("n_z", n_z)] {
            if !(n.is_finite() && n >= 1.0) {
                return Err(QpmError::invalid(key, format!("index must be >= 1, got {n}")));
            }
        }
        Ok(IndexEllipsoid { n_x, n_y, n_z, eo })
    }
}

/// Modulator retardation split into birefringence and field-induced parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retardation {
    /// Γ = Δ₀ + δ, radians.
    pub gamma: f64,
    /// Γ reduced to [0, 2π).
    pub gamma_mod_2pi: f64,
    /// Δ₀, the zero-field birefringence term.
    pub birefringence: f64,
    /// δ, the linear electro-optic term.
    pub field_term: f64,
}

impl Retardation {
    fn from_parts(birefringence: f64, field_term: f64) -> Self {
        let gamma = birefringence + field_term;
        Retardation {
            gamma,
            gamma_mod_2pi: gamma.rem_euclid(TAU),
            birefringence,
            field_term,
        }
    }
}

fn phase_scale(length_um: f64, wavelength_nm: f64) -> Result<f64> {
    if !(length_um.is_finite() && length_um > 0.0) {
        return Err(QpmError::invalid("length_um", "must be > 0"));
    }
    if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) {
        return Err(QpmError::invalid("wavelength_nm", "must be > 0"));
    }
    let c = PhysicalConstants::CODATA;
    let omega = TAU * c.frequency_hz(wavelength_nm);
    Ok(omega * length_um * 1e-6 / c.c0)
}

/// Field-shifted indices for NPP: n − ½n³r·E_y with r₁₂ on x and r₂₂ on y.
pub fn perturbed_indices_npp(ell: &IndexEllipsoid, e_y_v_per_um: f64) -> Result<(f64, f64)> {
    let r12 = EoCoefficients::require(ell.eo.r12, "r12")? * PM;
    let r22 = EoCoefficients::require(ell.eo.r22, "r22")? * PM;
    let e = e_y_v_per_um * V_PER_M_PER_V_PER_UM;
    Ok((
        ell.n_x - 0.5 * ell.n_x.powi(3) * r12 * e,
        ell.n_y - 0.5 * ell.n_y.powi(3) * r22 * e,
    ))
}

/// Γ = (ωl/c)·[n_y − n_x − ½(n_y³r₂₂ − n_x³r₁₂)E_y].
pub fn retardation_npp(
    ell: &IndexEllipsoid,
    e_y_v_per_um: f64,
    length_um: f64,
    wavelength_nm: f64,
) -> Result<Retardation> {
    let r12 = EoCoefficients::require(ell.eo.r12, "r12")? * PM;
    let r22 = EoCoefficients::require(ell.eo.r22, "r22")? * PM;
    let scale = phase_scale(length_um, wavelength_nm)?;
    let e = e_y_v_per_um * V_PER_M_PER_V_PER_UM;
    let combined = ell.n_y.powi(3) * r22 - ell.n_x.powi(3) * r12;
    Ok(Retardation::from_parts(
        scale * (ell.n_y - ell.n_x),
        -scale * 0.5 * combined * e,
    ))
}

/// Γ = (ωl/c)·[n_y − n_x − ½(n_x³r₁₁ − n_y³r₂₁)E_x].
pub fn retardation_mna(
    ell: &IndexEllipsoid,
    e_x_v_per_um: f64,
    length_um: f64,
    wavelength_nm: f64,
) -> Result<Retardation> {
    let r11 = EoCoefficients::require(ell.eo.r11, "r11")? * PM;
    let r21 = EoCoefficients::require(ell.eo.r21, "r21")? * PM;
    let scale = phase_scale(length_um, wavelength_nm)?;
    let e = e_x_v_per_um * V_PER_M_PER_V_PER_UM;
    let combined = ell.n_x.powi(3) * r11 - ell.n_y.powi(3) * r21;
    Ok(Retardation::from_parts(
        scale * (ell.n_y - ell.n_x),
        -scale * 0.5 * combined * e,
    ))
}

/// n²(λ) = A + B·λ²/(λ² − C), λ in µm, C in µm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierTerm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SellmeierTerm {
    fn n_squared(&self, wavelength_um: f64) -> f64 {
        let l2 = wavelength_um * wavelength_um;
        self.a + self.b * l2 / (l2 - self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SellmeierSet {
    pub x: SellmeierTerm,
    pub y: SellmeierTerm,
    /// Validity window in µm.
    pub window_um: (f64, f64),
}

impl SellmeierSet {
    pub fn new(x: SellmeierTerm, y: SellmeierTerm, window_um: (f64, f64)) -> Result<Self> {
        let (lo, hi) = window_um;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(QpmError::invalid(
                "sellmeier.window_um",
                format!("need 0 < min < max, got ({lo}, {hi})"),
            ));
        }
        for (key, term) in [("sellmeier.x", x), ("sellmeier.y", y)] {
            if !(term.a.is_finite() && term.b.is_finite() && term.c.is_finite()) {
                return Err(QpmError::invalid(key, "coefficients must be finite"));
            }
            if term.c >= lo * lo {
                return Err(QpmError::invalid(
                    format!("{key}.c"),
                    format!("pole C = {} must lie below min-window² = {}", term.c, lo * lo),
                ));
            }
            let samples = 256;
            for i in 0..=samples {
                let w = lo + (hi - lo) * i as f64 / samples as f64;
                if term.n_squared(w) <= 1.0 {
                    return Err(QpmError::invalid(key, format!("n² <= 1 at {w} µm")));
                }
            }
        }
        Ok(SellmeierSet { x, y, window_um })
    }

    pub fn term(&self, pol: Polarization) -> &SellmeierTerm {
        match pol {
            Polarization::X => &self.x,
            Polarization::Y => &self.y,
        }
    }
}

/// Refractive index from a Sellmeier set; refuses to extrapolate.
pub fn sellmeier_n(set: &SellmeierSet, wavelength_nm: f64, pol: Polarization) -> Result<f64> {
    let w = wavelength_nm * 1e-3;
    let (lo, hi) = set.window_um;
    if !(w >= lo && w <= hi) {
        return Err(QpmError::ExtrapolationRefused {
            wavelength_um: w,
            min_um: lo,
            max_um: hi,
        });
    }
    Ok(set.term(pol).n_squared(w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn npp_like(n_x: f64, n_y: f64, r12: f64, r22: f64) -> IndexEllipsoid {
        IndexEllipsoid::new(
            n_x,
            n_y,
            1.5,
            EoCoefficients {
                r12: Some(r12),
                r22: Some(r22),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn perturbed_indices() {
        let ell = npp_like(2.0, 1.8, 65.0, 20.0);
        assert_eq!(perturbed_indices_npp(&ell, 0.0).unwrap(), (2.0, 1.8));
        let (nx, _) = perturbed_indices_npp(&ell, 1.5).unwrap();
        assert_relative_eq!(nx - 2.0, -3.9e-4, max_relative = 1e-10);
        let (nx2, ny2) = perturbed_indices_npp(&ell, 3.0).unwrap();
        let (nx1, ny1) = perturbed_indices_npp(&ell, 1.5).unwrap();
        assert_relative_eq!(nx2 - 2.0, 2.0 * (nx1 - 2.0), max_relative = 1e-12);
        assert_relative_eq!(ny2 - 1.8, 2.0 * (ny1 - 1.8), max_relative = 1e-12);
    }

    #[test]
    fn missing_coefficients() {
        let ell = IndexEllipsoid::new(2.0, 1.8, 1.5, EoCoefficients::default()).unwrap();
        assert_eq!(perturbed_indices_npp(&ell, 1.0).unwrap_err(), QpmError::MissingCoefficient("r12"));
        assert_eq!(retardation_mna(&ell, 1.0, 3.0, 633.0).unwrap_err(), QpmError::MissingCoefficient("r11"));
        assert!(IndexEllipsoid::new(0.9, 1.8, 1.5, EoCoefficients::default()).is_err());
    }

    #[test]
    fn npp_zero_field_is_birefringence() {
        let ell = npp_like(2.0, 1.8, 65.0, 20.0);
        let r = retardation_npp(&ell, 0.0, 3.0, 633.0).unwrap();
        let scale = TAU / 633e-9 * 3e-6;
        assert_relative_eq!(r.gamma, scale * (1.8 - 2.0), max_relative = 1e-12);
        assert_eq!(r.field_term, 0.0);
        assert!((0.0..TAU).contains(&r.gamma_mod_2pi));
    }

    #[test]
    fn symmetric_coefficients_cancel() {
        let ell = npp_like(1.9, 1.9, 40.0, 40.0);
        let r = retardation_npp(&ell, 2.0, 3.0, 1064.0).unwrap();
        assert_eq!(r.field_term, 0.0);
        assert_eq!(r.gamma, 0.0);
    }

    #[test]
    fn npp_decomposition_is_linear() {
        let ell = npp_like(2.0, 1.8, 65.0, 20.0);
        let g0 = retardation_npp(&ell, 0.0, 3.0, 1064.0).unwrap().gamma;
        let d1 = retardation_npp(&ell, 1.0, 3.0, 1064.0).unwrap().gamma - g0;
        for e in [0.5, 2.0, 3.7] {
            let d = retardation_npp(&ell, e, 3.0, 1064.0).unwrap().gamma - g0;
            assert_relative_eq!(d, d1 * e, max_relative = 1e-10);
        }
    }

    #[test]
    fn perturbed_indices_agree_with_retardation() {
        let ell = npp_like(2.0, 1.8, 65.0, 20.0);
        let scale = TAU / 1064e-9 * 3e-6;
        for e in [0.1, 1.0, 5.0] {
            let (nx, ny) = perturbed_indices_npp(&ell, e).unwrap();
            let from_indices = scale * (ny - nx);
            let direct = retardation_npp(&ell, e, 3.0, 1064.0).unwrap().gamma;
            assert_relative_eq!(from_indices, direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn mna_sign_and_spot_value() {
        let ell = IndexEllipsoid::new(
            2.0,
            1.8,
            1.5,
            EoCoefficients {
                r11: Some(67.0),
                r21: Some(10.0),
                ..Default::default()
            },
        )
        .unwrap();
        let g0 = retardation_mna(&ell, 0.0, 3.0, 633.0).unwrap().gamma;
        let g1 = retardation_mna(&ell, 1.0, 3.0, 633.0).unwrap().gamma;
        assert!(g1 < g0);
        // Hand evaluation: 8·67e-12 − 5.832·10e-12 = 4.7768e-10 m/V.
        let c = 299_792_458.0;
        let omega = TAU * c / 633e-9;
        let expected = omega * 3e-6 / c * (1.8 - 2.0 - 0.5 * 4.7768e-10 * 1e6);
        assert_relative_eq!(g1, expected, max_relative = 1e-12);
    }

    #[test]
    fn sellmeier_limits() {
        let flat = SellmeierTerm { a: 2.25, b: 0.0, c: 0.05 };
        let set = SellmeierSet::new(flat, flat, (0.5, 2.0)).unwrap();
        assert_relative_eq!(sellmeier_n(&set, 700.0, Polarization::X).unwrap(), 1.5);

        let t = SellmeierTerm { a: 1.5, b: 1.6, c: 0.08 };
        let wide = SellmeierSet::new(t, t, (0.5, 1e6)).unwrap();
        let far = sellmeier_n(&wide, 1e9, Polarization::Y).unwrap();
        assert_relative_eq!(far, (1.5f64 + 1.6).sqrt(), max_relative = 1e-9);

        assert!(matches!(
            sellmeier_n(&set, 400.0, Polarization::X),
            Err(QpmError::ExtrapolationRefused { .. })
        ));
        assert!(SellmeierSet::new(SellmeierTerm { a: 1.0, b: 1.0, c: 0.3 }, flat, (0.5, 2.0)).is_err());
        assert!(SellmeierSet::new(SellmeierTerm { a: 0.5, b: 0.1, c: 0.0 }, flat, (0.5, 2.0)).is_err());
    }

    #[test]
    fn polarization_parse() {
        assert_eq!("X".parse::<Polarization>().unwrap(), Polarization::X);
        assert_eq!(" y ".parse::<Polarization>().unwrap(), Polarization::Y);
        assert!("z".parse::<Polarization>().is_err());
    }
}
