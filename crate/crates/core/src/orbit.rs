//! The π-electron as a particle on a Kepler ellipse with the effective
//! positive charge at one focus.
//!
//! Positions are sampled in time: the fraction of the period spent before
//! reaching true anomaly θ is the CDF of the electron position, so inverting
//! it against a uniform draw yields θ distributed by dwell time. The orbital
//! period itself never appears; only the fraction t/T does.
//!
//! θ = 0 is perigee (donor side), θ = π is apogee (acceptor side).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::crystal::Degrees;
use crate::error::{QpmError, Result};

/// Upper eccentricity guard; the sampler and PDF are only trusted below it.
pub const ECCENTRICITY_MAX: f64 = 0.95;

const KEPLER_TOL: f64 = 1e-12;
const KEPLER_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitShape {
    pub eccentricity: f64,
    /// Semimajor axis u in Å.
    pub semimajor_angstrom: f64,
    /// Effective positive charge Z at the focus.
    pub z_eff: f64,
}

impl OrbitShape {
    pub fn new(eccentricity: f64, semimajor_angstrom: f64, z_eff: f64) -> Result<Self> {
        check_eccentricity(eccentricity)?;
        if !(semimajor_angstrom.is_finite() && semimajor_angstrom > 0.0) {
            return Err(QpmError::invalid(
                "orbit.semimajor_angstrom",
                format!("must be > 0, got {semimajor_angstrom}"),
            ));
        }
        if !(z_eff.is_finite() && z_eff > 0.0) {
            return Err(QpmError::invalid("orbit.z_eff", format!("must be > 0, got {z_eff}")));
        }
        Ok(OrbitShape {
            eccentricity,
            semimajor_angstrom,
            z_eff,
        })
    }

    /// Fitted NPP orbit: ε = 0.26, u = 1.4 Å, Z = 3.9.
    pub fn npp() -> Self {
        OrbitShape {
            eccentricity: 0.26,
            semimajor_angstrom: 1.4,
            z_eff: 3.9,
        }
    }
}

/// Applied transverse field and its coupling to the orbit eccentricity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPerturbation {
    pub field_v_per_um: f64,
    /// Angle ψ between the field and the charge-transfer axis.
    pub angle: Degrees,
    /// κ, eccentricity change per V/µm along the charge-transfer axis.
    pub coupling: f64,
}

impl FieldPerturbation {
    pub fn new(field_v_per_um: f64, angle: Degrees, coupling: f64) -> Result<Self> {
        if !(field_v_per_um.is_finite() && field_v_per_um >= 0.0) {
            return Err(QpmError::invalid(
                "field.magnitude_v_per_um",
                format!("must be >= 0, got {field_v_per_um}"),
            ));
        }
        if !(0.0..=180.0).contains(&angle.0) {
            return Err(QpmError::invalid(
                "field.psi_deg",
                format!("must lie in [0, 180], got {}", angle.0),
            ));
        }
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(QpmError::invalid(
                "orbit.kappa_per_v_um",
                format!("must be >= 0, got {coupling}"),
            ));
        }
        Ok(FieldPerturbation {
            field_v_per_um,
            angle,
            coupling,
        })
    }
}

/// Outcome of [`apply_field`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldResponse {
    pub shape: OrbitShape,
    /// True when the perturbed eccentricity had to be clamped to [0, 0.95].
    pub clamped: bool,
}

/// Position on the orbit expressed without the true anomaly itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitPoint {
    pub cos_theta: f64,
    pub sin_theta: f64,
    /// r / u.
    pub radius_ratio: f64,
}

fn check_eccentricity(eccentricity: f64) -> Result<()> {
    if (0.0..=ECCENTRICITY_MAX).contains(&eccentricity) {
        Ok(())
    } else {
        Err(QpmError::EccentricityOutOfRange(eccentricity))
    }
}

/// Eccentric anomaly in [0, 2π] for a true anomaly in [0, 2π).
fn true_to_eccentric(theta: f64, eccentricity: f64) -> f64 {
    let half = 0.5 * theta;
    2.0 * f64::atan2(
        (1.0 - eccentricity).sqrt() * half.sin(),
        (1.0 + eccentricity).sqrt() * half.cos(),
    )
}

fn eccentric_to_true(ecc_anomaly: f64, eccentricity: f64) -> f64 {
    let half = 0.5 * ecc_anomaly;
    let theta = 2.0
        * f64::atan2(
            (1.0 + eccentricity).sqrt() * half.sin(),
            (1.0 - eccentricity).sqrt() * half.cos(),
        );
    if theta >= TAU {
        theta - TAU
    } else {
        theta
    }
}

/// Fraction of the period t/T needed to sweep from perigee to true anomaly θ.
///
/// Uses the eccentric-anomaly form `(E − ε sin E) / 2π`, which is continuous
/// and strictly increasing over the whole orbit (the principal-branch arctan
/// form jumps at θ = π).
pub fn kepler_time_fraction(theta: f64, eccentricity: f64) -> Result<f64> {
    check_eccentricity(eccentricity)?;
    let theta = theta.rem_euclid(TAU);
    let e_anom = true_to_eccentric(theta, eccentricity);
    Ok((e_anom - eccentricity * e_anom.sin()) / TAU)
}

/// Dwell-time density of the true anomaly, d(t/T)/dθ.
pub fn orbit_pdf(theta: f64, eccentricity: f64) -> Result<f64> {
    check_eccentricity(eccentricity)?;
    let denom = 1.0 + eccentricity * theta.cos();
    Ok((1.0 - eccentricity * eccentricity).powf(1.5) / (TAU * denom * denom))
}

/// Solves Kepler's equation `M = E − ε sin E` for E ∈ [0, 2π].
///
/// Damped Newton inside a shrinking bracket; falls back to bisection whenever
/// the Newton step leaves the bracket.
pub fn solve_kepler(mean_anomaly: f64, eccentricity: f64) -> Result<f64> {
    check_eccentricity(eccentricity)?;
    let m = mean_anomaly;
    if eccentricity == 0.0 {
        return Ok(m);
    }
    let (mut lo, mut hi) = (0.0, TAU);
    let mut e_anom = if eccentricity > 0.8 {
        PI
    } else {
        let (s, c) = m.sin_cos();
        m + eccentricity * s * (1.0 + eccentricity * c)
    };
    e_anom = e_anom.clamp(lo, hi);
    for _ in 0..KEPLER_MAX_ITER {
        let (s, c) = e_anom.sin_cos();
        let f = e_anom - eccentricity * s - m;
        if f == 0.0 {
            return Ok(e_anom);
        }
        if f < 0.0 {
            lo = e_anom;
        } else {
            hi = e_anom;
        }
        let fp = 1.0 - eccentricity * c;
        let mut step = f / fp;
        // Damping: never move more than a radian per iteration.
        if step.abs() > 1.0 {
            step = step.signum();
        }
        let mut next = e_anom - step;
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - e_anom).abs() < KEPLER_TOL {
            return Ok(next);
        }
        e_anom = next;
    }
    Err(QpmError::NonConvergence(format!(
        "Kepler solve did not converge for M = {m}, ε = {eccentricity}"
    )))
}

fn check_draw(uniform_draw: f64) -> Result<()> {
    if (0.0..1.0).contains(&uniform_draw) {
        Ok(())
    } else {
        Err(QpmError::invalid(
            "uniform_draw",
            format!("must lie in [0, 1), got {uniform_draw}"),
        ))
    }
}

/// Inverse-transform sample of the true anomaly: solves t/T = `uniform_draw` for θ.
pub fn sample_anomaly(eccentricity: f64, uniform_draw: f64) -> Result<f64> {
    check_draw(uniform_draw)?;
    let e_anom = solve_kepler(TAU * uniform_draw, eccentricity)?;
    Ok(eccentric_to_true(e_anom, eccentricity))
}

/// Same draw as [`sample_anomaly`], returned as (cos θ, sin θ, r/u) straight
/// from the eccentric anomaly.
pub fn sample_point(eccentricity: f64, uniform_draw: f64) -> Result<OrbitPoint> {
    check_draw(uniform_draw)?;
    let e_anom = solve_kepler(TAU * uniform_draw, eccentricity)?;
    let (s, c) = e_anom.sin_cos();
    let radius_ratio = 1.0 - eccentricity * c;
    Ok(OrbitPoint {
        cos_theta: (c - eccentricity) / radius_ratio,
        sin_theta: (1.0 - eccentricity * eccentricity).sqrt() * s / radius_ratio,
        radius_ratio,
    })
}

impl OrbitPoint {
    pub fn from_theta(theta: f64, eccentricity: f64) -> Self {
        let (sin_theta, cos_theta) = theta.sin_cos();
        OrbitPoint {
            cos_theta,
            sin_theta,
            radius_ratio: (1.0 - eccentricity * eccentricity) / (1.0 + eccentricity * cos_theta),
        }
    }
}

/// Focal radius r = (1 − ε²)u / (1 + ε cos θ), in Å.
pub fn radius(theta: f64, shape: &OrbitShape) -> f64 {
    let e = shape.eccentricity;
    (1.0 - e * e) * shape.semimajor_angstrom / (1.0 + e * theta.cos())
}

/// Field-deformed orbit: ε' = clamp(ε + κ·|E|·cos ψ, 0, 0.95); u and Z unchanged.
pub fn apply_field(shape: &OrbitShape, pert: &FieldPerturbation) -> FieldResponse {
    let shift = pert.coupling * pert.field_v_per_um * pert.angle.cos();
    let raw = shape.eccentricity + shift;
    let eccentricity = raw.clamp(0.0, ECCENTRICITY_MAX);
    FieldResponse {
        shape: OrbitShape {
            eccentricity,
            ..*shape
        },
        clamped: eccentricity != raw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Literal principal-branch arctan form, valid on (0, π).
    fn literal_time_fraction(theta: f64, e: f64) -> f64 {
        let first = 2.0 * (((1.0 - e) / (1.0 + e)).sqrt() * (theta / 2.0).tan()).atan();
        let second = e * (1.0 - e * e).sqrt() * theta.sin() / (1.0 + e * theta.cos());
        (first - second) / TAU
    }

    #[test]
    fn time_fraction_examples() {
        assert_relative_eq!(kepler_time_fraction(PI, 0.26).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(kepler_time_fraction(1.3, 0.0).unwrap(), 1.3 / TAU, max_relative = 1e-15);
        // Frozen from an arbitrary-precision equal-areas quadrature.
        assert_relative_eq!(
            kepler_time_fraction(PI / 2.0, 0.26).unwrap(),
            0.168_181_556_323_641_9,
            max_relative = 1e-13
        );
    }

    #[test]
    fn agrees_with_literal_form_on_upper_half() {
        for &e in &[0.0, 0.1, 0.26, 0.5, 0.8, 0.95] {
            for k in 1..1000 {
                let theta = PI * k as f64 / 1000.0;
                let a = kepler_time_fraction(theta, e).unwrap();
                let b = literal_time_fraction(theta, e);
                assert!(((a - b) / b).abs() < 1e-12, "θ={theta} ε={e}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn out_of_range_eccentricity() {
        assert!(matches!(
            kepler_time_fraction(1.0, 0.96),
            Err(QpmError::EccentricityOutOfRange(_))
        ));
        assert!(orbit_pdf(1.0, -0.1).is_err());
        assert!(sample_anomaly(1.0, 0.5).is_err());
        assert!(sample_anomaly(0.2, 1.0).is_err());
        assert!(OrbitShape::new(0.26, 0.0, 3.9).is_err());
        assert!(OrbitShape::new(0.26, 1.4, 0.0).is_err());
    }

    #[test]
    fn pdf_examples() {
        assert_relative_eq!(orbit_pdf(2.0, 0.0).unwrap(), 1.0 / TAU, max_relative = 1e-15);
        let ratio = orbit_pdf(PI, 0.26).unwrap() / orbit_pdf(0.0, 0.26).unwrap();
        assert_relative_eq!(ratio, 2.899_196_493_791_088, max_relative = 1e-12);
    }

    #[test]
    fn pdf_normalized_and_peaks_at_apogee() {
        for &e in &[0.0, 0.26, 0.7, 0.95] {
            let n = 200_000;
            let h = TAU / n as f64;
            let total: f64 = (0..n)
                .map(|i| orbit_pdf((i as f64 + 0.5) * h, e).unwrap() * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "ε={e}: {total}");
        }
        let max = orbit_pdf(PI, 0.26).unwrap();
        let min = orbit_pdf(0.0, 0.26).unwrap();
        for k in 0..360 {
            let p = orbit_pdf(k as f64 * TAU / 360.0, 0.26).unwrap();
            assert!(p <= max && p >= min);
        }
    }

    #[test]
    fn pdf_matches_finite_difference() {
        let h = 1e-5;
        for &e in &[0.0, 0.26, 0.6, 0.95] {
            for k in 1..200 {
                let theta = TAU * k as f64 / 200.0;
                let fd = (kepler_time_fraction(theta + h, e).unwrap()
                    - kepler_time_fraction(theta - h, e).unwrap())
                    / (2.0 * h);
                assert!((fd - orbit_pdf(theta, e).unwrap()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn time_fraction_strictly_increasing() {
        for &e in &[0.0, 0.26, 0.5, 0.9, 0.95] {
            let mut prev = -1.0;
            for k in 0..10_000 {
                let t = kepler_time_fraction(TAU * k as f64 / 10_000.0, e).unwrap();
                assert!(t > prev, "ε={e} k={k}");
                prev = t;
            }
        }
    }

    #[test]
    fn sampler_examples() {
        assert_relative_eq!(sample_anomaly(0.26, 0.5).unwrap(), PI, epsilon = 1e-12);
        assert_relative_eq!(sample_anomaly(0.0, 0.25).unwrap(), PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(
            sample_anomaly(0.26, 0.168_181_556_323_641_9).unwrap(),
            PI / 2.0,
            epsilon = 1e-12
        );
        assert_eq!(sample_anomaly(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sampler_converges_on_dense_grid() {
        for ei in 0..=95 {
            let e = ei as f64 / 100.0;
            for k in 0..2000 {
                let s = k as f64 / 2000.0;
                let theta = sample_anomaly(e, s).unwrap();
                assert!((0.0..TAU).contains(&theta));
            }
        }
        let nearly_one = 1.0 - f64::EPSILON;
        assert!(sample_anomaly(0.95, nearly_one).is_ok());
    }

    #[test]
    fn point_matches_theta_route() {
        for &e in &[0.0, 0.26, 0.9] {
            for k in 0..500 {
                let s = k as f64 / 500.0;
                let p = sample_point(e, s).unwrap();
                let q = OrbitPoint::from_theta(sample_anomaly(e, s).unwrap(), e);
                assert!((p.cos_theta - q.cos_theta).abs() < 1e-12);
                assert!((p.sin_theta - q.sin_theta).abs() < 1e-12);
                assert!((p.radius_ratio - q.radius_ratio).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn radius_examples() {
        let shape = OrbitShape::npp();
        assert_relative_eq!(radius(PI, &shape), 1.764, max_relative = 1e-14);
        assert_relative_eq!(radius(PI / 2.0, &shape), 1.30536, max_relative = 1e-14);
        let circle = OrbitShape::new(0.0, 1.4, 3.9).unwrap();
        assert_relative_eq!(radius(0.0, &circle), 1.4);
        assert_relative_eq!(radius(0.0, &shape), (1.0 - 0.26) * 1.4, max_relative = 1e-14);
    }

    #[test]
    fn field_examples() {
        let shape = OrbitShape::npp();
        let zero = FieldPerturbation::new(1.5, Degrees(0.0), 0.0).unwrap();
        assert_eq!(apply_field(&shape, &zero).shape.eccentricity, 0.26);
        let perp = FieldPerturbation::new(1.5, Degrees(90.0), 0.01).unwrap();
        assert_eq!(apply_field(&shape, &perp).shape.eccentricity, 0.26);
        let along = FieldPerturbation::new(1.5, Degrees(0.0), 0.01).unwrap();
        let r = apply_field(&shape, &along);
        assert_relative_eq!(r.shape.eccentricity, 0.275, max_relative = 1e-14);
        assert!(!r.clamped);
        assert_eq!(r.shape.semimajor_angstrom, 1.4);
        assert_eq!(r.shape.z_eff, 3.9);

        let huge = FieldPerturbation::new(100.0, Degrees(0.0), 0.1).unwrap();
        let r = apply_field(&shape, &huge);
        assert_eq!(r.shape.eccentricity, ECCENTRICITY_MAX);
        assert!(r.clamped);
        let anti = FieldPerturbation::new(100.0, Degrees(180.0), 0.1).unwrap();
        assert_eq!(apply_field(&shape, &anti).shape.eccentricity, 0.0);

        assert!(FieldPerturbation::new(-1.0, Degrees(0.0), 0.1).is_err());
        assert!(FieldPerturbation::new(1.0, Degrees(181.0), 0.1).is_err());
        assert!(FieldPerturbation::new(1.0, Degrees(0.0), -0.1).is_err());
    }

    proptest! {
        #[test]
        fn sampler_inverts_time_fraction(e in 0.0f64..=0.95, theta in 0.0f64..TAU) {
            let s = kepler_time_fraction(theta, e).unwrap();
            prop_assume!(s < 1.0);
            let back = sample_anomaly(e, s).unwrap();
            let diff = (back - theta).abs().min(TAU - (back - theta).abs());
            prop_assert!(diff < 1e-9, "θ={} back={}", theta, back);
        }

        #[test]
        fn field_antisymmetric_in_angle(
            kappa in 0.0f64..0.01, field in 0.0f64..2.0, psi in 0.0f64..=180.0
        ) {
            let shape = OrbitShape::npp();
            let a = apply_field(&shape, &FieldPerturbation::new(field, Degrees(psi), kappa).unwrap());
            let b = apply_field(&shape, &FieldPerturbation::new(field, Degrees(180.0 - psi), kappa).unwrap());
            let up = a.shape.eccentricity - shape.eccentricity;
            let down = b.shape.eccentricity - shape.eccentricity;
            prop_assert!((up + down).abs() < 1e-14);
        }
    }
}
