//! Monte-Carlo photon transport through the layer stack.
//!
//! A photon meets one π-electron per layer. The electron's position on its
//! orbit is drawn by dwell time, and the interaction delays the photon by
//! `C·cos θ·r²` along x and `C·sin θ·r²` along y with
//! `C = √(2hν·m) / (K·Z·e²)`. Accumulated delay magnitudes give the
//! refractive indices through `n = 1 + (c₀/L)·Στ`; the signed difference
//! `ω·Σ(cos θ − sin θ)·C·r²` is the phase retardation.
//!
//! The geometric part of every layer term, `(cos θ, sin θ)·(r/u)²`, depends
//! only on the eccentricity and the uniform draw. It is accumulated once per
//! trial and scaled afterwards, so one pass serves every wavelength.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::crystal::{Degrees, LayerStack, PhysicalConstants};
use crate::error::{QpmError, Result};
use crate::orbit::{self, apply_field, FieldPerturbation, OrbitPoint, OrbitShape};
use crate::rng::LayerStream;
use crate::stats::mean_and_stderr;

const M_PER_ANGSTROM: f64 = 1e-10;
const CM2_PER_ANGSTROM2: f64 = 1e-16;

/// Default HOMO–LUMO gap in eV.
pub const DEFAULT_GAP_EV: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    pub wavelength_nm: f64,
    pub power_mw: f64,
    /// Beam diameter in µm.
    pub beamwidth_um: f64,
}

impl BeamSpec {
    pub fn new(wavelength_nm: f64, power_mw: f64, beamwidth_um: f64) -> Result<Self> {
        let beam = BeamSpec {
            wavelength_nm,
            power_mw,
            beamwidth_um,
        };
        beam.validate()?;
        Ok(beam)
    }

    /// He-Ne probe: 633 nm, 10 mW, 20 µm.
    pub fn helium_neon() -> Self {
        BeamSpec {
            wavelength_nm: 633.0,
            power_mw: 10.0,
            beamwidth_um: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_nm.is_finite() && self.wavelength_nm > 0.0) {
            return Err(QpmError::invalid("beam.wavelength_nm", "must be > 0"));
        }
        if !(self.power_mw.is_finite() && self.power_mw >= 0.0) {
            return Err(QpmError::invalid("beam.power_mw", "must be >= 0"));
        }
        if !(self.beamwidth_um.is_finite() && self.beamwidth_um > 0.0) {
            return Err(QpmError::invalid("beam.beamwidth_um", "must be > 0"));
        }
        Ok(())
    }

    pub fn with_wavelength(self, wavelength_nm: f64) -> Self {
        BeamSpec {
            wavelength_nm,
            ..self
        }
    }

    pub fn angular_frequency(&self, constants: &PhysicalConstants) -> f64 {
        TAU * constants.frequency_hz(self.wavelength_nm)
    }
}

/// Mean photon flux I/(hν) in photons·s⁻¹·cm⁻², with I = P / (π(w/2)²).
pub fn photon_flux(beam: &BeamSpec) -> f64 {
    let constants = PhysicalConstants::CODATA;
    let radius_cm = 0.5 * beam.beamwidth_um * 1e-4;
    let intensity_w_per_cm2 = beam.power_mw * 1e-3 / (std::f64::consts::PI * radius_cm * radius_cm);
    intensity_w_per_cm2 / constants.photon_energy_j(beam.wavelength_nm)
}

/// Photons per second reaching one molecule of the given cross-section (Å²).
pub fn interaction_rate(flux: f64, cross_section_angstrom2: f64) -> f64 {
    flux * cross_section_angstrom2 * CM2_PER_ANGSTROM2
}

/// Mean time between photon arrivals at one molecule, in ns.
///
/// A zero flux yields `f64::INFINITY`.
pub fn interaction_interval(flux: f64, cross_section_angstrom2: f64) -> Result<f64> {
    if !(flux.is_finite() && flux >= 0.0) {
        return Err(QpmError::invalid("flux", format!("must be >= 0, got {flux}")));
    }
    if !(cross_section_angstrom2.is_finite() && cross_section_angstrom2 > 0.0) {
        return Err(QpmError::invalid("cross_section", "must be > 0"));
    }
    Ok(1e9 / interaction_rate(flux, cross_section_angstrom2))
}

/// Photon energy hc/λ in eV, provided it stays below the HOMO–LUMO gap.
pub fn check_nonresonant(beam: &BeamSpec, gap_ev: f64) -> Result<f64> {
    if !(gap_ev.is_finite() && gap_ev > 0.0) {
        return Err(QpmError::invalid("simulation.homo_lumo_gap_ev", "must be > 0"));
    }
    let photon_ev = PhysicalConstants::CODATA.photon_energy_ev(beam.wavelength_nm);
    if photon_ev >= gap_ev {
        return Err(QpmError::Resonant { photon_ev, gap_ev });
    }
    Ok(photon_ev)
}

/// Delay prefactor √(2hν·m) / (K·Z·e²), in s/m².
pub fn delay_prefactor(frequency_hz: f64, z_eff: f64, constants: &PhysicalConstants) -> f64 {
    (2.0 * constants.h * frequency_hz * constants.m_e).sqrt()
        / (constants.k * z_eff * constants.e * constants.e)
}

/// Delays imposed by one layer, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerDelay {
    pub tau_x: f64,
    pub tau_y: f64,
    pub signed_x: f64,
    pub signed_y: f64,
}

pub fn layer_delay(
    theta: f64,
    shape: &OrbitShape,
    frequency_hz: f64,
    constants: &PhysicalConstants,
) -> LayerDelay {
    let c = delay_prefactor(frequency_hz, shape.z_eff, constants);
    let r = orbit::radius(theta, shape) * M_PER_ANGSTROM;
    let signed_x = c * theta.cos() * r * r;
    let signed_y = c * theta.sin() * r * r;
    LayerDelay {
        tau_x: signed_x.abs(),
        tau_y: signed_y.abs(),
        signed_x,
        signed_y,
    }
}

/// Where layer anomalies come from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AnomalySource {
    /// Dwell-time sampling on the Kepler orbit.
    #[default]
    Kepler,
    /// Every layer sits at the same true anomaly. Diagnostics only.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub trials: usize,
    pub seed: u64,
    pub beam: BeamSpec,
    pub stack: LayerStack,
    pub shape: OrbitShape,
    pub field: Option<FieldPerturbation>,
    pub homo_lumo_gap_ev: f64,
    pub anomaly: AnomalySource,
}

impl SimulationConfig {
    pub fn new(beam: BeamSpec, stack: LayerStack, shape: OrbitShape) -> Self {
        SimulationConfig {
            trials: 1000,
            seed: 0,
            beam,
            stack,
            shape,
            field: None,
            homo_lumo_gap_ev: DEFAULT_GAP_EV,
            anomaly: AnomalySource::Kepler,
        }
    }

    fn check(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(QpmError::invalid("simulation.trials", "must be >= 1"));
        }
        if self.stack.layer_count == 0 {
            return Err(QpmError::invalid("simulation.length_um", "stack has zero layers"));
        }
        self.beam.validate()?;
        check_window(self.beam.wavelength_nm, &self.stack)?;
        check_nonresonant(&self.beam, self.homo_lumo_gap_ev)?;
        Ok(())
    }
}

pub(crate) fn check_window(wavelength_nm: f64, stack: &LayerStack) -> Result<()> {
    let (lo, hi) = stack.transparency_window_um;
    let (min_nm, max_nm) = (lo * 1e3, hi * 1e3);
    if wavelength_nm < min_nm || wavelength_nm > max_nm {
        return Err(QpmError::OutsideWindow {
            wavelength_nm,
            min_nm,
            max_nm,
        });
    }
    Ok(())
}

/// Per-trial geometric sums over all layers, in units of u².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialSums {
    /// Σ |cos θ|·(r/u)².
    pub abs_x: f64,
    /// Σ |sin θ|·(r/u)².
    pub abs_y: f64,
    /// Σ (cos θ − sin θ)·(r/u)².
    pub signed_diff: f64,
}

impl TrialSums {
    #[inline]
    fn add(&mut self, p: OrbitPoint) {
        let rho2 = p.radius_ratio * p.radius_ratio;
        self.abs_x += p.cos_theta.abs() * rho2;
        self.abs_y += p.sin_theta.abs() * rho2;
        self.signed_diff += (p.cos_theta - p.sin_theta) * rho2;
    }
}

fn sample_one_trial(
    layers: usize,
    eccentricity: f64,
    seed: u64,
    trial: u64,
    source: AnomalySource,
) -> Result<TrialSums> {
    let mut sums = TrialSums::default();
    match source {
        AnomalySource::Kepler => {
            let mut stream = LayerStream::new(seed, trial);
            for _ in 0..layers {
                sums.add(orbit::sample_point(eccentricity, stream.next_uniform())?);
            }
        }
        AnomalySource::Fixed(theta) => {
            let p = OrbitPoint::from_theta(theta, eccentricity);
            for _ in 0..layers {
                sums.add(p);
            }
        }
    }
    Ok(sums)
}

/// Geometric sums for every trial, in trial order.
///
/// Trial `t` always uses stream `(seed, t)`, so the output does not depend on
/// how trials are scheduled across threads.
pub fn sample_trials(
    layers: usize,
    eccentricity: f64,
    trials: usize,
    seed: u64,
    source: AnomalySource,
) -> Result<Vec<TrialSums>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| sample_one_trial(layers, eccentricity, seed, t, source))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub wavelength_nm: f64,
    pub n_x: f64,
    pub n_y: f64,
    /// ω·Σ(τ_x,i − τ_y,i) with signed per-layer delays, radians.
    pub delta_phi: f64,
    /// Trial-averaged total delays Στ, seconds.
    pub sum_tau_x: f64,
    pub sum_tau_y: f64,
    /// Mean per-layer delay magnitudes, seconds.
    pub tau_x_mean: f64,
    pub tau_y_mean: f64,
    pub stderr_delta_phi: f64,
    pub stderr_n_x: f64,
    pub stderr_n_y: f64,
    pub trials_used: usize,
    pub clamp_events: usize,
    /// Eccentricity actually simulated (after any field perturbation).
    pub eccentricity: f64,
    /// Delay prefactor C in s/m².
    pub prefactor: f64,
}

/// Scales geometric trial sums into physical results at one wavelength.
pub fn summarize(
    sums: &[TrialSums],
    wavelength_nm: f64,
    stack: &LayerStack,
    shape: &OrbitShape,
    constants: &PhysicalConstants,
) -> SimulationResult {
    let frequency = constants.frequency_hz(wavelength_nm);
    let omega = TAU * frequency;
    let prefactor = delay_prefactor(frequency, shape.z_eff, constants);
    let u_m = shape.semimajor_angstrom * M_PER_ANGSTROM;
    let to_seconds = prefactor * u_m * u_m;
    let index_scale = constants.c0 / stack.crystal_length_m();

    let collect = |f: fn(&TrialSums) -> f64| -> Vec<f64> { sums.iter().map(f).collect() };
    let (ax, ax_se) = mean_and_stderr(&collect(|s| s.abs_x));
    let (ay, ay_se) = mean_and_stderr(&collect(|s| s.abs_y));
    let (d, d_se) = mean_and_stderr(&collect(|s| s.signed_diff));

    let sum_tau_x = to_seconds * ax;
    let sum_tau_y = to_seconds * ay;
    let layers = stack.layer_count as f64;
    SimulationResult {
        wavelength_nm,
        n_x: 1.0 + index_scale * sum_tau_x,
        n_y: 1.0 + index_scale * sum_tau_y,
        delta_phi: omega * to_seconds * d,
        sum_tau_x,
        sum_tau_y,
        tau_x_mean: sum_tau_x / layers,
        tau_y_mean: sum_tau_y / layers,
        stderr_delta_phi: omega * to_seconds * d_se,
        stderr_n_x: index_scale * to_seconds * ax_se,
        stderr_n_y: index_scale * to_seconds * ay_se,
        trials_used: sums.len(),
        clamp_events: 0,
        eccentricity: shape.eccentricity,
        prefactor,
    }
}

fn effective_shape(config: &SimulationConfig) -> (OrbitShape, usize) {
    match &config.field {
        Some(pert) => {
            let r = apply_field(&config.shape, pert);
            (r.shape, usize::from(r.clamped))
        }
        None => (config.shape, 0),
    }
}

/// Runs the engine at the configured wavelength.
pub fn run(config: &SimulationConfig) -> Result<SimulationResult> {
    run_wavelengths(config, &[config.beam.wavelength_nm]).map(|mut v| v.remove(0))
}

/// Runs the engine at several wavelengths sharing one set of layer draws.
pub fn run_wavelengths(config: &SimulationConfig, wavelengths_nm: &[f64]) -> Result<Vec<SimulationResult>> {
    config.check()?;
    for &w in wavelengths_nm {
        let beam = config.beam.with_wavelength(w);
        beam.validate()?;
        check_window(w, &config.stack)?;
        check_nonresonant(&beam, config.homo_lumo_gap_ev)?;
    }
    let (shape, clamp_events) = effective_shape(config);
    let sums = sample_trials(
        config.stack.layer_count,
        shape.eccentricity,
        config.trials,
        config.seed,
        config.anomaly,
    )?;
    let constants = PhysicalConstants::CODATA;
    Ok(wavelengths_nm
        .iter()
        .map(|&w| {
            let mut r = summarize(&sums, w, &config.stack, &shape, &constants);
            r.clamp_events = clamp_events;
            r
        })
        .collect())
}

/// One row of an electro-optic scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EoPoint {
    pub field_v_per_um: f64,
    pub psi: Degrees,
    pub delta_phi: f64,
    /// δ(E) = Δφ(E) − Δφ(0), paired over identical trial streams.
    pub delta: f64,
    /// Standard error of the paired difference.
    pub stderr_delta: f64,
    pub clamped: bool,
}

/// Retardation versus applied field with common random numbers.
///
/// The coupling κ comes from `config.field` (zero when absent); its magnitude
/// and angle are replaced by each scanned field and `psi`.
pub fn eo_response(config: &SimulationConfig, fields_v_per_um: &[f64], psi: Degrees) -> Result<Vec<EoPoint>> {
    if fields_v_per_um.is_empty() {
        return Err(QpmError::invalid("fields", "at least one field value required"));
    }
    if !fields_v_per_um.contains(&0.0) {
        return Err(QpmError::invalid("fields", "the scan must include E = 0"));
    }
    let coupling = config.field.map_or(0.0, |f| f.coupling);
    let base_cfg = SimulationConfig {
        field: None,
        ..config.clone()
    };
    base_cfg.check()?;

    let constants = PhysicalConstants::CODATA;
    let stack = &config.stack;
    let base_sums = sample_trials(
        stack.layer_count,
        config.shape.eccentricity,
        config.trials,
        config.seed,
        config.anomaly,
    )?;
    let base = summarize(&base_sums, config.beam.wavelength_nm, stack, &config.shape, &constants);
    let omega = config.beam.angular_frequency(&constants);
    let u_m = config.shape.semimajor_angstrom * M_PER_ANGSTROM;
    let to_radians = omega * base.prefactor * u_m * u_m;

    fields_v_per_um
        .iter()
        .map(|&e| {
            let pert = FieldPerturbation::new(e, psi, coupling)?;
            let response = apply_field(&config.shape, &pert);
            let sums = if response.shape.eccentricity == config.shape.eccentricity {
                base_sums.clone()
            } else {
                sample_trials(
                    stack.layer_count,
                    response.shape.eccentricity,
                    config.trials,
                    config.seed,
                    config.anomaly,
                )?
            };
            let here = summarize(&sums, config.beam.wavelength_nm, stack, &response.shape, &constants);
            let paired: Vec<f64> = sums
                .iter()
                .zip(&base_sums)
                .map(|(a, b)| to_radians * (a.signed_diff - b.signed_diff))
                .collect();
            let (delta, stderr_delta) = mean_and_stderr(&paired);
            Ok(EoPoint {
                field_v_per_um: e,
                psi,
                delta_phi: here.delta_phi,
                delta,
                stderr_delta,
                clamped: response.clamped,
            })
        })
        .collect()
}

/// Least-squares electro-optic coefficient from an EO scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RCoefficientFit {
    /// |R_eff| in pm/V, the analogue of |n_y³r₂₂ − n_x³r₁₂|.
    pub r_eff_pm_per_v: f64,
    /// Fitted dδ/dE in rad per V/µm (signed).
    pub slope_rad_per_v_um: f64,
}

/// Fits δ(E) = (ω·l/c₀)·½·R·E through the origin and returns |R| in pm/V.
pub fn effective_r_coefficient(
    response: &[EoPoint],
    wavelength_nm: f64,
    length_um: f64,
) -> Result<RCoefficientFit> {
    if response.len() < 2 {
        return Err(QpmError::DegenerateFit("need at least two field points".into()));
    }
    let first = response[0].field_v_per_um;
    if response.iter().all(|p| p.field_v_per_um == first) {
        return Err(QpmError::DegenerateFit("all field values are equal".into()));
    }
    let sxy: f64 = response.iter().map(|p| p.field_v_per_um * p.delta).sum();
    let sxx: f64 = response.iter().map(|p| p.field_v_per_um * p.field_v_per_um).sum();
    let slope = sxy / sxx;
    Ok(RCoefficientFit {
        r_eff_pm_per_v: r_from_slope(slope, wavelength_nm, length_um).abs(),
        slope_rad_per_v_um: slope,
    })
}

/// R (pm/V) such that (ω·l/c₀)·½·R·E has slope `slope` in rad per V/µm.
pub fn r_from_slope(slope_rad_per_v_um: f64, wavelength_nm: f64, length_um: f64) -> f64 {
    let constants = PhysicalConstants::CODATA;
    let omega = TAU * constants.frequency_hz(wavelength_nm);
    let l = length_um * 1e-6;
    // slope per (V/m) = slope / 1e6; R in m/V -> pm/V.
    2.0 * constants.c0 * slope_rad_per_v_um / (omega * l * 1e6) * 1e12
}

/// Predicted |δ| (rad) for a coefficient R (pm/V) at field E (V/µm).
pub fn predicted_delta(r_pm_per_v: f64, field_v_per_um: f64, wavelength_nm: f64, length_um: f64) -> f64 {
    let constants = PhysicalConstants::CODATA;
    let omega = TAU * constants.frequency_hz(wavelength_nm);
    omega * length_um * 1e-6 / constants.c0 * 0.5 * r_pm_per_v * 1e-12 * field_v_per_um * 1e6
}
