//! Fitting of the microscopic orbit parameters against refractive-index
//! targets, and of the field coupling κ against a measured electro-optic
//! coefficient.
//!
//! Every objective evaluation reuses the same seed and trial count, so the
//! Monte-Carlo objective is a deterministic function of the parameters.

use std::f64::consts::TAU;

use crate::classical::Polarization;
use crate::crystal::{Degrees, LayerStack, PhysicalConstants};
use crate::error::{QpmError, Result};
use crate::orbit::{FieldPerturbation, OrbitShape, ECCENTRICITY_MAX};
use crate::stats::pairwise_sum;
use crate::transport::{
    self, check_nonresonant, check_window, delay_prefactor, effective_r_coefficient, eo_response,
    predicted_delta, AnomalySource, BeamSpec, SimulationConfig, TrialSums,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub wavelength_nm: f64,
    pub polarization: Polarization,
    pub n_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBounds {
    pub eccentricity: (f64, f64),
    pub semimajor_angstrom: (f64, f64),
    pub z_eff: (f64, f64),
}

impl Default for ParameterBounds {
    /// ε ∈ [0.01, 0.6]; u between the shortest and longest benzene-ring bond
    /// lengths, [1.33, 1.52] Å; Z ∈ [1, 6].
    fn default() -> Self {
        ParameterBounds {
            eccentricity: (0.01, 0.6),
            semimajor_angstrom: (1.33, 1.52),
            z_eff: (1.0, 6.0),
        }
    }
}

impl ParameterBounds {
    pub fn validate(&self) -> Result<()> {
        let check = |key: &str, (lo, hi): (f64, f64), min_ok: f64, strict: bool| -> Result<()> {
            let lower_ok = if strict { lo > min_ok } else { lo >= min_ok };
            if !(lo.is_finite() && hi.is_finite() && lower_ok && lo <= hi) {
                return Err(QpmError::invalid(key, format!("invalid bounds ({lo}, {hi})")));
            }
            Ok(())
        };
        check("bounds.eccentricity", self.eccentricity, 0.0, false)?;
        if self.eccentricity.1 > ECCENTRICITY_MAX {
            return Err(QpmError::invalid("bounds.eccentricity", "upper bound exceeds 0.95"));
        }
        check("bounds.semimajor_angstrom", self.semimajor_angstrom, 0.0, true)?;
        check("bounds.z_eff", self.z_eff, 0.0, true)?;
        Ok(())
    }

    fn ranges(&self) -> [(f64, f64); 3] {
        [self.eccentricity, self.semimajor_angstrom, self.z_eff]
    }

    fn clamp(&self, shape: &OrbitShape) -> OrbitShape {
        OrbitShape {
            eccentricity: shape.eccentricity.clamp(self.eccentricity.0, self.eccentricity.1),
            semimajor_angstrom: shape
                .semimajor_angstrom
                .clamp(self.semimajor_angstrom.0, self.semimajor_angstrom.1),
            z_eff: shape.z_eff.clamp(self.z_eff.0, self.z_eff.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub trials: usize,
    pub seed: u64,
    /// Trial count for re-evaluating the residual at the optimum; `None` skips it.
    pub final_trials: Option<usize>,
    pub max_evaluations: usize,
    /// Simplex diameter in scaled [0, 1] coordinates that counts as converged.
    pub tolerance: f64,
    /// Starting point; clamped into the bounds.
    pub initial: OrbitShape,
    /// Initial simplex edge in scaled coordinates.
    pub initial_step: f64,
    pub homo_lumo_gap_ev: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            trials: 2_000,
            seed: 0,
            final_trials: Some(20_000),
            max_evaluations: 500,
            tolerance: 1e-4,
            initial: OrbitShape {
                eccentricity: 0.1,
                semimajor_angstrom: 1.0,
                z_eff: 2.0,
            },
            initial_step: 0.25,
            homo_lumo_gap_ev: transport::DEFAULT_GAP_EV,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub shape: OrbitShape,
    /// RMS index residual of the objective at the fitted shape.
    pub residual_rms: f64,
    /// RMS residual re-evaluated with `final_trials`.
    pub validation_rms: Option<f64>,
    /// Per-target residual n_sim − n_target at the fitted shape.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Simulated refractive index for each target at a given shape.
pub fn simulated_indices(
    targets: &[CalibrationTarget],
    stack: &LayerStack,
    shape: &OrbitShape,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let sums = transport::sample_trials(stack.layer_count, shape.eccentricity, trials, seed, AnomalySource::Kepler)?;
    Ok(indices_from_sums(targets, stack, shape, &sums))
}

fn indices_from_sums(
    targets: &[CalibrationTarget],
    stack: &LayerStack,
    shape: &OrbitShape,
    sums: &[TrialSums],
) -> Vec<f64> {
    let constants = PhysicalConstants::CODATA;
    let n = sums.len() as f64;
    let ax = pairwise_sum(&sums.iter().map(|s| s.abs_x).collect::<Vec<_>>()) / n;
    let ay = pairwise_sum(&sums.iter().map(|s| s.abs_y).collect::<Vec<_>>()) / n;
    let u_m = shape.semimajor_angstrom * 1e-10;
    let index_scale = constants.c0 / stack.crystal_length_m();
    targets
        .iter()
        .map(|t| {
            let c = delay_prefactor(constants.frequency_hz(t.wavelength_nm), shape.z_eff, &constants);
            let geometric = match t.polarization {
                Polarization::X => ax,
                Polarization::Y => ay,
            };
            1.0 + index_scale * c * u_m * u_m * geometric
        })
        .collect()
}

fn rms(residuals: &[f64]) -> f64 {
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

/// Folds a scaled coordinate back into [0, 1] by mirror reflection at the walls.
fn reflect_unit(y: f64) -> f64 {
    let t = y.rem_euclid(2.0);
    if t > 1.0 {
        2.0 - t
    } else {
        t
    }
}

struct Objective<'a> {
    targets: &'a [CalibrationTarget],
    stack: &'a LayerStack,
    bounds: [(f64, f64); 3],
    free: Vec<usize>,
    fixed: [f64; 3],
    trials: usize,
    seed: u64,
    evaluations: usize,
}

impl Objective<'_> {
    fn shape_at(&self, scaled: &[f64]) -> OrbitShape {
        let mut p = self.fixed;
        for (k, &dim) in self.free.iter().enumerate() {
            let (lo, hi) = self.bounds[dim];
            p[dim] = lo + (hi - lo) * reflect_unit(scaled[k]);
        }
        OrbitShape {
            eccentricity: p[0],
            semimajor_angstrom: p[1],
            z_eff: p[2],
        }
    }

    fn residuals(&mut self, shape: &OrbitShape) -> Result<Vec<f64>> {
        self.evaluations += 1;
        let sims = simulated_indices(self.targets, self.stack, shape, self.trials, self.seed)?;
        Ok(sims.iter().zip(self.targets).map(|(s, t)| s - t.n_target).collect())
    }

    fn value(&mut self, scaled: &[f64]) -> Result<f64> {
        let shape = self.shape_at(scaled);
        Ok(rms(&self.residuals(&shape)?))
    }
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for a in simplex {
        for b in simplex {
            let dist = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

/// Fits (ε, u, Z) to refractive-index targets with bound-reflected Nelder–Mead.
pub fn fit_shape(
    targets: &[CalibrationTarget],
    bounds: &ParameterBounds,
    stack: &LayerStack,
    settings: &FitSettings,
) -> Result<CalibrationResult> {
    if targets.len() < 3 {
        return Err(QpmError::invalid(
            "targets",
            format!("at least three targets required, got {}", targets.len()),
        ));
    }
    bounds.validate()?;
    if settings.trials < 1 {
        return Err(QpmError::invalid("calibration.trials", "must be >= 1"));
    }
    for t in targets {
        if !(t.n_target > 1.0) {
            return Err(QpmError::invalid("n_target", format!("must be > 1, got {}", t.n_target)));
        }
        check_window(t.wavelength_nm, stack)?;
        check_nonresonant(&BeamSpec::helium_neon().with_wavelength(t.wavelength_nm), settings.homo_lumo_gap_ev)?;
    }

    let ranges = bounds.ranges();
    let start = bounds.clamp(&settings.initial);
    let start_arr = [start.eccentricity, start.semimajor_angstrom, start.z_eff];
    let free: Vec<usize> = (0..3).filter(|&d| ranges[d].1 > ranges[d].0).collect();
    let mut obj = Objective {
        targets,
        stack,
        bounds: ranges,
        free: free.clone(),
        fixed: start_arr,
        trials: settings.trials,
        seed: settings.seed,
        evaluations: 0,
    };

    let x0: Vec<f64> = free
        .iter()
        .map(|&d| (start_arr[d] - ranges[d].0) / (ranges[d].1 - ranges[d].0))
        .collect();
    let f0 = obj.value(&x0)?;

    let (best, iterations, converged) = if free.is_empty() || f0 == 0.0 {
        (x0, 0, true)
    } else {
        nelder_mead(&mut obj, x0, f0, settings)?
    };

    let shape = obj.shape_at(&best);
    let residuals = obj.residuals(&shape)?;
    let residual_rms = rms(&residuals);
    let validation_rms = match settings.final_trials {
        Some(n) => {
            let sims = simulated_indices(targets, stack, &shape, n, settings.seed)?;
            let r: Vec<f64> = sims.iter().zip(targets).map(|(s, t)| s - t.n_target).collect();
            Some(rms(&r))
        }
        None => None,
    };
    Ok(CalibrationResult {
        shape,
        residual_rms,
        validation_rms,
        residuals,
        iterations,
        evaluations: obj.evaluations,
        converged,
    })
}

fn nelder_mead(
    obj: &mut Objective<'_>,
    x0: Vec<f64>,
    f0: f64,
    settings: &FitSettings,
) -> Result<(Vec<f64>, usize, bool)> {
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let dim = x0.len();
    let mut simplex = vec![x0.clone()];
    let mut values = vec![f0];
    for i in 0..dim {
        let mut v = x0.clone();
        v[i] += if v[i] + settings.initial_step <= 1.0 {
            settings.initial_step
        } else {
            -settings.initial_step
        };
        values.push(obj.value(&v)?);
        simplex.push(v);
    }

    let mut iterations = 0;
    loop {
        // Stable sort keeps ties in insertion order, so trajectories are reproducible.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if diameter(&simplex) < settings.tolerance {
            return Ok((simplex[0].clone(), iterations, true));
        }
        if obj.evaluations >= settings.max_evaluations {
            return Ok((simplex[0].clone(), iterations, false));
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|v| v[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = obj.value(&xr)?;
        if fr < values[0] {
            let xe = along(EXPAND);
            let fe = obj.value(&xe)?;
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[dim] {
            let xc = along(CONTRACT);
            let fc = obj.value(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = obj.value(&xc)?;
            (xc, fc)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = xc;
            values[dim] = fc;
            continue;
        }
        for i in 1..=dim {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + SHRINK * (v - b))
                .collect();
            values[i] = obj.value(&shrunk)?;
            simplex[i] = shrunk;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSettings {
    pub trials: usize,
    pub seed: u64,
    /// Field magnitudes (V/µm) used for the fit; must include 0.
    pub fields_v_per_um: Vec<f64>,
    /// Held-out field magnitude for the linearity check.
    pub held_out_v_per_um: f64,
    pub kappa_max: f64,
    /// Relative tolerance on the matched coefficient.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub psi: Degrees,
    pub homo_lumo_gap_ev: f64,
}

impl Default for CouplingSettings {
    fn default() -> Self {
        CouplingSettings {
            trials: 500,
            seed: 0,
            fields_v_per_um: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            held_out_v_per_um: 0.75,
            kappa_max: 0.01,
            tolerance: 1e-3,
            max_iterations: 60,
            psi: Degrees(0.0),
            homo_lumo_gap_ev: transport::DEFAULT_GAP_EV,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingFit {
    /// κ in eccentricity per V/µm.
    pub kappa: f64,
    pub r_eff_pm_per_v: f64,
    pub iterations: usize,
    /// Engine |δ| at the held-out field.
    pub held_out_delta: f64,
    /// Classical prediction (ωl/c)·½·R·E at the held-out field.
    pub held_out_predicted: f64,
    pub held_out_relative_error: f64,
}

fn coupling_config(
    beam: &BeamSpec,
    stack: &LayerStack,
    shape: &OrbitShape,
    settings: &CouplingSettings,
    kappa: f64,
) -> Result<SimulationConfig> {
    let mut cfg = SimulationConfig::new(*beam, *stack, *shape);
    cfg.trials = settings.trials;
    cfg.seed = settings.seed;
    cfg.homo_lumo_gap_ev = settings.homo_lumo_gap_ev;
    cfg.field = Some(FieldPerturbation::new(0.0, settings.psi, kappa)?);
    Ok(cfg)
}

/// Effective coefficient (pm/V) produced by the engine at coupling κ.
pub fn engine_r_eff(
    kappa: f64,
    beam: &BeamSpec,
    stack: &LayerStack,
    shape: &OrbitShape,
    settings: &CouplingSettings,
) -> Result<f64> {
    let cfg = coupling_config(beam, stack, shape, settings, kappa)?;
    let table = eo_response(&cfg, &settings.fields_v_per_um, settings.psi)?;
    Ok(effective_r_coefficient(&table, beam.wavelength_nm, stack.crystal_length_um)?.r_eff_pm_per_v)
}

/// Finds κ ∈ [0, κ_max] whose simulated effective coefficient matches the target.
///
/// Regula falsi with the Illinois modification on the bracket [0, κ_max],
/// followed by a held-out-field comparison against the classical formula.
pub fn fit_field_coupling(
    target_r_pm_per_v: f64,
    beam: &BeamSpec,
    stack: &LayerStack,
    shape: &OrbitShape,
    settings: &CouplingSettings,
) -> Result<CouplingFit> {
    if !(target_r_pm_per_v.is_finite() && target_r_pm_per_v >= 0.0) {
        return Err(QpmError::invalid("target_r_pm_per_v", "must be >= 0"));
    }
    if !(settings.kappa_max > 0.0) {
        return Err(QpmError::invalid("kappa_max", "must be > 0"));
    }
    let length = stack.crystal_length_um;
    let wl = beam.wavelength_nm;
    let held_out_predicted = predicted_delta(target_r_pm_per_v, settings.held_out_v_per_um, wl, length);

    if target_r_pm_per_v == 0.0 {
        return Ok(CouplingFit {
            kappa: 0.0,
            r_eff_pm_per_v: 0.0,
            iterations: 0,
            held_out_delta: 0.0,
            held_out_predicted,
            held_out_relative_error: 0.0,
        });
    }

    let g = |kappa: f64| -> Result<f64> { Ok(engine_r_eff(kappa, beam, stack, shape, settings)? - target_r_pm_per_v) };
    let (mut a, mut fa) = (0.0, -target_r_pm_per_v);
    let (mut b, mut fb) = (settings.kappa_max, g(settings.kappa_max)?);
    if fb < 0.0 {
        return Err(QpmError::Unreachable(format!(
            "target {target_r_pm_per_v} pm/V unreachable: κ ∈ [0, {}] spans R_eff ∈ [0, {:.3}] pm/V",
            settings.kappa_max,
            fb + target_r_pm_per_v
        )));
    }

    let mut iterations = 0;
    let mut side = 0i8;
    let (kappa, f_kappa) = loop {
        iterations += 1;
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(c)?;
        if (fc / target_r_pm_per_v).abs() < settings.tolerance {
            break (c, fc);
        }
        if iterations >= settings.max_iterations {
            return Err(QpmError::NonConvergence(format!(
                "κ search stalled after {iterations} iterations at κ = {c}"
            )));
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa /= 2.0;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb /= 2.0;
            }
            side = -1;
        }
    };

    let cfg = coupling_config(beam, stack, shape, settings, kappa)?;
    let held = eo_response(&cfg, &[0.0, settings.held_out_v_per_um], settings.psi)?;
    let held_out_delta = held[1].delta.abs();
    Ok(CouplingFit {
        kappa,
        r_eff_pm_per_v: f_kappa + target_r_pm_per_v,
        iterations,
        held_out_delta,
        held_out_predicted,
        held_out_relative_error: (held_out_delta - held_out_predicted).abs() / held_out_predicted,
    })
}

/// Closed-form time average of cos θ·(r/u)² over a Kepler orbit: −(2ε + ε³/2).
pub fn mean_signed_x_geometry(eccentricity: f64) -> f64 {
    -(2.0 * eccentricity + 0.5 * eccentricity.powi(3))
}

/// Expected Δφ for an unperturbed orbit from the closed-form orbit average.
pub fn expected_delta_phi(shape: &OrbitShape, stack: &LayerStack, wavelength_nm: f64) -> f64 {
    let c = PhysicalConstants::CODATA;
    let nu = c.frequency_hz(wavelength_nm);
    let u_m = shape.semimajor_angstrom * 1e-10;
    TAU * nu
        * delay_prefactor(nu, shape.z_eff, &c)
        * u_m
        * u_m
        * stack.layer_count as f64
        * mean_signed_x_geometry(shape.eccentricity)
}
