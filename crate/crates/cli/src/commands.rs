use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use qpm_core::calibration::{
    fit_field_coupling, fit_shape, CalibrationTarget, CouplingFit, CouplingSettings, FitSettings, ParameterBounds,
};
use qpm_core::classical::{retardation_mna, retardation_npp, sellmeier_n};
use qpm_core::config::{MaterialData, PiSystemFile, QpmConfig, BUNDLED_NPP, BUNDLED_NPP_MATERIAL, BUNDLED_NPP_RING};
use qpm_core::crystal::molecule_cross_section;
use qpm_core::huckel;
use qpm_core::transport::{
    effective_r_coefficient, eo_response, interaction_interval, interaction_rate, photon_flux, run_wavelengths,
};
use qpm_core::{Degrees, FieldPerturbation, IndexEllipsoid, Polarization, QpmError, SimulationConfig};

use crate::manifest::{Inputs, BUNDLED_CONFIG_KEY, BUNDLED_RING_KEY};
use crate::{
    AngleScanArgs, CalibrateArgs, ClassicalArgs, Cli, Command, CrystalKind, DispersionArgs, EoScanArgs, FluxArgs,
    HuckelArgs, Output,
};

const BUNDLED_MATERIAL_KEY: &str = "<bundled>/npp_material.cfg";

fn invalid(key: &str, reason: impl Into<String>) -> anyhow::Error {
    QpmError::InvalidParameter {
        key: key.to_string(),
        reason: reason.into(),
    }
    .into()
}

struct Loaded {
    config: QpmConfig,
    key: String,
}

impl Loaded {
    fn new(cli: &Cli, inputs: &mut Inputs) -> Result<Self> {
        let (text, key) = match &cli.config {
            Some(path) => {
                let key = path.display().to_string();
                (inputs.read(&key)?, key)
            }
            None => (inputs.bundled(BUNDLED_CONFIG_KEY, BUNDLED_NPP), BUNDLED_CONFIG_KEY.to_string()),
        };
        let mut config = QpmConfig::parse(&text)?;
        if let Some(seed) = cli.seed {
            config.simulation.seed = seed;
        }
        if let Some(trials) = cli.trials {
            config.simulation.trials = trials;
        }
        config.validate()?;
        Ok(Loaded { config, key })
    }

    fn material(&self, inputs: &mut Inputs) -> Result<MaterialData> {
        let rel = self
            .config
            .material
            .sellmeier_path
            .as_deref()
            .ok_or_else(|| invalid("material.sellmeier_path", "no material file configured"))?;
        let text = if self.key == BUNDLED_CONFIG_KEY && rel == "npp_material.cfg" {
            inputs.bundled(BUNDLED_MATERIAL_KEY, BUNDLED_NPP_MATERIAL)
        } else {
            let base = if self.key == BUNDLED_CONFIG_KEY {
                Path::new("")
            } else {
                Path::new(&self.key).parent().unwrap_or(Path::new(""))
            };
            inputs.read(&base.join(rel).display().to_string())?
        };
        Ok(MaterialData::parse(&text)?)
    }

    fn output(&self, body: Vec<u8>, summary: Option<String>) -> Output {
        Output {
            body,
            summary,
            not_converged: false,
            seed: self.config.simulation.seed,
            trials: self.config.simulation.trials,
        }
    }
}

fn with_kappa(mut cfg: SimulationConfig, kappa: Option<f64>) -> Result<SimulationConfig> {
    if let Some(k) = kappa {
        cfg.field = Some(FieldPerturbation::new(0.0, Degrees(0.0), k)?);
    }
    Ok(cfg)
}

fn csv_body(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

/// Inclusive grid from `from` to `to`.
fn grid(key: &str, from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid(key, "step must be > 0"));
    }
    if !(from.is_finite() && to.is_finite() && from <= to) {
        return Err(invalid(key, format!("empty range [{from}, {to}]")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| from + i as f64 * step).collect())
}

pub fn dispatch(cli: &Cli, inputs: &mut Inputs) -> Result<Output> {
    match &cli.command {
        Command::Dispersion(a) => dispersion(cli, inputs, a),
        Command::EoScan(a) => eo_scan(cli, inputs, a),
        Command::AngleScan(a) => angle_scan(cli, inputs, a),
        Command::Calibrate(a) => calibrate(cli, inputs, a),
        Command::Huckel(a) => huckel_cmd(cli, inputs, a),
        Command::Classical(a) => classical(cli, inputs, a),
        Command::Flux(a) => flux(cli, inputs, a),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

fn dispersion(cli: &Cli, inputs: &mut Inputs, a: &DispersionArgs) -> Result<Output> {
    let loaded = Loaded::new(cli, inputs)?;
    let wavelengths = grid("step_nm", a.from_nm, a.to_nm, a.step_nm)?;
    let results = run_wavelengths(&loaded.config.simulation_config()?, &wavelengths)?;
    let body = csv_body(
        &["wavelength_nm", "n_x", "n_y", "delta_phi_rad", "stderr_rad"],
        results.iter().map(|r| {
            vec![
                r.wavelength_nm.to_string(),
                sci(r.n_x),
                sci(r.n_y),
                sci(r.delta_phi),
                sci(r.stderr_delta_phi),
            ]
        }),
    )?;
    Ok(loaded.output(body, None))
}

fn eo_scan(cli: &Cli, inputs: &mut Inputs, a: &EoScanArgs) -> Result<Output> {
    let loaded = Loaded::new(cli, inputs)?;
    let cfg = with_kappa(loaded.config.simulation_config()?, a.kappa)?;
    let points = eo_response(&cfg, &a.fields, Degrees(a.psi_deg))?;
    let body = csv_body(
        &["field_v_per_um", "psi_deg", "delta_phi_rad", "delta_rad", "stderr_rad"],
        points.iter().map(|p| {
            vec![
                p.field_v_per_um.to_string(),
                p.psi.0.to_string(),
                sci(p.delta_phi),
                sci(p.delta),
                sci(p.stderr_delta),
            ]
        }),
    )?;
    let summary = effective_r_coefficient(&points, cfg.beam.wavelength_nm, cfg.stack.crystal_length_um)
        .ok()
        .map(|fit| format!("R_eff = {:.4} pm/V", fit.r_eff_pm_per_v));
    Ok(loaded.output(body, summary))
}

fn angle_scan(cli: &Cli, inputs: &mut Inputs, a: &AngleScanArgs) -> Result<Output> {
    let loaded = Loaded::new(cli, inputs)?;
    if !(a.field.is_finite() && a.field > 0.0) {
        return Err(invalid("field", "must be > 0"));
    }
    let cfg = with_kappa(loaded.config.simulation_config()?, a.kappa)?;
    let angles = grid("psi_step", a.psi_from, a.psi_to, a.psi_step)?;
    let mut rows = Vec::with_capacity(angles.len());
    for psi in angles {
        let points = eo_response(&cfg, &[0.0, a.field], Degrees(psi))?;
        let p = points[1];
        rows.push(vec![
            psi.to_string(),
            p.field_v_per_um.to_string(),
            sci(p.delta_phi),
            sci(p.delta),
            sci(p.stderr_delta),
        ]);
    }
    let body = csv_body(&["psi_deg", "field_v_per_um", "delta_phi_rad", "delta_rad", "stderr_rad"], rows)?;
    Ok(loaded.output(body, None))
}

#[derive(Debug, Deserialize)]
struct TargetRow {
    wavelength_nm: f64,
    polarization: String,
    n_target: f64,
}

fn read_targets(inputs: &mut Inputs, path: &Path) -> Result<Vec<CalibrationTarget>> {
    let text = inputs.read(&path.display().to_string())?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut targets = Vec::new();
    for (i, row) in reader.deserialize::<TargetRow>().enumerate() {
        let row = row.map_err(|e| invalid(&format!("targets[{i}]"), e.to_string()))?;
        targets.push(CalibrationTarget {
            wavelength_nm: row.wavelength_nm,
            polarization: row.polarization.parse::<Polarization>()?,
            n_target: row.n_target,
        });
    }
    Ok(targets)
}

#[derive(Serialize)]
struct OrbitOut {
    eccentricity: f64,
    semimajor_angstrom: f64,
    z_eff: f64,
    kappa_per_v_um: f64,
}

#[derive(Serialize)]
struct FitOut {
    residual_rms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    validation_rms: Option<f64>,
    residuals: Vec<f64>,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct CouplingOut {
    wavelength_nm: f64,
    target_r_eff_pm_per_v: f64,
    r_eff_pm_per_v: f64,
    iterations: usize,
    held_out_field_v_per_um: f64,
    held_out_delta_rad: f64,
    held_out_predicted_rad: f64,
    held_out_relative_error: f64,
}

#[derive(Serialize)]
struct CalibrationOut {
    orbit: OrbitOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coupling: Option<CouplingOut>,
}

fn calibrate(cli: &Cli, inputs: &mut Inputs, a: &CalibrateArgs) -> Result<Output> {
    let loaded = Loaded::new(cli, inputs)?;
    if a.targets.is_none() && a.r_eff_pm_v.is_none() {
        return Err(invalid("calibrate", "give --targets, --r-eff-pm-v, or both"));
    }
    let cfg = &loaded.config;
    let stack = cfg.stack()?;
    let mut shape = cfg.shape()?;
    let mut kappa = cfg.orbit.kappa_per_v_um;
    let mut summary = Vec::new();
    let mut not_converged = false;

    let fit = match &a.targets {
        Some(path) => {
            let targets = read_targets(inputs, path)?;
            let settings = FitSettings {
                trials: a.fit_trials,
                seed: cfg.simulation.seed,
                final_trials: Some(a.final_trials),
                max_evaluations: a.max_evaluations,
                homo_lumo_gap_ev: cfg.simulation.homo_lumo_gap_ev,
                ..FitSettings::default()
            };
            let result = fit_shape(&targets, &ParameterBounds::default(), &stack, &settings)?;
            shape = result.shape;
            not_converged = !result.converged;
            summary.push(format!(
                "shape: eccentricity = {:.5}, u = {:.5} Å, Z = {:.5}, rms = {:.3e}{}",
                shape.eccentricity,
                shape.semimajor_angstrom,
                shape.z_eff,
                result.validation_rms.unwrap_or(result.residual_rms),
                if result.converged { "" } else { " (not converged)" }
            ));
            Some(FitOut {
                residual_rms: result.residual_rms,
                validation_rms: result.validation_rms,
                residuals: result.residuals,
                iterations: result.iterations,
                evaluations: result.evaluations,
                converged: result.converged,
            })
        }
        None => None,
    };

    let coupling = match a.r_eff_pm_v {
        Some(target) => {
            let beam = cfg.beam()?.with_wavelength(a.wavelength_nm.unwrap_or(cfg.beam.wavelength_nm));
            let settings = CouplingSettings {
                trials: cfg.simulation.trials,
                seed: cfg.simulation.seed,
                homo_lumo_gap_ev: cfg.simulation.homo_lumo_gap_ev,
                ..CouplingSettings::default()
            };
            let c: CouplingFit = fit_field_coupling(target, &beam, &stack, &shape, &settings)?;
            kappa = c.kappa;
            summary.push(format!(
                "coupling: kappa = {:.6e} per V/µm, R_eff = {:.4} pm/V, held-out error = {:.2}%",
                c.kappa,
                c.r_eff_pm_per_v,
                100.0 * c.held_out_relative_error
            ));
            Some(CouplingOut {
                wavelength_nm: beam.wavelength_nm,
                target_r_eff_pm_per_v: target,
                r_eff_pm_per_v: c.r_eff_pm_per_v,
                iterations: c.iterations,
                held_out_field_v_per_um: settings.held_out_v_per_um,
                held_out_delta_rad: c.held_out_delta,
                held_out_predicted_rad: c.held_out_predicted,
                held_out_relative_error: c.held_out_relative_error,
            })
        }
        None => None,
    };

    let out = CalibrationOut {
        orbit: OrbitOut {
            eccentricity: shape.eccentricity,
            semimajor_angstrom: shape.semimajor_angstrom,
            z_eff: shape.z_eff,
            kappa_per_v_um: kappa,
        },
        fit,
        coupling,
    };
    let mut output = loaded.output(toml::to_string(&out)?.into_bytes(), Some(summary.join("\n")));
    output.not_converged = not_converged;
    Ok(output)
}

fn huckel_cmd(cli: &Cli, inputs: &mut Inputs, a: &HuckelArgs) -> Result<Output> {
    let text = match &a.system {
        Some(path) => inputs.read(&path.display().to_string())?,
        None => inputs.bundled(BUNDLED_RING_KEY, BUNDLED_NPP_RING),
    };
    let file = PiSystemFile::parse(&text)?;
    let mo = huckel::solve(&file.system)?;
    let weights = mo.symmetrized_weights(1e-8);
    let n = mo.energies.len();

    let mut rows = Vec::new();
    for (o, e) in mo.energies.iter().enumerate() {
        rows.push(vec!["energy".into(), o.to_string(), String::new(), sci(*e)]);
    }
    for o in 0..n {
        for atom in 0..n {
            rows.push(vec!["coefficient".into(), o.to_string(), atom.to_string(), sci(mo.coefficient(o, atom))]);
        }
    }
    for (o, row) in weights.iter().enumerate() {
        for (atom, w) in row.iter().enumerate() {
            rows.push(vec!["weight".into(), o.to_string(), atom.to_string(), sci(*w)]);
        }
    }
    for (atom, q) in mo.densities.iter().enumerate() {
        rows.push(vec!["density".into(), String::new(), atom.to_string(), sci(*q)]);
    }
    let body = csv_body(&["record", "orbital", "atom", "value"], rows)?;

    let summary = match (file.acceptor, file.donor) {
        (Some(acc), Some(don)) => Some(format!(
            "Δq = q[{acc}] - q[{don}] = {:.6}",
            huckel::density_asymmetry(&mo, acc, don)?
        )),
        _ => None,
    };
    Ok(Output {
        body,
        summary,
        not_converged: false,
        seed: cli.seed.unwrap_or(0),
        trials: 0,
    })
}

fn classical(cli: &Cli, inputs: &mut Inputs, a: &ClassicalArgs) -> Result<Output> {
    let (first, second) = match a.crystal {
        CrystalKind::Npp => (a.r12, a.r22),
        CrystalKind::Mna => (a.r11, a.r21),
    };
    let needs_material = a.material.is_some()
        || a.nx.is_none()
        || a.ny.is_none()
        || first.is_none()
        || second.is_none();

    let material = if needs_material {
        Some(match &a.material {
            Some(path) => MaterialData::parse(&inputs.read(&path.display().to_string())?)?,
            None => Loaded::new(cli, inputs)?.material(inputs)?,
        })
    } else {
        None
    };
    let mut eo = material.as_ref().map(|m| m.eo).unwrap_or_default();
    let overrides = [(&mut eo.r11, a.r11), (&mut eo.r12, a.r12), (&mut eo.r21, a.r21), (&mut eo.r22, a.r22)];
    for (slot, value) in overrides {
        if value.is_some() {
            *slot = value;
        }
    }
    let index = |given: Option<f64>, pol: Polarization| -> Result<f64> {
        match (given, &material) {
            (Some(n), _) => Ok(n),
            (None, Some(m)) => Ok(sellmeier_n(&m.sellmeier, a.wavelength_nm, pol)?),
            (None, None) => unreachable!("material is loaded whenever an index is missing"),
        }
    };
    let n_x = index(a.nx, Polarization::X)?;
    let n_y = index(a.ny, Polarization::Y)?;
    let ell = IndexEllipsoid::new(n_x, n_y, n_y, eo)?;
    let (name, r) = match a.crystal {
        CrystalKind::Npp => ("npp", retardation_npp(&ell, a.field, a.length_um, a.wavelength_nm)?),
        CrystalKind::Mna => ("mna", retardation_mna(&ell, a.field, a.length_um, a.wavelength_nm)?),
    };
    let line = format!(
        "crystal={name} field_v_per_um={} length_um={} wavelength_nm={} n_x={} n_y={} gamma_rad={} gamma_mod_2pi_rad={} birefringence_rad={} field_term_rad={}\n",
        a.field,
        a.length_um,
        a.wavelength_nm,
        sci(n_x),
        sci(n_y),
        sci(r.gamma),
        sci(r.gamma_mod_2pi),
        sci(r.birefringence),
        sci(r.field_term),
    );
    Ok(Output {
        body: line.into_bytes(),
        summary: None,
        not_converged: false,
        seed: cli.seed.unwrap_or(0),
        trials: 0,
    })
}

fn flux(cli: &Cli, inputs: &mut Inputs, a: &FluxArgs) -> Result<Output> {
    let loaded = Loaded::new(cli, inputs)?;
    let cfg = &loaded.config;
    let beam = qpm_core::BeamSpec::new(
        a.wavelength_nm.unwrap_or(cfg.beam.wavelength_nm),
        a.power_mw.unwrap_or(cfg.beam.power_mw),
        a.beamwidth_um.unwrap_or(cfg.beam.beamwidth_um),
    )?;
    let xs = match a.cross_section {
        Some(xs) => xs,
        None => molecule_cross_section(&cfg.unit_cell()?),
    };
    let flux = photon_flux(&beam);
    let interval = interaction_interval(flux, xs)?;
    let interval_text = if interval.is_finite() { sci(interval) } else { "infinite".to_string() };
    let body = format!(
        "photon_flux_per_cm2_s = {}\ncross_section_angstrom2 = {}\nrate_per_molecule_per_s = {}\ninterval_ns = {}\n",
        sci(flux),
        sci(xs),
        sci(interaction_rate(flux, xs)),
        interval_text,
    );
    Ok(loaded.output(body.into_bytes(), None))
}
