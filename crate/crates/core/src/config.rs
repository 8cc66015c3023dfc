//! Sectioned key-value configuration files.
//!
//! Files use TOML syntax, i.e. INI-style `[section]` headers with
//! `key = value` lines. Unknown keys are rejected, and validation errors
//! carry the dotted key path of the offending entry.

use serde::Deserialize;

use crate::classical::{EoCoefficients, SellmeierSet, SellmeierTerm};
use crate::crystal::{build_stack, Degrees, LayerStack, MolecularFrame, PropagationAxis, UnitCell};
use crate::error::{QpmError, Result};
use crate::huckel::PiSystem;
use crate::orbit::{FieldPerturbation, OrbitShape};
use crate::transport::{AnomalySource, BeamSpec, SimulationConfig, DEFAULT_GAP_EV};

/// Bundled NPP configuration.
pub const BUNDLED_NPP: &str = include_str!("../data/npp.cfg");
/// Bundled, illustrative NPP material data.
pub const BUNDLED_NPP_MATERIAL: &str = include_str!("../data/npp_material.cfg");
/// Bundled donor–acceptor ring for the Hückel solver.
pub const BUNDLED_NPP_RING: &str = include_str!("../data/npp_ring.toml");

fn parse_error(file: &str, err: toml::de::Error) -> QpmError {
    let msg = err.message().to_string();
    QpmError::invalid(file, msg)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    pub a_angstrom: f64,
    pub b_angstrom: f64,
    pub c_angstrom: f64,
    pub beta_deg: f64,
    pub molecules_per_cell: u32,
    pub ct_axis_angle_deg: f64,
    pub mean_plane_angle_deg: f64,
    #[serde(default = "default_window")]
    pub transparency_window_um: (f64, f64),
}

fn default_window() -> (f64, f64) {
    (0.5, 2.0)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    pub eccentricity: f64,
    pub semimajor_angstrom: f64,
    pub z_eff: f64,
    #[serde(default)]
    pub kappa_per_v_um: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub wavelength_nm: f64,
    pub power_mw: f64,
    pub beamwidth_um: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub trials: usize,
    pub seed: u64,
    pub length_um: f64,
    #[serde(default = "default_gap")]
    pub homo_lumo_gap_ev: f64,
    #[serde(default = "default_axis")]
    pub axis: String,
}

fn default_gap() -> f64 {
    DEFAULT_GAP_EV
}

fn default_axis() -> String {
    "b".into()
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    /// Material data file, relative to the configuration file.
    pub sellmeier_path: Option<String>,
}

/// Full simulation configuration.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpmConfig {
    pub crystal: CrystalSection,
    pub orbit: OrbitSection,
    pub beam: BeamSection,
    pub simulation: SimulationSection,
    #[serde(default)]
    pub material: MaterialSection,
}

impl QpmConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: QpmConfig = toml::from_str(text).map_err(|e| parse_error("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_NPP).expect("bundled configuration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.unit_cell()?;
        self.frame()?;
        self.shape()?;
        self.beam()?;
        self.stack()?;
        if self.simulation.trials < 1 {
            return Err(QpmError::invalid("simulation.trials", "must be >= 1"));
        }
        if !(self.simulation.homo_lumo_gap_ev > 0.0) {
            return Err(QpmError::invalid("simulation.homo_lumo_gap_ev", "must be > 0"));
        }
        if !(self.orbit.kappa_per_v_um.is_finite() && self.orbit.kappa_per_v_um >= 0.0) {
            return Err(QpmError::invalid("orbit.kappa_per_v_um", "must be >= 0"));
        }
        Ok(())
    }

    pub fn unit_cell(&self) -> Result<UnitCell> {
        let c = &self.crystal;
        UnitCell::new(
            c.a_angstrom,
            c.b_angstrom,
            c.c_angstrom,
            Degrees(c.beta_deg),
            c.molecules_per_cell,
            c.transparency_window_um,
        )
    }

    pub fn frame(&self) -> Result<MolecularFrame> {
        MolecularFrame::new(
            Degrees(self.crystal.ct_axis_angle_deg),
            Degrees(self.crystal.mean_plane_angle_deg),
        )
    }

    pub fn shape(&self) -> Result<OrbitShape> {
        OrbitShape::new(self.orbit.eccentricity, self.orbit.semimajor_angstrom, self.orbit.z_eff)
    }

    pub fn beam(&self) -> Result<BeamSpec> {
        BeamSpec::new(self.beam.wavelength_nm, self.beam.power_mw, self.beam.beamwidth_um)
    }

    pub fn axis(&self) -> Result<PropagationAxis> {
        self.simulation.axis.parse()
    }

    pub fn stack(&self) -> Result<LayerStack> {
        build_stack(&self.unit_cell()?, self.simulation.length_um, self.axis()?)
    }

    /// Engine configuration; the coupling κ is attached as a zero-field perturbation.
    pub fn simulation_config(&self) -> Result<SimulationConfig> {
        Ok(SimulationConfig {
            trials: self.simulation.trials,
            seed: self.simulation.seed,
            beam: self.beam()?,
            stack: self.stack()?,
            shape: self.shape()?,
            field: Some(FieldPerturbation::new(0.0, Degrees(0.0), self.orbit.kappa_per_v_um)?),
            homo_lumo_gap_ev: self.simulation.homo_lumo_gap_ev,
            anomaly: AnomalySource::Kepler,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SellmeierSection {
    window_um: (f64, f64),
    x: SellmeierTerm,
    y: SellmeierTerm,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialFileRaw {
    sellmeier: SellmeierSection,
    #[serde(default)]
    eo: EoCoefficients,
}

/// Material data: Sellmeier dispersion and electro-optic coefficients (pm/V).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialData {
    pub sellmeier: SellmeierSet,
    pub eo: EoCoefficients,
}

impl MaterialData {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: MaterialFileRaw = toml::from_str(text).map_err(|e| parse_error("material", e))?;
        let s = raw.sellmeier;
        Ok(MaterialData {
            sellmeier: SellmeierSet::new(s.x, s.y, s.window_um)?,
            eo: raw.eo,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteOverride {
    atom: usize,
    h: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct BondOverride {
    bond: (usize, usize),
    k: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct PiSystemRaw {
    atom_count: usize,
    electron_count: usize,
    bonds: Vec<(usize, usize)>,
    #[serde(default)]
    alpha_shift: Vec<SiteOverride>,
    #[serde(default)]
    bond_factor: Vec<BondOverride>,
    acceptor: Option<usize>,
    donor: Option<usize>,
}

/// π-system description with optional acceptor/donor sites for Δq.
#[derive(Debug, Clone, PartialEq)]
pub struct PiSystemFile {
    pub system: PiSystem,
    pub acceptor: Option<usize>,
    pub donor: Option<usize>,
}

impl PiSystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: PiSystemRaw = toml::from_str(text).map_err(|e| parse_error("pi-system", e))?;
        let mut system = PiSystem::hydrocarbon(raw.atom_count, raw.bonds, raw.electron_count);
        for (i, o) in raw.alpha_shift.iter().enumerate() {
            if o.atom >= raw.atom_count {
                return Err(QpmError::invalid(
                    format!("alpha_shift[{i}].atom"),
                    format!("atom {} out of range", o.atom),
                ));
            }
            system.alpha_shift[o.atom] = o.h;
        }
        for (i, o) in raw.bond_factor.iter().enumerate() {
            let (p, q) = o.bond;
            let pos = system
                .bonds
                .iter()
                .position(|&(a, b)| (a, b) == (p, q) || (a, b) == (q, p))
                .ok_or_else(|| QpmError::invalid(format!("bond_factor[{i}].bond"), format!("no bond ({p}, {q})")))?;
            system.bond_factor[pos] = o.k;
        }
        system.validate()?;
        Ok(PiSystemFile {
            system,
            acceptor: raw.acceptor,
            donor: raw.donor,
        })
    }
}
