//! Monoclinic unit cell, molecular orientation and the layer stack a photon
//! crosses along the crystal b axis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QpmError, Result};

const ANGSTROM_PER_UM: f64 = 1.0e4;

/// An angle in degrees.
///
/// Every angle crosses the public boundary in degrees; [`Degrees::to_radians`]
/// is the single place where it is converted for trigonometry.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Degrees(pub f64);

impl Degrees {
    pub fn to_radians(self) -> f64 {
        self.0.to_radians()
    }

    /// Cosine that is exact at multiples of 90°, so a perpendicular field
    /// yields exactly zero instead of `6.1e-17`.
    pub fn cos(self) -> f64 {
        let reduced = self.0.rem_euclid(360.0);
        if reduced == 90.0 || reduced == 270.0 {
            0.0
        } else if reduced == 0.0 {
            1.0
        } else if reduced == 180.0 {
            -1.0
        } else {
            self.to_radians().cos()
        }
    }

    pub fn sin(self) -> f64 {
        Degrees(self.0 - 90.0).cos()
    }
}

/// CODATA 2018 values used by the photon-transport engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Planck constant, J·s.
    pub h: f64,
    /// Electron rest mass, kg.
    pub m_e: f64,
    /// Elementary charge, C.
    pub e: f64,
    /// Coulomb constant 1/(4πε₀), N·m²/C².
    pub k: f64,
    /// Speed of light in vacuum, m/s.
    pub c0: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        h: 6.626_070_15e-34,
        m_e: 9.109_383_701_5e-31,
        e: 1.602_176_634e-19,
        k: 8.987_551_792_3e9,
        c0: 299_792_458.0,
    };

    /// Photon energy hc/λ in joules.
    pub fn photon_energy_j(&self, wavelength_nm: f64) -> f64 {
        self.h * self.c0 / (wavelength_nm * 1e-9)
    }

    /// Photon energy hc/λ in electron-volts.
    pub fn photon_energy_ev(&self, wavelength_nm: f64) -> f64 {
        self.photon_energy_j(wavelength_nm) / self.e
    }

    /// Optical frequency ν = c₀/λ in Hz.
    pub fn frequency_hz(&self, wavelength_nm: f64) -> f64 {
        self.c0 / (wavelength_nm * 1e-9)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// Monoclinic unit cell with its optical transparency window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCell {
    pub a_angstrom: f64,
    pub b_angstrom: f64,
    pub c_angstrom: f64,
    pub beta: Degrees,
    pub molecules_per_cell: u32,
    /// (min, max) in µm.
    pub transparency_window_um: (f64, f64),
}

impl UnitCell {
    pub fn new(
        a_angstrom: f64,
        b_angstrom: f64,
        c_angstrom: f64,
        beta: Degrees,
        molecules_per_cell: u32,
        transparency_window_um: (f64, f64),
    ) -> Result<Self> {
        let cell = UnitCell {
            a_angstrom,
            b_angstrom,
            c_angstrom,
            beta,
            molecules_per_cell,
            transparency_window_um,
        };
        cell.validate()?;
        Ok(cell)
    }

    /// NPP, space group P2₁, two molecules per cell, transparent from 0.5 to 2 µm.
    pub fn npp() -> Self {
        UnitCell {
            a_angstrom: 5.261,
            b_angstrom: 14.908,
            c_angstrom: 7.185,
            beta: Degrees(105.18),
            molecules_per_cell: 2,
            transparency_window_um: (0.5, 2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("crystal.a_angstrom", self.a_angstrom),
            ("crystal.b_angstrom", self.b_angstrom),
            ("crystal.c_angstrom", self.c_angstrom),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(QpmError::invalid(key, format!("must be > 0, got {v}")));
            }
        }
        if !(self.beta.0 > 0.0 && self.beta.0 < 180.0) {
            return Err(QpmError::invalid(
                "crystal.beta_deg",
                format!("must lie in (0, 180), got {}", self.beta.0),
            ));
        }
        if self.molecules_per_cell < 1 {
            return Err(QpmError::invalid("crystal.molecules_per_cell", "must be >= 1"));
        }
        let (lo, hi) = self.transparency_window_um;
        if !(lo > 0.0 && lo < hi) {
            return Err(QpmError::invalid(
                "crystal.transparency_window_um",
                format!("need 0 < min < max, got ({lo}, {hi})"),
            ));
        }
        Ok(())
    }

    /// Transparency window in nm.
    pub fn window_nm(&self) -> (f64, f64) {
        let (lo, hi) = self.transparency_window_um;
        (lo * 1e3, hi * 1e3)
    }
}

/// Orientation of the molecule relative to the crystal axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MolecularFrame {
    /// Angle between the crystal b axis and the N(1)–N(2) charge-transfer axis.
    pub ct_axis_angle: Degrees,
    /// Angle between the molecular mean plane and the (101) plane.
    pub mean_plane_angle: Degrees,
}

impl MolecularFrame {
    pub fn new(ct_axis_angle: Degrees, mean_plane_angle: Degrees) -> Result<Self> {
        for (key, a) in [
            ("crystal.ct_axis_angle_deg", ct_axis_angle),
            ("crystal.mean_plane_angle_deg", mean_plane_angle),
        ] {
            if !(0.0..=90.0).contains(&a.0) {
                return Err(QpmError::invalid(key, format!("must lie in [0, 90], got {}", a.0)));
            }
        }
        Ok(MolecularFrame {
            ct_axis_angle,
            mean_plane_angle,
        })
    }

    pub fn npp() -> Self {
        MolecularFrame {
            ct_axis_angle: Degrees(58.6),
            mean_plane_angle: Degrees(11.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagationAxis {
    A,
    B,
    C,
}

impl FromStr for PropagationAxis {
    type Err = QpmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(PropagationAxis::A),
            "b" => Ok(PropagationAxis::B),
            "c" => Ok(PropagationAxis::C),
            other => Err(QpmError::UnsupportedAxis(other.to_string())),
        }
    }
}

impl fmt::Display for PropagationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PropagationAxis::A => "a",
            PropagationAxis::B => "b",
            PropagationAxis::C => "c",
        };
        f.write_str(s)
    }
}

/// Evenly spaced molecular interaction layers along the propagation axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerStack {
    pub crystal_length_um: f64,
    pub layer_spacing_angstrom: f64,
    pub layer_count: usize,
    /// Transparency window carried over from the unit cell, in µm.
    pub transparency_window_um: (f64, f64),
}

impl LayerStack {
    pub fn crystal_length_m(&self) -> f64 {
        self.crystal_length_um * 1e-6
    }

    /// Stack with an explicit layer count; used by tests and diagnostics.
    pub fn with_layers(crystal_length_um: f64, layer_count: usize, window_um: (f64, f64)) -> Self {
        LayerStack {
            crystal_length_um,
            layer_spacing_angstrom: crystal_length_um * ANGSTROM_PER_UM / layer_count.max(1) as f64,
            layer_count,
            transparency_window_um: window_um,
        }
    }
}

/// One interaction layer per molecule: `floor(length / b) × molecules_per_cell`.
pub fn build_stack(cell: &UnitCell, length_um: f64, axis: PropagationAxis) -> Result<LayerStack> {
    cell.validate()?;
    if axis != PropagationAxis::B {
        return Err(QpmError::UnsupportedAxis(axis.to_string()));
    }
    if !(length_um.is_finite() && length_um > 0.0) {
        return Err(QpmError::invalid(
            "simulation.length_um",
            format!("must be > 0, got {length_um}"),
        ));
    }
    let cells = length_um * ANGSTROM_PER_UM / cell.b_angstrom;
    // Absorb the rounding of an exact multiple (e.g. 14.908 Å expressed in µm).
    let whole_cells = (cells * (1.0 + 1e-12)).floor();
    if whole_cells < 1.0 {
        return Err(QpmError::CrystalTooThin {
            length_um,
            cell_um: cell.b_angstrom / ANGSTROM_PER_UM,
        });
    }
    let layer_count = whole_cells as usize * cell.molecules_per_cell as usize;
    Ok(LayerStack {
        crystal_length_um: length_um,
        layer_spacing_angstrom: length_um * ANGSTROM_PER_UM / layer_count as f64,
        layer_count,
        transparency_window_um: cell.transparency_window_um,
    })
}

/// Per-molecule cross-section a·c·sin β presented to a beam along b, in Å².
pub fn molecule_cross_section(cell: &UnitCell) -> f64 {
    cell.a_angstrom * cell.c_angstrom * cell.beta.to_radians().sin()
}
