use thiserror::Error;

/// Errors raised by the simulation library.
///
/// Variants are grouped by the kind of failure so front ends can map them to
/// distinct exit codes: configuration/validation problems, physics-domain
/// violations, and numerical non-convergence.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpmError {
    /// An input value violates a type invariant. `key` names the offending field.
    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("crystal too thin: {length_um} µm is shorter than one unit cell ({cell_um} µm)")]
    CrystalTooThin { length_um: f64, cell_um: f64 },

    #[error("unsupported propagation axis `{0}`; only the crystal b axis is supported")]
    UnsupportedAxis(String),

    #[error("eccentricity {0} outside the supported range [0, 0.95]")]
    EccentricityOutOfRange(f64),

    #[error(
        "resonant regime: QPM linear model invalid (photon energy {photon_ev:.4} eV >= gap {gap_ev:.4} eV)"
    )]
    Resonant { photon_ev: f64, gap_ev: f64 },

    #[error("wavelength {wavelength_nm} nm outside the window [{min_nm}, {max_nm}] nm")]
    OutsideWindow {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("extrapolation refused: {wavelength_um} µm outside Sellmeier window [{min_um}, {max_um}] µm")]
    ExtrapolationRefused {
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("missing electro-optic coefficient {0}")]
    MissingCoefficient(&'static str),

    #[error("π-system graph is disconnected")]
    DisconnectedGraph,

    #[error("odd electron count {0}; closed-shell filling requires an even count")]
    OddElectronCount(usize),

    #[error("index {index} out of range for {len} atoms")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{0}")]
    Unreachable(String),

    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
}

impl QpmError {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        QpmError::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Coarse classification used by front ends.
    pub fn kind(&self) -> ErrorKind {
        use QpmError::*;
        match self {
            InvalidParameter { .. }
            | UnsupportedAxis(_)
            | MissingCoefficient(_)
            | IndexOutOfRange { .. }
            | DegenerateFit(_)
            | OutsideWindow { .. }
            | ExtrapolationRefused { .. } => ErrorKind::Config,
            CrystalTooThin { .. }
            | EccentricityOutOfRange(_)
            | Resonant { .. }
            | DisconnectedGraph
            | OddElectronCount(_)
            | Unreachable(_) => ErrorKind::Physics,
            NonConvergence(_) => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Physics,
    Numerical,
}

pub type Result<T> = std::result::Result<T, QpmError>;
