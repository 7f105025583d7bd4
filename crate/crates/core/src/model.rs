//! Physical parameters of the exciton, cavity and phonon subsystems.
//!
//! Everything is stored in Hartree atomic units. Unit conversion happens only
//! when reading configuration documents or writing output.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::basis::TruncationSpec;
use crate::error::{Error, Result};

/// 1 hartree in wavenumbers.
pub const HARTREE_IN_WAVENUMBER: f64 = 219_474.631_363_2;
/// 1 hartree in electron volts.
pub const HARTREE_IN_EV: f64 = 27.211_386_245_988;
/// 1 nanometre in bohr.
pub const BOHR_PER_NM: f64 = 18.897_261_246_2;
/// Speed of light in atomic units; default effective cavity velocity.
pub const SPEED_OF_LIGHT_AU: f64 = 137.036;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyUnit {
    #[serde(rename = "au")]
    Hartree,
    #[serde(rename = "cm-1")]
    Wavenumber,
    #[serde(rename = "eV")]
    ElectronVolt,
}

impl FromStr for EnergyUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "au" | "hartree" | "Eh" => Ok(EnergyUnit::Hartree),
            "cm-1" | "cm^-1" | "cm⁻¹" | "wavenumber" => Ok(EnergyUnit::Wavenumber),
            "eV" | "ev" => Ok(EnergyUnit::ElectronVolt),
            other => Err(Error::UnknownUnit(other.to_string())),
        }
    }
}

impl fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyUnit::Hartree => "au",
            EnergyUnit::Wavenumber => "cm-1",
            EnergyUnit::ElectronVolt => "eV",
        })
    }
}

/// Converts an energy expressed in `unit` to hartree.
pub fn convert_energy(value: f64, unit: EnergyUnit) -> f64 {
    match unit {
        EnergyUnit::Hartree => value,
        EnergyUnit::Wavenumber => value / HARTREE_IN_WAVENUMBER,
        EnergyUnit::ElectronVolt => value / HARTREE_IN_EV,
    }
}

/// Converts an energy in hartree to `unit`.
pub fn energy_from_au(value: f64, unit: EnergyUnit) -> f64 {
    match unit {
        EnergyUnit::Hartree => value,
        EnergyUnit::Wavenumber => value * HARTREE_IN_WAVENUMBER,
        EnergyUnit::ElectronVolt => value * HARTREE_IN_EV,
    }
}

/// Total and reduced mass of an electron-hole pair.
pub fn derive_masses(m_e: f64, m_h: f64) -> Result<(f64, f64)> {
    if !(m_e > 0.0) || !(m_h > 0.0) {
        return Err(Error::param(format!("masses must be positive (m_e = {m_e}, m_h = {m_h})")));
    }
    let total = m_e + m_h;
    Ok((total, m_e * m_h / total))
}

/// One Fourier component of the periodic potential, `w` at `n1 b1 + n2 b2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeWeight {
    pub n1: i32,
    pub n2: i32,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitonParams {
    pub m_e: f64,
    pub m_h: f64,
    pub total_mass: f64,
    pub reduced_mass: f64,
    pub b1: [f64; 2],
    pub b2: [f64; 2],
    /// Sorted by `(n1, n2)`.
    pub weights: Vec<LatticeWeight>,
}

impl ExcitonParams {
    pub fn new(m_e: f64, m_h: f64, b1: [f64; 2], b2: [f64; 2], mut weights: Vec<LatticeWeight>) -> Result<Self> {
        let (total_mass, reduced_mass) = derive_masses(m_e, m_h)?;
        if m_e != m_h {
            return Err(Error::UnequalMasses { m_e, m_h });
        }
        let cross = b1[0] * b2[1] - b1[1] * b2[0];
        if !(cross.abs() > 0.0) || !b1.iter().chain(b2.iter()).all(|x| x.is_finite()) {
            return Err(Error::param("reciprocal basis vectors must be finite and linearly independent"));
        }
        weights.sort_by_key(|w| (w.n1, w.n2));
        for pair in weights.windows(2) {
            if (pair[0].n1, pair[0].n2) == (pair[1].n1, pair[1].n2) {
                return Err(Error::param(format!("duplicate lattice weight at {:?}", (pair[0].n1, pair[0].n2))));
            }
        }
        let params = ExcitonParams { m_e, m_h, total_mass, reduced_mass, b1, b2, weights };
        for w in &params.weights {
            if !w.w.is_finite() {
                return Err(Error::param(format!("lattice weight at {:?} is not finite", (w.n1, w.n2))));
            }
            let w_neg = params.weight(-w.n1, -w.n2);
            if w.w != w_neg {
                return Err(Error::NonHermitianPotential { kappa: (w.n1, w.n2), w: w.w, w_neg });
            }
        }
        Ok(params)
    }

    /// Square lattice with lattice constant `a` and equal weight `w` on the
    /// four shortest reciprocal vectors.
    pub fn square_lattice(mass: f64, a: f64, w: f64) -> Result<Self> {
        let b = 2.0 * PI / a;
        let weights = if w == 0.0 {
            Vec::new()
        } else {
            [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().map(|&(n1, n2)| LatticeWeight { n1, n2, w }).collect()
        };
        Self::new(mass, mass, [b, 0.0], [0.0, b], weights)
    }

    pub fn weight(&self, n1: i32, n2: i32) -> f64 {
        self.weights
            .binary_search_by_key(&(n1, n2), |w| (w.n1, w.n2))
            .map(|i| self.weights[i].w)
            .unwrap_or(0.0)
    }

    /// Reciprocal lattice vector `n1 b1 + n2 b2`.
    pub fn kappa(&self, n1: i32, n2: i32) -> [f64; 2] {
        let (a, b) = (n1 as f64, n2 as f64);
        [a * self.b1[0] + b * self.b2[0], a * self.b1[1] + b * self.b2[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonMode {
    pub q: [f64; 2],
    pub omega: f64,
    /// Polarization angle; the unit polarization vector is `(cos, sin)` of it.
    pub pol_angle: f64,
    pub amplitude: f64,
}

impl PhotonMode {
    /// TE mode: polarization perpendicular to `q` (angle of `q` plus pi/2).
    pub fn te(q: [f64; 2], omega: f64, amplitude: f64) -> Self {
        PhotonMode { q, omega, pol_angle: te_polarization_angle(q), amplitude }
    }

    pub fn polarization(&self) -> [f64; 2] {
        [self.pol_angle.cos(), self.pol_angle.sin()]
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::param(format!("photon frequency must be positive, got {}", self.omega)));
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::param(format!("photon amplitude must be non-negative, got {}", self.amplitude)));
        }
        let e = self.polarization();
        let qn = (self.q[0] * self.q[0] + self.q[1] * self.q[1]).sqrt();
        if qn > 0.0 && (e[0] * self.q[0] + e[1] * self.q[1]).abs() > 1e-12 * qn {
            return Err(Error::param(format!(
                "photon polarization must be transverse (q = {:?}, angle = {})",
                self.q, self.pol_angle
            )));
        }
        Ok(())
    }
}

/// Angle of the in-plane TE polarization for wavevector `q`.
pub fn te_polarization_angle(q: [f64; 2]) -> f64 {
    if q[0] == 0.0 && q[1] == 0.0 {
        FRAC_PI_2
    } else {
        q[1].atan2(q[0]) + FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhononMode {
    pub k: [f64; 2],
    pub omega: f64,
    pub gamma: f64,
}

impl PhononMode {
    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::param(format!("phonon frequency must be positive, got {}", self.omega)));
        }
        if !self.gamma.is_finite() {
            return Err(Error::param("phonon coupling must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dispersion {
    Flat,
    Cavity { c_eff: f64 },
}

impl Default for Dispersion {
    fn default() -> Self {
        Dispersion::Flat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeLaw {
    /// Every mode gets `total / sqrt(N)`.
    #[default]
    Uniform,
    /// `A_q = A_0 sqrt(omega_0 / omega_q)`.
    InverseSqrtOmega,
}

/// `n_side x n_side` Cartesian grid of TE modes with `|q_x|, |q_y| <= q_max`.
pub fn build_photon_grid(
    omega0: f64,
    n_side: usize,
    q_max: f64,
    total_amplitude: f64,
    dispersion: Dispersion,
    law: AmplitudeLaw,
) -> Result<Vec<PhotonMode>> {
    if n_side == 0 {
        return Err(Error::param("photon grid needs n_side >= 1"));
    }
    if !(omega0 > 0.0) {
        return Err(Error::param("omega0 must be positive"));
    }
    if !(q_max >= 0.0) || (n_side > 1 && q_max == 0.0) {
        return Err(Error::param("q_max must be positive for grids with more than one point"));
    }
    if !(total_amplitude >= 0.0) {
        return Err(Error::param("total amplitude must be non-negative"));
    }
    if let Dispersion::Cavity { c_eff } = dispersion {
        if !(c_eff > 0.0) {
            return Err(Error::param("c_eff must be positive"));
        }
    }
    let n_modes = (n_side * n_side) as f64;
    let a0 = total_amplitude / n_modes.sqrt();
    // integer numerators keep the grid exactly symmetric under q -> -q
    let coord = |i: usize| -> f64 {
        if n_side == 1 {
            0.0
        } else {
            q_max * (2 * i as i64 - (n_side as i64 - 1)) as f64 / (n_side - 1) as f64
        }
    };
    let mut modes = Vec::with_capacity(n_side * n_side);
    for iy in 0..n_side {
        for ix in 0..n_side {
            let q = [coord(ix), coord(iy)];
            let qn = q[0].hypot(q[1]);
            let omega = match dispersion {
                Dispersion::Flat => omega0,
                Dispersion::Cavity { c_eff } => (omega0 * omega0 + (c_eff * qn).powi(2)).sqrt(),
            };
            let amplitude = match law {
                AmplitudeLaw::Uniform => a0,
                AmplitudeLaw::InverseSqrtOmega => a0 * (omega0 / omega).sqrt(),
            };
            modes.push(PhotonMode::te(q, omega, amplitude));
        }
    }
    Ok(modes)
}

/// How relative-coordinate matrix elements of the photon and phonon couplings
/// are evaluated. Lattice couplings always use quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixEngine {
    /// Closed-form Taylor expansion keeping powers of `|q|` up to `order`.
    Taylor { order: u32 },
    /// Numerical integration of the exact operator.
    Quadrature,
}

impl Default for MatrixEngine {
    fn default() -> Self {
        MatrixEngine::Taylor { order: 2 }
    }
}

/// Which formula supplies the relative-coordinate level energies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyLaw {
    /// `E_n = -mu / (2n + 1)`.
    #[default]
    Printed,
    /// `E_n = -2 mu / (2n + 1)^2`, the eigenvalues of the 2D Coulomb problem.
    Textbook,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub include_diamagnetic: bool,
    pub include_zero_point: bool,
    pub phonon_boost_in_photon_term: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Flags { include_diamagnetic: true, include_zero_point: false, phonon_boost_in_photon_term: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub exciton: ExcitonParams,
    pub photons: Vec<PhotonMode>,
    pub phonons: Vec<PhononMode>,
    pub eta: f64,
    pub truncation: TruncationSpec,
    pub engine: MatrixEngine,
    pub energy_law: EnergyLaw,
    pub flags: Flags,
}

impl ModelConfig {
    /// Matter-only model with default truncation and flags.
    pub fn matter_only(exciton: ExcitonParams, truncation: TruncationSpec) -> Self {
        ModelConfig {
            exciton,
            photons: Vec::new(),
            phonons: Vec::new(),
            eta: convert_energy(10.0, EnergyUnit::Wavenumber),
            truncation,
            engine: MatrixEngine::default(),
            energy_law: EnergyLaw::default(),
            flags: Flags::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exciton.m_e != self.exciton.m_h {
            return Err(Error::UnequalMasses { m_e: self.exciton.m_e, m_h: self.exciton.m_h });
        }
        if !(self.eta > 0.0) {
            return Err(Error::param(format!("broadening eta must be positive, got {}", self.eta)));
        }
        for p in &self.photons {
            p.validate()?;
        }
        for p in &self.phonons {
            p.validate()?;
        }
        if let MatrixEngine::Taylor { order } = self.engine {
            if order == 0 {
                return Err(Error::param("Taylor order must be at least 1"));
            }
        }
        self.truncation.validate()
    }

    pub fn relative_energy(&self, n: u32) -> f64 {
        crate::hydrogen2d::level_energy(n, self.exciton.reduced_mass, self.energy_law)
    }
}
