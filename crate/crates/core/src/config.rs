//! Run configuration documents and the shipped presets.
//!
//! A document is JSON; lines whose first non-blank characters are `//` are
//! comments. Unknown keys are rejected everywhere. Energies are either a
//! bare number in hartree or `{"value": .., "unit": "cm-1" | "eV" | "au"}`.

use serde::{Deserialize, Serialize};

use crate::basis::TruncationSpec;
use crate::error::{Error, Result};
use crate::model::{
    build_photon_grid, convert_energy, AmplitudeLaw, Dispersion, EnergyLaw, EnergyUnit, ExcitonParams, Flags,
    LatticeWeight, MatrixEngine, ModelConfig, PhononMode, PhotonMode,
};
use crate::observables::{DielectricOptions, PathSpec};

/// Bohr radii per nanometre.
pub const BOHR_PER_NM: f64 = 18.897_261_245_650_618;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Energy {
    Hartree(f64),
    WithUnit { value: f64, unit: EnergyUnit },
}

impl Energy {
    pub fn au(self) -> f64 {
        match self {
            Energy::Hartree(v) => v,
            Energy::WithUnit { value, unit } => convert_energy(value, unit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitonSource {
    pub m_e: f64,
    pub m_h: f64,
    pub lattice: LatticeSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeSource {
    /// Square lattice of constant `a` with weight `w` on the four shortest reciprocal vectors.
    Square { a: f64, w: Energy },
    General { b1: [f64; 2], b2: [f64; 2], weights: Vec<LatticeWeight> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhotonSource {
    #[default]
    None,
    Grid {
        omega0: Energy,
        n_side: usize,
        q_max: f64,
        total_amplitude: f64,
        #[serde(default)]
        dispersion: Dispersion,
        #[serde(default)]
        amplitude_law: AmplitudeLaw,
    },
    Modes { modes: Vec<PhotonMode> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhononSource {
    pub k: [f64; 2],
    pub omega: Energy,
    pub gamma: Energy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    pub exciton: ExcitonSource,
    #[serde(default)]
    pub photons: PhotonSource,
    #[serde(default)]
    pub phonons: Vec<PhononSource>,
    pub eta: Energy,
    #[serde(default)]
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub engine: MatrixEngine,
    #[serde(default)]
    pub energy_law: EnergyLaw,
    #[serde(default)]
    pub flags: Flags,
}

impl ModelSource {
    pub fn build(&self) -> Result<ModelConfig> {
        let ex = &self.exciton;
        let exciton = match &ex.lattice {
            LatticeSource::Square { a, w } => {
                if ex.m_e != ex.m_h {
                    return Err(Error::UnequalMasses { m_e: ex.m_e, m_h: ex.m_h });
                }
                ExcitonParams::square_lattice(ex.m_e, *a, w.au())?
            }
            LatticeSource::General { b1, b2, weights } => ExcitonParams::new(ex.m_e, ex.m_h, *b1, *b2, weights.clone())?,
        };
        let photons = match &self.photons {
            PhotonSource::None => Vec::new(),
            PhotonSource::Grid { omega0, n_side, q_max, total_amplitude, dispersion, amplitude_law } => {
                build_photon_grid(omega0.au(), *n_side, *q_max, *total_amplitude, *dispersion, *amplitude_law)?
            }
            PhotonSource::Modes { modes } => modes.clone(),
        };
        let phonons =
            self.phonons.iter().map(|p| PhononMode { k: p.k, omega: p.omega.au(), gamma: p.gamma.au() }).collect();
        let model = ModelConfig {
            exciton,
            photons,
            phonons,
            eta: self.eta.au(),
            truncation: self.truncation.clone(),
            engine: self.engine,
            energy_law: self.energy_law,
            flags: self.flags,
        };
        model.validate()?;
        Ok(model)
    }

    /// Fully explicit source: general lattice, listed modes, energies in hartree.
    pub fn explicit(model: &ModelConfig) -> Self {
        let ex = &model.exciton;
        ModelSource {
            exciton: ExcitonSource {
                m_e: ex.m_e,
                m_h: ex.m_h,
                lattice: LatticeSource::General { b1: ex.b1, b2: ex.b2, weights: ex.weights.clone() },
            },
            photons: if model.photons.is_empty() {
                PhotonSource::None
            } else {
                PhotonSource::Modes { modes: model.photons.clone() }
            },
            phonons: model
                .phonons
                .iter()
                .map(|p| PhononSource { k: p.k, omega: Energy::Hartree(p.omega), gamma: Energy::Hartree(p.gamma) })
                .collect(),
            eta: Energy::Hartree(model.eta),
            truncation: model.truncation.clone(),
            engine: model.engine,
            energy_law: model.energy_law,
            flags: model.flags,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsSection {
    pub path: PathSpec,
    pub nbands: usize,
    pub tol: f64,
}

impl Default for BandsSection {
    fn default() -> Self {
        BandsSection { path: PathSpec::default(), nbands: 20, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaGrid {
    pub min: Energy,
    pub max: Energy,
    pub points: usize,
}

impl OmegaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let (lo, hi) = (self.min.au(), self.max.au());
        if self.points < 2 || !(hi > lo) || !(lo > 0.0) {
            return Err(Error::Config("omega grid needs 0 < min < max and at least 2 points".into()));
        }
        let step = (hi - lo) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| lo + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DielectricSection {
    pub omega: OmegaGrid,
    #[serde(default)]
    pub options: DielectricOptions,
}

impl Default for DielectricSection {
    fn default() -> Self {
        DielectricSection {
            omega: OmegaGrid { min: Energy::Hartree(0.01), max: Energy::Hartree(0.5), points: 981 },
            options: DielectricOptions::default(),
        }
    }
}

/// A whole configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub model: ModelSource,
    #[serde(default)]
    pub bands: BandsSection,
    #[serde(default)]
    pub dielectric: DielectricSection,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        // blank out comment lines so diagnostics keep their line numbers
        let cleaned: String = text
            .lines()
            .map(|l| if l.trim_start().starts_with("//") { "" } else { l })
            .collect::<Vec<_>>()
            .join("\n");
        serde_json::from_str(&cleaned).map_err(|e| Error::Config(e.to_string()))
    }

    /// Same document with the model in explicit form.
    pub fn expanded(&self) -> Result<Self> {
        Ok(RunFile { model: ModelSource::explicit(&self.model.build()?), ..self.clone() })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const PRESET_NAMES: [&str; 8] =
    ["fig1", "fig2", "fig3-zero", "fig3-mid", "fig3-strong", "toy-photon", "toy-phonon", "toy-decoupled"];

/// Text of a shipped preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    Ok(match name {
        "fig1" => include_str!("../../../presets/fig1.json"),
        "fig2" => include_str!("../../../presets/fig2.json"),
        "fig3-zero" => include_str!("../../../presets/fig3-zero.json"),
        "fig3-mid" => include_str!("../../../presets/fig3-mid.json"),
        "fig3-strong" => include_str!("../../../presets/fig3-strong.json"),
        "toy-photon" => include_str!("../../../presets/toy-photon.json"),
        "toy-phonon" => include_str!("../../../presets/toy-phonon.json"),
        "toy-decoupled" => include_str!("../../../presets/toy-decoupled.json"),
        other => {
            return Err(Error::Config(format!("unknown preset '{other}'; available: {}", PRESET_NAMES.join(", "))))
        }
    })
}

pub fn preset(name: &str) -> Result<RunFile> {
    RunFile::parse(preset_text(name)?).map_err(|e| Error::Config(format!("preset {name}: {e}")))
}
