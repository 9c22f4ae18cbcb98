//! Generator spec JSON format: a model, record lengths, initial states
//! (`"random"` or explicit vectors, one per record), an input law, an
//! output noise level, and a seed.

use std::path::Path;

use msid_core::{GeneratorSpec, InitialStates, InputLaw};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::modelio::ModelFile;
use crate::FormatError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpecFile {
    pub model: ModelFile,
    pub record_lengths: Vec<usize>,
    pub initial_states: InitialStatesFile,
    pub input_law: InputLawFile,
    #[serde(default)]
    pub output_noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialStatesFile {
    /// The string `"random"`.
    Law(String),
    /// One state vector per record.
    Given(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputLawFile {
    UniformWhite,
    GaussianWhite { sigma: f64 },
    Constant { level: f64 },
    Sinusoid { frequency: f64, amplitude: f64 },
}

impl GeneratorSpecFile {
    pub fn to_spec(&self, path: &Path) -> Result<GeneratorSpec, FormatError> {
        let model = self.model.to_model()?;
        let initial_states = match &self.initial_states {
            InitialStatesFile::Law(s) if s == "random" => InitialStates::Random,
            InitialStatesFile::Law(s) => {
                return Err(FormatError::schema(
                    path,
                    format!("initial_states must be \"random\" or an array of vectors, found {s:?}"),
                ));
            }
            InitialStatesFile::Given(vs) => InitialStates::Given(
                vs.iter().map(|v| DVector::from_column_slice(v)).collect(),
            ),
        };
        let input_law = match self.input_law {
            InputLawFile::UniformWhite => InputLaw::UniformWhite,
            InputLawFile::GaussianWhite { sigma } => InputLaw::GaussianWhite { sigma },
            InputLawFile::Constant { level } => InputLaw::Constant { level },
            InputLawFile::Sinusoid {
                frequency,
                amplitude,
            } => InputLaw::Sinusoid {
                frequency,
                amplitude,
            },
        };
        let spec = GeneratorSpec {
            model,
            record_lengths: self.record_lengths.clone(),
            initial_states,
            input_law,
            output_noise_sigma: self.output_noise_sigma,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn read_generator_spec(path: &Path) -> Result<GeneratorSpecFile, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::schema(path, e.to_string()))
}
