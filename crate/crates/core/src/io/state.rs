//! Registration-state JSON with per-feature residual summaries.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::libr::RegistrationState;
use crate::{DVec, Result, Vec3};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSummaryJson {
    pub name: String,
    pub rms_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateJson {
    pub alpha: Vec<f64>,
    pub tau: [f64; 3],
    pub theta: [f64; 3],
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub features: Vec<FeatureSummaryJson>,
}

impl StateJson {
    pub fn from_state(state: &RegistrationState, per_feature_rms: &[(String, f64)]) -> Self {
        Self {
            alpha: state.alpha.iter().copied().collect(),
            tau: [state.tau.x, state.tau.y, state.tau.z],
            theta: [state.theta.x, state.theta.y, state.theta.z],
            objective: state.objective,
            iterations: state.iterations,
            converged: state.converged,
            features: per_feature_rms
                .iter()
                .map(|(name, rms)| FeatureSummaryJson {
                    name: name.clone(),
                    rms_m: *rms,
                })
                .collect(),
        }
    }

    pub fn to_state(&self) -> RegistrationState {
        RegistrationState {
            alpha: DVec::from_vec(self.alpha.clone()),
            tau: Vec3::new(self.tau[0], self.tau[1], self.tau[2]),
            theta: Vec3::new(self.theta[0], self.theta[1], self.theta[2]),
            objective: self.objective,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

pub fn write_state_json(
    path: &Path,
    state: &RegistrationState,
    per_feature_rms: &[(String, f64)],
) -> Result<()> {
    let json = StateJson::from_state(state, per_feature_rms);
    fs::write(path, serde_json::to_string_pretty(&json)? + "\n")?;
    Ok(())
}

pub fn read_state_json(path: &Path) -> Result<StateJson> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
