/*
Copyright 2026 The telebench Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! The JSON configuration file. Every flag has a key here, and flags win.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use telebench_core::control::{ControllerKind, Gains};
use telebench_core::operator::{OperatorKind, OperatorParams};
use telebench_core::world::{Benchmark, MaterialId};

use crate::CliError;

/// Default output directory when neither flag, file nor environment set one.
pub const DEFAULT_OUT: &str = "telebench-out";
pub const OUT_ENV: &str = "TELEBENCH_OUT";

/// `"operator": "shared-follower"` or `"operator": {"name": ..., "tau": ...}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OperatorConfig {
    Name(OperatorKind),
    Full {
        name: Option<OperatorKind>,
        #[serde(flatten)]
        params: OperatorParams,
    },
}

impl OperatorConfig {
    pub fn name(&self) -> Option<OperatorKind> {
        match self {
            OperatorConfig::Name(k) => Some(*k),
            OperatorConfig::Full { name, .. } => *name,
        }
    }

    pub fn params(&self) -> OperatorParams {
        match self {
            OperatorConfig::Name(_) => OperatorParams::default(),
            OperatorConfig::Full { params, .. } => *params,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub benchmark: Option<Benchmark>,
    pub task: Option<u8>,
    pub controller: Option<ControllerKind>,
    pub operator: Option<OperatorConfig>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub classes: Option<Vec<MaterialId>>,
    pub objects: Option<Vec<String>>,
    pub poses: Option<usize>,
    pub reps: Option<usize>,
    pub scenes: Option<usize>,
    pub t_max: Option<f64>,
    pub align_radius: Option<f64>,
    /// Controller gains: `controllers.v_lin`, `controllers.omega`, ...
    pub controllers: Option<Gains>,
    pub port: Option<u16>,
    pub records: Option<PathBuf>,
    pub trial: Option<usize>,
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flag, then file, then `TELEBENCH_OUT`, then `fallback`.
pub fn output_dir(flag: Option<PathBuf>, file: Option<PathBuf>, fallback: PathBuf) -> PathBuf {
    flag.or(file)
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or(fallback)
}
