//! Scenario files: what to build, what to run, where to write.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use grpd_core::models::GroupoidModel;
use grpd_core::wavefront::WfParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_TEXT: &str = include_str!("../schema/scenario.schema.json");
pub const SCHEMA_VERSION: u32 = 1;

/// Distribution built from the catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "catalog", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    GaussianBump {
        center: Vec<f64>,
        width: f64,
    },
    RotationLayer {
        theta: usize,
        #[serde(default)]
        order: usize,
    },
    /// Layer with coefficient `scale · (1 + amplitude·cos 2π(x − phase))`.
    Layer {
        theta: usize,
        #[serde(default)]
        order: usize,
        #[serde(default)]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "one")]
        scale: [f64; 2],
    },
    PointMass {
        index: Vec<usize>,
        #[serde(default = "one")]
        weight: [f64; 2],
    },
    UnitDelta,
    BandLimited {
        band: usize,
    },
    Counterexample,
    File {
        path: PathBuf,
    },
}

fn one() -> [f64; 2] {
    [1.0, 0.0]
}

/// Cone set built from the catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "catalog", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConeSpec {
    RotationConormal { theta: usize },
    AStarUnits,
    Point { index: Vec<usize> },
    Empty,
    File { path: PathBuf },
}

/// Property suites, one per acceptance criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    GroupoidAxioms,
    KernelIdentities,
    ConvolutionAlgebra,
    GOperators,
    TransformationIso,
    Counterexample,
    ProductBound,
    ConeHeredity,
    Serialization,
}

impl Suite {
    pub fn criterion(self) -> usize {
        self as usize + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    Convolve {
        lhs: String,
        rhs: String,
        out: String,
    },
    /// Convolution through the composable-pair pipeline; also stores the
    /// predicted cone under `<out>_bound`.
    ConvolveGated {
        lhs: String,
        rhs: String,
        lhs_cone: String,
        rhs_cone: String,
        out: String,
    },
    WfEstimate {
        input: String,
        out: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<WfParams>,
    },
    ConeProduct {
        lhs: String,
        rhs: String,
        out: String,
        #[serde(default)]
        barred: bool,
    },
    Verify {
        lhs: String,
        rhs: String,
        lhs_cone: String,
        rhs_cone: String,
        out: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<WfParams>,
    },
    Check {
        suite: Suite,
        /// Grid size; each suite has its own default.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        /// Sample count; each suite has its own default.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<GroupoidModel>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub distributions: BTreeMap<String, DistSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub cones: BTreeMap<String, ConeSpec>,
    #[serde(default)]
    pub operations: Vec<Operation>,
    /// Output directory, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA_TEXT).expect("bundled schema is JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

impl Scenario {
    /// Schema check, then typed parse.
    pub fn from_value(v: Value) -> Result<Self, CliError> {
        let errors: Vec<String> = validator().iter_errors(&v).map(|e| format!("{}: {e}", e.instance_path())).collect();
        if !errors.is_empty() {
            return Err(CliError::Invalid(errors.join("; ")));
        }
        let s: Scenario = serde_json::from_value(v).map_err(|e| CliError::Invalid(e.to_string()))?;
        if s.version != SCHEMA_VERSION {
            return Err(CliError::Invalid(format!("unsupported scenario version {}", s.version)));
        }
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("not JSON: {e}")))?;
        Self::from_value(v)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("scenario serializes")
    }
}
