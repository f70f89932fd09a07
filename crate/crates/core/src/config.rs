//! Experiment configuration: a TOML file with `[dataset]`, `[map]`,
//! `[clustering]`, and `[output]` blocks. CLI flags override config keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::InitStrategy;
use crate::data::{ColumnRef, ScalingKind};
use crate::error::{Error, Result};
use crate::feature_maps::{EntanglementPattern, FeatureMapConfig, MapKind};
use crate::fingerprint::Fingerprint;
use crate::kernel::KernelMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingName {
    Standard,
    Minmax,
    StandardThenMinmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetBlock {
    pub path: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
    pub label_column: ColumnRef,
    #[serde(default)]
    pub feature_columns: Option<Vec<ColumnRef>>,
    #[serde(default = "default_scaling")]
    pub scaling: ScalingName,
    /// Range endpoints for the minmax scalings; default [0, π].
    #[serde(default)]
    pub scale_lo: Option<f64>,
    #[serde(default)]
    pub scale_hi: Option<f64>,
}

fn default_true() -> bool {
    true
}

fn default_scaling() -> ScalingName {
    ScalingName::Standard
}

impl DatasetBlock {
    pub fn scaling_kind(&self) -> ScalingKind {
        let lo = self.scale_lo.unwrap_or(0.0);
        let hi = self.scale_hi.unwrap_or(std::f64::consts::PI);
        match self.scaling {
            ScalingName::Standard => ScalingKind::Standard,
            ScalingName::Minmax => ScalingKind::Minmax { lo, hi },
            ScalingName::StandardThenMinmax => ScalingKind::StandardThenMinmax { lo, hi },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapBlock {
    pub kind: MapKind,
    pub qubits: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub entanglement: EntanglementPattern,
    #[serde(default)]
    pub pauli_strings: Vec<String>,
    #[serde(default)]
    pub theta_seed: u64,
}

fn default_reps() -> usize {
    1
}

impl MapBlock {
    pub fn to_feature_map_config(&self) -> FeatureMapConfig {
        FeatureMapConfig {
            map_kind: self.kind,
            n_qubits: self.qubits,
            reps: self.reps,
            entanglement: self.entanglement,
            pauli_strings: self.pauli_strings.clone(),
            theta_seed: self.theta_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Classical,
    Quantum,
    KernelMatrix,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Classical => "classical",
            Method::Quantum => "quantum",
            Method::KernelMatrix => "kernel_matrix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Exact,
    Shots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringBlock {
    pub method: Method,
    pub k: usize,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default)]
    pub init: InitStrategy,
    #[serde(default = "default_seeds")]
    pub init_seeds: Vec<u64>,
    /// Ansatz-parameter seeds to sweep; only meaningful for the
    /// `efficient_su2` map. Defaults to the map's own `theta_seed`.
    #[serde(default)]
    pub theta_seeds: Option<Vec<u64>>,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub shot_seed: u64,
}

fn default_t_max() -> usize {
    30
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_mode() -> ModeName {
    ModeName::Exact
}

fn default_shots() -> u64 {
    4096
}

impl ClusteringBlock {
    pub fn kernel_mode(&self) -> KernelMode {
        match self.mode {
            ModeName::Exact => KernelMode::Exact,
            ModeName::Shots => KernelMode::Shots {
                shots: self.shots,
                seed: self.shot_seed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub report: Option<String>,
    #[serde(default)]
    pub results: Option<String>,
    #[serde(default)]
    pub record: Option<String>,
    #[serde(default)]
    pub plot_dir: Option<String>,
    #[serde(default)]
    pub kernel_cache: Option<String>,
    /// Feature pair drawn in the scatter panels; defaults to the first two.
    #[serde(default)]
    pub scatter_features: Option<Vec<ColumnRef>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetBlock,
    #[serde(default)]
    pub map: Option<MapBlock>,
    pub clustering: ClusteringBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::NotFound(path.to_path_buf())
            } else {
                Error::Io(e)
            }
        })?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.clustering.k == 0 {
            return Err(Error::Config("clustering.k must be ≥ 1".to_string()));
        }
        if self.clustering.t_max == 0 {
            return Err(Error::Config("clustering.t_max must be ≥ 1".to_string()));
        }
        if self.clustering.init_seeds.is_empty() {
            return Err(Error::Config(
                "clustering.init_seeds must list at least one seed".to_string(),
            ));
        }
        if self.clustering.shots == 0 {
            return Err(Error::Config("clustering.shots must be ≥ 1".to_string()));
        }
        match self.clustering.method {
            Method::Classical => {}
            Method::Quantum | Method::KernelMatrix => {
                if self.map.is_none() {
                    return Err(Error::Config(format!(
                        "method '{}' needs a [map] block",
                        self.clustering.method.name()
                    )));
                }
            }
        }
        if let Some(map) = &self.map {
            if map.qubits == 0 {
                return Err(Error::Config("map.qubits must be ≥ 1".to_string()));
            }
            if map.reps == 0 {
                return Err(Error::Config("map.reps must be ≥ 1".to_string()));
            }
            if map.kind == MapKind::Pauli && map.pauli_strings.is_empty() {
                return Err(Error::Config(
                    "map.pauli_strings must list at least one word".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Map qubit count against the selected feature dimension; run before
    /// any encoding work.
    pub fn check_map_compatibility(&self, d: usize) -> Result<()> {
        let Some(map) = &self.map else {
            return Ok(());
        };
        let config = map.to_feature_map_config();
        if let Some(expected) = config.expected_dimension()
            && expected != d
        {
            return Err(Error::Config(format!(
                "map '{}' on {} qubits expects {} features, dataset has {d}",
                map.kind.name(),
                map.qubits,
                expected
            )));
        }
        // the hardware-efficient ansatz just needs room for the data
        crate::feature_maps::required_theta_count(&config, d)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Canonical digest of the experiment itself. Key order in the TOML file
    /// cannot affect it because hashing happens after parsing into the
    /// fixed-field structure; output paths are excluded so the same
    /// experiment keeps its digest wherever it writes.
    pub fn digest(&self) -> Fingerprint {
        let mut canonical = self.clone();
        canonical.output = OutputBlock::default();
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        Fingerprint::of_bytes(&json)
    }

    fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.output.dir.clone().unwrap_or_else(|| "out".to_string()))
    }

    pub fn report_path(&self) -> PathBuf {
        self.output
            .report
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir().join("report.txt"))
    }

    pub fn results_path(&self) -> PathBuf {
        self.output
            .results
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir().join("results.kv"))
    }

    pub fn record_path(&self) -> PathBuf {
        self.output
            .record
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir().join("run.json"))
    }

    pub fn plot_dir(&self) -> PathBuf {
        self.output
            .plot_dir
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir().join("plots"))
    }

    pub fn kernel_cache_path(&self) -> PathBuf {
        self.output
            .kernel_cache
            .as_ref()
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir().join("kernel.bin"))
    }

    /// Rebases every default output path onto `dir`. Explicit per-file paths
    /// keep only their file name.
    pub fn rebase_output(&mut self, dir: &Path) {
        let keep_name = |field: &mut Option<String>, fallback: &str| {
            let name = field
                .as_ref()
                .map(|p| {
                    PathBuf::from(p)
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_else(|| fallback.to_string())
                })
                .unwrap_or_else(|| fallback.to_string());
            *field = Some(dir.join(name).to_string_lossy().into_owned());
        };
        self.output.dir = Some(dir.to_string_lossy().into_owned());
        keep_name(&mut self.output.report, "report.txt");
        keep_name(&mut self.output.results, "results.kv");
        keep_name(&mut self.output.record, "run.json");
        keep_name(&mut self.output.kernel_cache, "kernel.bin");
        self.output.plot_dir = Some(dir.join("plots").to_string_lossy().into_owned());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[dataset]
path = "data/iris.csv"
label_column = "species"
scaling = "standard"

[map]
kind = "zz"
qubits = 4
entanglement = "full"

[clustering]
method = "quantum"
k = 3
init_seeds = [0, 1]
"#;

    #[test]
    fn parses_and_applies_defaults() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.clustering.t_max, 30);
        assert_eq!(c.clustering.shots, 4096);
        assert_eq!(c.map.as_ref().unwrap().reps, 1);
        assert_eq!(c.report_path(), PathBuf::from("out/report.txt"));
    }

    #[test]
    fn digest_ignores_key_order() {
        let reordered = r#"
[clustering]
init_seeds = [0, 1]
k = 3
method = "quantum"

[dataset]
scaling = "standard"
label_column = "species"
path = "data/iris.csv"

[map]
entanglement = "full"
qubits = 4
kind = "zz"
"#;
        let a = ExperimentConfig::from_toml(BASE).unwrap();
        let b = ExperimentConfig::from_toml(reordered).unwrap();
        assert_eq!(a.digest(), b.digest());

        let mut c = a.clone();
        c.clustering.k = 2;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(ExperimentConfig::from_toml("").is_err());
        let no_map = BASE.replace(
            "[map]\nkind = \"zz\"\nqubits = 4\nentanglement = \"full\"\n",
            "",
        );
        assert!(ExperimentConfig::from_toml(&no_map).is_err());
        let zero_k = BASE.replace("k = 3", "k = 0");
        assert!(ExperimentConfig::from_toml(&zero_k).is_err());
        let unknown = format!("{BASE}\n[extra]\nfoo = 1\n");
        assert!(ExperimentConfig::from_toml(&unknown).is_err());
    }

    #[test]
    fn map_compatibility_guard() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert!(c.check_map_compatibility(4).is_ok());
        assert!(c.check_map_compatibility(3).is_err());
    }
}
