//! Case files: one TOML document per verification case.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hypermodel::hyper::{dyadic_grid, product_grid};
use hypermodel::MultiWeightSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseCommand {
    Series,
    Check,
    Dilate,
    Charfn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    Pass,
    Fail,
    Error,
}

impl Expect {
    pub fn exit_code(self) -> u8 {
        match self {
            Expect::Pass => 0,
            Expect::Fail => 1,
            Expect::Error => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DilateMode {
    #[default]
    Pure,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesOp {
    Invert,
    Quotient,
    Props,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub op: SeriesOp,
    #[serde(default = "default_terms")]
    pub terms: usize,
    pub r: Option<f64>,
    pub s: Option<f64>,
}

fn default_terms() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Loewner positivity.
    pub positivity: f64,
    /// Isometry and intertwining residuals.
    pub residual: f64,
    /// Compression, double limits and lemma identities.
    pub structural: f64,
    /// Exact algebraic identities such as I - C*C = TT*.
    pub identity: f64,
    /// Terms of each defect series on the grid.
    pub terms: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            positivity: hypermodel::POSITIVITY_TOL,
            residual: 1e-9,
            structural: 1e-8,
            identity: 1e-10,
            terms: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GridPolicy {
    #[default]
    Dyadic,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub policy: GridPolicy,
    /// Points 1 - 2^{-j}, j = 1..=levels, on every axis.
    pub levels: usize,
    /// Per-axis values for the explicit policy.
    pub axis: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            policy: GridPolicy::Dyadic,
            levels: 3,
            axis: Vec::new(),
        }
    }
}

impl GridConfig {
    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        match self.policy {
            GridPolicy::Dyadic => dyadic_grid(n, self.levels),
            GridPolicy::Explicit => product_grid(&vec![self.axis.clone(); n]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    pub command: CaseCommand,
    pub weights: String,
    pub tuple: Option<String>,
    #[serde(default)]
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub mode: DilateMode,
    pub series: Option<SeriesConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub grid: GridConfig,
    pub expect: Option<Expect>,
    /// Seed for auxiliary draws (conjugating unitaries, alternative completions).
    #[serde(default)]
    pub seed: u64,
    /// Checks whose verdicts decide the exit code; empty means the command's defaults.
    #[serde(default)]
    pub require: Vec<String>,
    /// Directory that relative matrix paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Base directory of cases compiled into the binary.
pub const EMBEDDED: &str = "<embedded>";

/// Reads a data file, looking in the compiled-in corpus for embedded cases.
pub fn read_data(path: &Path) -> Result<String, ConfigError> {
    if let Ok(rel) = path.strip_prefix(EMBEDDED) {
        let key = rel.to_string_lossy().replace('\\', "/");
        return crate::corpus::data(&key)
            .map(str::to_string)
            .ok_or_else(|| ConfigError(format!("no embedded data file {key}")));
    }
    std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl CaseConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: CaseConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, dir)
    }

    pub fn weights(&self) -> Result<MultiWeightSpec, ConfigError> {
        self.weights
            .parse()
            .map_err(|e: hypermodel::Error| ConfigError(format!("weights: {e}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let w = self.weights()?;
        if self.command == CaseCommand::Series {
            if self.series.is_none() {
                return Err(ConfigError("series cases need a [series] table".into()));
            }
            return Ok(());
        }
        if self.tuple.is_none() {
            return Err(ConfigError(
                format!("{:?} cases need a tuple", self.command).to_lowercase(),
            ));
        }
        let needs_degrees = matches!(self.command, CaseCommand::Dilate | CaseCommand::Charfn);
        if needs_degrees && self.degrees.len() != w.n() {
            return Err(ConfigError(format!(
                "expected {} degrees, got {}",
                w.n(),
                self.degrees.len()
            )));
        }
        if self.degrees.contains(&0) {
            return Err(ConfigError("degrees must be positive".into()));
        }
        if self.grid.policy == GridPolicy::Explicit
            && self.grid.axis.iter().any(|r| !(0.0..=1.0).contains(r))
        {
            return Err(ConfigError("grid axis values must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_check_case() {
        let cfg = CaseConfig::parse(
            r#"
name = "s"
command = "check"
weights = "bergman:1,bergman:1"
tuple = "scalars:[0.5,0.5]"
"#,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.grid.points(2).len(), 9);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_weights() {
        let bad = "name = \"x\"\ncommand = \"check\"\nweights = \"hardy\"\ntuple = \"scalars:[0.1]\"\nextra = 1\n";
        assert!(CaseConfig::parse(bad, Path::new(".")).is_err());
        let bad = "name = \"x\"\ncommand = \"check\"\nweights = \"bergman:-1\"\ntuple = \"scalars:[0.1]\"\n";
        assert!(CaseConfig::parse(bad, Path::new(".")).is_err());
        let bad = "name = \"x\"\ncommand = \"dilate\"\nweights = \"hardy,hardy\"\ntuple = \"nilpotent:1:3:2\"\ndegrees = [3]\n";
        assert!(CaseConfig::parse(bad, Path::new(".")).is_err());
    }
}
