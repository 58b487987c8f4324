//! Run reports. Bodies are deterministic; timing only ever goes to stderr.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{CaseConfig, ConfigError};
use crate::tuple_spec::BuildError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

impl Verdict {
    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Error => 2,
        }
    }

    fn word(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Error => "ERROR",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: bool,
    /// Informational checks never change the overall verdict.
    pub required: bool,
    pub residual: Option<f64>,
    pub budget: Option<f64>,
    pub detail: Option<String>,
}

impl Check {
    pub fn residual(name: impl Into<String>, residual: f64, budget: f64) -> Self {
        Check {
            name: name.into(),
            verdict: residual <= budget,
            required: true,
            residual: Some(residual),
            budget: Some(budget),
            detail: None,
        }
    }

    pub fn flag(name: impl Into<String>, verdict: bool) -> Self {
        Check {
            name: name.into(),
            verdict,
            required: true,
            residual: None,
            budget: None,
            detail: None,
        }
    }

    pub fn info(mut self) -> Self {
        self.required = false;
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
    /// 1 for a mathematical failure, 2 for usage and precondition errors.
    pub exit_code: u8,
}

impl ErrorObject {
    pub fn config(e: &ConfigError) -> Self {
        ErrorObject {
            kind: "Config".into(),
            message: e.0.clone(),
            exit_code: 2,
        }
    }

    pub fn math(e: &hypermodel::Error) -> Self {
        use hypermodel::Error as E;
        let kind = format!("{e:?}");
        let kind = kind
            .split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or("Error")
            .to_string();
        let exit_code = match e {
            E::Parse(_)
            | E::Shape(_)
            | E::BadWeights(_)
            | E::BadBeta(_)
            | E::NonDecreasingWeights { .. }
            | E::ArityMismatch { .. }
            | E::NotCommuting { .. }
            | E::NotContraction { .. }
            | E::OutsideDisc
            | E::DegreeOverflow { .. }
            | E::ZeroConstantTerm => 2,
            _ => 1,
        };
        ErrorObject {
            kind,
            message: e.to_string(),
            exit_code,
        }
    }

    pub fn build(e: &BuildError) -> Self {
        match e {
            BuildError::Config(c) => Self::config(c),
            BuildError::Math(m) => Self::math(m),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub case: Option<CaseConfig>,
    pub checks: Vec<Check>,
    pub data: Map<String, Value>,
    pub verdict: Verdict,
    pub error: Option<ErrorObject>,
}

impl Report {
    pub fn new(command: impl Into<String>, case: Option<CaseConfig>) -> Self {
        Report {
            tool: "hypermodel",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            case,
            checks: Vec::new(),
            data: Map::new(),
            verdict: Verdict::Pass,
            error: None,
        }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn put(&mut self, key: &str, v: impl Serialize) {
        self.data.insert(
            key.to_string(),
            serde_json::to_value(v).expect("report data serializes"),
        );
    }

    pub fn fail_with(&mut self, e: ErrorObject) {
        self.error = Some(e);
    }

    /// Settles the verdict from the error and the required checks.
    pub fn finish(mut self) -> Self {
        self.verdict = match &self.error {
            Some(e) if e.exit_code == 2 => Verdict::Error,
            Some(_) => Verdict::Fail,
            None if self.checks.iter().all(|c| c.verdict || !c.required) => Verdict::Pass,
            None => Verdict::Fail,
        };
        self
    }

    pub fn exit_code(&self) -> u8 {
        self.verdict.exit_code()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Text => self.render_text(),
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.tool, self.version, self.command);
        if let Some(c) = &self.case {
            let _ = writeln!(out, "case: {}", c.name);
            let _ = writeln!(out, "weights: {}", c.weights);
            if let Some(t) = &c.tuple {
                let _ = writeln!(out, "tuple: {t}");
            }
            if !c.degrees.is_empty() {
                let _ = writeln!(out, "degrees: {:?}", c.degrees);
            }
        }
        for c in &self.checks {
            let word = match (c.verdict, c.required) {
                (true, _) => "ok  ",
                (false, true) => "FAIL",
                (false, false) => "info",
            };
            let _ = write!(out, "{word}  {}", c.name);
            if let Some(r) = c.residual {
                let _ = write!(out, "  residual {r:.3e}");
            }
            if let Some(b) = c.budget {
                let _ = write!(out, "  budget {b:.1e}");
            }
            if let Some(d) = &c.detail {
                let _ = write!(out, "  ({d})");
            }
            out.push('\n');
        }
        for (k, v) in &self.data {
            let _ = writeln!(
                out,
                "{k}: {}",
                serde_json::to_string(v).expect("value serializes")
            );
        }
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {} {}", e.kind, e.message);
        }
        let _ = writeln!(out, "verdict: {}", self.verdict.word());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    #[value(alias = "json-like")]
    Json,
}
