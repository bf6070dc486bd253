//! Scenario files: JSON checked against `schemas/scenario.json`, then
//! deserialized and cross-checked for consistent dimensions.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

pub const SCHEMA: &str = include_str!("../../../schemas/scenario.json");

/// A problem tied to a location in the scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    /// JSON pointer, e.g. `/model/inner`.
    pub pointer: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() {
            "/"
        } else {
            &self.pointer
        };
        match self.line {
            Some(line) => write!(f, "line {line}, {at}: {}", self.message),
            None => write!(f, "{at}: {}", self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON at line {line}, column {column}: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: scenario is invalid:\n{}", list(.issues))]
    Invalid { path: String, issues: Vec<Issue> },
}

fn list(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl LoadError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            LoadError::Invalid { issues, .. } => issues,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub certificate: Option<CertificateSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub nodes: usize,
    pub node: NodeSpec,
    pub coupling: CouplingSpec,
    pub inner: Rows,
    #[serde(default)]
    pub delays: DelaySpec,
    #[serde(default)]
    pub kernel: Option<KernelSpecJson>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum NodeSpec {
    Linear {
        matrix: Rows,
    },
    Chua {
        alpha: Option<f64>,
        beta: Option<f64>,
        gamma: Option<f64>,
        m0: Option<f64>,
        m1: Option<f64>,
    },
    Hopfield {
        decay: Vec<f64>,
        weights: Rows,
        bias: Vec<f64>,
    },
}

impl NodeSpec {
    pub fn dim(&self) -> usize {
        match self {
            NodeSpec::Linear { matrix } => matrix.len(),
            NodeSpec::Chua { .. } => 3,
            NodeSpec::Hopfield { decay, .. } => decay.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologySpec {
    AllToAll,
    Ring,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CouplingSpec {
    Matrix {
        matrix: Rows,
        #[serde(default)]
        diffusive: bool,
        #[serde(default)]
        modulation: Option<Sinusoid>,
    },
    Diffusive {
        topology: TopologySpec,
        #[serde(default)]
        adjacency: Option<Rows>,
        strength: f64,
        #[serde(default)]
        normalize_rows: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    #[serde(rename = "self")]
    pub self_delay: Option<f64>,
    pub other: Option<f64>,
    pub matrix: Option<Rows>,
    pub variation: Option<Sinusoid>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpecJson {
    Dirac {
        #[serde(default)]
        at: f64,
        #[serde(default = "one")]
        weight: f64,
    },
    Exponential {
        rate: f64,
        #[serde(default = "one")]
        weight: f64,
    },
    Uniform {
        a: f64,
        b: f64,
        #[serde(default = "one")]
        weight: f64,
    },
    Mixture {
        parts: Vec<KernelSpecJson>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub tail_tol: Option<f64>,
    pub node_spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        values: Rows,
    },
    Sinusoid {
        values: Rows,
        amplitude: Rows,
        frequency: f64,
        duration: f64,
    },
}

impl InitialSpec {
    pub fn values(&self) -> &Rows {
        match self {
            InitialSpec::Constant { values } | InitialSpec::Sinusoid { values, .. } => values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MethodSpec {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationSpec {
    #[default]
    Linear,
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub method: MethodSpec,
    pub step: f64,
    pub horizon: f64,
    #[serde(default)]
    pub interpolation: InterpolationSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    #[serde(default)]
    pub rule: Option<String>,
    #[serde(rename = "P", default)]
    pub p: Option<Rows>,
    #[serde(rename = "Delta", default)]
    pub delta: Option<Vec<f64>>,
    pub epsilon: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_probes() -> usize {
    10_000
}

fn default_radius() -> f64 {
    10.0
}

fn default_grid() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default)]
    pub envelope: EnvelopeSpec,
    #[serde(default)]
    pub sync: Option<SyncSpec>,
    #[serde(default = "default_assumption_samples")]
    pub assumption_samples: usize,
}

fn default_assumption_samples() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        Self {
            rel_tol: default_rel_tol(),
        }
    }
}

fn default_rel_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncExpectation {
    Synchronized,
    NotSynchronized,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncSpec {
    pub threshold: f64,
    pub window: f64,
    #[serde(default)]
    pub expect: Option<SyncExpectation>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub directory: Option<String>,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: None,
            stride: 1,
        }
    }
}

fn default_stride() -> usize {
    1
}

fn schema_validator() -> &'static jsonschema::Validator {
    static VALIDATOR: OnceLock<jsonschema::Validator> = OnceLock::new();
    VALIDATOR.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Reads, schema-checks and cross-checks a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// [`load_scenario`] on text already in memory; `origin` names it in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, LoadError> {
    let value: Value = serde_json::from_str(text).map_err(|e| LoadError::Syntax {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let invalid = |issues| LoadError::Invalid {
        path: origin.to_string(),
        issues,
    };
    let mut issues: Vec<Issue> = schema_validator()
        .iter_errors(&value)
        .map(|e| {
            let pointer = e.instance_path().as_str().to_string();
            let mut message = e.to_string();
            if pointer.starts_with("/model/delays") {
                message.push_str(" (assumption A4: delays must be nonnegative)");
            }
            Issue {
                line: locate(text, &pointer),
                pointer,
                message,
            }
        })
        .collect();
    if !issues.is_empty() {
        issues.sort_by(|a, b| a.line.cmp(&b.line).then(a.pointer.cmp(&b.pointer)));
        issues.dedup();
        return Err(invalid(issues));
    }
    let scenario: Scenario = serde_path_to_error::deserialize(&value).map_err(|e| {
        let pointer: String = e
            .path()
            .iter()
            .filter_map(|seg| match seg {
                serde_path_to_error::Segment::Seq { index } => Some(format!("/{index}")),
                serde_path_to_error::Segment::Map { key } => Some(format!("/{key}")),
                _ => None,
            })
            .collect();
        invalid(vec![Issue {
            line: locate(text, &pointer),
            pointer,
            message: e.inner().to_string(),
        }])
    })?;
    let issues: Vec<Issue> = check_consistency(&scenario)
        .into_iter()
        .map(|(pointer, message)| Issue {
            line: locate(text, &pointer),
            pointer,
            message,
        })
        .collect();
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(invalid(issues))
    }
}

fn expect_matrix(out: &mut Vec<(String, String)>, key: &str, rows: &Rows, r: usize, c: usize) {
    let ragged = rows.iter().any(|row| row.len() != rows[0].len());
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        let got = match rows.first() {
            Some(first) if !ragged => format!("{}x{}", rows.len(), first.len()),
            _ => format!("{} ragged rows", rows.len()),
        };
        out.push((
            key.into(),
            format!("dimension mismatch: expected {r}x{c}, got {got}"),
        ));
    }
}

fn expect_len(out: &mut Vec<(String, String)>, key: &str, v: &[f64], n: usize) {
    if v.len() != n {
        out.push((
            key.into(),
            format!("dimension mismatch: expected {n} entries, got {}", v.len()),
        ));
    }
}

/// Dimension and cross-field checks the schema cannot express.
fn check_consistency(s: &Scenario) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let m = s.model.nodes;
    let n = s.model.node.dim();
    match &s.model.node {
        NodeSpec::Linear { matrix } => expect_matrix(&mut out, "/model/node/matrix", matrix, n, n),
        NodeSpec::Hopfield { weights, bias, .. } => {
            expect_matrix(&mut out, "/model/node/weights", weights, n, n);
            expect_len(&mut out, "/model/node/bias", bias, n);
        }
        NodeSpec::Chua { .. } => {}
    }
    expect_matrix(&mut out, "/model/inner", &s.model.inner, n, n);
    match &s.model.coupling {
        CouplingSpec::Matrix { matrix, .. } => {
            expect_matrix(&mut out, "/model/coupling/matrix", matrix, m, m)
        }
        CouplingSpec::Diffusive {
            topology,
            adjacency,
            ..
        } => match (topology, adjacency) {
            (TopologySpec::Custom, Some(a)) => {
                expect_matrix(&mut out, "/model/coupling/adjacency", a, m, m)
            }
            (TopologySpec::Custom, None) => {}
            (_, Some(_)) => out.push((
                "/model/coupling/adjacency".into(),
                "adjacency is only used with topology \"custom\"".into(),
            )),
            (_, None) => {}
        },
    }
    if let Some(tau) = &s.model.delays.matrix {
        expect_matrix(&mut out, "/model/delays/matrix", tau, m, m);
    }
    if let Some(v) = s.model.delays.variation {
        let base = s.model.delays.matrix.as_ref().map_or_else(
            || s.model.delays.other.unwrap_or(0.0),
            |tau| {
                let mut min = f64::INFINITY;
                for (i, row) in tau.iter().enumerate() {
                    for (j, &x) in row.iter().enumerate() {
                        if i != j {
                            min = min.min(x);
                        }
                    }
                }
                min
            },
        );
        if v.amplitude.abs() > base {
            out.push((
                "/model/delays/variation/amplitude".into(),
                format!(
                    "|amplitude| = {} exceeds the smallest off-diagonal delay {base}; delays would go negative (assumption A4)",
                    v.amplitude.abs()
                ),
            ));
        }
    }
    let values = s.initial.values();
    expect_matrix(&mut out, "/initial/values", values, m, n);
    if let InitialSpec::Sinusoid { amplitude, .. } = &s.initial {
        expect_matrix(&mut out, "/initial/amplitude", amplitude, m, n);
    }
    let ig = &s.integrator;
    if ig.horizon < ig.step {
        out.push((
            "/integrator/horizon".into(),
            format!(
                "horizon {} is shorter than the step {}",
                ig.horizon, ig.step
            ),
        ));
    }
    if let Some(c) = &s.certificate {
        if let Some(p) = &c.p {
            expect_matrix(&mut out, "/certificate/P", p, n, n);
        }
        if let Some(d) = &c.delta {
            expect_len(&mut out, "/certificate/Delta", d, n);
        }
    }
    if let Some(sync) = &s.diagnostics.sync {
        if m < 2 {
            out.push((
                "/diagnostics/sync".into(),
                "synchronization needs at least two nodes".into(),
            ));
        }
        if sync.window > ig.horizon {
            out.push((
                "/diagnostics/sync/window".into(),
                format!(
                    "window {} is longer than the horizon {}",
                    sync.window, ig.horizon
                ),
            ));
        }
    }
    out
}

/// 1-based line of the value at JSON pointer `pointer` in `text`.
///
/// Falls back to the deepest enclosing value that exists, so a missing key
/// reports the line of its parent object.
pub fn locate(text: &str, pointer: &str) -> Option<usize> {
    let target: Vec<String> = pointer
        .split('/')
        .skip(1)
        .map(|s| s.replace("~1", "/").replace("~0", "~"))
        .collect();
    let mut scan = Scanner {
        bytes: text.as_bytes(),
        pos: 0,
        target: &target,
        best: None,
    };
    scan.value(0);
    scan.best.map(|(_, pos)| {
        1 + text.as_bytes()[..pos]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
    })
}

/// Minimal JSON walker recording where each path prefix of `target` starts.
struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    target: &'a [String],
    /// (matched depth, byte offset)
    best: Option<(usize, usize)>,
}

impl Scanner<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn string(&mut self) -> String {
        let start = self.pos + 1;
        self.pos += 1;
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'"' {
            if self.bytes[self.pos] == b'\\' {
                self.pos += 1;
            }
            self.pos += 1;
        }
        let raw = &self.bytes[start..self.pos.min(self.bytes.len())];
        self.pos += 1;
        serde_json::from_slice::<String>(&[b"\"", raw, b"\""].concat())
            .unwrap_or_else(|_| String::from_utf8_lossy(raw).into_owned())
    }

    /// Walks one value; `depth` path segments of the target matched so far
    /// (`usize::MAX` once the walk has left the target path).
    fn value(&mut self, depth: usize) {
        self.skip_ws();
        if depth != usize::MAX && self.best.is_none_or(|(d, _)| depth >= d) {
            self.best = Some((depth, self.pos));
        }
        let child = |d: usize, key: &str, target: &[String]| {
            if d != usize::MAX && d < target.len() && target[d] == key {
                d + 1
            } else {
                usize::MAX
            }
        };
        match self.bytes.get(self.pos) {
            Some(b'{') => {
                self.pos += 1;
                loop {
                    self.skip_ws();
                    match self.bytes.get(self.pos) {
                        Some(b'"') => {
                            let key = self.string();
                            self.skip_ws();
                            self.pos += 1; // ':'
                            self.value(child(depth, &key, self.target));
                        }
                        Some(b',') => self.pos += 1,
                        Some(b'}') => {
                            self.pos += 1;
                            return;
                        }
                        _ => return,
                    }
                }
            }
            Some(b'[') => {
                self.pos += 1;
                let mut index = 0usize;
                loop {
                    self.skip_ws();
                    match self.bytes.get(self.pos) {
                        Some(b']') => {
                            self.pos += 1;
                            return;
                        }
                        Some(b',') => {
                            self.pos += 1;
                            index += 1;
                        }
                        Some(_) => self.value(child(depth, &index.to_string(), self.target)),
                        None => return,
                    }
                }
            }
            Some(b'"') => {
                self.string();
            }
            Some(_) => {
                while self.pos < self.bytes.len()
                    && !matches!(self.bytes[self.pos], b',' | b'}' | b']')
                    && !self.bytes[self.pos].is_ascii_whitespace()
                {
                    self.pos += 1;
                }
            }
            None => {}
        }
    }
}
