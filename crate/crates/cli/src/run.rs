//! `run`, `check-quad` and `validate` on a loaded scenario.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use delaynet::dynamics::{check_assumptions, Finding};
use delaynet::{
    check_envelope, check_quad, integrate, sync_report, EnvelopeReport, IntegrateError, ProbeBox,
    ProofConstants, QuadCertificate, QuadVerdict, Scalar, SyncReport, Trajectory,
};
use serde_json::{json, Value};
use thiserror::Error;

use crate::build::{build, BuildIssue, Built};
use crate::scenario::{Precision, Scenario, SyncExpectation};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_CHECK_FAILED: u8 = 3;
pub const EXIT_BLOW_UP: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{}: {}", .0.pointer, .0.message)]
    Build(BuildIssue),
    #[error("assumption {assumption} is violated: {witness}")]
    Assumption {
        assumption: &'static str,
        witness: String,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Build(_) | RunError::Assumption { .. } => EXIT_INVALID,
            RunError::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: u8,
    pub summary: Value,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    CheckQuad,
    Validate,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::CheckQuad => "check-quad",
            Mode::Validate => "validate",
        }
    }
}

/// Output directory: `--out`, then `output.directory`, then `out/<name>`.
pub fn output_dir(s: &Scenario, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| s.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(&s.name))
}

pub fn execute(s: &Scenario, mode: Mode, opts: &RunOptions) -> Result<Outcome, RunError> {
    match s.precision {
        Precision::F64 => Session::<f64>::new(s, mode, opts)?.execute(),
        Precision::F32 => Session::<f32>::new(s, mode, opts)?.execute(),
    }
}

pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<Outcome, RunError> {
    execute(s, Mode::Run, opts)
}

struct Session<'a, T> {
    scenario: &'a Scenario,
    mode: Mode,
    seed: u64,
    dir: PathBuf,
    built: Built<T>,
    artifacts: Vec<PathBuf>,
    summary: serde_json::Map<String, Value>,
    checks_failed: bool,
}

fn num<T: Scalar>(v: T) -> Value {
    json!(v.as_f64())
}

fn assumption_name(i: usize) -> &'static str {
    [
        "A1 (node law)",
        "A2 (coupling)",
        "A3 (output)",
        "A4 (delays)",
    ][i]
}

/// Verdict, constants when it passes, and the certificate itself.
type Certified<T> = (QuadVerdict<T>, Option<ProofConstants<T>>, QuadCertificate<T>);

impl<'a, T: Scalar> Session<'a, T> {
    fn new(scenario: &'a Scenario, mode: Mode, opts: &RunOptions) -> Result<Self, RunError> {
        let built = build::<T>(scenario).map_err(RunError::Build)?;
        let seed = opts.seed.unwrap_or(scenario.seed);
        let mut summary = serde_json::Map::new();
        summary.insert("scenario".into(), json!(scenario.name));
        summary.insert("command".into(), json!(mode.name()));
        summary.insert(
            "precision".into(),
            json!(match scenario.precision {
                Precision::F64 => "f64",
                Precision::F32 => "f32",
            }),
        );
        summary.insert("seed".into(), json!(seed));
        Ok(Self {
            scenario,
            mode,
            seed,
            dir: output_dir(scenario, opts),
            built,
            artifacts: Vec::new(),
            summary,
            checks_failed: false,
        })
    }

    fn execute(mut self) -> Result<Outcome, RunError> {
        self.assumptions()?;
        let exit_code = match self.mode {
            Mode::Validate => EXIT_OK,
            Mode::CheckQuad => {
                self.create_dir()?;
                let verdict = self.certificate_only()?;
                if verdict {
                    EXIT_OK
                } else {
                    EXIT_CHECK_FAILED
                }
            }
            Mode::Run => {
                self.create_dir()?;
                self.run()?
            }
        };
        let status = match exit_code {
            EXIT_OK => "pass",
            EXIT_CHECK_FAILED => "check_failed",
            EXIT_BLOW_UP => "blow_up",
            _ => "error",
        };
        self.summary.insert("status".into(), json!(status));
        self.summary.insert("exit_code".into(), json!(exit_code));
        self.summary.insert(
            "artifacts".into(),
            json!(self
                .artifacts
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()),
        );
        let summary = Value::Object(self.summary);
        if self.mode != Mode::Validate {
            let path = self.dir.join("summary.json");
            write_file(&path, |w| {
                serde_json::to_writer_pretty(&mut *w, &summary)?;
                writeln!(w)
            })?;
            self.artifacts.push(path);
        }
        Ok(Outcome {
            exit_code,
            summary,
            artifacts: self.artifacts,
        })
    }

    fn create_dir(&self) -> Result<(), RunError> {
        fs::create_dir_all(&self.dir).map_err(|source| RunError::Io {
            path: self.dir.clone(),
            source,
        })
    }

    fn assumptions(&mut self) -> Result<(), RunError> {
        let samples = self.scenario.diagnostics.assumption_samples;
        if samples == 0 {
            return Ok(());
        }
        let b = &self.built;
        let report = check_assumptions(&b.model, b.config.horizon, samples, self.seed);
        let findings = [
            &report.a1_node_law,
            &report.a2_coupling,
            &report.a3_output,
            &report.a4_delays,
        ];
        for (i, f) in findings.iter().enumerate() {
            if let Finding::Violated(w) = f {
                return Err(RunError::Assumption {
                    assumption: assumption_name(i),
                    witness: format!("{w:?}"),
                });
            }
        }
        self.summary.insert(
            "assumptions".into(),
            json!({ "samples": samples, "violations": 0 }),
        );
        Ok(())
    }

    /// QUAD check plus the growth constants; returns `None` without a
    /// certificate, else the verdict and (when it passes) the constants.
    fn certify(&self) -> Option<Certified<T>> {
        let b = &self.built;
        let cert = b.certificate.as_ref()?;
        let spec = self.scenario.certificate.as_ref()?;
        let verdict = check_quad(
            b.model.node_dynamics(),
            cert,
            &ProbeBox::cube(cert.dim(), T::lit(spec.radius)),
            (T::zero(), b.config.horizon),
            spec.probes,
            self.seed,
        )
        .expect("certificate dimensions were checked when building");
        let constants = verdict
            .passed()
            .then(|| {
                ProofConstants::derive(&b.model, cert, &b.x0(), b.config.horizon, spec.grid).ok()
            })
            .flatten();
        Some((verdict, constants, cert.clone()))
    }

    fn certificate_report(
        &self,
        verdict: &QuadVerdict<T>,
        constants: Option<&ProofConstants<T>>,
        cert: &QuadCertificate<T>,
        envelope: Option<&EnvelopeReport<T>>,
    ) -> String {
        let spec = self
            .scenario
            .certificate
            .as_ref()
            .expect("certificate present");
        let mut s = String::from("[certificate]\n");
        let rule = if spec.rule.is_some() {
            "lipschitz"
        } else {
            "explicit"
        };
        let p = cert.p().matrix();
        let rows: Vec<String> = (0..p.rows()).map(|i| format!("{:?}", p.row(i))).collect();
        let _ = writeln!(s, "rule = {rule}");
        let _ = writeln!(s, "P = [{}]", rows.join(", "));
        let _ = writeln!(s, "Delta = {:?}", cert.delta());
        let _ = writeln!(s, "epsilon = {}", cert.epsilon());
        let _ = writeln!(s, "seed = {}", self.seed);
        match verdict {
            QuadVerdict::Pass { probes } => {
                let _ = writeln!(s, "verdict = pass\nprobes = {probes}");
            }
            QuadVerdict::Counterexample {
                index,
                t,
                u1,
                u2,
                lhs,
                rhs,
            } => {
                let _ = writeln!(
                    s,
                    "verdict = counterexample\nprobes = {}\ncounterexample.index = {index}\ncounterexample.t = {t}\ncounterexample.u1 = {u1:?}\ncounterexample.u2 = {u2:?}\ncounterexample.lhs = {lhs}\ncounterexample.rhs = {rhs}",
                    index + 1
                );
            }
        }
        if let Some(c) = constants {
            let _ = write!(
                s,
                "\n[constants]\ndelta = {}\nalpha = {}\nbeta = {}\ngamma = {}\nK = {}\nlambda_min = {}\nnorm_P = {}\nm = {}\neta = {}\n",
                c.delta,
                c.alpha,
                c.beta,
                c.gamma,
                c.kernel_variation,
                c.lambda_min,
                c.norm_p,
                self.built.model.nodes(),
                c.eta
            );
        }
        if let Some(e) = envelope {
            s.push_str("\n[envelope]\n");
            s.push_str(&e.summary());
        }
        s
    }

    fn certificate_json(verdict: &QuadVerdict<T>, constants: Option<&ProofConstants<T>>) -> Value {
        let mut v = match verdict {
            QuadVerdict::Pass { probes } => json!({ "verdict": "pass", "probes": probes }),
            QuadVerdict::Counterexample {
                index,
                t,
                u1,
                u2,
                lhs,
                rhs,
            } => {
                let vec = |u: &[T]| u.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
                json!({
                    "verdict": "counterexample",
                    "probes": index + 1,
                    "counterexample": {
                        "t": t.as_f64(),
                        "u1": vec(u1),
                        "u2": vec(u2),
                        "lhs": lhs.as_f64(),
                        "rhs": rhs.as_f64(),
                    },
                })
            }
        };
        if let Some(c) = constants {
            v["delta"] = num(c.delta);
            v["eta"] = num(c.eta);
            v["alpha"] = num(c.alpha);
            v["beta"] = num(c.beta);
            v["gamma"] = num(c.gamma);
            v["K"] = num(c.kernel_variation);
        }
        v
    }

    fn certificate_only(&mut self) -> Result<bool, RunError> {
        let Some((verdict, constants, cert)) = self.certify() else {
            self.summary
                .insert("certificate".into(), json!({ "verdict": "absent" }));
            return Ok(true);
        };
        let text = self.certificate_report(&verdict, constants.as_ref(), &cert, None);
        let json = Self::certificate_json(&verdict, constants.as_ref());
        self.write_artifact("certificate.txt", |w| w.write_all(text.as_bytes()))?;
        self.summary.insert("certificate".into(), json);
        Ok(verdict.passed())
    }

    fn run(&mut self) -> Result<u8, RunError> {
        let certified = self.certify();
        let stride = self.scenario.output.stride;
        let b = &self.built;
        let integration = match integrate(&b.model, b.initial.clone(), &b.config) {
            Ok(out) => out,
            Err(IntegrateError::BlowUp { time, partial }) => {
                self.write_artifact("trajectory.csv", |w| partial.write_csv(w, stride))?;
                self.summary.insert(
                    "integration".into(),
                    json!({ "blow_up_time": time, "last_good_time": partial.last_time().as_f64() }),
                );
                return Ok(EXIT_BLOW_UP);
            }
            Err(IntegrateError::Model {
                time,
                source,
                partial,
            }) => {
                self.write_artifact("trajectory.csv", |w| partial.write_csv(w, stride))?;
                self.summary.insert(
                    "integration".into(),
                    json!({ "failed_at": time, "error": source.to_string() }),
                );
                return Ok(EXIT_BLOW_UP);
            }
            Err(e) => {
                return Err(RunError::Build(BuildIssue {
                    pointer: "/integrator",
                    message: e.to_string(),
                }))
            }
        };
        let traj = integration.trajectory;
        self.summary.insert(
            "integration".into(),
            json!({
                "samples": traj.len(),
                "final_time": traj.last_time().as_f64(),
                "extrapolated_lookups": integration.extrapolated_lookups,
            }),
        );
        self.write_artifact("trajectory.csv", |w| traj.write_csv(w, stride))?;

        if let Some((verdict, constants, cert)) = certified {
            let envelope = match &constants {
                Some(c) => Some(
                    check_envelope(
                        &traj,
                        c.eta,
                        cert.p(),
                        T::lit(self.scenario.diagnostics.envelope.rel_tol),
                    )
                    .expect("inputs validated"),
                ),
                None => None,
            };
            let mut json = Self::certificate_json(&verdict, constants.as_ref());
            if !verdict.passed() || constants.is_none() {
                self.checks_failed = true;
            }
            if let Some(e) = &envelope {
                self.write_artifact("envelope.csv", |w| e.write_csv(w, stride))?;
                json["envelope"] = json!({
                    "eta": e.eta.as_f64(),
                    "M0": e.m0().as_f64(),
                    "max_violation": e.max_violation.as_f64(),
                    "verdict": if e.passed { "pass" } else { "fail" },
                    "ln_state_bound": e.ln_state_bound.as_f64(),
                    "max_state_norm": e.state_norm.iter().fold(0.0f64, |a, n| a.max(n.as_f64())),
                    "state_verdict": if e.state_bound_holds { "pass" } else { "fail" },
                });
                if !e.passed || !e.state_bound_holds {
                    self.checks_failed = true;
                }
            }
            let text =
                self.certificate_report(&verdict, constants.as_ref(), &cert, envelope.as_ref());
            self.write_artifact("certificate.txt", |w| w.write_all(text.as_bytes()))?;
            self.summary.insert("certificate".into(), json);
        }

        self.sync(&traj)?;
        Ok(if self.checks_failed {
            EXIT_CHECK_FAILED
        } else {
            EXIT_OK
        })
    }

    /// Sync report for every network with at least two nodes; the check only
    /// counts when the scenario states an expectation.
    fn sync(&mut self, traj: &Trajectory<T>) -> Result<(), RunError> {
        if traj.nodes() < 2 {
            return Ok(());
        }
        let horizon = traj.last_time();
        let spec = self.scenario.diagnostics.sync;
        let (threshold, window) = match spec {
            Some(s) => (T::lit(s.threshold), T::lit(s.window)),
            None => (T::lit(1e-3), horizon * T::lit(0.2)),
        };
        let report: SyncReport<T> =
            sync_report(traj, threshold, window).expect("sync settings validated");
        let stride = self.scenario.output.stride;
        self.write_artifact("sync.csv", |w| report.write_csv(w, stride))?;
        let expect = spec.and_then(|s| s.expect);
        let ok = match expect {
            Some(SyncExpectation::Synchronized) => report.synchronized,
            Some(SyncExpectation::NotSynchronized) => !report.synchronized,
            None => true,
        };
        if !ok {
            self.checks_failed = true;
        }
        self.summary.insert(
            "sync".into(),
            json!({
                "window": report.window.as_f64(),
                "window_mean": report.window_mean.as_f64(),
                "threshold": report.threshold.as_f64(),
                "synchronized": report.synchronized,
                "expect": expect.map(|e| match e {
                    SyncExpectation::Synchronized => "synchronized",
                    SyncExpectation::NotSynchronized => "not_synchronized",
                }),
                "verdict": if expect.is_none() { "unchecked" } else if ok { "pass" } else { "fail" },
            }),
        );
        Ok(())
    }

    fn write_artifact<F>(&mut self, name: &str, body: F) -> Result<(), RunError>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.dir.join(name);
        write_file(&path, body)?;
        self.artifacts.push(path);
        Ok(())
    }
}

fn write_file<F>(path: &Path, body: F) -> Result<(), RunError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}
