//! Pipeline orchestration and the structured report.
//!
//! Every numeric section carries a `provenance` of `exact` (rational
//! arithmetic), `float` (floating point) or `mc` (sampled, with standard
//! errors). Optional stages that do not apply to a model are listed under
//! `skipped` with their module-qualified error code instead of failing the
//! run. Resource errors, and errors in the stage a subcommand exists for,
//! always fail it.

use serde::Serialize;

use crate::dp::{
    escape_probability_bounds, excursion_sequence, g_functional, survival_sequence, tilted_survival_functional,
    DpConfig, DpError, EscapeBoundsSummary, ExactSequence, SequenceKind,
};
use crate::error::Error;
use crate::laplace::{analyze, laplace_eval, DriftClass, LaplaceAnalysis, MinimizeOptions};
use crate::mc::{estimate_escape, simulate_survival, simulate_tilted_with, McConfig, McEstimate};
use crate::model::{ModelFile, ModelFlags, WalkModel};
use crate::oned::{asymptotic_reference, closed_form_coefficients, escape_prob_1d, AsymptoticReference, OneDimModel};
use crate::rational::format_rational;
use crate::seqlab::{excursion_exponent_fit, sequence_verdict, ExponentFit, SequenceVerdict};

pub const REPORT_VERSION: u32 = 1;

/// Samples used by `simulate` when none are requested.
pub const DEFAULT_SIMULATE_SAMPLES: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analyze,
    Enumerate,
    Excursion,
    Rho,
    Bounds,
    Guess,
    Simulate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub command: Command,
    pub horizon: usize,
    pub k_max: usize,
    /// Excursion target; the start point when absent.
    pub target: Option<Vec<i64>>,
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    /// Tilt overriding `t0` in the importance sampler.
    pub tilt: Option<Vec<f64>>,
    pub dp: DpConfig,
}

impl RunOptions {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            horizon: 120,
            k_max: 30,
            target: None,
            samples: 0,
            seed: 1,
            workers: 0,
            tilt: None,
            dp: DpConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelSection {
    pub echo: ModelFile,
    pub hash: String,
    pub provenance: &'static str,
    pub drift: Vec<String>,
    pub flags: ModelFlags,
    pub parity_period: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Parameters {
    pub horizon: usize,
    pub k_max: usize,
    pub target: Vec<i64>,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LaplaceSection {
    pub provenance: &'static str,
    pub classification: DriftClass,
    pub t0: Vec<f64>,
    pub rho: f64,
    pub gradient_at_t0: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub tilted_drift: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilde_t0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilde_rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_minimum_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SequenceSection {
    pub name: &'static str,
    pub kind: SequenceKind,
    pub provenance: &'static str,
    pub horizon: usize,
    pub csv_file: String,
    pub terms: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictSection {
    pub sequence: &'static str,
    pub provenance: &'static str,
    /// Order cap actually used, after clamping to the available terms.
    pub k_max: usize,
    pub verdict: SequenceVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExponentSection {
    pub provenance: &'static str,
    pub tilde_rho: f64,
    pub window: [usize; 2],
    pub fit: ExponentFit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundsSection {
    pub provenance: &'static str,
    pub pairwise_intersect: bool,
    pub best: EscapeBoundsSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OneDimSection {
    pub provenance: &'static str,
    pub closed_form_matches_dp: Option<bool>,
    pub escape_probability: Option<String>,
    pub asymptotic: Option<AsymptoticReference>,
}

/// `rho^n exp(<t0, x>) E*(...)` against the exact `a_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TiltCheckSection {
    pub provenance: &'static str,
    pub horizon: usize,
    pub max_relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct McSection {
    pub provenance: &'static str,
    pub estimates: Vec<McEstimate>,
}

/// Which known statement governs the model, and whether its hypotheses
/// were verified.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TheoremTag {
    pub tag: &'static str,
    pub statement: &'static str,
    pub hypotheses_hold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Hypotheses {
    pub cone_convex_closed_with_interior: bool,
    pub truly_d_dimensional: bool,
    pub reaches_interior_from_origin: bool,
    pub integrable_increments: bool,
    pub dual_minimum_attained: Option<bool>,
    pub lattice_interior_point_reached: bool,
    pub global_minimum_attained: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Skipped {
    pub stage: &'static str,
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub report_version: u32,
    pub tool: ToolInfo,
    pub command: Command,
    pub model: ModelSection,
    pub parameters: Parameters,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub laplace: Option<LaplaceSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<SequenceSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<VerdictSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excursion_exponent: Option<ExponentSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt_check: Option<TiltCheckSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub one_dimensional: Option<OneDimSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
    pub theorem_tags: Vec<TheoremTag>,
    pub hypotheses: Hypotheses,
    pub skipped: Vec<Skipped>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Report plus CSV files keyed by file name.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub report: Report,
    pub csv: Vec<(String, String)>,
}

impl RunOutput {
    /// CSV of the first sequence the command produced.
    pub fn primary_csv(&self) -> Option<&str> {
        self.csv.first().map(|(_, body)| body.as_str())
    }
}

struct Pipeline<'a> {
    model: &'a WalkModel,
    options: &'a RunOptions,
    target: Vec<i64>,
    /// Stages whose failure fails the whole command.
    required: &'static [&'static str],
    skipped: Vec<Skipped>,
    analysis: Option<LaplaceAnalysis>,
    sequences: Vec<SequenceSection>,
    csv: Vec<(String, String)>,
}

/// Resource errors abort; anything else marks the stage as skipped.
fn is_fatal(error: &Error) -> bool {
    error.exit_code() == crate::error::EXIT_RESOURCE
}

impl<'a> Pipeline<'a> {
    fn attempt<T>(&mut self, stage: &'static str, result: Result<T, Error>) -> Result<Option<T>, Error> {
        match result {
            Ok(v) => Ok(Some(v)),
            Err(e) if is_fatal(&e) || self.required.contains(&stage) => Err(e),
            Err(e) => {
                self.skipped.push(Skipped {
                    stage,
                    code: e.code(),
                    message: e.to_string(),
                });
                Ok(None)
            }
        }
    }

    fn laplace(&mut self) -> Result<(), Error> {
        let result = analyze(self.model.dist(), self.model.cone(), MinimizeOptions::default()).map_err(Error::from);
        self.analysis = self.attempt("laplace", result)?;
        Ok(())
    }

    fn laplace_section(&self) -> Option<LaplaceSection> {
        let a = self.analysis.as_ref()?;
        let gradient = laplace_eval(self.model.dist(), &a.t0).map(|e| e.gradient).unwrap_or_default();
        Some(LaplaceSection {
            provenance: "float",
            classification: a.classification,
            t0: a.t0.clone(),
            rho: a.rho,
            gradient_at_t0: gradient,
            kkt_residual: a.kkt_residual,
            iterations: a.iterations,
            tilted_drift: a.tilted.drift.clone(),
            tilde_t0: a.global.as_ref().map(|g| g.t.clone()),
            tilde_rho: a.tilde_rho(),
            global_minimum_error: a.global_error.as_ref().map(|e| e.to_string()),
        })
    }

    fn record(&mut self, name: &'static str, sequence: &ExactSequence) {
        let csv_file = format!("{name}.csv");
        self.csv.push((csv_file.clone(), sequence.to_csv()));
        self.sequences.push(SequenceSection {
            name,
            kind: sequence.kind.clone(),
            provenance: "exact",
            horizon: sequence.horizon,
            csv_file,
            terms: sequence.term_strings(),
        });
    }

    fn survival(&mut self) -> Result<Option<ExactSequence>, Error> {
        let result = survival_sequence(self.model, self.options.horizon, &self.options.dp).map_err(Error::from);
        let seq = self.attempt("survival", result)?;
        if let Some(s) = &seq {
            self.record("survival", s);
        }
        Ok(seq)
    }

    fn excursion(&mut self) -> Result<Option<ExactSequence>, Error> {
        let result =
            excursion_sequence(self.model, &self.target, self.options.horizon, &self.options.dp).map_err(Error::from);
        let seq = self.attempt("excursion", result)?;
        if let Some(s) = &seq {
            self.record("excursion", s);
        }
        Ok(seq)
    }

    fn verdict(&mut self, name: &'static str, sequence: &ExactSequence, rho: Option<f64>) -> Result<Option<VerdictSection>, Error> {
        // guess_recurrence needs 2 k_max + 8 terms.
        let k_max = self.options.k_max.min(sequence.terms.len().saturating_sub(8) / 2);
        let period = self.model.parity_period();
        let stage = if name == "survival" { "survivalVerdict" } else { "excursionVerdict" };
        let result = sequence_verdict(&sequence.terms, k_max, rho, None, period).map_err(Error::from);
        Ok(self.attempt(stage, result)?.map(|verdict| VerdictSection {
            sequence: name,
            provenance: "exact",
            k_max,
            verdict,
        }))
    }

    fn exponent(&mut self, sequence: &ExactSequence) -> Result<Option<ExponentSection>, Error> {
        let Some(tilde_rho) = self.analysis.as_ref().and_then(LaplaceAnalysis::tilde_rho) else {
            return Ok(None);
        };
        let window = [(self.options.horizon / 2).max(1), self.options.horizon];
        let result = excursion_exponent_fit(&sequence.terms, tilde_rho, window[0]..=window[1]).map_err(Error::from);
        Ok(self.attempt("excursionExponent", result)?.map(|fit| ExponentSection {
            provenance: "float",
            tilde_rho,
            window,
            fit,
        }))
    }

    fn tilt_check(&mut self, survival: &ExactSequence) -> Result<Option<TiltCheckSection>, Error> {
        let Some(t0) = self.analysis.as_ref().map(|a| a.t0.clone()) else {
            return Ok(None);
        };
        let result = tilted_survival_functional(self.model, &t0, self.options.horizon, &self.options.dp).map_err(Error::from);
        Ok(self.attempt("tiltCheck", result)?.map(|functional| {
            let exact = survival.floats();
            let max_relative_error = functional
                .reconstructed()
                .iter()
                .zip(&exact)
                .filter(|(_, &a)| a > 0.0)
                .map(|(r, a)| ((r - a) / a).abs())
                .fold(0.0, f64::max);
            TiltCheckSection {
                provenance: "float",
                horizon: self.options.horizon,
                max_relative_error,
            }
        }))
    }

    fn bounds(&mut self) -> Result<Option<BoundsSection>, Error> {
        let result = escape_probability_bounds(self.model, self.options.horizon, &self.options.dp).map_err(Error::from);
        let Some(bounds) = self.attempt("bounds", result)? else {
            return Ok(None);
        };
        if let Ok(g) = g_functional(self.model, self.options.horizon, &self.options.dp) {
            self.record("g", &g);
        }
        Ok(Some(BoundsSection {
            provenance: "exact",
            pairwise_intersect: bounds.pairwise_intersect(),
            best: bounds.summary(),
        }))
    }

    fn one_dimensional(&mut self, survival: Option<&ExactSequence>) -> Option<OneDimSection> {
        let line = OneDimModel::from_walk_model(self.model)?;
        let closed = survival.and_then(|s| {
            closed_form_coefficients(&line, self.options.horizon)
                .ok()
                .map(|c| c == s.terms)
        });
        let escape = match escape_prob_1d(&line) {
            Ok(h) => Some(format_rational(&h)),
            Err(e) => {
                self.skipped.push(Skipped {
                    stage: "oneDimensionalEscape",
                    code: Error::from(e.clone()).code(),
                    message: e.to_string(),
                });
                None
            }
        };
        Some(OneDimSection {
            provenance: "exact",
            closed_form_matches_dp: closed,
            escape_probability: escape,
            asymptotic: asymptotic_reference(&line, self.options.horizon.max(1)).ok(),
        })
    }

    fn monte_carlo(&mut self, samples: u64) -> Result<Option<McSection>, Error> {
        let config = McConfig {
            samples,
            seed: self.options.seed,
            workers: self.options.workers,
        };
        let n = self.options.horizon;
        let mut estimates = Vec::new();
        let plain = simulate_survival(self.model, n, &config).map_err(Error::from);
        estimates.extend(self.attempt("mcPlain", plain)?);
        let tilt = self
            .options
            .tilt
            .clone()
            .or_else(|| self.analysis.as_ref().map(|a| a.t0.clone()));
        if let Some(t) = tilt {
            let tilted = simulate_tilted_with(self.model, &t, n, &config).map_err(Error::from);
            estimates.extend(self.attempt("mcTilted", tilted)?);
        }
        if self.analysis.as_ref().is_some_and(|a| a.classification == DriftClass::InteriorDrift) {
            let escape = estimate_escape(self.model, n, &config).map_err(Error::from);
            estimates.extend(self.attempt("mcEscape", escape)?);
        }
        Ok(Some(McSection {
            provenance: "mc",
            estimates,
        }))
    }

    fn hypotheses(&self) -> Hypotheses {
        let flags = self.model.flags();
        Hypotheses {
            cone_convex_closed_with_interior: true,
            truly_d_dimensional: flags.truly_d_dimensional,
            reaches_interior_from_origin: flags.reach_witness.is_some(),
            integrable_increments: true,
            dual_minimum_attained: self.analysis.as_ref().map(|_| true),
            lattice_interior_point_reached: flags.reach_witness.is_some(),
            global_minimum_attained: self.analysis.as_ref().map(|a| a.global.is_some()),
        }
    }
}

/// Statements selected by the drift position and the model flags.
pub fn theorem_tags(model: &WalkModel, analysis: Option<&LaplaceAnalysis>, hypotheses: &Hypotheses) -> Vec<TheoremTag> {
    let mut tags = Vec::new();
    let Some(a) = analysis else {
        return tags;
    };
    let flags = model.flags();
    let base = hypotheses.cone_convex_closed_with_interior
        && hypotheses.truly_d_dimensional
        && hypotheses.reaches_interior_from_origin
        && hypotheses.integrable_increments
        && hypotheses.dual_minimum_attained == Some(true);
    if a.classification == DriftClass::InteriorDrift {
        if flags.small_step && !flags.trapped && model.cone().is_orthant() {
            tags.push(TheoremTag {
                tag: "nonRationalInteriorDrift",
                statement: "small-step orthant walk with interior drift, not trapped: the survival generating function is not rational",
                hypotheses_hold: flags.truly_d_dimensional && flags.reach_witness.is_some(),
            });
            tags.push(TheoremTag {
                tag: "escapeTwoTermEstimate",
                statement: "a_n converges to the escape probability with an error of order rho^n B_n",
                hypotheses_hold: flags.truly_d_dimensional && flags.reach_witness.is_some(),
            });
        }
    } else {
        tags.push(TheoremTag {
            tag: "nonRationalNonInteriorDrift",
            statement: "drift not interior to the cone: the survival generating function is not rational",
            hypotheses_hold: base,
        });
        tags.push(TheoremTag {
            tag: "exponentialRateLaplaceMinimum",
            statement: "a_n = rho^n B_n with rho the minimum of the Laplace transform on the dual cone, B_n^(1/n) -> 1 and B_n -> 0",
            hypotheses_hold: base,
        });
    }
    if hypotheses.global_minimum_attained == Some(true) {
        tags.push(TheoremTag {
            tag: "excursionLocalRate",
            statement: "lattice walk whose Laplace transform has a global minimum: excursion probabilities decay like tilde_rho^n times a polynomial",
            hypotheses_hold: hypotheses.lattice_interior_point_reached,
        });
    }
    tags
}

/// Runs the stages of `options.command` on `model`.
pub fn run(model: &WalkModel, options: &RunOptions) -> Result<RunOutput, Error> {
    let target = options.target.clone().unwrap_or_else(|| model.start().to_vec());
    if target.len() != model.dimension() {
        return Err(Error::Usage(format!(
            "target has {} coordinates but the model is {}-dimensional",
            target.len(),
            model.dimension()
        )));
    }
    if !model.cone().contains(&target) {
        return Err(DpError::PointOutsideCone(target).into());
    }
    let mut p = Pipeline {
        model,
        options,
        target,
        required: match options.command {
            Command::Analyze => &[],
            Command::Enumerate => &["survival"],
            Command::Guess => &["survival", "survivalVerdict"],
            Command::Excursion => &["excursion"],
            Command::Rho => &["laplace"],
            Command::Bounds => &["bounds"],
            Command::Simulate => &["mcPlain"],
        },
        skipped: Vec::new(),
        analysis: None,
        sequences: Vec::new(),
        csv: Vec::new(),
    };
    let mut verdicts = Vec::new();
    let (mut excursion_exponent, mut tilt_check, mut bounds, mut one_dimensional, mut mc) = (None, None, None, None, None);
    let samples = match (options.command, options.samples) {
        (Command::Simulate, 0) => DEFAULT_SIMULATE_SAMPLES,
        (_, s) => s,
    };

    match options.command {
        Command::Analyze => {
            p.laplace()?;
            let rho = p.analysis.as_ref().map(|a| a.rho);
            let survival = p.survival()?;
            if let Some(s) = &survival {
                verdicts.extend(p.verdict("survival", s, rho)?);
                tilt_check = p.tilt_check(s)?;
            }
            if let Some(e) = p.excursion()? {
                let tilde = p.analysis.as_ref().and_then(LaplaceAnalysis::tilde_rho);
                verdicts.extend(p.verdict("excursion", &e, tilde)?);
                excursion_exponent = p.exponent(&e)?;
            }
            bounds = p.bounds()?;
            one_dimensional = p.one_dimensional(survival.as_ref());
            if samples > 0 {
                mc = p.monte_carlo(samples)?;
            }
        }
        Command::Enumerate | Command::Guess => {
            p.laplace()?;
            let rho = p.analysis.as_ref().map(|a| a.rho);
            if let Some(s) = p.survival()? {
                verdicts.extend(p.verdict("survival", &s, rho)?);
            }
        }
        Command::Excursion => {
            p.laplace()?;
            if let Some(e) = p.excursion()? {
                let tilde = p.analysis.as_ref().and_then(LaplaceAnalysis::tilde_rho);
                verdicts.extend(p.verdict("excursion", &e, tilde)?);
                excursion_exponent = p.exponent(&e)?;
            }
        }
        Command::Rho => p.laplace()?,
        Command::Bounds => {
            bounds = p.bounds()?;
            one_dimensional = p.one_dimensional(None);
        }
        Command::Simulate => {
            p.laplace()?;
            mc = p.monte_carlo(samples)?;
        }
    }

    let hypotheses = p.hypotheses();
    let report = Report {
        report_version: REPORT_VERSION,
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        command: options.command,
        model: ModelSection {
            echo: model.to_file(),
            hash: model.hash(),
            provenance: "exact",
            drift: model.dist().drift().iter().map(format_rational).collect(),
            flags: model.flags().clone(),
            parity_period: model.parity_period(),
            warnings: model.warnings().to_vec(),
        },
        parameters: Parameters {
            horizon: options.horizon,
            k_max: options.k_max,
            target: p.target.clone(),
            samples,
            seed: options.seed,
        },
        laplace: p.laplace_section(),
        theorem_tags: theorem_tags(model, p.analysis.as_ref(), &hypotheses),
        hypotheses,
        sequences: p.sequences,
        verdicts,
        excursion_exponent,
        tilt_check,
        bounds,
        one_dimensional,
        mc,
        skipped: p.skipped,
    };
    Ok(RunOutput { report, csv: p.csv })
}
