//! Walk and cone data model.
//!
//! A [`WalkModel`] bundles an exact lattice step distribution, a cone
//! (the orthant or an H-described polyhedral cone) and a start point.
//! Construction validates everything the downstream analyses rely on and
//! records soft failures (degenerate support, no interior witness) as
//! warnings instead of refusing the model.

mod enumerate;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry;
use crate::rational::{common_denominator, format_rational, parse_rational};

pub use enumerate::{
    brute_force_excursion, brute_force_survival, MAX_BRUTE_FORCE_HORIZON, MAX_BRUTE_FORCE_PATHS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed model: {0}")]
    MalformedFile(String),
    #[error("step weights sum to {total}, not 1 (pass --normalize to rescale)")]
    WeightsNotNormalized { total: String },
    #[error("step distribution is not truly {dimension}-dimensional (support rank {rank})")]
    DegenerateDistribution { dimension: usize, rank: usize },
    #[error("cone has empty interior")]
    EmptyConeInterior,
    #[error("start point {0:?} is outside the cone")]
    StartOutsideCone(Vec<i64>),
    #[error("point {0:?} is outside the cone")]
    PointOutsideCone(Vec<i64>),
    #[error("horizon {horizon} needs about {paths:.3e} paths; enumeration is capped at horizon {max_horizon} and {max_paths:.0e} paths")]
    HorizonTooLarge {
        horizon: usize,
        paths: f64,
        max_horizon: usize,
        max_paths: f64,
    },
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MalformedFile(_) => "MalformedFile",
            Self::WeightsNotNormalized { .. } => "WeightsNotNormalized",
            Self::DegenerateDistribution { .. } => "DegenerateDistribution",
            Self::EmptyConeInterior => "EmptyConeInterior",
            Self::StartOutsideCone(_) => "StartOutsideCone",
            Self::PointOutsideCone(_) => "PointOutsideCone",
            Self::HorizonTooLarge { .. } => "HorizonTooLarge",
        }
    }
}

fn malformed(msg: impl Into<String>) -> ModelError {
    ModelError::MalformedFile(msg.into())
}

/// One lattice increment with its exact probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub vector: Vec<i64>,
    pub weight: BigRational,
}

impl Step {
    pub fn new(vector: Vec<i64>, weight: BigRational) -> Self {
        Self { vector, weight }
    }
}

/// Finitely supported increment law on `Z^d` with exact rational weights.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDistribution {
    dimension: usize,
    steps: Vec<Step>,
}

impl StepDistribution {
    /// Builds a distribution whose weights must already sum to exactly one.
    pub fn new(dimension: usize, steps: Vec<Step>) -> Result<Self, ModelError> {
        let dist = Self::unchecked(dimension, steps)?;
        let total = dist.total_weight();
        if !total.is_one() {
            return Err(ModelError::WeightsNotNormalized {
                total: format_rational(&total),
            });
        }
        Ok(dist)
    }

    /// Builds a distribution after dividing every weight by their total.
    pub fn normalized(dimension: usize, steps: Vec<Step>) -> Result<Self, ModelError> {
        let mut dist = Self::unchecked(dimension, steps)?;
        let total = dist.total_weight();
        for step in &mut dist.steps {
            step.weight = &step.weight / &total;
        }
        Ok(dist)
    }

    /// Uniform law on the given (distinct) vectors.
    pub fn uniform(dimension: usize, vectors: &[Vec<i64>]) -> Result<Self, ModelError> {
        let w = BigRational::new(BigInt::one(), BigInt::from(vectors.len()));
        Self::new(
            dimension,
            vectors.iter().map(|v| Step::new(v.clone(), w.clone())).collect(),
        )
    }

    /// Convenience constructor from `(vector, "p/q")` pairs.
    pub fn from_table(dimension: usize, table: &[(&[i64], &str)]) -> Result<Self, ModelError> {
        let steps = table
            .iter()
            .map(|(v, w)| Ok(Step::new(v.to_vec(), parse_rational(w).map_err(malformed)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        Self::new(dimension, steps)
    }

    fn unchecked(dimension: usize, steps: Vec<Step>) -> Result<Self, ModelError> {
        if dimension == 0 {
            return Err(malformed("dimension must be positive"));
        }
        if steps.is_empty() {
            return Err(malformed("step list is empty"));
        }
        let mut seen = HashMap::new();
        for (i, step) in steps.iter().enumerate() {
            if step.vector.len() != dimension {
                return Err(malformed(format!(
                    "step {i} has length {} but dimension is {dimension}",
                    step.vector.len()
                )));
            }
            if !step.weight.is_positive() {
                return Err(malformed(format!("step {i} has non-positive weight")));
            }
            if let Some(prev) = seen.insert(step.vector.clone(), i) {
                return Err(malformed(format!(
                    "steps {prev} and {i} share the vector {:?}",
                    step.vector
                )));
            }
        }
        if steps.iter().all(|s| s.vector.iter().all(|&c| c == 0)) {
            return Err(malformed("every step vector is zero"));
        }
        Ok(Self { dimension, steps })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[i64]> {
        self.steps.iter().map(|s| s.vector.as_slice())
    }

    pub fn total_weight(&self) -> BigRational {
        self.steps
            .iter()
            .fold(BigRational::zero(), |acc, s| acc + &s.weight)
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| crate::rational::to_f64(&s.weight))
            .collect()
    }

    /// Exact mean increment.
    pub fn drift(&self) -> Vec<BigRational> {
        (0..self.dimension)
            .map(|i| {
                self.steps.iter().fold(BigRational::zero(), |acc, s| {
                    acc + &s.weight * BigInt::from(s.vector[i])
                })
            })
            .collect()
    }

    pub fn support_rank(&self) -> usize {
        let vectors: Vec<Vec<i64>> = self.vectors().map(<[i64]>::to_vec).collect();
        geometry::rank_exact(&vectors, self.dimension)
    }

    /// No nonzero `u` is orthogonal to the whole support.
    pub fn is_truly_d_dimensional(&self) -> bool {
        self.support_rank() == self.dimension
    }

    pub fn is_small_step(&self) -> bool {
        self.vectors().all(|v| v.iter().all(|c| (-1..=1).contains(c)))
    }

    /// Largest absolute step coordinate.
    pub fn max_jump(&self) -> i64 {
        self.vectors()
            .flat_map(|v| v.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// `P(X^{(i)} = value)`.
    pub fn coordinate_probability(&self, coordinate: usize, value: i64) -> BigRational {
        self.steps
            .iter()
            .filter(|s| s.vector[coordinate] == value)
            .fold(BigRational::zero(), |acc, s| acc + &s.weight)
    }

    /// Weights written over their least common denominator `D`:
    /// `w_v = c_v / D` with integer `c_v`.
    pub fn scaled_weights(&self) -> (BigInt, Vec<BigInt>) {
        let denominator = common_denominator(self.steps.iter().map(|s| &s.weight));
        let numerators = self
            .steps
            .iter()
            .map(|s| (&s.weight * BigRational::from_integer(denominator.clone())).to_integer())
            .collect();
        (denominator, numerators)
    }
}

/// How the cone is described.
#[derive(Clone, Debug, PartialEq)]
pub enum ConeKind {
    /// `[0, inf)^d`.
    Orthant,
    /// `{x : <a_j, x> >= 0 for all j}`.
    Polyhedral { normals: Vec<Vec<f64>> },
}

/// A closed convex cone with nonempty interior together with generators
/// of its dual cone.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSpec {
    dimension: usize,
    kind: ConeKind,
    dual_generators: Vec<Vec<f64>>,
    interior_point: Vec<f64>,
    integral_normals: Option<Vec<Vec<i64>>>,
}

impl ConeSpec {
    pub fn orthant(dimension: usize) -> Self {
        let basis: Vec<Vec<f64>> = (0..dimension)
            .map(|i| {
                let mut e = vec![0.0; dimension];
                e[i] = 1.0;
                e
            })
            .collect();
        let integral = basis
            .iter()
            .map(|e| e.iter().map(|&v| v as i64).collect())
            .collect();
        Self {
            dimension,
            kind: ConeKind::Orthant,
            dual_generators: basis,
            interior_point: vec![1.0; dimension],
            integral_normals: Some(integral),
        }
    }

    /// Validates the normals and finds an interior witness; the normals
    /// double as generators of the dual cone.
    pub fn polyhedral(dimension: usize, normals: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        if normals.is_empty() {
            return Err(malformed("halfspace cone needs at least one normal"));
        }
        for (j, a) in normals.iter().enumerate() {
            if a.len() != dimension {
                return Err(malformed(format!(
                    "normal {j} has length {} but dimension is {dimension}",
                    a.len()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(malformed(format!("normal {j} is not finite")));
            }
            if a.iter().all(|&v| v == 0.0) {
                return Err(malformed(format!("normal {j} is zero")));
            }
        }
        let interior_point = geometry::cone_interior_witness(&normals, dimension)
            .ok_or(ModelError::EmptyConeInterior)?;
        let integral_normals = normals
            .iter()
            .map(|a| {
                a.iter()
                    .map(|&v| (v.fract() == 0.0 && v.abs() < 1e15).then_some(v as i64))
                    .collect::<Option<Vec<i64>>>()
            })
            .collect::<Option<Vec<_>>>();
        let cone = Self {
            dimension,
            kind: ConeKind::Polyhedral {
                normals: normals.clone(),
            },
            dual_generators: normals,
            interior_point,
            integral_normals,
        };
        cone.check_dual_generators()?;
        Ok(cone)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> &ConeKind {
        &self.kind
    }

    pub fn is_orthant(&self) -> bool {
        matches!(self.kind, ConeKind::Orthant)
    }

    /// Inward normals `a_j` (the standard basis for the orthant).
    pub fn normals(&self) -> &[Vec<f64>] {
        &self.dual_generators
    }

    pub fn dual_generators(&self) -> &[Vec<f64>] {
        &self.dual_generators
    }

    pub fn interior_point(&self) -> &[f64] {
        &self.interior_point
    }

    fn pairing_slack<'a>(&'a self, y: &'a [i64]) -> impl Iterator<Item = Ordering3> + 'a {
        let y_norm = y.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
        let exact = self.integral_normals.as_ref();
        self.dual_generators.iter().enumerate().map(move |(j, a)| {
            if let Some(ints) = exact {
                let dot: i128 = ints[j]
                    .iter()
                    .zip(y)
                    .map(|(&p, &q)| p as i128 * q as i128)
                    .sum();
                Ordering3::from_sign(dot.signum() as i8)
            } else {
                let dot: f64 = a.iter().zip(y).map(|(p, &q)| p * q as f64).sum();
                let a_norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let tol = 1e-12 * a_norm * y_norm;
                if dot > tol {
                    Ordering3::Positive
                } else if dot < -tol {
                    Ordering3::Negative
                } else {
                    Ordering3::Zero
                }
            }
        })
    }

    /// Lattice-point membership (exact for integral normals).
    pub fn contains(&self, y: &[i64]) -> bool {
        match self.kind {
            ConeKind::Orthant => y.iter().all(|&c| c >= 0),
            ConeKind::Polyhedral { .. } => self.pairing_slack(y).all(|s| s != Ordering3::Negative),
        }
    }

    /// Lattice point strictly inside the cone.
    pub fn contains_interior(&self, y: &[i64]) -> bool {
        match self.kind {
            ConeKind::Orthant => y.iter().all(|&c| c > 0),
            ConeKind::Polyhedral { .. } => self.pairing_slack(y).all(|s| s == Ordering3::Positive),
        }
    }

    /// Real-point membership with relative tolerance.
    pub fn contains_real(&self, y: &[f64], tol: f64) -> bool {
        self.dual_generators.iter().all(|a| {
            let dot: f64 = a.iter().zip(y).map(|(p, q)| p * q).sum();
            dot >= -tol
        })
    }

    /// Spot-checks `<g, y> >= 0` for every dual generator `g` on sampled
    /// points `y` of the cone.
    fn check_dual_generators(&self) -> Result<(), ModelError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut checked = 0;
        for _ in 0..512 {
            let y: Vec<f64> = self
                .interior_point
                .iter()
                .map(|c| c + rng.random_range(-2.0..2.0))
                .collect();
            if !self.contains_real(&y, 0.0) {
                continue;
            }
            checked += 1;
            let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for g in &self.dual_generators {
                let dot: f64 = g.iter().zip(&y).map(|(p, q)| p * q).sum();
                if dot < -1e-12 * scale {
                    return Err(malformed("dual generator is not in the dual cone"));
                }
            }
        }
        debug_assert!(checked > 0 || self.dimension == 0);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ordering3 {
    Negative,
    Zero,
    Positive,
}

impl Ordering3 {
    fn from_sign(s: i8) -> Self {
        match s {
            -1 => Self::Negative,
            0 => Self::Zero,
            _ => Self::Positive,
        }
    }
}

/// Path from the origin to an interior lattice point that stays in the cone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReachWitness {
    pub steps: usize,
    pub path: Vec<Vec<i64>>,
    pub endpoint: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelFlags {
    pub small_step: bool,
    pub trapped: bool,
    pub truly_d_dimensional: bool,
    pub reach_witness: Option<ReachWitness>,
}

/// Validated walk: increments, cone, start point and derived flags.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkModel {
    dist: StepDistribution,
    cone: ConeSpec,
    start: Vec<i64>,
    flags: ModelFlags,
    warnings: Vec<String>,
}

impl WalkModel {
    pub fn new(dist: StepDistribution, cone: ConeSpec, start: Vec<i64>) -> Result<Self, ModelError> {
        let d = dist.dimension();
        if cone.dimension() != d {
            return Err(malformed(format!(
                "cone dimension {} differs from step dimension {d}",
                cone.dimension()
            )));
        }
        if start.len() != d {
            return Err(malformed(format!(
                "start has length {} but dimension is {d}",
                start.len()
            )));
        }
        if !cone.contains(&start) {
            return Err(ModelError::StartOutsideCone(start));
        }
        let mut warnings = Vec::new();
        let rank = dist.support_rank();
        let truly_d_dimensional = rank == d;
        if !truly_d_dimensional {
            warnings.push(ModelError::DegenerateDistribution { dimension: d, rank }.to_string());
        }
        let reach_witness = find_reach_witness(&dist, &cone, 2 * d + 2);
        if reach_witness.is_none() {
            warnings.push(format!(
                "no confined path from the origin reaches the cone interior within {} steps",
                2 * d + 2
            ));
        }
        let flags = ModelFlags {
            small_step: dist.is_small_step(),
            trapped: dist.vectors().all(|v| cone.contains(v)),
            truly_d_dimensional,
            reach_witness,
        };
        Ok(Self {
            dist,
            cone,
            start,
            flags,
            warnings,
        })
    }

    /// Same walk from another start point.
    pub fn with_start(&self, start: Vec<i64>) -> Result<Self, ModelError> {
        Self::new(self.dist.clone(), self.cone.clone(), start)
    }

    pub fn dimension(&self) -> usize {
        self.dist.dimension()
    }

    pub fn dist(&self) -> &StepDistribution {
        &self.dist
    }

    pub fn cone(&self) -> &ConeSpec {
        &self.cone
    }

    pub fn start(&self) -> &[i64] {
        &self.start
    }

    pub fn flags(&self) -> &ModelFlags {
        &self.flags
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Parity period of the walk: 2 when every step has an odd coordinate
    /// sum (positions alternate between the two parity classes), else 1.
    pub fn parity_period(&self) -> usize {
        if self
            .dist
            .vectors()
            .all(|v| v.iter().sum::<i64>().rem_euclid(2) == 1)
        {
            2
        } else {
            1
        }
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            dimension: self.dimension(),
            steps: self
                .dist
                .steps()
                .iter()
                .map(|s| StepEntry {
                    v: s.vector.clone(),
                    w: format_rational(&s.weight),
                })
                .collect(),
            cone: match self.cone.kind() {
                ConeKind::Orthant => ConeEntry::Orthant,
                ConeKind::Polyhedral { normals } => ConeEntry::Halfspaces {
                    normals: normals.clone(),
                },
            },
            start: self.start.clone(),
        }
    }

    /// SHA-256 of the canonical JSON rendering of the model.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_file()).expect("model serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

impl fmt::Display for WalkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-dimensional walk with {} steps", self.dimension(), self.dist.len())
    }
}

fn find_reach_witness(dist: &StepDistribution, cone: &ConeSpec, depth: usize) -> Option<ReachWitness> {
    let origin = vec![0i64; dist.dimension()];
    let mut parent: HashMap<Vec<i64>, (Vec<i64>, usize)> = HashMap::new();
    let mut queue = VecDeque::from([(origin.clone(), 0usize)]);
    let mut seen = std::collections::HashSet::from([origin.clone()]);
    while let Some((point, level)) = queue.pop_front() {
        if level > 0 && cone.contains_interior(&point) {
            let mut path = Vec::new();
            let mut cur = point.clone();
            while let Some((prev, step)) = parent.get(&cur) {
                path.push(dist.steps()[*step].vector.clone());
                cur = prev.clone();
            }
            path.reverse();
            return Some(ReachWitness {
                steps: level,
                path,
                endpoint: point,
            });
        }
        if level == depth {
            continue;
        }
        for (k, v) in dist.vectors().enumerate() {
            let next: Vec<i64> = point.iter().zip(v).map(|(a, b)| a + b).collect();
            if cone.contains(&next) && seen.insert(next.clone()) {
                parent.insert(next.clone(), (point.clone(), k));
                queue.push_back((next, level + 1));
            }
        }
    }
    None
}

/// On-disk model document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub dimension: usize,
    pub steps: Vec<StepEntry>,
    pub cone: ConeEntry,
    pub start: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub v: Vec<i64>,
    pub w: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ConeEntry {
    Orthant,
    Halfspaces { normals: Vec<Vec<f64>> },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Divide weights by their total instead of rejecting unnormalized input.
    pub normalize: bool,
    /// Reject distributions that are not truly d-dimensional.
    pub strict: bool,
}

/// Parses and validates a JSON model document.
pub fn parse_model(text: &str, options: ParseOptions) -> Result<WalkModel, ModelError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| malformed(format!("invalid model document: {e}")))?;
    model_from_file(file, options)
}

pub fn model_from_file(file: ModelFile, options: ParseOptions) -> Result<WalkModel, ModelError> {
    let d = file.dimension;
    let steps = file
        .steps
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            parse_rational(&e.w)
                .map(|w| Step::new(e.v, w))
                .map_err(|m| malformed(format!("step {i}: {m}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dist = if options.normalize {
        StepDistribution::normalized(d, steps)?
    } else {
        StepDistribution::new(d, steps)?
    };
    if options.strict && !dist.is_truly_d_dimensional() {
        return Err(ModelError::DegenerateDistribution {
            dimension: d,
            rank: dist.support_rank(),
        });
    }
    let cone = match file.cone {
        ConeEntry::Orthant => ConeSpec::orthant(d),
        ConeEntry::Halfspaces { normals } => ConeSpec::polyhedral(d, normals)?,
    };
    WalkModel::new(dist, cone, file.start)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    const FIVE_STEP: &str = r#"{
        "dimension": 2,
        "steps": [
            {"v": [1, 0], "w": "1/5"}, {"v": [0, -1], "w": "1/5"},
            {"v": [-1, 0], "w": "1/5"}, {"v": [0, 1], "w": "1/5"},
            {"v": [1, 1], "w": "1/5"}
        ],
        "cone": {"type": "orthant"},
        "start": [0, 0]
    }"#;

    #[test]
    fn symmetric_line_walk() {
        let text = r#"{"dimension":1,"steps":[{"v":[1],"w":"1/2"},{"v":[-1],"w":"1/2"}],
                       "cone":{"type":"orthant"},"start":[0]}"#;
        let m = parse_model(text, ParseOptions::default()).unwrap();
        assert!(m.flags().small_step);
        assert!(!m.flags().trapped);
        assert_eq!(m.dist().drift(), vec![q(0, 1)]);
        assert_eq!(m.parity_period(), 2);
    }

    #[test]
    fn five_step_quadrant_walk() {
        let m = parse_model(FIVE_STEP, ParseOptions::default()).unwrap();
        assert!(m.flags().small_step);
        assert!(!m.flags().trapped);
        assert!(m.flags().truly_d_dimensional);
        let w = m.flags().reach_witness.as_ref().unwrap();
        assert_eq!(w.endpoint, vec![1, 1]);
        assert_eq!(w.steps, 1);
        assert_eq!(m.dist().drift(), vec![q(1, 5), q(1, 5)]);
        assert!(m.warnings().is_empty());
    }

    #[test]
    fn trapped_walk() {
        let dist = StepDistribution::uniform(2, &[vec![1, 0], vec![0, 1]]).unwrap();
        let m = WalkModel::new(dist, ConeSpec::orthant(2), vec![0, 0]).unwrap();
        assert!(m.flags().trapped);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let text = r#"{"dimension":1,"steps":[{"v":[1],"w":"1"},{"v":[-1],"w":"1"}],
                       "cone":{"type":"orthant"},"start":[0]}"#;
        let err = parse_model(text, ParseOptions::default()).unwrap_err();
        assert_eq!(err, ModelError::WeightsNotNormalized { total: "2".into() });
        let m = parse_model(
            text,
            ParseOptions {
                normalize: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.dist().steps()[0].weight, q(1, 2));
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(
            parse_model("{", ParseOptions::default()),
            Err(ModelError::MalformedFile(_))
        ));
        let dup = r#"{"dimension":1,"steps":[{"v":[1],"w":"1/2"},{"v":[1],"w":"1/2"}],
                      "cone":{"type":"orthant"},"start":[0]}"#;
        assert!(matches!(
            parse_model(dup, ParseOptions::default()),
            Err(ModelError::MalformedFile(_))
        ));
        let bad_len = r#"{"dimension":2,"steps":[{"v":[1],"w":"1"}],
                          "cone":{"type":"orthant"},"start":[0,0]}"#;
        assert!(matches!(
            parse_model(bad_len, ParseOptions::default()),
            Err(ModelError::MalformedFile(_))
        ));
        let zero = r#"{"dimension":1,"steps":[{"v":[0],"w":"1"}],
                       "cone":{"type":"orthant"},"start":[0]}"#;
        assert!(matches!(
            parse_model(zero, ParseOptions::default()),
            Err(ModelError::MalformedFile(_))
        ));
    }

    #[test]
    fn empty_cone_interior_rejected() {
        let text = r#"{"dimension":2,"steps":[{"v":[1,0],"w":"1/2"},{"v":[0,1],"w":"1/2"}],
                       "cone":{"type":"halfspaces","normals":[[1,0],[-1,0]]},"start":[0,0]}"#;
        assert_eq!(
            parse_model(text, ParseOptions::default()).unwrap_err(),
            ModelError::EmptyConeInterior
        );
    }

    #[test]
    fn start_outside_cone_rejected() {
        let text = r#"{"dimension":1,"steps":[{"v":[1],"w":"1/2"},{"v":[-1],"w":"1/2"}],
                       "cone":{"type":"orthant"},"start":[-1]}"#;
        assert!(matches!(
            parse_model(text, ParseOptions::default()),
            Err(ModelError::StartOutsideCone(_))
        ));
    }

    #[test]
    fn degenerate_support_is_a_warning_unless_strict() {
        let text = r#"{"dimension":2,"steps":[{"v":[1,0],"w":"1/2"},{"v":[-1,0],"w":"1/2"}],
                       "cone":{"type":"orthant"},"start":[0,0]}"#;
        let m = parse_model(text, ParseOptions::default()).unwrap();
        assert!(!m.flags().truly_d_dimensional);
        assert!(!m.warnings().is_empty());
        let strict = ParseOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            parse_model(text, strict),
            Err(ModelError::DegenerateDistribution { dimension: 2, rank: 1 })
        ));
    }

    #[test]
    fn polyhedral_membership() {
        // Wedge between the positive x-axis and the diagonal.
        let cone = ConeSpec::polyhedral(2, vec![vec![0.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert!(cone.contains(&[3, 1]));
        assert!(cone.contains(&[2, 2]));
        assert!(!cone.contains(&[1, 2]));
        assert!(cone.contains_interior(&[3, 1]));
        assert!(!cone.contains_interior(&[2, 2]));
        let irrational = ConeSpec::polyhedral(2, vec![vec![0.0, 1.0], vec![1.0, -0.5f64.sqrt()]]).unwrap();
        assert!(irrational.contains(&[1, 1]));
        assert!(!irrational.contains(&[1, 2]));
    }

    #[test]
    fn hash_is_stable() {
        let a = parse_model(FIVE_STEP, ParseOptions::default()).unwrap();
        let b = parse_model(FIVE_STEP, ParseOptions::default()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let moved = a.with_start(vec![1, 0]).unwrap();
        assert_ne!(a.hash(), moved.hash());
    }

    #[test]
    fn scaled_weights_share_denominator() {
        let dist = StepDistribution::from_table(
            2,
            &[(&[1, 0], "1/6"), (&[0, 1], "1/6"), (&[-1, 0], "1/3"), (&[0, -1], "1/3")],
        )
        .unwrap();
        let (den, nums) = dist.scaled_weights();
        assert_eq!(den, BigInt::from(6));
        assert_eq!(nums, vec![1.into(), 1.into(), 2.into(), 2.into()]);
    }
}
