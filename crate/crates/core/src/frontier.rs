//! Upper convex hulls of (upstream, downstream) accuracy clouds and the
//! randomized-classifier mixtures that realize every point on them.
//!
//! Given classifiers with accuracy pairs `a_j = (us_j, ds_j)`, a randomized
//! classifier that picks classifier `j` with probability `p_j` independently
//! per input attains exactly the convex combination `sum p_j * a_j`. The
//! upper chain of the convex hull is therefore the set of best achievable
//! trade-offs; [`upper_hull`] extracts it and [`mixture_for_target_us`]
//! produces the realizing mixture for any upstream accuracy on it.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrontierError {
    #[error("cannot build a frontier from an empty point set")]
    EmptyInput,
    #[error("accuracy point ({us}, {ds}) is outside the unit square")]
    PointOutOfRange { us: f64, ds: f64 },
    #[error("mixture weight {weight} for `{id}` is negative")]
    NegativeWeight { id: String, weight: f64 },
    #[error("mixture weights sum to {sum}, not 1")]
    WeightSum { sum: f64 },
    #[error("mixture references unknown id `{0}`")]
    UnknownId(String),
    #[error("target upstream accuracy {target} outside frontier range [{lo}, {hi}]")]
    TargetOutOfRange { target: f64, lo: f64, hi: f64 },
    #[error("outcome table has no examples")]
    EmptyTable,
    #[error("outcome table is malformed: {0}")]
    MalformedTable(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One classifier's (upstream, downstream) accuracy pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub us: f64,
    pub ds: f64,
    pub source_id: String,
}

impl AccuracyPoint {
    pub fn new(us: f64, ds: f64, source_id: impl Into<String>) -> Self {
        Self { us, ds, source_id: source_id.into() }
    }

    fn check_range(&self) -> Result<(), FrontierError> {
        let ok = (0.0..=1.0).contains(&self.us) && (0.0..=1.0).contains(&self.ds);
        if ok {
            Ok(())
        } else {
            Err(FrontierError::PointOutOfRange { us: self.us, ds: self.ds })
        }
    }
}

/// Ordered vertices of the upper convex hull, strictly increasing in `us`.
///
/// Every input point lies on or below the piecewise-linear interpolation of
/// the vertices, every vertex is an input point, and the vertex sequence is
/// concave with no interior collinear points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    vertices: Vec<AccuracyPoint>,
}

impl Frontier {
    pub fn vertices(&self) -> &[AccuracyPoint] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<AccuracyPoint> {
        self.vertices
    }

    /// Inclusive `us` range spanned by the vertices.
    pub fn us_range(&self) -> (f64, f64) {
        (self.vertices[0].us, self.vertices[self.vertices.len() - 1].us)
    }

    /// Piecewise-linear interpolation of downstream accuracy at `us`.
    pub fn interpolate(&self, us: f64) -> Result<f64, FrontierError> {
        let (lo, hi) = self.us_range();
        if us < lo || us > hi || us.is_nan() {
            return Err(FrontierError::TargetOutOfRange { target: us, lo, hi });
        }
        if let Some(v) = self.vertices.iter().find(|v| v.us == us) {
            return Ok(v.ds);
        }
        let i = self
            .vertices
            .windows(2)
            .position(|w| w[0].us < us && us < w[1].us)
            .expect("target inside range must fall in a segment");
        let (a, b) = (&self.vertices[i], &self.vertices[i + 1]);
        let t = (us - a.us) / (b.us - a.us);
        Ok(a.ds + t * (b.ds - a.ds))
    }
}

/// Upper chain of the 2D convex hull, from the minimum-`us` extreme to the
/// maximum-`us` extreme.
///
/// Ties in `us` keep only the maximum-`ds` point (a dominated duplicate can
/// never be a useful classifier); collinear interior points are dropped so
/// the vertex set is canonical. Orientation uses exact cross products with
/// no epsilon.
pub fn upper_hull(points: &[AccuracyPoint]) -> Result<Frontier, FrontierError> {
    if points.is_empty() {
        return Err(FrontierError::EmptyInput);
    }
    for p in points {
        p.check_range()?;
    }

    let mut sorted: Vec<&AccuracyPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.us.total_cmp(&b.us)
            .then(a.ds.total_cmp(&b.ds))
            .then(a.source_id.cmp(&b.source_id))
    });

    // One survivor per distinct us: max ds, smallest id among exact ties.
    let mut best_per_us: Vec<&AccuracyPoint> = Vec::new();
    for p in sorted {
        match best_per_us.last_mut() {
            Some(last) if last.us == p.us => {
                if p.ds > last.ds {
                    *last = p;
                }
            }
            _ => best_per_us.push(p),
        }
    }

    let mut chain: Vec<&AccuracyPoint> = Vec::with_capacity(best_per_us.len());
    for p in best_per_us {
        while chain.len() >= 2 {
            let o = chain[chain.len() - 2];
            let a = chain[chain.len() - 1];
            // Right turn (a strictly above chord o->p) keeps a on the chain.
            if cross(o, a, p) < 0.0 {
                break;
            }
            chain.pop();
        }
        chain.push(p);
    }

    Ok(Frontier { vertices: chain.into_iter().cloned().collect() })
}

fn cross(o: &AccuracyPoint, a: &AccuracyPoint, b: &AccuracyPoint) -> f64 {
    (a.us - o.us) * (b.ds - o.ds) - (a.ds - o.ds) * (b.us - o.us)
}

/// Probabilities over classifier ids; nonnegative, summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weights: Vec<(String, f64)>,
}

impl Mixture {
    pub fn new(weights: Vec<(String, f64)>) -> Result<Self, FrontierError> {
        let mixture = Self { weights };
        mixture.validate()?;
        Ok(mixture)
    }

    pub fn one_hot(id: impl Into<String>) -> Self {
        Self { weights: vec![(id.into(), 1.0)] }
    }

    pub fn validate(&self) -> Result<(), FrontierError> {
        let mut sum = 0.0;
        for (id, w) in &self.weights {
            if *w < 0.0 || w.is_nan() {
                return Err(FrontierError::NegativeWeight { id: id.clone(), weight: *w });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(FrontierError::WeightSum { sum });
        }
        Ok(())
    }
}

/// Accuracy of the randomized classifier defined by `mixture` over `points`:
/// the exact convex combination of the member accuracies.
pub fn mix_accuracies(
    points: &[AccuracyPoint],
    mixture: &Mixture,
) -> Result<AccuracyPoint, FrontierError> {
    mixture.validate()?;
    let by_id: BTreeMap<&str, &AccuracyPoint> = points
        .iter()
        .rev() // first occurrence wins
        .map(|p| (p.source_id.as_str(), p))
        .collect();
    let mut us = 0.0;
    let mut ds = 0.0;
    for (id, w) in &mixture.weights {
        let p = by_id
            .get(id.as_str())
            .ok_or_else(|| FrontierError::UnknownId(id.clone()))?;
        us += w * p.us;
        ds += w * p.ds;
    }
    Ok(AccuracyPoint::new(us, ds, "mixture"))
}

/// Two-point (or one-point) mixture over adjacent frontier vertices whose
/// mixed upstream accuracy equals `target_us` and whose downstream accuracy
/// equals the frontier interpolation there.
pub fn mixture_for_target_us(
    frontier: &Frontier,
    target_us: f64,
) -> Result<Mixture, FrontierError> {
    let (lo, hi) = frontier.us_range();
    if target_us < lo || target_us > hi || target_us.is_nan() {
        return Err(FrontierError::TargetOutOfRange { target: target_us, lo, hi });
    }
    let vertices = frontier.vertices();
    if let Some(v) = vertices.iter().find(|v| v.us == target_us) {
        return Ok(Mixture::one_hot(v.source_id.clone()));
    }
    let i = vertices
        .windows(2)
        .position(|w| w[0].us < target_us && target_us < w[1].us)
        .expect("target inside range must fall in a segment");
    let (a, b) = (&vertices[i], &vertices[i + 1]);
    let w = (target_us - a.us) / (b.us - a.us);
    Mixture::new(vec![(a.source_id.clone(), 1.0 - w), (b.source_id.clone(), w)])
}

/// Per-example correctness indicators for `N` classifiers on the upstream
/// and downstream evaluation sets. Entry `upstream[i][j]` is true iff
/// classifier `j` is correct on upstream example `i`; column means equal the
/// classifiers' accuracies by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub classifier_ids: Vec<String>,
    pub upstream: Vec<Vec<bool>>,
    pub downstream: Vec<Vec<bool>>,
}

impl OutcomeTable {
    pub fn new(
        classifier_ids: Vec<String>,
        upstream: Vec<Vec<bool>>,
        downstream: Vec<Vec<bool>>,
    ) -> Result<Self, FrontierError> {
        let n = classifier_ids.len();
        for (name, rows) in [("upstream", &upstream), ("downstream", &downstream)] {
            if let Some(bad) = rows.iter().find(|r| r.len() != n) {
                return Err(FrontierError::MalformedTable(format!(
                    "{name} row has {} entries for {n} classifiers",
                    bad.len()
                )));
            }
        }
        Ok(Self { classifier_ids, upstream, downstream })
    }

    pub fn n_classifiers(&self) -> usize {
        self.classifier_ids.len()
    }

    /// Empirical (upstream, downstream) accuracy of classifier column `j`.
    pub fn column_accuracy(&self, j: usize) -> (f64, f64) {
        let mean = |rows: &[Vec<bool>]| {
            rows.iter().filter(|r| r[j]).count() as f64 / rows.len() as f64
        };
        (mean(&self.upstream), mean(&self.downstream))
    }
}

/// Empirically score the randomized classifier on an outcome table.
///
/// For each example the classifier index is redrawn independently from the
/// mixture (independently for the upstream and downstream sets, matching
/// the per-input construction), and the sampled correctness indicator is
/// scored. Deterministic given `seed`.
pub fn simulate_randomized_classifier(
    table: &OutcomeTable,
    mixture: &Mixture,
    seed: u64,
) -> Result<AccuracyPoint, FrontierError> {
    if table.upstream.is_empty() || table.downstream.is_empty() {
        return Err(FrontierError::EmptyTable);
    }
    mixture.validate()?;
    let mut columns = Vec::with_capacity(mixture.weights.len());
    let mut cumulative = Vec::with_capacity(mixture.weights.len());
    let mut acc = 0.0;
    for (id, w) in &mixture.weights {
        let j = table
            .classifier_ids
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| FrontierError::UnknownId(id.clone()))?;
        acc += w;
        columns.push(j);
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: &[Vec<bool>], rng: &mut ChaCha8Rng| {
        let mut correct = 0usize;
        for row in rows {
            let u: f64 = rng.random();
            let pick = cumulative
                .iter()
                .position(|c| u < *c)
                .unwrap_or(columns.len() - 1);
            if row[columns[pick]] {
                correct += 1;
            }
        }
        correct as f64 / rows.len() as f64
    };
    let us = draw(&table.upstream, &mut rng);
    let ds = draw(&table.downstream, &mut rng);
    Ok(AccuracyPoint::new(us, ds, "randomized"))
}

/// Emit a frontier as CSV with columns `us,ds,source_id`.
pub fn write_frontier_csv<W: Write>(frontier: &Frontier, mut out: W) -> Result<(), FrontierError> {
    writeln!(out, "us,ds,source_id")?;
    for v in frontier.vertices() {
        writeln!(out, "{},{},{}", v.us, v.ds, v.source_id)?;
    }
    Ok(())
}
