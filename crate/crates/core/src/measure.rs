//! Discrete probability measures and barycentric weight vectors.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used for every mass-conservation comparison.
pub const MASS_TOL: f64 = 1e-9;

/// Atoms whose normalized weight falls below this are dropped at construction.
pub const ATOM_DROP: f64 = 1e-15;

/// A finitely supported probability measure `Σ_j w_j δ(x_j)` in `R^d`.
///
/// Construction canonicalizes the input: weights are normalized to unit
/// total mass, atoms with vanishing weight are removed and exactly equal
/// support points are merged (first occurrence keeps its position). Point
/// order is otherwise preserved so that indices stay meaningful to callers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    mass_scale: f64,
}

// equality ignores the recorded input scale
impl PartialEq for DiscreteMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.weights == other.weights
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureRepr> for DiscreteMeasure {
    type Error = Error;

    fn try_from(r: MeasureRepr) -> Result<Self> {
        let m = DiscreteMeasure::new(r.points, r.weights)?;
        if m.dim != r.dim {
            return Err(Error::DimensionMismatch { expected: r.dim, found: m.dim });
        }
        Ok(m)
    }
}

impl From<DiscreteMeasure> for MeasureRepr {
    fn from(m: DiscreteMeasure) -> Self {
        MeasureRepr {
            dim: m.dim,
            points: m.iter_points().map(<[f64]>::to_vec).collect(),
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    /// Builds a measure from a list of points and nonnegative weights.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or_else(|| {
            Error::InvalidMeasure("a measure needs at least one support point".into())
        })?;
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            flat.extend_from_slice(p);
        }
        Self::from_flat(dim, flat, weights)
    }

    /// Same as [`DiscreteMeasure::new`] with row-major packed coordinates.
    pub fn from_flat(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        if points.len() != dim * weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not describe {} points of dimension {}",
                points.len(),
                weights.len(),
                dim
            )));
        }
        if let Some(x) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure(format!("non-finite coordinate {x}")));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidMeasure(format!("invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }

        // merge exact duplicates, keeping first-occurrence order
        let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut merged_pts: Vec<f64> = Vec::new();
        let mut merged_w: Vec<f64> = Vec::new();
        for (j, &w) in weights.iter().enumerate() {
            let p = &points[j * dim..(j + 1) * dim];
            let key: Vec<u64> = p.iter().map(|x| canonical_bits(*x)).collect();
            match slot.get(&key) {
                Some(&k) => merged_w[k] += w,
                None => {
                    slot.insert(key, merged_w.len());
                    merged_pts.extend_from_slice(p);
                    merged_w.push(w);
                }
            }
        }

        let mut weights = normalize(merged_w);
        let keep: Vec<bool> = weights.iter().map(|w| *w >= ATOM_DROP).collect();
        if keep.iter().any(|k| !k) {
            let mut pts = Vec::with_capacity(merged_pts.len());
            let mut ws = Vec::with_capacity(weights.len());
            for (j, k) in keep.iter().enumerate() {
                if *k {
                    pts.extend_from_slice(&merged_pts[j * dim..(j + 1) * dim]);
                    ws.push(weights[j]);
                }
            }
            merged_pts = pts;
            weights = normalize(ws);
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no atom with positive mass".into()));
        }

        Ok(Self { dim, points: merged_pts, weights, mass_scale: total })
    }

    /// A single Dirac mass.
    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    /// Uniform weights over the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass of the raw input before normalization.
    pub fn mass_scale(&self) -> f64 {
        self.mass_scale
    }

    /// Copy of the measure with every point shifted by `t`.
    pub fn translated(&self, t: &[f64]) -> Result<Self> {
        if t.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: t.len() });
        }
        let pts = self
            .points
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(t).map(|(a, b)| a + b))
            .collect();
        Self::from_flat(self.dim, pts, self.weights.clone())
    }

    /// Copy of the measure with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let pts = self.points.iter().map(|x| x * s).collect();
        Self::from_flat(self.dim, pts, self.weights.clone())
    }

    /// Stable content hash over coordinates and weights.
    pub fn content_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.dim.hash(&mut h);
        for x in &self.points {
            x.to_bits().hash(&mut h);
        }
        for w in &self.weights {
            w.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

fn canonical_bits(x: f64) -> u64 {
    // -0.0 and 0.0 are the same point
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    // already-normalized input is left untouched so construction is idempotent
    if (total - 1.0).abs() > 1e-14 {
        w.iter_mut().for_each(|x| *x /= total);
    }
    w
}

/// Squared Euclidean distance.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Barycentric weights `λ` in the open probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

impl SimplexWeights {
    /// Accepts a strictly positive vector summing to one within `1e-12`.
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some(l) = lambda.iter().find(|l| !(l.is_finite() && **l > 0.0 && **l < 1.0 + 1e-12)) {
            return Err(Error::InvalidWeights(format!("weight {l} is not in (0, 1)")));
        }
        let s: f64 = lambda.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {s}, not 1")));
        }
        Ok(Self(lambda))
    }

    /// Normalizes an arbitrary positive vector onto the simplex.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let s: f64 = raw.iter().sum();
        if raw.iter().any(|x| !(x.is_finite() && *x > 0.0)) || !(s > 0.0) {
            return Err(Error::InvalidWeights("weights must be positive and finite".into()));
        }
        Self::new(raw.into_iter().map(|x| x / s).collect())
    }

    /// Clamps every coordinate to at least `floor`, then renormalizes.
    ///
    /// Used to map points of the closed simplex (e.g. unit vectors) into
    /// the open simplex.
    pub fn clamped(raw: &[f64], floor: f64) -> Result<Self> {
        if raw.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidWeights("weights must be nonnegative".into()));
        }
        Self::normalized(raw.iter().map(|x| x.max(floor)).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// `λ_i / Σ_{j<r} λ_j`: weight of coordinate `i` renormalized over the
    /// first `r` coordinates.
    pub fn prefix(&self, i: usize, r: usize) -> f64 {
        assert!(i < r && r <= self.0.len(), "prefix({i}, {r}) out of range");
        let s: f64 = self.0[..r].iter().sum();
        self.0[i] / s
    }

    /// The renormalized prefix of length `r` as its own weight vector.
    pub fn prefix_weights(&self, r: usize) -> SimplexWeights {
        assert!(r >= 1 && r <= self.0.len());
        let s: f64 = self.0[..r].iter().sum();
        SimplexWeights(self.0[..r].iter().map(|l| l / s).collect())
    }

    /// True when every weight equals `1/N` within `1e-12`.
    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.0.len() as f64;
        self.0.iter().all(|l| (l - u).abs() <= 1e-12)
    }

    /// True when `λ_1 ≥ λ_2 ≥ … ≥ λ_N`.
    pub fn is_descending(&self) -> bool {
        self.0.windows(2).all(|w| w[0] >= w[1])
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, l) in self.0.iter().enumerate() {
            if *l > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Reorders the weights so that position `p` holds `λ[order[p]]`.
    pub fn permuted(&self, order: &[usize]) -> SimplexWeights {
        SimplexWeights(order.iter().map(|&i| self.0[i]).collect())
    }
}
