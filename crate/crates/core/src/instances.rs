//! Instance generators: torus worst cases, the example where neither
//! algorithm dominates, nested-ellipse images and random clouds.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, SimplexWeights};
use crate::mot::GreedyState;
use crate::plan::{Atom, MultiMarginalPlan};

/// `γ ↦ (cos γ, sin γ)`.
pub fn torus_embed(angles: &[f64]) -> Vec<[f64; 2]> {
    angles.iter().map(|g| [g.cos(), g.sin()]).collect()
}

/// Angle of a planar point in `[0, 2π)`.
fn angle_of(p: &[f64]) -> f64 {
    let a = p[1].atan2(p[0]);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Signed representative of an angle in `(−π, π]`.
fn signed_angle(a: f64) -> f64 {
    let a = a.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// `+1` on `(0, π]`, `−1` on `(π, 2π]` (so angle `0 ≡ 2π` maps to `−1`).
fn torus_sign(a: f64) -> f64 {
    let a = a.rem_euclid(2.0 * PI);
    if a > 0.0 && a <= PI {
        1.0
    } else {
        -1.0
    }
}

fn ring_measure(angles: &[f64]) -> Result<DiscreteMeasure> {
    let pts = torus_embed(angles).into_iter().map(|p| p.to_vec()).collect();
    DiscreteMeasure::uniform(pts)
}

/// Adversarial instance together with the competitor plan used to
/// upper-bound the optimum.
#[derive(Debug, Clone)]
pub struct WorstCase {
    pub measures: Vec<DiscreteMeasure>,
    pub weights: SimplexWeights,
    pub competitor: MultiMarginalPlan,
    /// Torus angles of every support point, measure by measure.
    pub angles: Vec<Vec<f64>>,
}

/// Equally spaced rings where the reference algorithm does almost `N`
/// times worse than necessary.
///
/// Measure 1 sits at angles `2πj/M`; the others are shifted by
/// `±(π/M)/(1 + ε̃)`, alternating in sign. The competitor plan couples
/// point `j` of measures `1, 2, 4, …` with point `j + 1` of measures
/// `3, 5, …`.
pub fn gen_reference_worst_case(n: usize, m: usize, eps_tilde: f64) -> Result<WorstCase> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("need N >= 3 measures, got {n}")));
    }
    if m < 4 {
        return Err(Error::InvalidParameter(format!("need M >= 4 atoms, got {m}")));
    }
    if !(eps_tilde > 0.0 && eps_tilde <= 1e-2) {
        return Err(Error::InvalidParameter(format!("eps_tilde {eps_tilde} outside (0, 1e-2]")));
    }
    let step = 2.0 * PI / m as f64;
    let shift = (PI / m as f64) / (1.0 + eps_tilde);
    let mut angles = Vec::with_capacity(n);
    for i in 0..n {
        // 0-based i: measure 1 is i = 0, then +, −, +, …
        let offset = match i {
            0 => 0.0,
            i if i % 2 == 1 => shift,
            _ => -shift,
        };
        angles.push((0..m).map(|j| offset + j as f64 * step).collect::<Vec<f64>>());
    }
    let measures = angles.iter().map(|a| ring_measure(a)).collect::<Result<Vec<_>>>()?;
    let atoms = (0..m)
        .map(|j| Atom {
            indices: (0..n).map(|i| if i >= 2 && i % 2 == 0 { (j + 1) % m } else { j }).collect(),
            mass: 1.0 / m as f64,
        })
        .collect();
    Ok(WorstCase {
        measures,
        weights: SimplexWeights::uniform(n),
        competitor: MultiMarginalPlan::new(n, atoms)?,
        angles,
    })
}

/// Default perturbations `ε_i = 1e-5 / i` (1-based `i`).
pub fn default_greedy_eps(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 1e-5 / i as f64).collect()
}

/// Rings built round by round against the greedy algorithm: each new
/// ring is placed so that its two points nearest to the current partial
/// mean are almost equidistant, with the slightly closer one on the
/// wrong side. The competitor is the aligned plan `(x¹_j, …, xᴺ_j)`.
///
/// Returns an error if the construction's invariants fail, i.e. if the
/// partial means drift away from zero or the greedy step picks a point
/// at the wrong distance.
pub fn gen_greedy_worst_case(n: usize, m: usize, eps: &[f64]) -> Result<WorstCase> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need N >= 2 measures, got {n}")));
    }
    if m < 4 {
        return Err(Error::InvalidParameter(format!("need M >= 4 atoms, got {m}")));
    }
    if eps.len() != n {
        return Err(Error::InvalidParameter(format!("need {n} perturbations, got {}", eps.len())));
    }
    let half = PI / m as f64;
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < half / 2.0)) {
        return Err(Error::InvalidParameter(format!("perturbation {e} outside (0, π/(2M))")));
    }
    let step = 2.0 * PI / m as f64;
    let weights = SimplexWeights::uniform(n);
    let mut angles: Vec<Vec<f64>> = vec![(0..m).map(|j| j as f64 * step).collect()];
    let mut measures = vec![ring_measure(&angles[0])?];

    for i in 1..n {
        // greedy on the measures built so far, with the prefix weights
        let w = weights.prefix_weights(i);
        let mean_angle = if i == 1 {
            0.0
        } else {
            let mut st = GreedyState::start(&measures, &w)?;
            while !st.is_complete() {
                st.advance()?;
            }
            let k = tuple_of_first_atom(&st)?;
            check_partial_mean(&st, k, &angles, i, half, eps)?;
            angle_of(st.mean(k))
        };
        let x0 = mean_angle + half + torus_sign(mean_angle) * eps[i];
        let ring: Vec<f64> = (0..m).map(|j| x0 + j as f64 * step).collect();
        measures.push(ring_measure(&ring)?);
        angles.push(ring);
    }
    // final round checks
    let mut st = GreedyState::start(&measures, &weights)?;
    while !st.is_complete() {
        st.advance()?;
    }
    let k = tuple_of_first_atom(&st)?;
    check_partial_mean(&st, k, &angles, n, half, eps)?;

    let atoms = (0..m).map(|j| Atom { indices: vec![j; n], mass: 1.0 / m as f64 }).collect();
    Ok(WorstCase { measures, weights, competitor: MultiMarginalPlan::new(n, atoms)?, angles })
}

fn tuple_of_first_atom(st: &GreedyState<'_>) -> Result<usize> {
    st.tuples()
        .iter()
        .position(|t| t[0] == 0)
        .ok_or_else(|| Error::Invariant("greedy plan lost the first atom".into()))
}

/// Checks `|m̃₀⁽ⁱ⁾| ≤ (1/i)(π/M)` and, for `i ≥ 2`, that the point picked
/// in round `i` lies at angular distance `π/M − ε_i` from the previous
/// partial mean.
fn check_partial_mean(
    st: &GreedyState<'_>,
    k: usize,
    angles: &[Vec<f64>],
    i: usize,
    half: f64,
    eps: &[f64],
) -> Result<()> {
    let tuple = &st.tuples()[k];
    let slack = 1e-9 * half;
    // torus mean of the tuple, valid while every angle is near zero
    let mean: f64 = tuple.iter().enumerate().map(|(r, &j)| signed_angle(angles[r][j])).sum::<f64>() / i as f64;
    if mean.abs() > half / i as f64 + slack {
        return Err(Error::Invariant(format!(
            "partial mean {mean} after round {i} exceeds (1/{i})·π/M"
        )));
    }
    if i >= 2 {
        let prev: f64 =
            tuple[..i - 1].iter().enumerate().map(|(r, &j)| signed_angle(angles[r][j])).sum::<f64>()
                / (i - 1) as f64;
        let picked = signed_angle(angles[i - 1][tuple[i - 1]]);
        let gap = (picked - prev).abs();
        // the construction is exact on the torus; the Euclidean embedding
        // moves the partial means by O((π/M)³)
        let tol = 10.0 * half.powi(3) + slack;
        if (gap - (half - eps[i - 1])).abs() > tol {
            return Err(Error::Invariant(format!(
                "round {i} picked a point at angular distance {gap}, expected {}",
                half - eps[i - 1]
            )));
        }
    }
    Ok(())
}

/// Three two-point measures on which neither algorithm dominates.
#[derive(Debug, Clone)]
pub struct NeitherBetter {
    /// `x₁, …, x₆`.
    pub points: [[f64; 2]; 6],
    /// `ν¹ = {x₁, x₄}`, `ν² = {x₂, x₅}`, `ν³ = {x₃, x₆}`, each uniform.
    pub nu: [DiscreteMeasure; 3],
    /// `(ν¹, ν², ν², ν³)`: greedy is optimal, the reference is not.
    pub ordering_a: Vec<DiscreteMeasure>,
    /// `(ν², ν¹, ν³, ν²)`: the reference is optimal, greedy is not.
    pub ordering_b: Vec<DiscreteMeasure>,
    pub weights: SimplexWeights,
    /// The optimal plan, identical in both orderings: upper points
    /// together and lower points together.
    pub optimal: MultiMarginalPlan,
}

pub fn gen_neither_better() -> NeitherBetter {
    let y = 5.0 / 8.0;
    let x1 = [-1.0, y];
    let x2 = [0.0, y];
    let x3 = [1.0, y];
    let neg = |p: [f64; 2]| [-p[0], -p[1]];
    let points = [x1, x2, x3, neg(x1), neg(x2), neg(x3)];
    let mk = |a: [f64; 2], b: [f64; 2]| DiscreteMeasure::uniform(vec![a.to_vec(), b.to_vec()]).unwrap();
    let nu = [mk(points[0], points[3]), mk(points[1], points[4]), mk(points[2], points[5])];
    let ordering_a = vec![nu[0].clone(), nu[1].clone(), nu[1].clone(), nu[2].clone()];
    let ordering_b = vec![nu[1].clone(), nu[0].clone(), nu[2].clone(), nu[1].clone()];
    let optimal = MultiMarginalPlan::new(
        4,
        vec![Atom { indices: vec![0; 4], mass: 0.5 }, Atom { indices: vec![1; 4], mass: 0.5 }],
    )
    .unwrap();
    NeitherBetter { points, nu, ordering_a, ordering_b, weights: SimplexWeights::uniform(4), optimal }
}

/// Parameters of one nested-ellipse image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseShape {
    pub center: [f64; 2],
    pub axes: [f64; 2],
    /// Inner ellipse axes as a fraction of the outer ones.
    pub inner_scale: f64,
}

/// Ring width in pixels.
const RING_WIDTH_PX: f64 = 2.0;

/// `n` random images of two nested elliptic rings on a
/// `resolution × resolution` grid, as uniform measures on the lit pixels
/// at `(col/R, row/R)`.
///
/// Centers are drawn from `[0.35, 0.65]²`, semi-axes from `[0.15, 0.35]`
/// and the inner ring scale from `[0.4, 0.6]`.
pub fn gen_nested_ellipses(n: usize, resolution: usize, seed: u64) -> Result<Vec<DiscreteMeasure>> {
    Ok(gen_nested_ellipse_shapes(n, resolution, seed)?.into_iter().map(|(m, _)| m).collect())
}

pub fn gen_nested_ellipse_shapes(
    n: usize,
    resolution: usize,
    seed: u64,
) -> Result<Vec<(DiscreteMeasure, EllipseShape)>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one image".into()));
    }
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} is too small to rasterize a ring (minimum 8)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let shape = EllipseShape {
            center: [rng.random_range(0.35..=0.65), rng.random_range(0.35..=0.65)],
            axes: [rng.random_range(0.15..=0.35), rng.random_range(0.15..=0.35)],
            inner_scale: rng.random_range(0.4..=0.6),
        };
        out.push((rasterize_rings(&shape, resolution)?, shape));
    }
    Ok(out)
}

fn rasterize_rings(shape: &EllipseShape, res: usize) -> Result<DiscreteMeasure> {
    let r = res as f64;
    let width = RING_WIDTH_PX / r;
    let inner_axes = [shape.axes[0] * shape.inner_scale, shape.axes[1] * shape.inner_scale];
    // a pixel is lit when it lies within half the ring width of either
    // ellipse, with distance |ρ − 1| / |∇ρ| to first order
    let on_ring = |x: f64, y: f64, axes: [f64; 2]| {
        let (px, py) = (x - shape.center[0], y - shape.center[1]);
        let rho = ((px / axes[0]).powi(2) + (py / axes[1]).powi(2)).sqrt();
        if rho == 0.0 {
            return false;
        }
        let grad = ((px / (axes[0] * axes[0])).powi(2) + (py / (axes[1] * axes[1])).powi(2)).sqrt() / rho;
        (rho - 1.0).abs() / grad < width / 2.0
    };
    let mut pts = Vec::new();
    for row in 0..res {
        for col in 0..res {
            let (x, y) = (col as f64 / r, row as f64 / r);
            if on_ring(x, y, shape.axes) || on_ring(x, y, inner_axes) {
                pts.push(vec![x, y]);
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::InvalidMeasure("ellipse image has no lit pixels".into()));
    }
    DiscreteMeasure::uniform(pts)
}

/// `n` measures of `n_atoms` uniform points in `[0, 1]^d` with flat
/// Dirichlet weights.
pub fn gen_random_clouds(n: usize, n_atoms: usize, d: usize, seed: u64) -> Result<Vec<DiscreteMeasure>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_cloud(&mut rng, n_atoms, d)).collect()
}

/// One random cloud drawn from `rng`.
pub fn random_cloud<R: Rng + ?Sized>(rng: &mut R, n_atoms: usize, d: usize) -> Result<DiscreteMeasure> {
    if n_atoms == 0 || d == 0 {
        return Err(Error::InvalidParameter("need at least one atom and one dimension".into()));
    }
    let pts: Vec<f64> = (0..n_atoms * d).map(|_| rng.random::<f64>()).collect();
    let w: Vec<f64> = (0..n_atoms).map(|_| rng.sample::<f64, _>(Exp1).max(1e-12)).collect();
    DiscreteMeasure::from_flat(d, pts, w)
}
