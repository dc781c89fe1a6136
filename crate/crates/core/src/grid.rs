//! Barycenters over a grid of weight vectors.
//!
//! For four measures the grid interpolates bilinearly between the unit
//! vectors: `λ(s, t) = ((1−s)(1−t), s(1−t), (1−s)t, st)` for
//! `s, t ∈ {0, 1/(K−1), …, 1}`. For other `N` the grid is the simplex
//! lattice `{c / (K−1) : c ∈ ℕᴺ, Σ c = K−1}`; this is an extension of the
//! four-measure scheme. Boundary weights are clamped to a small floor and
//! renormalized because the weights must lie in the open simplex.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{save_measure, MeasureFormat};
use crate::measure::{DiscreteMeasure, SimplexWeights};
use crate::mot::greedy_algorithm;
use crate::plan::pushforward_mean;

/// Default clamping floor for boundary weights.
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// One greedy plan at uniform weights, pushed forward with every `λᵏ`.
    Reuse,
    /// One greedy plan per `λᵏ`.
    Recompute,
}

impl std::str::FromStr for GridMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reuse" => Ok(Self::Reuse),
            "recompute" => Ok(Self::Recompute),
            other => Err(Error::InvalidParameter(format!("unknown grid mode '{other}'"))),
        }
    }
}

/// Grid weights on the closed simplex, before clamping.
pub fn weight_grid(n: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("weight grid needs N >= 2, got {n}")));
    }
    if k < 2 {
        return Err(Error::InvalidParameter(format!("weight grid needs K >= 2, got {k}")));
    }
    let steps = (k - 1) as f64;
    if n == 4 {
        let mut out = Vec::with_capacity(k * k);
        for row in 0..k {
            let t = row as f64 / steps;
            for col in 0..k {
                let s = col as f64 / steps;
                out.push(vec![(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t]);
            }
        }
        return Ok(out);
    }
    let mut out = Vec::new();
    let mut c = vec![0usize; n];
    compositions(k - 1, 0, &mut c, &mut |c| out.push(c.iter().map(|&x| x as f64 / steps).collect()));
    Ok(out)
}

fn compositions(left: usize, i: usize, c: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if i + 1 == c.len() {
        c[i] = left;
        f(c);
        return;
    }
    for x in (0..=left).rev() {
        c[i] = x;
        compositions(left - x, i + 1, c, f);
    }
}

/// One grid node and its barycenter.
#[derive(Debug, Clone)]
pub struct GridPoint {
    /// Grid weight on the closed simplex.
    pub grid_weight: Vec<f64>,
    /// Clamped weight actually used.
    pub lambda: SimplexWeights,
    pub barycenter: DiscreteMeasure,
}

impl GridPoint {
    /// File stem encoding the grid weight, e.g. `bary_0.5000_0.5000`.
    pub fn file_stem(&self) -> String {
        let parts: Vec<String> = self.grid_weight.iter().map(|l| format!("{l:.4}")).collect();
        format!("bary_{}", parts.join("_"))
    }
}

pub fn run_weight_grid(measures: &[DiscreteMeasure], k: usize, mode: GridMode) -> Result<Vec<GridPoint>> {
    let grid = weight_grid(measures.len(), k)?;
    let lambdas: Vec<SimplexWeights> =
        grid.iter().map(|g| SimplexWeights::clamped(g, WEIGHT_FLOOR)).collect::<Result<_>>()?;
    let barycenters: Vec<DiscreteMeasure> = match mode {
        GridMode::Reuse => {
            let plan = greedy_algorithm(measures, &SimplexWeights::uniform(measures.len()))?;
            lambdas.par_iter().map(|l| pushforward_mean(&plan, measures, l)).collect::<Result<_>>()?
        }
        GridMode::Recompute => lambdas
            .par_iter()
            .map(|l| pushforward_mean(&greedy_algorithm(measures, l)?, measures, l))
            .collect::<Result<_>>()?,
    };
    Ok(grid
        .into_iter()
        .zip(lambdas)
        .zip(barycenters)
        .map(|((grid_weight, lambda), barycenter)| GridPoint { grid_weight, lambda, barycenter })
        .collect())
}

/// Writes one file per grid point into `dir` and returns the paths.
pub fn write_grid(dir: &Path, points: &[GridPoint], format: MeasureFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
    points
        .iter()
        .map(|p| {
            let path = dir.join(format!("{}.{}", p.file_stem(), format.extension()));
            save_measure(&path, &p.barycenter, format)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot2::w2_squared;

    fn squares() -> Vec<DiscreteMeasure> {
        let corner = |x: f64, y: f64| {
            DiscreteMeasure::uniform(vec![vec![x, y], vec![x + 0.1, y], vec![x, y + 0.2]]).unwrap()
        };
        vec![corner(0.0, 0.0), corner(1.0, 0.0), corner(0.0, 1.0), corner(1.0, 1.0)]
    }

    #[test]
    fn bilinear_grid() {
        let g = weight_grid(4, 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(g[2], vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(g[4], vec![0.25; 4]);
        assert_eq!(g[8], vec![0.0, 0.0, 0.0, 1.0]);
        assert!(g.iter().all(|w| (w.iter().sum::<f64>() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn simplex_lattice_grid() {
        let g = weight_grid(3, 3).unwrap();
        // compositions of 2 into 3 parts
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![1.0, 0.0, 0.0]);
        assert!(g.contains(&vec![0.5, 0.0, 0.5]));
        assert!(weight_grid(3, 1).is_err());
        assert!(weight_grid(1, 3).is_err());
    }

    #[test]
    fn corners_recover_the_inputs() {
        let ms = squares();
        let pts = run_weight_grid(&ms, 3, GridMode::Reuse).unwrap();
        for (corner, input) in [(0, 0), (2, 1), (6, 2), (8, 3)] {
            let d = w2_squared(&pts[corner].barycenter, &ms[input]).unwrap();
            assert!(d <= 1e-6 * 2.0, "corner {corner}: {d}");
        }
    }

    #[test]
    fn center_agrees_between_modes() {
        let ms = squares();
        let a = run_weight_grid(&ms, 3, GridMode::Reuse).unwrap();
        let b = run_weight_grid(&ms, 3, GridMode::Recompute).unwrap();
        assert_eq!(a[4].barycenter, b[4].barycenter);
    }

    #[test]
    fn point_masses_give_single_atoms() {
        let ms: Vec<DiscreteMeasure> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
            .iter()
            .map(|p| DiscreteMeasure::dirac(p.to_vec()).unwrap())
            .collect();
        let pts = run_weight_grid(&ms, 3, GridMode::Recompute).unwrap();
        assert_eq!(pts.len(), 9);
        for p in &pts {
            assert_eq!(p.barycenter.len(), 1);
            let l = p.lambda.as_slice();
            let want = [l[1] + l[3], l[2] + l[3]];
            for c in 0..2 {
                assert!((p.barycenter.point(0)[c] - want[c]).abs() < 1e-12);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let files = write_grid(dir.path(), &pts, MeasureFormat::Json).unwrap();
        assert_eq!(files.len(), 9);
        assert!(files[4].ends_with("bary_0.2500_0.2500_0.2500_0.2500.json"));
    }
}
