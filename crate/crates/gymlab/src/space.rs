//! The compact metric space `X` with its reference measure `λ`.
//!
//! Two desk-scale realisations: a uniformly partitioned interval and a finite
//! labelled point cloud with an explicit metric. Cells are addressed by index;
//! a cell is the finest location the calculus can see.

use crate::{GymError, Result};
use serde::{Deserialize, Serialize};

/// The space `X` together with the reference measure `λ` (supp λ = X, so
/// every cell weight is strictly positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceModel {
    /// `[lo, hi]` split into `cells` equal cells; `λ(cell) = (hi-lo)/cells`,
    /// metric `|x - y|` between cell centers.
    Interval { lo: f64, hi: f64, cells: usize },
    /// Finite labelled points with individual weights and a metric given as a
    /// full symmetric distance matrix.
    PointCloud {
        labels: Vec<String>,
        weights: Vec<f64>,
        distances: Vec<Vec<f64>>,
    },
}

impl SpaceModel {
    pub fn interval(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        let space = SpaceModel::Interval { lo, hi, cells };
        space.validate()?;
        Ok(space)
    }

    pub fn point_cloud(
        labels: Vec<String>,
        weights: Vec<f64>,
        distances: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let space = SpaceModel::PointCloud {
            labels,
            weights,
            distances,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceModel::Interval { lo, hi, cells } => {
                if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                    return Err(GymError::InvalidSpace(format!(
                        "interval [{lo}, {hi}] is degenerate"
                    )));
                }
                if *cells == 0 {
                    return Err(GymError::InvalidSpace("interval with zero cells".into()));
                }
                Ok(())
            }
            SpaceModel::PointCloud {
                labels,
                weights,
                distances,
            } => {
                let n = weights.len();
                if n == 0 {
                    return Err(GymError::InvalidSpace("empty point cloud".into()));
                }
                if labels.len() != n || distances.len() != n {
                    return Err(GymError::InvalidSpace(
                        "labels/weights/distances length mismatch".into(),
                    ));
                }
                if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return Err(GymError::InvalidSpace(
                        "every point weight must be strictly positive".into(),
                    ));
                }
                for (i, row) in distances.iter().enumerate() {
                    if row.len() != n {
                        return Err(GymError::InvalidSpace("distance matrix not square".into()));
                    }
                    if row[i] != 0.0 {
                        return Err(GymError::InvalidSpace(format!(
                            "nonzero diagonal distance at {i}"
                        )));
                    }
                    for (j, d) in row.iter().enumerate() {
                        if !d.is_finite() || *d < 0.0 {
                            return Err(GymError::InvalidSpace(format!(
                                "invalid distance at ({i}, {j})"
                            )));
                        }
                        if (d - distances[j][i]).abs() > 1e-12 * (1.0 + d.abs()) {
                            return Err(GymError::InvalidSpace(format!(
                                "distance matrix not symmetric at ({i}, {j})"
                            )));
                        }
                    }
                }
                // Triangle inequality over all triples; n is small by design.
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            if distances[i][j] > distances[i][k] + distances[k][j] + 1e-12 {
                                return Err(GymError::InvalidSpace(format!(
                                    "triangle inequality fails for ({i}, {j}, {k})"
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn num_cells(&self) -> usize {
        match self {
            SpaceModel::Interval { cells, .. } => *cells,
            SpaceModel::PointCloud { weights, .. } => weights.len(),
        }
    }

    /// `λ(cell)`.
    pub fn cell_measure(&self, cell: usize) -> f64 {
        match self {
            SpaceModel::Interval { lo, hi, cells } => (hi - lo) / *cells as f64,
            SpaceModel::PointCloud { weights, .. } => weights[cell],
        }
    }

    /// `λ(X)`.
    pub fn total_mass(&self) -> f64 {
        match self {
            SpaceModel::Interval { lo, hi, .. } => hi - lo,
            SpaceModel::PointCloud { weights, .. } => crate::numeric::pairwise_sum(weights),
        }
    }

    /// Metric between cells (between cell centers for intervals).
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match self {
            SpaceModel::Interval { .. } => (self.cell_center(a) - self.cell_center(b)).abs(),
            SpaceModel::PointCloud { distances, .. } => distances[a][b],
        }
    }

    /// Center of an interval cell; for point clouds the "center" is a
    /// normalized index in `[0, 1]`, used only to build smooth test fields.
    pub fn cell_center(&self, cell: usize) -> f64 {
        match self {
            SpaceModel::Interval { lo, hi, cells } => {
                lo + (hi - lo) * (cell as f64 + 0.5) / *cells as f64
            }
            SpaceModel::PointCloud { weights, .. } => {
                if weights.len() == 1 {
                    0.0
                } else {
                    cell as f64 / (weights.len() - 1) as f64
                }
            }
        }
    }

    /// Index of the interval cell containing `x` (clamped to the range).
    pub fn cell_containing(&self, x: f64) -> Result<usize> {
        match self {
            SpaceModel::Interval { lo, hi, cells } => {
                let frac = (x - lo) / (hi - lo);
                let idx = (frac * *cells as f64).floor() as isize;
                Ok(idx.clamp(0, *cells as isize - 1) as usize)
            }
            SpaceModel::PointCloud { .. } => Err(GymError::InvalidSpace(
                "cell_containing needs an interval space".into(),
            )),
        }
    }

    pub fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.num_cells() {
            return Err(GymError::CellOutOfRange {
                cell,
                cells: self.num_cells(),
            });
        }
        Ok(())
    }

    pub fn is_interval(&self) -> bool {
        matches!(self, SpaceModel::Interval { .. })
    }

    /// Interval bounds, if this is an interval space.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            SpaceModel::Interval { lo, hi, .. } => Some((*lo, *hi)),
            SpaceModel::PointCloud { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_measure_and_metric() {
        let s = SpaceModel::interval(0.0, 1.0, 4).unwrap();
        assert_eq!(s.num_cells(), 4);
        assert!((s.cell_measure(0) - 0.25).abs() < 1e-15);
        assert!((s.total_mass() - 1.0).abs() < 1e-15);
        assert!((s.cell_center(0) - 0.125).abs() < 1e-15);
        assert!((s.distance(0, 3) - 0.75).abs() < 1e-15);
        assert_eq!(s.cell_containing(0.6).unwrap(), 2);
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(SpaceModel::interval(1.0, 1.0, 4).is_err());
        assert!(SpaceModel::interval(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn point_cloud_invariants() {
        let ok = SpaceModel::point_cloud(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        );
        assert!(ok.is_ok());

        let asym = SpaceModel::point_cloud(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0],
            vec![vec![0.0, 1.0], vec![2.0, 0.0]],
        );
        assert!(asym.is_err());

        let neg_weight = SpaceModel::point_cloud(
            vec!["a".into(), "b".into()],
            vec![1.0, 0.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        );
        assert!(neg_weight.is_err());

        // 0 -> 2 direct distance larger than the path through 1.
        let tri = SpaceModel::point_cloud(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1.0, 1.0, 1.0],
            vec![
                vec![0.0, 1.0, 5.0],
                vec![1.0, 0.0, 1.0],
                vec![5.0, 1.0, 0.0],
            ],
        );
        assert!(tri.is_err());
    }
}
