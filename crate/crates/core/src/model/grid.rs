use serde::{Deserialize, Serialize};

use super::ModelError;

/// Smallest admissible cell count along any axis.
pub const MIN_CELLS: usize = 4;

/// Rectangular domain `(0, L1) [x (0, L2)]` with a uniform cell-centered grid.
///
/// Fields are stored row-major: cell `(i, j)` lives at `j * nx + i`, with `i`
/// running along the first axis. In 1D `ny == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct GridDomain {
    lengths: [f64; 2],
    cells: [usize; 2],
    dimension: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
}

impl TryFrom<GridSpec> for GridDomain {
    type Error = ModelError;

    fn try_from(spec: GridSpec) -> Result<Self, Self::Error> {
        GridDomain::new(&spec.lengths, &spec.cells)
    }
}

impl From<GridDomain> for GridSpec {
    fn from(d: GridDomain) -> Self {
        GridSpec {
            lengths: d.lengths[..d.dimension].to_vec(),
            cells: d.cells[..d.dimension].to_vec(),
        }
    }
}

impl GridDomain {
    pub fn new(lengths: &[f64], cells: &[usize]) -> Result<Self, ModelError> {
        let dimension = lengths.len();
        if !(1..=2).contains(&dimension) {
            return Err(ModelError::invalid(
                "domain.lengths",
                format!("dimension must be 1 or 2, got {dimension}"),
            ));
        }
        if cells.len() != dimension {
            return Err(ModelError::invalid(
                "domain.cells",
                format!("expected {dimension} entries, got {}", cells.len()),
            ));
        }
        for (k, &l) in lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(ModelError::invalid(
                    "domain.lengths",
                    format!("axis {k} length must be positive and finite, got {l}"),
                ));
            }
        }
        for (k, &n) in cells.iter().enumerate() {
            if n < MIN_CELLS {
                return Err(ModelError::invalid(
                    "domain.cells",
                    format!("axis {k} needs at least {MIN_CELLS} cells, got {n}"),
                ));
            }
        }
        let mut l = [1.0; 2];
        let mut n = [1usize; 2];
        l[..dimension].copy_from_slice(lengths);
        n[..dimension].copy_from_slice(cells);
        Ok(GridDomain {
            lengths: l,
            cells: n,
            dimension,
        })
    }

    pub fn interval(length: f64, cells: usize) -> Result<Self, ModelError> {
        Self::new(&[length], &[cells])
    }

    pub fn rectangle(lengths: [f64; 2], cells: [usize; 2]) -> Result<Self, ModelError> {
        Self::new(&lengths, &cells)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    /// Cells along the second axis; 1 in 1D.
    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.cells[axis] as f64
    }

    /// Volume (length in 1D, area in 2D) of a single cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dimension).map(|k| self.spacing(k)).product()
    }

    /// `|Omega|`.
    pub fn measure(&self) -> f64 {
        self.lengths[..self.dimension].iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    /// Inverse of [`GridDomain::index`].
    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    /// Cell-center coordinates; the second component is 0 in 1D.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.split_index(idx);
        let x = (i as f64 + 0.5) * self.spacing(0);
        let y = if self.dimension == 2 {
            (j as f64 + 0.5) * self.spacing(1)
        } else {
            0.0
        };
        [x, y]
    }

    pub fn centers(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |idx| self.center(idx))
    }

    /// Points of the closed domain used for extremum sampling: cell centers
    /// and cell faces along each axis, boundary included (`2N + 1` per axis).
    pub fn closure_samples(&self) -> Vec<[f64; 2]> {
        let axis = |k: usize| -> Vec<f64> {
            if k >= self.dimension {
                return vec![0.0];
            }
            let n = 2 * self.cells[k];
            let half = 0.5 * self.spacing(k);
            (0..=n)
                .map(|m| if m == n { self.lengths[k] } else { m as f64 * half })
                .collect()
        };
        let xs = axis(0);
        let ys = axis(1);
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                out.push([x, y]);
            }
        }
        out
    }

    /// Same grid with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self, ModelError> {
        let cells: Vec<usize> = self.cells[..self.dimension]
            .iter()
            .map(|&n| n * factor)
            .collect();
        Self::new(&self.lengths[..self.dimension], &cells)
    }

    /// Average a field given on `self.refined(factor)` back onto `self`.
    pub fn restrict(&self, fine: &[f64], factor: usize) -> Vec<f64> {
        let fnx = self.nx() * factor;
        let fy = if self.dimension == 2 { factor } else { 1 };
        let weight = 1.0 / (factor * fy) as f64;
        let mut out = vec![0.0; self.len()];
        for j in 0..self.ny() {
            for i in 0..self.nx() {
                let mut acc = 0.0;
                for b in 0..fy {
                    let row = (j * fy + b) * fnx;
                    for a in 0..factor {
                        acc += fine[row + i * factor + a];
                    }
                }
                out[self.index(i, j)] = acc * weight;
            }
        }
        out
    }
}
