//! Thomas algorithm for the implicit diffusion solves.

/// LU factors of a tridiagonal matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    sub: Vec<f64>,
    /// Modified super-diagonal `c'_i`.
    sup_mod: Vec<f64>,
    /// `1 / (b_i - a_i c'_{i-1})`
    pivot_inv: Vec<f64>,
}

impl TridiagonalFactor {
    /// `sub[i]` couples row `i` to `i-1` (`sub[0]` ignored), `sup[i]` couples
    /// row `i` to `i+1` (last ignored). Requires a nonsingular forward sweep,
    /// which holds for the diagonally dominant matrices used here.
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        assert!(n > 0 && sub.len() == n && sup.len() == n);
        let mut sup_mod = vec![0.0; n];
        let mut pivot_inv = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let a = if i == 0 { 0.0 } else { sub[i] };
            let pivot = diag[i] - a * prev;
            debug_assert!(pivot != 0.0, "zero pivot in row {i}");
            pivot_inv[i] = 1.0 / pivot;
            sup_mod[i] = if i + 1 < n { sup[i] * pivot_inv[i] } else { 0.0 };
            prev = sup_mod[i];
        }
        TridiagonalFactor {
            sub: sub.to_vec(),
            sup_mod,
            pivot_inv,
        }
    }

    /// `I - r * L` with `L` the 1D Neumann stencil `[1, -2, 1]` (ends `[-1, 1]`).
    pub fn neumann(n: usize, r: f64) -> Self {
        let mut diag = vec![1.0 + 2.0 * r; n];
        diag[0] = 1.0 + r;
        diag[n - 1] = 1.0 + r;
        let off = vec![-r; n];
        Self::new(&off, &diag, &off)
    }

    pub fn len(&self) -> usize {
        self.pivot_inv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot_inv.is_empty()
    }

    /// Overwrite `rhs` with the solution.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] *= self.pivot_inv[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) * self.pivot_inv[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.sup_mod[i] * rhs[i + 1];
        }
    }
}
