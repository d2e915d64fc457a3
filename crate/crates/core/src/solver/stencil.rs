//! Conservative cell-centered stencils with zero-flux (reflected ghost) boundaries.

use crate::model::GridDomain;

/// Copy of a field padded by one ghost layer per side of every active axis.
///
/// Ghost values equal the adjacent interior value, so the discrete normal
/// derivative vanishes on every boundary face.
#[derive(Debug, Clone, Default)]
pub struct GhostField {
    data: Vec<f64>,
    gx: usize,
    two_d: bool,
}

impl GhostField {
    pub fn fill(&mut self, f: &[f64], domain: &GridDomain) {
        let (nx, ny) = (domain.nx(), domain.ny());
        self.two_d = domain.dimension() == 2;
        self.gx = nx + 2;
        let gy = if self.two_d { ny + 2 } else { 1 };
        self.data.resize(self.gx * gy, 0.0);
        let off = usize::from(self.two_d);
        for j in 0..ny {
            let row = (j + off) * self.gx;
            let src = &f[j * nx..(j + 1) * nx];
            self.data[row + 1..row + 1 + nx].copy_from_slice(src);
            self.data[row] = src[0];
            self.data[row + nx + 1] = src[nx - 1];
        }
        if self.two_d {
            let gx = self.gx;
            self.data.copy_within(gx..2 * gx, 0);
            self.data.copy_within(ny * gx..(ny + 1) * gx, (ny + 1) * gx);
        }
    }

    /// Value at interior cell `(i, j)` shifted by `(di, dj)`, ghosts included.
    #[inline]
    pub fn at(&self, i: usize, j: usize, di: isize, dj: isize) -> f64 {
        let off = isize::from(self.two_d);
        let gi = (i as isize + 1 + di) as usize;
        let gj = (j as isize + off + dj) as usize;
        self.data[gj * self.gx + gi]
    }
}

/// `out = Delta_h f` using `ghost` as scratch.
pub fn laplacian_into(ghost: &mut GhostField, f: &[f64], domain: &GridDomain, out: &mut [f64]) {
    ghost.fill(f, domain);
    let (nx, ny) = (domain.nx(), domain.ny());
    let ihx2 = 1.0 / (domain.spacing(0) * domain.spacing(0));
    let ihy2 = if domain.dimension() == 2 {
        1.0 / (domain.spacing(1) * domain.spacing(1))
    } else {
        0.0
    };
    for j in 0..ny {
        for i in 0..nx {
            let c = ghost.at(i, j, 0, 0);
            let mut s = (ghost.at(i, j, -1, 0) - 2.0 * c + ghost.at(i, j, 1, 0)) * ihx2;
            if ihy2 != 0.0 {
                s += (ghost.at(i, j, 0, -1) - 2.0 * c + ghost.at(i, j, 0, 1)) * ihy2;
            }
            out[j * nx + i] = s;
        }
    }
}

/// Discrete Neumann Laplacian: `(f_{i-1} - 2 f_i + f_{i+1}) / h^2`, 5-point in 2D.
pub fn laplacian_neumann(f: &[f64], domain: &GridDomain) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    laplacian_into(&mut GhostField::default(), f, domain, &mut out);
    out
}

/// `out = -div(chi u grad v)` with first-order upwinding of `u` on each face.
///
/// Face velocity `w = chi (v_R - v_L) / h`; the face takes `u` from the cell
/// the flow leaves. Boundary faces carry no flux.
pub fn chemotaxis_into(u: &[f64], v: &[f64], domain: &GridDomain, chi: f64, out: &mut [f64]) {
    let (nx, ny) = (domain.nx(), domain.ny());
    out.iter_mut().for_each(|o| *o = 0.0);
    if chi == 0.0 {
        return;
    }
    let hx = domain.spacing(0);
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx - 1 {
            let (l, r) = (row + i, row + i + 1);
            let w = chi * (v[r] - v[l]) / hx;
            let flux = if w >= 0.0 { w * u[l] } else { w * u[r] };
            out[l] -= flux / hx;
            out[r] += flux / hx;
        }
    }
    if domain.dimension() == 2 {
        let hy = domain.spacing(1);
        for j in 0..ny - 1 {
            for i in 0..nx {
                let (b, t) = (j * nx + i, (j + 1) * nx + i);
                let w = chi * (v[t] - v[b]) / hy;
                let flux = if w >= 0.0 { w * u[b] } else { w * u[t] };
                out[b] -= flux / hy;
                out[t] += flux / hy;
            }
        }
    }
}

pub fn chemotaxis_divergence(u: &[f64], v: &[f64], domain: &GridDomain, chi: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    chemotaxis_into(u, v, domain, chi, &mut out);
    out
}

/// Midpoint-rule integral of `u` over the domain (fixed summation order).
pub fn nonlocal_mass(u: &[f64], domain: &GridDomain) -> f64 {
    u.iter().sum::<f64>() * domain.cell_volume()
}

/// Largest `|f_R - f_L| / h` over interior faces, per axis.
pub fn max_face_gradient(f: &[f64], domain: &GridDomain) -> [f64; 2] {
    let (nx, ny) = (domain.nx(), domain.ny());
    let mut g = [0.0f64; 2];
    let hx = domain.spacing(0);
    for j in 0..ny {
        for i in 0..nx - 1 {
            let k = j * nx + i;
            g[0] = g[0].max((f[k + 1] - f[k]).abs() / hx);
        }
    }
    if domain.dimension() == 2 {
        let hy = domain.spacing(1);
        for j in 0..ny - 1 {
            for i in 0..nx {
                let k = j * nx + i;
                g[1] = g[1].max((f[k + nx] - f[k]).abs() / hy);
            }
        }
    }
    g
}
