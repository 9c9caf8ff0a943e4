//! Steady saturated flow `∇·(K ∇h) = 0` on cell centres.
//!
//! Prescribed heads act on the left and right domain faces (half a cell from
//! the first and last column); top and bottom are no-flow. Interior face
//! conductivities are harmonic means of the two neighbouring cells.

use serde::{Deserialize, Serialize};

use crate::fields::{FieldRealization, GridSpec};
use crate::prelude::*;
use crate::{Error, Result};

/// Relative residual a flow solve must reach to be accepted.
pub const FLOW_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub left_head: f64,
    pub right_head: f64,
    pub porosity: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { left_head: 12.0, right_head: 11.0, porosity: 0.25 }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.left_head.is_finite() || !self.right_head.is_finite() {
            return Err(Error::InvalidConfig("boundary heads must be finite".into()));
        }
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(Error::InvalidConfig(format!("porosity must be in (0, 1), got {}", self.porosity)));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Face transmissibilities of the five-point stencil.
struct Stencil {
    grid: GridSpec,
    /// `(nx + 1) * ny` x-faces, boundary faces included.
    tx: Vec<f64>,
    /// `nx * (ny + 1)` y-faces; boundary faces are zero.
    ty: Vec<f64>,
}

impl Stencil {
    fn new(grid: GridSpec, k: &[f64]) -> Self {
        let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
        let mut tx = vec![0.0; (nx + 1) * ny];
        let mut ty = vec![0.0; nx * (ny + 1)];
        for j in 0..ny {
            for f in 0..=nx {
                tx[j * (nx + 1) + f] = if f == 0 {
                    k[grid.index(0, j)] * dy / (0.5 * dx)
                } else if f == nx {
                    k[grid.index(nx - 1, j)] * dy / (0.5 * dx)
                } else {
                    harmonic(k[grid.index(f - 1, j)], k[grid.index(f, j)]) * dy / dx
                };
            }
        }
        for f in 1..ny {
            for i in 0..nx {
                ty[f * nx + i] = harmonic(k[grid.index(i, f - 1)], k[grid.index(i, f)]) * dx / dy;
            }
        }
        Self { grid, tx, ty }
    }

    fn tx(&self, face: usize, j: usize) -> f64 {
        self.tx[j * (self.grid.nx + 1) + face]
    }

    fn ty(&self, i: usize, face: usize) -> f64 {
        self.ty[face * self.grid.nx + i]
    }

    /// Net outflow of cell (i, j) for heads `h`, with boundary heads applied.
    fn net_outflow(&self, h: &[f64], i: usize, j: usize, cfg: &FlowConfig) -> f64 {
        let g = &self.grid;
        let hc = h[g.index(i, j)];
        let west = if i == 0 { cfg.left_head } else { h[g.index(i - 1, j)] };
        let east = if i + 1 == g.nx { cfg.right_head } else { h[g.index(i + 1, j)] };
        let mut q = self.tx(i, j) * (hc - west) + self.tx(i + 1, j) * (hc - east);
        if j > 0 {
            q += self.ty(i, j) * (hc - h[g.index(i, j - 1)]);
        }
        if j + 1 < g.ny {
            q += self.ty(i, j + 1) * (hc - h[g.index(i, j + 1)]);
        }
        q
    }
}

/// Symmetric positive-definite band matrix in lower storage.
struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn new(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn at(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert!(c <= r && r - c <= self.bw);
        &mut self.data[r * (self.bw + 1) + (r - c)]
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        if c > r || r - c > self.bw {
            0.0
        } else {
            self.data[r * (self.bw + 1) + (r - c)]
        }
    }

    /// In-place banded Cholesky followed by the two triangular solves.
    fn solve(mut self, mut b: Vec<f64>) -> Result<Vec<f64>> {
        let (n, bw) = (self.n, self.bw);
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = self.get(j, j);
            for k in lo..j {
                let l = self.get(j, k);
                d -= l * l;
            }
            if !(d > 0.0) {
                return Err(Error::SolverFailed(format!("flow matrix not positive definite at row {j}")));
            }
            let d = d.sqrt();
            *self.at(j, j) = d;
            for i in j + 1..(j + bw + 1).min(n) {
                let lo_i = i.saturating_sub(bw);
                let mut s = self.get(i, j);
                for k in lo_i.max(lo)..j {
                    s -= self.get(i, k) * self.get(j, k);
                }
                *self.at(i, j) = s / d;
            }
        }
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.get(i, k) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.get(k, i) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
        Ok(b)
    }
}

/// Steady-state heads per cell (row-major, like the field).
pub fn solve_steady_flow(field: &FieldRealization, cfg: &FlowConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let grid = field.grid;
    grid.validate()?;
    let k = field.conductivity();
    if k.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::SolverFailed("conductivity must be positive and finite".into()));
    }
    let st = Stencil::new(grid, &k);
    let (nx, ny) = (grid.nx, grid.ny);

    // Number cells along the shorter axis first so the half-bandwidth is min(nx, ny).
    let x_major = ny <= nx;
    let order = |i: usize, j: usize| if x_major { i * ny + j } else { j * nx + i };
    let bw = nx.min(ny);
    let n = nx * ny;
    let mut a = BandMatrix::new(n, bw);
    let mut rhs = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            let r = order(i, j);
            let (tw, te) = (st.tx(i, j), st.tx(i + 1, j));
            let mut diag = tw + te;
            if i == 0 {
                rhs[r] += tw * cfg.left_head;
            } else {
                let c = order(i - 1, j);
                if c < r {
                    *a.at(r, c) -= tw;
                }
            }
            if i + 1 == nx {
                rhs[r] += te * cfg.right_head;
            } else {
                let c = order(i + 1, j);
                if c < r {
                    *a.at(r, c) -= te;
                }
            }
            if j > 0 {
                let t = st.ty(i, j);
                diag += t;
                let c = order(i, j - 1);
                if c < r {
                    *a.at(r, c) -= t;
                }
            }
            if j + 1 < ny {
                let t = st.ty(i, j + 1);
                diag += t;
                let c = order(i, j + 1);
                if c < r {
                    *a.at(r, c) -= t;
                }
            }
            *a.at(r, r) = diag;
        }
    }
    let sol = a.solve(rhs.clone())?;
    let mut heads = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            heads[grid.index(i, j)] = sol[order(i, j)];
        }
    }

    let b_norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut res = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            res = res.max(st.net_outflow(&heads, i, j, cfg).abs());
        }
    }
    if b_norm > 0.0 && res / b_norm > FLOW_RESIDUAL_TOL {
        return Err(Error::SolverFailed(format!("relative residual {:e} above tolerance", res / b_norm)));
    }
    Ok(heads)
}

/// Net flux out of every cell for a given head field; zero for a converged
/// solution. Exposed for residual checks.
pub fn flux_divergence(field: &FieldRealization, heads: &[f64], cfg: &FlowConfig) -> Vec<f64> {
    let grid = field.grid;
    let st = Stencil::new(grid, &field.conductivity());
    let mut out = vec![0.0; grid.n_nodes()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            out[grid.index(i, j)] = st.net_outflow(heads, i, j, cfg);
        }
    }
    out
}

/// Pore velocities on cell faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub grid: GridSpec,
    pub porosity: f64,
    /// `v₁` on the `(nx + 1) * ny` x-faces; face `f` of row `j` is at index `j * (nx + 1) + f`.
    pub vx: Vec<f64>,
    /// `v₂` on the `nx * (ny + 1)` y-faces; face `f` of column `i` is at index `f * nx + i`.
    pub vy: Vec<f64>,
}

impl VelocityField {
    pub fn vx_face(&self, face: usize, j: usize) -> f64 {
        self.vx[j * (self.grid.nx + 1) + face]
    }

    pub fn vy_face(&self, i: usize, face: usize) -> f64 {
        self.vy[face * self.grid.nx + i]
    }

    /// Cell-centred velocity from the two bounding faces per axis.
    pub fn cell_velocity(&self, i: usize, j: usize) -> (f64, f64) {
        (0.5 * (self.vx_face(i, j) + self.vx_face(i + 1, j)), 0.5 * (self.vy_face(i, j) + self.vy_face(i, j + 1)))
    }
}

/// `vᵢ = −(Kᵢ/θ) ∂h/∂xᵢ` on faces with harmonic-mean conductivity.
pub fn darcy_velocity(heads: &[f64], field: &FieldRealization, cfg: &FlowConfig) -> Result<VelocityField> {
    let grid = field.grid;
    if heads.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch { expected: grid.n_nodes(), got: heads.len() });
    }
    if !(cfg.porosity > 0.0) {
        return Err(Error::InvalidConfig("porosity must be positive".into()));
    }
    let (nx, ny, dx, dy) = (grid.nx, grid.ny, grid.dx(), grid.dy());
    let theta = cfg.porosity;
    let k = field.conductivity();
    let mut vx = vec![0.0; (nx + 1) * ny];
    let mut vy = vec![0.0; nx * (ny + 1)];
    for j in 0..ny {
        for f in 0..=nx {
            let v = if f == 0 {
                -k[grid.index(0, j)] * (heads[grid.index(0, j)] - cfg.left_head) / (0.5 * dx)
            } else if f == nx {
                -k[grid.index(nx - 1, j)] * (cfg.right_head - heads[grid.index(nx - 1, j)]) / (0.5 * dx)
            } else {
                let kf = harmonic(k[grid.index(f - 1, j)], k[grid.index(f, j)]);
                -kf * (heads[grid.index(f, j)] - heads[grid.index(f - 1, j)]) / dx
            };
            vx[j * (nx + 1) + f] = v / theta;
        }
    }
    for f in 1..ny {
        for i in 0..nx {
            let kf = harmonic(k[grid.index(i, f - 1)], k[grid.index(i, f)]);
            vy[f * nx + i] = -kf * (heads[grid.index(i, f)] - heads[grid.index(i, f - 1)]) / dy / theta;
        }
    }
    Ok(VelocityField { grid, porosity: theta, vx, vy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn grid() -> GridSpec {
        GridSpec::new(11, 6, 20.0, 10.0).unwrap()
    }

    #[test]
    fn homogeneous_head_is_linear() {
        let g = grid();
        let field = FieldRealization::constant(g, 8f64.ln());
        let h = solve_steady_flow(&field, &FlowConfig::default()).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let want = 12.0 - g.x(i) / g.length_x;
                assert!((h[g.index(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn uniform_velocity_for_homogeneous_k() {
        let g = GridSpec::new(41, 21, 20.0, 10.0).unwrap();
        let field = FieldRealization::constant(g, 8f64.ln());
        let cfg = FlowConfig::default();
        let h = solve_steady_flow(&field, &cfg).unwrap();
        let v = darcy_velocity(&h, &field, &cfg).unwrap();
        assert!(v.vx.iter().all(|&x| (x - 1.6).abs() < 1e-10));
        assert!(v.vy.iter().all(|&y| y.abs() < 1e-10));
    }

    #[test]
    fn uniform_head_gives_zero_velocity() {
        let g = grid();
        let field = FieldRealization::constant(g, 1.0);
        let cfg = FlowConfig { left_head: 5.0, right_head: 5.0, porosity: 0.3 };
        let v = darcy_velocity(&vec![5.0; g.n_nodes()], &field, &cfg).unwrap();
        assert!(v.vx.iter().chain(&v.vy).all(|&x| x == 0.0));
    }

    #[test]
    fn velocity_invariant_to_scaling_k_and_porosity() {
        let g = grid();
        let vals: Vec<f64> = (0..g.n_nodes()).map(|k| 1.0 + 0.3 * ((k * 7 % 5) as f64)).collect();
        let f1 = FieldRealization { grid: g, values: vals.clone() };
        let f2 = FieldRealization { grid: g, values: vals.iter().map(|y| y + 2f64.ln()).collect() };
        let c1 = FlowConfig { porosity: 0.2, ..FlowConfig::default() };
        let c2 = FlowConfig { porosity: 0.4, ..FlowConfig::default() };
        let v1 = darcy_velocity(&solve_steady_flow(&f1, &c1).unwrap(), &f1, &c1).unwrap();
        let v2 = darcy_velocity(&solve_steady_flow(&f2, &c2).unwrap(), &f2, &c2).unwrap();
        for (a, b) in v1.vx.iter().zip(&v2.vx).chain(v1.vy.iter().zip(&v2.vy)) {
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn zero_porosity_rejected() {
        let g = grid();
        let field = FieldRealization::constant(g, 1.0);
        let cfg = FlowConfig { porosity: 0.0, ..FlowConfig::default() };
        assert!(matches!(darcy_velocity(&vec![11.0; g.n_nodes()], &field, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn heterogeneous_heads_bounded_by_boundaries() {
        let g = GridSpec::new(15, 9, 20.0, 10.0).unwrap();
        let vals: Vec<f64> = (0..g.n_nodes()).map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.4).collect();
        let field = FieldRealization { grid: g, values: vals };
        let cfg = FlowConfig::default();
        let h = solve_steady_flow(&field, &cfg).unwrap();
        assert!(h.iter().all(|&x| (11.0..=12.0).contains(&x)));
        let div = flux_divergence(&field, &h, &cfg);
        let v = darcy_velocity(&h, &field, &cfg).unwrap();
        let boundary_flux: f64 = (0..g.ny).map(|j| v.vx_face(0, j).abs()).sum::<f64>() * cfg.porosity * g.dy();
        assert!(div.iter().all(|d| d.abs() <= 1e-8 * boundary_flux));
    }

    /// Independent dense assembly of the same finite-volume equations.
    fn dense_oracle(field: &FieldRealization, cfg: &FlowConfig) -> Vec<f64> {
        let g = field.grid;
        let k = field.conductivity();
        let n = g.n_nodes();
        let (dx, dy) = (g.dx(), g.dy());
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let r = g.index(i, j);
                let mut link = |c: Option<usize>, t: f64, hb: f64| {
                    a[(r, r)] += t;
                    match c {
                        Some(c) => a[(r, c)] -= t,
                        None => b[r] += t * hb,
                    }
                };
                let hm = |p: f64, q: f64| 2.0 * p * q / (p + q);
                if i == 0 {
                    link(None, 2.0 * k[r] * dy / dx, cfg.left_head);
                } else {
                    link(Some(r - 1), hm(k[r], k[r - 1]) * dy / dx, 0.0);
                }
                if i + 1 == g.nx {
                    link(None, 2.0 * k[r] * dy / dx, cfg.right_head);
                } else {
                    link(Some(r + 1), hm(k[r], k[r + 1]) * dy / dx, 0.0);
                }
                if j > 0 {
                    link(Some(r - g.nx), hm(k[r], k[r - g.nx]) * dx / dy, 0.0);
                }
                if j + 1 < g.ny {
                    link(Some(r + g.nx), hm(k[r], k[r + g.nx]) * dx / dy, 0.0);
                }
            }
        }
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn checkerboard_matches_dense_oracle() {
        for (nx, ny) in [(8, 5), (5, 8)] {
            let g = GridSpec::new(nx, ny, 20.0, 10.0).unwrap();
            let vals: Vec<f64> =
                (0..g.n_nodes()).map(|k| if (k % nx + k / nx) % 2 == 0 { 1.0f64.ln() } else { 10.0f64.ln() }).collect();
            let field = FieldRealization { grid: g, values: vals };
            let cfg = FlowConfig::default();
            let h = solve_steady_flow(&field, &cfg).unwrap();
            let want = dense_oracle(&field, &cfg);
            for (a, b) in h.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
