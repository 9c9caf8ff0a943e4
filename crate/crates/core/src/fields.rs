//! Spatially correlated Gaussian log-conductivity fields.
//!
//! Covariances are evaluated between cell centres of a regular grid. Node
//! `k = j * nx + i` sits at `((i + ½)·Δx, (j + ½)·Δy)`, so storage is
//! row-major with `x` varying fastest.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{jittered_cholesky, sorted_symmetric_eigen};
use crate::prelude::*;
use crate::rng;
use crate::{Error, Result};

/// Regular rectangular grid of `nx × ny` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub length_x: f64,
    pub length_y: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, length_x: f64, length_y: f64) -> Result<Self> {
        let g = Self { nx, ny, length_x, length_y };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid needs at least 2 cells per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.length_x > 0.0 && self.length_y > 0.0) || !self.length_x.is_finite() || !self.length_y.is_finite() {
            return Err(Error::InvalidSpec("domain extents must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn dx(&self) -> f64 {
        self.length_x / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.length_y / self.ny as f64
    }

    /// Cell-centre x coordinate of column `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        (self.x(k % self.nx), self.y(k / self.nx))
    }

    /// Cell containing the point, clamped to the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let i = ((x / self.dx()).floor().max(0.0) as usize).min(self.nx - 1);
        let j = ((y / self.dy()).floor().max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.length_x).contains(&x) && (0.0..=self.length_y).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `σ² exp(−|Δx|/l_x − |Δy|/l_y)`
    SeparableExponential,
    /// `σ² exp(−√(Δx²/l_x² + Δy²/l_y²))`
    IsotropicExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSpec {
    pub variance: f64,
    pub corr_len_x: f64,
    pub corr_len_y: f64,
    pub kernel: KernelKind,
    pub mean: f64,
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0) || !self.variance.is_finite() {
            return Err(Error::InvalidSpec(format!("variance must be >= 0, got {}", self.variance)));
        }
        if !(self.corr_len_x > 0.0 && self.corr_len_y > 0.0) {
            return Err(Error::InvalidSpec("correlation lengths must be positive".into()));
        }
        if !self.mean.is_finite() {
            return Err(Error::InvalidSpec("mean must be finite".into()));
        }
        Ok(())
    }

    /// Covariance between two points separated by `(dx, dy)`.
    pub fn eval(&self, dx: f64, dy: f64) -> f64 {
        let (ax, ay) = (dx.abs() / self.corr_len_x, dy.abs() / self.corr_len_y);
        match self.kernel {
            KernelKind::SeparableExponential => self.variance * (-ax - ay).exp(),
            KernelKind::IsotropicExponential => self.variance * (-(ax * ax + ay * ay).sqrt()).exp(),
        }
    }
}

/// Dense covariance matrix between all cell centres.
///
/// Only the upper triangle is evaluated; the lower one is mirrored so the
/// result is exactly symmetric.
pub fn build_covariance(grid: &GridSpec, spec: &CovarianceSpec) -> Result<DMatrix<f64>> {
    grid.validate()?;
    spec.validate()?;
    let n = grid.n_nodes();
    let mut c = DMatrix::zeros(n, n);
    for a in 0..n {
        let (xa, ya) = grid.coords(a);
        for b in a..n {
            let (xb, yb) = grid.coords(b);
            let v = spec.eval(xa - xb, ya - yb);
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    Ok(c)
}

/// Truncated Karhunen–Loève basis of a discretised covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlBasis {
    pub grid: GridSpec,
    /// Retained eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// One orthonormal vector per retained term, each of length `grid.n_nodes()`.
    pub eigenvectors: Vec<Vec<f64>>,
    pub n_terms: usize,
    pub retained_fraction: f64,
    pub mean_field: Vec<f64>,
}

impl KlBasis {
    /// `Y = Ȳ + Σ √τᵢ sᵢ ξᵢ`.
    pub fn realize(&self, xi: &[f64]) -> Result<FieldRealization> {
        if xi.len() != self.n_terms {
            return Err(Error::DimensionMismatch { expected: self.n_terms, got: xi.len() });
        }
        let mut values = self.mean_field.clone();
        for ((tau, s), &x) in self.eigenvalues.iter().zip(&self.eigenvectors).zip(xi) {
            let w = tau.sqrt() * x;
            if w == 0.0 {
                continue;
            }
            for (v, sk) in values.iter_mut().zip(s) {
                *v += w * sk;
            }
        }
        Ok(FieldRealization { grid: self.grid, values })
    }

    /// KL coordinates of a field; the inverse of [`KlBasis::realize`] on the
    /// retained eigenspace. Terms with zero eigenvalue map to zero.
    pub fn project(&self, field: &FieldRealization) -> Result<Vec<f64>> {
        if field.values.len() != self.mean_field.len() {
            return Err(Error::DimensionMismatch { expected: self.mean_field.len(), got: field.values.len() });
        }
        Ok(self
            .eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(&tau, s)| {
                if tau <= 0.0 {
                    return 0.0;
                }
                let proj: f64 =
                    s.iter().zip(field.values.iter().zip(&self.mean_field)).map(|(sk, (y, m))| sk * (y - m)).sum();
                proj / tau.sqrt()
            })
            .collect())
    }

    /// Truncated covariance diagonal `Σ τᵢ sᵢ(x)²` per node.
    pub fn variance_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.mean_field.len()];
        for (tau, s) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for (dk, sk) in d.iter_mut().zip(s) {
                *dk += tau * sk * sk;
            }
        }
        d
    }
}

/// One log-conductivity field `Y = ln K` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRealization {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl FieldRealization {
    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, values: vec![value; grid.n_nodes()] }
    }

    pub fn conductivity(&self) -> Vec<f64> {
        self.values.iter().map(|y| y.exp()).collect()
    }
}

fn eig_floor(trace: f64, n: usize) -> f64 {
    1e-10 * trace / n as f64
}

fn clamp_eigenvalue(v: f64, floor: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -floor {
        Ok(0.0)
    } else {
        Err(Error::DecompositionFailed(format!("covariance has eigenvalue {v} below -{floor}")))
    }
}

/// Picks a deterministic sign: the largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best.abs() + 1e-12 {
            best = x;
        }
    }
    if best < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// KL basis of an explicit covariance matrix.
pub fn kl_decompose_matrix(cov: &DMatrix<f64>, grid: GridSpec, mean: f64, n_terms: usize) -> Result<KlBasis> {
    let n = cov.nrows();
    if n != grid.n_nodes() {
        return Err(Error::DimensionMismatch { expected: grid.n_nodes(), got: n });
    }
    check_terms(n_terms, n)?;
    let trace = cov.diagonal().sum();
    let floor = eig_floor(trace, n);
    let (vals, vecs) = sorted_symmetric_eigen(cov)?;
    let mut eigenvalues = Vec::with_capacity(n_terms);
    let mut eigenvectors = Vec::with_capacity(n_terms);
    for t in 0..n_terms {
        eigenvalues.push(clamp_eigenvalue(vals[t], floor)?);
        let mut v: Vec<f64> = vecs.column(t).iter().copied().collect();
        fix_sign(&mut v);
        eigenvectors.push(v);
    }
    let retained_fraction = retained(&eigenvalues, trace);
    Ok(KlBasis { grid, eigenvalues, eigenvectors, n_terms, retained_fraction, mean_field: vec![mean; n] })
}

/// KL basis through a dense eigendecomposition of the full covariance.
pub fn kl_decompose_dense(grid: &GridSpec, spec: &CovarianceSpec, n_terms: usize) -> Result<KlBasis> {
    let cov = build_covariance(grid, spec)?;
    kl_decompose_matrix(&cov, *grid, spec.mean, n_terms)
}

/// KL basis of the separable kernel from two 1D eigenproblems.
///
/// The covariance is `C_y ⊗ C_x`, so its eigenpairs are products of the
/// per-axis eigenpairs. Ties are ordered by (value desc, x-index asc,
/// y-index asc).
pub fn kl_decompose_kronecker(grid: &GridSpec, spec: &CovarianceSpec, n_terms: usize) -> Result<KlBasis> {
    grid.validate()?;
    spec.validate()?;
    if spec.kernel != KernelKind::SeparableExponential {
        return Err(Error::InvalidSpec("Kronecker path needs the separable kernel".into()));
    }
    let n = grid.n_nodes();
    check_terms(n_terms, n)?;
    let cx = DMatrix::from_fn(grid.nx, grid.nx, |a, b| (-(grid.x(a) - grid.x(b)).abs() / spec.corr_len_x).exp());
    let cy = DMatrix::from_fn(grid.ny, grid.ny, |a, b| {
        spec.variance * (-(grid.y(a) - grid.y(b)).abs() / spec.corr_len_y).exp()
    });
    let (vx, ux) = sorted_symmetric_eigen(&cx)?;
    let (vy, uy) = sorted_symmetric_eigen(&cy)?;
    let trace = n as f64 * spec.variance;
    let floor = eig_floor(trace, n);

    let mut products: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    for (a, &lx) in vx.iter().enumerate() {
        for (b, &ly) in vy.iter().enumerate() {
            products.push((lx * ly, a, b));
        }
    }
    products.sort_by(|p, q| {
        q.0.partial_cmp(&p.0).unwrap_or(core::cmp::Ordering::Equal).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2))
    });

    let mut eigenvalues = Vec::with_capacity(n_terms);
    let mut eigenvectors = Vec::with_capacity(n_terms);
    for &(lam, a, b) in products.iter().take(n_terms) {
        eigenvalues.push(clamp_eigenvalue(lam, floor)?);
        let mut v = vec![0.0; n];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                v[grid.index(i, j)] = ux[(i, a)] * uy[(j, b)];
            }
        }
        fix_sign(&mut v);
        eigenvectors.push(v);
    }
    let retained_fraction = retained(&eigenvalues, trace);
    Ok(KlBasis { grid: *grid, eigenvalues, eigenvectors, n_terms, retained_fraction, mean_field: vec![spec.mean; n] })
}

/// KL basis for a grid and kernel: the separable kernel takes the Kronecker
/// path, anything else is decomposed densely.
pub fn kl_decompose(grid: &GridSpec, spec: &CovarianceSpec, n_terms: usize) -> Result<KlBasis> {
    match spec.kernel {
        KernelKind::SeparableExponential => kl_decompose_kronecker(grid, spec, n_terms),
        KernelKind::IsotropicExponential => kl_decompose_dense(grid, spec, n_terms),
    }
}

fn check_terms(n_terms: usize, n: usize) -> Result<()> {
    if n_terms == 0 || n_terms > n {
        return Err(Error::InvalidSpec(format!("n_terms must be in 1..={n}, got {n_terms}")));
    }
    Ok(())
}

fn retained(eigenvalues: &[f64], trace: f64) -> f64 {
    if trace <= 0.0 {
        return 1.0;
    }
    (eigenvalues.iter().sum::<f64>() / trace).clamp(0.0, 1.0)
}

/// Draws `Ȳ + L z` with `L Lᵀ = cov` and `z` standard normal.
pub fn sample_field(cov: &DMatrix<f64>, grid: GridSpec, mean: f64, seed: u64) -> Result<FieldRealization> {
    let n = cov.nrows();
    if n != grid.n_nodes() {
        return Err(Error::DimensionMismatch { expected: grid.n_nodes(), got: n });
    }
    if cov.iter().all(|&c| c == 0.0) {
        return Ok(FieldRealization::constant(grid, mean));
    }
    let (chol, _) = jittered_cholesky(cov)?;
    let l = chol.l();
    let mut rng = rng::substream(seed, rng::tag::FIELD);
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut values = vec![mean; n];
    for r in 0..n {
        let mut s = 0.0;
        for c in 0..=r {
            s += l[(r, c)] * z[c];
        }
        values[r] += s;
    }
    Ok(FieldRealization { grid, values })
}
