//! Sparse polynomial chaos expansions.
//!
//! Each output component gets its own expansion. Candidate terms come from a
//! hyperbolic (q-norm) truncation of the tensor basis; least-angle regression
//! orders them and an ordinary least-squares refit along the path is scored
//! by the corrected leave-one-out error, which also picks the order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::prelude::*;
use crate::{par, Error, Result};

/// Univariate family of one input coordinate, with its map to the
/// standard variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Coordinate {
    /// Gaussian prior; `z = (x − mean) / std`, probabilists' Hermite.
    Hermite { mean: f64, std: f64 },
    /// Uniform prior; `[low, high]` mapped to `[−1, 1]`, Legendre.
    Legendre { low: f64, high: f64 },
}

impl Coordinate {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Hermite { mean, std } => mean.is_finite() && std > 0.0 && std.is_finite(),
            Self::Legendre { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid PCE coordinate {self:?}")))
        }
    }

    pub fn standardize(&self, x: f64) -> f64 {
        match *self {
            Self::Hermite { mean, std } => (x - mean) / std,
            Self::Legendre { low, high } => 2.0 * (x - low) / (high - low) - 1.0,
        }
    }

    /// Orthonormal polynomials of degree `0..=max_degree` at the standard
    /// variable `z`, written into `out`.
    pub fn polynomials(&self, z: f64, max_degree: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        if max_degree == 0 {
            return;
        }
        match self {
            Self::Hermite { .. } => {
                // He_{k+1} = z He_k − k He_{k−1}, then divide by √(k!).
                let (mut p0, mut p1) = (1.0, z);
                out.push(z);
                let mut fact = 1.0;
                for k in 1..max_degree {
                    let p2 = z * p1 - k as f64 * p0;
                    fact *= (k + 1) as f64;
                    out.push(p2 / fact.sqrt());
                    p0 = p1;
                    p1 = p2;
                }
            }
            Self::Legendre { .. } => {
                // (k+1) P_{k+1} = (2k+1) z P_k − k P_{k−1}, then scale by √(2k+1).
                let (mut p0, mut p1) = (1.0, z);
                out.push(z * 3f64.sqrt());
                for k in 1..max_degree {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
                    out.push(p2 * (2.0 * kf + 3.0).sqrt());
                    p0 = p1;
                    p1 = p2;
                }
            }
        }
    }
}

/// Degrees of one tensor-product basis term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn q_norm(&self, q: f64) -> f64 {
        self.0.iter().map(|&a| f64::from(a).powf(q)).sum::<f64>().powf(1.0 / q)
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceBasisSpec {
    pub coordinates: Vec<Coordinate>,
    pub order: u32,
    pub q_norm: f64,
}

impl PceBasisSpec {
    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coordinates.is_empty() {
            return Err(Error::InvalidSpec("PCE needs at least one input".into()));
        }
        if !(self.q_norm > 0.0 && self.q_norm <= 1.0) {
            return Err(Error::InvalidSpec(format!("q-norm must lie in (0, 1], got {}", self.q_norm)));
        }
        self.coordinates.iter().try_for_each(Coordinate::validate)
    }
}

/// All multi-indices with `‖α‖_q ≤ p`, sorted by total degree then
/// lexicographically.
pub fn build_index_set(spec: &PceBasisSpec) -> Vec<MultiIndex> {
    let dim = spec.dim();
    let budget = f64::from(spec.order).powf(spec.q_norm) * (1.0 + 1e-12);
    let mut out = Vec::new();
    let mut cur = vec![0u32; dim];
    fn rec(d: usize, used: f64, budget: f64, q: f64, p: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if d == cur.len() {
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for a in 0..=p {
            let u = used + f64::from(a).powf(q);
            if u > budget {
                break;
            }
            cur[d] = a;
            rec(d + 1, u, budget, q, p, cur, out);
        }
        cur[d] = 0;
    }
    rec(0, 0.0, budget, spec.q_norm, spec.order, &mut cur, &mut out);
    out.sort_by(|a, b| a.total_degree().cmp(&b.total_degree()).then_with(|| a.cmp(b)));
    out
}

/// Per-dimension orthonormal polynomial tables at one input point.
fn tables(coords: &[Coordinate], m: &[f64], max_degree: usize) -> Vec<Vec<f64>> {
    coords
        .iter()
        .zip(m)
        .map(|(c, &x)| {
            let mut t = Vec::with_capacity(max_degree + 1);
            c.polynomials(c.standardize(x), max_degree, &mut t);
            t
        })
        .collect()
}

fn term(tables: &[Vec<f64>], alpha: &MultiIndex) -> f64 {
    alpha.0.iter().zip(tables).fold(1.0, |acc, (&a, t)| if a == 0 { acc } else { acc * t[a as usize] })
}

/// `ψ_α(m)`: product of the univariate orthonormal polynomials.
pub fn eval_basis(coords: &[Coordinate], alpha: &MultiIndex, m: &[f64]) -> f64 {
    let t = tables(coords, m, alpha.max_degree() as usize);
    term(&t, alpha)
}

/// Design matrix with one row per point and one column per index.
pub fn design_matrix(coords: &[Coordinate], indices: &[MultiIndex], points: &[Vec<f64>]) -> DMatrix<f64> {
    let maxd = indices.iter().map(MultiIndex::max_degree).max().unwrap_or(0) as usize;
    let mut a = DMatrix::zeros(points.len(), indices.len());
    for (r, m) in points.iter().enumerate() {
        let t = tables(coords, m, maxd);
        for (c, alpha) in indices.iter().enumerate() {
            a[(r, c)] = term(&t, alpha);
        }
    }
    a
}

/// Least-angle regression on the columns of a design matrix.
///
/// Columns are centred and scaled to unit norm, the response is centred, and
/// an intercept is carried separately, so a constant column never enters.
/// Each call to [`Lars::step`] admits one column and advances the
/// equiangular direction until the next column ties in correlation.
pub struct Lars {
    z: DMatrix<f64>,
    means: Vec<f64>,
    norms: Vec<f64>,
    y_mean: f64,
    residual: DVector<f64>,
    beta: Vec<f64>,
    active: Vec<usize>,
    usable: Vec<bool>,
    pending: Option<usize>,
    max_active: usize,
    done: bool,
}

impl Lars {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 {
            return Err(Error::InvalidSpec("design has no columns".into()));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        let mut z = x.clone();
        let mut means = vec![0.0; p];
        let mut norms = vec![0.0; p];
        let mut usable = vec![false; p];
        for j in 0..p {
            let col = x.column(j);
            let m = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
            let scale = col.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            means[j] = m;
            norms[j] = ss.sqrt();
            usable[j] = norms[j] > 1e-10 * scale.max(f64::MIN_POSITIVE) * (n as f64).sqrt();
            for i in 0..n {
                z[(i, j)] = if usable[j] { (x[(i, j)] - m) / norms[j] } else { 0.0 };
            }
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let residual = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let n_usable = usable.iter().filter(|&&u| u).count();
        let mut s = Self {
            z,
            means,
            norms,
            y_mean,
            residual,
            beta: vec![0.0; p],
            active: Vec::new(),
            usable,
            pending: None,
            max_active: n_usable.min(n.saturating_sub(1)),
            done: false,
        };
        s.pending = s.most_correlated();
        s.done = s.pending.is_none() || s.max_active == 0;
        Ok(s)
    }

    fn correlations(&self) -> DVector<f64> {
        self.z.tr_mul(&self.residual)
    }

    fn most_correlated(&self) -> Option<usize> {
        let c = self.correlations();
        let scale = self.residual.norm();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..c.len() {
            if !self.usable[j] || self.active.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, b)| c[j].abs() > b) {
                best = Some((j, c[j].abs()));
            }
        }
        best.filter(|&(_, v)| v > 1e-13 * scale.max(f64::MIN_POSITIVE) && scale > 0.0).map(|(j, _)| j)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Columns in the order they entered.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Intercept and coefficients of the current LARS estimate on the
    /// original column scale.
    pub fn coefficients(&self) -> (f64, Vec<f64>) {
        let beta: Vec<f64> = self
            .beta
            .iter()
            .zip(&self.norms)
            .zip(&self.usable)
            .map(|((b, n), &u)| if u { b / n } else { 0.0 })
            .collect();
        let intercept = self.y_mean - beta.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        (intercept, beta)
    }

    /// Admits the next column. Returns `None` once the path is complete.
    pub fn step(&mut self) -> Result<Option<usize>> {
        if self.done {
            return Ok(None);
        }
        let Some(j_new) = self.pending.take() else {
            self.done = true;
            return Ok(None);
        };
        self.active.push(j_new);
        let c = self.correlations();
        let big_c = self.active.iter().map(|&j| c[j].abs()).fold(0.0f64, f64::max);
        let k = self.active.len();
        let signs: Vec<f64> = self.active.iter().map(|&j| if c[j] >= 0.0 { 1.0 } else { -1.0 }).collect();
        let xa = DMatrix::from_fn(self.z.nrows(), k, |i, a| signs[a] * self.z[(i, self.active[a])]);
        let gram = xa.tr_mul(&xa);
        let chol = gram.cholesky().ok_or(Error::SingularDesign)?;
        let l = chol.l();
        let min_pivot = (0..k).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(min_pivot > 1e-7) {
            return Err(Error::SingularDesign);
        }
        let g1 = chol.solve(&DVector::from_element(k, 1.0));
        let big_a = 1.0 / g1.sum().sqrt();
        let w = g1 * big_a;
        let u = &xa * &w;
        let a = self.z.tr_mul(&u);

        let mut gamma = big_c / big_a;
        let mut next = None;
        if k < self.max_active {
            for j in 0..c.len() {
                if !self.usable[j] || self.active.contains(&j) {
                    continue;
                }
                for g in [(big_c - c[j]) / (big_a - a[j]), (big_c + c[j]) / (big_a + a[j])] {
                    if g > 1e-12 * (big_c / big_a) && g < gamma {
                        gamma = g;
                        next = Some(j);
                    }
                }
            }
        }
        self.residual -= &u * gamma;
        for (idx, &j) in self.active.iter().enumerate() {
            self.beta[j] += gamma * signs[idx] * w[idx];
        }
        self.pending = next;
        if next.is_none() {
            self.done = true;
        }
        Ok(Some(j_new))
    }
}

/// One point on a LARS path.
#[derive(Debug, Clone, PartialEq)]
pub struct LarsStep {
    pub entered: usize,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Runs LARS to completion and returns every step.
pub fn lars_select(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<LarsStep>> {
    let mut lars = Lars::new(x, y)?;
    let mut path = Vec::new();
    while let Some(entered) = lars.step()? {
        let (intercept, coefficients) = lars.coefficients();
        path.push(LarsStep { entered, intercept, coefficients });
    }
    Ok(path)
}

/// Least-squares fit with its leave-one-out diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LooFit {
    pub coefficients: Vec<f64>,
    /// `(1/N) Σ ((y_i − ŷ_i)/(1 − h_i))²`.
    pub mean_squared: f64,
    /// `N/(N − Q) · (1 + tr((AᵀA)⁻¹))`.
    pub correction: f64,
    /// Unbiased sample variance of `y`.
    pub variance: f64,
}

impl LooFit {
    /// Plain leave-one-out error relative to the response variance.
    pub fn uncorrected(&self) -> f64 {
        self.mean_squared / self.normaliser()
    }

    /// Corrected leave-one-out error relative to the response variance.
    pub fn corrected(&self) -> f64 {
        self.mean_squared * self.correction / self.normaliser()
    }

    fn normaliser(&self) -> f64 {
        if self.variance > 0.0 {
            self.variance
        } else {
            1.0
        }
    }
}

/// OLS fit of `y` on the columns of `a` via QR, with the hat-matrix
/// leave-one-out shortcut and its small-sample correction.
pub fn loo_error(a: &DMatrix<f64>, y: &[f64]) -> Result<LooFit> {
    let (n, q) = a.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n <= q {
        return Err(Error::Underdetermined { points: n, terms: q });
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let qm = qr.q();
    let rmax = (0..q).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if (0..q).any(|i| !(r[(i, i)].abs() > 1e-10 * rmax)) {
        return Err(Error::SingularDesign);
    }
    let yv = DVector::from_column_slice(y);
    let qty = qm.tr_mul(&yv);
    let coef = r.solve_upper_triangular(&qty).ok_or(Error::SingularDesign)?;
    let rinv = r.solve_upper_triangular(&DMatrix::identity(q, q)).ok_or(Error::SingularDesign)?;
    let fitted = &qm * &qty;
    let y_scale = y.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut sum = 0.0;
    for i in 0..n {
        let res = y[i] - fitted[i];
        if res.abs() <= 1e-13 * y_scale {
            continue;
        }
        let h = qm.row(i).norm_squared();
        let denom = 1.0 - h;
        if denom <= 1e-12 {
            sum = f64::INFINITY;
            break;
        }
        sum += (res / denom) * (res / denom);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let variance = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(LooFit {
        coefficients: coef.iter().copied().collect(),
        mean_squared: sum / n as f64,
        correction: n as f64 / (n - q) as f64 * (1.0 + rinv.norm_squared()),
        variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PceConfig {
    /// Candidate total orders; the one with the lowest LOO error is kept.
    pub orders: Vec<u32>,
    pub q_norm: f64,
    /// Path steps without LOO improvement before stopping.
    pub patience: usize,
}

impl Default for PceConfig {
    fn default() -> Self {
        Self { orders: vec![2, 3, 4], q_norm: 0.75, patience: 2 }
    }
}

impl PceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() {
            return Err(Error::InvalidConfig("pce.orders must not be empty".into()));
        }
        if !(self.q_norm > 0.0 && self.q_norm <= 1.0) {
            return Err(Error::InvalidConfig("pce.q_norm must lie in (0, 1]".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("pce.patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sparse expansion of one output component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceOutput {
    pub order: u32,
    pub indices: Vec<MultiIndex>,
    pub coefficients: Vec<f64>,
    pub loo_error: f64,
    /// Size of the candidate set the terms were selected from.
    pub candidates: usize,
}

impl PceOutput {
    fn max_degree(&self) -> usize {
        self.indices.iter().map(MultiIndex::max_degree).max().unwrap_or(0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceSurrogate {
    pub coordinates: Vec<Coordinate>,
    pub q_norm: f64,
    pub outputs: Vec<PceOutput>,
}

impl PceSurrogate {
    pub fn n_inputs(&self) -> usize {
        self.coordinates.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Retained-term design matrix of output `k` at the given points.
    pub fn retained_design(&self, k: usize, points: &[Vec<f64>]) -> DMatrix<f64> {
        design_matrix(&self.coordinates, &self.outputs[k].indices, points)
    }

    /// Retained basis values of every output at `m`.
    pub fn basis_values(&self, m: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(m)?;
        let maxd = self.outputs.iter().map(PceOutput::max_degree).max().unwrap_or(0);
        let t = tables(&self.coordinates, m, maxd);
        Ok(self.outputs.iter().map(|o| o.indices.iter().map(|a| term(&t, a)).collect()).collect())
    }

    fn check_dim(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), got: m.len() });
        }
        Ok(())
    }
}

/// `ŷ_k = Σ_j c_{k,j} ψ_j(m)`.
pub fn pce_predict(s: &PceSurrogate, m: &[f64]) -> Result<Vec<f64>> {
    Ok(s.basis_values(m)?
        .iter()
        .zip(&s.outputs)
        .map(|(psi, o)| psi.iter().zip(&o.coefficients).map(|(p, c)| p * c).sum())
        .collect())
}

/// Best LARS-OLS model along one path, scored by corrected LOO.
fn fit_path(a: &DMatrix<f64>, y: &[f64], patience: usize) -> Result<(Vec<usize>, LooFit)> {
    let n = a.nrows();
    // Column 0 is the constant term; it is always kept in the refit.
    let subset = |cols: &[usize]| DMatrix::from_fn(n, cols.len(), |i, c| a[(i, cols[c])]);
    let mut cols = vec![0usize];
    let mut best = (cols.clone(), loo_error(&subset(&cols), y)?);
    let mut best_loo = best.1.corrected();
    let mut stale = 0;
    let mut lars = Lars::new(&a.columns(1, a.ncols() - 1).into_owned(), y)?;
    while stale < patience && cols.len() + 1 < n {
        match lars.step() {
            Ok(Some(j)) => cols.push(j + 1),
            Ok(None) | Err(Error::SingularDesign) => break,
            Err(e) => return Err(e),
        }
        let fit = match loo_error(&subset(&cols), y) {
            Ok(f) => f,
            Err(Error::SingularDesign) => break,
            Err(e) => return Err(e),
        };
        let loo = fit.corrected();
        if loo < best_loo * (1.0 - 1e-9) - 1e-15 {
            best_loo = loo;
            best = (cols.clone(), fit);
            stale = 0;
        } else {
            stale += 1;
        }
    }
    Ok(best)
}

fn fit_output(sets: &[(u32, Vec<MultiIndex>, DMatrix<f64>)], y: &[f64], cfg: &PceConfig) -> Result<PceOutput> {
    let mut best: Option<PceOutput> = None;
    let mut last_err = None;
    for (order, indices, a) in sets {
        match fit_path(a, y, cfg.patience) {
            Ok((cols, fit)) => {
                let loo = fit.corrected();
                if best.as_ref().is_none_or(|b| loo < b.loo_error * (1.0 - 1e-9) - 1e-15) {
                    best = Some(PceOutput {
                        order: *order,
                        indices: cols.iter().map(|&c| indices[c].clone()).collect(),
                        coefficients: fit.coefficients,
                        loo_error: loo,
                        candidates: indices.len(),
                    });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| Error::FitFailed(format!("every candidate order failed: {:?}", last_err)))
}

/// Fits one sparse expansion per output component.
///
/// `outputs[i]` is the response vector at `points[i]`.
pub fn pce_fit(
    coords: &[Coordinate],
    points: &[Vec<f64>],
    outputs: &[Vec<f64>],
    cfg: &PceConfig,
) -> Result<PceSurrogate> {
    cfg.validate()?;
    coords.iter().try_for_each(Coordinate::validate)?;
    let n = points.len();
    if outputs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: outputs.len() });
    }
    if n < 2 {
        return Err(Error::Underdetermined { points: n, terms: 1 });
    }
    let dim = coords.len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
    }
    let n_out = outputs[0].len();
    if let Some(o) = outputs.iter().find(|o| o.len() != n_out) {
        return Err(Error::DimensionMismatch { expected: n_out, got: o.len() });
    }
    if n < 3 * dim {
        log::warn!("PCE fit with {n} points for {dim} inputs; at least {} recommended", 3 * dim);
    }
    let sets: Vec<_> = cfg
        .orders
        .iter()
        .map(|&order| {
            let spec = PceBasisSpec { coordinates: coords.to_vec(), order, q_norm: cfg.q_norm };
            let idx = build_index_set(&spec);
            let a = design_matrix(coords, &idx, points);
            (order, idx, a)
        })
        .collect();
    let fits = par::map(n_out, |k| {
        let y: Vec<f64> = outputs.iter().map(|o| o[k]).collect();
        fit_output(&sets, &y, cfg)
    });
    let outputs = fits.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PceSurrogate { coordinates: coords.to_vec(), q_norm: cfg.q_norm, outputs })
}
