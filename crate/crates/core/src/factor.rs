//! Principal component estimation of the common and idiosyncratic
//! components, with optional capping of eigenvector entries, and the
//! information criterion used to estimate the number of factors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;

/// Tolerance used when checking that a covariance input is symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Residual variances below this fraction of the total variance are treated
/// as exact zeros by the information criterion, so that the noiseless case is
/// not decided by rounding noise.
const RESIDUAL_FLOOR: f64 = 1e-12;

/// Leading eigenpairs of a symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: DVector<f64>,
    /// `n × m`, orthonormal columns.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Inclusive one-based time interval helper shared by the estimators.
fn check_range(len: usize, range: Option<(usize, usize)>, min_len: usize) -> Result<(usize, usize)> {
    let (s, e) = range.unwrap_or((1, len));
    if s < 1 || e > len || e < s || e - s + 1 < min_len {
        return Err(Error::Range { start: s, end: e, len });
    }
    Ok((s, e))
}

/// `(e−s+1)⁻¹ Σ_{t=s}^{e} x_t x_tᵀ` over a one-based inclusive range.
///
/// No demeaning is performed; the panel is expected to be centred.
pub fn sample_covariance(panel: &TimeSeriesPanel, range: Option<(usize, usize)>) -> Result<DMatrix<f64>> {
    let (s, e) = check_range(panel.len(), range, 1)?;
    if range.is_some() && e - s + 1 < 2 {
        return Err(Error::Range { start: s, end: e, len: panel.len() });
    }
    let width = e - s + 1;
    let block = panel.values().columns(s - 1, width);
    let mut cov = &block * block.transpose();
    cov /= width as f64;
    // exact symmetry
    let n = cov.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = avg;
            cov[(j, i)] = avg;
        }
    }
    Ok(cov)
}

/// Top-`m` eigenpairs of a symmetric matrix.
///
/// Each eigenvector is signed so that its entry of largest magnitude is
/// positive (first such entry on ties), making the output deterministic.
pub fn leading_eigen(cov: &DMatrix<f64>, m: usize) -> Result<EigenSystem> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::Input(format!("{}×{} matrix is not square", n, cov.ncols())));
    }
    if m < 1 || m > n {
        return Err(Error::Dimension(format!("requested {m} eigenpairs of a {n}×{n} matrix")));
    }
    let scale = cov.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(Error::Input(format!(
                    "matrix is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }

    let eig = SymmetricEigen::new(cov.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = DVector::zeros(m);
    let mut eigenvectors = DMatrix::zeros(n, m);
    for (dst, &src) in order.iter().take(m).enumerate() {
        eigenvalues[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[(i, dst)] = sign * col[i];
        }
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvector matrix after capping, with a flag per entry that was clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct CappedEigenvectors {
    pub vectors: DMatrix<f64>,
    pub active: DMatrix<bool>,
}

/// Clamps every entry of the eigenvectors to `±c_w/√n`, keeping its sign.
pub fn cap_eigenvectors(eig: &EigenSystem, c_w: f64, n: usize) -> CappedEigenvectors {
    let bound = c_w / (n as f64).sqrt();
    let w = &eig.eigenvectors;
    let mut vectors = w.clone();
    let mut active = DMatrix::from_element(w.nrows(), w.ncols(), false);
    for (idx, v) in vectors.iter_mut().enumerate() {
        if v.abs() > bound {
            *v = v.signum() * bound;
            active[idx] = true;
        }
    }
    CappedEigenvectors { vectors, active }
}

/// How the capping constant `c_w` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum CapRule {
    /// `c_w = +∞`: eigenvectors are used as they are.
    #[default]
    Disabled,
    /// A fixed positive constant.
    Constant(f64),
    /// `c_w = √n · max_{j ≤ r̲, i} |ŵ_ij|` with `r̲` from the screening
    /// information criterion.
    DataDriven,
}

/// Capped-PCA split of a panel into common and idiosyncratic parts.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorDecomposition {
    pub k: usize,
    /// `n × k`, `λ̂_ij = √n · w̃_ij`.
    pub loadings: DMatrix<f64>,
    /// `k × T`, `f̂_jt = n^{-1/2} ⟨w̃_j, x_t⟩`.
    pub factors: DMatrix<f64>,
    pub common: DMatrix<f64>,
    pub idiosyncratic: DMatrix<f64>,
    /// `+∞` when capping is disabled.
    pub cap_constant: f64,
    pub capping_active: DMatrix<bool>,
}

/// A fitted PCA over one time range; the eigensolve is shared by every
/// factor count requested from it.
#[derive(Debug, Clone)]
pub struct Pca {
    range: (usize, usize),
    eigen: EigenSystem,
}

impl Pca {
    /// Eigendecomposition of the sample covariance over `range` (whole
    /// sample when `None`).
    pub fn fit(panel: &TimeSeriesPanel, range: Option<(usize, usize)>) -> Result<Self> {
        let cov = sample_covariance(panel, range)?;
        let range = range.unwrap_or((1, panel.len()));
        let eigen = leading_eigen(&cov, panel.n())?;
        Ok(Self { range, eigen })
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eigen
    }

    pub fn range(&self) -> (usize, usize) {
        self.range
    }

    /// `√n · max_{j ≤ r_lower, i} |ŵ_ij|`.
    pub fn data_driven_cap(&self, r_lower: usize) -> f64 {
        let w = &self.eigen.eigenvectors;
        let r = r_lower.clamp(1, w.ncols());
        let max = w.columns(0, r).amax();
        (w.nrows() as f64).sqrt() * max
    }

    /// `k`-factor decomposition over the fitted range. `cap = None` disables
    /// capping.
    pub fn decompose(&self, panel: &TimeSeriesPanel, k: usize, cap: Option<f64>) -> Result<FactorDecomposition> {
        let n = panel.n();
        if k < 1 || k >= n {
            return Err(Error::Dimension(format!("factor count {k} must lie in 1..{n}")));
        }
        if let Some(c) = cap {
            if !(c > 0.0) {
                return Err(Error::Config(format!("capping constant must be positive, got {c}")));
            }
        }
        let top = EigenSystem {
            eigenvalues: self.eigen.eigenvalues.rows(0, k).into_owned(),
            eigenvectors: self.eigen.eigenvectors.columns(0, k).into_owned(),
        };
        let (w, capping_active, cap_constant) = match cap {
            Some(c) => {
                let capped = cap_eigenvectors(&top, c, n);
                (capped.vectors, capped.active, c)
            }
            None => (
                top.eigenvectors,
                DMatrix::from_element(n, k, false),
                f64::INFINITY,
            ),
        };
        let (s, e) = self.range;
        let x = panel.values().columns(s - 1, e - s + 1);
        let scores = w.transpose() * x;
        let common = &w * &scores;
        let idiosyncratic = x - &common;
        let sqrt_n = (n as f64).sqrt();
        Ok(FactorDecomposition {
            k,
            loadings: &w * sqrt_n,
            factors: scores / sqrt_n,
            common,
            idiosyncratic,
            cap_constant,
            capping_active,
        })
    }
}

/// Maximum factor count considered when screening:
/// `max(20, ⌊√(n∧T)⌋)`, clipped below `n ∧ T`.
pub fn max_factor_count(n: usize, len: usize) -> usize {
    let m = n.min(len);
    let r = 20usize.max((m as f64).sqrt().floor() as usize);
    r.min(n.saturating_sub(1)).min(len.saturating_sub(1)).max(1)
}

/// Convenience wrapper: fit on the whole sample and decompose with `k`
/// factors.
pub fn decompose(panel: &TimeSeriesPanel, k: usize, cap: CapRule) -> Result<FactorDecomposition> {
    let pca = Pca::fit(panel, None)?;
    let c = match cap {
        CapRule::Disabled => None,
        CapRule::Constant(c) => Some(c),
        CapRule::DataDriven => {
            let r_max = max_factor_count(panel.n(), panel.len());
            let r_lower = bai_ng_factor_number(panel, None, r_max, Penalty::Screen)?;
            Some(pca.data_driven_cap(r_lower))
        }
    };
    pca.decompose(panel, k, c)
}

/// Penalty term of the information criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    /// `(n∧T)⁻¹ log(n∧T)`.
    Screen,
    /// `(n+√T)/(n√T) · logᵃ(n ∧ √T)`.
    Segment(f64),
}

impl Penalty {
    /// Per-factor penalty for a panel of `n` series over `len` time points.
    pub fn value(self, n: usize, len: usize) -> f64 {
        let nf = n as f64;
        let tf = len as f64;
        match self {
            Penalty::Screen => {
                let m = nf.min(tf);
                m.ln() / m
            }
            Penalty::Segment(a) => {
                let rt = tf.sqrt();
                (nf + rt) / (nf * rt) * nf.min(rt).ln().powf(a)
            }
        }
    }
}

/// Information criterion `log V(k) + k·p(n,T)` for `k = 1..=r_max`, where
/// `V(k)` is the residual mean square of the `k`-factor PCA fit on `range`.
pub fn information_criterion(
    panel: &TimeSeriesPanel,
    range: Option<(usize, usize)>,
    r_max: usize,
    penalty: Penalty,
) -> Result<Vec<f64>> {
    let (s, e) = check_range(panel.len(), range, 2)?;
    let width = e - s + 1;
    let n = panel.n();
    if r_max < 1 || r_max >= n.min(width) {
        return Err(Error::Dimension(format!(
            "r_max = {r_max} must lie in 1..{}",
            n.min(width)
        )));
    }
    let cov = sample_covariance(panel, Some((s, e)))?;
    let eig = leading_eigen(&cov, n)?;
    let total = cov.trace();
    let floor = RESIDUAL_FLOOR * total.max(f64::MIN_POSITIVE);
    let p = penalty.value(n, width);
    let mut explained = 0.0;
    let mut out = Vec::with_capacity(r_max);
    for k in 1..=r_max {
        explained += eig.eigenvalues[k - 1];
        let v = ((total - explained) / n as f64).max(floor / n as f64);
        out.push(v.ln() + k as f64 * p);
    }
    Ok(out)
}

/// `argmin_{1≤k≤r_max}` of [`information_criterion`]; the smallest `k` wins
/// ties.
pub fn bai_ng_factor_number(
    panel: &TimeSeriesPanel,
    range: Option<(usize, usize)>,
    r_max: usize,
    penalty: Penalty,
) -> Result<usize> {
    let ic = information_criterion(panel, range, r_max, penalty)?;
    let mut best = 0;
    for (k, v) in ic.iter().enumerate() {
        if *v < ic[best] {
            best = k;
        }
    }
    Ok(best + 1)
}
