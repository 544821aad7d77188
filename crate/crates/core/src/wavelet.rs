//! Haar wavelet filters and the transforms `g_j`, `h_j` that map changes in
//! second-order structure onto changes in the mean of a derived panel.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Component;

/// Coarsest scale accepted by [`haar_filter`].
pub const MIN_SCALE: i32 = -20;

/// Default limit on the number of rows in a full panel.
pub const DEFAULT_ROW_CAP: usize = 20_000;

/// Discrete Haar wavelet at scale `j < 0`, of length `2^{-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarFilter {
    scale: i32,
    coefficients: Vec<f64>,
}

impl HaarFilter {
    pub fn scale(&self) -> i32 {
        self.scale
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Magnitude `2^{j/2}` shared by every coefficient.
    pub fn amplitude(&self) -> f64 {
        amplitude(self.scale)
    }
}

fn amplitude(j: i32) -> f64 {
    // exact powers of two, times 1/√2 for odd scales
    if j % 2 == 0 {
        2f64.powi(j / 2)
    } else {
        std::f64::consts::FRAC_1_SQRT_2 * 2f64.powi((j + 1) / 2)
    }
}

pub fn haar_filter(j: i32) -> Result<HaarFilter> {
    if !(MIN_SCALE..=-1).contains(&j) {
        return Err(Error::Scale(j));
    }
    let len = 1usize << (-j);
    let amp = amplitude(j);
    let coefficients = (0..len)
        .map(|l| if l < len / 2 { amp } else { -amp })
        .collect();
    Ok(HaarFilter {
        scale: j,
        coefficients,
    })
}

/// Number of finest scales used: `⌊C · log₂((log₂ T)^υ)⌋`, at least one.
pub fn scale_count_with(len: usize, c: f64, upsilon: f64) -> usize {
    let inner = (len as f64).log2().powf(upsilon);
    let j = (c * inner.log2()).floor();
    if j.is_finite() && j >= 1.0 {
        j as usize
    } else {
        1
    }
}

/// `⌊log₂ log₂ T⌋`, at least one.
pub fn scale_count(len: usize) -> usize {
    scale_count_with(len, 1.0, 1.0)
}

/// Treatment of time points `t < L_j` where the filter runs off the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Mirror the series about its first observation, `x_{1-m} = x_{1+m}`.
    #[default]
    Reflect,
    /// Leave those columns at zero and exclude them from segmentation.
    BurnIn,
}

/// Signed wavelet coefficients `d_t = Σ_l x_{t-l} ψ_{j,l}` for every `t`.
pub fn wavelet_coefficients(series: &[f64], filter: &HaarFilter, boundary: Boundary) -> Result<Vec<f64>> {
    let len = series.len();
    let width = filter.len();
    if len < width {
        return Err(Error::Length(format!(
            "series of length {len} is shorter than the scale {} filter ({width})",
            filter.scale()
        )));
    }
    let half = width / 2;
    let amp = filter.amplitude();
    let at = |idx: isize| -> f64 {
        if idx >= 0 {
            series[idx as usize]
        } else {
            series[(-idx) as usize]
        }
    };
    let mut out = vec![0.0; len];
    let first = match boundary {
        Boundary::Reflect => 0,
        Boundary::BurnIn => width - 1,
    };
    for (t, slot) in out.iter_mut().enumerate().skip(first) {
        let t = t as isize;
        let mut lead = 0.0;
        let mut lag = 0.0;
        for l in 0..half {
            lead += at(t - l as isize);
        }
        for l in half..width {
            lag += at(t - l as isize);
        }
        *slot = amp * (lead - lag);
    }
    Ok(out)
}

/// `g_j(x)_t = |Σ_l x_{t-l} ψ_{j,l}|`, reflected at the left edge.
pub fn transform_g(series: &[f64], j: i32) -> Result<Vec<f64>> {
    let filter = haar_filter(j)?;
    let mut d = wavelet_coefficients(series, &filter, Boundary::Reflect)?;
    d.iter_mut().for_each(|v| *v = v.abs());
    Ok(d)
}

/// `h_j(a, b)_t = |d_{a,t} + s·d_{b,t}|`.
pub fn transform_h(a: &[f64], b: &[f64], j: i32, sign: i8) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Length(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let filter = haar_filter(j)?;
    let da = wavelet_coefficients(a, &filter, Boundary::Reflect)?;
    let db = wavelet_coefficients(b, &filter, Boundary::Reflect)?;
    let s = f64::from(sign.signum());
    Ok(da.iter().zip(&db).map(|(x, y)| (x + s * y).abs()).collect())
}

fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa > 0.0 && sbb > 0.0 {
        Some(sab / (saa * sbb).sqrt())
    } else {
        None
    }
}

/// `s = −sign(cor(a, b))`, with `+1` when the correlation is zero.
pub fn choose_sign(a: &[f64], b: &[f64]) -> Result<i8> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Length("sign selection needs two equal-length series".into()));
    }
    match correlation(a, b) {
        Some(r) if r > 0.0 => Ok(-1),
        Some(_) => Ok(1),
        None => Err(Error::Degenerate("series with zero sample variance".into())),
    }
}

/// Which transforms make up the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanelMode {
    /// `g_j` rows for every series: `J·n` rows.
    #[default]
    Reduced,
    /// `g_j` rows plus `h_j` rows for every pair: `J·n(n+1)/2` rows.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RowKind {
    Auto { series: usize },
    Cross { first: usize, second: usize, sign: i8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub scale: i32,
    pub kind: RowKind,
}

/// Options for [`build_panel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    /// Scales to include, finest first (`-1, -2, ...`).
    pub scales: Vec<i32>,
    pub mode: PanelMode,
    pub boundary: Boundary,
    pub row_cap: usize,
}

impl PanelSpec {
    /// Scales `-1..=-j_star` with default boundary and row cap.
    pub fn finest(j_star: usize, mode: PanelMode) -> Self {
        Self {
            scales: (1..=j_star as i32).map(|j| -j).collect(),
            mode,
            boundary: Boundary::Reflect,
            row_cap: DEFAULT_ROW_CAP,
        }
    }

    pub fn single(scale: i32, mode: PanelMode, boundary: Boundary, row_cap: usize) -> Self {
        Self {
            scales: vec![scale],
            mode,
            boundary,
            row_cap,
        }
    }

    /// Rows the spec produces for `n` series.
    pub fn row_count(&self, n: usize) -> usize {
        let per_scale = match self.mode {
            PanelMode::Reduced => n,
            PanelMode::Full => n * (n + 1) / 2,
        };
        per_scale * self.scales.len()
    }

    /// First one-based time index unaffected by the left boundary.
    pub fn valid_start(&self) -> usize {
        match self.boundary {
            Boundary::Reflect => 1,
            Boundary::BurnIn => self
                .scales
                .iter()
                .map(|j| 1usize << (-j))
                .max()
                .unwrap_or(1),
        }
    }
}

/// Panel of transformed series `y_{ℓt}`, stored row-major with the
/// per-row scaling `σ_ℓ = (T⁻¹ Σ_t y²_{ℓt})^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPanel {
    rows: usize,
    len: usize,
    values: Vec<f64>,
    meta: Vec<RowMeta>,
    sigmas: Vec<f64>,
    source: Component,
    j_star: usize,
    valid_start: usize,
}

impl WaveletPanel {
    /// Wraps an arbitrary `rows × T` matrix for direct segmentation. Row
    /// metadata is reported as scale `-1`, `Auto`.
    pub fn from_matrix(values: &DMatrix<f64>, source: Component) -> Result<Self> {
        let (rows, len) = values.shape();
        if rows == 0 || len < 2 {
            return Err(Error::Dimension(format!("{rows} × {len} panel is too small")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("panel contains non-finite values".into()));
        }
        let mut flat = Vec::with_capacity(rows * len);
        for r in 0..rows {
            flat.extend(values.row(r).iter());
        }
        let meta = (0..rows)
            .map(|i| RowMeta {
                scale: -1,
                kind: RowKind::Auto { series: i },
            })
            .collect();
        Ok(Self::assemble(rows, len, flat, meta, source, 1, 1))
    }

    fn assemble(
        rows: usize,
        len: usize,
        values: Vec<f64>,
        meta: Vec<RowMeta>,
        source: Component,
        j_star: usize,
        valid_start: usize,
    ) -> Self {
        let span = (len + 1 - valid_start) as f64;
        let sigmas = values
            .chunks_exact(len)
            .map(|row| (row[valid_start - 1..].iter().map(|v| v * v).sum::<f64>() / span).sqrt())
            .collect();
        Self {
            rows,
            len,
            values,
            meta,
            sigmas,
            source,
            j_star,
            valid_start,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Row `ℓ` over all `T` time points.
    pub fn row(&self, l: usize) -> &[f64] {
        &self.values[l * self.len..(l + 1) * self.len]
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn source(&self) -> Component {
        self.source
    }

    pub fn j_star(&self) -> usize {
        self.j_star
    }

    /// First one-based time index available to segmentation.
    pub fn valid_start(&self) -> usize {
        self.valid_start
    }
}

/// Transforms an `n × T` component matrix into a [`WaveletPanel`].
///
/// For each scale the `g_j` rows of every series come first, followed in
/// full mode by the `h_j` rows for pairs `i < i'` in lexicographic order.
/// Pair signs are chosen from the sample correlation of the component
/// series; pairs with a constant member use `+1`.
pub fn build_panel(source: &DMatrix<f64>, spec: &PanelSpec, component: Component) -> Result<WaveletPanel> {
    let (n, len) = source.shape();
    if spec.scales.is_empty() {
        return Err(Error::Config("at least one wavelet scale is required".into()));
    }
    let rows = spec.row_count(n);
    if rows > spec.row_cap {
        return Err(Error::Resource(format!(
            "panel would have {rows} rows (cap {}); use the reduced panel mode",
            spec.row_cap
        )));
    }
    let filters = spec
        .scales
        .iter()
        .map(|&j| haar_filter(j))
        .collect::<Result<Vec<_>>>()?;
    if let Some(f) = filters.iter().find(|f| f.len() > len) {
        return Err(Error::Length(format!(
            "series of length {len} is shorter than the scale {} filter",
            f.scale()
        )));
    }
    let series: Vec<Vec<f64>> = (0..n).map(|i| source.row(i).iter().copied().collect()).collect();

    // coefficients[scale][series]
    let coefficients: Vec<Vec<Vec<f64>>> = filters
        .iter()
        .map(|f| {
            series
                .par_iter()
                .map(|x| wavelet_coefficients(x, f, spec.boundary))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize, i8)> = match spec.mode {
        PanelMode::Reduced => Vec::new(),
        PanelMode::Full => {
            let mut pairs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
            for a in 0..n {
                for b in a + 1..n {
                    let s = choose_sign(&series[a], &series[b]).unwrap_or(1);
                    pairs.push((a, b, s));
                }
            }
            pairs
        }
    };

    let mut values = Vec::with_capacity(rows * len);
    let mut meta = Vec::with_capacity(rows);
    for (f, coeffs) in filters.iter().zip(&coefficients) {
        for (i, d) in coeffs.iter().enumerate() {
            values.extend(d.iter().map(|v| v.abs()));
            meta.push(RowMeta {
                scale: f.scale(),
                kind: RowKind::Auto { series: i },
            });
        }
        for &(a, b, s) in &pairs {
            let sf = f64::from(s);
            values.extend(coeffs[a].iter().zip(&coeffs[b]).map(|(x, y)| (x + sf * y).abs()));
            meta.push(RowMeta {
                scale: f.scale(),
                kind: RowKind::Cross {
                    first: a,
                    second: b,
                    sign: s,
                },
            });
        }
    }
    Ok(WaveletPanel::assemble(
        rows,
        len,
        values,
        meta,
        component,
        spec.scales.len(),
        spec.valid_start(),
    ))
}
