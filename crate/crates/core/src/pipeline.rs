//! The full detection procedure: factor-number screening, change-point
//! detection in the common and idiosyncratic components, and post-detection
//! analysis of the segments between common change-points.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{block_length, build_threshold_tree, pooled_probability, BlockScaling, ResampleSource, SbConfig};
use crate::error::{Error, Result};
use crate::factor::{bai_ng_factor_number, leading_eigen, max_factor_count, sample_covariance, CapRule, Pca, Penalty};
use crate::factor::FactorDecomposition;
use crate::panel::TimeSeriesPanel;
use crate::segment::{
    cusum, dcbs_within, default_max_depth, default_trim, profile, Aggregation, ChangePoint, ChangePointSet,
    SegmentationParams,
};
use crate::wavelet::{build_panel, scale_count, Boundary, PanelMode, PanelSpec, DEFAULT_ROW_CAP};
use crate::{rng, Component};

/// Smallest panel accepted by [`detect`].
pub const MIN_SERIES: usize = 4;
pub const MIN_LENGTH: usize = 32;

/// How the wavelet scales enter segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleStrategy {
    /// All scales `-1..=-J*` stacked into one panel.
    #[default]
    Simultaneous,
    /// Scale `-1` on the whole sample, then each coarser scale within the
    /// segments found so far, until a scale adds nothing.
    Sequential,
}

/// Pipeline configuration. Every field has a default; see
/// [`DetectConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Demean each series before analysis.
    pub center: bool,
    pub panel_mode: PanelMode,
    pub boundary: Boundary,
    pub scales: ScaleStrategy,
    pub cap: CapRule,
    /// Number of scales; `⌊log₂ log₂ T⌋` when absent.
    pub j_star: Option<usize>,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Trim `d_T`; `⌊min(log² T, 0.25 T^{6/7})⌋` when absent.
    #[serde(rename = "d_T")]
    pub d_t: Option<usize>,
    /// Minimum distance between change-points; defaults to `d_T`.
    pub min_gap: Option<usize>,
    /// Deepest segmentation level; `⌊log₂ T / 2⌋` when absent.
    pub max_depth: Option<usize>,
    /// Explicit factor-number candidates replacing the screening range.
    pub candidates: Option<Vec<usize>>,
    /// Exponent `a` of the segment-wise information criterion penalty.
    pub segment_penalty: f64,
    pub c_grid: Vec<f64>,
    pub row_cap: usize,
    pub aggregation: Aggregation,
    /// Keep every bootstrap statistic (memory grows with `R`).
    pub retain_replicates: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            center: true,
            panel_mode: PanelMode::Reduced,
            boundary: Boundary::Reflect,
            scales: ScaleStrategy::Simultaneous,
            cap: CapRule::Disabled,
            j_star: None,
            replicates: 200,
            alpha: 0.05,
            seed: 0,
            d_t: None,
            min_gap: None,
            max_depth: None,
            candidates: None,
            segment_penalty: 2.0,
            c_grid: (10..=19).map(|i| i as f64 * 0.05).collect(),
            row_cap: DEFAULT_ROW_CAP,
            aggregation: Aggregation::Dc,
            retain_replicates: false,
        }
    }
}

impl DetectConfig {
    /// Parses a TOML document; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.j_star == Some(0) || self.d_t == Some(0) || self.max_depth == Some(0) {
            return Err(Error::Config("j_star, d_T and max_depth must be positive".into()));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(Error::Config(format!("c_grid values must lie in (0, 1), got {c}")));
        }
        if let CapRule::Constant(c) = self.cap {
            if !(c > 0.0) {
                return Err(Error::Config(format!("capping constant must be positive, got {c}")));
            }
        }
        if matches!(&self.candidates, Some(c) if c.is_empty()) {
            return Err(Error::Config("candidate list is empty".into()));
        }
        if !self.segment_penalty.is_finite() {
            return Err(Error::Config("segment penalty exponent must be finite".into()));
        }
        Ok(())
    }
}

/// Factor-number candidates examined by the screening step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningRange {
    pub r_lower: usize,
    pub r_upper: usize,
    pub candidates: Vec<usize>,
}

/// `r̲` from the information criterion with `r_max = r̄`.
pub fn screening_range(panel: &TimeSeriesPanel) -> Result<ScreeningRange> {
    let (n, len) = (panel.n(), panel.len());
    if n < MIN_SERIES || len < MIN_LENGTH {
        return Err(Error::Dimension(format!(
            "panel is {n} × {len}; detection needs at least {MIN_SERIES} series and {MIN_LENGTH} time points"
        )));
    }
    let r_upper = max_factor_count(n, len);
    let r_lower = bai_ng_factor_number(panel, None, r_upper, Penalty::Screen)?;
    Ok(ScreeningRange {
        r_lower,
        r_upper,
        candidates: (r_lower..=r_upper).collect(),
    })
}

/// Parameters derived from the configuration and the panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub n: usize,
    #[serde(rename = "T")]
    pub len: usize,
    #[serde(rename = "d_T")]
    pub d_t: usize,
    pub min_gap: usize,
    pub j_star: usize,
    pub max_depth: usize,
    pub range: ScreeningRange,
    pub cap_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRun {
    pub k: usize,
    pub changepoints: Vec<ChangePoint>,
    pub cardinality: usize,
    /// Whether every location is also detected with `k*` factors.
    pub subset_of_k_star: bool,
    pub block_probabilities: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakClass {
    LoadingOrNumberBreak,
    AutocorrelationOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub start: usize,
    pub end: usize,
    pub r_hat: Option<usize>,
    /// Type of the change-point closing this segment, if any.
    pub classification: Option<BreakClass>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KbcTable {
    pub c_grid: Vec<f64>,
    pub segments: Vec<(usize, usize)>,
    /// `values[b][c]`.
    pub values: Vec<Vec<usize>>,
}

/// Aggregated statistic at every split of the root interval.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Profile {
    /// Split point of the first entry.
    pub start: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DcProfiles {
    pub common: Profile,
    pub idiosyncratic: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub config: DetectConfig,
    pub resolved: ResolvedParameters,
    pub screening: Vec<ScreeningRun>,
    pub k_star: usize,
    pub common_changepoints: Vec<ChangePoint>,
    pub idio_changepoints: Vec<ChangePoint>,
    pub segments: Vec<SegmentReport>,
    pub kbc: KbcTable,
    pub profiles: DcProfiles,
}

impl DetectionReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn common_locations(&self) -> Vec<usize> {
        self.common_changepoints.iter().map(|p| p.location).collect()
    }

    pub fn idio_locations(&self) -> Vec<usize> {
        self.idio_changepoints.iter().map(|p| p.location).collect()
    }

    /// Screening run for factor count `k`.
    pub fn run(&self, k: usize) -> Option<&ScreeningRun> {
        self.screening.iter().find(|r| r.k == k)
    }
}

/// Settings shared by every detection chain of one analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSettings {
    pub mode: PanelMode,
    pub boundary: Boundary,
    pub row_cap: usize,
    pub j_star: usize,
    pub strategy: ScaleStrategy,
    pub params: SegmentationParams,
    pub replicates: usize,
    pub alpha: f64,
    pub retain_replicates: bool,
}

impl ChainSettings {
    fn spec(&self, scales: Vec<i32>) -> PanelSpec {
        PanelSpec {
            scales,
            mode: self.mode,
            boundary: self.boundary,
            row_cap: self.row_cap,
        }
    }
}

/// Runs wavelet transform, bootstrap thresholding and segmentation on one
/// component matrix. `key` identifies the chain in the random substreams.
pub fn detect_component(
    x: &DMatrix<f64>,
    source: &ResampleSource<'_>,
    component: Component,
    settings: &ChainSettings,
    seed: u64,
    key: &[u64],
) -> Result<ChangePointSet> {
    let len = x.ncols();
    let run = |spec: &PanelSpec, root: (usize, usize), extra: &[u64]| -> Result<ChangePointSet> {
        let panel = build_panel(x, spec, component)?;
        let root = (root.0.max(panel.valid_start()), root.1);
        if root.1 <= root.0 {
            return Ok(ChangePointSet {
                points: Vec::new(),
                origin: Some(component),
            });
        }
        let mut path = key.to_vec();
        path.extend_from_slice(extra);
        let sb = SbConfig {
            replicates: settings.replicates,
            alpha: settings.alpha,
            seed: rng::derive_key(seed, &path),
            retain_replicates: settings.retain_replicates,
        };
        let tree = build_threshold_tree(&panel, source, root, &sb, spec, &settings.params)?;
        dcbs_within(&panel, &tree, &settings.params, root)
    };

    match settings.strategy {
        ScaleStrategy::Simultaneous => {
            let scales = (1..=settings.j_star as i32).map(|j| -j).collect();
            run(&settings.spec(scales), (1, len), &[])
        }
        ScaleStrategy::Sequential => {
            let deepest = ((len as f64).log2().floor() as i32 - 2).max(1);
            let mut points: Vec<ChangePoint> = Vec::new();
            for j in 1..=deepest {
                let spec = settings.spec(vec![-j]);
                let mut bounds = vec![0];
                bounds.extend(points.iter().map(|p| p.location));
                bounds.push(len);
                let mut found = Vec::new();
                for w in bounds.windows(2) {
                    let root = (w[0] + 1, w[1]);
                    if root.1 <= root.0 {
                        continue;
                    }
                    let set = run(&spec, root, &[j as u64, root.0 as u64])?;
                    found.extend(set.points);
                }
                if found.is_empty() && j > 1 {
                    break;
                }
                points.extend(found);
                points.sort_by_key(|p| p.location);
            }
            Ok(ChangePointSet {
                points,
                origin: Some(component),
            })
        }
    }
}

fn factor_probabilities(factors: &DMatrix<f64>) -> Vec<f64> {
    (0..factors.nrows())
        .map(|j| {
            let f: Vec<f64> = factors.row(j).iter().copied().collect();
            block_length(&f, BlockScaling::Fifth).unwrap_or(1.0)
        })
        .collect()
}

/// Pooled block probability of the rows of `x`; constant rows count as
/// independent.
pub fn pooled_block_probability(x: &DMatrix<f64>) -> f64 {
    let ps: Vec<f64> = (0..x.nrows())
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            block_length(&row, BlockScaling::Fifth).unwrap_or(1.0)
        })
        .collect();
    pooled_probability(&ps)
}

/// Common-component chain for factor count `k`.
pub fn common_chain(
    decomposition: &FactorDecomposition,
    settings: &ChainSettings,
    seed: u64,
) -> Result<(ChangePointSet, Vec<f64>)> {
    let probabilities = factor_probabilities(&decomposition.factors);
    let source = ResampleSource::Factors {
        loadings: &decomposition.loadings,
        factors: &decomposition.factors,
        probabilities: &probabilities,
    };
    let key = [decomposition.k as u64, Component::Common.tag()];
    let set = detect_component(&decomposition.common, &source, Component::Common, settings, seed, &key)?;
    Ok((set, probabilities))
}

/// Idiosyncratic-component chain.
pub fn idio_chain(decomposition: &FactorDecomposition, settings: &ChainSettings, seed: u64) -> Result<ChangePointSet> {
    let eps = &decomposition.idiosyncratic;
    let source = ResampleSource::Joint {
        values: eps,
        probability: pooled_block_probability(eps),
    };
    let key = [decomposition.k as u64, Component::Idiosyncratic.tag()];
    detect_component(eps, &source, Component::Idiosyncratic, settings, seed, &key)
}

/// `k* = max{k : |B̂χ(k)| = max_k' |B̂χ(k')|}` over the `(k, count)` pairs.
pub fn select_k_star(counts: &[(usize, usize)]) -> Option<usize> {
    let best = counts.iter().map(|c| c.1).max()?;
    counts.iter().filter(|c| c.1 == best).map(|c| c.0).max()
}

/// Segments `[1, η₁], [η₁+1, η₂], ..., [η_B+1, T]`.
pub fn segments_from(points: &[usize], len: usize) -> Vec<(usize, usize)> {
    let mut bounds = vec![0];
    bounds.extend(points.iter().copied().filter(|&p| p >= 1 && p < len));
    bounds.sort_unstable();
    bounds.dedup();
    bounds.push(len);
    bounds.windows(2).map(|w| (w[0] + 1, w[1])).collect()
}

/// Per-segment factor number and PCA fit.
#[derive(Debug, Clone)]
pub struct SegmentResult {
    pub start: usize,
    pub end: usize,
    pub r_hat: Option<usize>,
    pub decomposition: Option<FactorDecomposition>,
    pub note: Option<String>,
}

fn segment_factor_number(
    panel: &TimeSeriesPanel,
    range: (usize, usize),
    r_upper: usize,
    exponent: f64,
) -> Result<usize> {
    let len = range.1 + 1 - range.0;
    let r_max = r_upper.min(panel.n() - 1).min(len - 1).max(1);
    bai_ng_factor_number(panel, Some(range), r_max, Penalty::Segment(exponent))
}

/// Factor number `r̂_b` and PCA decomposition of each segment between
/// `common_points`. Segments shorter than `r_upper + 2` are skipped.
pub fn segment_analysis(
    panel: &TimeSeriesPanel,
    common_points: &[usize],
    r_upper: usize,
    exponent: f64,
) -> Result<Vec<SegmentResult>> {
    segments_from(common_points, panel.len())
        .into_iter()
        .map(|(s, e)| {
            let len = e + 1 - s;
            if len < r_upper + 2 {
                log::warn!("segment [{s}, {e}] is shorter than {} points; skipped", r_upper + 2);
                return Ok(SegmentResult {
                    start: s,
                    end: e,
                    r_hat: None,
                    decomposition: None,
                    note: Some(format!("shorter than {} points", r_upper + 2)),
                });
            }
            let r = segment_factor_number(panel, (s, e), r_upper, exponent)?;
            let decomposition = Pca::fit(panel, Some((s, e)))?.decompose(panel, r, None)?;
            Ok(SegmentResult {
                start: s,
                end: e,
                r_hat: Some(r),
                decomposition: Some(decomposition),
                note: None,
            })
        })
        .collect()
}

/// Compares the factor numbers of two adjacent segments with that of their
/// union.
pub fn classify_break(
    panel: &TimeSeriesPanel,
    left: (usize, usize),
    right: (usize, usize),
    r_upper: usize,
    exponent: f64,
) -> Result<BreakClass> {
    if left.1 + 1 != right.0 {
        return Err(Error::Input(format!(
            "segments [{}, {}] and [{}, {}] are not adjacent",
            left.0, left.1, right.0, right.1
        )));
    }
    for (s, e) in [left, right] {
        if e + 1 - s < r_upper + 2 {
            return Err(Error::Length(format!("segment [{s}, {e}] is shorter than {} points", r_upper + 2)));
        }
    }
    let l = segment_factor_number(panel, left, r_upper, exponent)?;
    let r = segment_factor_number(panel, right, r_upper, exponent)?;
    let p = segment_factor_number(panel, (left.0, right.1), r_upper, exponent)?;
    Ok(if l == r && r == p {
        BreakClass::AutocorrelationOnly
    } else {
        BreakClass::LoadingOrNumberBreak
    })
}

/// Smallest `k` whose leading eigenvalues explain more than a fraction `c`
/// of the first `q_b = (n−1) ∧ (len_b − 1)` eigenvalues of each segment's
/// covariance.
pub fn kbc_table(panel: &TimeSeriesPanel, common_points: &[usize], c_grid: &[f64]) -> Result<KbcTable> {
    if let Some(c) = c_grid.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
        return Err(Error::Config(format!("c values must lie in (0, 1), got {c}")));
    }
    let segments = segments_from(common_points, panel.len());
    let mut values = Vec::with_capacity(segments.len());
    for &(s, e) in &segments {
        let q = (panel.n() - 1).min(e - s);
        if q == 0 {
            return Err(Error::Length(format!("segment [{s}, {e}] is degenerate")));
        }
        let cov = sample_covariance(panel, Some((s, e)))?;
        let eig = leading_eigen(&cov, panel.n())?;
        let mu: Vec<f64> = eig.eigenvalues.iter().take(q).map(|v| v.max(0.0)).collect();
        values.push(cumulative_counts(&mu, c_grid));
    }
    Ok(KbcTable {
        c_grid: c_grid.to_vec(),
        segments,
        values,
    })
}

/// For each `c`, the smallest `k` with `Σ_{j≤k} μ_j / Σ_j μ_j > c`.
pub fn cumulative_counts(mu: &[f64], c_grid: &[f64]) -> Vec<usize> {
    let total: f64 = mu.iter().sum();
    c_grid
        .iter()
        .map(|&c| {
            if !(total > 0.0) {
                return 1;
            }
            let mut acc = 0.0;
            for (k, m) in mu.iter().enumerate() {
                acc += m;
                if acc / total > c {
                    return k + 1;
                }
            }
            mu.len()
        })
        .collect()
}

fn root_profile(x: &DMatrix<f64>, spec: &PanelSpec, component: Component, agg: Aggregation) -> Result<Profile> {
    let panel = build_panel(x, spec, component)?;
    let start = panel.valid_start();
    match cusum(&panel, start, panel.len()) {
        Ok(c) => Ok(Profile {
            start,
            values: profile(&c, agg),
        }),
        Err(Error::Degenerate(_)) => Ok(Profile::default()),
        Err(e) => Err(e),
    }
}

/// Resolves defaults against the panel dimensions.
pub fn resolve(panel: &TimeSeriesPanel, cfg: &DetectConfig) -> Result<(ResolvedParameters, ChainSettings, Pca)> {
    cfg.validate()?;
    let (n, len) = (panel.n(), panel.len());
    let mut range = screening_range(panel)?;
    if let Some(c) = &cfg.candidates {
        if let Some(k) = c.iter().find(|&&k| k < 1 || k >= n) {
            return Err(Error::Config(format!("candidate factor count {k} must lie in 1..{n}")));
        }
        let mut c = c.clone();
        c.sort_unstable();
        c.dedup();
        range.candidates = c;
    }
    let d_t = cfg.d_t.unwrap_or_else(|| default_trim(len));
    let min_gap = cfg.min_gap.unwrap_or(d_t);
    let j_star = cfg.j_star.unwrap_or_else(|| scale_count(len));
    let max_depth = cfg.max_depth.unwrap_or_else(|| default_max_depth(len));
    let pca = Pca::fit(panel, None)?;
    let cap_constant = match cfg.cap {
        CapRule::Disabled => None,
        CapRule::Constant(c) => Some(c),
        CapRule::DataDriven => Some(pca.data_driven_cap(range.r_lower)),
    };
    let settings = ChainSettings {
        mode: cfg.panel_mode,
        boundary: cfg.boundary,
        row_cap: cfg.row_cap,
        j_star,
        strategy: cfg.scales,
        params: SegmentationParams {
            trim: d_t,
            min_gap,
            max_depth,
            aggregation: cfg.aggregation,
        },
        replicates: cfg.replicates,
        alpha: cfg.alpha,
        retain_replicates: cfg.retain_replicates,
    };
    let resolved = ResolvedParameters {
        n,
        len,
        d_t,
        min_gap,
        j_star,
        max_depth,
        range,
        cap_constant,
    };
    Ok((resolved, settings, pca))
}

/// Runs the complete procedure on `panel`.
pub fn detect(panel: &TimeSeriesPanel, cfg: &DetectConfig) -> Result<DetectionReport> {
    let centred;
    let panel = if cfg.center && !panel.is_centered() {
        centred = panel.center();
        &centred
    } else {
        panel
    };
    let (resolved, settings, pca) = resolve(panel, cfg)?;
    let cap = resolved.cap_constant;

    let runs: Vec<(FactorDecomposition, ChangePointSet, Vec<f64>)> = resolved
        .range
        .candidates
        .par_iter()
        .map(|&k| {
            let d = pca.decompose(panel, k, cap)?;
            let (set, ps) = common_chain(&d, &settings, cfg.seed)?;
            log::info!("k = {k}: {} common change-point(s)", set.len());
            Ok((d, set, ps))
        })
        .collect::<Result<_>>()?;

    let counts: Vec<(usize, usize)> = runs.iter().map(|r| (r.0.k, r.1.len())).collect();
    let k_star = select_k_star(&counts).ok_or_else(|| Error::Config("no factor-number candidates".into()))?;
    let star = runs.iter().find(|r| r.0.k == k_star).expect("k* is a candidate");
    let common = star.1.clone();
    let star_locations = common.locations();
    let idio = idio_chain(&star.0, &settings, cfg.seed)?;

    let screening = runs
        .iter()
        .map(|(d, set, ps)| ScreeningRun {
            k: d.k,
            changepoints: set.points.clone(),
            cardinality: set.len(),
            subset_of_k_star: set.locations().iter().all(|l| star_locations.contains(l)),
            block_probabilities: ps.clone(),
        })
        .collect();

    let seg = segment_analysis(panel, &star_locations, resolved.range.r_upper, cfg.segment_penalty)?;
    let mut segments: Vec<SegmentReport> = seg
        .iter()
        .map(|s| SegmentReport {
            start: s.start,
            end: s.end,
            r_hat: s.r_hat,
            classification: None,
            note: s.note.clone(),
        })
        .collect();
    for b in 0..segments.len().saturating_sub(1) {
        if segments[b].r_hat.is_none() || segments[b + 1].r_hat.is_none() {
            continue;
        }
        let left = (segments[b].start, segments[b].end);
        let right = (segments[b + 1].start, segments[b + 1].end);
        segments[b].classification = Some(classify_break(
            panel,
            left,
            right,
            resolved.range.r_upper,
            cfg.segment_penalty,
        )?);
    }
    let kbc = kbc_table(panel, &star_locations, &cfg.c_grid)?;

    let spec = settings.spec((1..=settings.j_star as i32).map(|j| -j).collect());
    let profiles = DcProfiles {
        common: root_profile(&star.0.common, &spec, Component::Common, cfg.aggregation)?,
        idiosyncratic: root_profile(&star.0.idiosyncratic, &spec, Component::Idiosyncratic, cfg.aggregation)?,
    };

    Ok(DetectionReport {
        config: cfg.clone(),
        resolved,
        screening,
        k_star,
        common_changepoints: common.points,
        idio_changepoints: idio.points,
        segments,
        kbc,
        profiles,
    })
}
