//! CUSUM statistics, the Double CUSUM aggregation and binary segmentation.
//!
//! Time indices are one-based and intervals inclusive. A change-point `η`
//! is the last index of the left segment, so `[s, η]` and `[η+1, e]`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::WaveletPanel;
use crate::Component;

/// Scaled CUSUM series `Y_{s,b,e}` of one row for `b = s..e-1`.
///
/// A row that is constant on `[s, e]` yields exact zeros; so does
/// `sigma == 0`.
pub fn cusum_series(row: &[f64], s: usize, e: usize, sigma: f64) -> Result<Vec<f64>> {
    check_interval(s, e, row.len())?;
    let seg = &row[s - 1..e];
    let mut out = vec![0.0; e - s];
    if sigma == 0.0 || seg.iter().all(|v| *v == seg[0]) {
        return Ok(out);
    }
    fill_cusum(seg, sigma, &mut out, 1);
    Ok(out)
}

fn check_interval(s: usize, e: usize, len: usize) -> Result<()> {
    if s < 1 || e > len || e <= s {
        return Err(Error::Range { start: s, end: e, len });
    }
    Ok(())
}

/// Writes `Y` for each split into `out[k * stride]`.
fn fill_cusum(seg: &[f64], sigma: f64, out: &mut [f64], stride: usize) {
    let width = seg.len();
    let wf = width as f64;
    let total: f64 = seg.iter().sum();
    let mut left = 0.0;
    for (k, v) in seg[..width - 1].iter().enumerate() {
        left += v;
        let nl = (k + 1) as f64;
        let nr = wf - nl;
        let scale = (nl * nr / wf).sqrt() / sigma;
        out[k * stride] = scale * (left / nl - (total - left) / nr);
    }
}

/// `Y^ℓ_{s,b,e}` for the retained rows of a panel and `b = s..e-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumMatrix {
    start: usize,
    end: usize,
    rows: Vec<usize>,
    excluded: Vec<usize>,
    /// Column per `b`, `rows.len()` entries each.
    values: Vec<f64>,
}

impl CusumMatrix {
    /// Builds from explicit columns, one per split point `b = s..e-1`.
    pub fn from_columns(start: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let m = columns.first().map_or(0, Vec::len);
        if columns.is_empty() || m == 0 || columns.iter().any(|c| c.len() != m) {
            return Err(Error::Dimension("CUSUM columns must be non-empty and equal length".into()));
        }
        let end = start + columns.len();
        Ok(Self {
            start,
            end,
            rows: (0..m).collect(),
            excluded: Vec::new(),
            values: columns.into_iter().flatten().collect(),
        })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    /// Panel rows that contribute (non-zero `σ_ℓ`).
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Panel rows dropped because `σ_ℓ = 0`.
    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    /// Number of split points `e − s`.
    pub fn splits(&self) -> usize {
        self.end - self.start
    }

    /// `Y` over the retained rows at split `b`.
    pub fn column(&self, b: usize) -> &[f64] {
        let m = self.rows.len();
        let k = b - self.start;
        &self.values[k * m..(k + 1) * m]
    }
}

/// CUSUM of every row with `σ_ℓ > 0` over `[s, e]`.
pub fn cusum(panel: &WaveletPanel, s: usize, e: usize) -> Result<CusumMatrix> {
    check_interval(s, e, panel.len())?;
    let (rows, excluded): (Vec<usize>, Vec<usize>) =
        (0..panel.rows()).partition(|&l| panel.sigmas()[l] > 0.0);
    if rows.is_empty() {
        return Err(Error::Degenerate("every row of the panel is identically zero".into()));
    }
    let m = rows.len();
    let mut values = vec![0.0; m * (e - s)];
    for (pos, &l) in rows.iter().enumerate() {
        let seg = &panel.row(l)[s - 1..e];
        if seg.iter().all(|v| *v == seg[0]) {
            continue;
        }
        fill_cusum(seg, panel.sigmas()[l], &mut values[pos..], m);
    }
    Ok(CusumMatrix {
        start: s,
        end: e,
        rows,
        excluded,
        values,
    })
}

/// Cross-sectional aggregation of the CUSUM moduli at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Double CUSUM over the ordered moduli.
    #[default]
    Dc,
    /// Point-wise maximum.
    Max,
    /// Point-wise average.
    Avg,
}

/// Applies `agg` to one column of moduli; returns the value and the number
/// of rows `m` behind it. Sorts `col` in place for [`Aggregation::Dc`].
pub fn reduce_column(agg: Aggregation, col: &mut [f64]) -> (f64, usize) {
    let n = col.len();
    match agg {
        Aggregation::Max => (col.iter().fold(0.0, |a: f64, v| a.max(v.abs())), 1),
        Aggregation::Avg => (col.iter().map(|v| v.abs()).sum::<f64>() / n as f64, n),
        Aggregation::Dc => {
            for v in col.iter_mut() {
                *v = v.abs();
            }
            col.sort_unstable_by(|a, b| b.total_cmp(a));
            let total: f64 = col.iter().sum();
            let nf = n as f64;
            let mut head = 0.0;
            let mut best = (f64::NEG_INFINITY, 1);
            for (i, v) in col.iter().enumerate() {
                head += v;
                let m = (i + 1) as f64;
                let rest = 2.0 * nf - m;
                let d = (m * rest / (2.0 * nf)).sqrt() * (head / m - (total - head) / rest);
                if d > best.0 {
                    best = (d, i + 1);
                }
            }
            best
        }
    }
}

/// Maximum of an aggregated CUSUM profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcResult {
    pub statistic: f64,
    /// Maximizing split `b` (smallest on ties).
    pub location: usize,
    /// Maximizing `m` at that split (smallest on ties).
    pub m: usize,
}

/// Maximizes `agg` over splits `b ∈ [b_lo, b_hi]` of `cusums`.
pub fn aggregate(cusums: &CusumMatrix, agg: Aggregation, b_lo: usize, b_hi: usize) -> Result<DcResult> {
    if b_lo < cusums.start || b_hi >= cusums.end || b_lo > b_hi {
        return Err(Error::Range {
            start: b_lo,
            end: b_hi,
            len: cusums.end,
        });
    }
    let mut buf = Vec::with_capacity(cusums.rows.len());
    let mut best = DcResult {
        statistic: f64::NEG_INFINITY,
        location: b_lo,
        m: 1,
    };
    for b in b_lo..=b_hi {
        buf.clear();
        buf.extend_from_slice(cusums.column(b));
        let (v, m) = reduce_column(agg, &mut buf);
        if v > best.statistic {
            best = DcResult {
                statistic: v,
                location: b,
                m,
            };
        }
    }
    Ok(best)
}

/// Double CUSUM statistic over every split of `cusums`.
pub fn double_cusum(cusums: &CusumMatrix) -> Result<DcResult> {
    aggregate(cusums, Aggregation::Dc, cusums.start, cusums.end - 1)
}

/// `agg` evaluated at every split `b = s..e-1`.
pub fn profile(cusums: &CusumMatrix, agg: Aggregation) -> Vec<f64> {
    let mut buf = Vec::with_capacity(cusums.rows.len());
    (cusums.start..cusums.end)
        .map(|b| {
            buf.clear();
            buf.extend_from_slice(cusums.column(b));
            reduce_column(agg, &mut buf).0
        })
        .collect()
}

/// `⌊min(log² T, 0.25 T^{6/7})⌋`, at least one.
pub fn default_trim(len: usize) -> usize {
    let t = len as f64;
    let d = t.ln().powi(2).min(0.25 * t.powf(6.0 / 7.0)).floor();
    (d as usize).max(1)
}

/// `⌊log₂ T / 2⌋`, at least one.
pub fn default_max_depth(len: usize) -> usize {
    (((len as f64).log2() / 2.0).floor() as usize).max(1)
}

/// Trimming and depth settings shared by segmentation and thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    /// `d_T`: an interval is tested only if its length exceeds `4·d_T`.
    pub trim: usize,
    /// Splits keep at least this many points on either side; the effective
    /// margin is `max(trim, min_gap)`.
    pub min_gap: usize,
    /// Deepest level `u` visited; the root is level 1.
    pub max_depth: usize,
    pub aggregation: Aggregation,
}

impl SegmentationParams {
    pub fn for_length(len: usize) -> Self {
        let trim = default_trim(len);
        Self {
            trim,
            min_gap: trim,
            max_depth: default_max_depth(len),
            aggregation: Aggregation::Dc,
        }
    }

    pub fn margin(&self) -> usize {
        self.trim.max(self.min_gap)
    }

    /// Split range `[s + g, e − g − 1]` if `[s, e]` is testable.
    pub fn split_range(&self, s: usize, e: usize) -> Option<(usize, usize)> {
        let width = e + 1 - s;
        let g = self.margin();
        if width <= 4 * self.trim || e < s + 2 * g + 1 {
            return None;
        }
        Some((s + g, e - g - 1))
    }

    /// Statistic of `[s, e]` on `panel`, or `None` if the interval is too
    /// short to test.
    pub fn statistic(&self, panel: &WaveletPanel, s: usize, e: usize) -> Result<Option<DcResult>> {
        let Some((lo, hi)) = self.split_range(s, e) else {
            return Ok(None);
        };
        let c = match cusum(panel, s, e) {
            Ok(c) => c,
            Err(Error::Degenerate(_)) => return Ok(Some(DcResult {
                statistic: 0.0,
                location: lo,
                m: 1,
            })),
            Err(err) => return Err(err),
        };
        aggregate(&c, self.aggregation, lo, hi).map(Some)
    }
}

/// Source of the test threshold for an interval `[s, e]`.
pub trait ThresholdProvider {
    /// `None` means the interval is not tested.
    fn threshold(&self, s: usize, e: usize) -> Option<f64>;
}

/// The same threshold everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantThreshold(pub f64);

impl ThresholdProvider for ConstantThreshold {
    fn threshold(&self, _s: usize, _e: usize) -> Option<f64> {
        Some(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub location: usize,
    /// Level `u` of the node that produced the point; the root is 1.
    pub level: usize,
    /// Position `v` of the node within its level.
    pub node: usize,
    pub stat: f64,
    pub threshold: f64,
}

/// Change-points in increasing order of location.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChangePointSet {
    pub points: Vec<ChangePoint>,
    pub origin: Option<Component>,
}

impl ChangePointSet {
    pub fn locations(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.location).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Node `(u, v)` covering `[s, e]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Node {
    pub level: usize,
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

impl Node {
    pub(crate) fn children(&self, split: usize) -> [Node; 2] {
        [
            Node {
                level: self.level + 1,
                index: 2 * self.index - 1,
                start: self.start,
                end: split,
            },
            Node {
                level: self.level + 1,
                index: 2 * self.index,
                start: split + 1,
                end: self.end,
            },
        ]
    }
}

/// Binary segmentation over the whole usable range of `panel`.
pub fn dcbs(
    panel: &WaveletPanel,
    thresholds: &dyn ThresholdProvider,
    params: &SegmentationParams,
) -> Result<ChangePointSet> {
    dcbs_within(panel, thresholds, params, (panel.valid_start(), panel.len()))
}

/// Binary segmentation starting from the interval `root`.
///
/// Nodes are visited breadth-first. A node is split when its statistic
/// exceeds the threshold; intervals without a threshold or too short to test
/// are terminal.
pub fn dcbs_within(
    panel: &WaveletPanel,
    thresholds: &dyn ThresholdProvider,
    params: &SegmentationParams,
    root: (usize, usize),
) -> Result<ChangePointSet> {
    check_interval(root.0, root.1, panel.len())?;
    let mut queue = VecDeque::from([Node {
        level: 1,
        index: 1,
        start: root.0,
        end: root.1,
    }]);
    let mut points = Vec::new();
    while let Some(node) = queue.pop_front() {
        if node.level > params.max_depth {
            continue;
        }
        let Some(thr) = thresholds.threshold(node.start, node.end) else {
            continue;
        };
        let Some(res) = params.statistic(panel, node.start, node.end)? else {
            continue;
        };
        if res.statistic > thr {
            points.push(ChangePoint {
                location: res.location,
                level: node.level,
                node: node.index,
                stat: res.statistic,
                threshold: thr,
            });
            queue.extend(node.children(res.location));
        }
    }
    points.sort_by_key(|p| p.location);
    Ok(ChangePointSet {
        points,
        origin: Some(panel.source()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn raw(rows: &[&[f64]]) -> WaveletPanel {
        let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, t| rows[i][t]);
        WaveletPanel::from_matrix(&m, Component::Common).unwrap()
    }

    #[test]
    fn cusum_examples() {
        let y = cusum_series(&[0.0, 0.0, 1.0, 1.0], 1, 4, 1.0).unwrap();
        assert!((y[1] + 1.0).abs() < 1e-15);
        assert!(cusum_series(&[3.0; 6], 1, 6, 1.5).unwrap().iter().all(|v| *v == 0.0));
        assert!(matches!(cusum_series(&[1.0, 2.0], 2, 2, 1.0), Err(Error::Range { .. })));
    }

    #[test]
    fn zero_rows_are_excluded() {
        let p = raw(&[&[0.0; 6], &[1.0, 2.0, 1.0, 5.0, 6.0, 5.0]]);
        let c = cusum(&p, 1, 6).unwrap();
        assert_eq!(c.rows(), [1]);
        assert_eq!(c.excluded(), [0]);
        let z = raw(&[&[0.0; 6]]);
        assert!(matches!(cusum(&z, 1, 6), Err(Error::Degenerate(_))));
    }

    #[test]
    fn dc_examples() {
        let c = CusumMatrix::from_columns(1, vec![vec![2.0]]).unwrap();
        let r = double_cusum(&c).unwrap();
        assert!((r.statistic - 2.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.m, 1);

        let c = CusumMatrix::from_columns(1, vec![vec![0.0; 3]; 4]).unwrap();
        let r = double_cusum(&c).unwrap();
        assert_eq!((r.statistic, r.location), (0.0, 1));

        let c = CusumMatrix::from_columns(1, vec![vec![1.0, 0.0], vec![3.0, -3.0], vec![0.5, 0.5]]).unwrap();
        let r = double_cusum(&c).unwrap();
        assert_eq!(r.location, 2);
        assert_eq!(r.m, 2);
    }

    #[test]
    fn max_and_avg() {
        let c = CusumMatrix::from_columns(1, vec![vec![1.0, -4.0], vec![2.0, 2.0]]).unwrap();
        let last = c.end() - 1;
        assert_eq!(aggregate(&c, Aggregation::Max, 1, last).unwrap().statistic, 4.0);
        assert_eq!(aggregate(&c, Aggregation::Avg, 1, last).unwrap().statistic, 2.5);
    }

    #[test]
    fn trim_examples() {
        assert_eq!(default_trim(500), 38);
        assert_eq!(default_trim(200), 23);
        assert_eq!(default_trim(10_000), 84);
        assert_eq!(default_max_depth(500), 4);
        assert_eq!(default_max_depth(200), 3);
    }

    #[test]
    fn split_range_respects_trim() {
        let p = SegmentationParams {
            trim: 10,
            min_gap: 10,
            max_depth: 3,
            aggregation: Aggregation::Dc,
        };
        assert_eq!(p.split_range(1, 40), None);
        assert_eq!(p.split_range(1, 41), Some((11, 30)));
        let wide = SegmentationParams { min_gap: 15, ..p };
        assert_eq!(wide.split_range(1, 41), Some((16, 25)));
    }

    #[test]
    fn dcbs_finds_single_shift() {
        let t = 120;
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| (0..t).map(|s| if s < 60 { 0.0 } else { 1.0 } + 0.01 * ((i * 7 + s * 13) % 5) as f64).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let p = raw(&refs);
        let params = SegmentationParams::for_length(t);
        let set = dcbs(&p, &ConstantThreshold(5.0), &params).unwrap();
        assert_eq!(set.locations(), [60]);
        assert_eq!(set.points[0].level, 1);
        let none = dcbs(&p, &ConstantThreshold(f64::INFINITY), &params).unwrap();
        assert!(none.is_empty());
    }
}
