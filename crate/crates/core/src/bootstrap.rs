//! Stationary bootstrap and bootstrap thresholds for binary segmentation.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{Node, SegmentationParams, ThresholdProvider};
use crate::wavelet::{build_panel, PanelSpec, WaveletPanel};
use crate::{rng, Component};

/// Stream tag used for the joint resampling index.
const JOINT_STREAM: u64 = u64::MAX;

/// Time indices of one stationary-bootstrap replicate of length `len`:
/// blocks start uniformly, have Geometric(`p`) lengths on `{1, 2, ...}`
/// and wrap around the end of the sample.
pub fn sb_indices<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("block probability must lie in (0, 1], got {p}")));
    }
    if len == 0 {
        return Err(Error::Length("cannot resample an empty series".into()));
    }
    let geom = Geometric::new(p).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let start = rng.random_range(0..len);
        let block = 1 + geom.sample(rng) as usize;
        let take = block.min(len - out.len());
        out.extend((0..take).map(|l| (start + l) % len));
    }
    Ok(out)
}

/// Resamples the columns of `block` jointly: every row uses the same
/// index sequence.
pub fn sb_resample<R: Rng + ?Sized>(block: &DMatrix<f64>, p: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let idx = sb_indices(block.ncols(), p, rng)?;
    Ok(gather_columns(block, &idx))
}

fn gather_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let rows = m.nrows();
    let src = m.as_slice();
    let mut data = Vec::with_capacity(rows * idx.len());
    for &t in idx {
        data.extend_from_slice(&src[t * rows..(t + 1) * rows]);
    }
    DMatrix::from_vec(rows, idx.len(), data)
}

/// Exponent of `T` in the block length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockScaling {
    /// `T^{1/5}`: used for the factor series.
    Fifth,
    /// `T^{1/3}`.
    Third,
}

/// Automatic stationary-bootstrap block length for `series` with a
/// flat-top lag window; returns the block probability `p = 1/b`.
pub fn block_length(series: &[f64], scaling: BlockScaling) -> Result<f64> {
    let t = series.len();
    if t < 8 {
        return Err(Error::Length(format!("series of length {t} is too short for block selection")));
    }
    let tf = t as f64;
    let mean = series.iter().sum::<f64>() / tf;
    let centred: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let acov = |k: usize| centred[k..].iter().zip(&centred).map(|(a, b)| a * b).sum::<f64>() / tf;
    let r0 = acov(0);
    if !(r0 > 0.0) {
        return Err(Error::Degenerate("series has zero sample variance".into()));
    }
    let kn = 5usize.max(tf.log10().sqrt().ceil() as usize);
    let m_max = (tf.sqrt().ceil() as usize + kn).min(t - 1);
    let crit = 2.0 * (tf.log10() / tf).sqrt();
    let rho: Vec<f64> = (0..=m_max).map(|k| acov(k) / r0).collect();

    // last lag before the first run of kn insignificant autocorrelations
    let mut m_hat = None;
    for lag in 1..=(m_max + 1).saturating_sub(kn) {
        if (lag..lag + kn).all(|k| rho[k].abs() < crit) {
            m_hat = Some((lag - 1).max(1));
            break;
        }
    }
    let m_hat = m_hat.unwrap_or_else(|| {
        (1..=m_max)
            .rev()
            .find(|&k| rho[k].abs() > crit)
            .unwrap_or(1)
    });
    let big_m = (2 * m_hat.max(1)).min(m_max);

    let taper = |z: f64| {
        let a = z.abs();
        if a < 0.5 {
            1.0
        } else if a <= 1.0 {
            2.0 * (1.0 - a)
        } else {
            0.0
        }
    };
    let mut g = 0.0;
    let mut g0 = r0;
    for k in 1..=big_m {
        let w = taper(k as f64 / big_m as f64);
        let rk = acov(k);
        g += 2.0 * w * k as f64 * rk;
        g0 += 2.0 * w * rk;
    }
    let exponent = match scaling {
        BlockScaling::Fifth => 1.0 / 5.0,
        BlockScaling::Third => 1.0 / 3.0,
    };
    let cap = (3.0 * tf.sqrt()).min(tf / 3.0).ceil();
    let mut b = if g0 > 0.0 {
        (g * g / (g0 * g0)).powf(1.0 / 3.0) * tf.powf(exponent)
    } else {
        1.0
    };
    if !b.is_finite() {
        b = 1.0;
    }
    let b = b.min(cap).clamp(1.0, tf - 1.0);
    Ok(1.0 / b)
}

/// Harmonic pooling `p = (n⁻¹ Σ p_i⁻¹)⁻¹` of per-series block probabilities.
pub fn pooled_probability(ps: &[f64]) -> f64 {
    let mean_len = ps.iter().map(|p| 1.0 / p).sum::<f64>() / ps.len() as f64;
    1.0 / mean_len
}

/// What a bootstrap replicate is generated from.
#[derive(Debug, Clone, Copy)]
pub enum ResampleSource<'a> {
    /// `χ•_t = Λ̂ f•_t` where each factor series is resampled separately with
    /// its own block probability.
    Factors {
        loadings: &'a DMatrix<f64>,
        factors: &'a DMatrix<f64>,
        probabilities: &'a [f64],
    },
    /// Columns of the matrix resampled jointly.
    Joint { values: &'a DMatrix<f64>, probability: f64 },
}

impl ResampleSource<'_> {
    /// Draws replicate `replicate` of the component matrix.
    pub fn draw(&self, seed: u64, replicate: u64) -> Result<DMatrix<f64>> {
        match *self {
            ResampleSource::Factors {
                loadings,
                factors,
                probabilities,
            } => {
                let (k, len) = factors.shape();
                if probabilities.len() != k || loadings.ncols() != k {
                    return Err(Error::Dimension("loadings, factors and block probabilities disagree".into()));
                }
                let mut boot = DMatrix::zeros(k, len);
                for j in 0..k {
                    let mut r = rng::substream(seed, &[replicate, j as u64]);
                    let idx = sb_indices(len, probabilities[j], &mut r)?;
                    for (t, &src) in idx.iter().enumerate() {
                        boot[(j, t)] = factors[(j, src)];
                    }
                }
                Ok(loadings * boot)
            }
            ResampleSource::Joint { values, probability } => {
                let mut r = rng::substream(seed, &[replicate, JOINT_STREAM]);
                sb_resample(values, probability, &mut r)
            }
        }
    }
}

/// Bootstrap settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbConfig {
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Keep every replicate statistic in the resulting tree.
    pub retain_replicates: bool,
}

impl SbConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("at least one bootstrap replicate is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Segmentation statistic of one bootstrap replicate on `interval`.
pub fn bootstrap_statistic(
    source: &ResampleSource<'_>,
    interval: (usize, usize),
    spec: &PanelSpec,
    params: &SegmentationParams,
    component: Component,
    seed: u64,
    replicate: u64,
) -> Result<Option<f64>> {
    let x = source.draw(seed, replicate)?;
    let panel = build_panel(&x, spec, component)?;
    Ok(params
        .statistic(&panel, interval.0, interval.1)?
        .map(|r| r.statistic))
}

/// Type-7 sample quantile of `values` (sorted in place).
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

/// One node of a [`ThresholdTree`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdNode {
    pub level: usize,
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub observed: f64,
    pub split: usize,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replicates: Vec<f64>,
}

/// Bootstrap thresholds for every interval that segmentation of the
/// observed panel can visit, up to the maximum depth.
///
/// The tree is grown by splitting each testable interval at the maximizer
/// of the observed statistic regardless of significance, so that one
/// bootstrap panel per replicate serves every node.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdTree {
    pub nodes: Vec<ThresholdNode>,
    #[serde(skip)]
    lookup: HashMap<(usize, usize), f64>,
}

impl ThresholdTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl ThresholdProvider for ThresholdTree {
    fn threshold(&self, s: usize, e: usize) -> Option<f64> {
        self.lookup.get(&(s, e)).copied()
    }
}

/// Builds bootstrap thresholds for segmentation of `observed` from `root`.
pub fn build_threshold_tree(
    observed: &WaveletPanel,
    source: &ResampleSource<'_>,
    root: (usize, usize),
    config: &SbConfig,
    spec: &PanelSpec,
    params: &SegmentationParams,
) -> Result<ThresholdTree> {
    config.validate()?;
    let mut frontier = vec![Node {
        level: 1,
        index: 1,
        start: root.0,
        end: root.1,
    }];
    let mut grown: Vec<(Node, f64, usize)> = Vec::new();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for node in frontier {
            if node.level > params.max_depth {
                continue;
            }
            if let Some(res) = params.statistic(observed, node.start, node.end)? {
                grown.push((node, res.statistic, res.location));
                next.extend(node.children(res.location));
            }
        }
        frontier = next;
    }
    if grown.is_empty() {
        return Ok(ThresholdTree::default());
    }

    let component = observed.source();
    let per_replicate: Vec<Vec<f64>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let x = source.draw(config.seed, r)?;
            let panel = build_panel(&x, spec, component)?;
            grown
                .iter()
                .map(|(node, _, _)| {
                    Ok(params
                        .statistic(&panel, node.start, node.end)?
                        .map_or(0.0, |res| res.statistic))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut nodes = Vec::with_capacity(grown.len());
    let mut lookup = HashMap::with_capacity(grown.len());
    for (pos, (node, observed, split)) in grown.into_iter().enumerate() {
        let mut stats: Vec<f64> = per_replicate.iter().map(|r| r[pos]).collect();
        let threshold = quantile(&mut stats.clone(), 1.0 - config.alpha);
        lookup.insert((node.start, node.end), threshold);
        if !config.retain_replicates {
            stats.clear();
        }
        nodes.push(ThresholdNode {
            level: node.level,
            index: node.index,
            start: node.start,
            end: node.end,
            observed,
            split,
            threshold,
            replicates: stats,
        });
    }
    Ok(ThresholdTree { nodes, lookup })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_probability_is_iid() {
        let mut r = rng::substream(1, &[]);
        let idx = sb_indices(50, 1.0, &mut r).unwrap();
        assert_eq!(idx.len(), 50);
        assert!(idx.iter().all(|&t| t < 50));
    }

    #[test]
    fn tiny_probability_gives_one_circular_block() {
        let mut r = rng::substream(3, &[]);
        let idx = sb_indices(40, 1e-9, &mut r).unwrap();
        for w in idx.windows(2) {
            assert_eq!(w[1], (w[0] + 1) % 40);
        }
    }

    #[test]
    fn invalid_probability() {
        let mut r = rng::substream(0, &[]);
        assert!(sb_indices(10, 0.0, &mut r).is_err());
        assert!(sb_indices(10, 1.5, &mut r).is_err());
    }

    #[test]
    fn joint_resampling_keeps_columns_together() {
        let m = DMatrix::from_fn(3, 30, |i, t| (100 * i + t) as f64);
        let mut r = rng::substream(9, &[]);
        let b = sb_resample(&m, 0.2, &mut r).unwrap();
        for t in 0..30 {
            let src = b[(0, t)] as usize;
            assert_eq!(b[(1, t)], (100 + src) as f64);
            assert_eq!(b[(2, t)], (200 + src) as f64);
        }
    }

    #[test]
    fn quantile_type7() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&mut v, 0.5), 2.5);
        assert_eq!(quantile(&mut v, 1.0), 4.0);
        assert_eq!(quantile(&mut v, 0.0), 1.0);
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile(&mut v, 0.95) - 95.05).abs() < 1e-12);
    }

    #[test]
    fn block_length_behaviour() {
        let mut r = rng::substream(5, &[]);
        let white: Vec<f64> = (0..500).map(|_| r.random::<f64>() - 0.5).collect();
        let mut ar = vec![0.0; 500];
        for t in 1..500 {
            ar[t] = 0.9 * ar[t - 1] + white[t];
        }
        let p_white = block_length(&white, BlockScaling::Fifth).unwrap();
        let p_ar = block_length(&ar, BlockScaling::Fifth).unwrap();
        assert!(p_ar < p_white);
        assert!(p_ar > 0.0 && p_white <= 1.0);
        assert!(matches!(block_length(&[1.0; 20], BlockScaling::Third), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pooled() {
        assert!((pooled_probability(&[0.5, 0.25]) - 1.0 / 3.0).abs() < 1e-15);
    }
}
