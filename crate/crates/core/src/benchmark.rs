//! Monte-Carlo comparison of the Double CUSUM test with MAX and AVG
//! aggregation and with segmentation of the raw panel.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::FactorDecomposition;
use crate::pipeline::{
    common_chain, detect_component, idio_chain, pooled_block_probability, resolve, select_k_star, DetectConfig,
};
use crate::segment::{Aggregation, ChangePointSet};
use crate::simgen::{generate, Scenario, ScenarioSpec, TrueBreak};
use crate::bootstrap::ResampleSource;
use crate::Component;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchTest {
    Dc,
    Max,
    Avg,
    /// Double CUSUM applied to the transformed raw panel.
    DcNfa,
}

impl BenchTest {
    pub fn name(self) -> &'static str {
        match self {
            BenchTest::Dc => "dc",
            BenchTest::Max => "max",
            BenchTest::Avg => "avg",
            BenchTest::DcNfa => "dc-nfa",
        }
    }
}

/// One scenario family; list-valued fields are crossed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub scenario: Scenario,
    pub n: Vec<usize>,
    #[serde(rename = "T")]
    pub len: Vec<usize>,
    #[serde(default = "one")]
    pub phi: Vec<f64>,
    #[serde(default = "sqrt2")]
    pub sigma: Vec<f64>,
    #[serde(default = "one")]
    pub varrho: Vec<f64>,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub break_at: Option<usize>,
}

fn one() -> Vec<f64> {
    vec![1.0]
}

fn sqrt2() -> Vec<f64> {
    vec![std::f64::consts::SQRT_2]
}

fn default_tests() -> Vec<BenchTest> {
    vec![BenchTest::Dc, BenchTest::Max, BenchTest::Avg, BenchTest::DcNfa]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkGrid {
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tests")]
    pub tests: Vec<BenchTest>,
    /// Settings of each detection. `max_depth` defaults to 1 here, which
    /// tests for a single change-point.
    #[serde(default = "single_iteration")]
    pub detect: DetectConfig,
    pub scenarios: Vec<GridEntry>,
}

fn default_runs() -> usize {
    100
}

fn single_iteration() -> DetectConfig {
    DetectConfig {
        max_depth: Some(1),
        ..DetectConfig::default()
    }
}

impl BenchmarkGrid {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut grid: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        grid.detect.max_depth.get_or_insert(1);
        if grid.runs == 0 || grid.scenarios.is_empty() || grid.tests.is_empty() {
            return Err(Error::Config("grid needs runs > 0, at least one scenario and one test".into()));
        }
        grid.detect.validate()?;
        Ok(grid)
    }

    /// Every parameter combination, with the seed left at zero.
    pub fn expand(&self) -> Vec<ScenarioSpec> {
        let mut out = Vec::new();
        for g in &self.scenarios {
            for &n in &g.n {
                for &len in &g.len {
                    for &phi in &g.phi {
                        for &sigma in &g.sigma {
                            for &varrho in &g.varrho {
                                let mut s = ScenarioSpec::new(g.scenario, n, len);
                                s.phi = phi;
                                s.sigma = sigma;
                                s.varrho = varrho;
                                s.break_at = g.break_at;
                                if let Some(q) = g.q {
                                    s.q = q;
                                }
                                out.push(s);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub scenario: Scenario,
    pub n: usize,
    #[serde(rename = "T")]
    pub len: usize,
    pub phi: f64,
    pub sigma: f64,
    pub varrho: f64,
    pub test: BenchTest,
    pub component: Component,
    pub runs: usize,
    pub detection_rate: f64,
    /// Median distance from the first detected point to the nearest true
    /// break, over runs with a detection; `None` without detections or
    /// true breaks.
    pub median_abs_error: Option<f64>,
}

/// Change-point sets of every test on one dataset.
pub fn run_tests(
    spec: &ScenarioSpec,
    tests: &[BenchTest],
    cfg: &DetectConfig,
) -> Result<(Vec<TrueBreak>, Vec<(BenchTest, Component, ChangePointSet)>)> {
    let data = generate(spec)?;
    let panel = if cfg.center { data.panel.center() } else { data.panel.clone() };
    let (resolved, base, pca) = resolve(&panel, cfg)?;
    let decompositions: Vec<FactorDecomposition> = resolved
        .range
        .candidates
        .iter()
        .map(|&k| pca.decompose(&panel, k, resolved.cap_constant))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &test in tests {
        let mut settings = base.clone();
        match test {
            BenchTest::DcNfa => {
                settings.params.aggregation = Aggregation::Dc;
                let x = panel.values();
                let source = ResampleSource::Joint {
                    values: x,
                    probability: pooled_block_probability(x),
                };
                let set = detect_component(x, &source, Component::Raw, &settings, cfg.seed, &[Component::Raw.tag()])?;
                out.push((test, Component::Raw, set));
            }
            _ => {
                settings.params.aggregation = match test {
                    BenchTest::Max => Aggregation::Max,
                    BenchTest::Avg => Aggregation::Avg,
                    _ => Aggregation::Dc,
                };
                let sets: Vec<ChangePointSet> = decompositions
                    .par_iter()
                    .map(|d| common_chain(d, &settings, cfg.seed).map(|r| r.0))
                    .collect::<Result<_>>()?;
                let counts: Vec<(usize, usize)> =
                    decompositions.iter().zip(&sets).map(|(d, s)| (d.k, s.len())).collect();
                let k_star = select_k_star(&counts).expect("candidates are non-empty");
                let pos = decompositions.iter().position(|d| d.k == k_star).expect("k* is a candidate");
                let idio = idio_chain(&decompositions[pos], &settings, cfg.seed)?;
                out.push((test, Component::Common, sets[pos].clone()));
                out.push((test, Component::Idiosyncratic, idio));
            }
        }
    }
    Ok((data.truth, out))
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Runs the grid. Results do not depend on the number of worker threads.
pub fn run_benchmark(grid: &BenchmarkGrid) -> Result<Vec<BenchmarkRow>> {
    let mut rows = Vec::new();
    for (cell, base) in grid.expand().into_iter().enumerate() {
        let outcomes: Vec<_> = (0..grid.runs as u64)
            .into_par_iter()
            .map(|r| {
                let spec = ScenarioSpec {
                    seed: crate::rng::derive_key(grid.seed, &[cell as u64, r]),
                    ..base.clone()
                };
                let cfg = DetectConfig {
                    seed: crate::rng::derive_key(grid.seed, &[cell as u64, r, 1]),
                    ..grid.detect.clone()
                };
                run_tests(&spec, &grid.tests, &cfg)
            })
            .collect::<Result<_>>()?;

        let mut tally: BTreeMap<(BenchTest, u64), (Component, usize, Vec<f64>)> = BTreeMap::new();
        for (truth, sets) in &outcomes {
            for (test, component, set) in sets {
                let entry = tally
                    .entry((*test, component.tag()))
                    .or_insert((*component, 0, Vec::new()));
                if let Some(first) = set.points.first() {
                    entry.1 += 1;
                    if let Some(err) = truth
                        .iter()
                        .map(|b| (b.location as f64 - first.location as f64).abs())
                        .min_by(f64::total_cmp)
                    {
                        entry.2.push(err);
                    }
                }
            }
        }
        for ((test, _), (component, hits, mut errors)) in tally {
            rows.push(BenchmarkRow {
                scenario: base.scenario,
                n: base.n,
                len: base.len,
                phi: base.phi,
                sigma: base.sigma,
                varrho: base.varrho,
                test,
                component,
                runs: grid.runs,
                detection_rate: hits as f64 / grid.runs as f64,
                median_abs_error: median(&mut errors),
            });
        }
    }
    Ok(rows)
}
