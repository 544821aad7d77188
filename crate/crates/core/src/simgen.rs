//! Seeded generators for factor-model panels with known change-points.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;
use crate::segment::{aggregate, Aggregation, CusumMatrix};
use crate::{rng, Component};

/// Presample steps discarded from every autoregression.
pub const BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Shift of the loadings on a subset of series.
    S1,
    /// Sign switch of the factor autoregressive parameters.
    S2,
    /// A new factor on a subset of series.
    S3,
    /// Sign switch of the idiosyncratic autoregressive parameters on a subset.
    S4,
    /// Doubling of the idiosyncratic cross-correlation bandwidth on a subset.
    S5,
    /// Variance shifts in heavy-tailed factors and idiosyncratic components.
    M1,
    /// Three common and one idiosyncratic change-point.
    M2,
    #[serde(rename = "null")]
    Null,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "S1" => Scenario::S1,
            "S2" => Scenario::S2,
            "S3" => Scenario::S3,
            "S4" => Scenario::S4,
            "S5" => Scenario::S5,
            "M1" => Scenario::M1,
            "M2" => Scenario::M2,
            "NULL" => Scenario::Null,
            _ => return Err(Error::Config(format!("unknown scenario '{s}'"))),
        })
    }
}

/// Optional inputs for [`Scenario::M1`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct M1Params {
    /// `n × q` loadings; standard normal draws when absent.
    pub loadings: Option<Vec<Vec<f64>>>,
    /// `q × 2` variance multipliers for the factors, one column per
    /// post-break segment.
    pub factor_multipliers: Option<Vec<Vec<f64>>>,
    /// `n × 2` variance multipliers for the idiosyncratic components.
    pub idio_multipliers: Option<Vec<Vec<f64>>>,
}

/// Multiplier used for every segment when none are supplied.
pub const M1_DEFAULT_MULTIPLIER: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    #[serde(rename = "T")]
    pub len: usize,
    pub q: usize,
    pub phi: f64,
    pub sigma: f64,
    pub varrho: f64,
    pub rho_f: f64,
    pub rho: f64,
    pub beta: f64,
    /// Cross-correlation bandwidth; `⌊min(n/20, 10)⌋` when absent.
    #[serde(rename = "H")]
    pub h: Option<usize>,
    pub seed: u64,
    /// Overrides the single break location of S1–S5.
    pub break_at: Option<usize>,
    pub m1: Option<M1Params>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::Null,
            n: 100,
            len: 200,
            q: 5,
            phi: 1.0,
            sigma: std::f64::consts::SQRT_2,
            varrho: 1.0,
            rho_f: 0.4,
            rho: 0.5,
            beta: 0.2,
            h: None,
            seed: 0,
            break_at: None,
            m1: None,
        }
    }
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n: usize, len: usize) -> Self {
        Self {
            scenario,
            n,
            len,
            ..Self::default()
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.h.unwrap_or_else(|| (self.n / 20).min(10))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 || self.len < 16 {
            return bad(format!("scenario needs n ≥ 2 and T ≥ 16, got {} × {}", self.n, self.len));
        }
        if self.q < 1 {
            return bad("q must be at least 1".into());
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return bad(format!("phi must be positive, got {}", self.phi));
        }
        if !(self.varrho > 0.0 && self.varrho <= 1.0) {
            return bad(format!("varrho must lie in (0, 1], got {}", self.varrho));
        }
        if !(self.rho_f.abs() < 1.0) || !(self.rho.abs() < 1.0) {
            return bad("autoregressive parameters must lie in (-1, 1)".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) || !self.beta.is_finite() {
            return bad("sigma must be non-negative and beta finite".into());
        }
        if let Some(b) = self.break_at {
            if b < 1 || b >= self.len {
                return bad(format!("break location {b} must lie in 1..{}", self.len));
            }
        }
        Ok(())
    }
}

/// `ϑ = φ · q/(1−ρ_f²) · (1−ρ²)/(1+2Hβ²)`.
pub fn theta_scale(spec: &ScenarioSpec) -> f64 {
    let h = spec.bandwidth() as f64;
    spec.phi * spec.q as f64 / (1.0 - spec.rho_f * spec.rho_f) * (1.0 - spec.rho * spec.rho)
        / (1.0 + 2.0 * h * spec.beta * spec.beta)
}

/// `[T·a/b]` rounded to the nearest integer.
pub fn fraction_point(len: usize, num: usize, den: usize) -> usize {
    ((len * num) as f64 / den as f64).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueBreak {
    pub location: usize,
    pub origin: Component,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub spec: ScenarioSpec,
    pub panel: TimeSeriesPanel,
    pub true_common: DMatrix<f64>,
    /// Idiosyncratic part including the `√ϑ` scaling.
    pub true_idio: DMatrix<f64>,
    pub theta: f64,
    pub truth: Vec<TrueBreak>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn subset(rng: &mut ChaCha8Rng, n: usize, varrho: f64) -> Vec<bool> {
    let size = ((varrho * n as f64).round() as usize).clamp(1, n);
    let mut mask = vec![false; n];
    for i in index::sample(rng, n, size) {
        mask[i] = true;
    }
    mask
}

/// Simulates the scenario described by `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<GeneratedDataset> {
    spec.validate()?;
    match spec.scenario {
        Scenario::M1 => generate_m1(spec),
        _ => generate_standard(spec),
    }
}

fn generate_standard(spec: &ScenarioSpec) -> Result<GeneratedDataset> {
    let (n, len, q) = (spec.n, spec.len, spec.q);
    let mut rng = rng::substream(spec.seed, &[0x5C3E_1A81]);
    let single = spec.break_at.unwrap_or_else(|| fraction_point(len, 1, 3));

    let lambda = DMatrix::from_fn(n, q, |_, _| normal(&mut rng));
    let rho_f: Vec<f64> = (0..q).map(|j| spec.rho_f - 0.05 * j as f64).collect();
    let rho_e: Vec<f64> = (0..n).map(|_| rng.random_range(-spec.rho..=spec.rho)).collect();
    let beta: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.5) { spec.beta } else { -spec.beta })
        .collect();
    let h = spec.bandwidth();

    let mut truth = Vec::new();
    let mut push = |location, origin, kind: &str| {
        truth.push(TrueBreak {
            location,
            origin,
            kind: kind.into(),
        })
    };

    // breaks: (loading shift, factor sign flip, idio sign flip, new factor,
    // bandwidth doubling), each as (location, affected set)
    let mut loading_shift: Option<(usize, Vec<bool>, DMatrix<f64>)> = None;
    let mut factor_flip: Option<usize> = None;
    let mut idio_flip: Option<(usize, Vec<bool>)> = None;
    let mut new_factor: Option<(usize, Vec<bool>, Vec<f64>)> = None;
    let mut wider: Option<(usize, Vec<bool>)> = None;

    match spec.scenario {
        Scenario::Null | Scenario::M1 => {}
        Scenario::S1 => {
            let s = subset(&mut rng, n, spec.varrho);
            let delta = DMatrix::from_fn(n, q, |_, _| spec.sigma * normal(&mut rng));
            loading_shift = Some((single, s, delta));
            push(single, Component::Common, "loadings");
        }
        Scenario::S2 => {
            factor_flip = Some(single);
            push(single, Component::Common, "factor-autocorrelation");
        }
        Scenario::S3 => {
            let s = subset(&mut rng, n, spec.varrho);
            let lam: Vec<f64> = (0..n).map(|_| spec.sigma * normal(&mut rng)).collect();
            new_factor = Some((single, s, lam));
            push(single, Component::Common, "new-factor");
        }
        Scenario::S4 => {
            idio_flip = Some((single, subset(&mut rng, n, spec.varrho)));
            push(single, Component::Idiosyncratic, "idio-autocorrelation");
        }
        Scenario::S5 => {
            wider = Some((single, subset(&mut rng, n, spec.varrho)));
            push(single, Component::Idiosyncratic, "idio-covariance");
        }
        Scenario::M2 => {
            let e1 = fraction_point(len, 1, 3);
            let e2 = fraction_point(len, 1, 2);
            let e3 = fraction_point(len, 4, 5);
            let ee = fraction_point(len, 3, 5);
            let s1 = subset(&mut rng, n, spec.varrho);
            let delta = DMatrix::from_fn(n, q, |_, _| spec.sigma * normal(&mut rng));
            loading_shift = Some((e1, s1, delta));
            factor_flip = Some(e2);
            let se = subset(&mut rng, n, spec.varrho);
            idio_flip = Some((ee, se));
            let s3 = subset(&mut rng, n, spec.varrho);
            let lam: Vec<f64> = (0..n).map(|_| std::f64::consts::SQRT_2 * normal(&mut rng)).collect();
            new_factor = Some((e3, s3, lam));
            push(e1, Component::Common, "loadings");
            push(e2, Component::Common, "factor-autocorrelation");
            push(ee, Component::Idiosyncratic, "idio-autocorrelation");
            push(e3, Component::Common, "new-factor");
        }
    }
    truth.sort_by_key(|b| b.location);

    // factors, with presample burn-in under the pre-break law
    let total = BURN_IN + len;
    let mut factors = DMatrix::zeros(q, len);
    for j in 0..q {
        let mut f = 0.0;
        for step in 0..total {
            let t = step as isize - BURN_IN as isize; // zero-based sample time
            let sign = match factor_flip {
                Some(eta) if t >= eta as isize => -1.0,
                _ => 1.0,
            };
            f = sign * rho_f[j] * f + normal(&mut rng);
            if t >= 0 {
                factors[(j, t as usize)] = f;
            }
        }
    }
    let extra: Option<Vec<f64>> = new_factor.as_ref().map(|_| {
        let mut f = 0.0;
        let mut out = vec![0.0; len];
        for step in 0..total {
            f = spec.rho_f * f + normal(&mut rng);
            if step >= BURN_IN {
                out[step - BURN_IN] = f;
            }
        }
        out
    });

    // idiosyncratic innovations, padded so that every neighbourhood sum is
    // defined
    let h_max = if wider.is_some() { 2 * h } else { h };
    let width = n + 2 * h_max;
    let mut eps = DMatrix::zeros(n, len);
    let mut state = vec![0.0; n];
    let mut v = vec![0.0; width];
    for step in 0..total {
        let t = step as isize - BURN_IN as isize;
        for slot in v.iter_mut() {
            *slot = normal(&mut rng);
        }
        for i in 0..n {
            let post = |eta: usize| t >= eta as isize;
            let mut r = rho_e[i];
            if let Some((eta, s)) = &idio_flip {
                if post(*eta) && s[i] {
                    r = -r;
                }
            }
            let hi = match &wider {
                Some((eta, s)) if post(*eta) && s[i] => 2 * h,
                _ => h,
            };
            let c = i + h_max;
            let mut neighbours = 0.0;
            for k in 1..=hi {
                neighbours += v[c - k] + v[c + k];
            }
            state[i] = r * state[i] + v[c] + beta[i] * neighbours;
            if t >= 0 {
                eps[(i, t as usize)] = state[i];
            }
        }
    }

    let theta = theta_scale(spec);
    let mut common = DMatrix::zeros(n, len);
    for t in 0..len {
        for i in 0..n {
            let mut c = 0.0;
            for j in 0..q {
                let mut l = lambda[(i, j)];
                if let Some((eta, s, delta)) = &loading_shift {
                    if t >= *eta && s[i] {
                        l += delta[(i, j)];
                    }
                }
                c += l * factors[(j, t)];
            }
            if let (Some((eta, s, lam)), Some(f)) = (&new_factor, &extra) {
                if t >= *eta && s[i] {
                    c += lam[i] * f[t];
                }
            }
            common[(i, t)] = c;
        }
    }
    let idio = eps * theta.sqrt();
    let panel = TimeSeriesPanel::new(&common + &idio)?;
    Ok(GeneratedDataset {
        spec: spec.clone(),
        panel,
        true_common: common,
        true_idio: idio,
        theta,
        truth,
    })
}

fn multipliers(given: Option<&Vec<Vec<f64>>>, rows: usize, what: &str) -> Result<Vec<[f64; 2]>> {
    match given {
        None => Ok(vec![[M1_DEFAULT_MULTIPLIER; 2]; rows]),
        Some(m) => {
            if m.len() != rows || m.iter().any(|r| r.len() != 2) {
                return Err(Error::Config(format!("{what} multipliers must be {rows} × 2")));
            }
            if m.iter().flatten().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config(format!("{what} multipliers must be positive")));
            }
            Ok(m.iter().map(|r| [r[0], r[1]]).collect())
        }
    }
}

/// Segment of `t` (zero-based) relative to breaks `[e1, e2]`, where `e`
/// are one-based last indices of the preceding segments.
fn segment_of(t: usize, breaks: [usize; 2]) -> usize {
    breaks.iter().filter(|&&e| t >= e).count()
}

fn variance(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = x.clone().count() as f64;
    let mean = x.clone().sum::<f64>() / n;
    x.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

fn generate_m1(spec: &ScenarioSpec) -> Result<GeneratedDataset> {
    let (n, len, q) = (spec.n, spec.len, spec.q);
    let params = spec.m1.clone().unwrap_or_default();
    let mut rng = rng::substream(spec.seed, &[0x3A11_0001]);
    let t7 = StudentT::new(7.0).map_err(|e| Error::Config(e.to_string()))?;

    let lambda = match &params.loadings {
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != q) {
                return Err(Error::Config(format!("M1 loadings must be {n} × {q}")));
            }
            DMatrix::from_fn(n, q, |i, j| rows[i][j])
        }
        None => DMatrix::from_fn(n, q, |_, _| normal(&mut rng)),
    };
    let df = multipliers(params.factor_multipliers.as_ref(), q, "factor")?;
    let de = multipliers(params.idio_multipliers.as_ref(), n, "idiosyncratic")?;
    let common_breaks = [fraction_point(len, 1, 3), fraction_point(len, 1, 2)];
    let idio_breaks = [fraction_point(len, 1, 2), fraction_point(len, 4, 5)];
    let scale = |b: usize, delta: &[f64; 2]| -> f64 {
        match b {
            0 => 1.0,
            // g_b = -1 for odd b, +1 for even b
            1 => 1.0 / (spec.sigma * delta[0]),
            _ => spec.sigma * delta[1],
        }
    };

    let mut factors = DMatrix::zeros(q, len);
    for j in 0..q {
        for t in 0..len {
            let u: f64 = t7.sample(&mut rng);
            factors[(j, t)] = scale(segment_of(t, common_breaks), &df[j]) * u;
        }
    }
    let mut eps = DMatrix::zeros(n, len);
    for i in 0..n {
        for t in 0..len {
            let v: f64 = t7.sample(&mut rng);
            eps[(i, t)] = scale(segment_of(t, idio_breaks), &de[i]) * v;
        }
    }
    let common = &lambda * &factors;
    let var_sum = |m: &DMatrix<f64>| -> f64 { (0..n).map(|i| variance(m.row(i).iter().copied())).sum() };
    let denom = var_sum(&eps);
    let theta = if denom > 0.0 {
        spec.phi * var_sum(&common) / denom
    } else {
        0.0
    };
    let idio = eps * theta.sqrt();
    let panel = TimeSeriesPanel::new(&common + &idio)?;
    let mut truth: Vec<TrueBreak> = common_breaks
        .iter()
        .map(|&l| TrueBreak {
            location: l,
            origin: Component::Common,
            kind: "factor-variance".into(),
        })
        .chain(idio_breaks.iter().map(|&l| TrueBreak {
            location: l,
            origin: Component::Idiosyncratic,
            kind: "idio-variance".into(),
        }))
        .collect();
    truth.sort_by_key(|b| (b.location, b.origin.tag()));
    Ok(GeneratedDataset {
        spec: spec.clone(),
        panel,
        true_common: common,
        true_idio: idio,
        theta,
        truth,
    })
}

/// MAX and AVG statistics of a CUSUM matrix, maximized over every split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineStatistics {
    pub max: f64,
    pub avg: f64,
}

pub fn baseline_reducers(cusums: &CusumMatrix) -> Result<BaselineStatistics> {
    let last = cusums.end() - 1;
    Ok(BaselineStatistics {
        max: aggregate(cusums, Aggregation::Max, cusums.start(), last)?.statistic,
        avg: aggregate(cusums, Aggregation::Avg, cusums.start(), last)?.statistic,
    })
}
