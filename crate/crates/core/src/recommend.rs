//! Trend-seasonality recommender, popularity and random baselines, and
//! Recall@K.
//!
//! A query dataset is profiled by STL, its trend and seasonal components
//! are compared against two trend and two seasonality templates, the
//! divergence of each pair decides whether that component is informative,
//! and the trend/season power ratio picks the trend weight. The matching
//! synthetic dataset (or pair of datasets) supplies the ranking.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::Method;
use crate::error::{Error, Result};
use crate::numerics::{cosine_similarity, resample_linear};
use crate::rankings::{RankedAugmentations, SyntheticTable};
use crate::stl::DatasetProfile;
use crate::synthgen::{gen_seasonality, gen_trend, DatasetId, Group, SeasonKind, TrendKind};

pub const DEFAULT_THRESHOLD: f64 = 0.05;
/// Length at which templates are rendered before resampling.
pub const TEMPLATE_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub sim_t1: f64,
    pub sim_t2: f64,
    pub sim_s1: f64,
    pub sim_s2: f64,
    pub ds_trend: f64,
    pub ds_season: f64,
    pub p_trend: f64,
    pub p_season: f64,
}

impl SimilarityReport {
    /// Builds a report from similarities and powers, deriving both
    /// divergence scores.
    pub fn new(sim_t1: f64, sim_t2: f64, sim_s1: f64, sim_s2: f64, p_trend: f64, p_season: f64) -> Result<Self> {
        Ok(Self {
            sim_t1,
            sim_t2,
            sim_s1,
            sim_s2,
            ds_trend: divergence_score(sim_t1, sim_t2)?,
            ds_season: divergence_score(sim_s1, sim_s2)?,
            p_trend,
            p_season,
        })
    }
}

/// Templates `T1` (ramp), `T2` (`t^0.2`), `S1` (one trigonometric cycle,
/// `beta = 0.5`, `phi = 0`) and `S2` (one Morlet pulse, `beta = 5`).
#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
}

impl Templates {
    pub fn canonical() -> Self {
        Self {
            t1: gen_trend(TrendKind::Linear, TEMPLATE_LEN, 1.0),
            t2: gen_trend(TrendKind::NonLinear, TEMPLATE_LEN, 0.2),
            s1: gen_seasonality(SeasonKind::Trig, TEMPLATE_LEN, 0.5, 1.0, 0.0),
            s2: gen_seasonality(SeasonKind::Morlet, TEMPLATE_LEN, 5.0, 1.0, 0.0),
        }
    }
}

/// How profile components are compared with the templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// Compare the dataset-mean trend and folded seasonal component.
    MeanProfile,
    /// Compare every sample's components and average the similarities.
    SampleAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityOptions {
    pub mode: SimilarityMode,
    /// Use `|cos|`, so a component and its negation match equally well.
    pub orientation_free: bool,
}

impl Default for SimilarityOptions {
    fn default() -> Self {
        Self {
            mode: SimilarityMode::SampleAverage,
            orientation_free: true,
        }
    }
}

/// Similarities of `profile` to the templates and its mean component
/// powers, each averaged over the profiled periods.
pub fn component_similarities(profile: &DatasetProfile, opts: &SimilarityOptions) -> Result<SimilarityReport> {
    if profile.periods.is_empty() {
        return Err(Error::Shape("profile has no periods".into()));
    }
    let tpl = Templates::canonical();
    let n = profile.sample_len;
    let t1 = resample_linear(&tpl.t1, n)?;
    let t2 = resample_linear(&tpl.t2, n)?;
    let cos = |a: &[f64], b: &[f64]| -> Result<f64> {
        let c = cosine_similarity(a, b)?;
        Ok(if opts.orientation_free { c.abs() } else { c })
    };

    let mut acc = [0.0f64; 6];
    for pp in &profile.periods {
        let s1 = resample_linear(&tpl.s1, pp.period)?;
        let s2 = resample_linear(&tpl.s2, pp.period)?;
        let sims = match opts.mode {
            SimilarityMode::MeanProfile => [
                cos(&pp.mean_trend, &t1)?,
                cos(&pp.mean_trend, &t2)?,
                cos(&pp.mean_seasonal_one_period, &s1)?,
                cos(&pp.mean_seasonal_one_period, &s2)?,
            ],
            SimilarityMode::SampleAverage => {
                let trend = average_similarity(pp.samples.iter().map(|s| s.trend.as_slice()), &[&t1, &t2], &cos)
                    .map_err(|e| with_context(e, "trend", pp.period))?;
                let season = average_similarity(
                    pp.samples.iter().map(|s| s.seasonal_one_period.as_slice()),
                    &[&s1, &s2],
                    &cos,
                )
                .map_err(|e| with_context(e, "seasonal", pp.period))?;
                [trend[0], trend[1], season[0], season[1]]
            }
        };
        for (a, s) in acc.iter_mut().zip(sims) {
            *a += s;
        }
        acc[4] += pp.p_trend;
        acc[5] += pp.p_season;
    }
    let k = profile.periods.len() as f64;
    let [t1s, t2s, s1s, s2s, pt, ps] = acc.map(|a| a / k);
    SimilarityReport::new(t1s, t2s, s1s, s2s, pt, ps)
}

fn with_context(e: Error, what: &str, period: usize) -> Error {
    match e {
        Error::DegenerateVector(m) => Error::DegenerateVector(format!("{what} component at period {period}: {m}")),
        other => other,
    }
}

/// Mean similarity of the non-degenerate series to each template. Errors
/// only when every series is degenerate.
#[allow(clippy::type_complexity)]
fn average_similarity<'a>(
    series: impl Iterator<Item = &'a [f64]>,
    templates: &[&Vec<f64>; 2],
    cos: &dyn Fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<[f64; 2]> {
    let mut sum = [0.0; 2];
    let mut count = 0usize;
    let mut last_err = None;
    for s in series {
        match (cos(s, templates[0]), cos(s, templates[1])) {
            (Ok(a), Ok(b)) => {
                sum[0] += a;
                sum[1] += b;
                count += 1;
            }
            (Err(e @ Error::DegenerateVector(_)), _) | (_, Err(e @ Error::DegenerateVector(_))) => {
                last_err = Some(e);
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    if count == 0 {
        return Err(last_err.unwrap_or_else(|| Error::DegenerateVector("no samples".into())));
    }
    Ok(sum.map(|s| s / count as f64))
}

/// `2 (max - min) / (a + b)`.
pub fn divergence_score(sim_a: f64, sim_b: f64) -> Result<f64> {
    let denom = sim_a + sim_b;
    if !(denom > 0.0) {
        return Err(Error::DegenerateVector(format!(
            "divergence score needs a positive similarity sum, got {sim_a} + {sim_b}"
        )));
    }
    Ok(2.0 * (sim_a - sim_b).abs() / denom)
}

/// `(w1, w2)` from the trend/season power ratio: `<= 5/9` gives
/// `(0.1, 0.9)`, `>= 5` gives `(0.9, 0.1)`, anything between `(0.5, 0.5)`.
/// Zero seasonal power counts as an infinite ratio.
pub fn weight_assignment(p_trend: f64, p_season: f64) -> Result<(f64, f64)> {
    if !(p_trend >= 0.0 && p_season >= 0.0) {
        return Err(Error::Config(format!(
            "powers must be non-negative, got trend {p_trend}, season {p_season}"
        )));
    }
    let ratio = if p_season == 0.0 { f64::INFINITY } else { p_trend / p_season };
    Ok(weights_for_ratio(ratio))
}

pub fn weights_for_ratio(ratio: f64) -> (f64, f64) {
    if ratio <= 5.0 / 9.0 {
        (0.1, 0.9)
    } else if ratio >= 5.0 {
        (0.9, 0.1)
    } else {
        (0.5, 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "datasets", rename_all = "snake_case")]
pub enum Twin {
    Single(DatasetId),
    Pair(DatasetId, DatasetId),
    NoMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwinDecision {
    pub twin: Twin,
    pub trend_used: bool,
    pub season_used: bool,
    pub trend_kind: TrendKind,
    pub season_kind: SeasonKind,
    pub assigned_w1: f64,
    pub ds_trend: f64,
    pub ds_season: f64,
}

pub fn select_twin(report: &SimilarityReport, threshold: f64) -> Result<TwinDecision> {
    let trend_used = report.ds_trend >= threshold;
    let season_used = report.ds_season >= threshold;
    let trend_kind = if report.sim_t1 >= report.sim_t2 {
        TrendKind::Linear
    } else {
        TrendKind::NonLinear
    };
    let season_kind = if report.sim_s1 >= report.sim_s2 {
        SeasonKind::Trig
    } else {
        SeasonKind::Morlet
    };
    let (w1, _) = weight_assignment(report.p_trend, report.p_season)?;
    let suffix = DatasetId::suffix_for_w1(w1)?;
    let id = |g: Group| DatasetId { group: g, suffix };
    let twin = match (trend_used, season_used) {
        (true, true) => Twin::Single(id(Group::from_components(trend_kind, season_kind))),
        (true, false) => Twin::Pair(
            id(Group::from_components(trend_kind, SeasonKind::Trig)),
            id(Group::from_components(trend_kind, SeasonKind::Morlet)),
        ),
        (false, true) => Twin::Pair(
            id(Group::from_components(TrendKind::Linear, season_kind)),
            id(Group::from_components(TrendKind::NonLinear, season_kind)),
        ),
        (false, false) => Twin::NoMatch,
    };
    Ok(TwinDecision {
        twin,
        trend_used,
        season_used,
        trend_kind,
        season_kind,
        assigned_w1: w1,
        ds_trend: report.ds_trend,
        ds_season: report.ds_season,
    })
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > Method::ALL.len() {
        return Err(Error::Config(format!("k = {k} not in 1..={}", Method::ALL.len())));
    }
    Ok(())
}

/// Orders methods by ascending score, then better best rank, then name.
fn order_by_score(score: &BTreeMap<Method, f64>, best: &BTreeMap<Method, f64>) -> Vec<Method> {
    let mut methods: Vec<Method> = Method::ALL.to_vec();
    methods.sort_by(|a, b| {
        score[a]
            .total_cmp(&score[b])
            .then(best[a].total_cmp(&best[b]))
            .then(a.name().cmp(b.name()))
    });
    methods
}

/// Average-rank fusion of several rankings.
pub fn fuse_rankings(rankings: &[&RankedAugmentations]) -> Vec<Method> {
    let ranks: Vec<BTreeMap<Method, f64>> = rankings.iter().map(|r| r.strict_ranks()).collect();
    let mut avg = BTreeMap::new();
    let mut best = BTreeMap::new();
    for &m in &Method::ALL {
        let rs: Vec<f64> = ranks.iter().map(|r| r[&m]).collect();
        avg.insert(m, rs.iter().sum::<f64>() / rs.len() as f64);
        best.insert(m, rs.iter().copied().fold(f64::INFINITY, f64::min));
    }
    order_by_score(&avg, &best)
}

pub fn recommend_topk(decision: &TwinDecision, table: &SyntheticTable, k: usize) -> Result<Vec<Method>> {
    check_k(k)?;
    let order = match decision.twin {
        Twin::Single(id) => table.get(id).strict_order(),
        Twin::Pair(a, b) => fuse_rankings(&[table.get(a), table.get(b)]),
        Twin::NoMatch => {
            return Err(Error::Inapplicable {
                ds_trend: decision.ds_trend,
                ds_season: decision.ds_season,
                threshold: DEFAULT_THRESHOLD,
            })
        }
    };
    Ok(order[..k].to_vec())
}

/// Methods by total strict rank over every dataset in `table`; ties by name.
pub fn popularity_recommend(table: &SyntheticTable, k: usize) -> Result<Vec<Method>> {
    check_k(k)?;
    let mut total: BTreeMap<Method, f64> = Method::ALL.iter().map(|&m| (m, 0.0)).collect();
    for r in table.0.values() {
        for (m, rank) in r.strict_ranks() {
            *total.get_mut(&m).expect("all methods present") += rank;
        }
    }
    let mut methods = Method::ALL.to_vec();
    methods.sort_by(|a, b| total[a].total_cmp(&total[b]).then(a.name().cmp(b.name())));
    methods.truncate(k);
    Ok(methods)
}

/// `k` distinct methods drawn uniformly without replacement.
pub fn random_recommend<R: Rng>(k: usize, rng: &mut R) -> Result<Vec<Method>> {
    check_k(k)?;
    Ok(rand::seq::index::sample(rng, Method::ALL.len(), k)
        .into_iter()
        .map(|i| Method::ALL[i])
        .collect())
}

/// `|top_k(recommended) ∩ top_k(truth)| / k`, truth taken in strict order.
pub fn recall_at_k(recommended: &[Method], truth: &RankedAugmentations, k: usize) -> Result<f64> {
    check_k(k)?;
    if recommended.len() < k {
        return Err(Error::Config(format!(
            "k = {k} exceeds the {} recommended items",
            recommended.len()
        )));
    }
    let top_truth = &truth.strict_order()[..k];
    let hits = recommended[..k].iter().filter(|m| top_truth.contains(m)).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendMethod {
    TrendSeason,
    Popularity,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarities {
    pub t1: f64,
    pub t2: f64,
    pub s1: f64,
    pub s2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceScores {
    pub trend: f64,
    pub season: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Powers {
    pub trend: f64,
    pub season: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationReport {
    pub similarities: Similarities,
    pub divergence_scores: DivergenceScores,
    pub powers: Powers,
    pub weights: Weights,
    pub twin: TwinDecision,
    pub method: RecommendMethod,
    pub top_k: Vec<Method>,
}

/// Runs twin selection and top-k on a similarity report. A `NoMatch` twin
/// yields [`Error::Inapplicable`].
pub fn recommend(report: &SimilarityReport, table: &SyntheticTable, k: usize, threshold: f64) -> Result<RecommendationReport> {
    let twin = select_twin(report, threshold)?;
    if twin.twin == Twin::NoMatch {
        return Err(Error::Inapplicable {
            ds_trend: report.ds_trend,
            ds_season: report.ds_season,
            threshold,
        });
    }
    let top_k = recommend_topk(&twin, table, k)?;
    let (w1, w2) = weight_assignment(report.p_trend, report.p_season)?;
    Ok(RecommendationReport {
        similarities: Similarities {
            t1: report.sim_t1,
            t2: report.sim_t2,
            s1: report.sim_s1,
            s2: report.sim_s2,
        },
        divergence_scores: DivergenceScores {
            trend: report.ds_trend,
            season: report.ds_season,
        },
        powers: Powers {
            trend: report.p_trend,
            season: report.p_season,
        },
        weights: Weights { w1, w2 },
        twin,
        method: RecommendMethod::TrendSeason,
        top_k,
    })
}

/// Published component statistics of a real-world dataset: similarities,
/// printed divergence scores and average powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFixture {
    pub name: &'static str,
    pub sim_t1: f64,
    pub sim_t2: f64,
    pub ds_trend_printed: f64,
    pub sim_s1: f64,
    pub sim_s2: f64,
    pub ds_season_printed: f64,
    pub p_trend: f64,
    pub p_season: f64,
}

impl ProfileFixture {
    /// Report with divergence scores recomputed from the similarities.
    pub fn report(&self) -> Result<SimilarityReport> {
        SimilarityReport::new(self.sim_t1, self.sim_t2, self.sim_s1, self.sim_s2, self.p_trend, self.p_season)
    }
}

const fn fixture(name: &'static str, v: [f64; 8]) -> ProfileFixture {
    ProfileFixture {
        name,
        sim_t1: v[0],
        sim_t2: v[1],
        ds_trend_printed: v[2],
        sim_s1: v[3],
        sim_s2: v[4],
        ds_season_printed: v[5],
        p_trend: v[6],
        p_season: v[7],
    }
}

pub const REALWORLD_FIXTURES: [ProfileFixture; 6] = [
    fixture("HAR", [0.0511, 0.0528, 0.0329, 0.263, 0.0939, 0.9479, 0.8794, 0.0933]),
    fixture("PTB", [0.1768, 0.1585, 0.1094, 0.1814, 0.3004, 0.4938, 0.2414, 0.3990]),
    fixture("FD", [0.1031, 0.0994, 0.0365, 0.0612, 0.0575, 0.0612, 0.0177, 0.5565]),
    fixture("MP", [0.2136, 0.2037, 0.0472, 0.3615, 0.3447, 0.0476, 0.7471, 0.2466]),
    fixture("ElecD", [0.4271, 0.3652, 0.1562, 0.2199, 0.1814, 0.1919, 0.1431, 0.5752]),
    fixture("SPX500", [0.0273, 0.023, 0.1696, 0.2832, 0.2687, 0.0526, 0.9999, 0.0003]),
];

pub fn fixture_by_name(name: &str) -> Option<&'static ProfileFixture> {
    REALWORLD_FIXTURES.iter().find(|f| f.name.eq_ignore_ascii_case(name))
}
