//! Sequence experiments: a family swept along a parameter schedule, with the
//! hypotheses of the volume-above-distance-below convergence criterion
//! checked at every index.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::families::{FamilyRegistry, FamilySpec, ParamMap};
use crate::metric::{membership_from, ClassParams, MembershipReport};

/// Volume of the round unit 3-sphere.
pub const ROUND_VOLUME: f64 = 2.0 * PI * PI;

/// One parameter swept over explicit values; `ties` sets further parameters
/// to a multiple of the swept value at each index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub param: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub ties: ParamMap,
}

impl Schedule {
    /// `start·ratio^k`, `k = 0..count`.
    pub fn geometric(param: &str, start: f64, ratio: f64, count: usize) -> Self {
        Self {
            param: param.into(),
            values: (0..count).map(|k| start * ratio.powi(k as i32)).collect(),
            ties: ParamMap::new(),
        }
    }

    pub fn tie(mut self, param: &str, factor: f64) -> Self {
        self.ties.insert(param.into(), factor);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub base: FamilySpec,
    pub schedule: Schedule,
    /// Nodes requested per member; families may refine further.
    pub grid_size: usize,
}

impl SequenceSpec {
    pub fn members(&self) -> Vec<FamilySpec> {
        self.schedule
            .values
            .iter()
            .map(|&v| {
                let mut s = self.base.clone().with(&self.schedule.param, v);
                for (k, factor) in &self.schedule.ties {
                    s = s.with(k, factor * v);
                }
                s
            })
            .collect()
    }

    /// `η_i = 2^{−i}`, `i = 1..count`.
    pub fn bump(count: usize, grid_size: usize) -> Self {
        Self {
            base: FamilySpec::new("bump"),
            schedule: Schedule::geometric("eta", 0.5, 0.5, count),
            grid_size,
        }
    }

    /// Fixed length, `w_i = 2^{−i}` for `i = first, first + 1, …` and
    /// `θ0 = 2w_i`. The family needs `first ≥ 3`.
    pub fn tendril(length: f64, first: i32, count: usize, grid_size: usize) -> Self {
        Self {
            base: FamilySpec::new("tendril").with("L", length),
            schedule: Schedule::geometric("w", 2f64.powi(-first), 0.5, count).tie("theta0", 2.0),
            grid_size,
        }
    }

    /// `A_i = i` at a fixed neck.
    pub fn bubble(delta: f64, count: usize, grid_size: usize) -> Self {
        Self {
            base: FamilySpec::new("bubble").with("delta", delta),
            schedule: Schedule {
                param: "A".into(),
                values: (1..=count).map(|i| i as f64).collect(),
                ties: ParamMap::new(),
            },
            grid_size,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub index: usize,
    pub label: String,
    pub value: f64,
    pub nodes: usize,
    pub deficit: f64,
    pub volume: f64,
    /// `|vol − 2π²|`
    pub volume_gap: f64,
    pub diam_lower: f64,
    pub diam_upper: f64,
    pub cheeger_levelset: f64,
    pub membership: MembershipReport,
    /// `g ≥ g_{S³}` pointwise, which gives `g_i ≥ (1 − 1/i) g_{S³}`.
    pub above_round: bool,
    pub diameter_bounded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceError {
    pub index: usize,
    pub label: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub deficit_decreasing: bool,
    pub gap_decreasing: bool,
    pub final_deficit: f64,
    pub final_gap: f64,
    /// Smallest `K` with `gap_i ≤ K m_i^{1/24}` along the sequence.
    pub rate_constant: f64,
    /// Least-squares slope of `log gap` against `log m`.
    pub rate_exponent: f64,
    pub all_members: bool,
    pub all_above_round: bool,
    pub all_diameter_bounded: bool,
    /// Lower bound, diameter bound and a decreasing volume gap at every
    /// index, with no member failing to build.
    pub hypotheses_hold: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub family: String,
    pub param: String,
    pub params: ClassParams,
    pub entries: Vec<SequenceEntry>,
    pub errors: Vec<SequenceError>,
    pub summary: ConvergenceSummary,
}

impl ConvergenceReport {
    /// Entries plus failed indices, which together cover the schedule.
    pub fn len(&self) -> usize {
        self.entries.len() + self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn run_sequence(spec: &SequenceSpec, params: &ClassParams) -> Result<ConvergenceReport> {
    run_sequence_with(&FamilyRegistry::builtin(), spec, params)
}

pub fn run_sequence_with(
    registry: &FamilyRegistry,
    spec: &SequenceSpec,
    params: &ClassParams,
) -> Result<ConvergenceReport> {
    params.check()?;
    registry.get(&spec.base.name)?;
    if spec.schedule.values.is_empty() {
        return Err(LabError::Config("sequence schedule is empty".into()));
    }
    let members = spec.members();
    let results: Vec<std::result::Result<SequenceEntry, SequenceError>> = members
        .par_iter()
        .enumerate()
        .map(|(i, member)| {
            let index = i + 1;
            let value = spec.schedule.values[i];
            entry(registry, member, index, value, spec.grid_size, params).map_err(|e| SequenceError {
                index,
                label: format!("{}[{}={}]", member.name, spec.schedule.param, value),
                error: e.to_string(),
            })
        })
        .collect();
    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => errors.push(e),
        }
    }
    let summary = summarize(&entries, errors.is_empty());
    Ok(ConvergenceReport {
        family: spec.base.name.clone(),
        param: spec.schedule.param.clone(),
        params: *params,
        entries,
        errors,
        summary,
    })
}

fn entry(
    registry: &FamilyRegistry,
    spec: &FamilySpec,
    index: usize,
    value: f64,
    grid_size: usize,
    params: &ClassParams,
) -> Result<SequenceEntry> {
    let grid = registry.grid_for(spec, grid_size)?;
    let metric = registry.make_metric(spec, grid)?;
    let validation = metric.validate();
    let summary = metric.summary()?;
    let membership = membership_from(&validation, &summary, params);
    Ok(SequenceEntry {
        index,
        label: metric.label().to_string(),
        value,
        nodes: metric.theta().len(),
        deficit: summary.deficit,
        volume: summary.volume,
        volume_gap: (summary.volume - ROUND_VOLUME).abs(),
        diam_lower: summary.diam_lower,
        diam_upper: summary.diam_upper,
        cheeger_levelset: summary.cheeger_levelset.value,
        above_round: validation.lower_bound_holds(),
        diameter_bounded: summary.diam_upper <= params.diameter,
        membership,
    })
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Slope of the least-squares line through `(x, y)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx > 1e-12 * n {
        sxy / sxx
    } else {
        f64::NAN
    }
}

fn summarize(entries: &[SequenceEntry], complete: bool) -> ConvergenceSummary {
    let m: Vec<f64> = entries.iter().map(|e| e.deficit).collect();
    let gap: Vec<f64> = entries.iter().map(|e| e.volume_gap).collect();
    let rate_constant = m
        .iter()
        .zip(&gap)
        .map(|(m, g)| if *g == 0.0 { 0.0 } else { g / m.powf(1.0 / 24.0) })
        .fold(0.0, f64::max);
    let (lx, ly): (Vec<f64>, Vec<f64>) = m
        .iter()
        .zip(&gap)
        .filter(|(m, g)| **m > 0.0 && **g > 0.0)
        .map(|(m, g)| (m.ln(), g.ln()))
        .unzip();
    let rate_exponent = if lx.len() >= 2 { fit_slope(&lx, &ly) } else { f64::NAN };
    let gap_decreasing = strictly_decreasing(&gap);
    let all_above_round = entries.iter().all(|e| e.above_round);
    let all_diameter_bounded = entries.iter().all(|e| e.diameter_bounded);
    ConvergenceSummary {
        deficit_decreasing: strictly_decreasing(&m),
        gap_decreasing,
        final_deficit: m.last().copied().unwrap_or(f64::NAN),
        final_gap: gap.last().copied().unwrap_or(f64::NAN),
        rate_constant,
        rate_exponent,
        all_members: entries.iter().all(|e| e.membership.member),
        all_above_round,
        all_diameter_bounded,
        hypotheses_hold: complete && !entries.is_empty() && all_above_round && all_diameter_bounded && gap_decreasing,
    }
}
