//! Cohomogeneity-one metrics `g = φ(θ)²dθ² + f(θ)²g_{S²}` on S³, where θ is
//! the round distance from the pole `p`, together with the geometric
//! measurements used for class membership.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fmm::{self, DiameterBracket};
use crate::grid::{self, RadialGrid};

/// Closed-form radial profile with two derivatives.
pub trait Profile: Send + Sync + std::fmt::Debug {
    fn phi(&self, theta: f64) -> f64;
    fn dphi(&self, theta: f64) -> f64;
    fn f(&self, theta: f64) -> f64;
    fn df(&self, theta: f64) -> f64;
    fn ddf(&self, theta: f64) -> f64;

    fn ddphi(&self, theta: f64) -> f64 {
        let h = 1e-5;
        (self.dphi(theta + h) - self.dphi(theta - h)) / (2.0 * h)
    }
}

/// Pole-regularity tolerance for closed-form profiles.
pub const POLE_TOL_ANALYTIC: f64 = 1e-6;
/// Pole-regularity tolerance for sampled profiles.
pub const POLE_TOL_SAMPLED: f64 = 1e-3;
/// Slack on the pointwise comparison `g ≥ g_{S³}` (absorbs table rounding).
pub const LOWER_BOUND_TOL: f64 = 1e-12;

/// A warped-product metric sampled on a radial grid.
#[derive(Debug, Clone)]
pub struct WarpedMetric {
    grid: RadialGrid,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    ddf: Vec<f64>,
    /// `f / sin θ`, with its pole limits filled in.
    f_over_sin: Vec<f64>,
    analytic: Option<Arc<dyn Profile>>,
    label: String,
}

impl WarpedMetric {
    pub fn from_profile(
        grid: RadialGrid,
        profile: Arc<dyn Profile>,
        label: impl Into<String>,
    ) -> Self {
        let x = grid.nodes();
        let n = x.len();
        let phi: Vec<f64> = x.iter().map(|&t| profile.phi(t)).collect();
        let dphi = x.iter().map(|&t| profile.dphi(t)).collect();
        let f: Vec<f64> = x.iter().map(|&t| profile.f(t)).collect();
        let df: Vec<f64> = x.iter().map(|&t| profile.df(t)).collect();
        let ddf = x.iter().map(|&t| profile.ddf(t)).collect();
        let mut f_over_sin: Vec<f64> = (0..n).map(|i| f[i] / x[i].sin()).collect();
        f_over_sin[0] = df[0];
        f_over_sin[n - 1] = -df[n - 1];
        Self {
            grid,
            phi,
            dphi,
            f,
            df,
            ddf,
            f_over_sin,
            analytic: Some(profile),
            label: label.into(),
        }
    }

    /// Builds a metric from nodal samples; derivatives come from
    /// fourth-order finite differences.
    pub fn from_samples(
        grid: RadialGrid,
        phi: Vec<f64>,
        f: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = grid.len();
        if phi.len() != n || f.len() != n {
            return Err(LabError::Grid(format!(
                "expected {n} samples, got phi={} f={}",
                phi.len(),
                f.len()
            )));
        }
        if phi.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(LabError::Grid("non-finite profile sample".into()));
        }
        let dphi = grid.derivative(&phi);
        let df = grid.derivative(&f);
        let ddf = grid.derivative(&df);
        let x = grid.nodes();
        let mut f_over_sin: Vec<f64> = (0..n).map(|i| f[i] / x[i].sin()).collect();
        grid::fill_poles(&grid, &mut f_over_sin);
        Ok(Self {
            grid,
            phi,
            dphi,
            f,
            df,
            ddf,
            f_over_sin,
            analytic: None,
            label: label.into(),
        })
    }

    /// Resamples this metric on another grid (closed-form profiles only).
    pub fn regrid(&self, grid: RadialGrid) -> Result<Self> {
        match &self.analytic {
            Some(p) => Ok(Self::from_profile(grid, p.clone(), self.label.clone())),
            None => Err(LabError::Refinement(
                "sampled metrics cannot be resampled".into(),
            )),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    pub fn theta(&self) -> &[f64] {
        self.grid.nodes()
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn dphi(&self) -> &[f64] {
        &self.dphi
    }
    pub fn f(&self) -> &[f64] {
        &self.f
    }
    pub fn df(&self) -> &[f64] {
        &self.df
    }
    pub fn ddf(&self) -> &[f64] {
        &self.ddf
    }
    pub fn f_over_sin(&self) -> &[f64] {
        &self.f_over_sin
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn profile(&self) -> Option<&Arc<dyn Profile>> {
        self.analytic.as_ref()
    }
    pub fn is_analytic(&self) -> bool {
        self.analytic.is_some()
    }

    pub fn phi_at(&self, theta: f64) -> f64 {
        match &self.analytic {
            Some(p) => p.phi(theta),
            None => self.grid.interpolate(&self.phi, theta),
        }
    }

    pub fn f_at(&self, theta: f64) -> f64 {
        match &self.analytic {
            Some(p) => p.f(theta),
            None => self.grid.interpolate(&self.f, theta),
        }
    }

    /// Volume density `φ f²` per unit θ and unit-sphere area.
    pub fn density_at(&self, theta: f64) -> f64 {
        let f = self.f_at(theta);
        self.phi_at(theta) * f * f
    }

    /// Nodal volume density `4π φ f²` (so that `∫ … dθ` is a g-volume).
    pub fn volume_density(&self) -> Vec<f64> {
        self.phi
            .iter()
            .zip(&self.f)
            .map(|(p, f)| 4.0 * PI * p * f * f)
            .collect()
    }

    pub fn validate(&self) -> ValidationReport {
        let x = self.theta();
        let n = x.len();
        let mut checks = Vec::new();

        let (i, worst) = worst_of((0..n).map(|i| 1.0 - self.phi[i]));
        checks.push(InvariantVerdict::new("phi_at_least_one", i, x[i], worst, LOWER_BOUND_TOL));

        let (i, worst) = worst_of((0..n).map(|i| x[i].sin() - self.f[i]));
        checks.push(InvariantVerdict::new("f_at_least_sin", i, x[i], worst, LOWER_BOUND_TOL));

        let (i, worst) = worst_of((1..n - 1).map(|i| -self.f[i]));
        checks.push(InvariantVerdict::new("f_positive_interior", i + 1, x[i + 1], worst, 0.0).strict());

        let tol = if self.is_analytic() {
            POLE_TOL_ANALYTIC
        } else {
            POLE_TOL_SAMPLED
        };
        let pole_vals = [self.f[0].abs(), self.f[n - 1].abs()];
        let (k, worst) = worst_of(pole_vals.into_iter());
        checks.push(InvariantVerdict::new(
            "f_vanishes_at_poles",
            if k == 0 { 0 } else { n - 1 },
            x[if k == 0 { 0 } else { n - 1 }],
            worst,
            tol,
        ));
        let slopes = [
            (self.df[0] / self.phi[0] - 1.0).abs(),
            (self.df[n - 1] / self.phi[n - 1] + 1.0).abs(),
        ];
        let (k, worst) = worst_of(slopes.into_iter());
        let idx = if k == 0 { 0 } else { n - 1 };
        checks.push(InvariantVerdict::new("pole_regularity", idx, x[idx], worst, tol));

        let pass = checks.iter().all(|c| c.pass);
        ValidationReport { checks, pass }
    }

    /// Scalar curvature `R = −4 f_ss/f + 2(1 − f_s²)/f²` with `s` the
    /// g-arclength; the pole values are cubic extrapolations.
    pub fn scalar_curvature(&self) -> Result<Vec<f64>> {
        let n = self.grid.len();
        let mut r = vec![0.0; n];
        for i in 1..n - 1 {
            let (phi, f) = (self.phi[i], self.f[i]);
            if f <= 0.0 {
                return Err(LabError::DegenerateMetric(format!(
                    "f = {f} at interior θ = {}",
                    self.theta()[i]
                )));
            }
            let fs = self.df[i] / phi;
            let fss = (self.ddf[i] * phi - self.df[i] * self.dphi[i]) / (phi * phi * phi);
            r[i] = -4.0 * fss / f + 2.0 * (1.0 - fs * fs) / (f * f);
        }
        grid::fill_poles(&self.grid, &mut r);
        Ok(r)
    }

    /// Total volume `4π ∫ φ f² dθ` (composite Simpson, fourth order).
    pub fn volume(&self) -> f64 {
        self.grid.integrate(&self.volume_density())
    }

    /// Scalar deficit `m(g) = (∫ [(6 − R)⁺]² dV_g)^{1/4}`.
    pub fn scalar_deficit(&self) -> Result<f64> {
        let r = self.scalar_curvature()?;
        Ok(deficit_from_curvature(self, &r))
    }

    /// g-volume of the round ball `B^S(q, r)` where `q` sits at colatitude
    /// `q_colat`. The azimuthal integral is done in closed form, leaving a
    /// one-dimensional Gauss-Legendre quadrature in θ split at the kinks.
    pub fn ball_volume(&self, q_colat: f64, r: f64) -> Result<f64> {
        if r < 0.0 || !r.is_finite() {
            return Err(LabError::Domain(format!("ball radius must be ≥ 0, got {r}")));
        }
        if !(0.0..=PI).contains(&q_colat) {
            return Err(LabError::Domain(format!(
                "colatitude must lie in [0, π], got {q_colat}"
            )));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let r = r.min(PI);
        let rule = grid::gauss_legendre(8);
        let (sq, cq) = (q_colat.sin(), q_colat.cos());
        let cr = r.cos();
        let polar = sq < 1e-14;
        let cap = move |theta: f64| -> f64 {
            // ∫ 1[d ≤ r] sin α dα over α ∈ [0, π]
            if polar {
                let d = if cq > 0.0 { theta } else { PI - theta };
                return if d <= r { 2.0 } else { 0.0 };
            }
            let st = theta.sin();
            if st < 1e-300 {
                let d = if theta < 1.0 { q_colat } else { PI - q_colat };
                return if d <= r { 2.0 } else { 0.0 };
            }
            let c = (cr - theta.cos() * cq) / (st * sq);
            1.0 - c.clamp(-1.0, 1.0)
        };
        let lo = (q_colat - r).max(0.0);
        let hi = (q_colat + r).min(PI);
        let mut cuts = vec![lo, hi];
        for k in [r - q_colat, 2.0 * PI - q_colat - r] {
            if k > lo && k < hi {
                cuts.push(k);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let integrand = |t: f64| self.density_at(t) * cap(t);
        let total: f64 = cuts
            .windows(2)
            .map(|w| grid::integrate_fn(integrand, w[0], w[1], 64, &rule))
            .sum();
        Ok(2.0 * PI * total)
    }

    pub fn diameter_bound(&self) -> Result<DiameterBracket> {
        fmm::diameter_bracket(self, &fmm::FmmConfig::default())
    }

    /// Level-sphere Cheeger scan: `min_s 4πf(s)² / min(|θ<s|, |θ>s|)`.
    /// An upper bound on the true Cheeger constant.
    pub fn cheeger_levelset(&self) -> CheegerLevelset {
        let dens = self.volume_density();
        let cum = self.grid.cumulative(&dens);
        let total = cum[cum.len() - 1];
        let x = self.theta();
        let mut best = CheegerLevelset {
            value: f64::INFINITY,
            colatitude: PI / 2.0,
        };
        for i in 1..x.len() - 1 {
            let smaller = cum[i].min(total - cum[i]);
            let v = 4.0 * PI * self.f[i] * self.f[i] / smaller;
            if v < best.value {
                best = CheegerLevelset {
                    value: v,
                    colatitude: x[i],
                };
            }
        }
        best
    }

    pub fn summary(&self) -> Result<GeometrySummary> {
        let scalar_field = self.scalar_curvature()?;
        let deficit = deficit_from_curvature(self, &scalar_field);
        let diameter = self.diameter_bound()?;
        Ok(GeometrySummary {
            volume: self.volume(),
            diam_lower: diameter.lower,
            diam_upper: diameter.upper,
            diameter,
            deficit,
            cheeger_levelset: self.cheeger_levelset(),
            scalar_field,
        })
    }

    pub fn class_membership(&self, params: &ClassParams) -> Result<MembershipReport> {
        params.check()?;
        let validation = self.validate();
        let summary = self.summary()?;
        Ok(membership_from(&validation, &summary, params))
    }

    /// Plain-text table with columns `theta phi f`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# theta phi f\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{:.17e} {:.17e} {:.17e}",
                self.theta()[i],
                self.phi[i],
                self.f[i]
            );
        }
        out
    }

    pub fn from_table(text: &str, label: impl Into<String>) -> Result<Self> {
        let rows = parse_table(text, 3)?;
        let theta = rows.iter().map(|r| r[0]).collect();
        let phi = rows.iter().map(|r| r[1]).collect();
        let f = rows.iter().map(|r| r[2]).collect();
        let grid = RadialGrid::from_nodes(theta)?;
        Self::from_samples(grid, phi, f, label)
    }
}

pub(crate) fn deficit_from_curvature(metric: &WarpedMetric, r: &[f64]) -> f64 {
    let dens = metric.volume_density();
    let g: Vec<f64> = r.iter().map(|r| 6.0 - r).collect();
    let w: Vec<f64> = g.iter().zip(&dens).map(|(g, d)| g * d).collect();
    metric.grid.integrate_positive_part(&g, &w).max(0.0).powf(0.25)
}

/// Parses whitespace-separated numeric rows, skipping blank and `#` lines.
pub fn parse_table(text: &str, columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| LabError::Parse(format!("line {}: {e}", lineno + 1)))?;
        if vals.len() != columns {
            return Err(LabError::Parse(format!(
                "line {}: expected {columns} columns, found {}",
                lineno + 1,
                vals.len()
            )));
        }
        rows.push(vals);
    }
    Ok(rows)
}

fn worst_of(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantVerdict {
    pub name: String,
    pub worst_index: usize,
    pub worst_theta: f64,
    /// Size of the worst violation (≤ 0 means satisfied with room).
    pub magnitude: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InvariantVerdict {
    fn new(name: &str, idx: usize, theta: f64, magnitude: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            worst_index: idx,
            worst_theta: theta,
            magnitude,
            tolerance,
            pass: magnitude <= tolerance,
        }
    }

    fn strict(mut self) -> Self {
        self.pass = self.magnitude < self.tolerance;
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<InvariantVerdict>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&InvariantVerdict> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Condition (i) of the class: `g ≥ g_{S³}` plus a regular metric.
    pub fn lower_bound_holds(&self) -> bool {
        self.pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheegerLevelset {
    pub value: f64,
    pub colatitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub volume: f64,
    pub diam_lower: f64,
    pub diam_upper: f64,
    pub diameter: DiameterBracket,
    pub deficit: f64,
    pub cheeger_levelset: CheegerLevelset,
    #[serde(skip)]
    pub scalar_field: Vec<f64>,
}

/// Bounds `(V, D, m̄, Λ)` defining the admissible class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParams {
    pub volume: f64,
    pub diameter: f64,
    pub mbar: f64,
    pub lambda: f64,
}

impl ClassParams {
    pub fn new(volume: f64, diameter: f64, mbar: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            volume,
            diameter,
            mbar,
            lambda,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("V", self.volume),
            ("D", self.diameter),
            ("mbar", self.mbar),
            ("Lambda", self.lambda),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::Config(format!(
                    "class parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: String,
    pub description: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipReport {
    pub conditions: Vec<ConditionVerdict>,
    pub member: bool,
    /// Condition (v) was decided by the level-sphere surrogate, which only
    /// bounds the Cheeger constant from above.
    pub cheeger_from_surrogate: bool,
}

impl MembershipReport {
    pub fn failed(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.condition.as_str())
            .collect()
    }
}

pub fn membership_from(
    validation: &ValidationReport,
    summary: &GeometrySummary,
    params: &ClassParams,
) -> MembershipReport {
    let worst_lower = validation
        .checks
        .iter()
        .map(|c| c.magnitude - c.tolerance)
        .fold(f64::NEG_INFINITY, f64::max);
    let conditions = vec![
        ConditionVerdict {
            condition: "i".into(),
            description: "g >= g_round (phi >= 1, f >= sin, regular poles)".into(),
            value: worst_lower,
            bound: 0.0,
            pass: validation.pass,
            note: None,
        },
        ConditionVerdict {
            condition: "ii".into(),
            description: "volume <= V".into(),
            value: summary.volume,
            bound: params.volume,
            pass: summary.volume <= params.volume,
            note: None,
        },
        ConditionVerdict {
            condition: "iii".into(),
            description: "diameter <= D (upper end of bracket)".into(),
            value: summary.diam_upper,
            bound: params.diameter,
            pass: summary.diam_upper <= params.diameter,
            note: None,
        },
        ConditionVerdict {
            condition: "iv".into(),
            description: "scalar deficit m(g) <= mbar".into(),
            value: summary.deficit,
            bound: params.mbar,
            pass: summary.deficit <= params.mbar,
            note: None,
        },
        ConditionVerdict {
            condition: "v".into(),
            description: "Cheeger constant >= Lambda".into(),
            value: summary.cheeger_levelset.value,
            bound: params.lambda,
            pass: summary.cheeger_levelset.value >= params.lambda,
            note: Some("level-sphere surrogate (upper bound on IN_1)".into()),
        },
    ];
    let member = conditions.iter().all(|c| c.pass);
    MembershipReport {
        conditions,
        member,
        cheeger_from_surrogate: true,
    }
}
