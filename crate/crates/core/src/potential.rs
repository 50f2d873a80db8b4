//! The potential `u` solving `Δ_g u + 3cot(θ)|∇u| = 0`, `u(0) = 1`,
//! `u(π) = −1`, by two independent routes.
//!
//! For a radial solution the equation is `w′ = −3cot(θ) f²|u′|` with
//! `w = (f²/φ)u′`. When `u′ ≤ 0` this is the linear flux law
//! `w′ = 3φ cot(θ) w`, so `u′ = C φ W/f²` with `W = exp(3∫φ cot)`.
//! [`solve_quadrature`] integrates that closed form; [`solve_bvp`] solves the
//! regularized Dirichlet problem on `[ε, π − ε]` by damped Picard iteration
//! without assuming monotonicity. Neither result is trusted until its PDE
//! residual has been measured.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{self, RadialGrid};
use crate::metric::{parse_table, WarpedMetric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Regularization radius for the Dirichlet problem.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub picard_tolerance: f64,
    pub damping: f64,
    /// Largest accepted relative PDE residual.
    pub residual_tolerance: f64,
    /// Pole band excluded from the strong residual of quadrature solutions.
    pub pole_band: f64,
    pub linearization: Linearization,
}

/// What a Picard step freezes from the previous iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linearization {
    /// `|u′_k|` enters the right-hand side as a source.
    Magnitude,
    /// `sign(u′_k)` is frozen and `|u′| = sign·u′` stays in the operator.
    Sign,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iterations: 200,
            picard_tolerance: 1e-11,
            damping: 0.5,
            residual_tolerance: 1e-2,
            pole_band: 0.05,
            linearization: Linearization::Sign,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < PI / 8.0) {
            return Err(LabError::SolverConfig(format!(
                "epsilon must lie in (0, pi/8), got {}",
                self.epsilon
            )));
        }
        if !(self.picard_tolerance > 0.0) {
            return Err(LabError::SolverConfig("picard_tolerance must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(LabError::SolverConfig("damping must lie in (0, 1]".into()));
        }
        if self.max_iterations == 0 {
            return Err(LabError::SolverConfig("max_iterations must be positive".into()));
        }
        if !(self.residual_tolerance > 0.0) || !(0.0..PI / 4.0).contains(&self.pole_band) {
            return Err(LabError::SolverConfig(
                "residual_tolerance must be positive and pole_band in [0, pi/4)".into(),
            ));
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub iterations: usize,
    /// Successive sup-differences of the Picard iterates.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub sup: f64,
    /// Root mean square over the nodes where the residual is evaluated.
    pub l2: f64,
    /// Sup of the residual divided by the size of the terms it balances.
    pub relative_sup: f64,
    /// Width of the excluded band at each pole.
    pub band: f64,
}

/// A radial potential sampled on the metric's grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Potential {
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub ddu: Vec<f64>,
    /// `|∇u|/sin θ`, finite at the poles.
    pub ratio: Vec<f64>,
    /// `C` in `(f²/φ)u′ = C sin³θ Q(θ)` (see [`flux_profile`]).
    pub flux_constant: f64,
    pub solver: SolverMeta,
    pub residual: Residual,
}

impl Potential {
    /// Text table with columns `theta u du ratio`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# theta u du ratio\n");
        for i in 0..self.theta.len() {
            let _ = writeln!(
                out,
                "{:.17e} {:.17e} {:.17e} {:.17e}",
                self.theta[i], self.u[i], self.du[i], self.ratio[i]
            );
        }
        out
    }

    /// Loads a table written by [`Potential::to_table`] and re-derives the
    /// fields that are not stored, against `metric`.
    pub fn from_table(text: &str, metric: &WarpedMetric, tolerance: f64) -> Result<Self> {
        let rows = parse_table(text, 4)?;
        if rows.len() != metric.grid().len() {
            return Err(LabError::Parse(format!(
                "potential has {} rows, metric grid has {}",
                rows.len(),
                metric.grid().len()
            )));
        }
        let u: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let du: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let mut pot = assemble(metric, u, du, 0.0, SolverMeta {
            method: "table".into(),
            epsilon: None,
            iterations: 0,
            history: Vec::new(),
        });
        pot.residual = strong_residual(metric, &pot, tolerance);
        Ok(pot)
    }

    /// Wraps arbitrary nodal `u`, `u′` (not necessarily a solution) and
    /// measures its residual with pole band `band`.
    pub fn from_values(metric: &WarpedMetric, u: Vec<f64>, du: Vec<f64>, band: f64) -> Result<Self> {
        let n = metric.grid().len();
        if u.len() != n || du.len() != n {
            return Err(LabError::Domain(format!(
                "potential arrays have {}/{} entries, grid has {n}",
                u.len(),
                du.len()
            )));
        }
        let mut pot = assemble(metric, u, du, 0.0, SolverMeta {
            method: "given".into(),
            epsilon: None,
            iterations: 0,
            history: Vec::new(),
        });
        pot.residual = strong_residual(metric, &pot, band);
        Ok(pot)
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_monotone(&self) -> bool {
        self.u.windows(2).all(|w| w[1] <= w[0] + 1e-14)
    }
}

/// `Q = W/sin³θ` with `W = exp(3∫φ cot)`, normalized as in the module docs.
///
/// The pole singularities of `∫φ cot` are split off in closed form: with
/// `ψ = φ − φ(0)(1 + cos θ)/2 − φ(π)(1 − cos θ)/2`,
/// `Q = (√2 sin(θ/2))^{3(φ(0)−1)} (√2 cos(θ/2))^{3(φ(π)−1)}
///      · exp(3(φ(0) − φ(π))cos θ/2 + 3∫₀^θ ψ cot)`.
pub fn flux_profile(metric: &WarpedMetric) -> Vec<f64> {
    let x = metric.theta();
    let phi = metric.phi();
    let n = x.len();
    let (p0, pn) = (phi[0], phi[n - 1]);
    let mut psi_cot: Vec<f64> = (0..n)
        .map(|i| {
            let t = x[i];
            let psi = phi[i] - 0.5 * p0 * (1.0 + t.cos()) - 0.5 * pn * (1.0 - t.cos());
            psi * t.cos() / t.sin()
        })
        .collect();
    psi_cot[0] = metric.dphi()[0];
    psi_cot[n - 1] = metric.dphi()[n - 1];
    let acc = metric.grid().cumulative(&psi_cot);
    (0..n)
        .map(|i| {
            let t = x[i];
            let a = (SQRT_2 * (0.5 * t).sin()).powf(3.0 * (p0 - 1.0));
            let b = (SQRT_2 * (0.5 * t).cos().max(0.0)).powf(3.0 * (pn - 1.0));
            a * b * (1.5 * (p0 - pn) * t.cos() + 3.0 * acc[i]).exp()
        })
        .collect()
}

/// Closed-form potential from the flux law.
pub fn solve_quadrature(metric: &WarpedMetric, cfg: &SolverConfig) -> Result<Potential> {
    let x = metric.theta();
    let n = x.len();
    let q = flux_profile(metric);
    let fs = metric.f_over_sin();
    let phi = metric.phi();
    if fs.iter().any(|v| !(*v > 0.0)) || q.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Solver(
            "flux integrand is not integrable (pole regularity fails)".into(),
        ));
    }
    let dens: Vec<f64> = (0..n).map(|i| phi[i] * x[i].sin() * q[i] / (fs[i] * fs[i])).collect();
    let acc = metric.grid().cumulative(&dens);
    let total = acc[n - 1];
    if !(total > 0.0 && total.is_finite()) {
        return Err(LabError::Solver(format!("flux normalization {total} is not positive")));
    }
    let c = -2.0 / total;
    let u: Vec<f64> = acc.iter().map(|a| 1.0 + c * a).collect();
    let du: Vec<f64> = dens.iter().map(|d| c * d).collect();

    // u″ from the flux law: u″ = u′(φ′/φ + 3φ cot − 2f′/f)
    let (dphi, f, df) = (metric.dphi(), metric.f(), metric.df());
    let mut ddu: Vec<f64> = (0..n)
        .map(|i| {
            let t = x[i];
            du[i] * (dphi[i] / phi[i] + 3.0 * phi[i] * t.cos() / t.sin() - 2.0 * df[i] / f[i])
        })
        .collect();
    grid::fill_poles(metric.grid(), &mut ddu);
    let ratio: Vec<f64> = (0..n).map(|i| -c * q[i] / (fs[i] * fs[i])).collect();

    let mut pot = Potential {
        theta: x.to_vec(),
        u,
        du,
        ddu,
        ratio,
        flux_constant: c,
        solver: SolverMeta {
            method: "quadrature".into(),
            epsilon: None,
            iterations: 0,
            history: Vec::new(),
        },
        residual: Residual {
            sup: 0.0,
            l2: 0.0,
            relative_sup: 0.0,
            band: cfg.pole_band,
        },
    };
    pot.residual = strong_residual(metric, &pot, cfg.pole_band);
    guard(&pot, cfg)?;
    Ok(pot)
}

fn guard(pot: &Potential, cfg: &SolverConfig) -> Result<()> {
    if !(pot.residual.relative_sup <= cfg.residual_tolerance) {
        return Err(LabError::ResidualTooLarge {
            residual: pot.residual.relative_sup,
            tolerance: cfg.residual_tolerance,
        });
    }
    Ok(())
}

/// Builds the derived arrays from nodal `u` and `u′`; `u″` by finite
/// differences.
fn assemble(metric: &WarpedMetric, u: Vec<f64>, du: Vec<f64>, c: f64, solver: SolverMeta) -> Potential {
    let x = metric.theta();
    let n = x.len();
    let ddu = metric.grid().derivative(&du);
    let phi = metric.phi();
    let mut ratio: Vec<f64> = (0..n).map(|i| du[i].abs() / (phi[i] * x[i].sin())).collect();
    grid::fill_poles(metric.grid(), &mut ratio);
    for r in ratio.iter_mut() {
        *r = r.max(0.0);
    }
    Potential {
        theta: x.to_vec(),
        u,
        du,
        ddu,
        ratio,
        flux_constant: c,
        solver,
        residual: Residual {
            sup: 0.0,
            l2: 0.0,
            relative_sup: 0.0,
            band: 0.0,
        },
    }
}

/// Residual of `Δ_g u + 3cot|∇u| = 0` for a potential given by nodal `u′`,
/// on nodes at distance `> band` from the poles. Never uses the flux law.
///
/// `sup` and `l2` are of the strong form, with `u″` from a six-order
/// finite difference of `u′`. `relative_sup` is the conservation form: the
/// largest per-cell imbalance `|w(θ_{i+1}) − w(θ_i) + ∫ 3cot f²|u′||`,
/// `w = (f²/φ)u′`, over the largest per-cell flux. It stays meaningful
/// where `u′` varies too fast for pointwise differences.
pub fn strong_residual(metric: &WarpedMetric, pot: &Potential, band: f64) -> Residual {
    let grid = metric.grid();
    let x = metric.theta();
    let n = x.len();
    let (phi, dphi, f, df) = (metric.phi(), metric.dphi(), metric.f(), metric.df());
    let inside = |t: f64| t > band && t < PI - band;

    let ddu = grid.derivative_with(&pot.du, 7);
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    let mut count = 0usize;
    for i in 1..n - 1 {
        if !inside(x[i]) {
            continue;
        }
        let cot = x[i].cos() / x[i].sin();
        let r = ddu[i] / (phi[i] * phi[i]) - dphi[i] * pot.du[i] / phi[i].powi(3)
            + 2.0 * df[i] * pot.du[i] / (f[i] * phi[i] * phi[i])
            + 3.0 * cot * pot.du[i].abs() / phi[i];
        sup = sup.max(r.abs());
        sq += r * r;
        count += 1;
    }

    let w: Vec<f64> = (0..n).map(|i| f[i] * f[i] * pot.du[i] / phi[i]).collect();
    let mut src: Vec<f64> = (0..n)
        .map(|i| 3.0 * x[i].cos() / x[i].sin() * f[i] * f[i] * pot.du[i].abs())
        .collect();
    grid::fill_poles(grid, &mut src);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n - 1 {
        if !(inside(x[i]) && inside(x[i + 1])) {
            continue;
        }
        let dw = w[i + 1] - w[i];
        let s = grid.cell_integral(&src, i, x[i], x[i + 1]);
        worst = worst.max((dw + s).abs());
        scale = scale.max(dw.abs() + s.abs());
    }
    Residual {
        sup,
        l2: if count > 0 { (sq / count as f64).sqrt() } else { 0.0 },
        relative_sup: if scale > 0.0 { worst / scale } else { worst },
        band,
    }
}

/// Residual sup and RMS of `pot` on `metric` (see [`strong_residual`]).
/// BVP potentials report the residual recorded by the solver.
pub fn pde_residual(metric: &WarpedMetric, pot: &Potential) -> (f64, f64) {
    if pot.solver.method == "bvp" {
        return (pot.residual.sup, pot.residual.l2);
    }
    let band = if pot.residual.band > 0.0 {
        pot.residual.band
    } else {
        SolverConfig::default().pole_band
    };
    let r = strong_residual(metric, pot, band);
    (r.sup, r.l2)
}

/// Flux-law defect `max |d/dθ log|w| − 3φ cot θ|` with `w = (f²/φ)u′`.
pub fn flux_law_defect(metric: &WarpedMetric, pot: &Potential, band: f64) -> f64 {
    let x = metric.theta();
    let (phi, f) = (metric.phi(), metric.f());
    let logw: Vec<f64> = (0..x.len())
        .map(|i| (f[i] * f[i] * pot.du[i].abs() / phi[i]).max(1e-300).ln())
        .collect();
    let dlog = metric.grid().derivative(&logw);
    (0..x.len())
        .filter(|&i| x[i] > band && x[i] < PI - band)
        .map(|i| (dlog[i] - 3.0 * phi[i] * x[i].cos() / x[i].sin()).abs())
        .fold(0.0, f64::max)
}

/// Discretization of `[ε, π − ε]` for the Dirichlet problem.
struct BvpGrid {
    x: Vec<f64>,
    /// `f²/φ` at cell midpoints.
    a_mid: Vec<f64>,
    /// `3 cot θ f²` at nodes.
    src: Vec<f64>,
}

/// Below this distance from a pole the cells of the Dirichlet grid are split
/// so that their width stays proportional to `h·θ/POLAR_ZONE`.
const POLAR_ZONE: f64 = 0.1;

/// The `cot θ` terms vary on the scale θ itself, so a cell of width `h` next
/// to `θ = ε` is only resolved once `h ≪ ε`; subdividing there restores the
/// second-order regime on uniform grids.
fn refine_polar(x: &[f64]) -> Vec<f64> {
    let h = x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(x.len());
    for w in x.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = a.min(PI - b);
        let k = ((b - a) * POLAR_ZONE / (h * d)).ceil().max(1.0) as usize;
        for j in 0..k {
            out.push(a + (b - a) * j as f64 / k as f64);
        }
    }
    out.push(x[x.len() - 1]);
    out
}

impl BvpGrid {
    fn new(metric: &WarpedMetric, eps: f64) -> Self {
        let nodes = metric.theta();
        let mut x = vec![eps];
        for i in 1..nodes.len() - 1 {
            let t = nodes[i];
            let gap = 0.25 * (nodes[i + 1] - nodes[i - 1]);
            if t > eps + gap && t < PI - eps - gap {
                x.push(t);
            }
        }
        x.push(PI - eps);
        let x = refine_polar(&x);
        let a_mid = x
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                let f = metric.f_at(m);
                f * f / metric.phi_at(m)
            })
            .collect();
        let src = x
            .iter()
            .map(|&t| {
                let f = metric.f_at(t);
                3.0 * t.cos() / t.sin() * f * f
            })
            .collect();
        Self { x, a_mid, src }
    }

    fn len(&self) -> usize {
        self.x.len()
    }

    /// Centered three-point derivative (one-sided at the ends).
    fn derivative(&self, u: &[f64]) -> Vec<f64> {
        let x = &self.x;
        let n = x.len();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            d[i] = (hm * hm * u[i + 1] - hp * hp * u[i - 1] - (hm * hm - hp * hp) * u[i])
                / (hm * hp * (hm + hp));
        }
        d[0] = one_sided(&x[0..3], &u[0..3], x[0]);
        d[n - 1] = one_sided(&x[n - 3..], &u[n - 3..], x[n - 1]);
        d
    }

    /// Tridiagonal row `(lower, diag, upper)` at interior node `i` of
    /// `((f²/φ)v′)′ + c·v′`, with `v′` centered, or upwinded where the cell
    /// Péclet number `|c|h/(f²/φ)` exceeds 2.
    fn row(&self, i: usize, c: f64) -> (f64, f64, f64) {
        let x = &self.x;
        let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let h = 0.5 * (hm + hp);
        let mut lo = self.a_mid[i - 1] / (hm * h);
        let mut up = self.a_mid[i] / (hp * h);
        let mut d = -(lo + up);
        let a = 0.5 * (self.a_mid[i - 1] + self.a_mid[i]);
        if c.abs() * h <= 2.0 * a {
            lo -= c * hp / (hm * (hm + hp));
            d += c * (hp - hm) / (hm * hp);
            up += c * hm / (hp * (hm + hp));
        } else if c > 0.0 {
            d -= c / hp;
            up += c / hp;
        } else {
            lo -= c / hm;
            d += c / hm;
        }
        (lo, d, up)
    }

    /// Signs of `u′`. Where `|u′|` is below `1e-8·max|u′|` the sign is
    /// numerically undetermined and the previous sign is kept.
    fn signs(&self, u: &[f64], prev: &[f64]) -> Vec<f64> {
        let du = self.derivative(u);
        let floor = 1e-8 * du.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.len())
            .map(|i| {
                if du[i].abs() <= floor {
                    prev[i]
                } else {
                    du[i].signum()
                }
            })
            .collect()
    }

    /// Convection coefficients `c = 3cot θ f²·sign(u′)`, so `3cot θ f²|u′| = c·u′`.
    fn convection(&self, signs: &[f64]) -> Vec<f64> {
        signs.iter().zip(&self.src).map(|(s, c)| s * c).collect()
    }

    /// Solves `((f²/φ)v′)′ + conv·v′ = rhs` with `v = 1` at ε and
    /// `v = −1` at π − ε.
    fn solve_linear(&self, rhs: &[f64], conv: Option<&[f64]>) -> Vec<f64> {
        let n = self.len();
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut b = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            let (l, d, u) = self.row(i, conv.map_or(0.0, |c| c[i]));
            lower[k] = l;
            diag[k] = d;
            upper[k] = u;
            b[k] = rhs[i];
        }
        b[0] -= lower[0];
        b[m - 1] += upper[m - 1];
        let sol = thomas(&lower, &diag, &upper, &mut b);
        let mut v = Vec::with_capacity(n);
        v.push(1.0);
        v.extend(sol);
        v.push(-1.0);
        v
    }

    /// Residual of the nonlinear discrete equation, scaled by the diagonal.
    fn residual(&self, u: &[f64], signs: &[f64]) -> (f64, f64) {
        let conv = self.convection(signs);
        let n = self.len();
        let mut sup = 0.0f64;
        let mut sq = 0.0;
        for i in 1..n - 1 {
            let (l, d, up) = self.row(i, conv[i]);
            let r = (l * u[i - 1] + d * u[i] + up * u[i + 1]) / d.abs();
            sup = sup.max(r.abs());
            sq += r * r;
        }
        (sup, (sq / (n - 2) as f64).sqrt())
    }
}

fn one_sided(xs: &[f64], us: &[f64], at: f64) -> f64 {
    (0..3).map(|k| us[k] * grid::lagrange_basis_derivative(xs, k, at)).sum()
}

/// Thomas algorithm; `b` is overwritten.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], b: &mut [f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = diag[0];
    c[0] = upper[0] / d;
    b[0] /= d;
    for k in 1..m {
        d = diag[k] - lower[k] * c[k - 1];
        c[k] = upper[k] / d;
        b[k] = (b[k] - lower[k] * b[k - 1]) / d;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = b[m - 1];
    for k in (0..m - 1).rev() {
        x[k] = b[k] - c[k] * x[k + 1];
    }
    x
}

/// Regularized Dirichlet problem on `[ε, π − ε]` by damped Picard iteration,
/// extended by the boundary values to `[0, π]`.
pub fn solve_bvp(metric: &WarpedMetric, cfg: &SolverConfig) -> Result<Potential> {
    solve_bvp_from(metric, cfg, None)
}

/// As [`solve_bvp`], warm-started from a previous potential.
pub fn solve_bvp_from(metric: &WarpedMetric, cfg: &SolverConfig, start: Option<&Potential>) -> Result<Potential> {
    cfg.check()?;
    let bg = BvpGrid::new(metric, cfg.epsilon);
    let n = bg.len();
    if n < 5 {
        return Err(LabError::SolverConfig("epsilon leaves no interior nodes".into()));
    }
    let eps = cfg.epsilon;
    let mut u: Vec<f64> = match start {
        Some(p) => {
            let g = RadialGrid::from_nodes(p.theta.clone())?;
            bg.x.iter().map(|&t| g.interpolate(&p.u, t).clamp(-1.0, 1.0)).collect()
        }
        None => bg
            .x
            .iter()
            .map(|&t| (PI * (t - eps) / (PI - 2.0 * eps)).cos())
            .collect(),
    };
    u[0] = 1.0;
    u[n - 1] = -1.0;
    let mut history = Vec::new();
    let mut converged = false;
    let mut signs = vec![-1.0; n];
    for _ in 0..cfg.max_iterations {
        signs = bg.signs(&u, &signs);
        let v = match cfg.linearization {
            Linearization::Magnitude => {
                let du = bg.derivative(&u);
                let rhs: Vec<f64> = (0..n).map(|i| -bg.src[i] * du[i].abs()).collect();
                bg.solve_linear(&rhs, None)
            }
            Linearization::Sign => bg.solve_linear(&vec![0.0; n], Some(&bg.convection(&signs))),
        };
        let mut diff = 0.0f64;
        for i in 0..n {
            let next = (1.0 - cfg.damping) * u[i] + cfg.damping * v[i];
            diff = diff.max((next - u[i]).abs());
            u[i] = next;
        }
        if !diff.is_finite() {
            return Err(LabError::Solver("Picard iterate became non-finite".into()));
        }
        history.push(diff);
        if diff <= cfg.picard_tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LabError::NoConvergence {
            iterations: history.len(),
            last: history.last().copied().unwrap_or(f64::NAN),
            history,
        });
    }
    let signs = bg.signs(&u, &signs);
    let (res_sup, res_l2) = bg.residual(&u, &signs);
    let du_b = bg.derivative(&u);

    // transfer to the metric grid, constant beyond ε
    let theta = metric.theta();
    let bgrid_interp = |vals: &[f64], t: f64| -> f64 {
        let k = match bg.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(k) => return vals[k],
            Err(k) => k.clamp(1, n - 1),
        };
        let (x0, x1) = (bg.x[k - 1], bg.x[k]);
        let s = (t - x0) / (x1 - x0);
        vals[k - 1] * (1.0 - s) + vals[k] * s
    };
    let mut uu = Vec::with_capacity(theta.len());
    let mut dd = Vec::with_capacity(theta.len());
    for &t in theta {
        if t < eps {
            uu.push(1.0);
            dd.push(0.0);
        } else if t > PI - eps {
            uu.push(-1.0);
            dd.push(0.0);
        } else {
            uu.push(bgrid_interp(&u, t));
            dd.push(bgrid_interp(&du_b, t));
        }
    }
    let q = flux_profile(metric);
    let (phi, f) = (metric.phi(), metric.f());
    let samples: Vec<f64> = (0..theta.len())
        .filter(|&i| theta[i] > PI / 4.0 && theta[i] < 3.0 * PI / 4.0)
        .map(|i| f[i] * f[i] * dd[i] / (phi[i] * theta[i].sin().powi(3) * q[i]))
        .collect();
    let c = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
    let iterations = history.len();
    let mut pot = assemble(metric, uu, dd, c, SolverMeta {
        method: "bvp".into(),
        epsilon: Some(eps),
        iterations,
        history,
    });
    pot.residual = Residual {
        sup: res_sup,
        l2: res_l2,
        relative_sup: res_sup,
        band: eps,
    };
    guard(&pot, cfg)?;
    Ok(pot)
}

/// ε-continuation: solves at each ε in turn, warm-starting from the
/// previous solution.
pub fn solve_continuation(metric: &WarpedMetric, cfg: &SolverConfig, epsilons: &[f64]) -> Result<Vec<Potential>> {
    let mut out: Vec<Potential> = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let c = cfg.with_epsilon(eps);
        let pot = solve_bvp_from(metric, &c, out.last())?;
        out.push(pot);
    }
    Ok(out)
}

/// Default ε schedule for continuation.
pub const CONTINUATION_EPSILONS: [f64; 3] = [1e-2, 3e-3, 1e-3];

/// Richardson extrapolation to `ε → 0` from the last two samples, assuming
/// an error `∝ ε^order`.
pub fn richardson(epsilons: &[f64], values: &[f64], order: f64) -> f64 {
    let k = values.len();
    if k < 2 {
        return values.last().copied().unwrap_or(f64::NAN);
    }
    let (e1, e2) = (epsilons[k - 2].powf(order), epsilons[k - 1].powf(order));
    let (v1, v2) = (values[k - 2], values[k - 1]);
    (e1 * v2 - e2 * v1) / (e1 - e2)
}

/// Measured order `log(e₁/e₂)/log(h₁/h₂)` between consecutive levels.
pub fn observed_orders(steps: &[f64], errors: &[f64]) -> Vec<f64> {
    steps
        .windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

// ---------------------------------------------------------------------------

/// Fields derived from a potential, all finite at the poles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedFields {
    /// `|∇u| = |u′|/φ`.
    pub grad: Vec<f64>,
    /// Spacetime Hessian norm `|∇²u + cot θ |∇u| g|`.
    pub hess: Vec<f64>,
    /// `|∇u|/sin θ`.
    pub ratio: Vec<f64>,
}

/// Radial and (per direction) tangential spacetime Hessian components.
///
/// With `u′ = ±φ sin θ·ratio` the tangential entry is
/// `±ratio·f′/(φF) + cos θ·ratio`, where `F = f/sin θ`; no pole division.
pub fn hessian_components(metric: &WarpedMetric, pot: &Potential) -> Vec<(f64, f64)> {
    let x = metric.theta();
    let (phi, dphi, df) = (metric.phi(), metric.dphi(), metric.df());
    let fs = metric.f_over_sin();
    (0..x.len())
        .map(|i| {
            let c = x[i].cos();
            let r = pot.ratio[i];
            let sgn = if pot.du[i] < 0.0 { -1.0 } else { 1.0 };
            let rr = pot.ddu[i] / (phi[i] * phi[i]) - dphi[i] * pot.du[i] / phi[i].powi(3) + c * r;
            let tt = if r == 0.0 { 0.0 } else { sgn * r * df[i] / (phi[i] * fs[i]) + c * r };
            (rr, tt)
        })
        .collect()
}

pub fn derived_fields(metric: &WarpedMetric, pot: &Potential) -> DerivedFields {
    let phi = metric.phi();
    let grad = pot.du.iter().zip(phi).map(|(d, p)| d.abs() / p).collect();
    let hess = hessian_components(metric, pot)
        .into_iter()
        .map(|(rr, tt)| (rr * rr + 2.0 * tt * tt).sqrt())
        .collect();
    DerivedFields {
        grad,
        hess,
        ratio: pot.ratio.clone(),
    }
}

// ---------------------------------------------------------------------------

pub trait PotentialSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, metric: &WarpedMetric, cfg: &SolverConfig) -> Result<Potential>;
}

struct Quadrature;
struct Bvp;

impl PotentialSolver for Quadrature {
    fn name(&self) -> &'static str {
        "quadrature"
    }
    fn solve(&self, metric: &WarpedMetric, cfg: &SolverConfig) -> Result<Potential> {
        solve_quadrature(metric, cfg)
    }
}

impl PotentialSolver for Bvp {
    fn name(&self) -> &'static str {
        "bvp"
    }
    fn solve(&self, metric: &WarpedMetric, cfg: &SolverConfig) -> Result<Potential> {
        solve_bvp(metric, cfg)
    }
}

pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Box<dyn PotentialSolver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = Self {
            solvers: BTreeMap::new(),
        };
        r.register(Box::new(Quadrature));
        r.register(Box::new(Bvp));
        r
    }
}

impl SolverRegistry {
    pub fn register(&mut self, s: Box<dyn PotentialSolver>) {
        self.solvers.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn PotentialSolver> {
        self.solvers
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| LabError::Unknown {
                kind: "solver",
                name: name.into(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }
}
