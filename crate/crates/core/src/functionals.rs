//! Integral functionals, selected constants and measurable sets built from
//! a metric and its potential.
//!
//! Every weighted integrand is written in a form that stays finite at the
//! poles. With `F = f/sin θ` and `|u′| = φ sin θ·ratio`:
//!
//! * `csc²θ |∇u| dV = 4π F²|u′| dθ`
//! * `csc³θ |∇u| dV = 4π φ F² ratio dθ`
//! * `|∇̄²u|²/|∇u| dV = 4π |∇̄²u|² φ F² sin θ / ratio dθ`

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::metric::WarpedMetric;
use crate::potential::{derived_fields, Potential};

/// Discretization tolerance `max(10⁻⁶, C_Q h²)` for inequality margins.
pub const TOL_FLOOR: f64 = 1e-6;
/// `C_Q`, calibrated on the round sphere (see [`tol_disc`]).
pub const TOL_QUAD: f64 = 1.0;

/// Tolerance allowed for discretization error on a grid with largest step `h`.
pub fn tol_disc(h: f64) -> f64 {
    TOL_FLOOR.max(TOL_QUAD * h * h)
}

/// Refuses potentials whose conservation residual exceeds `tolerance`.
pub fn require_solution(pot: &Potential, tolerance: f64) -> Result<()> {
    let r = pot.residual.relative_sup;
    if !(r <= tolerance) {
        return Err(LabError::ResidualTooLarge {
            residual: r,
            tolerance,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreIntegrals {
    /// `∫ csc²θ |∇u| dV`
    pub i_csc2: f64,
    /// `∫ csc²θ (|∇u| + g(∇u, ∇θ)) dV`
    pub i_align: f64,
    /// `∫ |∇̄²u|²/|∇u| dV`
    pub i_mass: f64,
    /// `∫ (6 − R)⁺ |∇u| dV`
    pub i_deficit: f64,
    pub grad_l1: f64,
    pub grad_l2: f64,
    /// `∫ csc²θ |∇u + |∇u|∇θ| dV`
    pub i_align_norm: f64,
    /// `∫ cscθ |∇̄²u| dV`
    pub i_hess_csc: f64,
}

/// The integrals of the potential identities. Refuses potentials with a
/// conservation residual above `residual_tolerance`.
pub fn core_integrals(metric: &WarpedMetric, pot: &Potential, residual_tolerance: f64) -> Result<CoreIntegrals> {
    require_solution(pot, residual_tolerance)?;
    let grid = metric.grid();
    let x = metric.theta();
    let n = x.len();
    let (phi, f, fs) = (metric.phi(), metric.f(), metric.f_over_sin());
    let r = metric.scalar_curvature()?;
    let d = derived_fields(metric, pot);
    let four_pi = 4.0 * PI;
    let integral = |g: &dyn Fn(usize) -> f64| -> f64 {
        let v: Vec<f64> = (0..n).map(g).collect();
        four_pi * grid.integrate(&v)
    };
    let du = &pot.du;
    let i_csc2 = integral(&|i| fs[i] * fs[i] * du[i].abs());
    let i_align = integral(&|i| fs[i] * fs[i] * (du[i].abs() + du[i] / phi[i]));
    let i_align_norm = integral(&|i| fs[i] * fs[i] * (du[i] + du[i].abs() / phi[i]).abs());
    let i_mass = integral(&|i| {
        let q = pot.ratio[i];
        if q > 0.0 {
            d.hess[i] * d.hess[i] * phi[i] * fs[i] * fs[i] * x[i].sin() / q
        } else {
            0.0
        }
    });
    let i_hess_csc = integral(&|i| d.hess[i] * phi[i] * fs[i] * f[i]);
    let deficit: Vec<f64> = r.iter().map(|r| 6.0 - r).collect();
    let weight: Vec<f64> = (0..n).map(|i| du[i].abs() * f[i] * f[i]).collect();
    let i_deficit = four_pi * grid.integrate_positive_part(&deficit, &weight);
    let grad_l1 = integral(&|i| du[i].abs() * f[i] * f[i]);
    let grad_l2 = integral(&|i| du[i] * du[i] * f[i] * f[i] / phi[i]).max(0.0).sqrt();
    Ok(CoreIntegrals {
        i_csc2,
        i_align,
        i_mass,
        i_deficit,
        grad_l1,
        grad_l2,
        i_align_norm,
        i_hess_csc,
    })
}

/// `∫ |∇(|∇u|/sin θ)| dV = 4π ∫ |ratio′| f² dθ`.
pub fn ratio_seminorm(metric: &WarpedMetric, pot: &Potential) -> f64 {
    let grid = metric.grid();
    let f = metric.f();
    let dr = grid.derivative(&pot.ratio);
    let v: Vec<f64> = dr.iter().zip(f).map(|(d, f)| d.abs() * f * f).collect();
    4.0 * PI * grid.integrate(&v)
}

/// Quadrature weights of `dV_g` at the nodes.
pub fn volume_weights(metric: &WarpedMetric) -> Vec<f64> {
    let w = metric.grid().simpson_weights();
    w.iter().zip(metric.volume_density()).map(|(w, d)| w * d).collect()
}

/// Quadrature weights of the round volume at the nodes.
pub fn round_weights(metric: &WarpedMetric) -> Vec<f64> {
    let w = metric.grid().simpson_weights();
    w.iter()
        .zip(metric.theta())
        .map(|(w, t)| w * 4.0 * PI * t.sin() * t.sin())
        .collect()
}

/// Minimizer of `k ↦ Σ w_i |v_i − k|`. When the minimizing set is an
/// interval its midpoint is returned.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    if idx.is_empty() {
        return 0.0;
    }
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = idx.iter().map(|&i| weights[i]).sum();
    let half = 0.5 * total;
    let tie = 1e-13 * total;
    let mut acc = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        acc += weights[i];
        if (acc - half).abs() <= tie {
            // flat stretch of the objective between this value and the next
            let next = idx.get(k + 1).map_or(values[i], |&j| values[j]);
            return 0.5 * (values[i] + next);
        }
        if acc > half {
            return values[i];
        }
    }
    values[idx[idx.len() - 1]]
}

/// `Σ w_i |v_i − k|`.
pub fn l1_gap(values: &[f64], weights: &[f64], k: f64) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * (v - k).abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConstants {
    /// `a(g)`, the L¹ median of `|∇u|/sin θ`.
    pub a: f64,
    /// `σ(g)`, the L¹ median of `u − a cos θ`.
    pub sigma: f64,
    /// `∫ ||∇u|/sin θ − a| dV_g`
    pub attained_l1_gap_ratio: f64,
    /// `∫ |u − a cos θ − σ| dV_g`
    pub attained_l1_gap_u: f64,
}

pub fn alignment_constants(metric: &WarpedMetric, pot: &Potential) -> AlignmentConstants {
    let w = volume_weights(metric);
    let a = weighted_median(&pot.ratio, &w).max(0.0);
    let shifted: Vec<f64> = pot
        .u
        .iter()
        .zip(metric.theta())
        .map(|(u, t)| u - a * t.cos())
        .collect();
    let sigma = weighted_median(&shifted, &w);
    AlignmentConstants {
        a,
        sigma,
        attained_l1_gap_ratio: l1_gap(&pot.ratio, &w, a),
        attained_l1_gap_u: l1_gap(&shifted, &w, sigma),
    }
}

/// g-volume of `{x : |ratio(x) − a| > τ}`, node-wise membership.
pub fn ratio_deviation_volume(metric: &WarpedMetric, pot: &Potential, a: f64, tau: f64) -> f64 {
    let w = volume_weights(metric);
    (0..w.len())
        .filter(|&i| (pot.ratio[i] - a).abs() > tau)
        .map(|i| w[i])
        .sum()
}

/// g-volume of `{x : |u − a cos θ − σ| > τ}`, node-wise membership.
pub fn cosine_deviation_volume(metric: &WarpedMetric, pot: &Potential, c: &AlignmentConstants, tau: f64) -> f64 {
    let w = volume_weights(metric);
    let x = metric.theta();
    (0..w.len())
        .filter(|&i| (pot.u[i] - c.a * x[i].cos() - c.sigma).abs() > tau)
        .map(|i| w[i])
        .sum()
}

/// Which pole a polar functional is centered at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    /// `p`, at θ = 0.
    North,
    /// `−p`, at θ = π.
    South,
}

impl Pole {
    /// θ of the point at round distance `s` from this pole.
    pub fn theta(self, s: f64) -> f64 {
        match self {
            Pole::North => s,
            Pole::South => PI - s,
        }
    }
}

/// Lower and upper end of the shell window.
pub const SHELL_WINDOW: (f64, f64) = (PI / 8.0, PI / 4.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSelection {
    pub sigma_p: f64,
    pub sigma_mp: f64,
    pub shell_integral_p: f64,
    pub shell_integral_mp: f64,
}

/// `∫_{∂B^S(pole, s)} |∇u| dA_g = 4π |u′| f²/φ` at round distance `s`.
pub fn shell_integral(metric: &WarpedMetric, pot: &Potential, pole: Pole, s: f64) -> f64 {
    let t = pole.theta(s);
    let du = metric.grid().interpolate(&pot.du, t);
    let f = metric.f_at(t);
    4.0 * PI * du.abs() * f * f / metric.phi_at(t)
}

/// Picks `σ` in the shell window minimizing `csc²σ ∫_{∂B(σ)} |∇u| dA_g` by a
/// scan over the grid nodes in the window and its two ends. The weighted
/// minimum is never above the window average, which is what the shell bound
/// needs.
pub fn shell_select(metric: &WarpedMetric, pot: &Potential) -> ShellSelection {
    let (lo, hi) = SHELL_WINDOW;
    let mut candidates = vec![lo, hi];
    candidates.extend(metric.theta().iter().copied().filter(|&t| t > lo && t < hi));
    let pick = |pole: Pole| -> (f64, f64) {
        let mut best = (lo, f64::INFINITY, f64::INFINITY);
        for &s in &candidates {
            let shell = shell_integral(metric, pot, pole, s);
            let weighted = shell / (s.sin() * s.sin());
            if weighted < best.2 {
                best = (s, shell, weighted);
            }
        }
        (best.0, best.1)
    };
    let (sigma_p, shell_integral_p) = pick(Pole::North);
    let (sigma_mp, shell_integral_mp) = pick(Pole::South);
    ShellSelection {
        sigma_p,
        sigma_mp,
        shell_integral_p,
        shell_integral_mp,
    }
}

/// Largest polar radius the polar functionals accept.
pub const POLAR_MAX: f64 = PI / 8.0;

fn polar_radius(r: f64, what: &str, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { r >= 0.0 } else { r > 0.0 };
    if !(ok && r <= POLAR_MAX * (1.0 + 1e-12)) {
        return Err(LabError::Domain(format!("{what} must lie in the polar range up to π/8, got {r}")));
    }
    Ok(())
}

/// `∫_{B^S(pole, r)} csc³θ |∇u| dV_g = 4π ∫ φ F² ratio dθ`, for `r ≤ π/8`.
pub fn polar_csc3(metric: &WarpedMetric, pot: &Potential, pole: Pole, r: f64) -> Result<f64> {
    polar_radius(r, "radius", true)?;
    let grid = metric.grid();
    let (phi, fs) = (metric.phi(), metric.f_over_sin());
    let v: Vec<f64> = (0..phi.len()).map(|i| phi[i] * fs[i] * fs[i] * pot.ratio[i]).collect();
    let cum = grid.cumulative(&v);
    let (a, b) = match pole {
        Pole::North => (0.0, r),
        Pole::South => (PI - r, PI),
    };
    Ok(4.0 * PI * grid.integrate_between(&v, &cum, a, b))
}

/// Round average `(1/4π) ∫_{∂B^S(pole, t)} u dA_S`; for radial `u` the value
/// of `u` on that sphere.
pub fn polar_average(metric: &WarpedMetric, pot: &Potential, pole: Pole, t: f64) -> Result<f64> {
    polar_radius(t, "radius", false)?;
    Ok(metric.grid().interpolate(&pot.u, pole.theta(t)))
}

/// Round volume `2πθ − π sin 2θ` of `B^S(p, θ)`.
pub fn round_ball_volume(theta: f64) -> f64 {
    2.0 * PI * theta - PI * (2.0 * theta).sin()
}

/// Round volume of `B^S(p, r) ∩ {u ≤ γ}` (north) or `B^S(−p, r) ∩ {u ≥ −γ}`
/// (south), with `u` linear between nodes.
pub fn sublevel_round_volume(metric: &WarpedMetric, pot: &Potential, pole: Pole, r: f64, gamma: f64) -> Result<f64> {
    polar_radius(r, "radius", true)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(LabError::Domain(format!("level must lie in [0, 1), got {gamma}")));
    }
    let x = metric.theta();
    // distance from the pole and the oriented value, so that both cases
    // read "s ≤ r and v ≤ γ"
    let pts: Vec<(f64, f64)> = match pole {
        Pole::North => x.iter().zip(&pot.u).map(|(t, u)| (*t, *u)).collect(),
        Pole::South => x.iter().zip(&pot.u).rev().map(|(t, u)| (PI - t, -u)).collect(),
    };
    let mut vol = 0.0;
    for w in pts.windows(2) {
        let ((s0, v0), (s1, v1)) = (w[0], w[1]);
        if s0 >= r {
            break;
        }
        let s1c = s1.min(r);
        let at = |s: f64| v0 + (v1 - v0) * (s - s0) / (s1 - s0);
        let (va, vb) = (v0, at(s1c));
        let piece = if va <= gamma && vb <= gamma {
            Some((s0, s1c))
        } else if va > gamma && vb > gamma {
            None
        } else {
            let cross = s0 + (gamma - v0) / (v1 - v0) * (s1 - s0);
            if va <= gamma {
                Some((s0, cross))
            } else {
                Some((cross, s1c))
            }
        };
        if let Some((a, b)) = piece {
            vol += round_ball_volume(b) - round_ball_volume(a);
        }
    }
    Ok(vol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodSetReport {
    pub tau: f64,
    pub t: f64,
    /// `|E_{τ,g,t}|` under g and under the round metric.
    pub vol_e_g: f64,
    pub vol_e_round: f64,
    /// `|S³ \ E_{τ,g,t}|_g`
    pub vol_e_complement_g: f64,
    /// `|S³ \ E_{τ,g}|_g`
    pub vol_e_tau_complement_g: f64,
    /// `|S³ \ Ẽ_{τ,g}|_g`
    pub vol_etilde_complement_g: f64,
}

/// Volumes of the good sets
/// `E_{τ,g} = {|ratio − a| ≤ τ}`, `Ẽ_{τ,g} = {|u − a cos θ − σ| ≤ τ}` and
/// `E_{τ,g,t} = E_{τ,g} ∩ {t ≤ θ ≤ π − t}`. Membership is decided at the
/// nodes; the polar cut is integrated exactly.
pub fn good_set_volumes(
    metric: &WarpedMetric,
    pot: &Potential,
    align: &AlignmentConstants,
    tau: f64,
    t: f64,
) -> Result<GoodSetReport> {
    if !(tau >= 0.0) || !(0.0..=PI / 2.0).contains(&t) {
        return Err(LabError::Domain(format!(
            "good set needs τ ≥ 0 and t in [0, π/2], got τ = {tau}, t = {t}"
        )));
    }
    let grid = metric.grid();
    let x = metric.theta();
    let n = x.len();
    let dens_g = metric.volume_density();
    let in_e: Vec<bool> = (0..n).map(|i| (pot.ratio[i] - align.a).abs() <= tau).collect();
    let masked = |dens: &dyn Fn(usize) -> f64| -> f64 {
        let v: Vec<f64> = (0..n).map(|i| if in_e[i] { dens(i) } else { 0.0 }).collect();
        let cum = grid.cumulative(&v);
        grid.integrate_between(&v, &cum, t, PI - t)
    };
    let vol_e_g = masked(&|i| dens_g[i]);
    let vol_e_round = masked(&|i| 4.0 * PI * x[i].sin() * x[i].sin());
    let total = metric.volume();
    let w = volume_weights(metric);
    let vol_e_tau_complement_g = (0..n).filter(|&i| !in_e[i]).map(|i| w[i]).sum();
    let vol_etilde_complement_g = (0..n)
        .filter(|&i| (pot.u[i] - align.a * x[i].cos() - align.sigma).abs() > tau)
        .map(|i| w[i])
        .sum();
    Ok(GoodSetReport {
        tau,
        t,
        vol_e_g,
        vol_e_round,
        vol_e_complement_g: total - vol_e_g,
        vol_e_tau_complement_g,
        vol_etilde_complement_g,
    })
}

/// Round volume of the polar witness region
/// `Ẽ_{τ,g} ∩ {±u > γ} ∩ B^S(±p, r)`, node-wise membership.
pub fn witness_round_volume(
    metric: &WarpedMetric,
    pot: &Potential,
    align: &AlignmentConstants,
    pole: Pole,
    r: f64,
    tau: f64,
    gamma: f64,
) -> f64 {
    let x = metric.theta();
    let w = round_weights(metric);
    (0..x.len())
        .filter(|&i| {
            let (s, v) = match pole {
                Pole::North => (x[i], pot.u[i]),
                Pole::South => (PI - x[i], -pot.u[i]),
            };
            s <= r && v > gamma && (pot.u[i] - align.a * x[i].cos() - align.sigma).abs() <= tau
        })
        .map(|i| w[i])
        .sum()
}

/// Certificate factor in `|B(p, r)| + |B(−p, r)| ≤ 10¹² r³ V`.
pub const POINT_PICK_FACTOR: f64 = 1e12;
/// Radius below which the packing argument behind the certificate applies.
pub const POINT_PICK_PROOF_RADIUS: f64 = 1e-4;
/// Candidate colatitudes scanned on `[0, π/2]`.
pub const POINT_PICK_SAMPLES: usize = 65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPickResult {
    pub r: f64,
    /// Colatitude of the chosen `q`; its partner sits at `π − q`.
    pub colatitude: f64,
    pub sum_ball_volumes: f64,
    pub certificate_rhs: f64,
    pub certified: bool,
    /// `r` is above the radius the packing argument covers.
    pub beyond_proof_range: bool,
    /// `(q, sum)` for every scanned candidate.
    pub scan: Vec<(f64, f64)>,
}

/// Scans antipodal pairs `(q, π − q)` for the smallest sum of round-ball
/// g-volumes of radius `r`; `volume_bound` is the `V` of the certificate.
pub fn point_pick(metric: &WarpedMetric, r: f64, volume_bound: f64) -> Result<PointPickResult> {
    if !(r >= 0.0 && r <= PI) {
        return Err(LabError::Domain(format!("ball radius must lie in [0, π], got {r}")));
    }
    let scan: Vec<(f64, f64)> = (0..POINT_PICK_SAMPLES)
        .into_par_iter()
        .map(|k| {
            let q = 0.5 * PI * k as f64 / (POINT_PICK_SAMPLES - 1) as f64;
            let s = metric.ball_volume(q, r)? + metric.ball_volume(PI - q, r)?;
            Ok((q, s))
        })
        .collect::<Result<_>>()?;
    let best = scan
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("scan is never empty");
    let certificate_rhs = POINT_PICK_FACTOR * r.powi(3) * volume_bound;
    Ok(PointPickResult {
        r,
        colatitude: best.0,
        sum_ball_volumes: best.1,
        certificate_rhs,
        certified: best.1 < certificate_rhs || best.1 == 0.0,
        beyond_proof_range: r >= POINT_PICK_PROOF_RADIUS,
        scan,
    })
}
