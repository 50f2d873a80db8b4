//! Radial grids on `[0, π]` and the quadrature, cumulative-integration and
//! interpolation rules every other module builds on.
//!
//! Definite integrals use composite Simpson weights (the non-uniform form on
//! pairs of cells, with a quadratic end rule when the cell count is odd), so
//! they are fourth-order on smooth integrands. Antiderivatives and point
//! evaluation use a four-node Lagrange stencil per cell, which is also
//! fourth-order globally.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::LabError;

/// Smallest admissible node count.
pub const MIN_NODES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    /// `θ = ξ − (κ/2) sin 2ξ` over uniform ξ: cells near the poles are
    /// `(1 − κ)/(1 + κ)` times the widest (equatorial) cell.
    Graded,
    /// Arbitrary strictly increasing nodes (e.g. loaded from a profile table).
    Sampled,
}

/// Strictly increasing samples of the round colatitude θ, from 0 to π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
}

impl RadialGrid {
    pub fn uniform(n: usize) -> Result<Self, LabError> {
        if n < MIN_NODES {
            return Err(LabError::Grid(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        let h = PI / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        nodes[n - 1] = PI;
        Ok(Self {
            nodes,
            spacing: Spacing::Uniform,
        })
    }

    /// Grid graded toward both poles with strength `kappa ∈ [0, 1)`.
    pub fn graded(n: usize, kappa: f64) -> Result<Self, LabError> {
        if !(0.0..1.0).contains(&kappa) {
            return Err(LabError::Grid(format!("grading must lie in [0, 1), got {kappa}")));
        }
        let mut g = Self::uniform(n)?;
        if kappa == 0.0 {
            return Ok(g);
        }
        for x in g.nodes.iter_mut() {
            *x -= 0.5 * kappa * (2.0 * *x).sin();
        }
        g.nodes[n - 1] = PI;
        g.spacing = Spacing::Graded;
        Ok(g)
    }

    /// Graded grid with the fewest nodes whose widest cell is at most `h`.
    pub fn graded_with_step(h: f64, kappa: f64) -> Result<Self, LabError> {
        if !(h > 0.0) {
            return Err(LabError::Grid(format!("grid step must be positive, got {h}")));
        }
        let mut n = ((1.0 + kappa) * PI / h).ceil() as usize + 1;
        loop {
            let g = Self::graded(n.max(MIN_NODES), kappa)?;
            if g.max_step() <= h * (1.0 + 1e-12) {
                return Ok(g);
            }
            n += 1;
        }
    }

    /// Builds a grid from explicit nodes; the endpoints must be 0 and π
    /// (to within 1e-9, after which they are snapped).
    pub fn from_nodes(mut nodes: Vec<f64>) -> Result<Self, LabError> {
        let n = nodes.len();
        if n < MIN_NODES {
            return Err(LabError::Grid(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if nodes[0].abs() > 1e-9 || (nodes[n - 1] - PI).abs() > 1e-9 {
            return Err(LabError::Grid(format!(
                "grid must span [0, π], got [{}, {}]",
                nodes[0],
                nodes[n - 1]
            )));
        }
        nodes[0] = 0.0;
        nodes[n - 1] = PI;
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(LabError::Grid(format!(
                "grid nodes not strictly increasing at index {}",
                i + 1
            )));
        }
        let h = PI / (n - 1) as f64;
        let uniform = nodes
            .iter()
            .enumerate()
            .all(|(i, &x)| (x - i as f64 * h).abs() < 1e-12);
        Ok(Self {
            nodes,
            spacing: if uniform {
                Spacing::Uniform
            } else {
                Spacing::Sampled
            },
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// Largest cell width.
    pub fn max_step(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Simpson weights for `∫₀^π g dθ ≈ Σ w_i g(θ_i)`.
    pub fn simpson_weights(&self) -> Vec<f64> {
        simpson_weights(&self.nodes)
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.simpson_weights()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// `∫ g⁺ w dθ` for the cubic interpolants of `g` and `w`: each cell is
    /// split at the zeros of `g` and integrated by Gauss-Legendre, exact for
    /// the cubic-times-cubic product. Avoids the node-dependent jitter of
    /// applying Simpson across the kink of the positive part.
    pub fn integrate_positive_part(&self, g: &[f64], w: &[f64]) -> f64 {
        const PROBES: usize = 8;
        let x = &self.nodes;
        let rule = gauss_legendre(4);
        let mut acc = 0.0;
        for i in 0..x.len() - 1 {
            let (lo, hi) = stencil(i, self.len());
            let xs = &x[lo..=hi];
            let eval = |vals: &[f64], t: f64| -> f64 {
                (0..xs.len()).map(|k| vals[lo + k] * lagrange_basis(xs, k, t)).sum()
            };
            let (a, b) = (x[i], x[i + 1]);
            if g[i] > 0.0 && g[i + 1] > 0.0 && g[lo..=hi].iter().all(|v| *v > 0.0) {
                acc += integrate_fn(|t| eval(g, t) * eval(w, t), a, b, 1, &rule);
                continue;
            }
            // sign pattern of the cubic on a probe lattice, refined by bisection
            let mut cuts = vec![a];
            let mut prev = (a, eval(g, a));
            for k in 1..=PROBES {
                let t = a + (b - a) * k as f64 / PROBES as f64;
                let v = eval(g, t);
                if (v > 0.0) != (prev.1 > 0.0) {
                    let (mut l, mut r, mut vl) = (prev.0, t, prev.1);
                    for _ in 0..60 {
                        let m = 0.5 * (l + r);
                        let vm = eval(g, m);
                        if (vm > 0.0) == (vl > 0.0) {
                            l = m;
                            vl = vm;
                        } else {
                            r = m;
                        }
                    }
                    cuts.push(0.5 * (l + r));
                }
                prev = (t, v);
            }
            cuts.push(b);
            for c in cuts.windows(2) {
                if eval(g, 0.5 * (c[0] + c[1])) > 0.0 {
                    acc += integrate_fn(|t| eval(g, t) * eval(w, t), c[0], c[1], 1, &rule);
                }
            }
        }
        acc
    }

    /// Index of the cell `[θ_i, θ_{i+1}]` containing `x` (clamped).
    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.len();
        match self
            .nodes
            .binary_search_by(|v| v.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Lagrange interpolation of nodal `values` at `x`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let i = self.cell_of(x);
        let (lo, hi) = stencil(i, self.len());
        let xs = &self.nodes[lo..=hi];
        let mut acc = 0.0;
        for k in 0..xs.len() {
            acc += values[lo + k] * lagrange_basis(xs, k, x);
        }
        acc
    }

    /// Running integral `∫₀^{θ_i} g dθ` at every node.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n - 1 {
            out[i + 1] = out[i] + self.cell_integral(values, i, self.nodes[i], self.nodes[i + 1]);
        }
        out
    }

    /// Integral of the cubic interpolant of `values` over `[a, b] ⊂ cell i`.
    pub fn cell_integral(&self, values: &[f64], i: usize, a: f64, b: f64) -> f64 {
        let (lo, hi) = stencil(i, self.len());
        let xs = &self.nodes[lo..=hi];
        let w = lagrange_interval_weights(xs, a, b);
        w.iter().zip(&values[lo..=hi]).map(|(w, v)| w * v).sum()
    }

    /// `∫_a^b g dθ` for the cubic interpolant, with `0 ≤ a ≤ b ≤ π`.
    pub fn integrate_between(&self, values: &[f64], cumulative: &[f64], a: f64, b: f64) -> f64 {
        self.antiderivative_at(values, cumulative, b) - self.antiderivative_at(values, cumulative, a)
    }

    /// Value of the running integral at an arbitrary `x`.
    pub fn antiderivative_at(&self, values: &[f64], cumulative: &[f64], x: f64) -> f64 {
        let x = x.clamp(0.0, PI);
        let i = self.cell_of(x);
        cumulative[i] + self.cell_integral(values, i, self.nodes[i], x)
    }

    /// Fourth-order finite-difference derivative of nodal values.
    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        self.derivative_with(values, 5)
    }

    /// Finite-difference derivative on `points`-node Lagrange stencils
    /// (centered where possible), of order `points − 1`.
    pub fn derivative_with(&self, values: &[f64], points: usize) -> Vec<f64> {
        let n = self.len();
        let half = points / 2;
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half).min(n - points);
                let xs = &self.nodes[lo..lo + points];
                let x = self.nodes[i];
                (0..points)
                    .map(|k| values[lo + k] * lagrange_basis_derivative(xs, k, x))
                    .sum()
            })
            .collect()
    }
}

fn stencil(cell: usize, n: usize) -> (usize, usize) {
    let lo = cell.saturating_sub(1).min(n - 4);
    (lo, lo + 3)
}

pub(crate) fn lagrange_basis(xs: &[f64], k: usize, x: f64) -> f64 {
    let mut p = 1.0;
    for (j, &xj) in xs.iter().enumerate() {
        if j != k {
            p *= (x - xj) / (xs[k] - xj);
        }
    }
    p
}

pub(crate) fn lagrange_basis_derivative(xs: &[f64], k: usize, x: f64) -> f64 {
    let mut total = 0.0;
    for m in 0..xs.len() {
        if m == k {
            continue;
        }
        let mut p = 1.0 / (xs[k] - xs[m]);
        for (j, &xj) in xs.iter().enumerate() {
            if j != k && j != m {
                p *= (x - xj) / (xs[k] - xj);
            }
        }
        total += p;
    }
    total
}

/// Gauss-Legendre nodes/weights on [-1, 1], 3 points (exact to degree 5).
const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Weights integrating the Lagrange interpolant on `xs` over `[a, b]`.
pub(crate) fn lagrange_interval_weights(xs: &[f64], a: f64, b: f64) -> Vec<f64> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (0..xs.len())
        .map(|k| {
            GL3.iter()
                .map(|&(t, w)| w * half * lagrange_basis(xs, k, mid + half * t))
                .sum()
        })
        .collect()
}

fn simpson_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    let cells = n - 1;
    let paired = cells - cells % 2;
    let mut i = 0;
    while i < paired {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let s = h0 + h1;
        w[i] += s / 6.0 * (2.0 - h1 / h0);
        w[i + 1] += s * s * s / (6.0 * h0 * h1);
        w[i + 2] += s / 6.0 * (2.0 - h0 / h1);
        i += 2;
    }
    if cells % 2 == 1 {
        let xs = &x[n - 3..n];
        let lw = lagrange_interval_weights(xs, x[n - 2], x[n - 1]);
        for k in 0..3 {
            w[n - 3 + k] += lw[k];
        }
    }
    w
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre integral of `g` over `[a, b]`.
pub fn integrate_fn(g: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for &(t, w) in rule {
            total += w * 0.5 * width * g(mid + 0.5 * width * t);
        }
    }
    total
}

/// Smooth fill of the two pole nodes by cubic extrapolation from the next
/// four interior nodes on each side. Used for fields whose closed form is
/// an indeterminate 0/0 exactly at θ = 0 or θ = π.
pub fn fill_poles(grid: &RadialGrid, values: &mut [f64]) {
    let n = grid.len();
    let x = grid.nodes();
    let left = [x[1], x[2], x[3], x[4]];
    values[0] = (0..4)
        .map(|k| values[1 + k] * lagrange_basis(&left, k, x[0]))
        .sum();
    let right = [x[n - 5], x[n - 4], x[n - 3], x[n - 2]];
    values[n - 1] = (0..4)
        .map(|k| values[n - 5 + k] * lagrange_basis(&right, k, x[n - 1]))
        .sum();
}
