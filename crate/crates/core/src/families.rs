//! Named analytic metric families, looked up by name in a registry.
//!
//! Every family returns closed-form `φ, f` with two derivatives and rejects
//! parameters that would break `φ ≥ 1`, `f ≥ sin θ` or pole regularity.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{self, RadialGrid};
use crate::metric::{Profile, WarpedMetric};

pub type ParamMap = BTreeMap<String, f64>;

/// Grading used by families whose features sit next to a pole.
pub const POLAR_GRADING: f64 = 0.9;

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    /// `None` means the parameter is required.
    pub default: Option<f64>,
    pub range: &'static str,
}

pub trait MetricFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn params(&self) -> &'static [ParamSpec];
    /// Builds the profile from a fully resolved parameter map.
    fn build(&self, p: &ParamMap) -> Result<Arc<dyn Profile>>;
    /// Smallest length scale in θ that a grid has to resolve.
    fn min_feature(&self, p: &ParamMap) -> f64;
    /// Pole grading `κ` of the grids this family is best sampled on (see
    /// [`RadialGrid::graded`]); nonzero for families with polar features.
    fn grading(&self) -> f64 {
        0.0
    }
}

/// Family name plus parameter overrides, as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    #[serde(default)]
    pub params: ParamMap,
}

impl FamilySpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            params: ParamMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }
}

pub struct FamilyRegistry {
    families: BTreeMap<&'static str, Box<dyn MetricFamily>>,
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl FamilyRegistry {
    pub fn empty() -> Self {
        Self {
            families: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Round));
        r.register(Box::new(Scaled));
        r.register(Box::new(Bump));
        r.register(Box::new(Tendril));
        r.register(Box::new(Bubble));
        r
    }

    pub fn register(&mut self, family: Box<dyn MetricFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn get(&self, name: &str) -> Result<&dyn MetricFamily> {
        self.families
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| LabError::Unknown {
                kind: "metric family",
                name: name.into(),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.families.keys().copied().collect()
    }

    /// Fills defaults and rejects unknown or missing parameters.
    pub fn resolve(&self, spec: &FamilySpec) -> Result<ParamMap> {
        let fam = self.get(&spec.name)?;
        let known = fam.params();
        for key in spec.params.keys() {
            if !known.iter().any(|p| p.name == key) {
                return Err(family_err(fam.name(), format!("unknown parameter `{key}`")));
            }
        }
        let mut out = ParamMap::new();
        for p in known {
            let v = match (spec.params.get(p.name), p.default) {
                (Some(&v), _) => v,
                (None, Some(d)) => d,
                (None, None) => {
                    return Err(family_err(fam.name(), format!("missing parameter `{}`", p.name)))
                }
            };
            if !v.is_finite() {
                return Err(family_err(fam.name(), format!("`{}` must be finite", p.name)));
            }
            out.insert(p.name.into(), v);
        }
        Ok(out)
    }

    pub fn profile(&self, spec: &FamilySpec) -> Result<Arc<dyn Profile>> {
        let p = self.resolve(spec)?;
        self.get(&spec.name)?.build(&p)
    }

    pub fn make_metric(&self, spec: &FamilySpec, grid: RadialGrid) -> Result<WarpedMetric> {
        let p = self.resolve(spec)?;
        let profile = self.get(&spec.name)?.build(&p)?;
        Ok(WarpedMetric::from_profile(grid, profile, label(&spec.name, &p)))
    }

    /// Node count at least `n`, raised so that the family's finest feature
    /// spans 16 cells or more.
    pub fn recommended_nodes(&self, spec: &FamilySpec, n: usize) -> Result<usize> {
        let p = self.resolve(spec)?;
        let feature = self.get(&spec.name)?.min_feature(&p);
        let needed = (16.0 * PI / feature).ceil() as usize + 1;
        Ok(n.max(needed).max(grid::MIN_NODES))
    }

    /// The family's preferred grid whose widest cell is at most `h`.
    pub fn grid_with_step(&self, spec: &FamilySpec, h: f64) -> Result<RadialGrid> {
        RadialGrid::graded_with_step(h, self.get(&spec.name)?.grading())
    }

    /// Grid for a run asking for `n` nodes: the family's preferred spacing
    /// with step `π/(n − 1)`, refined until the finest feature spans 16 of
    /// the cells it sits in.
    pub fn grid_for(&self, spec: &FamilySpec, n: usize) -> Result<RadialGrid> {
        let p = self.resolve(spec)?;
        let fam = self.get(&spec.name)?;
        let n = n.max(grid::MIN_NODES);
        // graded grids shrink the polar cells by 1 − κ
        let local = (1.0 - fam.grading()).max(1e-3);
        let h = (PI / (n - 1) as f64).min(fam.min_feature(&p) / (16.0 * local));
        RadialGrid::graded_with_step(h, fam.grading())
    }

    /// Human-readable catalog, sorted by family name.
    pub fn catalog(&self) -> String {
        let mut out = String::new();
        for fam in self.families.values() {
            let _ = writeln!(out, "{}: {}", fam.name(), fam.summary());
            for p in fam.params() {
                let default = p
                    .default
                    .map(|d| format!("default {d}"))
                    .unwrap_or_else(|| "required".into());
                let _ = writeln!(out, "  {:<8} {:<34} {}", p.name, p.range, default);
            }
        }
        out
    }
}

pub fn make_metric(spec: &FamilySpec, grid: RadialGrid) -> Result<WarpedMetric> {
    FamilyRegistry::builtin().make_metric(spec, grid)
}

fn label(name: &str, p: &ParamMap) -> String {
    if p.is_empty() {
        return name.into();
    }
    let args: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{name}({})", args.join(","))
}

fn family_err(family: &str, reason: impl Into<String>) -> LabError {
    LabError::Family {
        family: family.into(),
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// smooth building blocks

/// C³ step: 0 for x ≤ 0, 1 for x ≥ 1. Returns value and two derivatives.
fn smoothstep(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let y = 1.0 - x;
    let s = x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x.powi(3));
    let ds = 140.0 * x.powi(3) * y.powi(3);
    let dds = 420.0 * x * x * y * y * (1.0 - 2.0 * x);
    [s, ds, dds]
}

/// Step rising over `[a, a + r]`, in θ.
fn rise(theta: f64, a: f64, r: f64) -> [f64; 3] {
    let [s, ds, dds] = smoothstep((theta - a) / r);
    [s, ds / r, dds / (r * r)]
}

/// Plateau bump: rises over `[a, a + r]`, falls over `[b − r, b]`.
fn plateau(theta: f64, a: f64, b: f64, r: f64) -> [f64; 3] {
    let up = rise(theta, a, r);
    let dn = rise(theta, b - r, r);
    let d = [1.0 - dn[0], -dn[1], -dn[2]];
    product(up, d)
}

fn product(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[0] * b[0],
        a[1] * b[0] + a[0] * b[1],
        a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
    ]
}

/// `exp(1 − 1/(1 − x²))` on `|x| < 1`, peak 1 at 0, flat to all orders at ±1.
fn classic_bump(x: f64) -> [f64; 3] {
    if x.abs() >= 1.0 {
        return [0.0; 3];
    }
    let q = 1.0 - x * x;
    let b = (1.0 - 1.0 / q).exp();
    let g1 = -2.0 * x / (q * q);
    let g2 = -2.0 / (q * q) - 8.0 * x * x / (q * q * q);
    [b, g1 * b, (g2 + g1 * g1) * b]
}

// ---------------------------------------------------------------------------
// round

#[derive(Debug)]
struct RoundProfile {
    c: f64,
}

impl Profile for RoundProfile {
    fn phi(&self, _: f64) -> f64 {
        self.c
    }
    fn dphi(&self, _: f64) -> f64 {
        0.0
    }
    fn ddphi(&self, _: f64) -> f64 {
        0.0
    }
    fn f(&self, t: f64) -> f64 {
        self.c * t.sin()
    }
    fn df(&self, t: f64) -> f64 {
        self.c * t.cos()
    }
    fn ddf(&self, t: f64) -> f64 {
        -self.c * t.sin()
    }
}

struct Round;

impl MetricFamily for Round {
    fn name(&self) -> &'static str {
        "round"
    }
    fn summary(&self) -> &'static str {
        "unit sphere, phi = 1, f = sin"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &[]
    }
    fn build(&self, _: &ParamMap) -> Result<Arc<dyn Profile>> {
        Ok(Arc::new(RoundProfile { c: 1.0 }))
    }
    fn min_feature(&self, _: &ParamMap) -> f64 {
        PI
    }
}

struct Scaled;

impl MetricFamily for Scaled {
    fn name(&self) -> &'static str {
        "scaled"
    }
    fn summary(&self) -> &'static str {
        "round sphere of radius c, phi = c, f = c sin"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &[ParamSpec {
            name: "c",
            default: Some(1.1),
            range: "c >= 1",
        }]
    }
    fn build(&self, p: &ParamMap) -> Result<Arc<dyn Profile>> {
        let c = p["c"];
        if c < 1.0 {
            return Err(family_err("scaled", format!("c = {c} < 1 violates phi >= 1")));
        }
        Ok(Arc::new(RoundProfile { c }))
    }
    fn min_feature(&self, _: &ParamMap) -> f64 {
        PI
    }
}

// ---------------------------------------------------------------------------
// bump: phi = 1 + eta B, f = sin (1 + eta B)

#[derive(Debug)]
struct BumpProfile {
    eta: f64,
    center: f64,
    width: f64,
    height: f64,
}

impl BumpProfile {
    fn b(&self, t: f64) -> [f64; 3] {
        let [b, db, ddb] = classic_bump((t - self.center) / self.width);
        let s = self.eta * self.height;
        [s * b, s * db / self.width, s * ddb / (self.width * self.width)]
    }
}

impl Profile for BumpProfile {
    fn phi(&self, t: f64) -> f64 {
        1.0 + self.b(t)[0]
    }
    fn dphi(&self, t: f64) -> f64 {
        self.b(t)[1]
    }
    fn ddphi(&self, t: f64) -> f64 {
        self.b(t)[2]
    }
    fn f(&self, t: f64) -> f64 {
        t.sin() * (1.0 + self.b(t)[0])
    }
    fn df(&self, t: f64) -> f64 {
        let b = self.b(t);
        t.cos() * (1.0 + b[0]) + t.sin() * b[1]
    }
    fn ddf(&self, t: f64) -> f64 {
        let b = self.b(t);
        -t.sin() * (1.0 + b[0]) + 2.0 * t.cos() * b[1] + t.sin() * b[2]
    }
}

struct Bump;

impl MetricFamily for Bump {
    fn name(&self) -> &'static str {
        "bump"
    }
    fn summary(&self) -> &'static str {
        "smooth radial bump, phi = 1 + eta*B, f = sin*(1 + eta*B), B = height*exp(1 - 1/(1-x^2))"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &[
            ParamSpec {
                name: "eta",
                default: None,
                range: "eta >= 0",
            },
            ParamSpec {
                name: "theta0",
                default: Some(FRAC_PI_2),
                range: "width < theta0 < pi - width",
            },
            ParamSpec {
                name: "width",
                default: Some(1.5),
                range: "width > 0",
            },
            ParamSpec {
                name: "height",
                default: Some(0.02),
                range: "height > 0 (peak of B)",
            },
        ]
    }
    fn build(&self, p: &ParamMap) -> Result<Arc<dyn Profile>> {
        let (eta, center, width, height) = (p["eta"], p["theta0"], p["width"], p["height"]);
        if eta < 0.0 {
            return Err(family_err("bump", format!("eta = {eta} < 0 violates phi >= 1")));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(family_err("bump", "width and height must be positive"));
        }
        if center - width <= 0.0 || center + width >= PI {
            return Err(family_err(
                "bump",
                "support [theta0 - width, theta0 + width] must avoid the poles",
            ));
        }
        Ok(Arc::new(BumpProfile {
            eta,
            center,
            width,
            height,
        }))
    }
    fn min_feature(&self, p: &ParamMap) -> f64 {
        p["width"] / 4.0
    }
}

// ---------------------------------------------------------------------------
// tendril: a long thin finger near the pole, built in χ = 1 − 1/φ².
//
// With f = sin θ one has 6 − R = χ(4 − 2cot²θ) − 2cot θ χ′. On θ < 0.615
// the first term is nonpositive, so χ may rise freely and may decay as fast
// as exp(−∫(cot − 2tan)) without creating deficit. The profile rises to a
// plateau of width w (where φ = 1 + L/w), decays at that rate, and is cut
// off over a fixed window so the only deficit comes from a region where χ
// is already O(θ₀).

/// Edge of the region where `cot² > 2` (cutoff windows must end before it).
const ZERO_DEFICIT_EDGE: f64 = 0.6;
const TENDRIL_CUT_START: f64 = 0.3;
const TENDRIL_MAX_EXTENT: f64 = 0.5;

#[derive(Debug)]
struct TendrilProfile {
    chi_peak: f64,
    /// Start of the rise, start of the plateau, start of the decay.
    rise_at: f64,
    plateau_at: f64,
    decay_at: f64,
    width: f64,
    cut_at: f64,
    cut_len: f64,
    /// `∫ k σ` over the decay ramp.
    ramp_integral: f64,
    rule: Vec<(f64, f64)>,
}

fn kfun(t: f64) -> [f64; 2] {
    let (s, c) = (t.sin(), t.cos());
    [c / s - 2.0 * s / c, -1.0 / (s * s) - 2.0 / (c * c)]
}

impl TendrilProfile {
    fn new(length: f64, width: f64, center: f64) -> Self {
        let phi_peak = 1.0 + length / width;
        let decay_at = center + 0.5 * width;
        let cut_at = (decay_at + width).max(TENDRIL_CUT_START);
        let mut p = Self {
            chi_peak: 1.0 - 1.0 / (phi_peak * phi_peak),
            rise_at: center - width,
            plateau_at: center - 0.5 * width,
            decay_at,
            width,
            cut_at,
            cut_len: (ZERO_DEFICIT_EDGE - cut_at).min(0.25),
            ramp_integral: 0.0,
            rule: grid::gauss_legendre(16),
        };
        p.ramp_integral = p.decay_exponent(decay_at + width);
        p
    }

    fn sigma(&self, t: f64) -> [f64; 3] {
        rise(t, self.decay_at, self.width)
    }

    /// `G(θ) = ∫_{decay_at}^θ k σ`.
    fn decay_exponent(&self, t: f64) -> f64 {
        let end = self.decay_at + self.width;
        if t <= end {
            grid::integrate_fn(
                |s| kfun(s)[0] * self.sigma(s)[0],
                self.decay_at,
                t,
                4,
                &self.rule,
            )
        } else {
            let log_g = |s: f64| (s.sin() * s.cos() * s.cos()).ln();
            self.ramp_integral + log_g(t) - log_g(end)
        }
    }

    /// χ and two derivatives.
    fn chi(&self, t: f64) -> [f64; 3] {
        if t <= self.rise_at || t >= self.cut_at + self.cut_len {
            return [0.0; 3];
        }
        if t < self.plateau_at {
            let [s, ds, dds] = rise(t, self.rise_at, 0.5 * self.width);
            return [self.chi_peak * s, self.chi_peak * ds, self.chi_peak * dds];
        }
        if t <= self.decay_at {
            return [self.chi_peak, 0.0, 0.0];
        }
        let z = self.chi_peak * (-self.decay_exponent(t)).exp();
        let [k, dk] = kfun(t);
        let [s, ds, _] = self.sigma(t);
        let ks = k * s;
        let z1 = -ks * z;
        let z2 = -(dk * s + k * ds) * z - ks * z1;
        let zz = [z, z1, z2];
        if t < self.cut_at {
            return zz;
        }
        let [c, dc, ddc] = rise(t, self.cut_at, self.cut_len);
        product(zz, [1.0 - c, -dc, -ddc])
    }
}

impl Profile for TendrilProfile {
    fn phi(&self, t: f64) -> f64 {
        1.0 / (1.0 - self.chi(t)[0]).sqrt()
    }
    fn dphi(&self, t: f64) -> f64 {
        let [c, c1, _] = self.chi(t);
        0.5 * (1.0 - c).powf(-1.5) * c1
    }
    fn ddphi(&self, t: f64) -> f64 {
        let [c, c1, c2] = self.chi(t);
        0.75 * (1.0 - c).powf(-2.5) * c1 * c1 + 0.5 * (1.0 - c).powf(-1.5) * c2
    }
    fn f(&self, t: f64) -> f64 {
        t.sin()
    }
    fn df(&self, t: f64) -> f64 {
        t.cos()
    }
    fn ddf(&self, t: f64) -> f64 {
        -t.sin()
    }
}

struct Tendril;

impl MetricFamily for Tendril {
    fn name(&self) -> &'static str {
        "tendril"
    }
    fn summary(&self) -> &'static str {
        "thin finger near the pole: phi plateau 1 + L/w over width w at theta0, f = sin"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &[
            ParamSpec {
                name: "L",
                default: None,
                range: "L > 0 (extra meridian length)",
            },
            ParamSpec {
                name: "w",
                default: None,
                range: "w > 0",
            },
            ParamSpec {
                name: "theta0",
                default: None,
                range: "w < theta0, theta0 + 1.5w <= 0.5",
            },
        ]
    }
    fn build(&self, p: &ParamMap) -> Result<Arc<dyn Profile>> {
        let (l, w, c) = (p["L"], p["w"], p["theta0"]);
        if l <= 0.0 || w <= 0.0 {
            return Err(family_err("tendril", "L and w must be positive"));
        }
        if c - w <= 0.0 {
            return Err(family_err("tendril", "theta0 - w must be positive (pole regularity)"));
        }
        if c + 1.5 * w > TENDRIL_MAX_EXTENT {
            return Err(family_err(
                "tendril",
                format!("theta0 + 1.5w must be <= {TENDRIL_MAX_EXTENT}"),
            ));
        }
        Ok(Arc::new(TendrilProfile::new(l, w, c)))
    }
    fn min_feature(&self, p: &ParamMap) -> f64 {
        p["w"] / 2.0
    }
    fn grading(&self) -> f64 {
        POLAR_GRADING
    }
}

// ---------------------------------------------------------------------------
// bubble: a tube of round radius ρ behind a neck at colatitude δ.
//
// f is blended from sin θ to ρ on a plateau supported in [δ(1 − span), δ];
// φ = 1 + 20A·γ stretches only the inner part of the plateau, where f ≡ ρ
// and R = 2/ρ² ≥ 6. The deficit therefore does not depend on A.

const BUBBLE_STRETCH: f64 = 20.0;

#[derive(Debug)]
struct BubbleProfile {
    amp: f64,
    rho: f64,
    lo: f64,
    hi: f64,
    ramp: f64,
}

impl BubbleProfile {
    fn beta(&self, t: f64) -> [f64; 3] {
        plateau(t, self.lo, self.hi, self.ramp)
    }
    fn gamma(&self, t: f64) -> [f64; 3] {
        let g = plateau(t, self.lo + self.ramp, self.hi - self.ramp, 0.5 * self.ramp);
        let a = BUBBLE_STRETCH * self.amp;
        [a * g[0], a * g[1], a * g[2]]
    }
}

impl Profile for BubbleProfile {
    fn phi(&self, t: f64) -> f64 {
        1.0 + self.gamma(t)[0]
    }
    fn dphi(&self, t: f64) -> f64 {
        self.gamma(t)[1]
    }
    fn ddphi(&self, t: f64) -> f64 {
        self.gamma(t)[2]
    }
    fn f(&self, t: f64) -> f64 {
        let b = self.beta(t)[0];
        t.sin() + (self.rho - t.sin()) * b
    }
    fn df(&self, t: f64) -> f64 {
        let [b, db, _] = self.beta(t);
        t.cos() * (1.0 - b) + (self.rho - t.sin()) * db
    }
    fn ddf(&self, t: f64) -> f64 {
        let [b, db, ddb] = self.beta(t);
        -t.sin() * (1.0 - b) - 2.0 * t.cos() * db + (self.rho - t.sin()) * ddb
    }
}

struct Bubble;

impl MetricFamily for Bubble {
    fn name(&self) -> &'static str {
        "bubble"
    }
    fn summary(&self) -> &'static str {
        "other world behind a neck: tube of radius rho, length ~ 20*A*span*delta/2, inside theta < delta"
    }
    fn params(&self) -> &'static [ParamSpec] {
        &[
            ParamSpec {
                name: "A",
                default: None,
                range: "A >= 0",
            },
            ParamSpec {
                name: "delta",
                default: None,
                range: "0 < delta, sin(delta) < rho",
            },
            ParamSpec {
                name: "span",
                default: Some(0.8),
                range: "0 < span < 1",
            },
            ParamSpec {
                name: "rho",
                default: Some(0.55),
                range: "sin(delta) < rho < 1",
            },
        ]
    }
    fn build(&self, p: &ParamMap) -> Result<Arc<dyn Profile>> {
        let (amp, delta, span, rho) = (p["A"], p["delta"], p["span"], p["rho"]);
        if amp < 0.0 {
            return Err(family_err("bubble", "A must be nonnegative"));
        }
        if !(0.0 < span && span < 1.0) {
            return Err(family_err("bubble", "span must lie in (0, 1)"));
        }
        if !(delta > 0.0 && delta < FRAC_PI_2) {
            return Err(family_err("bubble", "delta must lie in (0, pi/2)"));
        }
        if !(rho < 1.0 && rho > delta.sin()) {
            return Err(family_err("bubble", "need sin(delta) < rho < 1 for f >= sin"));
        }
        let lo = delta * (1.0 - span);
        Ok(Arc::new(BubbleProfile {
            amp,
            rho,
            lo,
            hi: delta,
            ramp: (delta - lo) / 4.0,
        }))
    }
    fn min_feature(&self, p: &ParamMap) -> f64 {
        p["delta"] * p["span"] / 8.0
    }
    fn grading(&self) -> f64 {
        POLAR_GRADING
    }
}
