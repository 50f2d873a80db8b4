//! Explicit constants of the stability estimates, each assembled from the
//! chain of elementary inequalities that produces it.
//!
//! Notation: `N = ‖(6 − R)⁺‖_{L²}`, so `N = m²` and class members have
//! `N ≤ m̄²`. Bounds are written against the measured `N` where the chain
//! allows it.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metric::ClassParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub name: String,
    pub value: f64,
    pub trace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantLedger {
    pub params: ClassParams,
    /// `‖∇u‖_{L²} ≤ C2`
    pub c2: f64,
    /// `‖∇u‖_{L¹} ≤ C3`
    pub c3: f64,
    /// Alignment and spacetime-Hessian bounds, both `≤ C_align·N^{1/2}`.
    pub c_align: f64,
    /// `∫ |ratio − a| ≤ C4·N^{1/2}`
    pub c4: f64,
    /// `∫ |∇ ratio| ≤ C5·N^{1/2}`
    pub c5: f64,
    /// `∫ |u − a cos θ − σ| ≤ C_cos·N^{1/2}`
    pub c_cos: f64,
    /// `csc²σ ∫_{∂B(σ)} |∇u| dA ≤ K_shell`
    pub k_shell: f64,
    /// `∫_{B(±p, r)} csc³θ |∇u| ≤ C6` for `r ≤ π/8`
    pub c6: f64,
    /// `1 − (1/4π)∫_{∂B(p,t)} u dA_S ≤ C7 sin t`
    pub c7: f64,
    /// `|B(p, r) ∩ {u ≤ γ}|_round ≤ 4πC8/(1 − γ) ∫₀^r sin³`
    pub c8: f64,
    /// `a(g) ≥ 1 − C9 N^{1/12} − C10 N^{1/4}`
    pub c9: f64,
    pub c10: f64,
    /// `τ csc t |S³|_g ≤ C11 V m^{11/24}` at `τ = m^{1/2}`, `t = m^{1/24}`
    pub c11: f64,
    /// `|E|_g − |E|_round ≤ C12 N^{1/48}`
    pub c12: f64,
    /// `|B(p, r)| + |B(−p, r)| ≤ C13 r³`
    pub c13: f64,
    pub entries: Vec<LedgerEntry>,
}

impl ConstantLedger {
    pub fn new(params: &ClassParams) -> Result<Self> {
        params.check()?;
        let mbar = params.mbar;
        let v = params.volume;
        let lambda = params.lambda;
        let mut entries = Vec::new();
        let mut note = |name: &str, value: f64, trace: &str| {
            entries.push(LedgerEntry {
                name: name.into(),
                value,
                trace: trace.into(),
            });
            value
        };

        let c2 = note(
            "c2",
            24.0 * PI + 1.5 * mbar,
            "test the equation with u: ∫|∇u|² ≤ 3∫|cot||∇u| ≤ 3∫csc²|∇u|; csc² identity gives \
             ≤ 24π + (3/2)∫(6−R)⁺|∇u|; Hölder and the dichotomy ‖∇u‖ ≤ 1 or divide: 24π + (3/2)m̄",
        );
        let c3 = note(
            "c3",
            8.0 * PI + 0.5 * mbar * mbar * c2,
            "csc ≥ 1 in the csc² identity: ∫|∇u| ≤ 8π + ½∫(6−R)⁺|∇u|; Hölder with N ≤ m̄² and ‖∇u‖₂ ≤ C2",
        );
        let csc2_total = 8.0 * PI + 0.5 * mbar * c2;
        let c_align = note(
            "c_align",
            (csc2_total * c2).sqrt(),
            "|∇u + |∇u|∇θ|² ≤ 2|∇u|(|∇u| + ⟨∇u,∇θ⟩); Cauchy-Schwarz against csc²|∇u| \
             (≤ 8π + ½m̄C2) and the alignment identity (≤ ¼N·C2), giving (8π + ½m̄C2)^{1/2}(½C2)^{1/2}; \
             Hessian: Cauchy-Schwarz of csc|∇̄²u| against csc²|∇u| and the mass identity (≤ N·C2), \
             giving (8π + ½m̄C2)^{1/2}C2^{1/2}; the larger of the two",
        );
        let c5 = note(
            "c5",
            2.0 * c_align,
            "|∇(|∇u|/sin)| ≤ csc|∇̄²u| + csc²|∇u + |∇u|∇θ| using |cot| ≤ csc; integrate, two alignment bounds",
        );
        let c4 = note(
            "c4",
            c5 / lambda,
            "Poincaré with the Neumann Sobolev constant, equal to the Cheeger constant ≥ Λ: C5/Λ",
        );
        let c_cos = note(
            "c_cos",
            (c_align + c4) / lambda,
            "∇(u − a cos) = ∇u + a sin∇θ; |·| ≤ |∇u + |∇u|∇θ| + |a sin − |∇u||; sin ≤ 1, csc² ≥ 1; \
             integral ≤ (C_align + C4)N^{1/2}; Poincaré: divide by Λ",
        );
        let k_shell = note(
            "k_shell",
            8.0 / PI * (8.0 * PI + 0.5 * mbar * c2),
            "csc²|∇u| over π/8 ≤ θ ≤ π/4 bounded by the csc² identity, 8π + ½m̄C2; coarea and \
             the mean value theorem on an interval of length π/8",
        );
        let c6 = note(
            "c6",
            SQRT_2 * k_shell,
            "multiply the equation by csc^{1+ε} on the ball of radius σ_p; boundary flux at σ_p \
             ≤ csc^{1+ε}(σ_p)∫|∇u| ≤ K_shell; (2 − ε) ≥ 1 after the inner boundary vanishes; \
             cos θ ≥ cos(π/4) on the ball gives √2; ε → 1 by monotone convergence",
        );
        let c7 = note(
            "c7",
            c6,
            "d/dt of the round average is bounded by sin t·csc³|∇u| over the shell; integrate and \
             use the csc³ bound. The chain yields C6/(4π); the larger C6 is kept",
        );
        let c8 = note(
            "c8",
            c7,
            "on each sphere the average bound forces (1 − γ)|{u ≤ γ}|_{S²}/4π ≤ C7 sin t; integrate against sin² t",
        );
        let c9 = note(
            "c9",
            12.0 * PI * PI * c8 / 16.0,
            "γ = 1 − 12π²C8 r/16 with r = N^{1/12}, so 1 − γ = C9 N^{1/12}",
        );
        let c10 = note(
            "c10",
            12.0 * PI * c_cos / 16.0,
            "τ = 12πC_cos N^{1/4}/16; witnesses x± give 2τ ≥ 2γ − 2a",
        );
        let c11 = note(
            "c11",
            0.5 * PI,
            "csc t ≤ (π/2)/t for t ≤ π/2; τ csc t |S³| ≤ (π/2) m^{1/2 − 1/24} V",
        );
        let csc_l2 = 2.0 * PI; // ‖csc θ‖_{L²(round)} = (4π ∫ 1 dθ)^{1/2}
        let c12 = note(
            "c12",
            0.5 * c2
                + csc_l2 * (c4 + 8.0 * PI / 3.0).sqrt()
                + c11 * v
                + (c9 + c10) * c11 * v,
            "csc² identity restricted to the good set, minus a∫csc; split 8π = ∫csc dV_round over the \
             good set and its complement; Hölder with ‖csc‖_{L²} = 2π on the complement \
             (|complement| ≤ C4 m^{1/2} + (8π/3)m^{1/8}); τ csc t V ≤ C11 V m^{11/24}; \
             amplitude bound times csc t·V; every power of m is at least 1/24 for m ≤ 1",
        );
        let c13 = note(
            "c13",
            1e12 * v,
            "packing of disjoint balls: some antipodal pair has |B(p,r)| + |B(−p,r)| ≤ 10¹² r³ V",
        );
        Ok(Self {
            params: *params,
            c2,
            c3,
            c_align,
            c4,
            c5,
            c_cos,
            k_shell,
            c6,
            c7,
            c8,
            c9,
            c10,
            c11,
            c12,
            c13,
            entries,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.value)
    }
}
