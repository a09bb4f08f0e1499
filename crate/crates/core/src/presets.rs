//! Named coefficient families for batch experiments.
//!
//! Every preset builds a full [`ProblemSpec`] from the same knobs
//! `(grid, μ, ν, K, α, λ)`, with coefficients periodic over the grid box
//! (spatial patterns use the box-fundamental frequencies), so the same
//! preset name means the same instance at every resolution of the same
//! box. The four families stake out the corners of the admissible class:
//! constant coefficients, smooth variable ones, a diffusion coefficient
//! with a spatial jump, and a checkerboard that is discontinuous in both
//! variables — the "merely measurable" stress case.

use crate::error::Error;
use crate::grid::Grid2;
use crate::pde::ProblemSpec;
use crate::Result;

const TAU: f64 = std::f64::consts::TAU;

/// The named coefficient families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientPreset {
    /// `b ≡ (μ+ν)/2`, `a ≡ K`: constant coefficients; with `μ = ν = 1`,
    /// `K = 0`, `α = 2` this is the Brownian reference instance.
    Const,
    /// Smooth box-periodic modulation of both coefficients.
    SmoothSine,
    /// Diffusion coefficient jumping from `μ` (x < 0) to `ν` (x ≥ 0);
    /// smooth drift.
    StepB,
    /// Diffusion coefficient alternating between `μ` and `ν` on an 8×8
    /// checkerboard of the box — discontinuous in time and space.
    CheckerboardB,
}

impl CoefficientPreset {
    /// All presets, in the order they are documented and listed.
    pub const ALL: [CoefficientPreset; 4] = [
        CoefficientPreset::Const,
        CoefficientPreset::SmoothSine,
        CoefficientPreset::StepB,
        CoefficientPreset::CheckerboardB,
    ];

    /// The configuration-file name of the preset.
    pub fn name(self) -> &'static str {
        match self {
            CoefficientPreset::Const => "const",
            CoefficientPreset::SmoothSine => "smooth_sine",
            CoefficientPreset::StepB => "step_b",
            CoefficientPreset::CheckerboardB => "checkerboard_b",
        }
    }

    /// Inverse of [`CoefficientPreset::name`].
    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| {
                Error::invalid(
                    "coefficient_preset",
                    format!(
                        "unknown preset {name:?}; expected one of const, smooth_sine, step_b, checkerboard_b"
                    ),
                )
            })
    }

    /// Whether both coefficients are smooth functions of `(t, x)`.
    pub fn is_smooth(self) -> bool {
        matches!(self, CoefficientPreset::Const | CoefficientPreset::SmoothSine)
    }

    /// Build the instance over `grid` with bounds `μ ≤ |b| ≤ ν`,
    /// `|a| ≤ K` and damping `λ`.
    pub fn build(
        self,
        grid: Grid2,
        mu: f64,
        nu: f64,
        k_bound: f64,
        alpha: f64,
        lam: f64,
    ) -> Result<ProblemSpec> {
        let mid = 0.5 * (mu + nu);
        let half = 0.5 * (nu - mu);
        let (lt, lx) = (grid.len_t(), grid.len_x());
        match self {
            CoefficientPreset::Const => ProblemSpec::new(
                grid,
                move |_, _| k_bound,
                move |_, _| mid,
                mu,
                nu,
                k_bound,
                alpha,
                lam,
            ),
            CoefficientPreset::SmoothSine => ProblemSpec::new(
                grid,
                move |t, x| k_bound * (TAU * (x / lx + t / lt)).sin(),
                move |t, x| mid + half * (TAU * x / lx).sin() * (TAU * t / lt).cos(),
                mu,
                nu,
                k_bound,
                alpha,
                lam,
            ),
            CoefficientPreset::StepB => ProblemSpec::new(
                grid,
                move |t, _| k_bound * (TAU * t / lt).cos(),
                move |_, x| if x < 0.0 { mu } else { nu },
                mu,
                nu,
                k_bound,
                alpha,
                lam,
            ),
            CoefficientPreset::CheckerboardB => {
                let (ct, cx) = (lt / 8.0, lx / 8.0);
                ProblemSpec::new(
                    grid,
                    move |t, x| {
                        k_bound * (TAU * x / lx).sin() * (TAU * t / lt).cos()
                    },
                    move |t, x| {
                        let cell =
                            (t / ct).floor() as i64 + (x / cx).floor() as i64;
                        if cell.rem_euclid(2) == 0 {
                            nu
                        } else {
                            mu
                        }
                    },
                    mu,
                    nu,
                    k_bound,
                    alpha,
                    lam,
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for preset in CoefficientPreset::ALL {
            assert_eq!(CoefficientPreset::parse(preset.name()).unwrap(), preset);
        }
        assert!(matches!(
            CoefficientPreset::parse("bogus"),
            Err(Error::InvalidArgument { name, .. }) if name == "coefficient_preset"
        ));
    }

    #[test]
    fn every_preset_builds_a_valid_instance() {
        let grid = Grid2::default_box(32, 64);
        for preset in CoefficientPreset::ALL {
            let spec = preset.build(grid, 0.8, 1.2, 0.3, 1.5, 6.0).unwrap();
            assert_eq!(spec.mu(), 0.8);
            assert_eq!(spec.alpha(), 1.5);
        }
    }

    #[test]
    fn brownian_reference_instance_is_constant_unit() {
        let grid = Grid2::default_box(32, 64);
        let spec = CoefficientPreset::Const
            .build(grid, 1.0, 1.0, 0.0, 2.0, 0.75)
            .unwrap();
        for (t, x) in [(0.0, 0.0), (3.7, -11.2), (-8.1, 19.3)] {
            assert_eq!(spec.b_at(t, x), 1.0);
            assert_eq!(spec.a_at(t, x), 0.0);
        }
    }

    #[test]
    fn step_preset_hits_both_bounds() {
        let grid = Grid2::default_box(32, 64);
        let spec = CoefficientPreset::StepB
            .build(grid, 0.8, 1.2, 0.3, 1.5, 6.0)
            .unwrap();
        assert_eq!(spec.b_at(0.0, -5.0), 0.8);
        assert_eq!(spec.b_at(0.0, 5.0), 1.2);
    }

    #[test]
    fn checkerboard_alternates_in_both_directions() {
        let grid = Grid2::default_box(32, 64);
        let spec = CoefficientPreset::CheckerboardB
            .build(grid, 0.8, 1.2, 0.0, 1.5, 6.0)
            .unwrap();
        // Cell sizes are 4 (time) and 8 (space); crossing one boundary in
        // either variable flips the value.
        let v00 = spec.b_at(1.0, 1.0);
        let v10 = spec.b_at(5.0, 1.0);
        let v01 = spec.b_at(1.0, 9.0);
        let v11 = spec.b_at(5.0, 9.0);
        assert_ne!(v00, v10);
        assert_ne!(v00, v01);
        assert_eq!(v00, v11);
        for v in [v00, v10, v01, v11] {
            assert!(v == 0.8 || v == 1.2);
        }
    }

    #[test]
    fn smooth_preset_spans_but_respects_bounds() {
        let grid = Grid2::default_box(64, 128);
        let spec = CoefficientPreset::SmoothSine
            .build(grid, 0.8, 1.2, 0.3, 1.5, 6.0)
            .unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..64 {
            for j in 0..128 {
                let v = spec.b_at(grid.t(i), grid.x(j));
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!(lo >= 0.8 - 1e-12 && hi <= 1.2 + 1e-12);
        assert!(hi - lo > 0.3, "modulation should actually vary: [{lo}, {hi}]");
    }
}
