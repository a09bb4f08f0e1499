//! Monte Carlo estimate harnesses tying the path engine to the solver.
//!
//! Three estimates are measured here, each packaged as an
//! [`EstimateReport`]:
//!
//! * [`krylov_functional`] — the occupation-integral bound
//!   `E ∫₀^T w_s·f(s, X_s) ds ≤ M·‖f‖_{L₂}` with weight `w_s = 1`
//!   (undiscounted) or `w_s = e^{−λφ_s}` (discounted), `φ` the
//!   `(1+|b|^α)`-clock carried by every simulated path.
//! * [`feynman_kac_check`] — the identity
//!   `E ∫₀^t e^{−λφ_s} f(s, X_s) ds = u(0, x₀) − E[u(t, X_t) e^{−λφ_t}]`
//!   with `u` produced by the spectral solver for the same instance: the
//!   cross-validation that the analytic and probabilistic halves of the
//!   library describe the same object.
//! * [`local_krylov`] — the stopped variant
//!   `E ∫₀^{t∧τ_m} f(s, X_s) ds ≤ M·‖f‖_{L₂([0,t]×[−m,m])}` with `τ_m`
//!   the first exit of `X` from `[−m, m]`.
//!
//! The theory behind the first and third bounds guarantees a finite
//! constant without naming one, so the harness reports the *implied*
//! constant `lhs/‖f‖` of every run, and the pass thresholds use
//! calibrated constants frozen at twice the largest implied constant
//! observed across the standard forcing battery — turning qualitative
//! finiteness into regression-testable numbers.
//!
//! Paths are drawn in parallel with one deterministic RNG stream per
//! path index, so every number in every report is reproducible bit for
//! bit from `(instance, master_seed)`.

use rayon::prelude::*;

use crate::error::Error;
use crate::grid::{GridFn2, BOUNDARY_MASS_LIMIT};
use crate::pde::{solve_variable, ProblemSpec};
use crate::report::EstimateReport;
use crate::sde::{simulate_path, stopping_time_tau_m};
use crate::stable::stream_rng;
use crate::Result;

/// Frozen pass threshold for [`krylov_functional`]: twice the largest
/// implied constant `lhs/‖f‖_{L₂}` observed over the acceptance battery
/// (six unit-norm forcings × three coefficient presets, discounted and
/// undiscounted, at both the base and the 2×-refined resolution; largest
/// observed value 0.721).
pub const KRYLOV_CALIBRATED_M: f64 = 1.5;

/// Frozen pass threshold for [`local_krylov`], calibrated the same way
/// over the stopped rows of the same battery (largest observed 0.721).
pub const LOCAL_CALIBRATED_M: f64 = 1.5;

/// Discounted runs must truncate only negligible tail mass: the horizon
/// has to satisfy `e^{−λ(1+μ^α)·horizon}` below this limit.
pub const DISCOUNT_TAIL_LIMIT: f64 = 1e-6;

/// Largest tolerable fraction of paths leaving the spatial box during a
/// Feynman–Kac run; beyond it the periodic reading of `u` along paths is
/// no longer physical and the run refuses to report.
pub const BOX_EXIT_LIMIT: f64 = 1e-3;

/// First-order discretization allowance in the Feynman–Kac pass
/// criterion, in units of `max|f|·dt`. The sharp part of the check is
/// the refinement study (the defect must shrink as dt halves); this
/// factor only keeps the single-resolution criterion from flagging
/// honest O(dt) bias.
pub const FK_ALLOWANCE_FACTOR: f64 = 2.0;

/// Richardson budget for the embedded solve in [`feynman_kac_check`].
pub const FK_SOLVER_BUDGET: usize = 600;

/// Relative residual demanded of the embedded solve.
pub const FK_SOLVE_TOLERANCE: f64 = 1e-6;

/// Compensated mean and standard error of a Monte Carlo sample.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let term = v - comp;
        let next = sum + term;
        comp = (next - sum) - term;
        sum = next;
    }
    let mean = sum / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run one closure per path index on the thread pool, with results in
/// path order regardless of scheduling.
fn run_paths<T: Send>(
    n_paths: usize,
    per_path: impl Fn(u64) -> Result<T> + Send + Sync,
) -> Result<Vec<T>> {
    (0..n_paths as u64).into_par_iter().map(per_path).collect()
}

fn require_nonnegative(f: &GridFn2, context: &str) -> Result<()> {
    let floor = -1e-12 * f.max_abs().max(1.0);
    if f.real_values().iter().any(|&v| v < floor) {
        return Err(Error::Precondition(format!(
            "{context} requires a nonnegative forcing"
        )));
    }
    Ok(())
}

fn check_common(spec: &ProblemSpec, f: &GridFn2, dt: f64, n_paths: usize) -> Result<f64> {
    if f.grid() != spec.grid() {
        return Err(Error::GridMismatch {
            context: "estimate harness",
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "step size must be positive"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "need at least two paths"));
    }
    // Also pins the forcing to the physical side.
    f.boundary_mass_fraction()
}

/// Monte Carlo estimate of the occupation functional
/// `E ∫₀^horizon w_s·f(s, X_s) ds`, compared against the calibrated
/// multiple of `‖f‖_{L₂}`.
///
/// `lam` is the discount rate (used only when `discounted`); it is a
/// separate argument so discount sweeps need not rebuild the instance.
/// The forcing is read off-grid by bilinear interpolation and as zero
/// outside the box, so paths may wander freely; what must stay inside
/// the box is `f`'s support (checked via the boundary-mass fraction,
/// reported as `regime_ok`). Discounted runs demand a horizon long
/// enough that the truncated tail is below [`DISCOUNT_TAIL_LIMIT`] even
/// at the slowest admissible clock rate `1+μ^α`; undiscounted runs
/// demand a horizon covering the forcing's entire time box, making the
/// truncation exact.
#[allow(clippy::too_many_arguments)]
pub fn krylov_functional(
    spec: &ProblemSpec,
    f: &GridFn2,
    x0: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    lam: f64,
    discounted: bool,
    master_seed: u64,
) -> Result<EstimateReport> {
    let boundary_f = check_common(spec, f, dt, n_paths)?;
    require_nonnegative(f, "krylov_functional")?;
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(Error::invalid("lam", "discount rate must be positive"));
    }
    if !(horizon >= dt && horizon.is_finite()) {
        return Err(Error::invalid("horizon", "need horizon >= dt"));
    }
    if discounted {
        let tail = (-lam * (1.0 + spec.mu().powf(spec.alpha())) * horizon).exp();
        if tail >= DISCOUNT_TAIL_LIMIT {
            return Err(Error::Regime(format!(
                "discounted tail bound {tail:.3e} at horizon {horizon} exceeds {DISCOUNT_TAIL_LIMIT:.0e}; extend the horizon"
            )));
        }
    } else if horizon + 1e-9 < 0.5 * spec.grid().len_t() {
        return Err(Error::Regime(format!(
            "undiscounted runs need horizon >= {} (half the time box) so truncating the integral is exact",
            0.5 * spec.grid().len_t()
        )));
    }

    let half_x = 0.5 * spec.grid().len_x();
    let per_path = run_paths(n_paths, |idx| -> Result<(f64, bool)> {
        let mut rng = stream_rng(master_seed, idx);
        let path = simulate_path(spec, x0, horizon, dt, &mut rng)?;
        let mut sum = 0.0;
        for k in 0..path.increments.len() {
            let weight = if discounted {
                (-lam * path.phi[k]).exp()
            } else {
                1.0
            };
            sum += weight * f.eval_bilinear_zero_outside(path.times[k], path.states[k])?;
        }
        let exited = path.states.iter().any(|&x| x >= half_x || x < -half_x);
        Ok((sum * dt, exited))
    })?;
    let integrals: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let exit_fraction =
        per_path.iter().filter(|p| p.1).count() as f64 / n_paths as f64;

    let (lhs, se) = mean_and_se(&integrals);
    let f_l2 = f.l2_norm();
    let implied = if f_l2 > 0.0 { lhs / f_l2 } else { 0.0 };
    let rhs = KRYLOV_CALIBRATED_M * f_l2;
    let regime_ok = boundary_f <= BOUNDARY_MASS_LIMIT;
    let pass = regime_ok && lhs <= rhs;
    let name = if discounted {
        "krylov_discounted"
    } else {
        "krylov_undiscounted"
    };
    Ok(EstimateReport::new(name, lhs, Some(se), rhs, implied, regime_ok, pass)
        .with_meta("alpha", format!("{}", spec.alpha()))
        .with_meta("lam", format!("{lam}"))
        .with_meta("discounted", format!("{discounted}"))
        .with_meta("x0", format!("{x0}"))
        .with_meta("horizon", format!("{horizon}"))
        .with_meta("dt", format!("{dt}"))
        .with_meta("paths", format!("{n_paths}"))
        .with_meta("seed", format!("{master_seed}"))
        .with_meta("f_l2", format!("{f_l2}"))
        .with_meta("boundary_f", format!("{boundary_f}"))
        .with_meta("exit_fraction", format!("{exit_fraction}"))
        .with_meta("m_calibrated", format!("{KRYLOV_CALIBRATED_M}")))
}

/// Cross-validate the solver against the path engine through the
/// discounted representation formula.
///
/// The field `u` is produced by [`solve_variable`] for the same instance
/// and forcing (residual at most [`FK_SOLVE_TOLERANCE`]·‖f‖), then both
/// sides of
/// `E ∫₀^t e^{−λφ_s} f(s, X_s) ds = u(0, x₀) − E[u(t, X_t) e^{−λφ_t}]`
/// are measured: the left by Monte Carlo time-quadrature, the right by
/// evaluating `u` at the start point and (bilinear, periodic) along the
/// simulated endpoints. The pass criterion is
/// `|lhs − rhs| ≤ 3·SE + allowance`, where the standard error comes from
/// the per-path *defect* (the statistically paired combination) and the
/// allowance is first-order in `dt` ([`FK_ALLOWANCE_FACTOR`]); the
/// sharp end of the check is the refinement study run by the acceptance
/// battery, which requires the defect itself to shrink as `dt` halves.
///
/// Paths that leave the spatial box make the periodic reading of `u`
/// unphysical, so more than [`BOX_EXIT_LIMIT`] of them is a regime
/// error.
pub fn feynman_kac_check(
    spec: &ProblemSpec,
    f: &GridFn2,
    x0: f64,
    t_end: f64,
    dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<EstimateReport> {
    let boundary_f = check_common(spec, f, dt, n_paths)?;
    let grid = spec.grid();
    if !(t_end > 0.0 && t_end < 0.5 * grid.len_t()) {
        return Err(Error::invalid(
            "t_end",
            "path horizon must lie inside the grid's time box",
        ));
    }
    let steps = (t_end / dt).round();
    if steps < 1.0 || (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::invalid("dt", "step size must divide t_end evenly"));
    }
    let steps = steps as usize;
    let lam = spec.lam();

    let solve = solve_variable(spec, f, FK_SOLVE_TOLERANCE, FK_SOLVER_BUDGET)?;
    let u = &solve.u;
    let u0 = u.eval_bilinear_wrapped(0.0, x0)?;

    let half_x = 0.5 * grid.len_x();
    let per_path = run_paths(n_paths, |idx| -> Result<(f64, f64, bool)> {
        let mut rng = stream_rng(master_seed, idx);
        let path = simulate_path(spec, x0, t_end, dt, &mut rng)?;
        let mut integral = 0.0;
        for k in 0..steps.min(path.increments.len()) {
            let weight = (-lam * path.phi[k]).exp();
            integral += weight * f.eval_bilinear_zero_outside(path.times[k], path.states[k])?;
        }
        let integral = integral * dt;
        let terminal =
            (-lam * path.final_phi()).exp() * u.eval_bilinear_wrapped(t_end, path.final_state())?;
        let exited = path.states.iter().any(|&x| x >= half_x || x < -half_x);
        Ok((integral, terminal, exited))
    })?;

    let exit_fraction =
        per_path.iter().filter(|p| p.2).count() as f64 / n_paths as f64;
    if exit_fraction > BOX_EXIT_LIMIT {
        return Err(Error::Regime(format!(
            "{:.3}% of paths left the spatial box before t_end; enlarge the box",
            100.0 * exit_fraction
        )));
    }

    let integrals: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let terminals: Vec<f64> = per_path.iter().map(|p| p.1).collect();
    // Per-path pairing: defect_i = ∫_i + terminal_i − u0 has the combined
    // fluctuation of both Monte Carlo sides.
    let defects: Vec<f64> = per_path.iter().map(|p| p.0 + p.1 - u0).collect();

    let (lhs, _se_lhs) = mean_and_se(&integrals);
    let (terminal_mean, _) = mean_and_se(&terminals);
    let (defect, defect_se) = mean_and_se(&defects);
    let rhs = u0 - terminal_mean;
    let allowance = FK_ALLOWANCE_FACTOR * f.max_abs() * dt;
    let regime_ok = boundary_f <= BOUNDARY_MASS_LIMIT;
    let pass = regime_ok && defect.abs() <= 3.0 * defect_se + allowance;
    let f_l2 = f.l2_norm();
    let implied = if f_l2 > 0.0 { lhs / f_l2 } else { 0.0 };
    Ok(
        EstimateReport::new("feynman_kac", lhs, Some(defect_se), rhs, implied, regime_ok, pass)
            .with_meta("alpha", format!("{}", spec.alpha()))
            .with_meta("lam", format!("{lam}"))
            .with_meta("x0", format!("{x0}"))
            .with_meta("t_end", format!("{t_end}"))
            .with_meta("dt", format!("{dt}"))
            .with_meta("paths", format!("{n_paths}"))
            .with_meta("seed", format!("{master_seed}"))
            .with_meta("u0", format!("{u0}"))
            .with_meta("terminal_mean", format!("{terminal_mean}"))
            .with_meta("defect", format!("{defect}"))
            .with_meta("defect_rel", format!("{}", if f_l2 > 0.0 { defect.abs() / f_l2 } else { 0.0 }))
            .with_meta("allowance", format!("{allowance}"))
            .with_meta("solver_iterations", format!("{}", solve.iterations))
            .with_meta("solver_residual", format!("{}", solve.residual_l2))
            .with_meta("exit_fraction", format!("{exit_fraction}"))
            .with_meta("boundary_f", format!("{boundary_f}")),
    )
}

/// Monte Carlo estimate of the stopped occupation functional
/// `E ∫₀^{t∧τ_m} f(s, X_s) ds` against the calibrated multiple of the
/// forcing's L₂ norm on the window `[0, t] × [−m, m]`.
///
/// Before the first exit every state lies in `[−m, m]` and every time in
/// `[0, t)`, so only the windowed part of `f` (plus one interpolation
/// cell) can contribute — the content of the localized bound.
#[allow(clippy::too_many_arguments)]
pub fn local_krylov(
    spec: &ProblemSpec,
    f: &GridFn2,
    x0: f64,
    t: f64,
    m: f64,
    dt: f64,
    n_paths: usize,
    master_seed: u64,
) -> Result<EstimateReport> {
    let boundary_f = check_common(spec, f, dt, n_paths)?;
    require_nonnegative(f, "local_krylov")?;
    let grid = spec.grid();
    if !(t > 0.0 && t <= 0.5 * grid.len_t()) {
        return Err(Error::invalid("t", "time window must fit the grid box"));
    }
    if !(m > 0.0 && m <= 0.5 * grid.len_x()) {
        return Err(Error::invalid("m", "space window must fit the grid box"));
    }
    if dt > t {
        return Err(Error::invalid("dt", "need dt <= t"));
    }

    // Windowed L₂ norm by grid quadrature over [0, t] × [−m, m].
    let mut sum_sq = 0.0;
    for p in 0..grid.n_t() {
        let tp = grid.t(p);
        if tp < -1e-12 || tp > t + 1e-12 {
            continue;
        }
        for q in 0..grid.n_x() {
            if grid.x(q).abs() <= m + 1e-12 {
                let v = f.value_at(p, q).re;
                sum_sq += v * v;
            }
        }
    }
    let window_l2 = (grid.dt() * grid.dx() * sum_sq).sqrt();

    let integrals = run_paths(n_paths, |idx| -> Result<f64> {
        let mut rng = stream_rng(master_seed, idx);
        let path = simulate_path(spec, x0, t, dt, &mut rng)?;
        let stop = stopping_time_tau_m(&path, m).unwrap_or(f64::INFINITY);
        let mut sum = 0.0;
        for k in 0..path.increments.len() {
            if path.times[k] >= stop {
                break;
            }
            sum += f.eval_bilinear_zero_outside(path.times[k], path.states[k])?;
        }
        Ok(sum * dt)
    })?;

    let (lhs, se) = mean_and_se(&integrals);
    let implied = if window_l2 > 0.0 { lhs / window_l2 } else { 0.0 };
    let rhs = LOCAL_CALIBRATED_M * window_l2;
    let regime_ok = boundary_f <= BOUNDARY_MASS_LIMIT;
    let pass = regime_ok && lhs <= rhs;
    Ok(
        EstimateReport::new("local_krylov", lhs, Some(se), rhs, implied, regime_ok, pass)
            .with_meta("alpha", format!("{}", spec.alpha()))
            .with_meta("t", format!("{t}"))
            .with_meta("m", format!("{m}"))
            .with_meta("x0", format!("{x0}"))
            .with_meta("dt", format!("{dt}"))
            .with_meta("paths", format!("{n_paths}"))
            .with_meta("seed", format!("{master_seed}"))
            .with_meta("window_l2", format!("{window_l2}"))
            .with_meta("boundary_f", format!("{boundary_f}"))
            .with_meta("m_calibrated", format!("{LOCAL_CALIBRATED_M}")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Domain, Grid2};

    const TAU: f64 = std::f64::consts::TAU;

    fn smooth_spec(alpha: f64, lam: f64) -> ProblemSpec {
        ProblemSpec::new(
            Grid2::default_box(64, 128),
            |t, x| 0.25 * (TAU * (x / 64.0 - t / 32.0)).cos(),
            |t, x| 1.0 + 0.15 * (TAU * x / 64.0).sin() * (TAU * t / 32.0).cos(),
            0.8,
            1.2,
            0.3,
            alpha,
            lam,
        )
        .unwrap()
    }

    fn brownian_spec(lam: f64) -> ProblemSpec {
        ProblemSpec::new(
            Grid2::default_box(64, 128),
            |_, _| 0.0,
            |_, _| 1.0,
            1.0,
            1.0,
            0.0,
            2.0,
            lam,
        )
        .unwrap()
    }

    fn gaussian_bump(grid: Grid2, t0: f64, x0: f64, st: f64, sx: f64) -> GridFn2 {
        GridFn2::from_fn(grid, move |t, x| {
            (-((t - t0) / st).powi(2) - ((x - x0) / sx).powi(2)).exp()
        })
    }

    /// Bump with exact compact support `(t0 ± rt) × (x0 ± rx)`.
    fn compact_bump(grid: Grid2, t0: f64, x0: f64, rt: f64, rx: f64) -> GridFn2 {
        GridFn2::from_fn(grid, move |t, x| {
            let yt = (t - t0) / rt;
            let yx = (x - x0) / rx;
            if yt.abs() < 1.0 && yx.abs() < 1.0 {
                (-1.0 / (1.0 - yt * yt) - 1.0 / (1.0 - yx * yx)).exp()
            } else {
                0.0
            }
        })
    }

    /// α = 1.5 instance on a spatial box wide enough that heavy-tailed
    /// paths stay inside at the 0.1% level over short horizons.
    fn wide_smooth_spec(lam: f64) -> ProblemSpec {
        ProblemSpec::new(
            Grid2::new(64, 512, 32.0, 256.0),
            |t, x| 0.25 * (TAU * (x / 256.0 - t / 32.0)).cos(),
            |t, x| 1.0 + 0.15 * (TAU * x / 256.0).sin() * (TAU * t / 32.0).cos(),
            0.8,
            1.2,
            0.3,
            1.5,
            lam,
        )
        .unwrap()
    }

    #[test]
    fn harness_rejects_bad_inputs() {
        let spec = smooth_spec(1.5, 1.0);
        let grid = spec.grid();
        let f = gaussian_bump(grid, 2.0, 0.0, 1.0, 2.0);
        // Negative forcing.
        let neg = f.scale(-1.0);
        assert!(matches!(
            krylov_functional(&spec, &neg, 0.0, 10.0, 0.125, 100, 1.0, true, 1),
            Err(Error::Precondition(_))
        ));
        // Mismatched grid.
        let other = gaussian_bump(Grid2::default_box(32, 64), 2.0, 0.0, 1.0, 2.0);
        assert!(matches!(
            krylov_functional(&spec, &other, 0.0, 10.0, 0.125, 100, 1.0, true, 1),
            Err(Error::GridMismatch { .. })
        ));
        // Horizon too short for the discount tail.
        assert!(matches!(
            krylov_functional(&spec, &f, 0.0, 1.0, 0.125, 100, 1.0, true, 1),
            Err(Error::Regime(_))
        ));
        // Undiscounted horizon must cover the forcing's time box.
        assert!(matches!(
            krylov_functional(&spec, &f, 0.0, 10.0, 0.125, 100, 1.0, false, 1),
            Err(Error::Regime(_))
        ));
        // Single path is not an estimate.
        assert!(krylov_functional(&spec, &f, 0.0, 10.0, 0.125, 1, 1.0, true, 1).is_err());
        // Windows must fit the box.
        assert!(local_krylov(&spec, &f, 0.0, 100.0, 8.0, 0.125, 100, 1).is_err());
        assert!(local_krylov(&spec, &f, 0.0, 4.0, 100.0, 0.125, 100, 1).is_err());
        // t_end must sit inside the time box and be a multiple of dt.
        assert!(feynman_kac_check(&spec, &f, 0.0, 20.0, 0.125, 100, 1).is_err());
        assert!(feynman_kac_check(&spec, &f, 0.0, 1.03, 0.125, 100, 1).is_err());
    }

    #[test]
    fn zero_forcing_gives_zero_functional() {
        let spec = smooth_spec(1.5, 1.0);
        let f = GridFn2::zeros(spec.grid(), Domain::Physical);
        for discounted in [true, false] {
            let report =
                krylov_functional(&spec, &f, 0.0, 16.0, 0.25, 50, 1.0, discounted, 3).unwrap();
            assert_eq!(report.lhs, 0.0);
            assert_eq!(report.se, Some(0.0));
            assert!(report.pass);
            assert_eq!(report.implied_constant, 0.0);
        }
        let local = local_krylov(&spec, &f, 0.0, 4.0, 8.0, 0.25, 50, 3).unwrap();
        assert_eq!(local.lhs, 0.0);
        assert!(local.pass);
    }

    /// With `b ≡ 1`, `a ≡ 0`, α = 2 the state is exactly Brownian at the
    /// grid times, so the discounted occupation functional has an
    /// independent deterministic evaluation: the same left-endpoint sum
    /// with `E f(t_k, X_k)` computed by Gaussian quadrature against the
    /// exact `N(x₀, t_k)` marginal. Only Monte Carlo noise separates the
    /// two.
    #[test]
    fn discounted_brownian_resolvent_matches_quadrature_oracle() {
        let lam = 0.75;
        let spec = brownian_spec(lam);
        let grid = spec.grid();
        let f = gaussian_bump(grid, 4.0, 0.0, 2.0_f64.sqrt(), 2.0_f64.sqrt());
        let (horizon, dt, n_paths) = (12.0, 1.0 / 16.0, 40_000);
        let report =
            krylov_functional(&spec, &f, 0.0, horizon, dt, n_paths, lam, true, 2024).unwrap();

        // Oracle: Σ_k e^{−2λ t_k}·E[f(t_k, N(0, t_k))]·dt, expectation by
        // cell-aligned Simpson so the piecewise-bilinear reading of f is
        // integrated essentially exactly.
        let n_steps = (horizon / dt).round() as usize;
        let mut oracle = 0.0;
        for k in 0..n_steps {
            let tk = k as f64 * dt;
            let expect = if k == 0 {
                f.eval_bilinear_zero_outside(0.0, 0.0).unwrap()
            } else {
                let sd = tk.sqrt();
                let pdf = |y: f64| {
                    (-(y * y) / (2.0 * tk)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
                };
                let mut total = 0.0;
                let cells = 48; // [-12, 12] in half-unit grid cells
                for c in 0..cells {
                    let a = -12.0 + 24.0 * c as f64 / cells as f64;
                    let b = a + 24.0 / cells as f64;
                    // Simpson with 8 panels inside one cell.
                    let panels = 8;
                    let h = (b - a) / panels as f64;
                    let g = |y: f64| f.eval_bilinear_zero_outside(tk, y).unwrap() * pdf(y);
                    let mut s = g(a) + g(b);
                    for j in 1..panels {
                        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
                        s += w * g(a + j as f64 * h);
                    }
                    total += s * h / 3.0;
                }
                total
            };
            oracle += (-2.0 * lam * tk).exp() * expect * dt;
        }

        let se = report.se.unwrap();
        assert!(
            (report.lhs - oracle).abs() <= 3.5 * se,
            "MC {} vs oracle {} with SE {}",
            report.lhs,
            oracle,
            se
        );
        assert!(report.regime_ok);
        assert!(report.implied_constant > 0.0);
    }

    #[test]
    fn discounted_never_exceeds_undiscounted() {
        let spec = smooth_spec(1.5, 1.0);
        let f = gaussian_bump(spec.grid(), 3.0, 0.0, 1.5, 2.0);
        let seed = 55;
        let undiscounted =
            krylov_functional(&spec, &f, 0.0, 16.0, 0.125, 2_000, 1.0, false, seed).unwrap();
        let discounted =
            krylov_functional(&spec, &f, 0.0, 16.0, 0.125, 2_000, 1.0, true, seed).unwrap();
        // Identical seeds mean identical paths, and e^{−λφ} ≤ 1 pathwise.
        assert!(discounted.lhs <= undiscounted.lhs * (1.0 + 1e-12));
        assert!(discounted.lhs > 0.0);
    }

    #[test]
    fn functional_is_monotone_in_forcing() {
        let spec = smooth_spec(1.5, 1.0);
        let grid = spec.grid();
        let f = gaussian_bump(grid, 3.0, 0.0, 1.5, 2.0);
        let g = f.add(&gaussian_bump(grid, 5.0, 4.0, 1.0, 1.0)).unwrap();
        let seed = 56;
        let small = krylov_functional(&spec, &f, 0.0, 12.0, 0.125, 1_500, 1.0, true, seed).unwrap();
        let large = krylov_functional(&spec, &g, 0.0, 12.0, 0.125, 1_500, 1.0, true, seed).unwrap();
        assert!(small.lhs <= large.lhs * (1.0 + 1e-12));
    }

    /// Scaling the forcing by a power of two commutes exactly with every
    /// floating-point operation in the pipeline, so implied constants
    /// are scale-free to the last bit.
    #[test]
    fn functional_is_exactly_linear_in_forcing() {
        let spec = smooth_spec(1.5, 1.0);
        let f = gaussian_bump(spec.grid(), 3.0, 0.0, 1.5, 2.0);
        let f4 = f.scale(4.0);
        let seed = 57;
        let one = krylov_functional(&spec, &f, 0.5, 12.0, 0.125, 800, 1.0, true, seed).unwrap();
        let four = krylov_functional(&spec, &f4, 0.5, 12.0, 0.125, 800, 1.0, true, seed).unwrap();
        assert_eq!(four.lhs, 4.0 * one.lhs);
        assert_eq!(four.implied_constant, one.implied_constant);
        let local_one = local_krylov(&spec, &f, 0.5, 4.0, 8.0, 0.125, 800, seed).unwrap();
        let local_four = local_krylov(&spec, &f4, 0.5, 4.0, 8.0, 0.125, 800, seed).unwrap();
        assert_eq!(local_four.lhs, 4.0 * local_one.lhs);
        assert_eq!(local_four.implied_constant, local_one.implied_constant);
    }

    /// Relabeling space by a shift (coefficients, forcing, and start
    /// point all shifted together) leaves the functional unchanged; with
    /// common driving noise the two runs agree to rounding.
    #[test]
    fn translation_covariance_holds_under_common_noise() {
        let shift = 1.0;
        let base_b = |t: f64, x: f64| 1.0 + 0.15 * (TAU * x / 64.0).sin() * (TAU * t / 32.0).cos();
        let base_a = |t: f64, x: f64| 0.25 * (TAU * (x / 64.0 - t / 32.0)).cos();
        let grid = Grid2::default_box(64, 128);
        let spec = ProblemSpec::new(grid, base_a, base_b, 0.8, 1.2, 0.3, 1.5, 1.0).unwrap();
        let shifted = ProblemSpec::new(
            grid,
            move |t, x| base_a(t, x - shift),
            move |t, x| base_b(t, x - shift),
            0.8,
            1.2,
            0.3,
            1.5,
            1.0,
        )
        .unwrap();
        let f = gaussian_bump(grid, 2.0, 0.0, 1.0, 2.0);
        let f_shifted = gaussian_bump(grid, 2.0, shift, 1.0, 2.0);
        let seed = 58;
        let a = krylov_functional(&spec, &f, 0.0, 10.0, 0.125, 1_500, 2.0, true, seed).unwrap();
        let b = krylov_functional(&shifted, &f_shifted, shift, 10.0, 0.125, 1_500, 2.0, true, seed)
            .unwrap();
        assert!(
            (a.lhs - b.lhs).abs() <= 1e-9 * (1.0 + a.lhs.abs()),
            "shift covariance broken: {} vs {}",
            a.lhs,
            b.lhs
        );
    }

    #[test]
    fn stopped_integral_never_exceeds_full_one() {
        let spec = smooth_spec(1.5, 1.0);
        let f = gaussian_bump(spec.grid(), 2.0, 0.0, 1.0, 2.0);
        let seed = 59;
        let stopped = local_krylov(&spec, &f, 0.0, 4.0, 8.0, 0.125, 1_500, seed).unwrap();
        let full =
            krylov_functional(&spec, &f, 0.0, 16.0, 0.125, 1_500, 1.0, false, seed).unwrap();
        assert!(stopped.lhs <= full.lhs * (1.0 + 1e-12));
        assert!(stopped.lhs > 0.0);
        assert!(stopped.implied_constant > 0.0);
    }

    #[test]
    fn local_vanishes_when_forcing_avoids_window() {
        let spec = smooth_spec(1.5, 1.0);
        // Compactly supported forcing over x ∈ (14, 26): well beyond the
        // window radius 8 plus the interpolation cell, so every sampled
        // value is exactly zero.
        let f = compact_bump(spec.grid(), 2.0, 20.0, 1.5, 6.0);
        let report = local_krylov(&spec, &f, 0.0, 4.0, 8.0, 0.125, 500, 60).unwrap();
        assert_eq!(report.lhs, 0.0);
        assert_eq!(report.rhs, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn local_bounded_forcing_keeps_finite_constant() {
        let spec = smooth_spec(1.5, 1.0);
        // Smooth plateau ≈ 1 over the window, smoothly cut outside.
        let f = GridFn2::from_fn(spec.grid(), |t, x| {
            (-((t - 2.0) / 2.0).powi(4) - (x / 6.0).powi(4)).exp()
        });
        let (t, m) = (4.0, 8.0);
        let report = local_krylov(&spec, &f, 0.0, t, m, 0.125, 1_000, 61).unwrap();
        // The integrand is at most max|f| over at most t of time.
        assert!(report.lhs <= f.max_abs() * t + 1e-9);
        assert!(report.lhs > 0.0);
        assert!(report.implied_constant.is_finite());
        assert!(report.implied_constant > 0.0);
    }

    #[test]
    fn feynman_kac_zero_forcing_is_exact() {
        let spec = brownian_spec(1.0);
        let f = GridFn2::zeros(spec.grid(), Domain::Physical);
        let report = feynman_kac_check(&spec, &f, 0.0, 2.0, 0.25, 100, 62).unwrap();
        assert_eq!(report.lhs, 0.0);
        assert_eq!(report.rhs, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn feynman_kac_identity_holds_for_brownian_resolvent() {
        let spec = brownian_spec(0.75);
        let f = gaussian_bump(spec.grid(), 4.0, 0.0, 2.0_f64.sqrt(), 2.0_f64.sqrt());
        let report = feynman_kac_check(&spec, &f, 0.0, 4.0, 0.125, 30_000, 63).unwrap();
        assert!(report.pass, "identity defect too large: {:?}", report.meta);
        let defect: f64 = report.meta["defect"].parse().unwrap();
        let u0: f64 = report.meta["u0"].parse().unwrap();
        assert!(u0 > 0.0, "resolvent of a nonnegative forcing is positive");
        // O(dt) quadrature bias plus the O(Δ²) interpolation floor keep
        // the defect a few percent of the resolvent value at this
        // resolution; the refinement test below pins the dt part.
        assert!(
            defect.abs() <= 0.08 * u0.max(report.lhs),
            "defect {defect} out of scale with u0 = {u0}"
        );
    }

    #[test]
    fn feynman_kac_identity_holds_with_variable_coefficients() {
        let spec = wide_smooth_spec(0.7);
        let f = gaussian_bump(spec.grid(), 1.5, 0.0, 1.0, 2.0);
        let report = feynman_kac_check(&spec, &f, 0.5, 2.0, 0.125, 30_000, 64).unwrap();
        assert!(report.pass, "identity defect too large: {:?}", report.meta);
        let defect: f64 = report.meta["defect"].parse().unwrap();
        let se = report.se.unwrap();
        assert!(
            defect.abs() <= 3.0 * se + 0.05 * report.lhs.max(1e-12),
            "defect {defect} not small next to lhs {}",
            report.lhs
        );
    }

    #[test]
    fn feynman_kac_flags_box_exits() {
        // A narrow spatial box that heavy-tailed paths leave readily.
        let grid = Grid2::new(16, 16, 32.0, 8.0);
        let spec =
            ProblemSpec::new(grid, |_, _| 0.0, |_, _| 1.0, 1.0, 1.0, 0.0, 1.5, 1.0).unwrap();
        let f = GridFn2::from_fn(grid, |t, x| (-(t - 2.0).powi(2) - x * x).exp());
        match feynman_kac_check(&spec, &f, 0.0, 4.0, 0.5, 400, 65) {
            Err(Error::Regime(message)) => {
                assert!(message.contains("box"), "unexpected message: {message}")
            }
            other => panic!("expected a box-exit regime error, got {other:?}"),
        }
    }

    /// The left-endpoint time quadrature carries an O(dt) boundary bias
    /// `(dt/2)·f(0, x₀)` whenever the forcing has mass at s = 0; with
    /// such a forcing the defect is dt-dominated and must shrink
    /// near-linearly as dt halves, well above the Monte Carlo noise.
    #[test]
    fn feynman_kac_defect_shrinks_with_dt() {
        let spec = brownian_spec(0.75);
        let f = gaussian_bump(spec.grid(), 1.0, 0.0, 1.5, 2.0_f64.sqrt());
        let defect_at = |dt: f64| {
            let report = feynman_kac_check(&spec, &f, 0.0, 4.0, dt, 30_000, 66).unwrap();
            let d: f64 = report.meta["defect"].parse().unwrap();
            (d.abs(), report.se.unwrap())
        };
        let (coarse, se_c) = defect_at(0.5);
        let (fine, se_f) = defect_at(0.125);
        assert!(
            coarse > 10.0 * se_c,
            "coarse defect {coarse} should be resolved above noise {se_c}"
        );
        assert!(
            fine <= 0.4 * coarse + 3.0 * (se_c + se_f),
            "defect should shrink near-linearly in dt: {coarse} -> {fine}"
        );
    }
}
