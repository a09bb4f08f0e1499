//! The nonlocal parabolic equation on the periodic space–time box.
//!
//! Everything here revolves around the operator
//!
//! ```text
//!   L u = u_t + |b(t,x)|^α·𝓛u + a(t,x)·u_x − λ·(1 + |b(t,x)|^α)·u
//! ```
//!
//! where `𝓛` is the Fourier multiplier `-½|ω|^α` (the generator of the
//! symmetric α-stable process, 1 < α ≤ 2), `b` is elliptic
//! (`0 < μ ≤ |b| ≤ ν`) and the drift is bounded (`|a| ≤ K`). Both
//! coefficients may be merely measurable — steps and checkerboards are
//! first-class citizens. The solver answers `L u + f = 0` for a given
//! forcing `f`.
//!
//! The module provides, in rough order of sophistication:
//!
//! * [`solve_constant`] / [`solve_constant_plain`] — exact one-shot spectral
//!   division for frozen coefficients; the workhorse preconditioner.
//! * [`delta_threshold`], [`lambda0_threshold`], [`m1_constant`] — the
//!   explicit constants controlling when the damping `λ` is strong enough
//!   to dominate the drift, and the weight integral behind the sup-norm
//!   bound.
//! * [`solve_variable`] — preconditioned Richardson iteration wrapped in a
//!   two-stage homotopy: first morph the diffusion coefficient from 1 to
//!   `|b|^α`, then switch on the drift. Warm starts keep every stage a
//!   short hop.
//! * [`Mollifier`] / [`mollify`] — smooth-bump regularisation used to
//!   approximate rough coefficients and data by smooth ones.
//! * [`apriori_report`] — measures a solution against the sup-norm bound
//!   `sup|u|² ≤ C·(‖u_t−λu‖² + ‖𝓛u−λu‖²)` and records every ingredient.
//!
//! Conventions: all L₂ norms are grid norms on the box (Riemann sums), and
//! Fourier-side integrals `∫∫|F(·)|² dτ dω` equal `4π²` times the squared
//! physical norms by Plancherel. Derivative multipliers vanish on the
//! Nyquist lines so that real fields map to real fields; the affected modes
//! carry no usable sign information anyway.

use std::sync::Arc;

use num_complex::Complex64;
use once_cell::sync::Lazy;

use crate::error::Error;
use crate::grid::{generator_symbol, Domain, Grid2, GridFn2, BOUNDARY_MASS_LIMIT};
use crate::report::EstimateReport;
use crate::Result;

/// Safety margin added to `λ₀/2` in the solvability precondition, so that
/// borderline inputs fail loudly instead of iterating forever.
pub const LAMBDA_MARGIN: f64 = 1e-9;

/// Absolute precision of the bisected thresholds ([`delta_threshold`],
/// [`lambda0_threshold`]).
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

/// Relative precision target of [`m1_constant`]'s adaptive quadrature.
pub const M1_RELATIVE_TOLERANCE: f64 = 1e-9;

/// A coefficient field `(t, x) ↦ value`, shared between the spectral and
/// probabilistic halves of the crate.
pub type Coeff = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A well-posed instance of the equation: the box, the coefficients with
/// their certified bounds, the stability index and the damping rate.
///
/// Construction samples both coefficients at every grid node and rejects
/// the instance unless `0 < μ ≤ |b| ≤ ν` and `|a| ≤ K` hold throughout
/// (with a 1e-9 grace for rounding). Coefficients are evaluated through
/// periodic wrapping, so the same fields drive the path simulation on all
/// of ℝ consistently with the spectral calculus on the box.
#[derive(Clone)]
pub struct ProblemSpec {
    grid: Grid2,
    a: Coeff,
    b: Coeff,
    mu: f64,
    nu: f64,
    k_bound: f64,
    alpha: f64,
    lam: f64,
}

impl ProblemSpec {
    /// Validate and freeze an instance. `a` is the drift, `b` the diffusion
    /// coefficient; `mu`, `nu`, `k_bound` are the certified bounds
    /// `0 < μ ≤ |b| ≤ ν`, `|a| ≤ K`; `alpha ∈ (1, 2]`; `lam > 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Grid2,
        a: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        mu: f64,
        nu: f64,
        k_bound: f64,
        alpha: f64,
        lam: f64,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", "ellipticity floor must be positive"));
        }
        if !(nu >= mu && nu.is_finite()) {
            return Err(Error::invalid("nu", "need mu <= nu < infinity"));
        }
        if !(k_bound >= 0.0 && k_bound.is_finite()) {
            return Err(Error::invalid("k_bound", "drift bound must be >= 0"));
        }
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::invalid(
                "alpha",
                "stability index must lie in (1, 2]",
            ));
        }
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(Error::invalid("lam", "damping rate must be positive"));
        }
        let spec = ProblemSpec {
            grid,
            a: Arc::new(a),
            b: Arc::new(b),
            mu,
            nu,
            k_bound,
            alpha,
            lam,
        };
        let grace = 1e-9;
        for p in 0..grid.n_t() {
            let t = grid.t(p);
            for q in 0..grid.n_x() {
                let x = grid.x(q);
                let bv = (spec.b)(t, x).abs();
                if !bv.is_finite() || bv < mu - grace * mu.max(1.0) || bv > nu + grace * nu.max(1.0)
                {
                    return Err(Error::Precondition(format!(
                        "diffusion coefficient leaves [{mu}, {nu}] at (t, x) = ({t}, {x}): |b| = {bv}"
                    )));
                }
                let av = (spec.a)(t, x).abs();
                if !av.is_finite() || av > k_bound + grace * k_bound.max(1.0) {
                    return Err(Error::Precondition(format!(
                        "drift coefficient exceeds {k_bound} at (t, x) = ({t}, {x}): |a| = {av}"
                    )));
                }
            }
        }
        Ok(spec)
    }

    pub fn grid(&self) -> Grid2 {
        self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn k_bound(&self) -> f64 {
        self.k_bound
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lam(&self) -> f64 {
        self.lam
    }

    /// Drift value at `(t, x)`, with both coordinates wrapped into the box.
    pub fn a_at(&self, t: f64, x: f64) -> f64 {
        (self.a)(self.grid.wrap_t(t), self.grid.wrap_x(x))
    }

    /// Diffusion coefficient at `(t, x)`, wrapped into the box.
    pub fn b_at(&self, t: f64, x: f64) -> f64 {
        (self.b)(self.grid.wrap_t(t), self.grid.wrap_x(x))
    }

    /// `|b|^α` sampled at every grid node, row-major.
    pub fn b_alpha_values(&self) -> Vec<f64> {
        let g = self.grid;
        let mut out = Vec::with_capacity(g.node_count());
        for p in 0..g.n_t() {
            let t = g.t(p);
            for q in 0..g.n_x() {
                out.push((self.b)(t, g.x(q)).abs().powf(self.alpha));
            }
        }
        out
    }

    /// Drift sampled at every grid node, row-major.
    pub fn a_values(&self) -> Vec<f64> {
        let g = self.grid;
        let mut out = Vec::with_capacity(g.node_count());
        for p in 0..g.n_t() {
            let t = g.t(p);
            for q in 0..g.n_x() {
                out.push((self.a)(t, g.x(q)));
            }
        }
        out
    }

    /// Midpoint of the attainable `|b|^α` range — the frozen coefficient the
    /// Richardson preconditioner divides by.
    pub fn c_star(&self) -> f64 {
        0.5 * (self.mu.powf(self.alpha) + self.nu.powf(self.alpha))
    }

    /// Effective drift mass seen by the weakest admissible diffusion,
    /// `2K/μ^α`; the input fed to [`lambda0_threshold`] when gating
    /// [`solve_variable`]. Absorbing the drift against the diffusion costs a
    /// factor `1/μ^α` in the worst case, and the 2 covers the two sides of
    /// the Young split.
    pub fn m2(&self) -> f64 {
        2.0 * self.k_bound / self.mu.powf(self.alpha)
    }

    /// The damping threshold `δ` for these bounds.
    pub fn delta(&self) -> Result<f64> {
        delta_threshold(self.mu, self.k_bound, self.alpha)
    }

    /// The damping threshold `λ₀` for these bounds.
    pub fn lambda0(&self) -> Result<f64> {
        lambda0_threshold(self.m2(), self.alpha)
    }
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("grid", &self.grid)
            .field("mu", &self.mu)
            .field("nu", &self.nu)
            .field("k_bound", &self.k_bound)
            .field("alpha", &self.alpha)
            .field("lam", &self.lam)
            .finish()
    }
}

/// Outcome of [`solve_variable`].
#[derive(Clone, Debug)]
pub struct SolveResult {
    /// The solution field (physical side).
    pub u: GridFn2,
    /// Absolute grid L₂ norm of the final residual `L u + f`. The solver
    /// stops once this drops below `tol·‖f‖`.
    pub residual_l2: f64,
    /// Total Richardson corrections spent across all homotopy stages.
    pub iterations: usize,
    /// The homotopy parameters visited, in order: one sweep 0 → 1 morphing
    /// the diffusion coefficient, then a second sweep 0 → 1 switching on
    /// the drift.
    pub homotopy_path: Vec<f64>,
}

fn check_solver_scalars(lam: f64, alpha: f64) -> Result<()> {
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(Error::invalid("lam", "damping rate must be positive"));
    }
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::invalid(
            "alpha",
            "stability index must lie in (1, 2]",
        ));
    }
    Ok(())
}

/// Solve `u_t + c·𝓛u − λ(1+c)·u = f` for a frozen diffusion constant
/// `c > 0` by exact spectral division: the symbol `−iτ − c·½|ω|^α − λ(1+c)`
/// has modulus at least `λ(1+c) > 0`, so the division never degenerates
/// (a non-finite quotient would still be caught and reported). Following
/// the discrete derivative convention, the `−iτ` part is dropped on the
/// τ-Nyquist line — that slot is its own conjugate partner and an odd
/// symbol there would push real data off the real axis.
pub fn solve_constant(f: &GridFn2, lam: f64, c: f64, alpha: f64) -> Result<GridFn2> {
    check_solver_scalars(lam, alpha)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", "frozen coefficient must be positive"));
    }
    let nyq_t = f.grid().nyquist_t() * (1.0 - 1e-12);
    f.forward()?
        .apply_multiplier(|tau, omega| {
            let t_part = if tau.abs() >= nyq_t { 0.0 } else { tau };
            let divisor = Complex64::new(
                c * generator_symbol(omega, alpha) - lam * (1.0 + c),
                -t_part,
            );
            divisor.inv()
        })?
        .inverse_real()
}

/// Solve the plain-damped equation `u_t + 𝓛u − λu = f` by spectral
/// division with the symbol `−iτ − ½|ω|^α − λ` (time part dropped on the
/// τ-Nyquist line, as in [`solve_constant`]).
pub fn solve_constant_plain(f: &GridFn2, lam: f64, alpha: f64) -> Result<GridFn2> {
    check_solver_scalars(lam, alpha)?;
    let nyq_t = f.grid().nyquist_t() * (1.0 - 1e-12);
    f.forward()?
        .apply_multiplier(|tau, omega| {
            let t_part = if tau.abs() >= nyq_t { 0.0 } else { tau };
            let divisor = Complex64::new(generator_symbol(omega, alpha) - lam, -t_part);
            divisor.inv()
        })?
        .inverse_real()
}

/// Apply `u ↦ u_t + σ·𝓛u + drift_scale·a·u_x − λ(1+σ)·u` where `σ` and `a`
/// are per-node value arrays. The derivatives are spectral with the odd
/// multipliers zeroed on the Nyquist lines (those slots carry no sign).
fn apply_operator_arrays(
    u: &GridFn2,
    sigma: &[f64],
    a_vals: &[f64],
    drift_scale: f64,
    lam: f64,
    alpha: f64,
) -> Result<GridFn2> {
    let grid = u.grid();
    let nyq_t = grid.nyquist_t() * (1.0 - 1e-12);
    let nyq_x = grid.nyquist_x() * (1.0 - 1e-12);
    let spectrum = u.forward()?;
    let u_t = spectrum
        .apply_multiplier(|tau, _| {
            if tau.abs() >= nyq_t {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -tau)
            }
        })?
        .inverse_real()?;
    let gen_u = spectrum
        .apply_multiplier(|_, omega| Complex64::new(generator_symbol(omega, alpha), 0.0))?
        .inverse_real()?;
    let u_x = if drift_scale != 0.0 {
        Some(
            spectrum
                .apply_multiplier(|_, omega| {
                    if omega.abs() >= nyq_x {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, -omega)
                    }
                })?
                .inverse_real()?,
        )
    } else {
        None
    };
    let mut values = Vec::with_capacity(grid.node_count());
    for i in 0..grid.node_count() {
        let uv = u.values()[i].re;
        let mut out = u_t.values()[i].re + sigma[i] * gen_u.values()[i].re
            - lam * (1.0 + sigma[i]) * uv;
        if let Some(ux) = &u_x {
            out += drift_scale * a_vals[i] * ux.values()[i].re;
        }
        values.push(Complex64::new(out, 0.0));
    }
    GridFn2::from_values(grid, Domain::Physical, values)
}

/// Apply the full equation operator
/// `L u = u_t + |b|^α·𝓛u + a·u_x − λ(1+|b|^α)·u` of a [`ProblemSpec`] to a
/// physical-side field. Solutions produced by [`solve_variable`] satisfy
/// `L u + f ≈ 0`.
pub fn apply_equation_operator(spec: &ProblemSpec, u: &GridFn2) -> Result<GridFn2> {
    if u.grid() != spec.grid {
        return Err(Error::GridMismatch {
            context: "apply_equation_operator",
        });
    }
    apply_operator_arrays(
        u,
        &spec.b_alpha_values(),
        &spec.a_values(),
        1.0,
        spec.lam,
        spec.alpha,
    )
}

/// Solve `L u + f = 0` for measurable coefficients by preconditioned
/// Richardson iteration inside a two-stage homotopy.
///
/// Stage one replaces `|b|^α` by `σ_s = (1−s) + s·|b|^α` with the drift off
/// and walks `s` over `{0, ¼, ½, ¾, 1}`; stage two keeps `σ = |b|^α` and
/// scales the drift by the same schedule. Each stage solves
/// `u ← u − P⁻¹(L_s u + f)` where the preconditioner `P` is
/// [`solve_constant`] with `c` frozen at the midpoint of the current `σ`
/// range — the choice that minimises the worst-case contraction factor.
/// Earlier stages warm-start later ones, so each hop only has to erase an
/// O(¼) perturbation.
///
/// Preconditions: `f` physical on `spec.grid()`; `tol > 0` (relative to
/// `‖f‖`); `max_iter ≥ 1` bounds the **total** corrections across all
/// stages; and the damping must clear both thresholds,
/// `λ ≥ max(δ, λ₀/2 + margin)` — otherwise the iteration has no reason to
/// contract and the call fails fast with both thresholds attached.
pub fn solve_variable(
    spec: &ProblemSpec,
    f: &GridFn2,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    if f.grid() != spec.grid {
        return Err(Error::GridMismatch {
            context: "solve_variable",
        });
    }
    if f.domain() != Domain::Physical {
        return Err(Error::DomainTag {
            expected: "physical",
            got: "fourier",
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid("tol", "relative tolerance must be positive"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter", "iteration budget must be >= 1"));
    }
    let delta = spec.delta()?;
    let lambda0 = spec.lambda0()?;
    let required = delta.max(0.5 * lambda0 + LAMBDA_MARGIN);
    if !(spec.lam >= required) {
        return Err(Error::LambdaBelowThreshold {
            lam: spec.lam,
            delta,
            half_lambda0: 0.5 * lambda0,
        });
    }

    let f_norm = f.l2_norm();
    if f_norm == 0.0 {
        return Ok(SolveResult {
            u: GridFn2::zeros(spec.grid, Domain::Physical),
            residual_l2: 0.0,
            iterations: 0,
            homotopy_path: Vec::new(),
        });
    }

    let b_alpha = spec.b_alpha_values();
    let a_vals = spec.a_values();
    let c_full = spec.c_star();
    let schedule = [0.0, 0.25, 0.5, 0.75, 1.0];

    let mut u = GridFn2::zeros(spec.grid, Domain::Physical);
    let mut iterations = 0usize;
    let mut homotopy_path = Vec::with_capacity(2 * schedule.len());
    let mut residual_l2 = 0.0;
    let mut tail: Vec<f64> = Vec::new();

    // Stage 1 (drift off, diffusion morphs), then stage 2 (drift morphs).
    for stage in 0..2 {
        for &s in &schedule {
            homotopy_path.push(s);
            let (sigma, c_node, drift_scale): (Vec<f64>, f64, f64) = if stage == 0 {
                (
                    b_alpha.iter().map(|&v| (1.0 - s) + s * v).collect(),
                    (1.0 - s) + s * c_full,
                    0.0,
                )
            } else {
                (b_alpha.clone(), c_full, s)
            };
            loop {
                let residual =
                    apply_operator_arrays(&u, &sigma, &a_vals, drift_scale, spec.lam, spec.alpha)?
                        .add(f)?;
                residual_l2 = residual.l2_norm();
                let rel = residual_l2 / f_norm;
                tail.push(rel);
                if tail.len() > 8 {
                    tail.remove(0);
                }
                if !rel.is_finite() {
                    return Err(Error::SolverDivergence {
                        iterations,
                        tail,
                    });
                }
                if rel <= tol {
                    break;
                }
                if iterations >= max_iter {
                    return Err(Error::SolverDivergence {
                        iterations,
                        tail,
                    });
                }
                let correction = solve_constant(&residual, spec.lam, c_node, spec.alpha)?;
                u = u.sub(&correction)?;
                iterations += 1;
            }
        }
    }

    Ok(SolveResult {
        u,
        residual_l2,
        iterations,
        homotopy_path,
    })
}

/// Best value of `h(w) = a_lin·w − ½w^α` over `w > 0` (0 when `a_lin ≤ 0`).
/// The maximiser `w* = (2·a_lin/α)^{1/(α−1)}` is known in closed form; a
/// golden-section pass around it plus a broad log-scan guard against any
/// surprises in floating point.
fn linear_minus_symbol_sup(a_lin: f64, alpha: f64) -> f64 {
    if a_lin <= 0.0 {
        return 0.0;
    }
    let h = |w: f64| a_lin * w - 0.5 * w.powf(alpha);
    let w_star = (2.0 * a_lin / alpha).powf(1.0 / (alpha - 1.0));
    if !w_star.is_finite() {
        // α so close to 1 that the maximiser overflows; the sup is
        // astronomically large and reported as such.
        return f64::INFINITY;
    }
    let mut best = golden_section_max(h, 0.25 * w_star, 4.0 * w_star, 160);
    let (lo, hi) = (1e-9f64.ln(), (1e9f64.max(w_star * 10.0)).ln());
    for i in 0..=2000 {
        let w = (lo + (hi - lo) * i as f64 / 2000.0).exp();
        best = best.max(h(w));
    }
    best.max(0.0)
}

/// Golden-section search for the maximum of a unimodal function; returns
/// the best value seen (endpoints included).
fn golden_section_max(h: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut best = h(a).max(h(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut hc = h(c);
    let mut hd = h(d);
    for _ in 0..iters {
        best = best.max(hc).max(hd);
        if hc >= hd {
            b = d;
            d = c;
            hd = hc;
            c = b - inv_phi * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + inv_phi * (b - a);
            hd = h(d);
        }
    }
    best.max(hc).max(hd)
}

/// Find the smallest `t ≥ 0` with `t ≥ sup_value` by bisection to
/// [`THRESHOLD_TOLERANCE`] — the uniform-in-ω feasibility formulation of
/// the threshold definitions below.
fn bisect_smallest_dominating(sup_value: f64) -> f64 {
    if !sup_value.is_finite() {
        return sup_value;
    }
    let feasible = |t: f64| t >= sup_value;
    let mut lo = 0.0;
    let mut hi = sup_value.max(0.0) + 1.0;
    if feasible(lo) {
        return 0.0;
    }
    while hi - lo > THRESHOLD_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest damping `δ ≥ 0` such that
/// `μ^α·(λ + ½|ω|^α)² ≥ (4K²/μ^α)·ω²` holds for every frequency `ω` and
/// every `λ ≥ δ` — the point past which the drift can no longer out-shout
/// the diffusion in the energy estimate. Equivalently
/// `δ = sup_ω [(2K/μ^α)·|ω| − ½|ω|^α]`, located in closed form and then
/// pinned by bisection to 1e-9. Scales like `K^{α/(α−1)}`.
pub fn delta_threshold(mu: f64, k_bound: f64, alpha: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid("mu", "ellipticity floor must be positive"));
    }
    if !(k_bound >= 0.0 && k_bound.is_finite()) {
        return Err(Error::invalid("k_bound", "drift bound must be >= 0"));
    }
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::invalid(
            "alpha",
            "stability index must lie in (1, 2]",
        ));
    }
    if k_bound == 0.0 {
        return Ok(0.0);
    }
    let a_lin = 2.0 * k_bound / mu.powf(alpha);
    Ok(bisect_smallest_dominating(linear_minus_symbol_sup(
        a_lin, alpha,
    )))
}

/// Smallest `λ₀ ≥ 0` such that `m2·ω² ≤ ½(λ₀ + ½|ω|^α)²` for every
/// frequency — the damping needed before a first-order term of strength
/// `√m2` can be absorbed by half the diffusion. Equivalently
/// `λ₀ = sup_ω [√(2·m2)·|ω| − ½|ω|^α]`, computed like [`delta_threshold`].
pub fn lambda0_threshold(m2: f64, alpha: f64) -> Result<f64> {
    if !(m2 >= 0.0 && m2.is_finite()) {
        return Err(Error::invalid("m2", "first-order mass must be >= 0"));
    }
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::invalid(
            "alpha",
            "stability index must lie in (1, 2]",
        ));
    }
    if m2 == 0.0 {
        return Ok(0.0);
    }
    let a_lin = (2.0 * m2).sqrt();
    Ok(bisect_smallest_dominating(linear_minus_symbol_sup(
        a_lin, alpha,
    )))
}

/// Adaptive Simpson quadrature with Richardson acceleration.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(m - a, fa, flm, fm);
        let right = simpson(b - m, fm, frm, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(b - a, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// The frequency-weight integral `M₁ = π·∫_ℝ dω/(2λ + |ω|^α)`, evaluated by
/// adaptive quadrature to a relative 1e-9: the head `[0, A]` after the
/// smoothing substitution `ω = w⁴`, the tail by the geometric expansion of
/// `1/(2λ + ω^α)` in `2λ·ω^{−α}`. Finite exactly when `α > 1`; requesting
/// `α ≤ 1` is a divergent integral and is refused.
pub fn m1_constant(lam: f64, alpha: f64) -> Result<f64> {
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(Error::invalid("lam", "damping rate must be positive"));
    }
    if alpha <= 1.0 {
        return Err(Error::invalid(
            "alpha",
            "the frequency integral diverges for alpha <= 1",
        ));
    }
    if alpha > 2.0 {
        return Err(Error::invalid(
            "alpha",
            "stability index must lie in (1, 2]",
        ));
    }
    let two_lam = 2.0 * lam;
    let scale = two_lam.powf(1.0 / alpha);
    let a_cut = 50.0 * scale.max(1.0);
    // Head: ∫₀^A dω/(2λ+ω^α) = ∫₀^{A^{1/4}} 4w³/(2λ+w^{4α}) dw.
    let integrand = |w: f64| 4.0 * w.powi(3) / (two_lam + w.powf(4.0 * alpha));
    let w_hi = a_cut.powf(0.25);
    let coarse: f64 = {
        let n = 64;
        let h = w_hi / n as f64;
        let mut acc = integrand(0.0) + integrand(w_hi);
        for i in 1..n {
            let w = i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(w);
        }
        acc * h / 3.0
    };
    let head = adaptive_simpson(
        &integrand,
        0.0,
        w_hi,
        coarse.abs().max(1e-300) * M1_RELATIVE_TOLERANCE,
    );
    // Tail: ∫_A^∞ dω/(2λ+ω^α) = Σ_{k≥0} (−2λ)^k · A^{1−α(k+1)}/(α(k+1)−1),
    // convergent because 2λ·A^{−α} ≤ 50^{−α} < 1.
    let mut tail = 0.0;
    let mut term_base = 1.0;
    for k in 0..80 {
        let expo = alpha * (k + 1) as f64 - 1.0;
        let term = term_base * a_cut.powf(-expo) / expo;
        tail += term;
        if term.abs() < 1e-16 * (head + tail).abs() {
            break;
        }
        term_base *= -two_lam;
    }
    Ok(2.0 * std::f64::consts::PI * (head + tail))
}

/// ∫_{-1}^{1} e^{−1/(1−y²)} dy, the 1-D bump normaliser. The integrand is
/// C^∞ with all derivatives vanishing at ±1, so composite Simpson converges
/// far beyond the 1e-12 needed here.
static BUMP_NORM_1D: Lazy<f64> = Lazy::new(|| {
    let n = 8192;
    let h = 2.0 / n as f64;
    let mut acc = bump_1d(-1.0) + bump_1d(1.0);
    for i in 1..n {
        let y = -1.0 + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * bump_1d(y);
    }
    acc * h / 3.0
});

fn bump_1d(y: f64) -> f64 {
    if y.abs() < 1.0 {
        (-1.0 / (1.0 - y * y)).exp()
    } else {
        0.0
    }
}

/// A smooth compactly supported probability kernel and its scale.
///
/// The unscaled kernel is the separable bump
/// `ψ(t, x) = bump(2t)·bump(2x)/Z` with `bump(y) = e^{−1/(1−y²)}`: unit
/// mass, C^∞, and supported in `|t| < ½ ∧ |x| < ½` — inside the unit
/// `|t|+|x| < 1` ball. The scaled kernel `ψ_ε = ε^{−2}ψ(t/ε, x/ε)` keeps
/// unit mass with support shrinking like `ε`.
#[derive(Clone, Copy, Debug)]
pub struct Mollifier {
    eps: f64,
}

impl Mollifier {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid("eps", "mollifier scale must be positive"));
        }
        Ok(Mollifier { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The unit-scale kernel `ψ(t, x)`; unit mass, support in the open
    /// `ℓ¹` unit ball.
    pub fn kernel_unscaled(t: f64, x: f64) -> f64 {
        let z = 0.5 * *BUMP_NORM_1D;
        bump_1d(2.0 * t) * bump_1d(2.0 * x) / (z * z)
    }

    /// The scaled kernel `ψ_ε(t, x) = ε^{−2}·ψ(t/ε, x/ε)`.
    pub fn kernel(&self, t: f64, x: f64) -> f64 {
        Self::kernel_unscaled(t / self.eps, x / self.eps) / (self.eps * self.eps)
    }
}

/// Convolve a physical-side field with the mollifier kernel, periodically.
///
/// The kernel is sampled on the grid, renormalised to exact unit discrete
/// mass (so constants are preserved to the last bit), and the convolution
/// is carried out as a Fourier-side product — exactly the Riemann-sum
/// circular convolution `Δt·Δx·Σ_m u[m]·ψ_ε(z_n − z_m)`.
///
/// The scale must satisfy `ε < min(len_t, len_x)/4` so the kernel support
/// stays far from its own periodic images.
pub fn mollify(u: &GridFn2, m: &Mollifier) -> Result<GridFn2> {
    if u.domain() != Domain::Physical {
        return Err(Error::DomainTag {
            expected: "physical",
            got: "fourier",
        });
    }
    let grid = u.grid();
    let limit = 0.25 * grid.len_t().min(grid.len_x());
    if m.eps() >= limit {
        return Err(Error::invalid(
            "eps",
            format!(
                "mollifier scale {} does not fit the box (need eps < {limit})",
                m.eps()
            ),
        ));
    }
    let mut kernel = GridFn2::from_fn(grid, |t, x| m.kernel(t, x));
    let mass: f64 = kernel.values().iter().map(|v| v.re).sum::<f64>() * grid.cell_area();
    if !(mass > 0.0) {
        return Err(Error::Invariant(format!(
            "sampled mollifier kernel has non-positive mass {mass}"
        )));
    }
    kernel = kernel.scale(1.0 / mass);
    u.forward()?
        .pointwise_mul(&kernel.forward()?)?
        .inverse_real()
}

/// Measure a solution of `L u + f = 0` against the sup-norm estimate and
/// record every ingredient.
///
/// The tested inequality is
///
/// ```text
///   sup|u|²  ≤  (M₁^eff / 8π⁴) · ( ∫∫|F(u_t − λu)|² + ∫∫|F(𝓛u − λu)|² )
/// ```
///
/// with `M₁^eff = 2^{1/α}·M₁` and `M₁ = π∫dω/(2λ+|ω|^α)`; the rescaled
/// constant equals `π∫dω/(2λ+½|ω|^α)` — the weight matched to the `½|ω|^α`
/// symbol normalisation used throughout — and makes the chain
/// Cauchy–Schwarz-rigorous:
///
/// ```text
///   16π⁴|u|² ≤ (∫∫|Fu|)² ≤ ∫∫ G|Fu|² · ∫∫ G⁻¹,    G = (λ²+τ²) + (λ+½|ω|^α)²
///   ∫∫ G⁻¹ = π∫ dω/√(λ²+(λ+½ω^α)²) ≤ π√2∫ dω/(2λ+½ω^α) = √2·M₁^eff.
/// ```
///
/// The report's `lhs` is `sup|u|²`, the `rhs` the bound above, and `pass`
/// allows 1% discretisation slack. `implied_constant` is the measured
/// stability ratio `(‖u‖ + ‖u_t‖ + ‖𝓛u‖)/‖f‖`. The unrescaled variant of
/// the bound is kept in `meta["rhs_raw"]`. The run counts as in-regime when
/// `λ` clears the `δ` threshold and both fields keep their L² mass away
/// from the box edges.
pub fn apriori_report(spec: &ProblemSpec, u: &GridFn2, f: &GridFn2) -> Result<EstimateReport> {
    if u.grid() != spec.grid || f.grid() != spec.grid {
        return Err(Error::GridMismatch {
            context: "apriori_report",
        });
    }
    let lam = spec.lam;
    let alpha = spec.alpha;
    let spectrum = u.forward()?;
    let a_side = spectrum.apply_multiplier(|tau, _| Complex64::new(-lam, -tau))?;
    let b_side = spectrum
        .apply_multiplier(|_, omega| Complex64::new(generator_symbol(omega, alpha) - lam, 0.0))?;
    let four_pi_sq = 4.0 * std::f64::consts::PI.powi(2);
    // Fourier-side integrals ∫∫|F(·)|² dτdω = 4π²·‖·‖²_{L₂}.
    let i_a = four_pi_sq * a_side.l2_norm().powi(2);
    let i_b = four_pi_sq * b_side.l2_norm().powi(2);
    let m1 = m1_constant(lam, alpha)?;
    let m1_eff = 2f64.powf(1.0 / alpha) * m1;
    let eight_pi4 = 8.0 * std::f64::consts::PI.powi(4);
    let rhs = m1_eff / eight_pi4 * (i_a + i_b);
    let rhs_raw = m1 / eight_pi4 * (i_a + i_b);
    let sup_u = u.max_abs();
    let lhs = sup_u * sup_u;

    let norms = crate::grid::h_norms(u, alpha)?;
    let f_norm = f.l2_norm();
    let implied = if f_norm > 0.0 { norms.h / f_norm } else { 0.0 };
    let delta = spec.delta()?;
    let boundary_u = u.boundary_mass_fraction()?;
    let boundary_f = f.boundary_mass_fraction()?;
    let regime_ok =
        lam >= delta && boundary_u <= BOUNDARY_MASS_LIMIT && boundary_f <= BOUNDARY_MASS_LIMIT;
    let pass = regime_ok && lhs <= rhs * 1.01;

    Ok(
        EstimateReport::new("apriori", lhs, None, rhs, implied, regime_ok, pass)
            .with_meta("alpha", format!("{alpha}"))
            .with_meta("lam", format!("{lam}"))
            .with_meta("mu", format!("{}", spec.mu))
            .with_meta("nu", format!("{}", spec.nu))
            .with_meta("k_bound", format!("{}", spec.k_bound))
            .with_meta("delta", format!("{delta:.9e}"))
            .with_meta("m1", format!("{m1:.9e}"))
            .with_meta("m1_eff", format!("{m1_eff:.9e}"))
            .with_meta("integral_dt_side", format!("{i_a:.9e}"))
            .with_meta("integral_gen_side", format!("{i_b:.9e}"))
            .with_meta("rhs_raw", format!("{rhs_raw:.9e}"))
            .with_meta("sup_u", format!("{sup_u:.9e}"))
            .with_meta("l2_u", format!("{:.9e}", norms.l2))
            .with_meta("l2_dt", format!("{:.9e}", norms.l2_dt))
            .with_meta("l2_gen", format!("{:.9e}", norms.l2_gen))
            .with_meta("f_l2", format!("{f_norm:.9e}"))
            .with_meta("boundary_u", format!("{boundary_u:.3e}"))
            .with_meta("boundary_f", format!("{boundary_f:.3e}")),
    )
}
