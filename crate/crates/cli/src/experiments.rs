//! Experiment dispatchers: each run configuration maps to one battery of
//! estimate checks, every check lands in an [`EstimateReport`] row, and the
//! whole batch is written as one structured-text record plus one flat CSV.
//!
//! Forcing shapes and manufactured fields are defined relative to the box
//! dimensions, so a config that scales the grid scales the experiment with
//! it. Shapes that feed Monte Carlo estimates keep their L² mass far from
//! the box edges (the estimate harnesses gate on that), and shapes feeding
//! occupation functionals are nonnegative, as those harnesses require.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use stablelab::grid::{Grid2, GridFn2, h_norms};
use stablelab::krylov::{feynman_kac_check, krylov_functional, local_krylov};
use stablelab::pde::{
    apply_equation_operator, apriori_report, delta_threshold, lambda0_threshold, m1_constant,
    solve_constant_plain, solve_variable, ProblemSpec,
};
use stablelab::report::EstimateReport;
use stablelab::sde::convergence_experiment;
use stablelab::stable::{apply_generator_quadrature, apply_generator_spectral_1d, GeneratorQuadrature};
use stablelab::{Error, Result};

use crate::config::{Experiment, ExperimentConfig};

/// Smoothing ladder used by the convergence study.
pub const CONVERGENCE_LADDER: [u32; 4] = [4, 16, 64, 256];

/// Relative tolerance demanded of the generator cross-check away from the
/// diffusive endpoint (quadrature route vs spectral route).
pub const SYMBOL_TOLERANCE_JUMP: f64 = 1e-3;

/// Relative tolerance at the diffusive endpoint (second-difference
/// reference vs spectral route).
pub const SYMBOL_TOLERANCE_DIFFUSIVE: f64 = 1e-6;

/// Recovery target for the manufactured-solution check: relative solution
/// error plus relative residual.
pub const MANUFACTURED_TOLERANCE: f64 = 1e-6;

fn build_spec(cfg: &ExperimentConfig) -> Result<ProblemSpec> {
    let grid = Grid2::new(cfg.n_t, cfg.n_x, cfg.len_t, cfg.len_x);
    cfg.coefficient_preset
        .build(grid, cfg.mu, cfg.nu, cfg.k, cfg.alpha, cfg.lam)
}

/// Product-Gaussian bump centered at `(t0, x0)` with the given widths.
fn bump(grid: Grid2, t0: f64, x0: f64, st: f64, sx: f64) -> GridFn2 {
    GridFn2::from_fn(grid, move |t, x| {
        (-((t - t0) / st).powi(2) - ((x - x0) / sx).powi(2)).exp()
    })
}

/// Run the configured experiment and return its report rows.
pub fn dispatch(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    match cfg.experiment {
        Experiment::SymbolCheck => symbol_check(cfg),
        Experiment::SolveManufactured => solve_manufactured(cfg),
        Experiment::AprioriBattery => apriori_battery(cfg),
        Experiment::KrylovBattery => krylov_battery(cfg),
        Experiment::FeynmanKac => feynman_kac(cfg),
        Experiment::LocalKrylov => local_krylov_experiment(cfg),
        Experiment::ConvergenceStudy => convergence_study(cfg),
        Experiment::Constants => constants(cfg),
    }
}

/// Generator values two independent ways on a 1-D axis of the box.
///
/// Away from the diffusive endpoint the reference route is compensated
/// singular-integral quadrature of the jump form; at the endpoint the jump
/// integral degenerates, so the reference is a small-h second difference
/// (the generator there is half a second derivative). Either way the value
/// under test comes from the spectral multiplier, compared on the central
/// half of the axis where periodization error is negligible.
fn symbol_check(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let n = cfg.n_x;
    let len = cfg.len_x;
    let dx = len / n as f64;
    let axis: Vec<f64> = (0..n).map(|q| -0.5 * len + q as f64 * dx).collect();
    let central = n / 4..3 * n / 4;

    let mut rows = Vec::new();
    if cfg.alpha < 2.0 {
        // Smooth localized profiles, box-relative, with frequency content
        // in the band where the compensated quadrature is sharpest. The
        // spectral route reads its samples periodically, and the generator
        // is nonlocal with heavy tails, so the quadrature must integrate
        // the same box-periodized profile: wrapping the argument realizes
        // that exactly for profiles this localized.
        let shapes: [(f64, f64); 3] = [
            (0.0, len / 24.0),
            (len / 8.0, len / 32.0),
            (-len / 10.0, len / 20.0),
        ];
        let quad = GeneratorQuadrature::default();
        for (j, &(c, w)) in shapes.iter().enumerate() {
            let g = move |x: f64| {
                let wrapped = (x - c + 0.5 * len).rem_euclid(len) - 0.5 * len;
                (-(wrapped / w).powi(2)).exp()
            };
            let samples: Vec<f64> = axis.iter().map(|&x| g(x)).collect();
            let spectral = apply_generator_spectral_1d(&samples, len, cfg.alpha);
            let denom = spectral.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut worst = 0.0f64;
            for q in central.clone() {
                let reference = apply_generator_quadrature(g, &quad, cfg.alpha, axis[q])?;
                worst = worst.max((spectral[q] - reference).abs());
            }
            let rel = worst / denom;
            rows.push(
                EstimateReport::new(
                    format!("symbol_check_{j}"),
                    rel,
                    None,
                    SYMBOL_TOLERANCE_JUMP,
                    rel / SYMBOL_TOLERANCE_JUMP,
                    true,
                    rel <= SYMBOL_TOLERANCE_JUMP,
                )
                .with_meta("alpha", format!("{}", cfg.alpha))
                .with_meta("route", "jump_quadrature")
                .with_meta("center", format!("{c}"))
                .with_meta("width", format!("{w}"))
                .with_meta("sup_generator", format!("{denom:.6e}")),
            );
        }
    } else {
        // Band-limited trigonometric profiles: every mode is far below the
        // axis Nyquist frequency, so the spectral route is exact and the
        // only reference error is the O(h²) second-difference truncation.
        let tau = std::f64::consts::TAU;
        let mode_sets: [&[(f64, f64, f64)]; 3] = [
            &[(3.0, 1.0, 0.0)],
            &[(2.0, 1.0, 0.4), (5.0, 0.5, 1.1)],
            &[(1.0, 0.7, 0.0), (4.0, 0.6, 2.0), (7.0, 0.25, 0.9)],
        ];
        let h = 1e-3 * len / 64.0;
        for (j, modes) in mode_sets.iter().enumerate() {
            let label = modes
                .iter()
                .map(|&(m, _, _)| format!("{m}"))
                .collect::<Vec<_>>()
                .join("+");
            let modes: Vec<(f64, f64, f64)> = modes.to_vec();
            let lenc = len;
            let g = move |x: f64| {
                modes
                    .iter()
                    .map(|&(m, amp, phase)| amp * (tau * m * x / lenc + phase).sin())
                    .sum::<f64>()
            };
            let samples: Vec<f64> = axis.iter().map(|&x| g(x)).collect();
            let spectral = apply_generator_spectral_1d(&samples, len, 2.0);
            let denom = spectral.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut worst = 0.0f64;
            for q in central.clone() {
                let x = axis[q];
                let reference = 0.5 * (g(x + h) - 2.0 * g(x) + g(x - h)) / (h * h);
                worst = worst.max((spectral[q] - reference).abs());
            }
            let rel = worst / denom;
            rows.push(
                EstimateReport::new(
                    format!("symbol_check_{j}"),
                    rel,
                    None,
                    SYMBOL_TOLERANCE_DIFFUSIVE,
                    rel / SYMBOL_TOLERANCE_DIFFUSIVE,
                    true,
                    rel <= SYMBOL_TOLERANCE_DIFFUSIVE,
                )
                .with_meta("alpha", "2".to_string())
                .with_meta("route", "second_difference")
                .with_meta("modes", label)
                .with_meta("sup_generator", format!("{denom:.6e}")),
            );
        }
    }
    Ok(rows)
}

/// Manufacture a smooth field, push it through the equation operator to get
/// a forcing, and demand the iterative solver reproduce the field.
fn solve_manufactured(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let spec = build_spec(cfg)?;
    let grid = spec.grid();
    let (st, sx) = (grid.len_t() / 10.0, grid.len_x() / 10.0);
    let u_star = bump(grid, 0.0, 0.0, st, sx);
    let f = apply_equation_operator(&spec, &u_star)?.scale(-1.0);
    let sol = solve_variable(&spec, &f, 1e-9, 800)?;
    let err_rel = sol.u.sub(&u_star)?.l2_norm() / u_star.l2_norm();
    let res_rel = sol.residual_l2 / f.l2_norm();
    let lhs = err_rel + res_rel;
    let report = EstimateReport::new(
        "solve_manufactured",
        lhs,
        None,
        MANUFACTURED_TOLERANCE,
        lhs / MANUFACTURED_TOLERANCE,
        true,
        lhs <= MANUFACTURED_TOLERANCE,
    )
    .with_meta("preset", cfg.coefficient_preset.name().to_string())
    .with_meta("error_rel", format!("{err_rel:.6e}"))
    .with_meta("residual_rel", format!("{res_rel:.6e}"))
    .with_meta("iterations", format!("{}", sol.iterations))
    .with_meta("homotopy_stages", format!("{}", sol.homotopy_path.len()));
    Ok(vec![report])
}

/// Two forcing shapes for the solver-based inequality batteries,
/// box-relative and decaying well inside the box.
fn apriori_shapes(grid: Grid2) -> Result<[GridFn2; 2]> {
    let (lt, lx) = (grid.len_t(), grid.len_x());
    let f0 = bump(grid, 0.0, 0.0, lt / 10.0, lx / 10.0);
    let f1 = bump(grid, lt / 8.0, -lx / 12.0, lt / 16.0, 0.09 * lx).add(
        &bump(grid, -lt / 10.0, lx / 10.0, lt / 12.0, 0.07 * lx).scale(0.5),
    )?;
    Ok([f0, f1])
}

/// Energy inequality rows for the constant-coefficient solve, then sup-norm
/// inequality rows for the variable-coefficient solve.
fn apriori_battery(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let spec = build_spec(cfg)?;
    let grid = spec.grid();
    let shapes = apriori_shapes(grid)?;
    let mut rows = Vec::new();

    // ‖u_t‖² + λ²‖u‖² + ‖𝓛u‖² ≤ ‖f‖² for the plain-damped solve; each
    // piece is a plain Fourier multiplier, so the slack is machine-level.
    for (j, f) in shapes.iter().enumerate() {
        for (i, lam) in [cfg.lam, 4.0 * cfg.lam].into_iter().enumerate() {
            let u = solve_constant_plain(f, lam, cfg.alpha)?;
            let norms = h_norms(&u, cfg.alpha)?;
            let lhs =
                norms.l2_dt.powi(2) + lam.powi(2) * norms.l2.powi(2) + norms.l2_gen.powi(2);
            let f_sq = f.l2_norm().powi(2);
            let rhs = f_sq * (1.0 + 1e-8);
            rows.push(
                EstimateReport::new(
                    format!("energy_f{j}_lam{i}"),
                    lhs,
                    None,
                    rhs,
                    if f_sq > 0.0 { lhs / f_sq } else { 0.0 },
                    true,
                    lhs <= rhs,
                )
                .with_meta("lam", format!("{lam}"))
                .with_meta("alpha", format!("{}", cfg.alpha))
                .with_meta("l2_dt", format!("{:.9e}", norms.l2_dt))
                .with_meta("l2_u", format!("{:.9e}", norms.l2))
                .with_meta("l2_gen", format!("{:.9e}", norms.l2_gen)),
            );
        }
    }

    for (j, f) in shapes.iter().enumerate() {
        let sol = solve_variable(&spec, f, 1e-8, 800)?;
        let mut report = apriori_report(&spec, &sol.u, f)?;
        report.name = format!("apriori_f{j}");
        report = report
            .with_meta("iterations", format!("{}", sol.iterations))
            .with_meta("residual_l2", format!("{:.6e}", sol.residual_l2))
            .with_meta("preset", cfg.coefficient_preset.name().to_string());
        rows.push(report);
    }
    Ok(rows)
}

/// Unit-norm nonnegative forcing battery for the occupation functionals.
/// Time mass sits early in the run so the discounted rows keep a
/// measurable value under the exponential clock weight.
fn krylov_shapes(grid: Grid2) -> Result<[GridFn2; 3]> {
    let (lt, lx) = (grid.len_t(), grid.len_x());
    let raw0 = bump(grid, 0.08 * lt, 0.0, 0.05 * lt, 0.06 * lx);
    let raw1 = bump(grid, 0.15 * lt, -0.1 * lx, 0.04 * lt, 0.06 * lx);
    let raw2 = bump(grid, 0.06 * lt, 0.08 * lx, 0.035 * lt, 0.07 * lx).add(&bump(
        grid,
        0.17 * lt,
        -0.08 * lx,
        0.04 * lt,
        0.07 * lx,
    ))?;
    let normalize = |f: GridFn2| {
        let norm = f.l2_norm();
        f.scale(1.0 / norm)
    };
    Ok([normalize(raw0), normalize(raw1), normalize(raw2)])
}

/// Discounted, plain, and window-localized occupation rows over the
/// forcing battery, all under the same path law (shared seed).
fn krylov_battery(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let spec = build_spec(cfg)?;
    let grid = spec.grid();
    let t_window = cfg.horizon.min(0.5 * grid.len_t());
    let m_window = 0.25 * grid.len_x();
    let mut rows = Vec::new();
    for (j, f) in krylov_shapes(grid)?.iter().enumerate() {
        let mut discounted = krylov_functional(
            &spec, f, cfg.x0, cfg.horizon, cfg.dt, cfg.n_paths, cfg.lam, true, cfg.seed,
        )?;
        discounted.name = format!("krylov_discounted_f{j}");
        rows.push(discounted);

        let mut plain = krylov_functional(
            &spec, f, cfg.x0, cfg.horizon, cfg.dt, cfg.n_paths, cfg.lam, false, cfg.seed,
        )?;
        plain.name = format!("krylov_undiscounted_f{j}");
        rows.push(plain);

        let mut localized = local_krylov(
            &spec, f, cfg.x0, t_window, m_window, cfg.dt, cfg.n_paths, cfg.seed,
        )?;
        localized.name = format!("local_krylov_f{j}");
        rows.push(localized);
    }
    Ok(rows)
}

/// Path functional against the solver value for one forcing whose time
/// mass sits at the start of the run (that keeps the dominant
/// discretization error proportional to the step size, so refining `dt`
/// visibly shrinks the defect).
fn feynman_kac(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let spec = build_spec(cfg)?;
    let grid = spec.grid();
    let f = bump(
        grid,
        0.03125 * grid.len_t(),
        cfg.x0,
        0.046875 * grid.len_t(),
        grid.len_x() / 32.0,
    );
    let report = feynman_kac_check(&spec, &f, cfg.x0, cfg.horizon, cfg.dt, cfg.n_paths, cfg.seed)?;
    Ok(vec![report])
}

/// One stopped, window-localized occupation row.
fn local_krylov_experiment(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let spec = build_spec(cfg)?;
    let grid = spec.grid();
    let t_window = cfg.horizon.min(0.5 * grid.len_t());
    let m_window = 0.25 * grid.len_x();
    let f = bump(
        grid,
        0.5 * t_window,
        cfg.x0,
        0.1 * t_window,
        0.3 * m_window,
    );
    let f = f.scale(1.0 / f.l2_norm());
    let report = local_krylov(
        &spec, &f, cfg.x0, t_window, m_window, cfg.dt, cfg.n_paths, cfg.seed,
    )?;
    Ok(vec![report])
}

/// W1 distances between endpoint laws of consecutive smoothing-ladder
/// members under common noise, with paired bootstrap intervals.
fn convergence_study(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let spec = build_spec(cfg)?;
    let ladder = CONVERGENCE_LADDER;
    let rows = convergence_experiment(
        &spec,
        cfg.x0,
        cfg.horizon,
        cfg.dt,
        &ladder,
        cfg.n_paths,
        cfg.seed,
    )?;
    let mut reports = Vec::new();
    let mut prev_w1 = f64::INFINITY;
    for row in rows {
        let name = format!("w1_{}_{}", row.n_coarse, row.n_fine);
        let rhs = prev_w1;
        let pass = row.w1 <= rhs;
        reports.push(
            EstimateReport::new(
                name,
                row.w1,
                None,
                rhs,
                if rhs.is_finite() && rhs > 0.0 {
                    row.w1 / rhs
                } else {
                    0.0
                },
                true,
                pass,
            )
            .with_meta("ci_lo", format!("{}", row.ci_lo))
            .with_meta("ci_hi", format!("{}", row.ci_hi))
            .with_meta("paths", format!("{}", row.paths))
            .with_meta("n_coarse", format!("{}", row.n_coarse))
            .with_meta("n_fine", format!("{}", row.n_fine))
            .with_meta("preset", cfg.coefficient_preset.name().to_string()),
        );
        prev_w1 = row.w1;
    }
    Ok(reports)
}

/// Closed-form threshold and symbol constants for the configured scalars.
fn constants(cfg: &ExperimentConfig) -> Result<Vec<EstimateReport>> {
    let delta = delta_threshold(cfg.mu, cfg.k, cfg.alpha)?;
    let m2 = 2.0 * cfg.k / cfg.mu.powf(cfg.alpha);
    let lambda0 = lambda0_threshold(m2, cfg.alpha)?;
    let m1 = m1_constant(cfg.lam, cfg.alpha)?;
    let row = |name: &str, value: f64, inputs: String| {
        EstimateReport::new(
            name,
            value,
            None,
            value,
            value,
            true,
            value.is_finite() && value >= 0.0,
        )
        .with_meta("inputs", inputs)
    };
    Ok(vec![
        row(
            "delta",
            delta,
            format!("mu={} k={} alpha={}", cfg.mu, cfg.k, cfg.alpha),
        ),
        row("lambda0", lambda0, format!("m2={m2} alpha={}", cfg.alpha)),
        row("m1", m1, format!("lam={} alpha={}", cfg.lam, cfg.alpha)),
    ])
}

/// Serialize report rows to the frozen CSV schema. Floats use the shortest
/// round-trip decimal form, so equal runs give byte-equal files.
pub fn reports_to_csv(reports: &[EstimateReport]) -> String {
    let mut out = String::from("name,lhs,se,rhs,implied_constant,regime_ok,pass\n");
    for r in reports {
        let se = r.se.map(|s| format!("{s}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.name, r.lhs, se, r.rhs, r.implied_constant, r.regime_ok, r.pass
        ));
    }
    out
}

/// Serialize the full run record: config echo, artifact version, wall
/// time, then every report with its diagnostics.
pub fn run_record_text(
    cfg: &ExperimentConfig,
    reports: &[EstimateReport],
    wall_ms: u128,
) -> String {
    let mut out = String::new();
    out.push_str("# run record\n");
    out.push_str(&cfg.echo());
    out.push_str(&format!(
        "version = {} {}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    ));
    out.push_str(&format!("wall_ms = {wall_ms}\n"));
    out.push_str(&format!("reports = {}\n", reports.len()));
    for (i, r) in reports.iter().enumerate() {
        out.push_str(&format!("\n[report {i}]\n"));
        out.push_str(&format!("name = {}\n", r.name));
        out.push_str(&format!("lhs = {}\n", r.lhs));
        out.push_str(&format!(
            "se = {}\n",
            r.se.map(|s| format!("{s}")).unwrap_or_default()
        ));
        out.push_str(&format!("rhs = {}\n", r.rhs));
        out.push_str(&format!("implied_constant = {}\n", r.implied_constant));
        out.push_str(&format!("regime_ok = {}\n", r.regime_ok));
        out.push_str(&format!("pass = {}\n", r.pass));
        for (k, v) in &r.meta {
            out.push_str(&format!("meta.{k} = {v}\n"));
        }
    }
    out
}

/// Write `record.txt` and `reports.csv` under `out_dir`, each through a
/// temp file and an atomic rename so no failed run leaves partial output.
pub fn write_outputs(
    out_dir: &Path,
    record: &str,
    csv: &str,
) -> std::io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir)?;
    let record_path = out_dir.join("record.txt");
    let csv_path = out_dir.join("reports.csv");
    atomic_write(out_dir, "record.txt", record)?;
    atomic_write(out_dir, "reports.csv", csv)?;
    Ok((record_path, csv_path))
}

fn atomic_write(dir: &Path, name: &str, content: &str) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(content.as_bytes())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))
}

/// Map an error to the process exit status contract: bad inputs are 2,
/// out-of-regime runs are 3, anything else is an internal failure, 4.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument { .. }
        | Error::Precondition(_)
        | Error::DomainTag { .. }
        | Error::GridMismatch { .. } => 2,
        Error::Regime(_) | Error::LambdaBelowThreshold { .. } => 3,
        _ => 4,
    }
}
