//! Numerical laboratory for one-dimensional SDEs driven by symmetric
//! α-stable processes, `1 < α ≤ 2`, with merely measurable coefficients.
//!
//! The crate cross-checks two independent routes to the same quantities:
//!
//! * an **analytic route** — the fractional generator handled as a Fourier
//!   multiplier on a periodic space-time box, constant- and
//!   variable-coefficient nonlocal parabolic solves, and the a-priori
//!   estimates (energy, sup-norm, validity thresholds) that control them;
//! * a **probabilistic route** — Euler–Maruyama simulation of the jump SDE
//!   `dX = b(t, X_{t-}) dZ + a(t, X_t) dt`, occupation-time functionals
//!   `E ∫ f(s, X_s) ds`, and the Feynman–Kac identity tying path averages
//!   back to the solver.
//!
//! Each side is implemented from its own primitives so that agreement is
//! evidence, not circularity. Module map:
//!
//! * [`grid`] — periodic 2-D (t, x) grids, the discrete Fourier calculus and
//!   its norms;
//! * [`stable`] — stable laws: sampling, characteristic exponents, spectral
//!   and jump-quadrature forms of the generator, the semigroup;
//! * [`pde`] — problem data, constant/variable-coefficient solvers,
//!   estimate constants, mollification, a-priori reports;
//! * [`sde`] — path simulation, stopping times, mollified coefficient
//!   families, the law-convergence experiment;
//! * [`krylov`] — Monte Carlo occupation estimates, the Feynman–Kac check,
//!   and their reports;
//! * [`presets`] — the named coefficient fields shared by experiments and
//!   tests.

pub mod error;
mod fft;
pub mod grid;
pub mod krylov;
pub mod pde;
pub mod presets;
pub mod report;
pub mod sde;
pub mod stable;

pub use error::Error;
pub use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
