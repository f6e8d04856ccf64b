//! Generalized conjugation with G-coupling functions on sampled grids.
//!
//! A G-coupling is a nonnegative `g: A × B → R` with `inf g = 0`. For a
//! proper `f: A → R ∪ {+∞}` it induces the conjugate
//! `f^g(y) = sup_x g(x, y) - f(x)`, a dual problem `min_y f^g(y)`, the gap
//! functional `γ(x, y) = f(x) + f^g(y)` and the Lagrange-type function
//! `L(x, y) = f(x) - g(x, y)`. Everything here is computed exactly over finite
//! point sets, with tolerances only where a decision ("is this zero?") is made.
//!
//! Module map:
//!
//! * [`value`], [`grid`], [`function`], [`tol`]: extended reals, point sets,
//!   sampled functions, tolerances.
//! * [`expr`]: the arithmetic expression language used by problem files.
//! * [`coupling`]: builtin and custom couplings, (D1)/(D2)/zero-slice checks.
//! * [`conjugate`], [`legendre`]: `f^g`, `f^gg`, Young-type inequality, and a
//!   linear-time 1-D Legendre transform.
//! * [`duality`], [`perturbation`]: family membership, primal/dual solving,
//!   optimality certificates, the marginal-function scheme.
//! * [`lagrangian`]: minimax and saddle points of `L`.
//! * [`gapfn`]: gap functions of variational inequalities and equilibrium problems.
//! * [`stability`]: uniform-convergence experiments.
//! * [`cli`]: problem files, commands and CSV rendering.

pub mod cli;
pub mod conjugate;
pub mod coupling;
pub mod duality;
pub mod error;
pub mod exact;
pub mod expr;
pub mod function;
pub mod gapfn;
pub mod grid;
pub mod lagrangian;
pub mod legendre;
pub mod perturbation;
pub mod stability;
pub mod tol;
pub mod value;

pub use conjugate::{g_biconjugate, g_conjugate, young_violation, Conjugate};
pub use coupling::{evaluate_coupling, verify_coupling, CouplingSample, CouplingSpec, CouplingVerdict};
pub use error::{Error, Result};
pub use expr::Expression;
pub use function::{infimum, sup_distance, Minimum, SampledFunction};
pub use grid::{build_grid, restrict_to_feasible, Axis, PointSet, Structure};
pub use tol::ToleranceConfig;
pub use value::ExtendedValue;
