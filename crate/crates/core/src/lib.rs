//! Verification toolkit for first-order non-homogeneous operators `L + q`.
//!
//! A vector field `L = ξ^i ∂_i` on a single chart together with a scalar
//! potential `q` defines the operator `(L + q)ψ = Lψ + qψ`. A nonvanishing
//! solution `η` of `(L + q)η = 0` conjugates the operator back to the bare
//! field, `L + q = η L η⁻¹`. This crate computes such gauge functions, checks
//! that identity and its consequences pointwise, measures weighted `L²`
//! inner products by quadrature, and realizes the evolution groups generated
//! by `L` and `L + q` through characteristic flows.
//!
//! Modules, bottom-up:
//!
//! * [`expr`]: expression DSL with exact symbolic differentiation.
//! * [`manifold`]: metrics, vector fields, divergence and weighted divergence.
//! * [`gauge`]: the gauge function and the conjugation identities.
//! * [`quadrature`] and [`hilbert`]: weighted inner products and the isometry `|η|^α`.
//! * [`flow`]: characteristic flows, cocycles and the two evolution groups.
//! * [`check`]: pass/fail records shared by all checks.

pub mod check;
pub mod domain;
pub mod expr;
pub mod flow;
pub mod gauge;
pub mod hilbert;
pub mod manifold;
pub mod quadrature;

pub use check::{CheckRecord, Verdict};
pub use domain::BoxDomain;
pub use expr::{parse, Chart, EvalError, Expr, ParseError};
pub use flow::{FlowError, FlowIntegrator, FlowSolver};
pub use gauge::{FirstOrderOperator, GaugeError, GaugeFunction};
pub use hilbert::{QuadratureRule, QuadratureScheme, WeightedSpace};
pub use manifold::{Metric, VectorField};
