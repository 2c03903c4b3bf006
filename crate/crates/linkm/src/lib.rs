//! Numerical third-order invariant `M` of 3-component links.
//!
//! The invariant is assembled from singular curve and volume integrals built
//! on the Gauss linking kernel: a main Gauss-pair term, nine `b` volume
//! terms, `c`/`d` curve terms, three `f` products and one `e` term. The
//! crate provides:
//!
//! - Fourier curve and link types with analytic tangents ([`curves`]),
//! - pairwise linking numbers by two independent routes ([`linking`]),
//! - the singular kernels and curve potentials ([`potentials`]),
//! - gauge-fixed scalar potentials along components ([`gauge`]),
//! - deterministic and Monte Carlo integration ([`quadrature`]),
//! - every named term and the assembled invariant ([`terms`]),
//! - an ergodic field-line estimator of the same quantity ([`fieldlines`]).
//!
//! All randomized computations are driven by counter-based streams keyed by
//! (seed, label, index), so every result is bit-reproducible regardless of
//! thread count.

pub mod config;
pub mod curves;
pub mod error;
pub mod fieldlines;
pub mod gauge;
pub mod geom;
pub mod linking;
pub mod potentials;
pub mod quadrature;
pub mod terms;

pub use config::Config;
pub use curves::{preset, Curve3, Link3, Preset};
pub use error::{Error, Result};
pub use geom::{triple, RigidMotion, Vec3};
pub use linking::LinkingMatrix;
pub use quadrature::Estimate;
pub use terms::{assemble_m, TermBreakdown};

/// Install a global rayon pool honoring the LINKM_THREADS cap. Call once at
/// process start; later calls are no-ops.
pub fn init_thread_pool() {
    if let Ok(v) = std::env::var("LINKM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
