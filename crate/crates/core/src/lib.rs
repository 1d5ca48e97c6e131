//! Isotropic polytrope steady states of the Nordström–Vlasov system.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod error;
pub mod functionals;
pub mod io;
pub mod momentum_integrals;
pub mod ode;
pub mod quadrature;
pub mod radial_ode;
pub mod steady_state;
pub mod variational;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/shooting.md")]
    mod shooting {}
    #[doc = include_str!("../../../book/src/physical.md")]
    mod physical {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/variational.md")]
    mod variational {}
    #[doc = include_str!("../../../book/src/dispersion.md")]
    mod dispersion {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
