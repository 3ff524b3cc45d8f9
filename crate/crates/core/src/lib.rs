//! Phasor-domain fault studies and adaptive zone-2 distance protection for a
//! multi-terminal transmission line with wind-farm in-feed.

// Input guards are written `!(x >= lo)` on purpose: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod cli;
pub mod faultsolver;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod phasor;
pub mod relay;
pub mod windfarm;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/phasors.md")]
    mod phasors {}
    #[doc = include_str!("../../../book/src/faults.md")]
    mod faults {}
    #[doc = include_str!("../../../book/src/zones.md")]
    mod zones {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    mod adaptive {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
