//! Author-side toolchain for signed, content-addressed research bundles.
//!
//! A seed directory is imported into a [`project`], figures pass the
//! [`figsafe`] gate, [`bundle`] seals the sources under a Merkle root,
//! [`signing`] attests it with throwaway Ed25519 keys, [`antispam`] decides
//! admissibility, [`publish`] pushes it, and [`translog`] records what
//! happened.

pub mod canonical;
pub mod digest;
pub mod error;
pub mod antispam;
pub mod bundle;
pub mod figsafe;
pub mod fsutil;
pub mod lock;
pub mod manifest;
pub mod project;
pub mod publish;
pub mod signing;
pub mod timefmt;
pub mod translog;
pub mod yaml;

pub use digest::Digest;
pub use error::{Category, Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/projects.md")]
    struct Projects;
    #[doc = include_str!("../../../book/src/figures.md")]
    struct Figures;
    #[doc = include_str!("../../../book/src/bundles.md")]
    struct Bundles;
    #[doc = include_str!("../../../book/src/signing.md")]
    struct Signing;
    #[doc = include_str!("../../../book/src/admission.md")]
    struct Admission;
    #[doc = include_str!("../../../book/src/translog.md")]
    struct Translog;
    #[doc = include_str!("../../../book/src/publishing.md")]
    struct Publishing;
}
