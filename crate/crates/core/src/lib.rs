pub mod bundles;
pub mod dolbeault;
pub mod error;
pub mod geometry;
pub mod modules_k;
pub mod numerics;
pub mod quantization;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/quantization.md")]
    mod quantization {}
    #[doc = include_str!("../../../book/src/dolbeault.md")]
    mod dolbeault {}
    #[doc = include_str!("../../../book/src/modules.md")]
    mod modules {}
    #[doc = include_str!("../../../book/src/morphisms.md")]
    mod morphisms {}
    #[doc = include_str!("../../../book/src/idempotents.md")]
    mod idempotents {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/limits.md")]
    mod limits {}
}
