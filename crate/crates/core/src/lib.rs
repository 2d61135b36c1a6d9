//! Coupled-mode model of magnon-photon-magnon systems, with field sweeps and
//! parameter fitting on top.
//!
//! ```
//! use magcouple::kittel::{kittel_frequency, KittelMaterial};
//! let w = kittel_frequency(&KittelMaterial::YIG, 1000.0).unwrap();
//! assert!((w - 29.18629815512752).abs() < 1e-9);
//! ```

pub mod cli;
pub mod error;
pub mod fitting;
pub mod io;
pub mod kittel;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod sweep;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/kittel.md")]
    mod kittel {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    mod sweeps {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/thickness.md")]
    mod thickness {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
