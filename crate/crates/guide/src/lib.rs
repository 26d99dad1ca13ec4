//! Compiles the code samples of the book as doctests.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/kernels.md")]
mod kernels {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/penalized.md")]
mod penalized {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/tuning.md")]
mod tuning {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ssanova.md")]
mod ssanova {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/classification.md")]
mod classification {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lasso.md")]
mod lasso {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rke.md")]
mod rke {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/dcor.md")]
mod dcor {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
