//! Compiles and runs the code blocks of the guide in `book/src` as
//! doc-tests, one module per chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/bodies.md")]
pub mod bodies {}
#[doc = include_str!("../../../book/src/viscous.md")]
pub mod viscous {}
#[doc = include_str!("../../../book/src/euler.md")]
pub mod euler {}
#[doc = include_str!("../../../book/src/studies.md")]
pub mod studies {}
#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}
