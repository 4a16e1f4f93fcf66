//! Doctest hooks that compile and run every code snippet in the book
//! chapters (`book/src/*.md`), keeping the guide in sync with the library.
#![cfg(doctest)]

#[doc = include_str!("../../../book/src/introduction.md")]
pub struct Introduction;

#[doc = include_str!("../../../book/src/model.md")]
pub struct Model;

#[doc = include_str!("../../../book/src/meshes.md")]
pub struct Meshes;

#[doc = include_str!("../../../book/src/virtual-elements.md")]
pub struct VirtualElements;

#[doc = include_str!("../../../book/src/assembly.md")]
pub struct Assembly;

#[doc = include_str!("../../../book/src/time-stepping.md")]
pub struct TimeStepping;

#[doc = include_str!("../../../book/src/verification.md")]
pub struct Verification;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct Cli;
