#[doc = include_str!("../../../book/src/intro.md")]
pub struct Intro;

#[doc = include_str!("../../../book/src/relative-basis.md")]
pub struct RelativeBasis;

#[doc = include_str!("../../../book/src/bloch-blocks.md")]
pub struct BlochBlocks;

#[doc = include_str!("../../../book/src/spectra.md")]
pub struct Spectra;

#[doc = include_str!("../../../book/src/dielectric.md")]
pub struct Dielectric;

#[doc = include_str!("../../../book/src/checks.md")]
pub struct Checks;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct Cli;
