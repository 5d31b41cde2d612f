//! One module per subcommand; each exposes its clap `Args` struct and a
//! `run` function.

pub mod agreement;
pub mod bench;
pub mod ef;
pub mod evaluate;
pub mod extract;
pub mod gradcheck;
pub mod infer;
pub mod rasterize;
pub mod synth;
pub mod train;
