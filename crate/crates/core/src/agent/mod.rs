//! Tool-calling agent over the per-task retrievers.

mod client;
mod react;
mod repl;
mod tools;

pub use client::*;
pub use react::*;
pub use repl::*;
pub use tools::*;
