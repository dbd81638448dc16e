//! Configuration-driven experiments on top of `nlsobolev`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod recipes;

pub use config::{ConfigError, ExperimentConfig};
pub use output::write_outputs;
pub use recipes::{list_recipes, run, ExperimentResult, Recipe, RecipeInfo, RunError, Summary};
