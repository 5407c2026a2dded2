#![allow(clippy::needless_range_loop)]

pub mod belief_kernel;
pub mod cli;
pub mod coupling_sim;
pub mod error;
pub mod exact_oracle;
pub mod game_model;
pub mod lp;
pub mod strategy_transforms;
pub mod triangulation;
pub mod value_engine;
