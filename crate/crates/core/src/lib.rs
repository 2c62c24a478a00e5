pub mod error;
pub mod evaluation;
pub mod game_model;
pub mod harness;
pub mod instances;
pub mod matrix_equilibrium;
pub mod model;
pub mod multi_nash_vi;
pub mod nash_vi;
pub mod rng;
pub mod run_log;
pub mod vi_zero;
