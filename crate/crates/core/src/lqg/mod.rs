//! Riccati solvers and LQG synthesis under measurement delay.

pub mod delayed;
pub mod riccati;

pub use delayed::{
    closed_loop, d_inf, lqg_design, stabilizing_controller, weighted_lqg_variances, DelayedPlant, LqgDesign,
    ObserverController, PerformanceFloor,
};
pub use riccati::{solve_dare, solve_dare_cross, RiccatiSolution};
