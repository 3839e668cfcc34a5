pub mod block;
pub mod config;
pub mod diagnostics;
pub mod distributed;
pub mod error;
pub mod examples;
pub mod flow;
pub mod linops;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod scalar;

pub use block::{BlockLayout, BlockVector, Shape};
pub use error::{Error, Result};
pub use linops::{BlockOperator, LinearOperator};
pub use problem::{GesCertificate, NonsmoothBlock, PrimalDualState, SaddleProblem, SmoothBlock, SmoothKind};
pub use prox::{GroupPartition, Orthant, ProxKind, ProximableFunction};
pub use scalar::Real;

pub use diagnostics::ReferenceSolution;
pub use flow::{IntegratorConfig, Method, Trajectory};

pub type SaddleProblemF64 = SaddleProblem<f64>;
pub type SaddleProblemF32 = SaddleProblem<f32>;
pub type PrimalDualStateF64 = PrimalDualState<f64>;
pub type PrimalDualStateF32 = PrimalDualState<f32>;
pub type ProximableFunctionF64 = ProximableFunction<f64>;
pub type ProximableFunctionF32 = ProximableFunction<f32>;
pub type LinearOperatorF64 = LinearOperator<f64>;
pub type LinearOperatorF32 = LinearOperator<f32>;
pub type IntegratorConfigF64 = IntegratorConfig<f64>;
pub type IntegratorConfigF32 = IntegratorConfig<f32>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type TrajectoryF32 = Trajectory<f32>;
pub type ReferenceSolutionF64 = ReferenceSolution<f64>;
pub type ReferenceSolutionF32 = ReferenceSolution<f32>;
