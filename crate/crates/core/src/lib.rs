//! Exoskeleton control-parameter discovery on a synthetic gait model.
//!
//! A parametric gait generator with a delayed-feedback hip assistance
//! controller produces noisy cost-of-transport samples; a smoothness
//! regularized MLP surrogate is fit to them and searched with a projected
//! quasi-Newton method for per-speed optimal gain and delay.

pub mod cli;
pub mod config;
pub mod controller;
pub mod coordination;
pub mod domain;
pub mod generator;
pub mod io;
pub mod metabolics;
pub mod metrics;
pub mod optimizer;
pub mod rewards;
pub mod rng;
pub mod surrogate;
