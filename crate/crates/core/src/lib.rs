//! Reset-free trial-and-error damage recovery for a differential-drive robot.
//!
//! The pipeline has three stages:
//!
//! 1. [`repertoire`] evolves a grid of wheel commands with MAP-Elites on the
//!    intact simulator, each tagged with its simulated outcome.
//! 2. [`gp`] corrects those outcomes online with Gaussian processes whose
//!    prior mean is the simulated outcome.
//! 3. [`planner`] picks the next action with progressive-widening MCTS over
//!    the corrected model; [`agents`] closes the loop on the damaged robot
//!    in [`sim`].
//!
//! [`harness`] runs replicated experiments and computes the statistics.

pub mod agents;
pub mod gp;
pub mod harness;
pub mod planner;
pub mod repertoire;
pub mod sim;
