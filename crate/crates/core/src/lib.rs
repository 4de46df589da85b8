//! Simulator for wave-variable bilateral teleoperation over a channel that
//! periodically drops transmissions.
//!
//! - [`loss`]: the pulse-train loss mask and its Fourier series.
//! - [`dynamics`]: manipulator models and the passivating feedback.
//! - [`channel`]: scattering transformation and coordination references.
//! - [`energy`]: tracking errors, the Lyapunov candidate and energy ledger.
//! - [`sim`]: fixed-step closed-loop integration, scenarios and traces.
//! - [`cli`]: configuration files and the `telesim` commands.

pub mod channel;
pub mod dynamics;
pub mod energy;
pub mod loss;
pub mod sim;
pub mod cli;
