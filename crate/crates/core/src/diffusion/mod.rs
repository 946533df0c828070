//! The three coupled diffusion processes on `k`, `F′` and `A′`.

pub mod oracle;
pub mod process;
pub mod sampler;
pub mod schedule;
pub mod wrapped;

pub use oracle::OracleDenoiser;
pub use process::{
    loss, loss_and_grad, noisy_sample, project_output, CoordLossForm, DiffusionContext, DiffusionState, Example,
    Layout, LossConfig, LossParts, ModelInput, RawOutput, ScoreModel,
};
pub use sampler::{refine_state, run_chain, sample};
pub use schedule::{NoiseSchedule, ScheduleConfig};
