//! Wide-area damping controller: DLQR state feedback on the identified
//! loop realization, with a Kalman filter supplying the state estimate.

mod closed_loop;
mod dlqr;
mod kalman;

pub use closed_loop::{
    closed_loop_sim, design_wadc, SimOptions, WadcDesign, WadcDesignRecord, WadcOptions,
    CONTROL_CHANNEL,
};
pub use dlqr::{
    dlqr, dlqr_for_loop, dlqr_for_loop_with, lqr_gain, riccati_step, spectral_radius, DlqrDesign,
    DlqrOptions,
};
pub use kalman::{kalman_correct, kalman_gain, kalman_predict, steady_state_prior, KalmanState};
