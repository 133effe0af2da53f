//! Kalman predictor/corrector on a discrete state-space model.

use nalgebra::{DMatrix, DVector};

use super::dlqr::symmetrize;
use crate::error::{dim, Error, Result};
use crate::lti::StateSpace;
use crate::scalar::Real;

/// Filter state. `qn`, `rn` are the process and measurement noise
/// covariances; `h` is the observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState<T: Real> {
    pub estimate: DVector<T>,
    pub covariance: DMatrix<T>,
    pub qn: DMatrix<T>,
    pub rn: DMatrix<T>,
    pub h: DMatrix<T>,
}

impl<T: Real> KalmanState<T> {
    pub fn new(
        estimate: DVector<T>,
        covariance: DMatrix<T>,
        qn: DMatrix<T>,
        rn: DMatrix<T>,
        h: DMatrix<T>,
    ) -> Result<Self> {
        let n = estimate.len();
        if covariance.shape() != (n, n) || qn.shape() != (n, n) {
            return Err(dim(format!("covariances must be {n}x{n}")));
        }
        if h.ncols() != n || rn.shape() != (h.nrows(), h.nrows()) {
            return Err(dim(
                "observation matrix and measurement covariance disagree",
            ));
        }
        Ok(Self {
            estimate,
            covariance,
            qn,
            rn,
            h,
        })
    }

    pub fn states(&self) -> usize {
        self.estimate.len()
    }
}

/// `x <- A x + B u`, `L <- A L A' + Qn`.
pub fn kalman_predict<T: Real>(
    state: &KalmanState<T>,
    model: &StateSpace<T>,
    u: &DVector<T>,
) -> Result<KalmanState<T>> {
    if model.states() != state.states() || u.len() != model.inputs() {
        return Err(dim(format!(
            "model has {} states and {} inputs; filter has {} states, input has {} entries",
            model.states(),
            model.inputs(),
            state.states(),
            u.len()
        )));
    }
    let a = model.a();
    let estimate = a * &state.estimate + model.b() * u;
    let covariance = symmetrize(&(a * &state.covariance * a.transpose() + &state.qn));
    Ok(KalmanState {
        estimate,
        covariance,
        ..state.clone()
    })
}

/// Kalman gain `G = L H' (H L H' + Rn)^-1`.
pub fn kalman_gain<T: Real>(state: &KalmanState<T>) -> Result<DMatrix<T>> {
    let h = &state.h;
    let lht = &state.covariance * h.transpose();
    let s = h * &lht + &state.rn;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("innovation covariance is singular".into()))?;
    Ok(lht * s_inv)
}

/// `x <- x + G (z - H x)`, `L <- (I - G H) L`.
pub fn kalman_correct<T: Real>(state: &KalmanState<T>, z: &DVector<T>) -> Result<KalmanState<T>> {
    if z.len() != state.h.nrows() {
        return Err(dim(format!(
            "measurement has {} entries, expected {}",
            z.len(),
            state.h.nrows()
        )));
    }
    let g = kalman_gain(state)?;
    let innovation = z - &state.h * &state.estimate;
    let estimate = &state.estimate + &g * innovation;
    let n = state.states();
    let covariance =
        symmetrize(&((DMatrix::<T>::identity(n, n) - &g * &state.h) * &state.covariance));
    Ok(KalmanState {
        estimate,
        covariance,
        ..state.clone()
    })
}

/// Prior covariance after `steps` predict/correct cycles from `L = Qn`;
/// used to start a filter at its steady-state gain.
pub fn steady_state_prior<T: Real>(
    model: &StateSpace<T>,
    qn: &DMatrix<T>,
    rn: &DMatrix<T>,
    h: &DMatrix<T>,
    steps: usize,
) -> Result<DMatrix<T>> {
    let n = model.states();
    let mut st = KalmanState::new(
        DVector::zeros(n),
        qn.clone(),
        qn.clone(),
        rn.clone(),
        h.clone(),
    )?;
    let u = DVector::zeros(model.inputs());
    let z = DVector::zeros(h.nrows());
    for _ in 0..steps {
        st = kalman_correct(&st, &z)?;
        st = kalman_predict(&st, model, &u)?;
    }
    Ok(st.covariance)
}
