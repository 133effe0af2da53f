//! Linear-systems mathematics: polynomials, rational transfer functions,
//! state-space models, bilinear domain maps and partial fractions.

mod pfe;
mod poly;
mod ss;
mod tf;

pub use pfe::{partial_fractions, partial_fractions_with_tol, PoleResidueForm, REPEATED_POLE_TOL};
pub use poly::{conjugate_close, min_root_separation, sort_roots, Polynomial};
pub use ss::{char_poly, simulate_dt, ss_to_tf, tf_to_ss_controllable, StateSpace};
pub use tf::{bilinear_pole_c2d, bilinear_pole_d2c, tustin_c2d, tustin_d2c, Domain, RationalTf};
