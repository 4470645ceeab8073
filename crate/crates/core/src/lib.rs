//! Magnus and Floquet–Magnus expansions for linear and nonlinear ODEs,
//! built on a pre-Lie product of time-dependent vector fields.

pub mod error;
pub mod fields;
pub mod floquet_avg;
pub mod jet;
pub mod linalg;
pub mod magnus_linear;
pub mod magnus_nonlinear;
pub mod odeint;
pub mod quadrature;
pub mod systems;

pub use error::{Error, Result};
pub use fields::{
    antiderivative, eval_field, lie_bracket, prelie, prelie_identity_residual, time_average,
    transport_rhs, AntiderivativeMode, FieldFn, FieldHandle, SeriesTerms, TermRole,
};
pub use floquet_avg::{
    averaged_terms, averaged_terms_explicit, change_of_variables, floquet_linear,
    stroboscopic_solve, AveragedSystem, FloquetLinearResult,
};
pub use magnus_nonlinear::{generator_terms, reconstruct_state, FlowResult, GeneratorSeries};
pub use systems::{RotatingFrameSystem, SpectralNlsConfig};
pub use jet::{Jet, JetValue, Scalar};
pub use linalg::{expm, MatScalar};
pub use magnus_linear::{MagnusTerms, MatrixFunction};
pub use odeint::{integrate, IntegratorConfig, Trajectory};
pub use quadrature::QuadratureRule;
