//! Lower bounds on the classical capacity of lossy bosonic Gaussian channels with
//! correlated (memory) or uncorrelated Gaussian noise, obtained by maximizing the
//! Holevo-chi over Gaussian input ensembles through the KKT conditions.

pub mod asymptotic;
pub mod bessel;
pub mod channel;
pub mod entropy;
pub mod error;
pub mod kkt;
pub mod memoryless;
pub mod oracle;
pub mod quadrature;
pub mod roots;
pub mod verify;

pub use channel::{ChannelParams, EnvModel, EnvironmentSpectrum, Quadrature, QuadratureSpectrum};
pub use entropy::{ApproxOrder, SymplecticEigenvalue};
pub use error::{Error, Result};
pub use kkt::{Algorithm, KktSolution, ModeState, Stage, StageAssignment};
