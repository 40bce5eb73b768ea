//! Restricted Assignment makespan scheduling by layered blocker-tree local
//! search, with exact dual certificates for guesses that are too small.
//!
//! Every module is generic over [`scalar::Scalar`]; the aliases below fix
//! the scalar to `BigRational`.

pub mod certificate;
pub mod driver;
pub mod engine;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod seed;

pub use num_rational::BigRational as Rational;

pub type Instance = model::Instance<Rational>;
pub type ScaledInstance = model::ScaledInstance<Rational>;
pub type Schedule = model::Schedule<Rational>;
pub type DualCertificate = certificate::DualCertificate<Rational>;
pub type SolveOptions = driver::SolveOptions<Rational>;
pub type SolveReport = driver::SolveReport<Rational>;
pub type StuckState = engine::StuckState<Rational>;
