//! Learning contact-rich insertion skills from demonstrations.
//!
//! A demonstration is recorded as time-aligned streams ([`recording`]), the
//! motion is encoded as a dynamic movement primitive ([`dmp`]) and the contact
//! wrench as a phase-conditioned Gaussian mixture ([`wrench_gmm`]). The
//! [`executor`] replays both through an admittance law on the planar
//! [`insertion_sim`].
//!
//! The numeric core is generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod dmp;
pub mod executor;
pub mod insertion_sim;
pub mod linalg;
pub mod quaternion;
pub mod recording;
pub mod scalar;
pub mod wrench_gmm;

pub use scalar::Scalar;

pub type Dmp = dmp::DmpModel<f64>;
pub type DmpConfig = dmp::DmpConfig<f64>;
pub type OrientationDmp = dmp::OrientationDmp<f64>;
pub type Gmm = wrench_gmm::GmmModel<f64>;
pub type GmmConfig = wrench_gmm::GmmConfig<f64>;
pub type WrenchReference = wrench_gmm::WrenchReference<f64>;
pub type AdmittanceConfig = executor::AdmittanceConfig<f64>;
pub type Quaternion = quaternion::Quaternion<f64>;
pub type Matrix = linalg::SquareMatrix<f64>;
