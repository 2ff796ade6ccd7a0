//! Image-moment shape descriptors and content-based retrieval.
//!
//! Three feature families are provided: exact Legendre moments
//! ([`legendre`]), Zernike moment magnitudes ([`zernike`]) and Hu's
//! invariants ([`hu`]). Features are compared with the Canberra distance
//! ([`retrieval`]) or classified with a one-vs-one kernel SVM ([`svm`]);
//! [`eval`] runs the COIL-20 retrieval, classification and timing
//! benchmarks.

pub mod error;
pub mod eval;
pub mod extract;
pub mod feature;
pub mod hu;
pub mod image_io;
pub mod legendre;
pub mod retrieval;
pub mod svm;
pub mod synth;
pub mod zernike;

pub use error::{Error, Result};
pub use extract::Extractor;
pub use feature::{FeatureVector, Method};
pub use image_io::{load_image, scan_coil20, DatasetManifest, GrayImage, ScanOptions};
pub use retrieval::{canberra, query, retrieval_efficiency, FeatureDatabase, RankedResult};
