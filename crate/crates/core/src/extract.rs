//! Method dispatch and bulk feature extraction.

use rayon::prelude::*;

use crate::error::Result;
use crate::feature::{FeatureVector, Method};
use crate::hu::hu_invariants;
use crate::image_io::GrayImage;
use crate::legendre::LegendreKernel;
use crate::retrieval::{FeatureDatabase, Record};
use crate::zernike::ZernikeBasis;

/// A feature extractor with its per-(order, side) tables precomputed.
#[derive(Debug, Clone)]
pub enum Extractor {
    Elm { kernel: LegendreKernel, order: usize },
    Zm(ZernikeBasis),
    Mi,
}

impl Extractor {
    pub fn new(method: Method, order: usize, side: usize) -> Self {
        match method {
            Method::Elm => Extractor::Elm {
                kernel: LegendreKernel::build(order, side),
                order,
            },
            Method::Zm => Extractor::Zm(ZernikeBasis::build(order, side)),
            Method::Mi => Extractor::Mi,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Extractor::Elm { .. } => Method::Elm,
            Extractor::Zm(_) => Method::Zm,
            Extractor::Mi => Method::Mi,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Extractor::Elm { order, .. } => *order,
            Extractor::Zm(b) => b.order(),
            Extractor::Mi => 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.method().dim(self.order())
    }

    pub fn extract(&self, image: &GrayImage) -> Result<FeatureVector> {
        match self {
            Extractor::Elm { kernel, order } => kernel.moments(image, *order),
            Extractor::Zm(basis) => basis.moments(image),
            Extractor::Mi => hu_invariants(image),
        }
    }

    /// Extracts every image in parallel, preserving input order.
    pub fn build_database(&self, images: &[GrayImage]) -> Result<FeatureDatabase> {
        let records = images
            .par_iter()
            .map(|img| {
                Ok(Record {
                    id: img.id.clone(),
                    class_label: img.class_label,
                    values: self.extract(img)?.values,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureDatabase::from_records(self.method(), self.order(), self.dim(), records)
    }
}
