//! Sample-complexity lab for learning from positive and unlabeled data.
//!
//! Finite concept classes and discrete distributions are handled exactly;
//! learning curves come from seeded Monte Carlo over those exact objects.

pub mod concept;
pub mod dist;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod instances;
pub mod learners;
pub mod rng;

pub use concept::{Concept, ConceptClass, FiniteDomain};
pub use dist::{LabeledDiscreteDistribution, MarginalDistribution, Sample};
pub use error::{LabError, Result};
pub use instances::PuInstance;
pub use learners::Hypothesis;
