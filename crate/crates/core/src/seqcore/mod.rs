//! Scale sequences, digit systems and the separation conditions tying them together.

mod digits;
mod document;
mod sequence;
mod spec;

pub use digits::{Certification, DigitRule, DigitSet, DigitSystem, Normalization};
pub use document::{spec_digest, DigitsDoc, GeometricDoc, SequenceDoc, SpecDocument};
pub use sequence::{Geometric, LogExpression, SequenceSpec, Subsequence, Table};
pub use spec::{
    check_separation, SeparationMode, SeparationReport, SumSetSpec, Verdict, DEFAULT_HORIZON,
};
