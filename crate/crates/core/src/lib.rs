//! Maps climate-relevant STI output: harvests records from open sources,
//! tags them with a controlled vocabulary, classifies them into ERC panels,
//! and lays out their topics in two dimensions.

pub mod classifier;
pub mod cli;
mod decimal;
pub mod embed;
pub mod ingest;
pub mod model;
pub mod report;
pub mod rng;
pub mod topics;
pub mod vocab;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/harvesting.md")]
    mod harvesting {}
    #[doc = include_str!("../../../book/src/tagging.md")]
    mod tagging {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/topics.md")]
    mod topics {}
    #[doc = include_str!("../../../book/src/outputs.md")]
    mod outputs {}
}
