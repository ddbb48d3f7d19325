//! POS-targeted adversarial example generation against a CNN sentiment
//! classifier.
//!
//! The pipeline has three phases: a random-deletion study that builds a
//! labeled adversarial dataset ([`attack::phase1`]), a two-branch network
//! trained to predict which deletion sets fool the classifier
//! ([`attack::phase2`]), and candidate generation plus ranking that selects
//! the strongest adversarial examples ([`attack::phase3`]). The victim model
//! lives in [`model`], the tensor kernels in [`nn`], and the text front end
//! (tokenizer, UPOS tagger, vocabulary, embeddings) in [`text`].

pub mod attack;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod seed;
pub mod text;
