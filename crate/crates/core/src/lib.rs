//! Hardware-aware architecture search for session-level traffic classification.
//!
//! The pipeline turns raw packet captures into fixed-length session samples,
//! searches a space of tiny 1D convolutional networks under hardware
//! constraints (parameter count, peak tensor size, FLOPs), trains candidates
//! with a multi-start protocol, and reports classification metrics alongside
//! hardware-efficiency comparisons.
//!
//! Modules follow the pipeline order:
//!
//! - [`pcap`]: classic pcap decoding down to transport payload boundaries
//! - [`session`]: filtering, sanitizing, and packing sessions into a dataset
//! - [`space`]: block-genome representation of candidate architectures
//! - [`cost`]: parameter / tensor / FLOP counting and threshold checks
//! - [`nn`]: the from-scratch training engine (conv, batchnorm, Adam, ...)
//! - [`search`]: the constrained evolutionary loop
//! - [`report`]: confusion-matrix metrics and comparison tables
//! - [`synth`]: synthetic captures and datasets for desk-scale experiments

pub mod cost;
pub mod nn;
pub mod pcap;
pub mod report;
pub mod search;
pub mod session;
pub mod space;
pub mod synth;

/// Fixed session sample length in bytes.
pub const SAMPLE_LEN: usize = 784;
