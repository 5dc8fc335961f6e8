//! Likelihood-ratio out-of-distribution detection for discrete sequences.
//!
//! The crate trains autoregressive density models on in-distribution
//! sequences, pairs them with a background model fitted to randomly
//! mutated copies of the same data, and scores inputs by the log ratio of
//! the two likelihoods. Classifier-based baselines and the detector metrics
//! (AUROC, AUPRC, FPR at a fixed TPR) live alongside so the method can be
//! benchmarked end to end.

pub mod baselines;
pub mod genmodel;
pub mod llr;
pub mod metrics;
pub mod numcore;
pub mod rng;
pub mod seqdata;
