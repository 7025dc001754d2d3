//! Cohort-based estimation of latent publication creativity and Monte Carlo
//! forecasting of researchers' cumulative publication counts.
//!
//! Pipeline: [`corpus`] → [`cohort`] → [`creativity`] (via [`regression`]) →
//! [`predictor`] → [`evaluation`]. [`oracle`] synthesizes corpora from known
//! creativity surfaces for end-to-end verification.

pub mod cohort;
pub mod corpus;
pub mod creativity;
pub mod evaluation;
pub mod matrix;
pub mod oracle;
mod parallel;
pub mod predictor;
pub mod regression;
pub mod rng;
