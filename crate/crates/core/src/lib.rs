//! Random walks confined to convex cones: exact survival and excursion
//! sequences, the Laplace-transform decay rate, escape bounds, and
//! rationality tests for the resulting generating functions.

pub mod cli;
pub mod dp;
pub mod error;
pub mod geometry;
pub mod laplace;
pub mod mc;
pub mod model;
pub mod oned;
pub mod rational;
pub mod report;
pub mod seqlab;
pub mod sum;
