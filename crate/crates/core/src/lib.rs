//! Simulation laboratory for stochastic geometry on the discrete half-plane.
//!
//! The crate builds weighted lattice graphs with absorbing boundaries and
//! provides exact samplers and solvers for the objects living on them:
//!
//! * [`graph`] — the half-plane lattice, finite truncations and quotient
//!   graphs that identify boundary intervals into single vertices;
//! * [`harmonic`] — Green's functions, boundary hitting kernels and
//!   equivalent conductances of the killed walk, by sparse linear algebra;
//! * [`gff`] — the discrete Gaussian free field, its cable-graph edge marks
//!   and sign clusters, plus the closed-form connection probabilities;
//! * [`loopsoup`] — exact Poisson sampling of the random walk loop soup at
//!   any intensity, with min-jump cutoffs and superposition;
//! * [`excursion`] — Poisson processes of boundary-to-boundary excursions;
//! * [`cluster`] — union-find cluster construction over loops and
//!   excursions and the Monte Carlo connection-probability estimator;
//! * [`contour`] — outer-contour extraction on the half-step dual grid and
//!   the bottleneck-matching distance between contour collections;
//! * [`sle`] — the kappa/intensity closed forms, the chordal Loewner flow
//!   with derivative tracking and the restriction-martingale check;
//! * [`acceptance`] — the statistical verification battery run both by the
//!   CLI and by the integration test suite.

pub mod acceptance;
pub mod cluster;
pub mod contour;
pub mod error;
pub mod excursion;
pub mod gff;
pub mod graph;
pub mod harmonic;
pub mod loopsoup;
pub mod sle;
pub mod solve;
pub mod stats;
mod unionfind;

pub use error::{Error, Result};
pub use unionfind::UnionFind;
