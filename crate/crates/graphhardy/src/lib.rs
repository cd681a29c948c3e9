//! Hardy-space machinery for discrete Laplacians on weighted graphs.
//!
//! The crate works on finite truncations of infinite weighted graphs
//! `(Γ, μ, d)`: a vertex set with symmetric conductances ν, the vertex
//! measure `μ(x) = Σ_{y~x} ν(x,y)`, and the shortest-path metric. On top of
//! the graph it builds
//!
//! * the Markov operator `P`, its powers, the Laplacian `L = I − P`, and
//!   empirical Gaussian upper bounds for the iterated kernels,
//! * variable-exponent Lebesgue norms (modular + Luxemburg quasinorm), the
//!   Hardy-Littlewood maximal operator, and Muckenhoupt weight tests,
//! * cones, tents, the area functional, the conical square function `S_L`,
//!   the vertical square function `G_{L,N}`, and the radial maximal `M_+`,
//! * constructive tent-space atomic decomposition, the reconstruction
//!   operator `Π_M`, Hardy-space atoms and molecules with certificates,
//! * the Riesz transform `∇ L^{−1/2}` (series and spectral routes) and
//!   spectral multipliers `F(L)` with a dyadic smoothness check,
//! * a harness that fits the constants of every boundedness theorem over
//!   randomized inputs and writes machine-readable reports.
//!
//! Everything runs on finite graphs; torus truncations carry a max-radius
//! guard of `side/4` so that doubling-type estimates stay local. Radii are
//! ceiled to integers, series indices `[k/2]` are floored.

pub mod atomic;
pub mod error;
pub mod graph;
pub mod hardy;
pub mod harness;
pub mod markov;
pub mod rng;
pub mod spectral;
pub mod tent;
pub mod varexp;

pub use error::{Error, Result};
pub use graph::{Ball, BoundaryMode, DoublingReport, WeightedGraph};
pub use markov::MarkovOperator;
// placeholder re-exports restored as modules land


/// Finitely supported real function on the vertex set, stored densely.
pub type VertexFunction = Vec<f64>;
