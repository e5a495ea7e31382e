pub mod fiber;
pub mod lattice;
pub mod pipeline;
pub mod poly;
pub mod projective;
pub mod report;
pub mod torus;
