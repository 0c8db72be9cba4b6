//! Exact bookkeeping for the surgery calculus on small 4-manifolds.

pub mod blowdown;
pub mod certify;
pub mod hirzebruch;
pub mod lattice;
pub mod linalg;
pub mod mcg;
pub mod pencilscript;
pub mod plan;
pub mod presets;
pub mod report;
pub mod run;
