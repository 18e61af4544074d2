//! Stationary-phase expansions of finite-dimensional field-theory models,
//! with Feynman graph state sums, Faddeev–Popov gauge fixing, gluing along
//! boundaries, a brute-force quadrature oracle, and discrete Hodge theory on
//! cochain complexes.

pub mod critical;
pub mod dtqm;
pub mod error;
pub mod gluing;
pub mod hodge;
pub mod graphs;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod par;
pub mod poly;
pub mod semiclassical;

pub use error::{Error, Result};
