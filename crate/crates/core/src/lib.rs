pub mod analysis;
pub mod assignment;
pub mod model;
pub mod propagation;
pub mod search;
pub mod io;
pub mod batch;
pub mod random;
