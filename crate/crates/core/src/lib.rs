pub mod centroid;
pub mod cli;
pub mod error;
pub mod lp;
pub mod measure;
pub mod scalar;
pub mod barycenter;
pub mod demo;
pub mod sparsity;
pub mod transport;
pub mod oracle;
pub mod svg;
