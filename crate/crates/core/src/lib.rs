pub mod backend;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod frontend;
pub mod io;
pub mod motion;
pub mod registration;
pub mod spatial;
pub mod types;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use types::{Point, PointCloud, Pose, TangentVector};
