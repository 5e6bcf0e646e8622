//! Small dense-network engine: batched forward and analytic backward passes,
//! Adam, soft target updates and the squashed-Gaussian policy head.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod params;
pub mod policy;

pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use mlp::{Activation, Mlp, MlpCache};
pub use params::{Layer, ParamVector};
pub use policy::{PolicyHead, PolicySample};
