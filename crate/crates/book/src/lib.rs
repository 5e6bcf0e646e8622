//! Compiles every chapter of the guide as rustdoc so that `cargo test --doc`
//! runs its code listings. One module per chapter keeps failures traceable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/channel.md")]
pub mod channel {}
#[doc = include_str!("../../../book/src/aoi.md")]
pub mod aoi {}
#[doc = include_str!("../../../book/src/sac.md")]
pub mod sac {}
#[doc = include_str!("../../../book/src/road_graph.md")]
pub mod road_graph {}
#[doc = include_str!("../../../book/src/federated.md")]
pub mod federated {}
#[doc = include_str!("../../../book/src/running.md")]
pub mod running {}
