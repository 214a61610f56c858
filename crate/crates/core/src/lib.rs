//! Community detection and physical graph layout for large undirected
//! networks.
//!
//! * [`graph`]: edge-list ingestion, normalization, connected components
//! * [`community`]: modularity, greedy agglomeration, recursive refinement
//! * [`bhtree`]: Barnes-Hut tree for the all-pairs repulsion
//! * [`layout`]: damped N-body dynamics with springs and friction
//! * [`mds`]: landmark MDS initial configurations
//! * [`generate`], [`io`], [`render`]: fixtures, file formats, SVG output

pub mod bhtree;
pub mod community;
pub mod generate;
pub mod graph;
pub mod io;
pub mod layout;
pub mod mds;
pub mod render;

pub use community::{greedy_modularity, modularity, refine_recursive, Dendrogram, Partition};
pub use graph::{parse_edge_list, Graph};
pub use layout::{relax, BodyState, SimParams};
