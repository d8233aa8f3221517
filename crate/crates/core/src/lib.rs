//! Exact tiling of one-dimensional point sets by two incommensurable tile
//! lengths, with verified constructions for flow-equivalence experiments.

pub mod exactnum;
pub mod loe;
pub mod tileable;
pub mod admissible;
pub mod sections;
pub mod simflow;
pub mod tiler;
