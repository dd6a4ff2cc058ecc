//! Query-centered serialization into fixed-shape incidence-tree sequences
//! with an order-aware overview suffix.

mod encapsulate;
mod overview;
mod sequence;
mod template;

pub use encapsulate::{
    encapsulate, hyperedge_semantic, EncapsulatedToken, EncodedSequence, HipRole, SemanticProvider,
    StructLayout, StubEmbedder, TableEmbedder, TokenType, NUM_HIP_ROLES, NUM_TOKEN_TYPES,
};
pub use overview::{bucket_vectors, overview_aggregate, overview_shells, propagate, OverviewCells, Shells};
pub use sequence::{serialize, Binding, HidtoSequence, HidtoSlot, Relation, SlotRole};
pub use template::{build_template, CenterRole, Template, TemplateKind, TemplateSlot, TemplateSpec};
