//! Hypergraph incidence projector: role-conditioned stems, bidirectional
//! vertex↔hyperedge set attention, output mapping and auxiliary heads.

mod aux;
mod forward;
mod params;

pub use aux::{aux_ord_logits, aux_rel_logits, ord_targets};
pub use forward::{
    backward, forward, hyper_incidence_block, project, stems, BlockCache, HipCache, HipInput,
    HypergraphTokens, StemCache, Upstream,
};
pub use params::{BlockParams, HipConfig, HipParams, NUM_RELATIONS};
