use alloc::vec::Vec;

use super::forward::HipCache;
use super::params::HipParams;
use crate::error::{Error, Result};
use crate::hidto::{Binding, HidtoSequence};
use crate::hypergraph::{BucketScheme, Hypergraph};
use crate::real::{linear, Mat, Real};

/// Order-bucket supervision: `(slot, bucket)` for every real hyperedge
/// detail slot and every nonempty overview cell.
pub fn ord_targets(seq: &HidtoSequence, h: &Hypergraph, scheme: &BucketScheme) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for slot in &seq.slots {
        match slot.binding {
            Binding::Hyperedge(e) => out.push((slot.index, scheme.bucket_of_order(h.members(e)?.len()))),
            Binding::Overview { bucket, count, .. } if count > 0 => out.push((slot.index, bucket)),
            _ => {}
        }
    }
    Ok(out)
}

/// `g_ord(h_i^(1))` for the given slots.
pub fn aux_ord_logits<T: Real>(p: &HipParams<T>, cache: &HipCache<T>, slots: &[usize]) -> Mat<T> {
    linear(&cache.h1.select_rows(slots), &p.ord_w, Some(&p.ord_b.data))
}

/// `g_rel([h_i^(1) ‖ h_j^(1)])` for pairs inside the detail segment.
pub fn aux_rel_logits<T: Real>(
    p: &HipParams<T>,
    cache: &HipCache<T>,
    pairs: &[(usize, usize)],
    detail_len: usize,
) -> Result<Mat<T>> {
    if let Some(&bad) = pairs.iter().flat_map(|(i, j)| [i, j]).find(|&&x| x >= detail_len) {
        return Err(Error::OutOfSegment(bad));
    }
    let (is, js): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    let x = Mat::hcat(&cache.h1.select_rows(&is), &cache.h1.select_rows(&js));
    Ok(linear(&x, &p.rel_w, Some(&p.rel_b.data)))
}
