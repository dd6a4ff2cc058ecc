//! Order-aware overview suffix: hop shells partitioned by order bucket and
//! the parameter-free alternating aggregation that fills each cell.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::encapsulate::SemanticProvider;
use crate::error::Result;
use crate::hypergraph::{BucketScheme, Hypergraph, Object};
use crate::rng::{self, tag};

/// `S_{h,b}` as hyperedge positions, indexed `[hop - 1][bucket]`.
pub type Shells = Vec<Vec<Vec<usize>>>;

/// Alternating BFS over the incidence bipartite graph.
///
/// Every object joins the first layer at which it is reached. For a vertex
/// center, hop 1 holds its incident hyperedges; for a hyperedge center the
/// center itself is the starting layer and hop 1 holds the hyperedges first
/// reached through its members.
pub fn overview_shells(h: &Hypergraph, center: Object, hops: usize, buckets: &BucketScheme) -> Result<Shells> {
    let mut seen_v = vec![false; h.num_vertices()];
    let mut seen_e = vec![false; h.num_hyperedges()];
    let mut frontier: Vec<usize> = match center {
        Object::Vertex(v) => {
            let vi = h.vertex_pos(v)?;
            seen_v[vi] = true;
            vec![vi]
        }
        Object::Hyperedge(e) => {
            let ei = h.hyperedge_pos(e)?;
            seen_e[ei] = true;
            let ms = h.member_pos(ei).to_vec();
            for &vi in &ms {
                seen_v[vi] = true;
            }
            ms
        }
    };
    let nb = buckets.order.len();
    let mut shells = Vec::with_capacity(hops);
    for _ in 0..hops {
        let mut layer = Vec::new();
        for &vi in &frontier {
            for &ei in h.incident_pos(vi) {
                if !seen_e[ei] {
                    seen_e[ei] = true;
                    layer.push(ei);
                }
            }
        }
        layer.sort_unstable();
        let mut next = Vec::new();
        for &ei in &layer {
            for &vi in h.member_pos(ei) {
                if !seen_v[vi] {
                    seen_v[vi] = true;
                    next.push(vi);
                }
            }
        }
        next.sort_unstable();
        frontier = next;
        let mut cells = vec![Vec::new(); nb];
        for ei in layer {
            cells[buckets.bucket_of_order(h.member_pos(ei).len())].push(ei);
        }
        shells.push(cells);
    }
    Ok(shells)
}

/// Fixed unit-norm Gaussian offset vector per order bucket.
pub fn bucket_vectors(num_buckets: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..num_buckets)
        .map(|b| {
            let mut rng = rng::stream(seed, &[tag::BUCKET_VECTORS, b as u64]);
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect()
}

/// Runs `steps` rounds of alternating propagation from initial vertex
/// states and returns the hyperedge states `m_e^(t)` for `t = 1..=steps`,
/// indexed `[t - 1][hyperedge position]`.
///
/// Hyperedge update: mean of member states from the previous step. Vertex
/// update: mean over incident hyperedges of the new hyperedge state plus
/// the offset of its order bucket. A vertex with no incident hyperedge gets
/// the zero vector.
pub fn propagate(
    h: &Hypergraph,
    vertex_init: &[Vec<f64>],
    buckets: &BucketScheme,
    offsets: &[Vec<f64>],
    steps: usize,
) -> Vec<Vec<Vec<f64>>> {
    let dim = vertex_init.first().map_or(0, Vec::len);
    let mut mv: Vec<Vec<f64>> = vertex_init.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let me: Vec<Vec<f64>> = (0..h.num_hyperedges())
            .map(|ei| {
                let ms = h.member_pos(ei);
                let mut acc = vec![0.0; dim];
                for &vi in ms {
                    for (a, x) in acc.iter_mut().zip(&mv[vi]) {
                        *a += x;
                    }
                }
                let n = ms.len() as f64;
                acc.iter_mut().for_each(|a| *a /= n);
                acc
            })
            .collect();
        mv = (0..h.num_vertices())
            .map(|vi| {
                let inc = h.incident_pos(vi);
                let mut acc = vec![0.0; dim];
                if inc.is_empty() {
                    return acc;
                }
                for &ei in inc {
                    let o = &offsets[buckets.bucket_of_order(h.member_pos(ei).len())];
                    for ((a, x), y) in acc.iter_mut().zip(&me[ei]).zip(o) {
                        *a += x + y;
                    }
                }
                let n = inc.len() as f64;
                acc.iter_mut().for_each(|a| *a /= n);
                acc
            })
            .collect();
        out.push(me);
    }
    out
}

/// Filled overview cells in `(hop, bucket)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct OverviewCells {
    pub vectors: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

/// Cell `(h, b)` is the mean of `m_e^(h)` over `S_{h,b}`; empty cells are zero.
pub fn overview_aggregate(
    h: &Hypergraph,
    center: Object,
    hops: usize,
    buckets: &BucketScheme,
    provider: &dyn SemanticProvider,
    offsets: &[Vec<f64>],
) -> Result<OverviewCells> {
    let shells = overview_shells(h, center, hops, buckets)?;
    let init: Vec<Vec<f64>> =
        h.vertices().iter().map(|&v| provider.vertex(h, v)).collect::<Result<_>>()?;
    let states = propagate(h, &init, buckets, offsets, hops);
    let dim = provider.dim();
    let mut vectors = Vec::new();
    let mut counts = Vec::new();
    for (t, cells) in shells.iter().enumerate() {
        for cell in cells {
            let mut acc = vec![0.0; dim];
            for &ei in cell {
                for (a, x) in acc.iter_mut().zip(&states[t][ei]) {
                    *a += x;
                }
            }
            if !cell.is_empty() {
                let n = cell.len() as f64;
                acc.iter_mut().for_each(|a| *a /= n);
            }
            vectors.push(acc);
            counts.push(cell.len());
        }
    }
    Ok(OverviewCells { vectors, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{HyperedgeId, VertexId};

    fn h_a() -> Hypergraph {
        Hypergraph::new(
            1..=6,
            [(1, vec![1, 2, 3]), (2, vec![1, 4, 5]), (3, vec![2, 4, 6]), (4, vec![3, 5, 6])],
        )
        .unwrap()
    }

    fn ids(h: &Hypergraph, shell: &[Vec<usize>]) -> Vec<u32> {
        let mut v: Vec<u32> = shell.iter().flatten().map(|&e| h.hyperedges()[e].id.0).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn shells_of_core_vertex() {
        let h = h_a();
        let s = overview_shells(&h, Object::Vertex(VertexId(1)), 3, &BucketScheme::default()).unwrap();
        assert_eq!(ids(&h, &s[0]), vec![1, 2]);
        assert_eq!(ids(&h, &s[1]), vec![3, 4]);
        assert!(ids(&h, &s[2]).is_empty());
        // All orders are 3, so everything lands in bucket 1.
        assert_eq!(s[0][1].len(), 2);
    }

    #[test]
    fn hyperedge_center_excludes_itself() {
        let h = h_a();
        let s = overview_shells(&h, Object::Hyperedge(HyperedgeId(1)), 2, &BucketScheme::default())
            .unwrap();
        assert_eq!(ids(&h, &s[0]), vec![2, 3, 4]);
        assert!(ids(&h, &s[1]).is_empty());
    }

    #[test]
    fn first_step_is_member_mean() {
        let h = h_a();
        let init: Vec<Vec<f64>> =
            (0..6).map(|i| (0..6).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let zeros = vec![vec![0.0; 6]; 4];
        let st = propagate(&h, &init, &BucketScheme::default(), &zeros, 1);
        let third = 1.0 / 3.0;
        assert_eq!(st[0][0], vec![third, third, third, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn bucket_vectors_are_unit_and_seeded() {
        let a = bucket_vectors(4, 16, 5);
        assert_eq!(a, bucket_vectors(4, 16, 5));
        for v in &a {
            let n: f64 = v.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
