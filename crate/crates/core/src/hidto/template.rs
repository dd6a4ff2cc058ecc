use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::hypergraph::BucketScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CenterRole {
    Vertex,
    Hyperedge,
}

/// Shape of the detail tree and overview suffix.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSpec {
    pub center_role: CenterRole,
    /// Children sampled per parent, one entry per alternating layer.
    pub layer_budgets: Vec<usize>,
    pub overview_hops: usize,
    /// Detail-only sequences drop the overview suffix entirely.
    pub include_overview: bool,
    pub buckets: BucketScheme,
    pub max_tokens: usize,
    pub pe_dim: usize,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec {
            center_role: CenterRole::Vertex,
            layer_budgets: vec![8, 8],
            overview_hops: 2,
            include_overview: true,
            buckets: BucketScheme::default(),
            max_tokens: 160,
            pe_dim: 8,
        }
    }
}

impl TemplateSpec {
    /// `1 + Σ_l Π_{j≤l} budget_j`.
    pub fn detail_len(&self) -> usize {
        let mut total = 1usize;
        let mut width = 1usize;
        for &b in &self.layer_budgets {
            width = width.saturating_mul(b);
            total = total.saturating_add(width);
        }
        total
    }

    pub fn overview_len(&self) -> usize {
        if self.include_overview {
            self.overview_hops * self.buckets.order.len()
        } else {
            0
        }
    }

    pub fn total_len(&self) -> usize {
        self.detail_len() + self.overview_len()
    }

    /// Number of detail layers below the root.
    pub fn depth(&self) -> usize {
        self.layer_budgets.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_budgets.is_empty() || self.layer_budgets.contains(&0) {
            return Err(Error::InvalidTemplate(format!(
                "layer budgets must be positive: {:?}",
                self.layer_budgets
            )));
        }
        if self.overview_hops == 0 {
            return Err(Error::InvalidTemplate("overview hops must be ≥ 1".into()));
        }
        if self.pe_dim == 0 {
            return Err(Error::InvalidTemplate("pe_dim must be ≥ 1".into()));
        }
        let needed = self.total_len();
        if needed > self.max_tokens {
            return Err(Error::TemplateTooLarge { needed, budget: self.max_tokens });
        }
        Ok(())
    }

    /// Whether detail layer `l` holds vertices.
    pub fn layer_is_vertex(&self, l: usize) -> bool {
        match self.center_role {
            CenterRole::Vertex => l % 2 == 0,
            CenterRole::Hyperedge => l % 2 == 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Vertex,
    Hyperedge,
    Overview { hop: usize, bucket: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSlot {
    pub kind: TemplateKind,
    pub layer: usize,
    pub parent: Option<usize>,
}

/// Fixed slot topology shared by every sample built from one spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub spec: TemplateSpec,
    pub slots: Vec<TemplateSlot>,
    children: Vec<Range<usize>>,
    layer_ranges: Vec<Range<usize>>,
    /// Positional encoding rows, `total_len × pe_dim`.
    pub pe: Vec<Vec<f64>>,
}

impl Template {
    pub fn detail_len(&self) -> usize {
        self.spec.detail_len()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn children(&self, slot: usize) -> Range<usize> {
        self.children[slot].clone()
    }

    pub fn layer_range(&self, layer: usize) -> Range<usize> {
        self.layer_ranges[layer].clone()
    }
}

/// Builds the slot topology and template-level Laplacian positional
/// encodings.
///
/// Detail slots are laid out in level order with each parent's children
/// contiguous. The encodings are the `pe_dim` eigenvectors of the normalized
/// Laplacian `I − D^{-1/2} A D^{-1/2}` of the detail tree with the smallest
/// nonzero eigenvalues, sign-fixed so the first nonzero entry is positive.
/// Missing eigenvectors (tiny trees) are zero columns. Overview slots of hop
/// `h` reuse the mean encoding of the detail layer holding hop-`h`
/// hyperedges, or zeros when the tree is shallower.
pub fn build_template(spec: &TemplateSpec) -> Result<Template> {
    spec.validate()?;
    let mut slots = vec![TemplateSlot {
        kind: if spec.layer_is_vertex(0) { TemplateKind::Vertex } else { TemplateKind::Hyperedge },
        layer: 0,
        parent: None,
    }];
    let mut layer_ranges = vec![0..1];
    for (l, &budget) in spec.layer_budgets.iter().enumerate() {
        let layer = l + 1;
        let kind =
            if spec.layer_is_vertex(layer) { TemplateKind::Vertex } else { TemplateKind::Hyperedge };
        let start = slots.len();
        for parent in layer_ranges[l].clone() {
            for _ in 0..budget {
                slots.push(TemplateSlot { kind, layer, parent: Some(parent) });
            }
        }
        layer_ranges.push(start..slots.len());
    }
    let detail = slots.len();
    let mut children = vec![0..0; detail];
    for l in 0..spec.layer_budgets.len() {
        let budget = spec.layer_budgets[l];
        let child_start = layer_ranges[l + 1].start;
        for (q, parent) in layer_ranges[l].clone().enumerate() {
            let s = child_start + q * budget;
            children[parent] = s..s + budget;
        }
    }
    if spec.include_overview {
        for hop in 1..=spec.overview_hops {
            for bucket in 0..spec.buckets.order.len() {
                slots.push(TemplateSlot {
                    kind: TemplateKind::Overview { hop, bucket },
                    layer: hop,
                    parent: None,
                });
                children.push(0..0);
            }
        }
    }

    let k = spec.pe_dim;
    let mut pe = vec![vec![0.0; k]; slots.len()];
    if detail > 1 {
        let mut lap = vec![0.0; detail * detail];
        let mut deg = vec![0.0f64; detail];
        for (i, s) in slots[..detail].iter().enumerate() {
            if let Some(p) = s.parent {
                deg[i] += 1.0;
                deg[p] += 1.0;
            }
        }
        for i in 0..detail {
            lap[i * detail + i] = 1.0;
        }
        for (i, s) in slots[..detail].iter().enumerate() {
            if let Some(p) = s.parent {
                let w = -1.0 / libm::sqrt(deg[i] * deg[p]);
                lap[i * detail + p] = w;
                lap[p * detail + i] = w;
            }
        }
        let (values, vectors) = symmetric_eigen(&lap, detail);
        let picked = values
            .iter()
            .zip(vectors.iter())
            .filter(|(&lambda, _)| lambda > 1e-9)
            .take(k);
        for (col, (_, vec)) in picked.enumerate() {
            let sign = vec.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
            for (row, &x) in vec.iter().enumerate() {
                pe[row][col] = sign * x;
            }
        }
    }
    if spec.include_overview {
        for i in detail..slots.len() {
            let TemplateKind::Overview { hop, .. } = slots[i].kind else { unreachable!() };
            let layer = match spec.center_role {
                CenterRole::Vertex => 2 * hop - 1,
                CenterRole::Hyperedge => 2 * hop,
            };
            if let Some(range) = layer_ranges.get(layer) {
                let n = range.len() as f64;
                let mut mean = vec![0.0; k];
                for r in range.clone() {
                    for (m, x) in mean.iter_mut().zip(&pe[r]) {
                        *m += x / n;
                    }
                }
                pe[i] = mean;
            }
        }
    }

    Ok(Template { spec: spec.clone(), slots, children, layer_ranges, pe })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(budgets: &[usize]) -> TemplateSpec {
        TemplateSpec { layer_budgets: budgets.to_vec(), ..TemplateSpec::default() }
    }

    #[test]
    fn slot_counts_follow_closed_form() {
        let t = build_template(&spec(&[3, 2])).unwrap();
        assert_eq!(t.detail_len(), 10);
        assert_eq!(t.len(), 18);
        let t = build_template(&spec(&[8, 8])).unwrap();
        assert_eq!(t.detail_len(), 73);
        assert_eq!(t.len(), 81);
    }

    #[test]
    fn oversized_template_is_rejected() {
        let s = TemplateSpec { max_tokens: 80, ..spec(&[8, 8]) };
        assert_eq!(build_template(&s), Err(Error::TemplateTooLarge { needed: 81, budget: 80 }));
        assert!(build_template(&spec(&[0, 2])).is_err());
        let s = TemplateSpec { overview_hops: 0, ..spec(&[2]) };
        assert!(build_template(&s).is_err());
    }

    #[test]
    fn parents_and_roles_alternate() {
        let t = build_template(&spec(&[3, 2])).unwrap();
        assert_eq!(t.slots[0].kind, TemplateKind::Vertex);
        assert!(t.slots[1..4].iter().all(|s| s.kind == TemplateKind::Hyperedge && s.parent == Some(0)));
        assert_eq!(t.slots[4].parent, Some(1));
        assert_eq!(t.slots[9].parent, Some(3));
        assert_eq!(t.children(2), 6..8);
        let hs = TemplateSpec { center_role: CenterRole::Hyperedge, ..spec(&[3, 2]) };
        let t = build_template(&hs).unwrap();
        assert_eq!(t.slots[0].kind, TemplateKind::Hyperedge);
        assert_eq!(t.slots[1].kind, TemplateKind::Vertex);
    }

    #[test]
    fn positional_encodings_are_orthonormal_eigenvectors() {
        let t = build_template(&spec(&[8, 8])).unwrap();
        let n = t.detail_len();
        for a in 0..8 {
            for b in 0..8 {
                let d: f64 = (0..n).map(|r| t.pe[r][a] * t.pe[r][b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-9, "columns {a},{b}: {d}");
            }
            let first = (0..n).map(|r| t.pe[r][a]).find(|x| x.abs() > 1e-12).unwrap();
            assert!(first > 0.0);
        }
    }
}
