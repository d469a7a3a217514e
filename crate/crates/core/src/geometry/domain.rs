use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::MetricField;
use crate::{Error, Result};

/// Classification of a lattice node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// Shape of the voxel domain inside the bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskSpec {
    /// The whole box.
    Box,
    /// The box with a closed inner box removed (a cavity, two boundary components).
    BoxMinusBox { lo: [f64; 3], hi: [f64; 3] },
    /// The box with a closed column `[lo, hi]` in the `(x¹, x²)` plane removed along
    /// the full `x³` extent (a thick torus).
    BoxMinusColumn { lo: [f64; 2], hi: [f64; 2] },
}

/// One face contribution of a boundary node to the surface quadrature.
///
/// `area` is the coordinate area (trapezoid weights times `h_b h_c`); the metric
/// factor is applied by [`GridDomain::surface_weights`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub node: usize,
    pub axis: usize,
    /// Sign of the outward normal along `axis`.
    pub sign: f64,
    pub area: f64,
}

const NONE: usize = usize::MAX;
const EPS: f64 = 1e-12;

/// Voxel discretization of a coordinate box.
///
/// Nodes are numbered x-fastest: `idx = i + nx * (j + ny * k)`.
#[derive(Debug, Clone)]
pub struct GridDomain {
    lo: [f64; 3],
    hi: [f64; 3],
    dims: [usize; 3],
    spacing: [f64; 3],
    mask: MaskSpec,
    kinds: Vec<NodeKind>,
    depth: Vec<u32>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    boundary_index: Vec<usize>,
    facets: Vec<Facet>,
    components: Vec<usize>,
    n_components: usize,
}

impl GridDomain {
    /// The plain box `[lo, hi]` with `dims` nodes per axis.
    pub fn unit_box(n: usize) -> Result<Self> {
        Self::build([0.0; 3], [1.0; 3], [n; 3], MaskSpec::Box)
    }

    pub fn build(lo: [f64; 3], hi: [f64; 3], dims: [usize; 3], mask: MaskSpec) -> Result<Self> {
        for a in 0..3 {
            if !(hi[a] - lo[a] > 0.0) || !lo[a].is_finite() || !hi[a].is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "degenerate extent on axis {a}: [{}, {}]",
                    lo[a], hi[a]
                )));
            }
            if dims[a] < 5 {
                return Err(Error::InvalidDomain(format!(
                    "resolution {} on axis {a} is below 5",
                    dims[a]
                )));
            }
        }
        let spacing = [
            (hi[0] - lo[0]) / (dims[0] - 1) as f64,
            (hi[1] - lo[1]) / (dims[1] - 1) as f64,
            (hi[2] - lo[2]) / (dims[2] - 1) as f64,
        ];
        let n = dims[0] * dims[1] * dims[2];

        // Index ranges of the removed region (closed), per axis.
        let solid_range = |a: usize, clo: f64, chi: f64| -> Result<(usize, usize)> {
            if !(chi > clo) {
                return Err(Error::InvalidDomain(format!("degenerate inner extent on axis {a}")));
            }
            let i0 = ((clo - lo[a]) / spacing[a] - EPS).ceil().max(0.0) as usize;
            let i1 = ((chi - lo[a]) / spacing[a] + EPS).floor() as usize;
            Ok((i0, i1.min(dims[a] - 1)))
        };
        let (solid, hole): (Vec<(usize, usize)>, bool) = match &mask {
            MaskSpec::Box => (Vec::new(), false),
            MaskSpec::BoxMinusBox { lo: ilo, hi: ihi } => {
                let mut r = Vec::new();
                for a in 0..3 {
                    if ilo[a] <= lo[a] || ihi[a] >= hi[a] {
                        return Err(Error::InvalidDomain(
                            "inner box touches the outer boundary".into(),
                        ));
                    }
                    let (i0, i1) = solid_range(a, ilo[a], ihi[a])?;
                    if i0 > i1 {
                        return Err(Error::InvalidDomain(format!(
                            "inner box contains no node along axis {a}"
                        )));
                    }
                    if i0 < 2 || i1 + 2 >= dims[a] {
                        return Err(Error::InvalidDomain(
                            "inner box touches the outer boundary".into(),
                        ));
                    }
                    r.push((i0, i1));
                }
                (r, false)
            }
            MaskSpec::BoxMinusColumn { lo: ilo, hi: ihi } => {
                let mut r = Vec::new();
                for a in 0..2 {
                    if ilo[a] <= lo[a] || ihi[a] >= hi[a] {
                        return Err(Error::InvalidDomain(
                            "column touches the outer boundary".into(),
                        ));
                    }
                    let (i0, i1) = solid_range(a, ilo[a], ihi[a])?;
                    if i0 > i1 || i0 < 2 || i1 + 2 >= dims[a] {
                        return Err(Error::InvalidDomain(
                            "column must contain nodes and stay two layers inside".into(),
                        ));
                    }
                    r.push((i0, i1));
                }
                r.push((0, dims[2] - 1));
                (r, true)
            }
        };
        let is_solid = |i: usize, j: usize, k: usize| -> bool {
            !solid.is_empty()
                && (solid[0].0..=solid[0].1).contains(&i)
                && (solid[1].0..=solid[1].1).contains(&j)
                && (solid[2].0..=solid[2].1).contains(&k)
        };

        let idx = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
        let mut kinds = vec![NodeKind::Interior; n];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let on_face = i == 0
                        || j == 0
                        || k == 0
                        || i == dims[0] - 1
                        || j == dims[1] - 1
                        || k == dims[2] - 1;
                    let kind = if is_solid(i, j, k) {
                        let p = [i, j, k];
                        let mut open = false;
                        for a in 0..3 {
                            for s in [-1i64, 1] {
                                let q = p[a] as i64 + s;
                                if q < 0 || q >= dims[a] as i64 {
                                    continue;
                                }
                                let mut m = p;
                                m[a] = q as usize;
                                if !is_solid(m[0], m[1], m[2]) {
                                    open = true;
                                }
                            }
                        }
                        if open {
                            NodeKind::Boundary
                        } else {
                            NodeKind::Exterior
                        }
                    } else if on_face {
                        NodeKind::Boundary
                    } else {
                        NodeKind::Interior
                    };
                    kinds[idx(i, j, k)] = kind;
                }
            }
        }

        // Surface quadrature: trapezoid weights on rectangular faces.
        let mut acc: BTreeMap<(usize, usize, i8), f64> = BTreeMap::new();
        let add_face =
            |acc: &mut BTreeMap<(usize, usize, i8), f64>, axis: usize, at: usize, sign: i8, r: [(usize, usize); 3], scale: f64| {
                let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
                let trap = |v: usize, lo: usize, hi: usize| if v == lo || v == hi { 0.5 } else { 1.0 };
                for vb in r[b].0..=r[b].1 {
                    for vc in r[c].0..=r[c].1 {
                        let mut p = [0usize; 3];
                        p[axis] = at;
                        p[b] = vb;
                        p[c] = vc;
                        let w = trap(vb, r[b].0, r[b].1) * trap(vc, r[c].0, r[c].1) * spacing[b] * spacing[c];
                        *acc.entry((idx(p[0], p[1], p[2]), axis, sign)).or_insert(0.0) += scale * w;
                    }
                }
            };
        let full = [(0, dims[0] - 1), (0, dims[1] - 1), (0, dims[2] - 1)];
        for axis in 0..3 {
            add_face(&mut acc, axis, 0, -1, full, 1.0);
            add_face(&mut acc, axis, dims[axis] - 1, 1, full, 1.0);
        }
        if !solid.is_empty() {
            let r = [solid[0], solid[1], solid[2]];
            let axes: &[usize] = if hole { &[0, 1] } else { &[0, 1, 2] };
            for &axis in axes {
                // Ω lies outside the removed region, so the outward normal points into it.
                add_face(&mut acc, axis, r[axis].0, 1, r, 1.0);
                add_face(&mut acc, axis, r[axis].1, -1, r, 1.0);
            }
            if hole {
                // Cut the column cross-section out of the two x³ faces.
                add_face(&mut acc, 2, 0, -1, [r[0], r[1], (0, 0)], -1.0);
                add_face(&mut acc, 2, dims[2] - 1, 1, [r[0], r[1], (dims[2] - 1, dims[2] - 1)], -1.0);
            }
        }
        let facets: Vec<Facet> = acc
            .into_iter()
            .filter(|(_, w)| w.abs() > 1e-14 * spacing[0] * spacing[1])
            .map(|((node, axis, sign), area)| Facet {
                node,
                axis,
                sign: sign as f64,
                area,
            })
            .collect();

        let interior: Vec<usize> = (0..n).filter(|&i| kinds[i] == NodeKind::Interior).collect();
        let boundary: Vec<usize> = (0..n).filter(|&i| kinds[i] == NodeKind::Boundary).collect();
        let mut boundary_index = vec![NONE; n];
        for (bi, &node) in boundary.iter().enumerate() {
            boundary_index[node] = bi;
        }

        let mut dom = GridDomain {
            lo,
            hi,
            dims,
            spacing,
            mask,
            kinds,
            depth: vec![u32::MAX; n],
            interior,
            boundary,
            boundary_index,
            facets,
            components: Vec::new(),
            n_components: 0,
        };
        dom.compute_depth();
        dom.label_components();
        dom.check_invariants()?;
        Ok(dom)
    }

    fn compute_depth(&mut self) {
        let mut queue = VecDeque::new();
        for &b in &self.boundary {
            self.depth[b] = 0;
            queue.push_back(b);
        }
        while let Some(node) = queue.pop_front() {
            let d = self.depth[node];
            let nbrs: Vec<usize> = self.axis_neighbors(node).collect();
            for m in nbrs {
                if self.kinds[m] == NodeKind::Interior && self.depth[m] == u32::MAX {
                    self.depth[m] = d + 1;
                    queue.push_back(m);
                }
            }
        }
    }

    fn label_components(&mut self) {
        let nb = self.boundary.len();
        let mut label = vec![NONE; nb];
        let mut count = 0;
        for start in 0..nb {
            if label[start] != NONE {
                continue;
            }
            label[start] = count;
            let mut stack = vec![start];
            while let Some(bi) = stack.pop() {
                let [i, j, k] = self.coords_of(self.boundary[bi]);
                for dk in -1i64..=1 {
                    for dj in -1i64..=1 {
                        for di in -1i64..=1 {
                            if let Some(m) = self.offset([i, j, k], [di, dj, dk]) {
                                let mb = self.boundary_index[m];
                                if mb != NONE && label[mb] == NONE {
                                    label[mb] = count;
                                    stack.push(mb);
                                }
                            }
                        }
                    }
                }
            }
            count += 1;
        }
        self.components = label;
        self.n_components = count;
    }

    fn check_invariants(&self) -> Result<()> {
        for &node in &self.interior {
            for m in self.axis_neighbors(node) {
                if self.kinds[m] == NodeKind::Exterior {
                    return Err(Error::InvalidDomain(format!(
                        "interior node {node} touches exterior node {m}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn offset(&self, c: [usize; 3], d: [i64; 3]) -> Option<usize> {
        let mut p = [0usize; 3];
        for a in 0..3 {
            let q = c[a] as i64 + d[a];
            if q < 0 || q >= self.dims[a] as i64 {
                return None;
            }
            p[a] = q as usize;
        }
        Some(self.index(p))
    }

    /// In-grid axis neighbors of a node (up to six).
    pub fn axis_neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coords_of(node);
        (0..3).flat_map(move |a| {
            [-1i64, 1].into_iter().filter_map(move |s| {
                let mut d = [0i64; 3];
                d[a] = s;
                self.offset(c, d)
            })
        })
    }

    /// Node shifted by `steps` along `axis`, if it stays inside the lattice.
    pub fn step(&self, node: usize, axis: usize, steps: i64) -> Option<usize> {
        let mut d = [0i64; 3];
        d[axis] = steps;
        self.offset(self.coords_of(node), d)
    }

    /// Node shifted by an arbitrary lattice offset.
    pub fn shift(&self, node: usize, d: [i64; 3]) -> Option<usize> {
        self.offset(self.coords_of(node), d)
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn coords_of(&self, node: usize) -> [usize; 3] {
        let i = node % self.dims[0];
        let j = (node / self.dims[0]) % self.dims[1];
        let k = node / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    /// Coordinates `(x¹, x², x³)` of a node.
    pub fn position(&self, node: usize) -> [f64; 3] {
        let c = self.coords_of(node);
        [
            self.lo[0] + c[0] as f64 * self.spacing[0],
            self.lo[1] + c[1] as f64 * self.spacing[1],
            self.lo[2] + c[2] as f64 * self.spacing[2],
        ]
    }

    /// Node nearest to a coordinate point.
    pub fn nearest_node(&self, x: [f64; 3]) -> usize {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let t = ((x[a] - self.lo[a]) / self.spacing[a]).round();
            c[a] = t.clamp(0.0, (self.dims[a] - 1) as f64) as usize;
        }
        self.index(c)
    }

    /// Euclidean coordinate distance between two nodes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.position(a), self.position(b));
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn len(&self) -> usize {
        self.kinds.len()
    }
    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }
    /// Largest grid spacing.
    pub fn h(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }
    pub fn lo(&self) -> [f64; 3] {
        self.lo
    }
    pub fn hi(&self) -> [f64; 3] {
        self.hi
    }
    pub fn mask(&self) -> &MaskSpec {
        &self.mask
    }
    pub fn is_plain_box(&self) -> bool {
        matches!(self.mask, MaskSpec::Box)
    }
    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }
    pub fn in_domain(&self, node: usize) -> bool {
        self.kinds[node] != NodeKind::Exterior
    }
    pub fn is_interior(&self, node: usize) -> bool {
        self.kinds[node] == NodeKind::Interior
    }
    /// Graph distance (axis steps through the domain) to the nearest boundary node;
    /// 0 on the boundary, `u32::MAX` on exterior nodes.
    pub fn depth(&self, node: usize) -> u32 {
        self.depth[node]
    }
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }
    /// Interior and boundary nodes, in node order.
    pub fn domain_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.in_domain(i)).collect()
    }
    /// Nodes with depth at least `d` (interior nodes `d` layers inside).
    pub fn nodes_with_depth(&self, d: u32) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.depth[i] != u32::MAX && self.depth[i] >= d)
            .collect()
    }
    pub fn boundary_index(&self, node: usize) -> Option<usize> {
        let b = self.boundary_index[node];
        (b != NONE).then_some(b)
    }
    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }
    pub fn n_components(&self) -> usize {
        self.n_components
    }
    /// Component label of each boundary node (indexed like [`Self::boundary_nodes`]).
    pub fn boundary_components(&self) -> &[usize] {
        &self.components
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for k in &self.kinds {
            match k {
                NodeKind::Interior => c.0 += 1,
                NodeKind::Boundary => c.1 += 1,
                NodeKind::Exterior => c.2 += 1,
            }
        }
        c
    }

    /// Metric surface element `dσ` per facet: coordinate area times `√g √(g^{aa})`,
    /// which equals the area factor of the metric restricted to the face plane.
    pub fn facet_weights(&self, g: &MetricField) -> Vec<f64> {
        self.facets
            .iter()
            .map(|f| f.area * g.sqrt_det(f.node) * g.inv(f.node).get(f.axis, f.axis).sqrt())
            .collect()
    }

    /// Surface weight per boundary node (sum of its facet weights).
    pub fn surface_weights(&self, g: &MetricField) -> Vec<f64> {
        let mut w = vec![0.0; self.boundary.len()];
        for (f, fw) in self.facets.iter().zip(self.facet_weights(g)) {
            w[self.boundary_index[f.node]] += fw;
        }
        w
    }

    /// Outward unit normal (unit in `g`) of a facet, as a contravariant vector.
    pub fn facet_normal(&self, f: &Facet, g: &MetricField) -> [f64; 3] {
        let inv = g.inv(f.node);
        let s = f.sign / inv.get(f.axis, f.axis).sqrt();
        [inv.get(0, f.axis) * s, inv.get(1, f.axis) * s, inv.get(2, f.axis) * s]
    }

    /// Outward unit normal per boundary node: the area weighted mean of its facet
    /// normals, renormalized in `g`.
    pub fn boundary_normals(&self, g: &MetricField) -> Vec<[f64; 3]> {
        let mut acc = vec![[0.0; 3]; self.boundary.len()];
        for f in &self.facets {
            let nu = self.facet_normal(f, g);
            let b = self.boundary_index[f.node];
            for a in 0..3 {
                acc[b][a] += f.area.abs() * nu[a];
            }
        }
        for (b, v) in acc.iter_mut().enumerate() {
            let node = self.boundary[b];
            let norm = g.at(node).quad(*v, *v).sqrt();
            if norm > 0.0 {
                for c in v.iter_mut() {
                    *c /= norm;
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_counts() {
        let d = GridDomain::unit_box(9).unwrap();
        assert_eq!(d.counts(), (343, 386, 0));
        let d = GridDomain::unit_box(5).unwrap();
        assert_eq!(d.counts().1, 5 * 5 * 5 - 3 * 3 * 3);
        assert_eq!(d.n_components(), 1);
    }

    #[test]
    fn cavity_has_two_components() {
        let d = GridDomain::build(
            [0.0; 3],
            [1.0; 3],
            [17; 3],
            MaskSpec::BoxMinusBox { lo: [0.4; 3], hi: [0.6; 3] },
        )
        .unwrap();
        assert_eq!(d.n_components(), 2);
        let (_, _, ext) = d.counts();
        assert_eq!(ext, 1);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(GridDomain::build([0.0; 3], [0.0, 1.0, 1.0], [9; 3], MaskSpec::Box).is_err());
        assert!(GridDomain::build([0.0; 3], [1.0; 3], [4, 9, 9], MaskSpec::Box).is_err());
        let touching = MaskSpec::BoxMinusBox { lo: [0.0, 0.4, 0.4], hi: [0.6; 3] };
        assert!(GridDomain::build([0.0; 3], [1.0; 3], [17; 3], touching).is_err());
    }

    #[test]
    fn face_areas_sum_to_face_area() {
        let d = GridDomain::build([0.0; 3], [2.0, 1.0, 1.0], [9, 7, 5], MaskSpec::Box).unwrap();
        let g = MetricField::flat(&d);
        let w = d.facet_weights(&g);
        let mut per_face = [[0.0; 2]; 3];
        for (f, fw) in d.facets().iter().zip(&w) {
            per_face[f.axis][(f.sign > 0.0) as usize] += fw;
        }
        let areas = [1.0, 2.0, 2.0];
        for a in 0..3 {
            for s in 0..2 {
                assert!((per_face[a][s] - areas[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn column_mask_face_weights() {
        let d = GridDomain::build(
            [0.0; 3],
            [1.0; 3],
            [17; 3],
            MaskSpec::BoxMinusColumn { lo: [0.375, 0.375], hi: [0.625, 0.625] },
        )
        .unwrap();
        let g = MetricField::flat(&d);
        let w = d.facet_weights(&g);
        let mut bottom = 0.0;
        let mut walls = 0.0;
        for (f, fw) in d.facets().iter().zip(&w) {
            if f.axis == 2 && f.sign < 0.0 {
                bottom += fw;
            }
            let p = d.position(f.node);
            if f.axis < 2 && p[0] > 0.3 && p[0] < 0.7 && p[1] > 0.3 && p[1] < 0.7 {
                walls += fw;
            }
        }
        assert!((bottom - (1.0 - 0.25 * 0.25)).abs() < 1e-12);
        assert!((walls - 4.0 * 0.25).abs() < 1e-12);
        // The torus surface is connected.
        assert_eq!(d.n_components(), 1);
    }
}
