use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use sha2::{Digest, Sha256};

use super::geometry::{BoundaryTag, Geometry};
use crate::error::{Error, Result};

/// Conforming triangulation of a polygon built on a uniform lattice of spacing `h`.
///
/// Vertices carry integer keys in half-lattice units (`x = key·h/2`) so that
/// P2 edge midpoints and nodes shared between submeshes compare exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    h: f64,
    keys: Vec<[i64; 2]>,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edge_tags: BTreeMap<(usize, usize), BoundaryTag>,
}

/// The 1D mesh of the subdomain interface: vertices sorted by y.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMesh {
    pub x: f64,
    pub keys: Vec<[i64; 2]>,
    pub points: Vec<[f64; 2]>,
}

impl InterfaceMesh {
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.points.len().saturating_sub(1)).map(|k| (k, k + 1))
    }

    pub fn length(&self) -> f64 {
        self.segments()
            .map(|(a, b)| (self.points[b][1] - self.points[a][1]).abs())
            .sum()
    }
}

pub(crate) fn coord_from_key(key: i64, h: f64) -> f64 {
    key as f64 * (0.5 * h)
}

fn lattice_index(value: f64, h: f64) -> Option<i64> {
    let r = value / h;
    ((r - r.round()).abs() < 1e-9).then(|| r.round() as i64)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Mesh {
    /// Uniform structured triangulation of an axis-aligned polygon: lattice
    /// squares whose centre lies inside the polygon, each split along its
    /// lower-left to upper-right diagonal.
    pub fn structured(geometry: &Geometry, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidMesh(format!("mesh size h={h} must be positive")));
        }
        for v in geometry.vertices() {
            for &c in v {
                if lattice_index(c, h).is_none() {
                    return Err(Error::InvalidMesh(format!(
                        "h={h} does not divide geometry coordinate {c}"
                    )));
                }
            }
        }
        if let Some(xg) = geometry.interface_x() {
            if lattice_index(xg, h).is_none() {
                return Err(Error::InvalidMesh(format!("interface x={xg} is not on a grid line of h={h}")));
            }
        }
        let (lo, hi) = geometry.bounding_box();
        let (i0, i1) = (lattice_index(lo[0], h).unwrap(), lattice_index(hi[0], h).unwrap());
        let (j0, j1) = (lattice_index(lo[1], h).unwrap(), lattice_index(hi[1], h).unwrap());

        let mut cells = Vec::new();
        for i in i0..i1 {
            for j in j0..j1 {
                let centre = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                if geometry.contains(centre) {
                    cells.push((i, j));
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidMesh("no lattice cell inside the geometry".into()));
        }

        let corner_keys: BTreeSet<[i64; 2]> = cells
            .iter()
            .flat_map(|&(i, j)| [[i, j], [i + 1, j], [i, j + 1], [i + 1, j + 1]])
            .map(|[i, j]| [2 * i, 2 * j])
            .collect();
        let keys: Vec<[i64; 2]> = corner_keys.into_iter().collect();
        let index: BTreeMap<[i64; 2], usize> = keys.iter().enumerate().map(|(k, &key)| (key, k)).collect();
        let vertices = keys.iter().map(|k| [coord_from_key(k[0], h), coord_from_key(k[1], h)]).collect();

        let mut triangles = Vec::with_capacity(2 * cells.len());
        for &(i, j) in &cells {
            let v = |a: i64, b: i64| index[&[2 * a, 2 * b]];
            let (v00, v10, v11, v01) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }

        let mut mesh = Self { h, keys, vertices, triangles, edge_tags: BTreeMap::new() };
        let mut tags = BTreeMap::new();
        for (a, b) in mesh.boundary_edges_untagged() {
            let tag = geometry
                .tag_of_segment(mesh.vertices[a], mesh.vertices[b])
                .ok_or_else(|| Error::InvalidMesh(format!("boundary edge {a}-{b} not on the polygon")))?;
            tags.insert((a, b), tag);
        }
        if let Some(xg) = geometry.interface_x() {
            let xk = 2 * lattice_index(xg, h).unwrap();
            for (a, b) in mesh.edges() {
                if mesh.keys[a][0] == xk && mesh.keys[b][0] == xk && !tags.contains_key(&(a, b)) {
                    tags.insert((a, b), BoundaryTag::Interface);
                }
            }
        }
        mesh.edge_tags = tags;
        Ok(mesh)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn keys(&self) -> &[[i64; 2]] {
        &self.keys
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Tagged edges (boundary edges and, when present, interior interface edges).
    pub fn edge_tags(&self) -> &BTreeMap<(usize, usize), BoundaryTag> {
        &self.edge_tags
    }

    /// All unique edges as sorted vertex pairs, in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let set: BTreeSet<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [edge_key(t[0], t[1]), edge_key(t[1], t[2]), edge_key(t[2], t[0])])
            .collect();
        set.into_iter().collect()
    }

    fn boundary_edges_untagged(&self) -> Vec<(usize, usize)> {
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &self.triangles {
            for e in [edge_key(t[0], t[1]), edge_key(t[1], t[2]), edge_key(t[2], t[0])] {
                *count.entry(e).or_default() += 1;
            }
        }
        count.into_iter().filter(|&(_, c)| c == 1).map(|(e, _)| e).collect()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Tag of the tagged edge containing point `p`, if any.
    pub fn tag_at(&self, p: [f64; 2]) -> Option<BoundaryTag> {
        self.edge_tags
            .iter()
            .find(|(&(a, b), _)| super::geometry::on_segment(self.vertices[a], self.vertices[b], p))
            .map(|(_, &t)| t)
    }

    /// SHA-256 over the exact vertex keys, connectivity and tags.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.h.to_le_bytes());
        for k in &self.keys {
            hasher.update(k[0].to_le_bytes());
            hasher.update(k[1].to_le_bytes());
        }
        for t in &self.triangles {
            for v in t {
                hasher.update((*v as u64).to_le_bytes());
            }
        }
        for (&(a, b), tag) in &self.edge_tags {
            hasher.update((a as u64).to_le_bytes());
            hasher.update((b as u64).to_le_bytes());
            hasher.update(tag.as_str().as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Plain-text dump:
    /// `vertices <n>` then `<index> <x> <y>` lines,
    /// `triangles <n>` then `<index> <v0> <v1> <v2>` lines (counter-clockwise),
    /// `edges <n>` then `<v0> <v1> <tag>` lines for tagged edges.
    pub fn export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "vertices {}", self.vertices.len())?;
        for (k, v) in self.vertices.iter().enumerate() {
            writeln!(out, "{k} {} {}", v[0], v[1])?;
        }
        writeln!(out, "triangles {}", self.triangles.len())?;
        for (k, t) in self.triangles.iter().enumerate() {
            writeln!(out, "{k} {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(out, "edges {}", self.edge_tags.len())?;
        for (&(a, b), tag) in &self.edge_tags {
            writeln!(out, "{a} {b} {}", tag.as_str())?;
        }
        Ok(())
    }

    /// Submesh of the listed triangles, keeping vertex order; boundary edges of
    /// the submesh lying on `x = cut_x` are tagged as interface.
    fn submesh(&self, tris: &[usize], cut_key: i64) -> Result<Mesh> {
        let used: BTreeSet<usize> = tris.iter().flat_map(|&t| self.triangles[t]).collect();
        let mut remap = vec![usize::MAX; self.vertices.len()];
        for (new, &old) in used.iter().enumerate() {
            remap[old] = new;
        }
        let old_of_new: Vec<usize> = used.iter().copied().collect();
        let mut sub = Mesh {
            h: self.h,
            keys: old_of_new.iter().map(|&v| self.keys[v]).collect(),
            vertices: old_of_new.iter().map(|&v| self.vertices[v]).collect(),
            triangles: tris.iter().map(|&t| self.triangles[t].map(|v| remap[v])).collect(),
            edge_tags: BTreeMap::new(),
        };
        let mut tags = BTreeMap::new();
        for (a, b) in sub.boundary_edges_untagged() {
            let on_cut = sub.keys[a][0] == cut_key && sub.keys[b][0] == cut_key;
            let parent = self.edge_tags.get(&edge_key(old_of_new[a], old_of_new[b])).copied();
            let tag = if on_cut {
                BoundaryTag::Interface
            } else {
                parent.ok_or_else(|| Error::InvalidMesh(format!("submesh edge {a}-{b} has no parent tag")))?
            };
            tags.insert((a, b), tag);
        }
        sub.edge_tags = tags;
        Ok(sub)
    }
}

/// Splits a mesh along the vertical line `x = x_gamma` into two conforming
/// submeshes and the interface mesh.
pub fn decompose(mesh: &Mesh, x_gamma: f64) -> Result<(Mesh, Mesh, InterfaceMesh)> {
    let h = mesh.h;
    let xk = lattice_index(x_gamma, h)
        .map(|i| 2 * i)
        .ok_or_else(|| Error::InvalidMesh(format!("interface x={x_gamma} is not a union of mesh edges")))?;
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let xs = tri.map(|v| mesh.keys[v][0]);
        let below = xs.iter().all(|&x| x <= xk);
        let above = xs.iter().all(|&x| x >= xk);
        match (below, above) {
            (true, false) => left.push(t),
            (false, true) => right.push(t),
            _ => {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} crosses x={x_gamma}; interface is not edge-aligned"
                )))
            }
        }
    }
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidMesh(format!("x={x_gamma} does not split the mesh")));
    }
    let omega1 = mesh.submesh(&left, xk)?;
    let omega2 = mesh.submesh(&right, xk)?;

    let mut iface_keys: Vec<[i64; 2]> = omega1
        .edge_tags
        .iter()
        .filter(|(_, &t)| t == BoundaryTag::Interface)
        .flat_map(|(&(a, b), _)| [omega1.keys[a], omega1.keys[b]])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    iface_keys.sort_by_key(|k| k[1]);
    if iface_keys.len() < 2 {
        return Err(Error::InvalidMesh("interface has no edges".into()));
    }
    let points = iface_keys.iter().map(|k| [coord_from_key(k[0], h), coord_from_key(k[1], h)]).collect();
    Ok((omega1, omega2, InterfaceMesh { x: coord_from_key(xk, h), keys: iface_keys, points }))
}

/// Backward-facing-step triangulation with the interface line tagged.
pub fn generate_bfs_mesh(h: f64, x_gamma: f64) -> Result<Mesh> {
    if !(x_gamma > 4.0 && x_gamma < 18.0) {
        return Err(Error::InvalidMesh(format!("interface x={x_gamma} must lie strictly inside (4, 18)")));
    }
    Mesh::structured(&Geometry::backward_facing_step(x_gamma), h)
}

/// Structured rectangle [0,lx]x[0,ly] (inlet x=0, outlet x=lx, walls y=0,ly).
pub fn generate_rect_mesh(lx: f64, ly: f64, h: f64) -> Result<Mesh> {
    if !(lx > 0.0 && ly > 0.0) {
        return Err(Error::InvalidMesh("rectangle sides must be positive".into()));
    }
    Mesh::structured(&Geometry::rectangle(lx, ly), h)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent count of unit-lattice cells covering the L-shaped channel.
    fn step_lattice_counts(h: f64) -> (usize, usize) {
        let n = |len: f64| (len / h).round() as usize;
        let mut cells = BTreeSet::new();
        let mut corners = BTreeSet::new();
        for i in 0..n(18.0) {
            for j in 0..n(5.0) {
                let (x, y) = (i as f64 * h, j as f64 * h);
                let in_duct = x < 4.0 && y >= 2.0;
                let in_channel = x >= 4.0;
                if in_duct || in_channel {
                    cells.insert((i, j));
                    for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        corners.insert((i + a, j + b));
                    }
                }
            }
        }
        (corners.len(), 2 * cells.len())
    }

    #[test]
    fn step_mesh_counts_match_lattice_oracle() {
        for h in [1.0, 0.5] {
            let mesh = generate_bfs_mesh(h, 9.0).unwrap();
            let (nv, nt) = step_lattice_counts(h);
            assert_eq!((mesh.num_vertices(), mesh.num_triangles()), (nv, nt));
        }
        let mesh = generate_bfs_mesh(1.0, 9.0).unwrap();
        assert_eq!((mesh.num_vertices(), mesh.num_triangles()), (106, 164));
    }

    #[test]
    fn triangles_positive_and_cover_polygon() {
        let mesh = generate_bfs_mesh(0.5, 9.0).unwrap();
        assert!((0..mesh.num_triangles()).all(|t| mesh.signed_area(t) > 0.0));
        assert!((mesh.total_area() - 82.0).abs() < 1e-12);
    }

    #[test]
    fn interface_edges_tagged() {
        let mesh = generate_bfs_mesh(0.5, 9.0).unwrap();
        let on_line: Vec<_> = mesh.edges().into_iter().filter(|&(a, b)| {
            mesh.vertices()[a][0] == 9.0 && mesh.vertices()[b][0] == 9.0
        }).collect();
        assert_eq!(on_line.len(), 10);
        for e in on_line {
            assert_eq!(mesh.edge_tags()[&e], BoundaryTag::Interface);
        }
        assert_eq!(mesh.tag_at([9.0, 2.5]), Some(BoundaryTag::Interface));
        assert_eq!(mesh.tag_at([0.0, 3.0]), Some(BoundaryTag::Inlet));
        assert_eq!(mesh.tag_at([18.0, 1.2]), Some(BoundaryTag::Outlet));
        assert_eq!(mesh.tag_at([10.0, 0.0]), Some(BoundaryTag::Wall));
    }

    #[test]
    fn off_grid_and_non_divisible_requests_rejected() {
        assert!(generate_bfs_mesh(1.0, 9.3).is_err());
        assert!(generate_bfs_mesh(0.3, 9.0).is_err());
        assert!(generate_bfs_mesh(1.0, 3.0).is_err());
        assert!(generate_rect_mesh(1.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn rectangle_counts() {
        let m = generate_rect_mesh(2.0, 1.0, 0.5).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles()), (15, 16));
        let m = generate_rect_mesh(1.0, 1.0, 1.0).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles()), (4, 2));
    }

    #[test]
    fn decomposition_partitions_triangles() {
        let mesh = generate_bfs_mesh(0.5, 9.0).unwrap();
        let (o1, o2, iface) = decompose(&mesh, 9.0).unwrap();
        assert!((0..o1.num_triangles()).all(|t| o1.centroid(t)[0] < 9.0));
        assert!((0..o2.num_triangles()).all(|t| o2.centroid(t)[0] > 9.0));
        assert_eq!(o1.num_triangles() + o2.num_triangles(), mesh.num_triangles());
        let rel = (o1.total_area() + o2.total_area() - mesh.total_area()).abs() / mesh.total_area();
        assert!(rel <= 1e-12);
        assert_eq!(iface.points.len(), 11);
        assert!((iface.length() - 5.0).abs() < 1e-14);

        let shared: BTreeSet<[i64; 2]> = o1.keys().iter().copied().collect::<BTreeSet<_>>()
            .intersection(&o2.keys().iter().copied().collect())
            .copied()
            .collect();
        assert!(shared.iter().all(|k| k[0] == 36));
        assert_eq!(shared.len(), iface.points.len());
        // Γ_{1,D}/Γ_{2,N} inherit: Ω1 has the inlet, Ω2 the outlet.
        assert!(o1.edge_tags().values().any(|&t| t == BoundaryTag::Inlet));
        assert!(!o1.edge_tags().values().any(|&t| t == BoundaryTag::Outlet));
        assert!(o2.edge_tags().values().any(|&t| t == BoundaryTag::Outlet));
    }

    #[test]
    fn rectangle_split_is_symmetric() {
        let mesh = generate_rect_mesh(2.0, 1.0, 0.25).unwrap();
        let (o1, o2, _) = decompose(&mesh, 1.0).unwrap();
        assert_eq!(o1.num_triangles(), o2.num_triangles());
    }

    #[test]
    fn misaligned_interface_rejected() {
        let mesh = generate_rect_mesh(2.0, 1.0, 0.5).unwrap();
        assert!(decompose(&mesh, 0.75).is_err());
    }

    #[test]
    fn regeneration_is_deterministic() {
        let a = generate_bfs_mesh(0.5, 9.0).unwrap();
        let b = generate_bfs_mesh(0.5, 9.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut buf = Vec::new();
        a.export(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&format!("vertices {}", a.num_vertices())));
    }
}
