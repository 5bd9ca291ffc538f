use std::collections::{BTreeMap, BTreeSet};

use super::geometry::BoundaryTag;
use super::triangulation::{coord_from_key, Mesh};

/// Taylor–Hood P2–P1 numbering on a mesh.
///
/// P2 nodes (vertices and edge midpoints) are numbered lexicographically by
/// coordinate; velocity DoF `2·node + component`. Pressure DoFs sit on the
/// vertices in the same order. When built with a pressure split line, the
/// vertices on that line carry one pressure DoF per side.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    node_keys: Vec<[i64; 2]>,
    nodes: Vec<[f64; 2]>,
    node_index: BTreeMap<[i64; 2], usize>,
    elem_nodes: Vec<[usize; 6]>,
    elem_pressure: Vec<[usize; 3]>,
    pressure_keys: Vec<[i64; 2]>,
    pressure_side: Vec<i8>,
    boundary_nodes: BTreeMap<BoundaryTag, Vec<usize>>,
    dirichlet_nodes: Vec<usize>,
    interface_nodes: Vec<usize>,
    num_vertices: usize,
    num_edges: usize,
}

/// Local P2 node order: vertices 0,1,2 then midpoints of (0,1), (1,2), (2,0).
pub const LOCAL_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        Self::build(mesh, None)
    }

    /// Pressure DoFs on the vertical line `x = split_x` are duplicated, one per
    /// side, so the pressure may jump across that line.
    pub fn with_pressure_split(mesh: &Mesh, split_x: f64) -> Self {
        Self::build(mesh, Some(split_x))
    }

    fn build(mesh: &Mesh, split_x: Option<f64>) -> Self {
        let h = mesh.h();
        let vkeys = mesh.keys();
        let edges = mesh.edges();
        let mid = |a: usize, b: usize| [(vkeys[a][0] + vkeys[b][0]) / 2, (vkeys[a][1] + vkeys[b][1]) / 2];

        let all: BTreeSet<[i64; 2]> = vkeys.iter().copied().chain(edges.iter().map(|&(a, b)| mid(a, b))).collect();
        let node_keys: Vec<[i64; 2]> = all.into_iter().collect();
        let node_index: BTreeMap<[i64; 2], usize> =
            node_keys.iter().enumerate().map(|(k, &key)| (key, k)).collect();
        let nodes = node_keys.iter().map(|k| [coord_from_key(k[0], h), coord_from_key(k[1], h)]).collect();

        let elem_nodes: Vec<[usize; 6]> = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut n = [0usize; 6];
                for i in 0..3 {
                    n[i] = node_index[&vkeys[t[i]]];
                }
                for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                    n[3 + k] = node_index[&mid(t[a], t[b])];
                }
                n
            })
            .collect();

        // Pressure numbering: (vertex key, side) lexicographic; side 0 unless split.
        let split_key = split_x.map(|x| (2.0 * x / h).round() as i64);
        let side_of = |t: usize| -> i8 {
            match split_key {
                Some(sk) => {
                    let cx: i64 = mesh.triangles()[t].iter().map(|&v| vkeys[v][0]).sum();
                    if cx < 3 * sk { -1 } else { 1 }
                }
                None => 0,
            }
        };
        let mut pressure_slots: BTreeSet<([i64; 2], i8)> = BTreeSet::new();
        let mut elem_slots = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let s = side_of(t);
            let slots = tri.map(|v| {
                let key = vkeys[v];
                let side = if split_key == Some(key[0]) { s } else { 0 };
                (key, side)
            });
            pressure_slots.extend(slots.iter().copied());
            elem_slots.push(slots);
        }
        let pressure_list: Vec<([i64; 2], i8)> = pressure_slots.into_iter().collect();
        let pressure_index: BTreeMap<([i64; 2], i8), usize> =
            pressure_list.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        let elem_pressure = elem_slots.iter().map(|s| s.map(|slot| pressure_index[&slot])).collect();

        let mut boundary: BTreeMap<BoundaryTag, BTreeSet<usize>> = BTreeMap::new();
        for (&(a, b), &tag) in mesh.edge_tags() {
            let set = boundary.entry(tag).or_default();
            set.insert(node_index[&vkeys[a]]);
            set.insert(node_index[&vkeys[b]]);
            set.insert(node_index[&mid(a, b)]);
        }
        let dirichlet: BTreeSet<usize> = boundary
            .iter()
            .filter(|(t, _)| t.is_dirichlet())
            .flat_map(|(_, s)| s.iter().copied())
            .collect();
        let mut interface_nodes: Vec<usize> =
            boundary.get(&BoundaryTag::Interface).map(|s| s.iter().copied().collect()).unwrap_or_default();
        interface_nodes.sort_by_key(|&n| (node_keys[n][1], node_keys[n][0]));

        Self {
            node_keys,
            nodes,
            node_index,
            elem_nodes,
            elem_pressure,
            pressure_keys: pressure_list.iter().map(|&(k, _)| k).collect(),
            pressure_side: pressure_list.iter().map(|&(_, s)| s).collect(),
            boundary_nodes: boundary.into_iter().map(|(t, s)| (t, s.into_iter().collect())).collect(),
            dirichlet_nodes: dirichlet.into_iter().collect(),
            interface_nodes,
            num_vertices: mesh.num_vertices(),
            num_edges: edges.len(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_velocity(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn num_pressure(&self) -> usize {
        self.pressure_keys.len()
    }

    /// Velocity then pressure unknowns of the coupled system.
    pub fn num_state(&self) -> usize {
        self.num_velocity() + self.num_pressure()
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node_keys(&self) -> &[[i64; 2]] {
        &self.node_keys
    }

    pub fn node_of_key(&self, key: [i64; 2]) -> Option<usize> {
        self.node_index.get(&key).copied()
    }

    pub fn elem_nodes(&self) -> &[[usize; 6]] {
        &self.elem_nodes
    }

    pub fn elem_pressure(&self) -> &[[usize; 3]] {
        &self.elem_pressure
    }

    pub fn pressure_keys(&self) -> &[[i64; 2]] {
        &self.pressure_keys
    }

    /// -1 / +1 for duplicated split-line pressure DoFs (left / right), 0 otherwise.
    pub fn pressure_side(&self) -> &[i8] {
        &self.pressure_side
    }

    pub fn boundary_nodes(&self, tag: BoundaryTag) -> &[usize] {
        self.boundary_nodes.get(&tag).map_or(&[], |v| v.as_slice())
    }

    /// Nodes on inlet or wall edges (sorted).
    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet_nodes
    }

    /// Velocity DoFs constrained by Dirichlet data (sorted).
    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        self.dirichlet_nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect()
    }

    pub fn is_dirichlet_node(&self, node: usize) -> bool {
        self.dirichlet_nodes.binary_search(&node).is_ok()
    }

    /// Nodes on interface-tagged edges, sorted by y.
    pub fn interface_nodes(&self) -> &[usize] {
        &self.interface_nodes
    }
}
