use crate::error::{Error, Result};

/// Boundary labels carried by mesh edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Inlet,
    Wall,
    Outlet,
    /// Internal line separating the two subdomains.
    Interface,
}

impl BoundaryTag {
    pub fn is_dirichlet(self) -> bool {
        matches!(self, BoundaryTag::Inlet | BoundaryTag::Wall)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Inlet => "inlet",
            BoundaryTag::Wall => "wall",
            BoundaryTag::Outlet => "outlet",
            BoundaryTag::Interface => "interface",
        }
    }
}

/// Closed counter-clockwise polygon (lengths in cm) with one tag per edge.
/// Edge `k` runs from vertex `k` to vertex `k + 1` (cyclically).
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    vertices: Vec<[f64; 2]>,
    edge_tags: Vec<BoundaryTag>,
    interface_x: Option<f64>,
}

impl Geometry {
    pub fn new(vertices: Vec<[f64; 2]>, edge_tags: Vec<BoundaryTag>, interface_x: Option<f64>) -> Result<Self> {
        if vertices.len() < 3 || vertices.len() != edge_tags.len() {
            return Err(Error::InvalidMesh("polygon needs >= 3 vertices and one tag per edge".into()));
        }
        let g = Self { vertices, edge_tags, interface_x };
        if g.signed_area() <= 0.0 {
            return Err(Error::InvalidMesh("polygon must be counter-clockwise with positive area".into()));
        }
        Ok(g)
    }

    /// Backward-facing step: inlet duct [0,4]x[2,5], step corner at (4,2),
    /// channel [4,18]x[0,5]; inlet at x=0, outlet at x=18.
    pub fn backward_facing_step(interface_x: f64) -> Self {
        use BoundaryTag::*;
        Self {
            vertices: vec![
                [0.0, 2.0],
                [4.0, 2.0],
                [4.0, 0.0],
                [18.0, 0.0],
                [18.0, 5.0],
                [0.0, 5.0],
            ],
            edge_tags: vec![Wall, Wall, Wall, Outlet, Wall, Inlet],
            interface_x: Some(interface_x),
        }
    }

    /// Rectangle [0,lx]x[0,ly]: inlet x=0, outlet x=lx, walls top and bottom.
    pub fn rectangle(lx: f64, ly: f64) -> Self {
        use BoundaryTag::*;
        Self {
            vertices: vec![[0.0, 0.0], [lx, 0.0], [lx, ly], [0.0, ly]],
            edge_tags: vec![Wall, Outlet, Wall, Inlet],
            interface_x: None,
        }
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn edge_tags(&self) -> &[BoundaryTag] {
        &self.edge_tags
    }

    pub fn interface_x(&self) -> Option<f64> {
        self.interface_x
    }

    pub fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2], BoundaryTag)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n], self.edge_tags[k]))
    }

    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b, _)| a[0] * b[1] - b[0] * a[1]).sum::<f64>() * 0.5
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Strict interior test by ray casting (points on the boundary are unspecified).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for (a, b, _) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Tag of the polygon edge containing segment [p, q], if any.
    pub fn tag_of_segment(&self, p: [f64; 2], q: [f64; 2]) -> Option<BoundaryTag> {
        let mid = [(p[0] + q[0]) * 0.5, (p[1] + q[1]) * 0.5];
        self.edges()
            .find(|(a, b, _)| on_segment(*a, *b, p) && on_segment(*a, *b, q) && on_segment(*a, *b, mid))
            .map(|(_, _, t)| t)
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if cross.abs() > 1e-9 * len.max(1.0) {
        return false;
    }
    let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len);
    (-1e-12..=1.0 + 1e-12).contains(&t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_polygon_is_ccw_with_expected_area() {
        let g = Geometry::backward_facing_step(9.0);
        assert!(g.signed_area() > 0.0);
        assert!((g.area() - (4.0 * 3.0 + 14.0 * 5.0)).abs() < 1e-12);
        assert!(g.contains([1.0, 3.0]));
        assert!(!g.contains([1.0, 1.0]));
        assert_eq!(g.tag_of_segment([0.0, 2.5], [0.0, 3.0]), Some(BoundaryTag::Inlet));
        assert_eq!(g.tag_of_segment([18.0, 0.0], [18.0, 0.5]), Some(BoundaryTag::Outlet));
        assert_eq!(g.tag_of_segment([4.0, 0.5], [4.0, 1.0]), Some(BoundaryTag::Wall));
    }

    #[test]
    fn clockwise_polygon_rejected() {
        let v = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(Geometry::new(v, vec![BoundaryTag::Wall; 4], None).is_err());
    }
}
