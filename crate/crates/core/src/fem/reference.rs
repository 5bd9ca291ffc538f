//! Reference-element data: barycentric quadrature rules and the P2/P1 bases.

/// Quadrature point in barycentric coordinates with a weight normalised to
/// sum to one over the triangle (multiply by the area).
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

fn orbit3(a: f64, w: f64) -> [QuadPoint; 3] {
    let b = 1.0 - 2.0 * a;
    [
        QuadPoint { bary: [a, a, b], weight: w },
        QuadPoint { bary: [a, b, a], weight: w },
        QuadPoint { bary: [b, a, a], weight: w },
    ]
}

/// Six-point rule, exact for polynomials of degree 4.
pub fn triangle_rule_deg4() -> Vec<QuadPoint> {
    let mut q = Vec::with_capacity(6);
    q.extend(orbit3(0.445_948_490_915_964_9, 0.223_381_589_678_011_47));
    q.extend(orbit3(0.091_576_213_509_770_74, 0.109_951_743_655_321_87));
    q
}

/// Seven-point rule, exact for polynomials of degree 5.
pub fn triangle_rule_deg5() -> Vec<QuadPoint> {
    let s15 = 15f64.sqrt();
    let mut q = Vec::with_capacity(7);
    q.push(QuadPoint { bary: [1.0 / 3.0; 3], weight: 9.0 / 40.0 });
    q.extend(orbit3((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0));
    q.extend(orbit3((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0));
    q
}

/// Three-point Gauss–Legendre rule on [0, 1] (exact to degree 5).
pub fn gauss3_unit() -> [(f64, f64); 3] {
    let d = 0.5 * (0.6f64).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

/// Affine triangle: area and the constant gradients of the barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    pub grad_bary: [[f64; 2]; 3],
    pub vertices: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let g = |a: [f64; 2], b: [f64; 2]| [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        Self { area: 0.5 * det, grad_bary: [g(p[1], p[2]), g(p[2], p[0]), g(p[0], p[1])], vertices: p }
    }

    pub fn point(&self, bary: [f64; 3]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for k in 0..3 {
            x[0] += bary[k] * self.vertices[k][0];
            x[1] += bary[k] * self.vertices[k][1];
        }
        x
    }

    /// P2 values and physical gradients at a barycentric point.
    /// Local order: vertices 0,1,2 then midpoints of edges (0,1), (1,2), (2,0).
    pub fn p2(&self, l: [f64; 3]) -> ([f64; 6], [[f64; 2]; 6]) {
        let g = &self.grad_bary;
        let mut val = [0.0; 6];
        let mut grad = [[0.0; 2]; 6];
        for i in 0..3 {
            val[i] = l[i] * (2.0 * l[i] - 1.0);
            let s = 4.0 * l[i] - 1.0;
            grad[i] = [s * g[i][0], s * g[i][1]];
        }
        for (k, &(a, b)) in [(0usize, 1usize), (1, 2), (2, 0)].iter().enumerate() {
            val[3 + k] = 4.0 * l[a] * l[b];
            grad[3 + k] = [
                4.0 * (l[b] * g[a][0] + l[a] * g[b][0]),
                4.0 * (l[b] * g[a][1] + l[a] * g[b][1]),
            ];
        }
        (val, grad)
    }
}

/// 1D P2 basis on [0, 1], order (end 0, midpoint, end 1).
pub fn p2_1d(s: f64) -> [f64; 3] {
    [(1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0)]
}
