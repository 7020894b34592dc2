//! Closed triangle meshes: ASCII ingestion, validation and distance queries.

use std::collections::HashMap;

use crate::{Error, Result, Vec3};

/// A closed, consistently oriented triangle surface.
///
/// Triangles are counter-clockwise seen from outside the body, so the
/// right-hand normal of each face points into the fluid.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh and checks that it bounds a simply connected solid.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriMesh { vertices, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, k: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Parses the ASCII triangle-soup format.
    ///
    /// Blank lines and lines starting with `#` are ignored. The first data
    /// line holds the vertex and triangle counts, followed by one `x y z`
    /// line per vertex and one `i j k` line (0-based) per triangle.
    pub fn parse_ascii(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let bad = |line: usize, what: &str| Error::InvalidInput(format!("mesh line {line}: {what}"));
        let (ln, header) = lines.next().ok_or_else(|| bad(0, "empty mesh file"))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(ln, "expected `<vertex count> <triangle count>`"))?;
        if counts.len() != 2 {
            return Err(bad(ln, "expected `<vertex count> <triangle count>`"));
        }
        let mut vertices = Vec::with_capacity(counts[0]);
        for _ in 0..counts[0] {
            let (ln, l) = lines.next().ok_or_else(|| bad(ln, "missing vertex lines"))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "vertex needs three numbers"))?;
            if v.len() != 3 || v.iter().any(|c| !c.is_finite()) {
                return Err(bad(ln, "vertex needs three finite numbers"));
            }
            vertices.push(Vec3::new(v[0], v[1], v[2]));
        }
        let mut triangles = Vec::with_capacity(counts[1]);
        for _ in 0..counts[1] {
            let (ln, l) = lines.next().ok_or_else(|| bad(ln, "missing triangle lines"))?;
            let t: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "triangle needs three indices"))?;
            if t.len() != 3 || t.iter().any(|&i| i >= counts[0]) {
                return Err(bad(ln, "triangle needs three valid vertex indices"));
            }
            triangles.push([t[0], t[1], t[2]]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(bad(ln, "trailing data after triangles"));
        }
        TriMesh::new(vertices, triangles)
    }

    /// Serializes to the ASCII format read by [`TriMesh::parse_ascii`].
    pub fn to_ascii(&self) -> String {
        let mut s = format!("{} {}\n", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            s.push_str(&format!("{:.17e} {:.17e} {:.17e}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        s
    }

    /// Geodesic sphere: the icosahedron subdivided `level` times and
    /// projected onto the sphere. Level 4 has 5120 triangles.
    pub fn icosphere(radius: f64, level: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = [
            [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
            [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
            [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
        .collect();
        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..level {
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(triangles.len() * 4);
            let mut mid = |a: usize, b: usize, vs: &mut Vec<Vec3>| -> usize {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    vs.push(((vs[a] + vs[b]) * 0.5).normalize());
                    vs.len() - 1
                })
            };
            for &[a, b, c] in &triangles {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            triangles = next;
        }
        for v in &mut vertices {
            *v *= radius;
        }
        TriMesh { vertices, triangles }
    }

    /// Returns a copy translated by `shift`.
    pub fn translated(&self, shift: Vec3) -> Self {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v + shift).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Unnormalized face normal (twice the area times the unit normal).
    pub fn face_normal(&self, k: usize) -> Vec3 {
        let [a, b, c] = self.triangle(k);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|k| 0.5 * self.face_normal(k).norm()).sum()
    }

    /// Enclosed volume (positive for outward orientation).
    pub fn volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|k| {
                let [a, b, c] = self.triangle(k);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Largest distance between two vertices (bounding-sphere estimate).
    pub fn diameter(&self) -> f64 {
        let c = self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64;
        2.0 * self.vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
    }

    /// Largest vertex distance from the origin.
    pub fn max_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::DegenerateGeometry(m));
        if self.triangles.len() < 4 {
            return bad("mesh needs at least four triangles".into());
        }
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, t) in self.triangles.iter().enumerate() {
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return bad(format!("triangle {k} repeats a vertex"));
            }
            if self.face_normal(k).norm() == 0.0 {
                return bad(format!("triangle {k} has zero area"));
            }
            for e in 0..3 {
                let key = (t[e], t[(e + 1) % 3]);
                if edges.insert(key, k).is_some() {
                    return bad(format!("edge {key:?} used twice with the same orientation"));
                }
            }
        }
        for &(a, b) in edges.keys() {
            if !edges.contains_key(&(b, a)) {
                return bad(format!("mesh is open or inconsistently oriented at edge ({a}, {b})"));
            }
        }
        let used: std::collections::HashSet<usize> = self.triangles.iter().flatten().copied().collect();
        let chi = used.len() as i64 - (edges.len() / 2) as i64 + self.triangles.len() as i64;
        if chi != 2 {
            return bad(format!("surface has Euler characteristic {chi}, expected 2 (sphere topology)"));
        }
        let vol = self.volume();
        if !(vol.abs() > 1e-14 * self.diameter().powi(3)) {
            return bad("mesh encloses zero volume".into());
        }
        if vol < 0.0 {
            return bad("mesh is oriented inward (negative enclosed volume)".into());
        }
        Ok(())
    }
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Axis-aligned bounding-volume hierarchy over mesh triangles for
/// closest-point queries.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

#[derive(Clone, Debug)]
struct BvhNode {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: range into `order`; inner: child indices.
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Self {
        let n = mesh.triangles.len();
        let centroids: Vec<Vec3> = (0..n)
            .map(|k| {
                let [a, b, c] = mesh.triangle(k);
                (a + b + c) / 3.0
            })
            .collect();
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..n).collect() };
        bvh.split(mesh, &centroids, 0, n);
        bvh
    }

    fn split(&mut self, mesh: &TriMesh, centroids: &[Vec3], start: usize, count: usize) -> usize {
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for &k in &self.order[start..start + count] {
            for v in mesh.triangle(k) {
                lo = lo.inf(&v);
                hi = hi.sup(&v);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(BvhNode { lo, hi, start, count, left: usize::MAX, right: usize::MAX });
        if count <= LEAF_SIZE {
            return id;
        }
        let axis = (hi - lo).imax();
        self.order[start..start + count]
            .sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]));
        let half = count / 2;
        let left = self.split(mesh, centroids, start, half);
        let right = self.split(mesh, centroids, start + half, count - half);
        self.nodes[id].left = left;
        self.nodes[id].right = right;
        id
    }

    /// Closest point on the mesh to `p` and the triangle it lies on.
    pub fn closest_point(&self, mesh: &TriMesh, p: &Vec3) -> (Vec3, usize) {
        let mut best = (Vec3::zeros(), usize::MAX);
        let mut best_d2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if box_distance2(p, &node.lo, &node.hi) >= best_d2 {
                continue;
            }
            if node.left == usize::MAX {
                for &k in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = mesh.triangle(k);
                    let q = closest_point_on_triangle(p, &a, &b, &c);
                    let d2 = (p - q).norm_squared();
                    if d2 < best_d2 {
                        best_d2 = d2;
                        best = (q, k);
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = box_distance2(p, &self.nodes[l].lo, &self.nodes[l].hi);
                let dr = box_distance2(p, &self.nodes[r].lo, &self.nodes[r].hi);
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }
}

fn box_distance2(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    (0..3)
        .map(|i| {
            let d = (lo[i] - p[i]).max(0.0).max(p[i] - hi[i]);
            d * d
        })
        .sum()
}

/// Generalized winding number of a closed mesh around `p` (1 inside, 0 outside).
pub fn winding_number(mesh: &TriMesh, p: &Vec3) -> f64 {
    let total: f64 = (0..mesh.triangles.len())
        .map(|k| {
            let [a, b, c] = mesh.triangle(k);
            solid_angle(&(a - p), &(b - p), &(c - p))
        })
        .sum();
    total / (4.0 * std::f64::consts::PI)
}

/// Signed solid angle subtended by the triangle with corners `a, b, c`
/// (relative to the observation point).
pub fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    2.0 * num.atan2(den)
}
