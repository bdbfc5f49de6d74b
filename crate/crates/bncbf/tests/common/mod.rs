//! Independent oracles for the acceptance suite. Nothing here calls the
//! library's QP path: distances come from closed-form feature enumeration or
//! coordinate projection, and tree evaluation is naive recursion.

use nalgebra::Vector3;

/// Distance between axis-aligned boxes given as (min, max) corners.
pub fn box_box_distance(
    amin: Vector3<f64>,
    amax: Vector3<f64>,
    bmin: Vector3<f64>,
    bmax: Vector3<f64>,
) -> f64 {
    let mut sq = 0.0;
    for c in 0..3 {
        let gap = (amin[c] - bmax[c]).max(bmin[c] - amax[c]).max(0.0);
        sq += gap * gap;
    }
    sq.sqrt()
}

/// Closest distance from a point to a triangle.
pub fn point_triangle_distance(p: Vector3<f64>, tri: [Vector3<f64>; 3]) -> f64 {
    let [a, b, c] = tri;
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let nn = n.norm_squared();
    if nn > 1e-18 {
        // Barycentric test of the plane projection.
        let ap = p - a;
        let d = n / nn.sqrt();
        let dist_plane = ap.dot(&d);
        let proj = p - d * dist_plane;
        let v0 = ac;
        let v1 = ab;
        let v2 = proj - a;
        let dot00 = v0.dot(&v0);
        let dot01 = v0.dot(&v1);
        let dot02 = v0.dot(&v2);
        let dot11 = v1.dot(&v1);
        let dot12 = v1.dot(&v2);
        let denom = dot00 * dot11 - dot01 * dot01;
        if denom.abs() > 1e-18 {
            let u = (dot11 * dot02 - dot01 * dot12) / denom;
            let v = (dot00 * dot12 - dot01 * dot02) / denom;
            if u >= 0.0 && v >= 0.0 && u + v <= 1.0 {
                return dist_plane.abs();
            }
        }
    }
    let edges = [(a, b), (b, c), (c, a)];
    edges
        .iter()
        .map(|(s, e)| point_segment_distance(p, *s, *e))
        .fold(f64::INFINITY, f64::min)
}

pub fn point_segment_distance(p: Vector3<f64>, s: Vector3<f64>, e: Vector3<f64>) -> f64 {
    let d = e - s;
    let len_sq = d.norm_squared();
    if len_sq < 1e-18 {
        return (p - s).norm();
    }
    let t = ((p - s).dot(&d) / len_sq).clamp(0.0, 1.0);
    (p - (s + d * t)).norm()
}

/// Closest distance between two segments.
pub fn segment_segment_distance(
    p1: Vector3<f64>,
    q1: Vector3<f64>,
    p2: Vector3<f64>,
    q2: Vector3<f64>,
) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (mut s, mut t);
    if a < 1e-18 && e < 1e-18 {
        return (p1 - p2).norm();
    }
    if a < 1e-18 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e < 1e-18 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            s = if denom.abs() > 1e-18 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Closed-form minimum distance between two disjoint convex polytopes with
/// triangulated faces: the minimum over vertex-face and edge-edge feature
/// pairs (which also covers the vertex-vertex and vertex-edge cases).
pub struct FeaturePolytope {
    pub vertices: Vec<Vector3<f64>>,
    /// Triangles as vertex index triples.
    pub faces: Vec<[usize; 3]>,
    /// Edges as vertex index pairs.
    pub edges: Vec<(usize, usize)>,
}

impl FeaturePolytope {
    /// Build from vertices and the face-membership predicate of an H-rep:
    /// `on_face(row, vertex)` says the vertex lies on that hyperplane.
    pub fn from_h_rep(
        vertices: Vec<Vector3<f64>>,
        num_rows: usize,
        on_face: impl Fn(usize, &Vector3<f64>) -> bool,
    ) -> Self {
        let mut faces = Vec::new();
        let mut edges = Vec::new();
        for row in 0..num_rows {
            let members: Vec<usize> = (0..vertices.len())
                .filter(|&v| on_face(row, &vertices[v]))
                .collect();
            if members.len() == 3 {
                faces.push([members[0], members[1], members[2]]);
            } else if members.len() == 4 {
                // Split a quadrilateral face into two triangles after sorting
                // the members around the face centroid.
                let centroid: Vector3<f64> =
                    members.iter().map(|&m| vertices[m]).sum::<Vector3<f64>>() / 4.0;
                let normal = (vertices[members[1]] - vertices[members[0]])
                    .cross(&(vertices[members[2]] - vertices[members[0]]));
                let basis_u = (vertices[members[0]] - centroid).normalize();
                let basis_v = normal.cross(&basis_u).normalize();
                let mut ordered = members.clone();
                ordered.sort_by(|&p, &q| {
                    let ang = |m: usize| {
                        let d = vertices[m] - centroid;
                        d.dot(&basis_v).atan2(d.dot(&basis_u))
                    };
                    ang(p).partial_cmp(&ang(q)).unwrap()
                });
                faces.push([ordered[0], ordered[1], ordered[2]]);
                faces.push([ordered[0], ordered[2], ordered[3]]);
                for k in 0..4 {
                    let a = ordered[k];
                    let b = ordered[(k + 1) % 4];
                    let e = (a.min(b), a.max(b));
                    if !edges.contains(&e) {
                        edges.push(e);
                    }
                }
                continue;
            }
            for i in 0..members.len() {
                for j in (i + 1)..members.len() {
                    let e = (members[i].min(members[j]), members[i].max(members[j]));
                    if !edges.contains(&e) {
                        edges.push(e);
                    }
                }
            }
        }
        Self {
            vertices,
            faces,
            edges,
        }
    }
}

pub fn feature_distance(a: &FeaturePolytope, b: &FeaturePolytope) -> f64 {
    let mut best = f64::INFINITY;
    for &v in &a.vertices {
        for face in &b.faces {
            let tri = [b.vertices[face[0]], b.vertices[face[1]], b.vertices[face[2]]];
            best = best.min(point_triangle_distance(v, tri));
        }
    }
    for &v in &b.vertices {
        for face in &a.faces {
            let tri = [a.vertices[face[0]], a.vertices[face[1]], a.vertices[face[2]]];
            best = best.min(point_triangle_distance(v, tri));
        }
    }
    for &(s1, e1) in &a.edges {
        for &(s2, e2) in &b.edges {
            best = best.min(segment_segment_distance(
                a.vertices[s1],
                a.vertices[e1],
                b.vertices[s2],
                b.vertices[e2],
            ));
        }
    }
    best
}

/// Exact distance from a segment to an axis-aligned box by alternating
/// projection on the jointly convex objective (global by convexity).
pub fn segment_box_distance(
    seg_start: Vector3<f64>,
    seg_end: Vector3<f64>,
    bmin: Vector3<f64>,
    bmax: Vector3<f64>,
) -> f64 {
    let d = seg_end - seg_start;
    let len_sq = d.norm_squared();
    let mut alpha: f64 = 0.5;
    let mut q = Vector3::zeros();
    for _ in 0..20_000 {
        let p = seg_start + d * alpha;
        q = Vector3::new(
            p.x.clamp(bmin.x, bmax.x),
            p.y.clamp(bmin.y, bmax.y),
            p.z.clamp(bmin.z, bmax.z),
        );
        let next = if len_sq < 1e-18 {
            0.0
        } else {
            ((q - seg_start).dot(&d) / len_sq).clamp(0.0, 1.0)
        };
        if (next - alpha).abs() < 1e-14 {
            alpha = next;
            break;
        }
        alpha = next;
    }
    (seg_start + d * alpha - q).norm()
}
