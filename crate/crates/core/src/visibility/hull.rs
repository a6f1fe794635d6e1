//! 3D convex hull via quickhull with an adaptive epsilon scheme.
//!
//! Tolerances scale with the input's coordinate magnitude so near-coplanar
//! clouds (thin shells, flat patches) partition consistently. Degenerate
//! inputs (coincident, collinear, coplanar) are reported as errors rather
//! than producing a broken hull.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HullError {
    /// Fewer than four input points.
    TooFewPoints,
    /// All points coincident, collinear, or coplanar within tolerance.
    Degenerate,
    /// The incremental construction reached an inconsistent state.
    Numerical,
}

impl std::fmt::Display for HullError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HullError::TooFewPoints => write!(f, "fewer than 4 points"),
            HullError::Degenerate => write!(f, "degenerate input"),
            HullError::Numerical => write!(f, "numerical failure"),
        }
    }
}

/// A triangular hull facet with its outward plane.
#[derive(Debug, Clone)]
pub struct HullFace {
    pub verts: [u32; 3],
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl HullFace {
    /// Signed distance of a point to the facet plane (positive = outside).
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

/// Finished convex hull: facets plus vertex membership over input indices.
#[derive(Debug, Clone)]
pub struct ConvexHull3 {
    faces: Vec<HullFace>,
    is_vertex: Vec<bool>,
    vertex_faces: HashMap<u32, Vec<u32>>,
    epsilon: f64,
}

impl ConvexHull3 {
    pub fn faces(&self) -> &[HullFace] {
        &self.faces
    }

    pub fn is_vertex(&self, input_index: u32) -> bool {
        self.is_vertex
            .get(input_index as usize)
            .copied()
            .unwrap_or(false)
    }

    pub fn vertex_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .is_vertex
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| i as u32)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Facet ids incident to a hull vertex (empty for non-vertices).
    pub fn faces_of_vertex(&self, input_index: u32) -> &[u32] {
        self.vertex_faces
            .get(&input_index)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// The construction tolerance derived from the input scale.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

struct Face {
    verts: [u32; 3],
    normal: Vector3<f64>,
    offset: f64,
    /// Face across edge (verts[i], verts[i+1]).
    neighbors: [u32; 3],
    outside: Vec<u32>,
    furthest: u32,
    furthest_dist: f64,
    alive: bool,
}

impl Face {
    fn dist(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

/// Compute the convex hull of `points`.
pub fn convex_hull(points: &[Point3<f64>]) -> Result<ConvexHull3, HullError> {
    if points.len() < 4 {
        return Err(HullError::TooFewPoints);
    }
    let mut max_abs = [0.0f64; 3];
    for p in points {
        for k in 0..3 {
            max_abs[k] = max_abs[k].max(p[k].abs());
        }
    }
    let epsilon = 3.0 * f64::EPSILON * (max_abs[0] + max_abs[1] + max_abs[2]);

    let mut builder = Builder {
        points,
        epsilon,
        faces: Vec::new(),
        interior: Point3::origin(),
    };
    builder.run()?;

    let mut is_vertex = vec![false; points.len()];
    let mut vertex_faces: HashMap<u32, Vec<u32>> = HashMap::new();
    let mut faces = Vec::new();
    for f in builder.faces.iter().filter(|f| f.alive) {
        let id = faces.len() as u32;
        faces.push(HullFace {
            verts: f.verts,
            normal: f.normal,
            offset: f.offset,
        });
        for &v in &f.verts {
            is_vertex[v as usize] = true;
            vertex_faces.entry(v).or_default().push(id);
        }
    }
    Ok(ConvexHull3 {
        faces,
        is_vertex,
        vertex_faces,
        epsilon,
    })
}

struct Builder<'a> {
    points: &'a [Point3<f64>],
    epsilon: f64,
    faces: Vec<Face>,
    interior: Point3<f64>,
}

impl<'a> Builder<'a> {
    fn run(&mut self) -> Result<(), HullError> {
        let simplex = self.initial_simplex()?;
        self.interior = Point3::from(
            (self.points[simplex[0] as usize].coords
                + self.points[simplex[1] as usize].coords
                + self.points[simplex[2] as usize].coords
                + self.points[simplex[3] as usize].coords)
                / 4.0,
        );

        let tetra_faces = [
            [simplex[0], simplex[1], simplex[2]],
            [simplex[0], simplex[1], simplex[3]],
            [simplex[0], simplex[2], simplex[3]],
            [simplex[1], simplex[2], simplex[3]],
        ];
        for verts in tetra_faces {
            self.push_face(verts)?;
        }
        self.link_all_neighbors()?;

        for i in 0..self.points.len() as u32 {
            if simplex.contains(&i) {
                continue;
            }
            self.assign_point(i, 0..4);
        }

        let mut stack: Vec<u32> = (0..4).filter(|&f| !self.faces[f as usize].outside.is_empty()).collect();
        let mut iterations = 0usize;
        let max_iterations = self.points.len() * 4 + 64;
        while let Some(fid) = stack.pop() {
            if !self.faces[fid as usize].alive || self.faces[fid as usize].outside.is_empty() {
                continue;
            }
            iterations += 1;
            if iterations > max_iterations {
                return Err(HullError::Numerical);
            }
            let eye = self.faces[fid as usize].furthest;
            let eye_p = self.points[eye as usize];

            // Flood fill the faces visible from the eye point.
            let mut visible = vec![fid];
            let mut seen: HashMap<u32, bool> = HashMap::new();
            seen.insert(fid, true);
            let mut queue = vec![fid];
            while let Some(f) = queue.pop() {
                for k in 0..3 {
                    let g = self.faces[f as usize].neighbors[k];
                    if g == u32::MAX {
                        return Err(HullError::Numerical);
                    }
                    if seen.contains_key(&g) {
                        continue;
                    }
                    let vis = self.faces[g as usize].dist(&eye_p) > self.epsilon;
                    seen.insert(g, vis);
                    if vis {
                        visible.push(g);
                        queue.push(g);
                    }
                }
            }

            // Horizon edges, oriented by the visible face's winding.
            let mut horizon: Vec<(u32, u32, u32, usize)> = Vec::new(); // (a, b, outer face, outer edge slot)
            for &f in &visible {
                for k in 0..3 {
                    let g = self.faces[f as usize].neighbors[k];
                    if !seen[&g] {
                        let a = self.faces[f as usize].verts[k];
                        let b = self.faces[f as usize].verts[(k + 1) % 3];
                        let slot = (0..3)
                            .find(|&s| {
                                self.faces[g as usize].verts[s] == b
                                    && self.faces[g as usize].verts[(s + 1) % 3] == a
                            })
                            .ok_or(HullError::Numerical)?;
                        horizon.push((a, b, g, slot));
                    }
                }
            }
            if horizon.is_empty() {
                return Err(HullError::Numerical);
            }

            // Collect orphaned outside points and retire the visible faces.
            let mut orphans: Vec<u32> = Vec::new();
            for &f in &visible {
                orphans.extend(self.faces[f as usize].outside.drain(..));
                self.faces[f as usize].alive = false;
            }

            // Build the cone of new faces around the eye.
            let first_new = self.faces.len() as u32;
            let mut edge_map: HashMap<(u32, u32), (u32, usize)> = HashMap::new();
            for &(a, b, outer, outer_slot) in &horizon {
                let new_id = self.push_face([a, b, eye])?;
                // Edge 0 = (a, b) pairs with the outer face.
                self.faces[new_id as usize].neighbors[0] = outer;
                self.faces[outer as usize].neighbors[outer_slot] = new_id;
                // Edges touching the eye pair with sibling cone faces.
                for (slot, key) in [(1usize, (b, eye)), (2usize, (eye, a))] {
                    let norm_key = if key.0 < key.1 { key } else { (key.1, key.0) };
                    if let Some(&(other_id, other_slot)) = edge_map.get(&norm_key) {
                        self.faces[new_id as usize].neighbors[slot] = other_id;
                        self.faces[other_id as usize].neighbors[other_slot] = new_id;
                    } else {
                        edge_map.insert(norm_key, (new_id, slot));
                    }
                }
            }
            let new_range = first_new..self.faces.len() as u32;
            for f in new_range.clone() {
                if self.faces[f as usize].neighbors.contains(&u32::MAX) {
                    return Err(HullError::Numerical);
                }
            }

            // Re-distribute orphans among the new faces.
            for p in orphans {
                if p == eye {
                    continue;
                }
                self.assign_point(p, new_range.clone());
            }
            for f in new_range {
                if !self.faces[f as usize].outside.is_empty() {
                    stack.push(f);
                }
            }
        }
        Ok(())
    }

    /// Create a face over `verts` oriented away from the interior point.
    fn push_face(&mut self, mut verts: [u32; 3]) -> Result<u32, HullError> {
        let a = self.points[verts[0] as usize];
        let b = self.points[verts[1] as usize];
        let c = self.points[verts[2] as usize];
        let mut normal = (b - a).cross(&(c - a));
        let norm = normal.norm();
        if norm <= f64::MIN_POSITIVE.sqrt() {
            return Err(HullError::Numerical);
        }
        normal /= norm;
        let mut offset = normal.dot(&a.coords);
        if normal.dot(&self.interior.coords) - offset > 0.0 {
            normal = -normal;
            offset = -offset;
            verts.swap(1, 2);
        }
        let id = self.faces.len() as u32;
        self.faces.push(Face {
            verts,
            normal,
            offset,
            neighbors: [u32::MAX; 3],
            outside: Vec::new(),
            furthest: u32::MAX,
            furthest_dist: f64::NEG_INFINITY,
            alive: true,
        });
        Ok(id)
    }

    /// Assign a point to the face (within the id range) it is furthest
    /// outside of; drop it silently when inside all of them.
    fn assign_point(&mut self, p: u32, faces: std::ops::Range<u32>) {
        let point = self.points[p as usize];
        let mut best_face = u32::MAX;
        let mut best_dist = self.epsilon;
        for f in faces {
            if !self.faces[f as usize].alive {
                continue;
            }
            let d = self.faces[f as usize].dist(&point);
            if d > best_dist {
                best_dist = d;
                best_face = f;
            }
        }
        if best_face != u32::MAX {
            let face = &mut self.faces[best_face as usize];
            face.outside.push(p);
            if best_dist > face.furthest_dist {
                face.furthest_dist = best_dist;
                face.furthest = p;
            }
        }
    }

    /// Pair up neighbors for the initial tetrahedron.
    fn link_all_neighbors(&mut self) -> Result<(), HullError> {
        let mut edge_map: HashMap<(u32, u32), (u32, usize)> = HashMap::new();
        for f in 0..self.faces.len() as u32 {
            for slot in 0..3 {
                let a = self.faces[f as usize].verts[slot];
                let b = self.faces[f as usize].verts[(slot + 1) % 3];
                let key = if a < b { (a, b) } else { (b, a) };
                if let Some(&(other_f, other_slot)) = edge_map.get(&key) {
                    self.faces[f as usize].neighbors[slot] = other_f;
                    self.faces[other_f as usize].neighbors[other_slot] = f;
                } else {
                    edge_map.insert(key, (f, slot));
                }
            }
        }
        for f in &self.faces {
            if f.neighbors.contains(&u32::MAX) {
                return Err(HullError::Numerical);
            }
        }
        Ok(())
    }

    fn initial_simplex(&self) -> Result<[u32; 4], HullError> {
        let pts = self.points;
        // Extremes along each axis.
        let mut extremes = [0u32; 6];
        for k in 0..3 {
            let mut lo = 0u32;
            let mut hi = 0u32;
            for (i, p) in pts.iter().enumerate() {
                if p[k] < pts[lo as usize][k] {
                    lo = i as u32;
                }
                if p[k] > pts[hi as usize][k] {
                    hi = i as u32;
                }
            }
            extremes[2 * k] = lo;
            extremes[2 * k + 1] = hi;
        }
        // Farthest pair among the extremes.
        let (mut p0, mut p1, mut best) = (extremes[0], extremes[1], -1.0);
        for i in 0..6 {
            for j in (i + 1)..6 {
                let d = (pts[extremes[i] as usize] - pts[extremes[j] as usize]).norm_squared();
                if d > best {
                    best = d;
                    p0 = extremes[i];
                    p1 = extremes[j];
                }
            }
        }
        if best.sqrt() <= self.epsilon {
            return Err(HullError::Degenerate);
        }
        // Farthest point from the line (p0, p1).
        let a = pts[p0 as usize];
        let dir = (pts[p1 as usize] - a).normalize();
        let (mut p2, mut best) = (u32::MAX, self.epsilon);
        for (i, p) in pts.iter().enumerate() {
            let v = p - a;
            let d = (v - dir * v.dot(&dir)).norm();
            if d > best {
                best = d;
                p2 = i as u32;
            }
        }
        if p2 == u32::MAX {
            return Err(HullError::Degenerate);
        }
        // Farthest point from the plane (p0, p1, p2).
        let b = pts[p2 as usize];
        let normal = (pts[p1 as usize] - a).cross(&(b - a)).normalize();
        let offset = normal.dot(&a.coords);
        let (mut p3, mut best) = (u32::MAX, self.epsilon);
        for (i, p) in pts.iter().enumerate() {
            let d = (normal.dot(&p.coords) - offset).abs();
            if d > best {
                best = d;
                p3 = i as u32;
            }
        }
        if p3 == u32::MAX {
            return Err(HullError::Degenerate);
        }
        Ok([p0, p1, p2, p3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_hull_has_corner_vertices() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Point3::new(x, y, z));
                }
            }
        }
        // Interior points must not appear on the hull.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            pts.push(Point3::new(
                rng.gen_range(0.01..0.99),
                rng.gen_range(0.01..0.99),
                rng.gen_range(0.01..0.99),
            ));
        }
        let hull = convex_hull(&pts).unwrap();
        let verts = hull.vertex_ids();
        assert_eq!(verts, (0..8).collect::<Vec<u32>>());
    }

    #[test]
    fn sphere_points_are_all_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point3<f64>> = (0..2000)
            .map(|_| {
                let v = Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalize();
                Point3::from(v * 10.0)
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        assert_eq!(hull.vertex_ids().len(), pts.len());
        // Euler: F = 2V - 4 for a triangulated sphere.
        assert_eq!(hull.faces().len(), 2 * pts.len() - 4);
    }

    #[test]
    fn degenerate_inputs_are_reported() {
        assert_eq!(
            convex_hull(&[Point3::origin(); 3]).unwrap_err(),
            HullError::TooFewPoints
        );
        assert_eq!(
            convex_hull(&[Point3::origin(); 10]).unwrap_err(),
            HullError::Degenerate
        );
        let line: Vec<Point3<f64>> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(convex_hull(&line).unwrap_err(), HullError::Degenerate);
        let plane: Vec<Point3<f64>> = (0..100)
            .map(|i| Point3::new((i % 10) as f64, (i / 10) as f64, 0.0))
            .collect();
        assert_eq!(convex_hull(&plane).unwrap_err(), HullError::Degenerate);
    }

    #[test]
    fn hull_contains_all_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point3<f64>> = (0..5000)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                )
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        for p in &pts {
            for f in hull.faces() {
                assert!(
                    f.signed_distance(p) <= 1e-9,
                    "point outside hull facet by {}",
                    f.signed_distance(p)
                );
            }
        }
    }

    #[test]
    fn facet_adjacency_covers_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Point3<f64>> = (0..500)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                )
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        for v in hull.vertex_ids() {
            assert!(hull.faces_of_vertex(v).len() >= 3);
        }
    }
}
