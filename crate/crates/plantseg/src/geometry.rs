//! Point-cloud container and exact fixed-radius spatial queries.
//!
//! The kd-tree answers closed-ball range queries (`dist <= r`) that are
//! guaranteed to match a brute-force linear scan. BFS connectivity downstream
//! depends on that exactness, so there is no approximate mode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the global (aligned) frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn dist_sq(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn dist(&self, other: &Point3) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

/// Axis-aligned box, `min` corner inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Aabb { min, max }
    }

    /// Half-open membership: `min <= p < max` on every axis.
    pub fn contains_half_open(&self, p: &Point3) -> bool {
        (0..3).all(|a| p.coord(a) >= self.min.coord(a) && p.coord(a) < self.max.coord(a))
    }

    /// Tight bounds of a non-empty point set.
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Aabb> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut min = first;
        let mut max = first;
        for p in it {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            min.z = min.z.min(p.z);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
            max.z = max.z.max(p.z);
        }
        Some(Aabb { min, max })
    }
}

/// Flat store of 3D points. The 0-based position of a point is its stable
/// global identity for the whole pipeline run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub intensity: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            intensity: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
struct KdNode {
    /// Split axis; leaf nodes are encoded as `axis == LEAF`.
    axis: u8,
    split: f64,
    left: u32,
    right: u32,
    /// Range into `order` covered by this subtree (leaves only use it).
    start: u32,
    end: u32,
}

const LEAF: u8 = 3;
const NONE: u32 = u32::MAX;
const LEAF_SIZE: usize = 16;

/// Immutable kd-tree over a subset of a cloud's global indices.
///
/// Radius queries return exactly `{j : dist(center, p_j) <= r}` restricted to
/// the indexed subset, sorted by global index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    /// Global index of each indexed point, permuted during construction.
    order: Vec<u32>,
    nodes: Vec<KdNode>,
    root: u32,
}

/// Builds an index over `subset` (or the whole cloud when `None`).
pub fn build_index(cloud: &PointCloud, subset: Option<&[u32]>) -> Result<SpatialIndex> {
    let order: Vec<u32> = match subset {
        Some(s) => s.to_vec(),
        None => (0..cloud.len() as u32).collect(),
    };
    if order.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let points: Vec<Point3> = order.iter().map(|&i| cloud.points[i as usize]).collect();
    Ok(SpatialIndex::build(points, order))
}

impl SpatialIndex {
    fn build(points: Vec<Point3>, order: Vec<u32>) -> SpatialIndex {
        let mut entries: Vec<(Point3, u32)> =
            points.into_iter().zip(order).collect();
        let n = entries.len();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        let root = Self::build_rec(&mut entries, 0, n, &mut nodes);
        let (points, order) = entries.into_iter().unzip();
        SpatialIndex {
            points,
            order,
            nodes,
            root,
        }
    }

    fn build_rec(
        entries: &mut [(Point3, u32)],
        start: usize,
        end: usize,
        nodes: &mut Vec<KdNode>,
    ) -> u32 {
        let len = end - start;
        if len <= LEAF_SIZE {
            nodes.push(KdNode {
                axis: LEAF,
                split: 0.0,
                left: NONE,
                right: NONE,
                start: start as u32,
                end: end as u32,
            });
            return (nodes.len() - 1) as u32;
        }
        let bb = Aabb::of_points(entries[start..end].iter().map(|(p, _)| p)).unwrap();
        let extents = [
            bb.max.x - bb.min.x,
            bb.max.y - bb.min.y,
            bb.max.z - bb.min.z,
        ];
        let axis = (0..3).max_by(|&a, &b| extents[a].total_cmp(&extents[b])).unwrap();
        let mid = start + len / 2;
        entries[start..end].select_nth_unstable_by(mid - start, |a, b| {
            a.0.coord(axis).total_cmp(&b.0.coord(axis))
        });
        let split = entries[mid].0.coord(axis);
        let node_pos = nodes.len();
        nodes.push(KdNode {
            axis: axis as u8,
            split,
            left: NONE,
            right: NONE,
            start: start as u32,
            end: end as u32,
        });
        let left = Self::build_rec(entries, start, mid, nodes);
        let right = Self::build_rec(entries, mid, end, nodes);
        nodes[node_pos].left = left;
        nodes[node_pos].right = right;
        node_pos as u32
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Global indices within the closed ball of radius `r` around `center`.
    pub fn radius_neighbors(&self, center: &Point3, r: f64) -> Result<Vec<u32>> {
        if !(r > 0.0) {
            return Err(Error::InvalidRadius(r));
        }
        let mut out = Vec::new();
        self.query_rec(self.root, center, r, r * r, &mut out);
        out.sort_unstable();
        Ok(out)
    }

    /// Same as [`radius_neighbors`](Self::radius_neighbors), centered on a
    /// cloud point; the query point itself is always part of the result when
    /// it is indexed.
    pub fn radius_neighbors_of(
        &self,
        cloud: &PointCloud,
        index: usize,
        r: f64,
    ) -> Result<Vec<u32>> {
        self.radius_neighbors(&cloud.points[index], r)
    }

    fn query_rec(&self, node: u32, center: &Point3, r: f64, r_sq: f64, out: &mut Vec<u32>) {
        let n = &self.nodes[node as usize];
        if n.axis == LEAF {
            for i in n.start..n.end {
                if self.points[i as usize].dist_sq(center) <= r_sq {
                    out.push(self.order[i as usize]);
                }
            }
            return;
        }
        let delta = center.coord(n.axis as usize) - n.split;
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.query_rec(near, center, r, r_sq, out);
        if delta.abs() <= r {
            self.query_rec(far, center, r, r_sq, out);
        }
    }
}

/// Brute-force closed-ball scan, the reference for index correctness.
pub fn brute_force_neighbors(cloud: &PointCloud, center: &Point3, r: f64) -> Vec<u32> {
    let r_sq = r * r;
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.dist_sq(center) <= r_sq)
        .map(|(i, _)| i as u32)
        .collect()
}
