//! Facility subdivision: non-overlapping 3D windows tiled with overlapping
//! cubic blocks, all referencing global point indices.
//!
//! The grid is anchored at the cloud's axis-wise minimum, windows are
//! half-open (lower corner inclusive), and blocks within a window start at
//! multiples of the stride, so every point falls in at least one block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    pub window_size: f64,
    pub block_size: f64,
    pub block_stride: f64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams {
            window_size: 10.0,
            block_size: 1.0,
            block_stride: 0.5,
        }
    }
}

impl PartitionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.block_stride > 0.0
            && self.block_stride <= self.block_size
            && self.block_size <= self.window_size)
        {
            return Err(Error::InvalidPartition(format!(
                "need 0 < stride ({}) <= block ({}) <= window ({})",
                self.block_stride, self.block_size, self.window_size
            )));
        }
        Ok(())
    }
}

/// One overlapping cubic block inside a window.
#[derive(Debug, Clone)]
pub struct Block {
    pub window_id: usize,
    pub block_id: usize,
    pub aabb: Aabb,
    /// Global indices of points inside `aabb` (half-open).
    pub indices: Vec<u32>,
}

impl Block {
    /// Block-local coordinates relative to the box minimum corner.
    pub fn to_local(&self, p: &Point3) -> Point3 {
        Point3::new(
            p.x - self.aabb.min.x,
            p.y - self.aabb.min.y,
            p.z - self.aabb.min.z,
        )
    }

    pub fn to_global(&self, local: &Point3) -> Point3 {
        Point3::new(
            local.x + self.aabb.min.x,
            local.y + self.aabb.min.y,
            local.z + self.aabb.min.z,
        )
    }
}

/// One non-overlapping window and the global indices it owns.
#[derive(Debug, Clone)]
pub struct Window {
    pub window_id: usize,
    /// Integer window coordinates relative to the grid origin.
    pub cell: [i64; 3],
    pub aabb: Aabb,
    pub indices: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct BlockGrid {
    pub params: PartitionParams,
    pub origin: Point3,
    pub windows: Vec<Window>,
    pub blocks: Vec<Block>,
}

/// Splits a cloud into windows and blocks; empty blocks are dropped.
pub fn partition(cloud: &PointCloud, params: &PartitionParams) -> Result<BlockGrid> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::InvalidPartition("cloud is empty".into()));
    }
    let bb = Aabb::of_points(cloud.points.iter()).unwrap();
    let origin = bb.min;
    let w = params.window_size;

    // group points by window cell, keeping index order within each window
    let mut cells: Vec<([i64; 3], Vec<u32>)> = Vec::new();
    let mut cell_lookup = std::collections::HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let cell = [
            ((p.x - origin.x) / w).floor() as i64,
            ((p.y - origin.y) / w).floor() as i64,
            ((p.z - origin.z) / w).floor() as i64,
        ];
        let slot = *cell_lookup.entry(cell).or_insert_with(|| {
            cells.push((cell, Vec::new()));
            cells.len() - 1
        });
        cells[slot].1.push(i as u32);
    }
    // deterministic window order: sorted by cell coordinates
    cells.sort_by_key(|(c, _)| *c);

    let mut windows = Vec::with_capacity(cells.len());
    let mut blocks = Vec::new();
    for (window_id, (cell, indices)) in cells.into_iter().enumerate() {
        let wmin = Point3::new(
            origin.x + cell[0] as f64 * w,
            origin.y + cell[1] as f64 * w,
            origin.z + cell[2] as f64 * w,
        );
        let wmax = Point3::new(wmin.x + w, wmin.y + w, wmin.z + w);
        let aabb = Aabb::new(wmin, wmax);
        blocks.extend(window_blocks(cloud, window_id, &aabb, &indices, params));
        windows.push(Window {
            window_id,
            cell,
            aabb,
            indices,
        });
    }
    for (block_id, b) in blocks.iter_mut().enumerate() {
        b.block_id = block_id;
    }
    Ok(BlockGrid {
        params: *params,
        origin,
        windows,
        blocks,
    })
}

fn window_blocks(
    cloud: &PointCloud,
    window_id: usize,
    window: &Aabb,
    indices: &[u32],
    params: &PartitionParams,
) -> Vec<Block> {
    let stride = params.block_stride;
    let bsize = params.block_size;
    let w = params.window_size;
    let steps = (w / stride).ceil() as i64;
    // k covers local coordinate u iff k*stride <= u < k*stride + bsize
    let axis_cells = |u: f64| -> std::ops::RangeInclusive<i64> {
        let hi = (u / stride).floor() as i64;
        let lo = ((u - bsize) / stride).floor() as i64 + 1;
        lo.max(0)..=hi.min(steps - 1)
    };
    let mut cells: Vec<([i64; 3], Vec<u32>)> = Vec::new();
    let mut lookup = std::collections::HashMap::new();
    for &i in indices {
        let p = &cloud.points[i as usize];
        let local = [
            p.x - window.min.x,
            p.y - window.min.y,
            p.z - window.min.z,
        ];
        for kx in axis_cells(local[0]) {
            for ky in axis_cells(local[1]) {
                for kz in axis_cells(local[2]) {
                    let cell = [kx, ky, kz];
                    let slot = *lookup.entry(cell).or_insert_with(|| {
                        cells.push((cell, Vec::new()));
                        cells.len() - 1
                    });
                    cells[slot].1.push(i);
                }
            }
        }
    }
    cells.sort_by_key(|(c, _)| *c);
    cells
        .into_iter()
        .map(|(cell, members)| {
            let min = Point3::new(
                window.min.x + cell[0] as f64 * stride,
                window.min.y + cell[1] as f64 * stride,
                window.min.z + cell[2] as f64 * stride,
            );
            let max = Point3::new(min.x + bsize, min.y + bsize, min.z + bsize);
            Block {
                window_id,
                block_id: 0,
                aabb: Aabb::new(min, max),
                indices: members,
            }
        })
        .collect()
}
