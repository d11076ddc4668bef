//! Instance segmentation: epsilon-neighborhood BFS inside each class point
//! cluster, with a class-boundary constraint, nearest-neighbor boundary
//! re-attachment, minimum-instance-size filtering and cross-block merging.
//!
//! Boundary points are excluded from traversal so they cannot bridge two
//! touching objects, then each is attached to the instance of its nearest
//! same-class non-boundary neighbor within epsilon. The size filter runs
//! after attachment (and after block merge), so it judges final object size.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::evaluate::{self, EvalParams, EvalReport};
use crate::exec;
use crate::geometry::{build_index, PointCloud};
use crate::labels::{ClassLabel, Labeling, ALL_CLASSES};
use crate::union_find::UnionFind;

#[derive(Debug, Clone)]
pub struct BfsParams {
    pub epsilon: f64,
    pub mu_min_points: usize,
    /// Per-class `(epsilon, mu)` overrides.
    pub per_class_overrides: Vec<(ClassLabel, f64, usize)>,
    pub boundary_constraint: bool,
    pub boundary_radius: f64,
}

impl Default for BfsParams {
    fn default() -> Self {
        BfsParams {
            epsilon: 0.04,
            mu_min_points: 200,
            per_class_overrides: vec![(ClassLabel::Cylinder, 0.03, 50)],
            boundary_constraint: true,
            boundary_radius: 0.04,
        }
    }
}

impl BfsParams {
    /// Preset for runs on ground-truth class labels (mu = 20).
    pub fn gt_preset() -> BfsParams {
        BfsParams {
            mu_min_points: 20,
            per_class_overrides: vec![(ClassLabel::Cylinder, 0.03, 20)],
            ..BfsParams::default()
        }
    }

    pub fn epsilon_for(&self, c: ClassLabel) -> f64 {
        self.per_class_overrides
            .iter()
            .find(|(cl, _, _)| *cl == c)
            .map(|(_, e, _)| *e)
            .unwrap_or(self.epsilon)
    }

    pub fn mu_for(&self, c: ClassLabel) -> usize {
        self.per_class_overrides
            .iter()
            .find(|(cl, _, _)| *cl == c)
            .map(|(_, _, m)| *m)
            .unwrap_or(self.mu_min_points)
    }

    pub fn validate(&self) -> Result<()> {
        for c in ALL_CLASSES {
            if !(self.epsilon_for(c) > 0.0) || self.mu_for(c) < 1 {
                return Err(Error::InvalidPartition(format!(
                    "class {}: need epsilon > 0 and mu >= 1",
                    c.name()
                )));
            }
        }
        Ok(())
    }
}

/// Which label channel defines a boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// More than one instance id (> 0) in the neighborhood.
    GtInstance,
    /// More than one class label in the neighborhood.
    PredictedClass,
}

/// Flags every point whose `r`-neighborhood spans more than one instance
/// (gt mode) or class (predicted mode).
pub fn detect_boundaries(
    cloud: &PointCloud,
    labeling: &Labeling,
    r: f64,
    mode: BoundaryMode,
) -> Result<Vec<bool>> {
    match mode {
        BoundaryMode::GtInstance => {
            if labeling.instance.iter().all(|&i| i == 0) && !labeling.is_empty() {
                return Err(Error::MissingLabels("instance"));
            }
        }
        BoundaryMode::PredictedClass => {
            if labeling.class.len() != cloud.len() {
                return Err(Error::MissingLabels("class"));
            }
        }
    }
    let index = build_index(cloud, None)?;
    Ok(exec::map_indices(cloud.len(), |i| {
        let neighbors = index.radius_neighbors_of(cloud, i, r).unwrap_or_default();
        match mode {
            BoundaryMode::GtInstance => {
                let mut seen = 0u32;
                for &j in &neighbors {
                    let id = labeling.instance[j as usize];
                    if id > 0 {
                        if seen == 0 {
                            seen = id;
                        } else if seen != id {
                            return true;
                        }
                    }
                }
                false
            }
            BoundaryMode::PredictedClass => {
                let first = labeling.class[i];
                neighbors
                    .iter()
                    .any(|&j| labeling.class[j as usize] != first)
            }
        }
    }))
}

/// Result of instance segmentation over a labeling.
#[derive(Debug, Clone)]
pub struct InstanceResult {
    pub labeling: Labeling,
    /// Points whose component fell below the class mu.
    pub discarded: usize,
    pub component_count: usize,
}

/// Connected components (sets of global indices) of one class, before
/// boundary attachment and size filtering.
#[derive(Debug, Clone)]
struct ClassComponents {
    class: ClassLabel,
    components: Vec<Vec<u32>>,
}

fn bfs_over_subset(cloud: &PointCloud, subset: &[u32], eps: f64) -> Vec<Vec<u32>> {
    if subset.is_empty() {
        return Vec::new();
    }
    let index = build_index(cloud, Some(subset)).expect("non-empty subset");
    let pos: HashMap<u32, usize> = subset.iter().enumerate().map(|(k, &g)| (g, k)).collect();
    let mut visited = vec![false; subset.len()];
    let mut components = Vec::new();
    for seed in 0..subset.len() {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut queue = std::collections::VecDeque::from([subset[seed]]);
        let mut comp = Vec::new();
        while let Some(g) = queue.pop_front() {
            comp.push(g);
            let neighbors = index
                .radius_neighbors_of(cloud, g as usize, eps)
                .unwrap_or_default();
            for &nb in &neighbors {
                let k = pos[&nb];
                if !visited[k] {
                    visited[k] = true;
                    queue.push_back(nb);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

fn class_traversal_sets(labeling: &Labeling, constraint: bool) -> Vec<(ClassLabel, Vec<u32>)> {
    let mut per_class: Vec<(ClassLabel, Vec<u32>)> =
        ALL_CLASSES.iter().map(|&c| (c, Vec::new())).collect();
    for (i, &c) in labeling.class.iter().enumerate() {
        if constraint && labeling.boundary[i] {
            continue;
        }
        per_class[c.code() as usize].1.push(i as u32);
    }
    per_class
}

/// Attaches each boundary point to the component of its nearest same-class
/// non-boundary neighbor within epsilon. Returns per-point component
/// assignment (usize::MAX = unassigned) given pre-attachment components.
fn attach_and_assign(
    cloud: &PointCloud,
    labeling: &Labeling,
    params: &BfsParams,
    all: &[ClassComponents],
) -> (Vec<usize>, Vec<Vec<u32>>) {
    // flatten components, remember membership
    let mut flat: Vec<Vec<u32>> = Vec::new();
    let mut assign = vec![usize::MAX; cloud.len()];
    for cc in all {
        for comp in &cc.components {
            let id = flat.len();
            for &g in comp {
                assign[g as usize] = id;
            }
            flat.push(comp.clone());
        }
    }
    if params.boundary_constraint {
        // per-class index over non-boundary assigned points
        for cc in all {
            let eps = params.epsilon_for(cc.class);
            let traversal: Vec<u32> = cc.components.iter().flatten().copied().collect();
            if traversal.is_empty() {
                continue;
            }
            let index = build_index(cloud, Some(&traversal)).expect("non-empty");
            let boundary_members: Vec<u32> = labeling
                .class
                .iter()
                .enumerate()
                .filter(|(i, &c)| c == cc.class && labeling.boundary[*i])
                .map(|(i, _)| i as u32)
                .collect();
            let attached: Vec<Option<usize>> = exec::map_slice(&boundary_members, |&g| {
                let p = &cloud.points[g as usize];
                let neighbors = index.radius_neighbors(p, eps).unwrap_or_default();
                neighbors
                    .iter()
                    .map(|&nb| (p.dist_sq(&cloud.points[nb as usize]), nb))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|(_, nb)| assign[nb as usize])
            });
            for (&g, a) in boundary_members.iter().zip(attached) {
                if let Some(id) = a {
                    assign[g as usize] = id;
                    flat[id].push(g);
                }
            }
        }
        for comp in flat.iter_mut() {
            comp.sort_unstable();
        }
    }
    (assign, flat)
}

fn filter_and_canonicalize(
    labeling: &Labeling,
    params: &BfsParams,
    assign: &[usize],
    flat: &[Vec<u32>],
) -> InstanceResult {
    let keep: Vec<bool> = flat
        .iter()
        .map(|comp| {
            if comp.is_empty() {
                return false;
            }
            let class = labeling.class[comp[0] as usize];
            comp.len() >= params.mu_for(class)
        })
        .collect();
    // canonical ids: 1..K ordered by each kept component's minimum index
    let mut kept: Vec<(u32, usize)> = flat
        .iter()
        .enumerate()
        .filter(|(id, _)| keep[*id])
        .map(|(id, comp)| (comp[0], id))
        .collect();
    kept.sort_unstable();
    let mut canonical = vec![0u32; flat.len()];
    for (rank, &(_, id)) in kept.iter().enumerate() {
        canonical[id] = rank as u32 + 1;
    }
    let mut out = labeling.clone();
    let mut discarded = 0;
    for (i, &a) in assign.iter().enumerate() {
        if a == usize::MAX {
            out.instance[i] = 0;
        } else if keep[a] {
            out.instance[i] = canonical[a];
        } else {
            out.instance[i] = 0;
            discarded += 1;
        }
    }
    InstanceResult {
        labeling: out,
        discarded,
        component_count: kept.len(),
    }
}

/// Whole-cloud BFS instance segmentation (Process 2 over one point set).
pub fn bfs_components(
    cloud: &PointCloud,
    labeling: &Labeling,
    params: &BfsParams,
) -> Result<InstanceResult> {
    params.validate()?;
    let sets = class_traversal_sets(labeling, params.boundary_constraint);
    let all: Vec<ClassComponents> = exec::map_slice(&sets, |(class, subset)| ClassComponents {
        class: *class,
        components: bfs_over_subset(cloud, subset, params.epsilon_for(*class)),
    });
    let (assign, flat) = attach_and_assign(cloud, labeling, params, &all);
    Ok(filter_and_canonicalize(labeling, params, &assign, &flat))
}

/// Per-block BFS output: class components restricted to one block.
#[derive(Debug, Clone)]
pub struct BlockComponents {
    pub block_id: usize,
    pub components: Vec<(ClassLabel, Vec<u32>)>,
}

/// Runs per-class BFS restricted to the points of one block. Boundary points
/// are excluded when the constraint is on, exactly as in the whole-cloud path.
pub fn bfs_block(
    cloud: &PointCloud,
    labeling: &Labeling,
    params: &BfsParams,
    block_id: usize,
    block_indices: &[u32],
) -> BlockComponents {
    let mut per_class: Vec<(ClassLabel, Vec<u32>)> =
        ALL_CLASSES.iter().map(|&c| (c, Vec::new())).collect();
    for &g in block_indices {
        let i = g as usize;
        if params.boundary_constraint && labeling.boundary[i] {
            continue;
        }
        per_class[labeling.class[i].code() as usize].1.push(g);
    }
    let mut components = Vec::new();
    for (class, subset) in per_class {
        for comp in bfs_over_subset(cloud, &subset, params.epsilon_for(class)) {
            components.push((class, comp));
        }
    }
    BlockComponents {
        block_id,
        components,
    }
}

/// Merges per-block components: two block-local components merge iff they
/// share a global point and agree on class. Boundary attachment and the mu
/// filter run after the merge.
pub fn merge_blocks(
    cloud: &PointCloud,
    labeling: &Labeling,
    params: &BfsParams,
    blocks: &[BlockComponents],
) -> Result<InstanceResult> {
    params.validate()?;
    let n = cloud.len();
    let mut uf = UnionFind::new(n);
    let mut point_class: Vec<Option<ClassLabel>> = vec![None; n];
    for bc in blocks {
        for (class, comp) in &bc.components {
            for &g in comp {
                match point_class[g as usize] {
                    None => point_class[g as usize] = Some(*class),
                    Some(prev) if prev != *class => {
                        return Err(Error::LabelConflict { index: g as usize })
                    }
                    _ => {}
                }
            }
            for pair in comp.windows(2) {
                uf.union(pair[0], pair[1]);
            }
        }
    }
    // group merged traversal points by root, per class
    let mut comp_of_root: HashMap<u32, usize> = HashMap::new();
    let mut grouped: Vec<(ClassLabel, Vec<u32>)> = Vec::new();
    for g in 0..n as u32 {
        let Some(class) = point_class[g as usize] else {
            continue;
        };
        let root = uf.find(g);
        let slot = *comp_of_root.entry(root).or_insert_with(|| {
            grouped.push((class, Vec::new()));
            grouped.len() - 1
        });
        grouped[slot].1.push(g);
    }
    let mut by_class: Vec<ClassComponents> = ALL_CLASSES
        .iter()
        .map(|&c| ClassComponents {
            class: c,
            components: Vec::new(),
        })
        .collect();
    for (class, comp) in grouped {
        by_class[class.code() as usize].components.push(comp);
    }
    let (assign, flat) = attach_and_assign(cloud, labeling, params, &by_class);
    Ok(filter_and_canonicalize(labeling, params, &assign, &flat))
}

/// Renumbers instance ids to 1..K ordered by each instance's minimum global
/// point index; output is independent of input id order.
pub fn canonicalize_ids(labeling: &Labeling) -> Labeling {
    let mut first_seen: HashMap<u32, u32> = HashMap::new();
    for (i, &id) in labeling.instance.iter().enumerate() {
        if id > 0 {
            first_seen.entry(id).or_insert(i as u32);
        }
    }
    let mut order: Vec<(u32, u32)> = first_seen.into_iter().map(|(id, min)| (min, id)).collect();
    order.sort_unstable();
    let remap: HashMap<u32, u32> = order
        .into_iter()
        .enumerate()
        .map(|(rank, (_, id))| (id, rank as u32 + 1))
        .collect();
    let mut out = labeling.clone();
    for inst in out.instance.iter_mut() {
        if *inst > 0 {
            *inst = remap[inst];
        }
    }
    out
}

/// One point of the mu sweep curve.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MuSweepPoint {
    pub mu: usize,
    pub report: EvalReport,
}

/// Re-runs the size filter for each mu value (components are computed once)
/// and evaluates against ground truth at a fixed IoU threshold.
pub fn sweep_mu(
    cloud: &PointCloud,
    labeling: &Labeling,
    params: &BfsParams,
    mu_values: &[usize],
    gt: &Labeling,
    eval: &EvalParams,
) -> Result<Vec<MuSweepPoint>> {
    if mu_values.is_empty() {
        return Err(Error::InvalidSweep);
    }
    params.validate()?;
    let sets = class_traversal_sets(labeling, params.boundary_constraint);
    let all: Vec<ClassComponents> = exec::map_slice(&sets, |(class, subset)| ClassComponents {
        class: *class,
        components: bfs_over_subset(cloud, subset, params.epsilon_for(*class)),
    });
    let (assign, flat) = attach_and_assign(cloud, labeling, params, &all);
    let mut curve = Vec::with_capacity(mu_values.len());
    for &mu in mu_values {
        let scaled = BfsParams {
            mu_min_points: mu,
            per_class_overrides: params
                .per_class_overrides
                .iter()
                .map(|&(c, e, _)| (c, e, mu))
                .collect(),
            ..params.clone()
        };
        let result = filter_and_canonicalize(labeling, &scaled, &assign, &flat);
        let report = evaluate::match_instances(&result.labeling, gt, eval)?;
        curve.push(MuSweepPoint { mu, report });
    }
    Ok(curve)
}
