//! Deterministic synthetic scene generator with exact ground-truth class,
//! instance and boundary labels. Surfaces (not volumes) are sampled, since
//! laser scanners only see surfaces; sample counts follow `density * area`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::instance::{detect_boundaries, BoundaryMode};
use crate::labels::{ClassLabel, Labeling};

/// Analytic surface primitives, sized in meters. Local frames: extrusions and
/// cylinder axes run along +z from the origin; the elbow bends in the xz
/// plane.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Cylinder { radius: f64, length: f64 },
    /// Quarter torus.
    Elbow { major_radius: f64, tube_radius: f64 },
    /// C cross-section (web depth, two flange widths) extruded.
    Channel { depth: f64, flange: f64, length: f64 },
    /// I cross-section (web depth, two flange widths) extruded.
    IBeam { depth: f64, flange: f64, length: f64 },
    /// L cross-section extruded.
    Angle { leg_a: f64, leg_b: f64, length: f64 },
    /// Annular disk plus a short rim cylinder.
    Flange { outer_radius: f64, inner_radius: f64, thickness: f64 },
    /// Pipe stub + two end disks + spherical body.
    Valve { body_radius: f64, pipe_radius: f64, pipe_length: f64 },
}

impl Shape {
    pub fn class(&self) -> ClassLabel {
        match self {
            Shape::Cylinder { .. } => ClassLabel::Cylinder,
            Shape::Elbow { .. } => ClassLabel::Elbow,
            Shape::Channel { .. } => ClassLabel::Channel,
            Shape::IBeam { .. } => ClassLabel::IBeam,
            Shape::Angle { .. } => ClassLabel::Angle,
            Shape::Flange { .. } => ClassLabel::Flange,
            Shape::Valve { .. } => ClassLabel::Valve,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Cylinder { radius, length } => radius > 0.0 && length > 0.0,
            Shape::Elbow {
                major_radius,
                tube_radius,
            } => major_radius > tube_radius && tube_radius > 0.0,
            Shape::Channel { depth, flange, length }
            | Shape::IBeam { depth, flange, length } => {
                depth > 0.0 && flange > 0.0 && length > 0.0
            }
            Shape::Angle { leg_a, leg_b, length } => leg_a > 0.0 && leg_b > 0.0 && length > 0.0,
            Shape::Flange {
                outer_radius,
                inner_radius,
                thickness,
            } => outer_radius > inner_radius && inner_radius >= 0.0 && thickness > 0.0,
            Shape::Valve {
                body_radius,
                pipe_radius,
                pipe_length,
            } => body_radius > pipe_radius && pipe_radius > 0.0 && pipe_length > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPrimitive(format!("{self:?}")))
        }
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Shape::Cylinder { radius, length } => TAU * radius * length,
            Shape::Elbow {
                major_radius,
                tube_radius,
            } => PI * PI * major_radius * tube_radius, // quarter of 4 pi^2 R r
            Shape::Channel { depth, flange, length }
            | Shape::IBeam { depth, flange, length } => (depth + 2.0 * flange) * length,
            Shape::Angle { leg_a, leg_b, length } => (leg_a + leg_b) * length,
            Shape::Flange {
                outer_radius,
                inner_radius,
                thickness,
            } => {
                PI * (outer_radius * outer_radius - inner_radius * inner_radius)
                    + TAU * outer_radius * thickness
            }
            Shape::Valve {
                body_radius,
                pipe_radius,
                pipe_length,
            } => {
                TAU * pipe_radius * pipe_length
                    + 2.0 * PI * pipe_radius * pipe_radius
                    + 4.0 * PI * body_radius * body_radius
            }
        }
    }
}

/// Uniform surface sample of one primitive in its local frame.
pub fn sample_primitive(shape: &Shape, density: f64, seed: u64) -> Result<Vec<Point3>> {
    shape.validate()?;
    if !(density > 0.0) {
        return Err(Error::InvalidPrimitive("density must be positive".into()));
    }
    let n = (density * shape.surface_area()).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(sample_one(shape, &mut rng));
    }
    Ok(out)
}

fn sample_one(shape: &Shape, rng: &mut ChaCha8Rng) -> Point3 {
    match *shape {
        Shape::Cylinder { radius, length } => {
            let theta = rng.gen::<f64>() * TAU;
            Point3::new(
                radius * theta.cos(),
                radius * theta.sin(),
                rng.gen::<f64>() * length,
            )
        }
        Shape::Elbow {
            major_radius,
            tube_radius,
        } => {
            // rejection on the minor angle keeps the sampling area-uniform
            loop {
                let u = rng.gen::<f64>() * (PI / 2.0); // along the bend
                let v = rng.gen::<f64>() * TAU; // around the tube
                let w = (major_radius + tube_radius * v.cos()) / (major_radius + tube_radius);
                if rng.gen::<f64>() <= w {
                    let ring = major_radius + tube_radius * v.cos();
                    return Point3::new(
                        ring * u.cos(),
                        tube_radius * v.sin(),
                        ring * u.sin(),
                    );
                }
            }
        }
        Shape::Channel { depth, flange, length } => {
            extruded_polyline(
                &[
                    // C: open side faces +x
                    (flange, depth / 2.0),
                    (0.0, depth / 2.0),
                    (0.0, -depth / 2.0),
                    (flange, -depth / 2.0),
                ],
                length,
                rng,
            )
        }
        Shape::IBeam { depth, flange, length } => {
            // three independent strips: two flanges and the web
            let total = depth + 2.0 * flange;
            let u = rng.gen::<f64>() * total;
            let z = rng.gen::<f64>() * length;
            if u < flange {
                Point3::new(u - flange / 2.0, depth / 2.0, z)
            } else if u < 2.0 * flange {
                Point3::new(u - 1.5 * flange, -depth / 2.0, z)
            } else {
                Point3::new(0.0, u - 2.0 * flange - depth / 2.0, z)
            }
        }
        Shape::Angle { leg_a, leg_b, length } => extruded_polyline(
            &[(leg_a, 0.0), (0.0, 0.0), (0.0, leg_b)],
            length,
            rng,
        ),
        Shape::Flange {
            outer_radius,
            inner_radius,
            thickness,
        } => {
            let disk = PI * (outer_radius * outer_radius - inner_radius * inner_radius);
            let rim = TAU * outer_radius * thickness;
            if rng.gen::<f64>() * (disk + rim) < disk {
                // area-uniform annulus
                let r = (inner_radius * inner_radius
                    + rng.gen::<f64>()
                        * (outer_radius * outer_radius - inner_radius * inner_radius))
                    .sqrt();
                let theta = rng.gen::<f64>() * TAU;
                Point3::new(r * theta.cos(), r * theta.sin(), 0.0)
            } else {
                let theta = rng.gen::<f64>() * TAU;
                Point3::new(
                    outer_radius * theta.cos(),
                    outer_radius * theta.sin(),
                    rng.gen::<f64>() * thickness,
                )
            }
        }
        Shape::Valve {
            body_radius,
            pipe_radius,
            pipe_length,
        } => {
            let pipe = TAU * pipe_radius * pipe_length;
            let disks = 2.0 * PI * pipe_radius * pipe_radius;
            let sphere = 4.0 * PI * body_radius * body_radius;
            let pick = rng.gen::<f64>() * (pipe + disks + sphere);
            if pick < pipe {
                let theta = rng.gen::<f64>() * TAU;
                Point3::new(
                    pipe_radius * theta.cos(),
                    pipe_radius * theta.sin(),
                    rng.gen::<f64>() * pipe_length,
                )
            } else if pick < pipe + disks {
                let z = if rng.gen::<bool>() { 0.0 } else { pipe_length };
                let r = pipe_radius * rng.gen::<f64>().sqrt();
                let theta = rng.gen::<f64>() * TAU;
                Point3::new(r * theta.cos(), r * theta.sin(), z)
            } else {
                // uniform sphere around the pipe midpoint
                let z = rng.gen::<f64>() * 2.0 - 1.0;
                let theta = rng.gen::<f64>() * TAU;
                let s = (1.0 - z * z).sqrt();
                Point3::new(
                    body_radius * s * theta.cos(),
                    body_radius * s * theta.sin(),
                    pipe_length / 2.0 + body_radius * z,
                )
            }
        }
    }
}

fn extruded_polyline(vertices: &[(f64, f64)], length: f64, rng: &mut ChaCha8Rng) -> Point3 {
    let seg_len: Vec<f64> = vertices
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            (dx * dx + dy * dy).sqrt()
        })
        .collect();
    let total: f64 = seg_len.iter().sum();
    let mut pick = rng.gen::<f64>() * total;
    let mut seg = 0;
    while seg + 1 < seg_len.len() && pick > seg_len[seg] {
        pick -= seg_len[seg];
        seg += 1;
    }
    let t = (pick / seg_len[seg]).clamp(0.0, 1.0);
    let (a, b) = (vertices[seg], vertices[seg + 1]);
    Point3::new(
        a.0 + t * (b.0 - a.0),
        a.1 + t * (b.1 - a.1),
        rng.gen::<f64>() * length,
    )
}

/// One placed object: shape in its local frame, yaw about +z, then
/// translation. Class is implied by the shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    #[serde(default)]
    pub center: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    pub density: f64,
}

/// Half-space occlusion cut: points with `dot(normal, p) > offset` are
/// removed, approximating a scan shadow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfSpaceCut {
    pub normal: [f64; 3],
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub occlusion: Vec<HalfSpaceCut>,
    /// Fraction of points dropped at random (scan sparsity).
    #[serde(default)]
    pub drop_fraction: f64,
    /// Scattered Other-class points added over the scene bounds.
    #[serde(default)]
    pub clutter_points: usize,
    /// Radius for the ground-truth boundary rule.
    #[serde(default = "default_boundary_radius")]
    pub boundary_radius: f64,
}

fn default_boundary_radius() -> f64 {
    0.04
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<SceneSpec> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Generated scene: cloud plus exact class / instance / boundary labels.
/// Instances are numbered 1..K in object-list order.
pub fn generate_scene(spec: &SceneSpec) -> Result<(PointCloud, Labeling)> {
    let mut points = Vec::new();
    let mut classes = Vec::new();
    let mut instances = Vec::new();
    for (obj_idx, obj) in spec.objects.iter().enumerate() {
        let seed = spec
            .seed
            .wrapping_add((obj_idx as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15));
        let local = sample_primitive(&obj.shape, obj.density, seed)?;
        let (sin, cos) = obj.yaw.sin_cos();
        for p in local {
            points.push(Point3::new(
                cos * p.x - sin * p.y + obj.center[0],
                sin * p.x + cos * p.y + obj.center[1],
                p.z + obj.center[2],
            ));
            classes.push(obj.shape.class());
            instances.push(obj_idx as u32 + 1);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0xA24BAED4963EE407));
    if spec.clutter_points > 0 {
        let bb = crate::geometry::Aabb::of_points(points.iter()).unwrap_or(
            crate::geometry::Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)),
        );
        for _ in 0..spec.clutter_points {
            points.push(Point3::new(
                bb.min.x + rng.gen::<f64>() * (bb.max.x - bb.min.x),
                bb.min.y + rng.gen::<f64>() * (bb.max.y - bb.min.y),
                bb.min.z + rng.gen::<f64>() * (bb.max.z - bb.min.z),
            ));
            classes.push(ClassLabel::Other);
            instances.push(0);
        }
    }
    if spec.noise_sigma > 0.0 {
        for p in points.iter_mut() {
            p.x += gaussian(&mut rng) * spec.noise_sigma;
            p.y += gaussian(&mut rng) * spec.noise_sigma;
            p.z += gaussian(&mut rng) * spec.noise_sigma;
        }
    }
    let mut kept = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let occluded = spec.occlusion.iter().any(|cut| {
            cut.normal[0] * p.x + cut.normal[1] * p.y + cut.normal[2] * p.z > cut.offset
        });
        let dropped = spec.drop_fraction > 0.0 && rng.gen::<f64>() < spec.drop_fraction;
        if !occluded && !dropped {
            kept.push(i);
        }
    }
    let cloud = PointCloud::new(kept.iter().map(|&i| points[i]).collect());
    let mut labeling = Labeling::empty(cloud.len());
    labeling.class = kept.iter().map(|&i| classes[i]).collect();
    labeling.instance = kept.iter().map(|&i| instances[i]).collect();
    if !cloud.is_empty() {
        labeling.boundary =
            detect_boundaries(&cloud, &labeling, spec.boundary_radius, BoundaryMode::GtInstance)?;
    }
    Ok((cloud, labeling))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}
