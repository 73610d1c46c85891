//! Closed-form ray intersections with the simulator's primitives.

use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    /// Unit length.
    pub dir: Vector3<f64>,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.dir * t
    }
}

/// Hits closer than this are ignored.
pub const MIN_HIT: f64 = 1e-9;

/// Horizontal plane `z = height`.
pub fn ray_plane(ray: &Ray, height: f64) -> Option<f64> {
    if ray.dir.z == 0.0 {
        return None;
    }
    let t = (height - ray.origin.z) / ray.dir.z;
    (t > MIN_HIT).then_some(t)
}

/// Axis-aligned box by slab intersection. Returns the entry distance, or the
/// exit distance when the origin is inside.
pub fn ray_box(ray: &Ray, min: &Vector3<f64>, max: &Vector3<f64>) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let (o, d) = (ray.origin[axis], ray.dir[axis]);
        if d == 0.0 {
            if o < min[axis] || o > max[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut t0, mut t1) = ((min[axis] - o) * inv, (max[axis] - o) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near > MIN_HIT {
        Some(t_near)
    } else if t_far > MIN_HIT {
        Some(t_far)
    } else {
        None
    }
}

/// Vertical capped cylinder with axis through `(center.x, center.y)`,
/// spanning `z_min..=z_max`.
pub fn ray_cylinder(
    ray: &Ray,
    center_x: f64,
    center_y: f64,
    radius: f64,
    z_min: f64,
    z_max: f64,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t > MIN_HIT && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };
    let ox = ray.origin.x - center_x;
    let oy = ray.origin.y - center_y;
    let (dx, dy) = (ray.dir.x, ray.dir.y);
    let a = dx * dx + dy * dy;
    if a > 0.0 {
        let b = ox * dx + oy * dy;
        let c = ox * ox + oy * oy - radius * radius;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // numerically stable pair of roots
            let q = if b >= 0.0 { -(b + sq) } else { -b + sq };
            let mut roots = [q / a, if q != 0.0 { c / q } else { q / a }];
            roots.sort_by(f64::total_cmp);
            for t in roots {
                let z = ray.origin.z + t * ray.dir.z;
                if z >= z_min && z <= z_max {
                    consider(t);
                }
            }
        }
    }
    if ray.dir.z != 0.0 {
        for cap in [z_min, z_max] {
            let t = (cap - ray.origin.z) / ray.dir.z;
            let (x, y) = (ox + t * dx, oy + t * dy);
            if x * x + y * y <= radius * radius {
                consider(t);
            }
        }
    }
    best
}

/// Distance from `p` to the surface of an axis-aligned box.
pub fn box_surface_distance(p: &Vector3<f64>, min: &Vector3<f64>, max: &Vector3<f64>) -> f64 {
    let mut outside = Vector3::zeros();
    let mut inside = f64::INFINITY;
    for axis in 0..3 {
        let below = min[axis] - p[axis];
        let above = p[axis] - max[axis];
        outside[axis] = below.max(above).max(0.0);
        inside = inside.min((p[axis] - min[axis]).min(max[axis] - p[axis]));
    }
    if outside.norm() > 0.0 {
        outside.norm()
    } else {
        inside.max(0.0)
    }
}

/// Distance from `p` to the surface of a vertical capped cylinder.
pub fn cylinder_surface_distance(
    p: &Vector3<f64>,
    center_x: f64,
    center_y: f64,
    radius: f64,
    z_min: f64,
    z_max: f64,
) -> f64 {
    let radial = (p.x - center_x).hypot(p.y - center_y) - radius;
    let axial = (z_min - p.z).max(p.z - z_max);
    if radial <= 0.0 && axial <= 0.0 {
        radial.max(axial).abs()
    } else {
        radial.max(0.0).hypot(axial.max(0.0))
    }
}
