//! The bounded world, ray-cast LiDAR, obstacle detection, the bounded-noise
//! localization oracle, and random scenario placement.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::{Obstacle, ReferencePath};
use crate::dynamics::Pose;
use crate::error::{Error, Result};

pub const LIDAR_RAYS: usize = 360;
pub const LIDAR_MIN_RANGE: f64 = 0.12;
pub const LIDAR_MAX_RANGE: f64 = 3.6;

/// Returns closer than this to a known wall are attributed to the wall.
pub const WALL_DISCARD: f64 = 0.05;
/// Adjacent returns further apart than this start a new cluster.
pub const CLUSTER_GAP: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldMap {
    pub width: f64,
    pub height: f64,
    pub obstacles: Vec<Obstacle>,
    pub robot_radius: f64,
}

impl Default for WorldMap {
    fn default() -> Self {
        WorldMap {
            width: 5.0,
            height: 5.0,
            obstacles: Vec::new(),
            robot_radius: 0.11,
        }
    }
}

impl WorldMap {
    pub fn new(width: f64, height: f64, obstacles: Vec<Obstacle>, robot_radius: f64) -> Result<Self> {
        let w = WorldMap {
            width,
            height,
            obstacles,
            robot_radius,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0 && self.robot_radius >= 0.0) {
            return Err(Error::Config("world dimensions must be positive".into()));
        }
        for o in &self.obstacles {
            if !(o.radius > 0.0)
                || o.x - o.radius <= 0.0
                || o.y - o.radius <= 0.0
                || o.x + o.radius >= self.width
                || o.y + o.radius >= self.height
            {
                return Err(Error::Config(format!(
                    "obstacle at ({}, {}) r={} is not strictly inside the walls",
                    o.x, o.y, o.radius
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= self.width && y <= self.height
    }

    pub fn distance_to_walls(&self, x: f64, y: f64) -> f64 {
        x.min(y).min(self.width - x).min(self.height - y)
    }

    /// True when the robot footprint at `(x, y)` touches a wall or obstacle.
    pub fn in_collision(&self, x: f64, y: f64) -> bool {
        self.distance_to_walls(x, y) < self.robot_radius
            || self
                .obstacles
                .iter()
                .any(|o| o.clearance(x, y) < self.robot_radius)
    }

    /// Smallest distance from the robot centre to any surface.
    pub fn clearance(&self, x: f64, y: f64) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.clearance(x, y))
            .fold(self.distance_to_walls(x, y), f64::min)
    }
}

/// One reading per degree, counterclockwise from the robot's heading.
#[derive(Clone, Debug, PartialEq)]
pub struct LidarScan {
    pub ranges: Vec<Option<f64>>,
}

impl LidarScan {
    pub fn ray_angle(i: usize) -> f64 {
        (i as f64).to_radians()
    }

    pub fn returns(&self) -> usize {
        self.ranges.iter().filter(|r| r.is_some()).count()
    }
}

/// Nearest positive hit of the ray `p + t·d` with the walls of `world`.
fn ray_walls(p: [f64; 2], d: [f64; 2], world: &WorldMap) -> f64 {
    let mut best = f64::INFINITY;
    for (pos, dir, lim) in [(p[0], d[0], world.width), (p[1], d[1], world.height)] {
        if dir > 0.0 {
            best = best.min((lim - pos) / dir);
        } else if dir < 0.0 {
            best = best.min(-pos / dir);
        }
    }
    best
}

/// Nearest positive hit of the ray with a circle.
fn ray_circle(p: [f64; 2], d: [f64; 2], o: &Obstacle) -> Option<f64> {
    let f = [p[0] - o.x, p[1] - o.y];
    let b = f[0] * d[0] + f[1] * d[1];
    let c = f[0] * f[0] + f[1] * f[1] - o.radius * o.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // stable root pair
    let q = -b - sq.copysign(b);
    let (t1, t2) = if q != 0.0 { (q, c / q) } else { (-b, -b) };
    let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
    if lo > 0.0 {
        Some(lo)
    } else if hi > 0.0 {
        Some(hi)
    } else {
        None
    }
}

pub fn raycast_scan(true_pose: &Pose, world: &WorldMap) -> Result<LidarScan> {
    if !world.contains(true_pose.x, true_pose.y) {
        return Err(Error::PoseOutOfBounds {
            x: true_pose.x,
            y: true_pose.y,
        });
    }
    let p = [true_pose.x, true_pose.y];
    let ranges = (0..LIDAR_RAYS)
        .map(|i| {
            let a = true_pose.theta + LidarScan::ray_angle(i);
            let d = [a.cos(), a.sin()];
            let hit = world
                .obstacles
                .iter()
                .filter_map(|o| ray_circle(p, d, o))
                .fold(ray_walls(p, d, world), f64::min);
            (LIDAR_MIN_RANGE..=LIDAR_MAX_RANGE).contains(&hit).then_some(hit)
        })
        .collect();
    Ok(LidarScan { ranges })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizationEstimate {
    pub pose: Pose,
    /// Half-widths in x, y (metres) and θ (radians).
    pub uncertainty: [f64; 3],
}

impl LocalizationEstimate {
    pub fn exact(pose: Pose) -> Self {
        LocalizationEstimate {
            pose,
            uncertainty: [0.0; 3],
        }
    }

    pub fn contains(&self, pose: &Pose) -> bool {
        (pose.x - self.pose.x).abs() <= self.uncertainty[0]
            && (pose.y - self.pose.y).abs() <= self.uncertainty[1]
            && (pose.theta - self.pose.theta).abs() <= self.uncertainty[2]
    }
}

/// Seeded stream of bounded uniform localization noise.
#[derive(Clone, Debug)]
pub struct Localizer {
    halfwidths: [f64; 3],
    rng: ChaCha8Rng,
}

impl Localizer {
    pub fn new(halfwidths: [f64; 3], seed: u64) -> Self {
        Localizer {
            halfwidths,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The estimate keeps the true heading's winding so that the containment
    /// check is a plain componentwise comparison.
    pub fn localize(&mut self, true_pose: &Pose) -> LocalizationEstimate {
        let mut noise = [0.0; 3];
        for (n, &h) in noise.iter_mut().zip(&self.halfwidths) {
            if h > 0.0 {
                *n = self.rng.gen_range(-h..=h);
            }
        }
        LocalizationEstimate {
            pose: Pose::new(
                true_pose.x + noise[0],
                true_pose.y + noise[1],
                true_pose.theta + noise[2],
            ),
            uncertainty: self.halfwidths,
        }
    }
}

/// One-shot form of [`Localizer::localize`].
pub fn localize(true_pose: &Pose, halfwidths: [f64; 3], seed: u64) -> LocalizationEstimate {
    Localizer::new(halfwidths, seed).localize(true_pose)
}

/// Algebraic least-squares circle `x² + y² + Dx + Ey + F = 0`.
fn fit_circle(points: &[[f64; 2]]) -> Option<([f64; 2], f64)> {
    if points.len() < 3 {
        return None;
    }
    // centre the data for conditioning
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for p in points {
        let (x, y) = (p[0] - mx, p[1] - my);
        let row = [x, y, 1.0];
        let z = -(x * x + y * y);
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * z;
        }
    }
    let sol = solve3(a, rhs)?;
    let c = [-sol[0] / 2.0, -sol[1] / 2.0];
    let r2 = c[0] * c[0] + c[1] * c[1] - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    Some(([c[0] + mx, c[1] + my], r2.sqrt()))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for k in col..3 {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s = (r + 1..3).fold(b[r], |s, k| s - a[r][k] * x[k]);
        x[r] = s / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Smallest circle containing all points (Welzl, iterative form).
pub fn minimal_enclosing_circle(points: &[[f64; 2]]) -> ([f64; 2], f64) {
    let inside = |c: [f64; 2], r: f64, p: [f64; 2]| (p[0] - c[0]).hypot(p[1] - c[1]) <= r * (1.0 + 1e-12) + 1e-12;
    let two = |a: [f64; 2], b: [f64; 2]| {
        let c = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        (c, (a[0] - c[0]).hypot(a[1] - c[1]))
    };
    let three = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        if d.abs() < 1e-15 {
            // collinear: the widest pair
            let cands = [two(a, b), two(a, c), two(b, c)];
            return cands.into_iter().fold(cands[0], |m, x| if x.1 > m.1 { x } else { m });
        }
        let sa = a[0] * a[0] + a[1] * a[1];
        let sb = b[0] * b[0] + b[1] * b[1];
        let sc = c[0] * c[0] + c[1] * c[1];
        let ux = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d;
        let uy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d;
        ([ux, uy], (a[0] - ux).hypot(a[1] - uy))
    };
    match points.len() {
        0 => return ([0.0, 0.0], 0.0),
        1 => return (points[0], 0.0),
        _ => {}
    }
    let mut c = points[0];
    let mut r = 0.0;
    for i in 1..points.len() {
        if inside(c, r, points[i]) {
            continue;
        }
        (c, r) = (points[i], 0.0);
        for j in 0..i {
            if inside(c, r, points[j]) {
                continue;
            }
            (c, r) = two(points[i], points[j]);
            for k in 0..j {
                if !inside(c, r, points[k]) {
                    (c, r) = three(points[i], points[j], points[k]);
                }
            }
        }
    }
    (c, r)
}

/// Smallest radius accepted for a cluster that cannot be fitted reliably.
const FALLBACK_MIN_RADIUS: f64 = 0.15;
/// Fits wider than this are treated as unreliable (near-straight clusters).
const MAX_FIT_RADIUS: f64 = 1.0;

/// Converts a scan to obstacle circles in the world frame.
///
/// Each cluster is fitted with an algebraic circle; the arc seen by the
/// sensor is only the near side of the obstacle, so its minimal enclosing
/// circle would underestimate it. The fitted circle is then inflated by the
/// displacement that the localization uncertainty can cause at the cluster's
/// distance.
pub fn detect_obstacles(scan: &LidarScan, estimate: &LocalizationEstimate, world: &WorldMap) -> Vec<Obstacle> {
    let pose = estimate.pose;
    let [ux, uy, ut] = estimate.uncertainty;
    let pos_unc = ux.hypot(uy);
    // wall returns can be displaced by the pose error too
    let mut points: Vec<Option<[f64; 2]>> = Vec::with_capacity(scan.ranges.len());
    for (i, r) in scan.ranges.iter().enumerate() {
        let p = r.and_then(|r| {
            let a = pose.theta + LidarScan::ray_angle(i);
            let q = [pose.x + r * a.cos(), pose.y + r * a.sin()];
            let margin = WALL_DISCARD + pos_unc + r * ut;
            (world.distance_to_walls(q[0], q[1]) > margin).then_some(q)
        });
        points.push(p);
    }

    let n = points.len();
    let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]) <= CLUSTER_GAP;
    // start at a break so that a cluster spanning ray 0 stays whole
    let start = (0..n)
        .find(|&i| match (points[(i + n - 1) % n], points[i]) {
            (Some(a), Some(b)) => !close(a, b),
            _ => true,
        });
    let Some(start) = start else {
        // every return chains into one ring
        let ring: Vec<[f64; 2]> = points.iter().flatten().copied().collect();
        return cluster_to_obstacle(&ring, &pose, pos_unc, ut).into_iter().collect();
    };
    let mut clusters: Vec<Vec<[f64; 2]>> = Vec::new();
    let mut current: Vec<[f64; 2]> = Vec::new();
    for k in 0..n {
        let i = (start + k) % n;
        match points[i] {
            Some(p) => {
                if let Some(&last) = current.last() {
                    if !close(last, p) {
                        clusters.push(std::mem::take(&mut current));
                    }
                }
                current.push(p);
            }
            None => {
                if !current.is_empty() {
                    clusters.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        clusters.push(current);
    }
    // grazing rays can split one obstacle; merge clusters whose circles overlap
    let mut fitted: Vec<(Vec<[f64; 2]>, Obstacle)> = clusters
        .into_iter()
        .filter_map(|c| cluster_to_obstacle(&c, &pose, pos_unc, ut).map(|o| (c, o)))
        .collect();
    'merge: loop {
        for i in 0..fitted.len() {
            for j in i + 1..fitted.len() {
                let (a, b) = (fitted[i].1, fitted[j].1);
                if (a.x - b.x).hypot(a.y - b.y) < a.radius + b.radius {
                    let (pts, _) = fitted.swap_remove(j);
                    fitted[i].0.extend(pts);
                    if let Some(o) = cluster_to_obstacle(&fitted[i].0, &pose, pos_unc, ut) {
                        fitted[i].1 = o;
                    }
                    continue 'merge;
                }
            }
        }
        break;
    }
    fitted.into_iter().map(|(_, o)| o).collect()
}

fn cluster_to_obstacle(points: &[[f64; 2]], pose: &Pose, pos_unc: f64, ut: f64) -> Option<Obstacle> {
    if points.is_empty() {
        return None;
    }
    let fitted = fit_circle(points).filter(|(c, r)| {
        // the centre must sit behind the visible arc
        let near = points
            .iter()
            .map(|p| (p[0] - pose.x).hypot(p[1] - pose.y))
            .fold(f64::INFINITY, f64::min);
        *r <= MAX_FIT_RADIUS && (c[0] - pose.x).hypot(c[1] - pose.y) > near
    });
    let (center, radius) = match fitted {
        Some((c, r)) => {
            let spread = points
                .iter()
                .map(|p| (p[0] - c[0]).hypot(p[1] - c[1]))
                .fold(r, f64::max);
            (c, spread)
        }
        None => {
            let (c, r) = minimal_enclosing_circle(points);
            (c, r.max(FALLBACK_MIN_RADIUS))
        }
    };
    let range = (center[0] - pose.x).hypot(center[1] - pose.y);
    let inflate = pos_unc + range * ut + 1e-6;
    Some(Obstacle {
        x: center[0],
        y: center[1],
        radius: radius + inflate,
    })
}

/// Parameters for random obstacle placement along the reference path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomObstacles {
    pub count: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Arc-length window of the path where centres may be placed.
    pub s_min: f64,
    pub s_max: f64,
    /// Maximum sideways offset of a centre from the path.
    pub lateral: f64,
    /// Minimum arc-length separation between consecutive obstacles.
    pub spacing: f64,
}

impl Default for RandomObstacles {
    fn default() -> Self {
        RandomObstacles {
            count: 1,
            radius_min: 0.15,
            radius_max: 0.4,
            s_min: 1.3,
            s_max: 5.0,
            lateral: 0.1,
            spacing: 1.4,
        }
    }
}

/// Draws obstacles on the path corridor. Placement retries until the
/// obstacles are separated and clear of the walls by the robot diameter.
pub fn random_obstacles(path: &ReferencePath, params: &RandomObstacles, world: &WorldMap, seed: u64) -> Result<Vec<Obstacle>> {
    if params.radius_min <= 0.0 || params.radius_max < params.radius_min || params.s_max <= params.s_min {
        return Err(Error::Config("invalid random obstacle parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wall_gap = 2.0 * world.robot_radius + 0.1;
    for _ in 0..1000 {
        let mut s: Vec<f64> = (0..params.count)
            .map(|_| rng.gen_range(params.s_min..=params.s_max))
            .collect();
        s.sort_by(f64::total_cmp);
        if s.windows(2).any(|w| w[1] - w[0] < params.spacing) {
            continue;
        }
        let mut out = Vec::new();
        for &si in &s {
            let p = path.point_at(si);
            let t = path.tangent_at(si);
            let off = if params.lateral > 0.0 {
                rng.gen_range(-params.lateral..=params.lateral)
            } else {
                0.0
            };
            let r = rng.gen_range(params.radius_min..=params.radius_max);
            out.push(Obstacle {
                x: p[0] - t[1] * off,
                y: p[1] + t[0] * off,
                radius: r,
            });
        }
        let clear_walls = out
            .iter()
            .all(|o| world.distance_to_walls(o.x, o.y) - o.radius > wall_gap);
        if clear_walls {
            return Ok(out);
        }
    }
    Err(Error::Config("could not place random obstacles".into()))
}

/// Angle subtended by ray index `i` (for plotting).
pub fn ray_direction(pose: &Pose, i: usize) -> f64 {
    (pose.theta + LidarScan::ray_angle(i)).rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::LeftTurnPath;

    #[test]
    fn scan_examples() {
        let empty = WorldMap::default();
        let s = raycast_scan(&Pose::new(2.5, 2.5, 0.0), &empty).unwrap();
        assert!((s.ranges[0].unwrap() - 2.5).abs() < 1e-12);
        let s = raycast_scan(&Pose::new(0.5, 2.5, 0.0), &empty).unwrap();
        assert!((s.ranges[180].unwrap() - 0.5).abs() < 1e-12);
        let w = WorldMap::new(5.0, 5.0, vec![Obstacle::new(2.3, 0.3, 0.5).unwrap()], 0.11);
        // obstacle touches the wall; use the unchecked form
        let w = w.unwrap_or(WorldMap {
            obstacles: vec![Obstacle { x: 2.3, y: 0.3, radius: 0.5 }],
            ..WorldMap::default()
        });
        let s = raycast_scan(&Pose::new(0.3, 0.3, 0.0), &w).unwrap();
        assert!((s.ranges[0].unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn scan_rejects_outside_pose() {
        assert!(matches!(
            raycast_scan(&Pose::new(6.0, 1.0, 0.0), &WorldMap::default()),
            Err(Error::PoseOutOfBounds { .. })
        ));
    }

    #[test]
    fn scan_matches_brute_force_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let world = WorldMap::new(
            5.0,
            5.0,
            vec![Obstacle::new(2.0, 2.0, 0.4).unwrap(), Obstacle::new(3.5, 3.0, 0.2).unwrap()],
            0.11,
        )
        .unwrap();
        for _ in 0..50 {
            let pose = Pose::new(rng.gen_range(0.2..4.8), rng.gen_range(0.2..4.8), rng.gen_range(-PI..PI));
            if world.obstacles.iter().any(|o| o.clearance(pose.x, pose.y) <= 0.0) {
                continue;
            }
            let scan = raycast_scan(&pose, &world).unwrap();
            for (i, r) in scan.ranges.iter().enumerate() {
                let Some(r) = r else { continue };
                let a = pose.theta + LidarScan::ray_angle(i);
                let hit = [pose.x + r * a.cos(), pose.y + r * a.sin()];
                // the hit point lies on some surface
                let on_surface = world.distance_to_walls(hit[0], hit[1]).abs() < 1e-9
                    || world.obstacles.iter().any(|o| o.clearance(hit[0], hit[1]).abs() < 1e-9);
                assert!(on_surface, "ray {i} at {r}");
                // and nothing is hit earlier: march the open segment
                for k in 1..200 {
                    let t = r * k as f64 / 200.0;
                    let q = [pose.x + t * a.cos(), pose.y + t * a.sin()];
                    assert!(world.clearance(q[0], q[1]) > -1e-9);
                }
            }
        }
    }

    #[test]
    fn localization_is_bounded_and_reproducible() {
        let truth = Pose::new(1.0, 2.0, 0.5);
        assert_eq!(localize(&truth, [0.0; 3], 9).pose, truth);
        let mut a = Localizer::new([0.01; 3], 4);
        let mut b = Localizer::new([0.01; 3], 4);
        for _ in 0..1000 {
            let ea = a.localize(&truth);
            assert!(ea.contains(&truth));
            assert_eq!(ea, b.localize(&truth));
        }
    }

    #[test]
    fn empty_and_far_worlds_detect_nothing() {
        let world = WorldMap::default();
        let pose = Pose::new(2.5, 2.5, 0.3);
        let scan = raycast_scan(&pose, &world).unwrap();
        assert!(detect_obstacles(&scan, &LocalizationEstimate::exact(pose), &world).is_empty());
        let far = WorldMap::new(5.0, 5.0, vec![Obstacle::new(4.5, 4.5, 0.2).unwrap()], 0.11).unwrap();
        let pose = Pose::new(0.6, 0.6, 0.0);
        let scan = raycast_scan(&pose, &far).unwrap();
        assert!(detect_obstacles(&scan, &LocalizationEstimate::exact(pose), &far).is_empty());
    }

    #[test]
    fn detection_locates_and_encloses_obstacles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut loc = Localizer::new([0.01, 0.01, 0.01], 5);
        let mut trials = 0;
        while trials < 300 {
            let o = Obstacle::new(rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0), rng.gen_range(0.15..0.4)).unwrap();
            let pose = Pose::new(rng.gen_range(0.3..4.7), rng.gen_range(0.3..4.7), rng.gen_range(-PI..PI));
            let dist = pose.distance_to(o.x, o.y);
            if dist < o.radius + 0.2 || dist > 3.0 {
                continue;
            }
            trials += 1;
            let world = WorldMap::new(5.0, 5.0, vec![o], 0.11).unwrap();
            let scan = raycast_scan(&pose, &world).unwrap();
            let est = loc.localize(&pose);
            let found = detect_obstacles(&scan, &est, &world);
            assert_eq!(found.len(), 1, "{o:?} from {pose:?}: {found:?}");
            let d = found[0];
            let unc = 0.01f64.hypot(0.01) + dist * 0.01;
            assert!((d.x - o.x).hypot(d.y - o.y) <= 0.1);
            assert!(d.radius >= o.radius - 0.05 && d.radius <= o.radius + unc + 0.1, "{d:?} vs {o:?}");
            // containment of the true disk
            assert!((d.x - o.x).hypot(d.y - o.y) + o.radius <= d.radius + 1e-9, "{d:?} misses {o:?}");
        }
    }

    #[test]
    fn mec_of_square() {
        let (c, r) = minimal_enclosing_circle(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]]);
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn random_scenarios_are_valid_and_seeded() {
        let path = ReferencePath::left_turn(&LeftTurnPath::default()).unwrap();
        let world = WorldMap::default();
        for seed in 0..50 {
            let p = RandomObstacles {
                count: 3,
                ..RandomObstacles::default()
            };
            let obs = random_obstacles(&path, &p, &world, seed).unwrap();
            assert_eq!(obs.len(), 3);
            assert!(obs.iter().all(|o| (0.15..=0.4).contains(&o.radius)));
            WorldMap::new(5.0, 5.0, obs.clone(), 0.11).unwrap();
            assert_eq!(obs, random_obstacles(&path, &p, &world, seed).unwrap());
        }
    }
}
