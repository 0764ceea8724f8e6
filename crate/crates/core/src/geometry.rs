//! Obstacle scenes: discs inside an axis-aligned box.
//!
//! The computational domain is the box minus the union of the (closed) discs.
//! The damping collar hugs the outer boundary of the box, so the scene
//! invariants keep every disc well away from it. Ikawa's hypotheses (hull
//! disjointness for triples and `κL > N`) are checked exactly for discs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A point in the plane. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Principal curvature of the boundary circle.
    pub fn curvature(&self) -> f64 {
        1.0 / self.radius
    }

    /// Distance between the two bodies (negative when they overlap).
    pub fn gap(&self, other: &Disc) -> f64 {
        self.center.dist(other.center) - self.radius - other.radius
    }

    /// True when `p` lies in the closed disc.
    pub fn contains_closed(&self, p: Point) -> bool {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lower: Point,
    pub upper: Point,
}

impl BoxDomain {
    pub fn new(lower: Point, upper: Point) -> Self {
        Self { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper.x - self.lower.x
    }

    pub fn height(&self) -> f64 {
        self.upper.y - self.lower.y
    }

    pub fn contains_open(&self, p: Point) -> bool {
        p.x > self.lower.x && p.x < self.upper.x && p.y > self.lower.y && p.y < self.upper.y
    }

    /// Distance from an interior point to the boundary of the rectangle.
    /// Negative outside.
    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        (p.x - self.lower.x).min(self.upper.x - p.x).min(p.y - self.lower.y).min(self.upper.y - p.y)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.width().is_finite() && self.height().is_finite();
        if !ok || self.width() <= 0.0 || self.height() <= 0.0 {
            return Err(Error::InvalidScene(format!(
                "box must have positive width and height, got {} x {}",
                self.width(),
                self.height()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(rename = "box")]
    pub domain: BoxDomain,
    pub obstacles: Vec<Disc>,
    /// Width of the constant part of the damping collar.
    pub eps0: f64,
    /// Value of the damping function on the collar.
    pub amplitude: f64,
}

impl SceneConfig {
    /// Box `[-8,8]^2`, unit discs at `(±2, 0)`, `ε₀ = 0.5`, `c = 1`.
    pub fn paper_two_disc() -> Self {
        Self {
            domain: BoxDomain::new(Point::new(-8.0, -8.0), Point::new(8.0, 8.0)),
            obstacles: vec![Disc::new(Point::new(-2.0, 0.0), 1.0), Disc::new(Point::new(2.0, 0.0), 1.0)],
            eps0: 0.5,
            amplitude: 1.0,
        }
    }

    /// Checks every scene invariant: positive box, at least one disc, disjoint
    /// discs, and each disc further than `2·eps0` from the box boundary.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.obstacles.is_empty() {
            return Err(Error::InvalidScene("scene needs at least one obstacle".into()));
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::InvalidScene(format!("eps0 must be positive, got {}", self.eps0)));
        }
        if self.amplitude == 0.0 || !self.amplitude.is_finite() {
            return Err(Error::InvalidScene(format!(
                "damping amplitude must be finite and nonzero, got {}",
                self.amplitude
            )));
        }
        for (i, d) in self.obstacles.iter().enumerate() {
            if !(d.radius > 0.0 && d.radius.is_finite()) {
                return Err(Error::InvalidScene(format!("obstacle {i} has radius {}", d.radius)));
            }
            let clearance = self.domain.dist_to_boundary(d.center) - d.radius;
            if clearance <= 2.0 * self.eps0 {
                return Err(Error::InvalidScene(format!(
                    "obstacle {i} is {clearance} from the box boundary, need more than 2*eps0 = {}",
                    2.0 * self.eps0
                )));
            }
        }
        self.check_disjoint()
    }

    fn check_disjoint(&self) -> Result<()> {
        for i in 0..self.obstacles.len() {
            for j in i + 1..self.obstacles.len() {
                let gap = self.obstacles[i].gap(&self.obstacles[j]);
                if gap <= 0.0 {
                    return Err(Error::InvalidScene(format!("obstacles {i} and {j} overlap (gap {gap})")));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scene serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Signed clearance of obstacle `k` from the hull of obstacles `i` and `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleClearance {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub clearance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IkawaReport {
    pub n: usize,
    /// Minimum principal curvature over all boundaries.
    pub kappa: f64,
    /// Minimum pairwise distance between obstacles (infinite for one obstacle).
    pub gap: f64,
    pub kappa_l_ok: bool,
    pub hull_clearances: Vec<TripleClearance>,
    pub all_ok: bool,
}

/// Validates the hull-disjointness and curvature-gap hypotheses.
///
/// Every unordered pair `{i, j}` is combined with every other `k`; the pair
/// must have equal radii so that its hull is a stadium.
pub fn validate_ikawa(scene: &SceneConfig) -> Result<IkawaReport> {
    scene.check_disjoint()?;
    let obs = &scene.obstacles;
    let n = obs.len();
    let kappa = obs.iter().map(Disc::curvature).fold(f64::INFINITY, f64::min);
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            gap = gap.min(obs[i].gap(&obs[j]));
        }
    }
    let kappa_l_ok = n <= 2 || kappa * gap > n as f64;

    let mut hull_clearances = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let clearance = hull_gap(&obs[i], &obs[j], &obs[k])?;
                hull_clearances.push(TripleClearance { i, j, k, clearance });
            }
        }
    }
    let all_ok = kappa_l_ok && hull_clearances.iter().all(|t| t.clearance > 0.0);
    Ok(IkawaReport { n, kappa, gap, kappa_l_ok, hull_clearances, all_ok })
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * ab.x, a.y + t * ab.y))
}

/// Signed distance between `dk` and the convex hull of `di ∪ dj`.
///
/// For equal radii the hull is the segment between the centers dilated by the
/// common radius, so the clearance is a point-to-segment distance minus both
/// radii. Positive means disjoint.
pub fn hull_clearance(di: &Disc, dj: &Disc, dk: &Disc) -> Result<f64> {
    if di.radius != dj.radius {
        return Err(Error::Unsupported(format!("hull of discs with unequal radii {} and {}", di.radius, dj.radius)));
    }
    Ok(point_segment_distance(dk.center, di.center, dj.center) - di.radius - dk.radius)
}

/// Distance from the center of `dk` to the hull of `di ∪ dj` (zero inside the
/// hull) minus the radius of `dk`.
fn hull_gap(di: &Disc, dj: &Disc, dk: &Disc) -> Result<f64> {
    let signed = hull_clearance(di, dj, dk)? + dk.radius;
    Ok(signed.max(0.0) - dk.radius)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.start.dist(self.end)
    }

    pub fn point_at(&self, t: f64) -> Point {
        Point::new(self.start.x + t * (self.end.x - self.start.x), self.start.y + t * (self.end.y - self.start.y))
    }
}

/// The bouncing-ball orbit between the closest pair of obstacles.
pub fn trapped_segment(scene: &SceneConfig) -> Result<Segment> {
    let obs = &scene.obstacles;
    if obs.len() < 2 {
        return Err(Error::NoTrappedRay(obs.len()));
    }
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..obs.len() {
        for j in i + 1..obs.len() {
            let g = obs[i].gap(&obs[j]);
            if g < best.2 {
                best = (i, j, g);
            }
        }
    }
    let (a, b) = (&obs[best.0], &obs[best.1]);
    let d = b.center.dist(a.center);
    let ux = (b.center.x - a.center.x) / d;
    let uy = (b.center.y - a.center.y) / d;
    Ok(Segment {
        start: Point::new(a.center.x + a.radius * ux, a.center.y + a.radius * uy),
        end: Point::new(b.center.x - b.radius * ux, b.center.y - b.radius * uy),
    })
}

/// Returns whether the trapped orbit misses the support of the damping, with
/// the margin `min dist(segment, ∂B) - 2·eps0`.
///
/// The distance to the boundary of a rectangle is concave along a segment, so
/// its minimum is attained at an endpoint.
pub fn verify_uncontrolled_orbit(scene: &SceneConfig) -> Result<(bool, f64)> {
    let seg = trapped_segment(scene)?;
    let min_dist = scene.domain.dist_to_boundary(seg.start).min(scene.domain.dist_to_boundary(seg.end));
    let margin = min_dist - 2.0 * scene.eps0;
    Ok((margin > 0.0, margin))
}

/// Node-based rasterization of the domain.
///
/// Nodes are `(i, k)` with `0 <= i <= nx`, `0 <= k <= ny`; node coordinates
/// are `lower + (i h, k h)`. Interior nodes are stored in row-major order
/// (`k` outer, `i` inner) and numbered consecutively.
#[derive(Clone, Debug)]
pub struct GridMask {
    nx: usize,
    ny: usize,
    h: f64,
    lower: Point,
    interior: Vec<bool>,
    index: Vec<u32>,
    nodes: Vec<(u32, u32)>,
}

pub(crate) const NOT_INTERIOR: u32 = u32::MAX;

impl GridMask {
    /// Number of intervals along x and y.
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_interior(&self, i: usize, k: usize) -> bool {
        i <= self.nx && k <= self.ny && self.interior[k * (self.nx + 1) + i]
    }

    pub fn coord(&self, i: usize, k: usize) -> Point {
        Point::new(self.lower.x + i as f64 * self.h, self.lower.y + k as f64 * self.h)
    }

    /// Interior index of node `(i, k)`, if it is interior.
    pub fn interior_index(&self, i: usize, k: usize) -> Option<usize> {
        if i > self.nx || k > self.ny {
            return None;
        }
        match self.index[k * (self.nx + 1) + i] {
            NOT_INTERIOR => None,
            v => Some(v as usize),
        }
    }

    /// Grid position of the `idx`-th interior node.
    pub fn node(&self, idx: usize) -> (usize, usize) {
        let (i, k) = self.nodes[idx];
        (i as usize, k as usize)
    }

    pub fn node_coord(&self, idx: usize) -> Point {
        let (i, k) = self.node(idx);
        self.coord(i, k)
    }

    /// Interior node coordinates in interior order.
    pub fn interior_coords(&self) -> impl Iterator<Item = Point> + '_ {
        self.nodes.iter().map(|&(i, k)| self.coord(i as usize, k as usize))
    }

    /// Samples `f` at every interior node.
    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.interior_coords().map(f).collect()
    }

    /// Builds a mask from explicit flags; boundary rows and columns are
    /// always excluded.
    pub fn from_flags(nx: usize, ny: usize, h: f64, lower: Point, flags: impl Fn(usize, usize) -> bool) -> Self {
        let mut interior = vec![false; (nx + 1) * (ny + 1)];
        let mut index = vec![NOT_INTERIOR; (nx + 1) * (ny + 1)];
        let mut nodes = Vec::new();
        for k in 1..ny {
            for i in 1..nx {
                if flags(i, k) {
                    let at = k * (nx + 1) + i;
                    interior[at] = true;
                    index[at] = nodes.len() as u32;
                    nodes.push((i as u32, k as u32));
                }
            }
        }
        Self { nx, ny, h, lower, interior, index, nodes }
    }
}

/// Minimum number of grid cells across each obstacle and across the gap.
pub const MIN_CELLS: f64 = 8.0;

/// Rasterizes the scene with `n` nodes per unit length (`h = 1/n`).
pub fn rasterize(scene: &SceneConfig, n: u32) -> Result<GridMask> {
    scene.domain.validate()?;
    if n == 0 {
        return Err(Error::UnderResolved("need at least one node per unit length".into()));
    }
    let h = 1.0 / n as f64;
    let cells = |len: f64, what: &str| -> Result<usize> {
        let c = (len / h).round();
        if (c * h - len).abs() > 1e-9 * len.max(1.0) {
            return Err(Error::InvalidScene(format!("{what} {len} is not a multiple of h = {h}")));
        }
        Ok(c as usize)
    };
    let nx = cells(scene.domain.width(), "box width")?;
    let ny = cells(scene.domain.height(), "box height")?;

    for (idx, d) in scene.obstacles.iter().enumerate() {
        let across = 2.0 * d.radius / h;
        if across < MIN_CELLS {
            return Err(Error::UnderResolved(format!(
                "obstacle {idx} spans {across:.2} cells, need at least {MIN_CELLS}"
            )));
        }
    }
    for i in 0..scene.obstacles.len() {
        for j in i + 1..scene.obstacles.len() {
            let across = scene.obstacles[i].gap(&scene.obstacles[j]) / h;
            if across < MIN_CELLS {
                return Err(Error::UnderResolved(format!(
                    "gap between obstacles {i} and {j} spans {across:.2} cells, need at least {MIN_CELLS}"
                )));
            }
        }
    }

    let lower = scene.domain.lower;
    let mask = GridMask::from_flags(nx, ny, h, lower, |i, k| {
        let p = Point::new(lower.x + i as f64 * h, lower.y + k as f64 * h);
        scene.domain.contains_open(p) && !scene.obstacles.iter().any(|d| d.contains_closed(p))
    });
    if mask.interior_count() == 0 {
        return Err(Error::DegenerateDomain);
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_disc(x: f64, y: f64) -> Disc {
        Disc::new(Point::new(x, y), 1.0)
    }

    fn scene(obstacles: Vec<Disc>, half: f64, eps0: f64) -> SceneConfig {
        SceneConfig {
            domain: BoxDomain::new(Point::new(-half, -half), Point::new(half, half)),
            obstacles,
            eps0,
            amplitude: 1.0,
        }
    }

    #[test]
    fn two_discs_need_no_curvature_check() {
        let s = scene(vec![unit_disc(-2.0, 0.0), unit_disc(2.0, 0.0)], 8.0, 0.5);
        let r = validate_ikawa(&s).unwrap();
        assert_eq!(r.n, 2);
        assert!(r.kappa_l_ok);
        assert!(r.hull_clearances.is_empty());
        assert!(r.all_ok);
    }

    #[test]
    fn equilateral_triangle_passes() {
        let side = 6.0;
        let height = side * 3f64.sqrt() / 2.0;
        let s = scene(vec![unit_disc(-3.0, 0.0), unit_disc(3.0, 0.0), unit_disc(0.0, height)], 10.0, 0.5);
        let r = validate_ikawa(&s).unwrap();
        assert_eq!(r.kappa, 1.0);
        assert!((r.gap - 4.0).abs() < 1e-12);
        assert!(r.kappa_l_ok);
        let expected = height - 2.0;
        assert!((expected - 3.196).abs() < 1e-3);
        for t in &r.hull_clearances {
            assert!((t.clearance - expected).abs() < 1e-12, "{t:?}");
        }
        assert!(r.all_ok);
    }

    #[test]
    fn collinear_centers_fail() {
        let s = scene(vec![unit_disc(-4.0, 0.0), unit_disc(0.0, 0.0), unit_disc(4.0, 0.0)], 10.0, 0.5);
        let r = validate_ikawa(&s).unwrap();
        let middle = r.hull_clearances.iter().find(|t| t.i == 0 && t.j == 2 && t.k == 1).unwrap();
        assert_eq!(middle.clearance, -1.0);
        assert!(!r.all_ok);
    }

    #[test]
    fn overlapping_obstacles_are_rejected() {
        let s = scene(vec![unit_disc(0.0, 0.0), unit_disc(1.5, 0.0)], 8.0, 0.5);
        assert!(matches!(validate_ikawa(&s), Err(Error::InvalidScene(_))));
        assert!(matches!(s.validate(), Err(Error::InvalidScene(_))));
    }

    #[test]
    fn hull_clearance_cases() {
        let a = unit_disc(-3.0, 0.0);
        let b = unit_disc(3.0, 0.0);
        assert_eq!(hull_clearance(&a, &b, &unit_disc(0.0, 5.0)).unwrap(), 3.0);
        let on_segment = Disc::new(Point::new(1.0, 0.0), 0.5);
        assert_eq!(hull_clearance(&a, &b, &on_segment).unwrap(), -1.5);
        assert_eq!(hull_clearance(&a, &b, &unit_disc(0.0, 100.0)).unwrap(), 98.0);
        let big = Disc::new(Point::new(3.0, 0.0), 2.0);
        assert!(matches!(hull_clearance(&a, &big, &unit_disc(0.0, 5.0)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn trapped_segment_between_closest_pair() {
        let s = scene(vec![unit_disc(-2.0, 0.0), unit_disc(2.0, 0.0)], 8.0, 0.5);
        let seg = trapped_segment(&s).unwrap();
        assert_eq!(seg.start, Point::new(-1.0, 0.0));
        assert_eq!(seg.end, Point::new(1.0, 0.0));
        assert_eq!(seg.length(), 2.0);

        let s = scene(vec![unit_disc(0.0, -3.0), unit_disc(0.0, 3.0)], 8.0, 0.5);
        let seg = trapped_segment(&s).unwrap();
        assert_eq!(seg.start, Point::new(0.0, -2.0));
        assert_eq!(seg.end, Point::new(0.0, 2.0));

        let s = scene(vec![unit_disc(0.0, 0.0)], 8.0, 0.5);
        assert!(matches!(trapped_segment(&s), Err(Error::NoTrappedRay(1))));
    }

    fn sampled_min_boundary_distance(s: &SceneConfig) -> f64 {
        let seg = trapped_segment(s).unwrap();
        (0..=1000).map(|t| s.domain.dist_to_boundary(seg.point_at(t as f64 / 1000.0))).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn uncontrolled_orbit_against_sampling() {
        let s = scene(vec![unit_disc(-2.0, 0.0), unit_disc(2.0, 0.0)], 8.0, 0.5);
        let oracle = sampled_min_boundary_distance(&s);
        assert_eq!(oracle, 7.0);
        let (ok, margin) = verify_uncontrolled_orbit(&s).unwrap();
        assert!(ok);
        assert_eq!(margin, oracle - 1.0);

        let s = scene(vec![unit_disc(-2.0, 0.0), unit_disc(2.0, 0.0)], 8.0, 4.0);
        let (ok, margin) = verify_uncontrolled_orbit(&s).unwrap();
        assert!(!ok);
        assert_eq!(margin, sampled_min_boundary_distance(&s) - 8.0);
        assert!(margin < 0.0);

        // segment endpoints exactly 2*eps0 from the boundary
        let s = scene(vec![unit_disc(-2.0, 0.0), unit_disc(2.0, 0.0)], 8.0, 3.5);
        let (ok, margin) = verify_uncontrolled_orbit(&s).unwrap();
        assert_eq!(margin, 0.0);
        assert!(!ok);
    }

    #[test]
    fn rasterize_empty_unit_box() {
        let s = SceneConfig {
            domain: BoxDomain::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0)),
            obstacles: vec![],
            eps0: 0.1,
            amplitude: 1.0,
        };
        let mask = rasterize(&s, 8).unwrap();
        assert_eq!(mask.dims(), (8, 8));
        assert_eq!(mask.interior_count(), 49);
    }

    #[test]
    fn rasterize_fully_covered_box_is_degenerate() {
        let s = SceneConfig {
            domain: BoxDomain::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0)),
            obstacles: vec![Disc::new(Point::new(0.5, 0.5), 1.0)],
            eps0: 0.1,
            amplitude: 1.0,
        };
        assert!(matches!(rasterize(&s, 8), Err(Error::DegenerateDomain)));
    }

    #[test]
    fn rasterize_paper_scene_matches_point_classification() {
        let s = SceneConfig::paper_two_disc();
        let mask = rasterize(&s, 16).unwrap();
        let h = 1.0 / 16.0;
        let mut count = 0;
        for k in 0..=256 {
            for i in 0..=256 {
                let (x, y) = (-8.0 + i as f64 * h, -8.0 + k as f64 * h);
                let inside_box = x > -8.0 && x < 8.0 && y > -8.0 && y < 8.0;
                let in_disc = (x + 2.0).powi(2) + y * y <= 1.0 || (x - 2.0).powi(2) + y * y <= 1.0;
                let interior = inside_box && !in_disc;
                assert_eq!(mask.is_interior(i, k), interior, "node ({i},{k})");
                count += interior as usize;
            }
        }
        assert_eq!(mask.interior_count(), count);
    }

    #[test]
    fn rasterize_rejects_coarse_grids() {
        let s = SceneConfig::paper_two_disc();
        let err = rasterize(&s, 3).unwrap_err();
        assert!(matches!(err, Error::UnderResolved(ref m) if m.contains("obstacle 0")), "{err}");
        let s = SceneConfig {
            obstacles: vec![Disc::new(Point::new(-1.1, 0.0), 1.0), Disc::new(Point::new(1.1, 0.0), 1.0)],
            ..SceneConfig::paper_two_disc()
        };
        let err = rasterize(&s, 16).unwrap_err();
        assert!(matches!(err, Error::UnderResolved(ref m) if m.contains("gap")), "{err}");
    }

    #[test]
    fn paper_scene_is_valid() {
        let s = SceneConfig::paper_two_disc();
        s.validate().unwrap();
        assert_eq!(s.hash().len(), 64);
        let mut bad = s.clone();
        bad.eps0 = 3.5;
        assert!(matches!(bad.validate(), Err(Error::InvalidScene(_))));
    }
}
