//! Mesh generators: the plain rectangular channel and the channel with a
//! circular obstacle carrying an elastic flag. The flag is the axis-aligned
//! rectangle clipped against the circle, so its left end attaches along a
//! circular arc; the arc vertices sit on the circle to machine precision and
//! the tracked tip point is a mesh vertex exactly. The obstacle mesh is
//! graded: cells of size `target_h` hug the cylinder, flag, and near wake,
//! and grow linearly with distance toward the far field.

use super::delaunay::{Carrier, InsertOutcome, RegionClass, Triangulation};
use super::{BenchmarkGeometry, EdgeTag, Mesh, MeshError, Point2};
use std::collections::HashMap;

const MIN_ANGLE_DEG: f64 = 20.0;
const INSERTION_BUDGET: usize = 400_000;

/// Grading controls for the obstacle mesh. All sizes are relative to the
/// `target_h` handed to the generator. The defaults keep the budget low and
/// suit steady or slowly varying flows; capturing self-sustained vortex
/// shedding needs a tight wake (`wake_factor` near 1) paid for with a
/// coarser far field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshGrading {
    /// Growth rate of the local mesh size with distance from the obstacle.
    pub slope: f64,
    /// Base size in the near wake relative to `target_h`.
    pub wake_factor: f64,
    /// Far-field size relative to `target_h`, capped at 0.1.
    pub coarse_factor: f64,
    /// Streamwise extent of the refined wake region behind the flag tip.
    pub wake_length: f64,
}

impl Default for MeshGrading {
    fn default() -> Self {
        MeshGrading {
            slope: 0.35,
            wake_factor: 1.8,
            coarse_factor: 4.5,
            wake_length: 0.45,
        }
    }
}

impl MeshGrading {
    fn validate(&self) -> Result<(), MeshError> {
        let ok = self.slope > 0.0
            && self.wake_factor > 0.0
            && self.coarse_factor >= 1.0
            && self.wake_length >= 0.0;
        if !ok {
            return Err(MeshError::GeometryFailure(format!(
                "invalid grading parameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// Distance from `p` to the axis-aligned rectangle [lo, hi] (zero inside).
fn rect_distance(p: Point2, lo: Point2, hi: Point2) -> f64 {
    let dx = (lo.x - p.x).max(p.x - hi.x).max(0.0);
    let dy = (lo.y - p.y).max(p.y - hi.y).max(0.0);
    (dx * dx + dy * dy).sqrt()
}

/// Accumulates deduplicated points and the constrained segments between them.
struct PslgBuilder {
    points: Vec<Point2>,
    segments: Vec<(usize, usize, EdgeTag, Carrier)>,
    index: HashMap<(u64, u64), usize>,
}

impl PslgBuilder {
    fn new() -> Self {
        PslgBuilder {
            points: Vec::new(),
            segments: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn point(&mut self, p: Point2) -> usize {
        let key = (p.x.to_bits(), p.y.to_bits());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.points.len();
        self.points.push(p);
        self.index.insert(key, i);
        i
    }

    fn segment(&mut self, a: usize, b: usize, tag: EdgeTag, carrier: Carrier) {
        self.segments.push((a, b, tag, carrier));
    }

    /// Straight chain from `from` to `to`, subdivided so no piece exceeds
    /// `spacing`.
    fn chain_line(&mut self, from: Point2, to: Point2, spacing: f64, tag: EdgeTag) {
        let len = from.dist(to);
        let n = (len / spacing).ceil().max(1.0) as usize;
        let mut prev = self.point(from);
        for k in 1..=n {
            let p = if k == n {
                to
            } else {
                let s = k as f64 / n as f64;
                from.add(to.sub(from).scale(s))
            };
            let cur = self.point(p);
            self.segment(prev, cur, tag, Carrier::Straight);
            prev = cur;
        }
    }

    /// Arc chain from angle `th0` to `th1` (increasing parameter) on the
    /// circle, with explicit endpoint coordinates so shared corners dedupe
    /// exactly. Interior vertices are placed on the circle.
    #[allow(clippy::too_many_arguments)]
    fn chain_arc(
        &mut self,
        center: Point2,
        radius: f64,
        th0: f64,
        th1: f64,
        start: Point2,
        end: Point2,
        spacing: f64,
        tag: EdgeTag,
    ) {
        let arc_len = (th1 - th0).abs() * radius;
        let n = ((arc_len / spacing).ceil() as usize).max(2);
        let carrier = Carrier::Circle { center, radius };
        let mut prev = self.point(start);
        for k in 1..=n {
            let p = if k == n {
                end
            } else {
                let th = th0 + (th1 - th0) * (k as f64) / (n as f64);
                Point2::new(center.x + radius * th.cos(), center.y + radius * th.sin())
            };
            let cur = self.point(p);
            self.segment(prev, cur, tag, carrier);
            prev = cur;
        }
    }

    /// Feeds everything into a fresh triangulation over the given box.
    fn build(self, lo: Point2, hi: Point2) -> Result<Triangulation, MeshError> {
        let mut tri = Triangulation::new(lo, hi);
        let mut ids = Vec::with_capacity(self.points.len());
        for p in self.points {
            match tri.insert_free(p)? {
                InsertOutcome::Inserted { vertex, .. } => ids.push(vertex),
                _ => {
                    return Err(MeshError::GeometryFailure(format!(
                        "input point ({}, {}) could not be inserted",
                        p.x, p.y
                    )))
                }
            }
        }
        for (a, b, tag, carrier) in self.segments {
            tri.add_segment(ids[a], ids[b], tag, carrier)?;
        }
        tri.recover_segments()?;
        Ok(tri)
    }
}

/// Rectangular channel [0, length] x [0, height], entirely fluid: inflow on
/// the left edge, outflow on the right, no-slip walls top and bottom.
pub fn generate_channel_mesh(length: f64, height: f64, target_h: f64) -> Result<Mesh, MeshError> {
    if !(length > 0.0 && height > 0.0) {
        return Err(MeshError::GeometryFailure(
            "channel dimensions must be positive".into(),
        ));
    }
    check_target_h(target_h)?;
    let mut b = PslgBuilder::new();
    let sw = Point2::new(0.0, 0.0);
    let se = Point2::new(length, 0.0);
    let ne = Point2::new(length, height);
    let nw = Point2::new(0.0, height);
    b.chain_line(sw, se, target_h, EdgeTag::Walls);
    b.chain_line(se, ne, target_h, EdgeTag::Outlet);
    b.chain_line(ne, nw, target_h, EdgeTag::Walls);
    b.chain_line(nw, sw, target_h, EdgeTag::Inlet);

    let mut tri = b.build(sw, ne)?;
    tri.classify(&|p| {
        if p.x > 0.0 && p.x < length && p.y > 0.0 && p.y < height {
            RegionClass::Fluid
        } else {
            RegionClass::Outside
        }
    })?;
    let max_fluid = 1.5 * target_h * target_h;
    let size = |r: RegionClass, _: Point2| match r {
        RegionClass::Fluid => max_fluid,
        _ => f64::INFINITY,
    };
    tri.refine(MIN_ANGLE_DEG, &size, INSERTION_BUDGET)?;
    tri.assert_refined(MIN_ANGLE_DEG, &size)?;
    let mesh = tri.extract()?;
    mesh.validate()?;
    Ok(mesh)
}

fn check_target_h(target_h: f64) -> Result<(), MeshError> {
    if !(0.002..=0.1).contains(&target_h) {
        return Err(MeshError::GeometryFailure(format!(
            "target_h {target_h} outside the supported range [0.002, 0.1]"
        )));
    }
    Ok(())
}

/// Channel with the cylinder-plus-flag obstacle under default grading. The
/// cylinder boundary and the arc where the flag attaches are tagged as walls;
/// the three free flag sides are tagged as the fluid/structure interface.
/// The flag tip midpoint `geometry.point_a` is guaranteed to be a vertex.
pub fn generate_benchmark_mesh(
    geometry: &BenchmarkGeometry,
    target_h: f64,
) -> Result<Mesh, MeshError> {
    generate_benchmark_mesh_graded(geometry, target_h, &MeshGrading::default())
}

/// Benchmark mesh with explicit grading controls.
pub fn generate_benchmark_mesh_graded(
    geometry: &BenchmarkGeometry,
    target_h: f64,
    grading: &MeshGrading,
) -> Result<Mesh, MeshError> {
    check_target_h(target_h)?;
    grading.validate()?;
    let g = geometry;
    let c = g.cylinder_center;
    let r = g.cylinder_radius;
    let y_bot = g.beam_lower_right.y;
    let y_top = y_bot + g.beam_height;
    let x_tip = g.beam_lower_right.x;
    let dy = y_top - c.y;
    if !(dy > 0.0 && dy < r && ((c.y - y_bot) - dy).abs() < 1e-12) {
        return Err(MeshError::GeometryFailure(
            "flag must straddle the cylinder centerline and be thinner than the cylinder".into(),
        ));
    }
    if x_tip <= c.x + r {
        return Err(MeshError::GeometryFailure(
            "flag tip must clear the cylinder".into(),
        ));
    }
    if ((x_tip - (c.x + r)) - g.beam_length).abs() > 1e-12 {
        return Err(MeshError::GeometryFailure(
            "flag length is inconsistent with its tip position".into(),
        ));
    }
    // Attachment points: the circle crossed with the flag's horizontal sides.
    let x_att = c.x + (r * r - dy * dy).sqrt();
    let p_att_top = Point2::new(x_att, y_top);
    let p_att_bot = Point2::new(x_att, y_bot);
    let theta = (dy / r).asin();

    // Spacing on the flag boundary keeps at least two element layers through
    // the thickness.
    let hb = target_h.min(g.beam_height / 2.0);
    // The mesh is graded: `target_h` at the cylinder and flag, growing with
    // distance to the far-field size. Resolving the shear layers coming off
    // the cylinder is what lets the coarse model shed vortices at all.
    let far_h = (grading.coarse_factor * target_h).min(0.1);

    let mut b = PslgBuilder::new();
    // Outer rectangle, meshed at the far-field size.
    let sw = Point2::new(0.0, 0.0);
    let se = Point2::new(g.channel_length, 0.0);
    let ne = Point2::new(g.channel_length, g.channel_height);
    let nw = Point2::new(0.0, g.channel_height);
    b.chain_line(sw, se, far_h, EdgeTag::Walls);
    b.chain_line(se, ne, far_h, EdgeTag::Outlet);
    b.chain_line(ne, nw, far_h, EdgeTag::Walls);
    b.chain_line(nw, sw, far_h, EdgeTag::Inlet);

    // Cylinder: long arc (fluid boundary) from the top attachment point
    // counter-clockwise around to the bottom one, then the short attachment
    // arc closing the polygon. Both are rigid walls.
    b.chain_arc(
        c,
        r,
        theta,
        2.0 * std::f64::consts::PI - theta,
        p_att_top,
        p_att_bot,
        target_h,
        EdgeTag::Walls,
    );
    b.chain_arc(c, r, -theta, theta, p_att_bot, p_att_top, hb, EdgeTag::Walls);

    // Flag outline, counter-clockwise: bottom, tip (split exactly at the
    // tracked point), top.
    b.chain_line(p_att_bot, g.beam_lower_right, hb, EdgeTag::Interface);
    b.chain_line(g.beam_lower_right, g.point_a, hb, EdgeTag::Interface);
    b.chain_line(g.point_a, Point2::new(x_tip, y_top), hb, EdgeTag::Interface);
    b.chain_line(Point2::new(x_tip, y_top), p_att_top, hb, EdgeTag::Interface);

    let mut tri = b.build(sw, ne)?;
    let (length, height) = (g.channel_length, g.channel_height);
    let classifier = move |p: Point2| {
        if !(p.x > 0.0 && p.x < length && p.y > 0.0 && p.y < height) {
            RegionClass::Outside
        } else if p.dist(c) < r {
            RegionClass::Hole
        } else if p.y > y_bot && p.y < y_top && p.x > c.x && p.x < x_tip {
            RegionClass::Structure
        } else {
            RegionClass::Fluid
        }
    };
    tri.classify(&classifier)?;

    // Local fluid size: fine at the obstacle, adjustable in the near wake
    // behind the flag, linear growth with distance, far-field cap. The wake
    // box spans the cylinder's cross-stream shadow, not just the flag's
    // thickness: the vortex street forming behind the tip is about as wide
    // as the cylinder and meanders, and a band thinner than that starves it.
    let wake_h = grading.wake_factor * target_h;
    let slope = grading.slope;
    let flag_lo = Point2::new(c.x, y_bot);
    let flag_hi = Point2::new(x_tip, y_top);
    let wake_halfheight = 1.5 * r;
    let wake_lo = Point2::new(x_tip, (c.y - wake_halfheight).max(0.0));
    let wake_hi = Point2::new(
        (x_tip + grading.wake_length).min(g.channel_length),
        (c.y + wake_halfheight).min(g.channel_height),
    );
    let cyl = c;
    let rad = r;
    let local_h = move |p: Point2| -> f64 {
        let d_obstacle = ((p.dist(cyl) - rad).max(0.0)).min(rect_distance(p, flag_lo, flag_hi));
        let d_wake = rect_distance(p, wake_lo, wake_hi);
        (target_h + slope * d_obstacle)
            .min(wake_h + slope * d_wake)
            .min(far_h)
    };
    // Area cap 0.6 h^2 keeps typical edge lengths close to the local size.
    let max_structure = 0.6 * hb * hb;
    let size = move |r: RegionClass, p: Point2| match r {
        RegionClass::Fluid => {
            let h = local_h(p);
            0.6 * h * h
        }
        RegionClass::Structure => max_structure,
        _ => f64::INFINITY,
    };
    // Splitting an arc segment moves the region boundary onto the circle, so
    // labels drift during refinement; reclassify and do one touch-up pass
    // before checking quality.
    tri.refine(MIN_ANGLE_DEG, &size, INSERTION_BUDGET)?;
    tri.classify(&classifier)?;
    tri.refine(MIN_ANGLE_DEG, &size, INSERTION_BUDGET)?;
    tri.classify(&classifier)?;
    tri.assert_refined(MIN_ANGLE_DEG, &size)?;

    let mesh = tri.extract()?;
    mesh.validate()?;
    if mesh.find_vertex_at(g.point_a, 1e-12).is_none() {
        return Err(MeshError::GeometryFailure(
            "tracked tip point is not a mesh vertex".into(),
        ));
    }
    Ok(mesh)
}
