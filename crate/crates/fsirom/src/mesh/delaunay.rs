//! Constrained Delaunay triangulation with quality refinement. Points go in
//! through cavity (Bowyer-Watson) insertion that never crosses a constrained
//! edge; constrained segments are recovered by midpoint splitting; skinny or
//! oversized triangles are fixed by circumcenter insertion with the usual
//! diametral-circle protection of the input segments. Segments lying on a
//! circle carry that circle so split points land back on it.

use super::{EdgeTag, MeshError, Point2};
use std::collections::{HashMap, HashSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionClass {
    Unknown,
    Outside,
    Hole,
    Fluid,
    Structure,
}

#[derive(Debug, Clone, Copy)]
pub enum Carrier {
    Straight,
    Circle { center: Point2, radius: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub a: usize,
    pub b: usize,
    pub tag: EdgeTag,
    pub carrier: Carrier,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [usize; 3],
    alive: bool,
    region: RegionClass,
}

pub enum InsertOutcome {
    /// Point inserted; the fan of new triangles is `tris[new_tris_start..]`.
    Inserted { vertex: usize, new_tris_start: usize },
    /// Cavity repair ran into a constrained segment; the point is too close
    /// to it to insert safely.
    Blocked { seg: usize },
    /// Point coincides with an existing vertex.
    Duplicate,
}

pub struct Triangulation {
    pub pts: Vec<Point2>,
    tris: Vec<Tri>,
    /// Directed edge (a, b) -> index of the triangle having that edge in
    /// counter-clockwise order. Never iterated, so determinism is preserved.
    edge_map: HashMap<(usize, usize), usize>,
    pub segments: Vec<Segment>,
    seg_map: HashMap<(usize, usize), usize>,
    last_tri: usize,
}

fn orient2d(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Positive when p lies strictly inside the circumcircle of CCW triangle abc.
fn in_circle(a: Point2, b: Point2, c: Point2, p: Point2) -> f64 {
    let ax = a.x - p.x;
    let ay = a.y - p.y;
    let bx = b.x - p.x;
    let by = b.y - p.y;
    let cx = c.x - p.x;
    let cy = c.y - p.y;
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

fn circumcenter(a: Point2, b: Point2, c: Point2) -> Option<Point2> {
    let bx = b.x - a.x;
    let by = b.y - a.y;
    let cx = c.x - a.x;
    let cy = c.y - a.y;
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() < 1e-30 {
        return None;
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    Some(Point2::new(a.x + ux, a.y + uy))
}

fn tri_min_angle_deg(a: Point2, b: Point2, c: Point2) -> f64 {
    let pts = [a, b, c];
    let mut min_angle = f64::INFINITY;
    for k in 0..3 {
        let u = pts[(k + 1) % 3].sub(pts[k]);
        let v = pts[(k + 2) % 3].sub(pts[k]);
        let denom = u.norm() * v.norm();
        if denom == 0.0 {
            return 0.0;
        }
        let cosang = (u.dot(v) / denom).clamp(-1.0, 1.0);
        min_angle = min_angle.min(cosang.acos().to_degrees());
    }
    min_angle
}

fn undirected(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Triangulation {
    /// Starts from two triangles covering a box well outside [lo, hi]; the
    /// four box corners are vertices 0..4 and are dropped at extraction.
    pub fn new(lo: Point2, hi: Point2) -> Triangulation {
        let margin = 2.0 * ((hi.x - lo.x) + (hi.y - lo.y)).max(1.0);
        let sw = Point2::new(lo.x - margin, lo.y - margin);
        let se = Point2::new(hi.x + margin, lo.y - margin);
        let ne = Point2::new(hi.x + margin, hi.y + margin);
        let nw = Point2::new(lo.x - margin, hi.y + margin);
        let mut tri = Triangulation {
            pts: vec![sw, se, ne, nw],
            tris: Vec::new(),
            edge_map: HashMap::new(),
            segments: Vec::new(),
            seg_map: HashMap::new(),
            last_tri: 0,
        };
        tri.push_tri([0, 1, 2], RegionClass::Unknown);
        tri.push_tri([0, 2, 3], RegionClass::Unknown);
        tri
    }

    fn push_tri(&mut self, v: [usize; 3], region: RegionClass) -> usize {
        let idx = self.tris.len();
        self.tris.push(Tri {
            v,
            alive: true,
            region,
        });
        for k in 0..3 {
            self.edge_map.insert((v[k], v[(k + 1) % 3]), idx);
        }
        idx
    }

    fn kill_tri(&mut self, t: usize) {
        let v = self.tris[t].v;
        for k in 0..3 {
            self.edge_map.remove(&(v[k], v[(k + 1) % 3]));
        }
        self.tris[t].alive = false;
    }

    fn tri_points(&self, t: usize) -> [Point2; 3] {
        let v = self.tris[t].v;
        [self.pts[v[0]], self.pts[v[1]], self.pts[v[2]]]
    }

    fn locate(&self, p: Point2) -> Result<usize, MeshError> {
        let mut t = self.last_tri;
        if !self.tris[t].alive {
            t = match (0..self.tris.len()).find(|&i| self.tris[i].alive) {
                Some(i) => i,
                None => return Err(MeshError::GeometryFailure("empty triangulation".into())),
            };
        }
        let max_steps = 4 * self.tris.len() + 16;
        for _ in 0..max_steps {
            let v = self.tris[t].v;
            let mut moved = false;
            for k in 0..3 {
                let a = v[k];
                let b = v[(k + 1) % 3];
                if orient2d(self.pts[a], self.pts[b], p) < 0.0 {
                    match self.edge_map.get(&(b, a)) {
                        Some(&n) => {
                            t = n;
                            moved = true;
                            break;
                        }
                        None => return self.locate_scan(p),
                    }
                }
            }
            if !moved {
                return Ok(t);
            }
        }
        self.locate_scan(p)
    }

    fn locate_scan(&self, p: Point2) -> Result<usize, MeshError> {
        let mut best: Option<(usize, f64)> = None;
        for t in 0..self.tris.len() {
            if !self.tris[t].alive {
                continue;
            }
            let [a, b, c] = self.tri_points(t);
            let worst = orient2d(a, b, p)
                .min(orient2d(b, c, p))
                .min(orient2d(c, a, p));
            if best.map_or(true, |(_, bw)| worst > bw) {
                best = Some((t, worst));
            }
        }
        match best {
            Some((t, worst)) if worst > -1e-9 => Ok(t),
            _ => Err(MeshError::GeometryFailure(format!(
                "point location failed at ({}, {})",
                p.x, p.y
            ))),
        }
    }

    /// Cavity insertion. The cavity grows over triangles whose circumcircle
    /// contains p but never across a constrained edge; afterwards the cavity
    /// boundary is repaired until every boundary edge is strictly visible
    /// from p, so the replacement fan is valid even under near-degeneracy.
    pub fn insert_free(&mut self, p: Point2) -> Result<InsertOutcome, MeshError> {
        let t0 = self.locate(p)?;
        for &v in &self.tris[t0].v {
            if self.pts[v].dist(p) < 1e-13 {
                return Ok(InsertOutcome::Duplicate);
            }
        }

        let mut cavity = vec![t0];
        let mut in_cavity: HashSet<usize> = HashSet::new();
        in_cavity.insert(t0);
        let mut stack = vec![t0];
        while let Some(t) = stack.pop() {
            let v = self.tris[t].v;
            for k in 0..3 {
                let a = v[k];
                let b = v[(k + 1) % 3];
                if self.seg_map.contains_key(&undirected(a, b)) {
                    continue;
                }
                let Some(&n) = self.edge_map.get(&(b, a)) else {
                    continue;
                };
                if in_cavity.contains(&n) {
                    continue;
                }
                let [na, nb, nc] = self.tri_points(n);
                if in_circle(na, nb, nc, p) > 0.0 {
                    in_cavity.insert(n);
                    cavity.push(n);
                    stack.push(n);
                }
            }
        }

        // Boundary collection plus visibility repair.
        let boundary = loop {
            let mut boundary: Vec<(usize, usize, RegionClass)> = Vec::new();
            for &t in &cavity {
                let tri = self.tris[t];
                for k in 0..3 {
                    let a = tri.v[k];
                    let b = tri.v[(k + 1) % 3];
                    let outside = match self.edge_map.get(&(b, a)) {
                        Some(&n) => !in_cavity.contains(&n),
                        None => true,
                    };
                    if outside {
                        boundary.push((a, b, tri.region));
                    }
                }
            }
            let mut expanded = false;
            for &(a, b, _) in &boundary {
                if orient2d(self.pts[a], self.pts[b], p) <= 0.0 {
                    if let Some(&seg) = self.seg_map.get(&undirected(a, b)) {
                        return Ok(InsertOutcome::Blocked { seg });
                    }
                    match self.edge_map.get(&(b, a)) {
                        Some(&n) if !in_cavity.contains(&n) => {
                            in_cavity.insert(n);
                            cavity.push(n);
                            expanded = true;
                        }
                        _ => {
                            return Err(MeshError::GeometryFailure(
                                "cavity repair reached the hull".into(),
                            ));
                        }
                    }
                }
            }
            if !expanded {
                break boundary;
            }
        };

        for &t in &cavity {
            self.kill_tri(t);
        }
        let vertex = self.pts.len();
        self.pts.push(p);
        let new_tris_start = self.tris.len();
        for &(a, b, region) in &boundary {
            self.push_tri([vertex, a, b], region);
        }
        self.last_tri = new_tris_start;
        Ok(InsertOutcome::Inserted {
            vertex,
            new_tris_start,
        })
    }

    pub fn add_segment(
        &mut self,
        a: usize,
        b: usize,
        tag: EdgeTag,
        carrier: Carrier,
    ) -> Result<(), MeshError> {
        if a == b || a >= self.pts.len() || b >= self.pts.len() {
            return Err(MeshError::GeometryFailure(format!(
                "segment ({a}, {b}) has invalid endpoints"
            )));
        }
        let key = undirected(a, b);
        if self.seg_map.contains_key(&key) {
            return Err(MeshError::GeometryFailure(format!(
                "segment ({a}, {b}) registered twice"
            )));
        }
        let idx = self.segments.len();
        self.segments.push(Segment {
            a,
            b,
            tag,
            carrier,
            alive: true,
        });
        self.seg_map.insert(key, idx);
        Ok(())
    }

    fn segment_is_edge(&self, si: usize) -> bool {
        let s = self.segments[si];
        self.edge_map.contains_key(&(s.a, s.b)) || self.edge_map.contains_key(&(s.b, s.a))
    }

    fn split_point(&self, si: usize) -> Result<Point2, MeshError> {
        let s = self.segments[si];
        let mid = self.pts[s.a].add(self.pts[s.b]).scale(0.5);
        match s.carrier {
            Carrier::Straight => Ok(mid),
            Carrier::Circle { center, radius } => {
                let d = mid.sub(center);
                let n = d.norm();
                if n < 1e-12 {
                    return Err(MeshError::GeometryFailure(
                        "cannot project diametral chord midpoint onto circle".into(),
                    ));
                }
                Ok(center.add(d.scale(radius / n)))
            }
        }
    }

    /// Replaces segment `si` by its two halves and inserts the split point
    /// (projected onto the circle for arc segments). Returns the new vertex
    /// and the first index of the fan triangles.
    pub fn split_segment(&mut self, si: usize) -> Result<(usize, usize), MeshError> {
        let s = self.segments[si];
        assert!(s.alive, "splitting a dead segment");
        let p = self.split_point(si)?;
        self.seg_map.remove(&undirected(s.a, s.b));
        self.segments[si].alive = false;

        match self.insert_free(p)? {
            InsertOutcome::Inserted {
                vertex,
                new_tris_start,
            } => {
                for (x, y) in [(s.a, vertex), (vertex, s.b)] {
                    self.add_segment(x, y, s.tag, s.carrier)?;
                }
                Ok((vertex, new_tris_start))
            }
            _ => Err(MeshError::GeometryFailure(format!(
                "failed to insert split point of segment ({}, {})",
                s.a, s.b
            ))),
        }
    }

    /// Splits segments until every constrained segment is an edge of the
    /// triangulation.
    pub fn recover_segments(&mut self) -> Result<(), MeshError> {
        let mut work = 0usize;
        loop {
            let missing: Vec<usize> = (0..self.segments.len())
                .filter(|&si| self.segments[si].alive && !self.segment_is_edge(si))
                .collect();
            if missing.is_empty() {
                return Ok(());
            }
            work += missing.len();
            if work > 100_000 {
                return Err(MeshError::GeometryFailure(
                    "segment recovery did not converge".into(),
                ));
            }
            for si in missing {
                if self.segments[si].alive && !self.segment_is_edge(si) {
                    self.split_segment(si)?;
                }
            }
        }
    }

    /// Flood-fills the components bounded by constrained edges and assigns a
    /// region to each. The component touching the enclosing box is outside;
    /// every other component is classified by sampling the centroid of its
    /// largest triangle.
    pub fn classify(&mut self, sample: &dyn Fn(Point2) -> RegionClass) -> Result<(), MeshError> {
        for t in 0..self.tris.len() {
            if self.tris[t].alive {
                self.tris[t].region = RegionClass::Unknown;
            }
        }
        let mut visited = vec![false; self.tris.len()];
        for start in 0..self.tris.len() {
            if !self.tris[start].alive || visited[start] {
                continue;
            }
            let mut component = vec![start];
            visited[start] = true;
            let mut stack = vec![start];
            let mut touches_box = false;
            while let Some(t) = stack.pop() {
                let v = self.tris[t].v;
                if v.iter().any(|&x| x < 4) {
                    touches_box = true;
                }
                for k in 0..3 {
                    let a = v[k];
                    let b = v[(k + 1) % 3];
                    if self.seg_map.contains_key(&undirected(a, b)) {
                        continue;
                    }
                    if let Some(&n) = self.edge_map.get(&(b, a)) {
                        if !visited[n] {
                            visited[n] = true;
                            component.push(n);
                            stack.push(n);
                        }
                    }
                }
            }
            let region = if touches_box {
                RegionClass::Outside
            } else {
                let mut rep = component[0];
                let mut rep_area = f64::NEG_INFINITY;
                for &t in &component {
                    let [a, b, c] = self.tri_points(t);
                    let area = orient2d(a, b, c);
                    if area > rep_area {
                        rep_area = area;
                        rep = t;
                    }
                }
                let [a, b, c] = self.tri_points(rep);
                let centroid = a.add(b).add(c).scale(1.0 / 3.0);
                let r = sample(centroid);
                if r == RegionClass::Unknown {
                    return Err(MeshError::GeometryFailure(format!(
                        "region sample at ({}, {}) is unclassified",
                        centroid.x, centroid.y
                    )));
                }
                r
            };
            for &t in &component {
                self.tris[t].region = region;
            }
        }
        Ok(())
    }

    fn segment_len2(&self, si: usize) -> f64 {
        let s = self.segments[si];
        let d = self.pts[s.b].sub(self.pts[s.a]);
        d.dot(d)
    }

    /// A segment is encroached when the apex of an adjacent triangle sees it
    /// under an obtuse angle, i.e. lies strictly inside its diametral circle.
    fn segment_encroached(&self, si: usize) -> bool {
        let s = self.segments[si];
        let len2 = self.segment_len2(si);
        for (x, y) in [(s.a, s.b), (s.b, s.a)] {
            if let Some(&t) = self.edge_map.get(&(x, y)) {
                let v = self.tris[t].v;
                let apex = v
                    .iter()
                    .copied()
                    .find(|&w| w != s.a && w != s.b)
                    .expect("adjacent triangle must have an apex");
                if self.point_encroaches(si, self.pts[apex], len2) {
                    return true;
                }
            }
        }
        false
    }

    fn point_encroaches(&self, si: usize, p: Point2, len2: f64) -> bool {
        let s = self.segments[si];
        let da = self.pts[s.a].sub(p);
        let db = self.pts[s.b].sub(p);
        da.dot(db) < -1e-12 * len2
    }

    fn tri_is_bad(
        &self,
        t: usize,
        min_angle_deg: f64,
        max_area: &dyn Fn(RegionClass, Point2) -> f64,
    ) -> bool {
        let tri = self.tris[t];
        if !tri.alive
            || !(tri.region == RegionClass::Fluid || tri.region == RegionClass::Structure)
        {
            return false;
        }
        let [a, b, c] = self.tri_points(t);
        let area = 0.5 * orient2d(a, b, c);
        let centroid = Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
        if area > max_area(tri.region, centroid) {
            return true;
        }
        tri_min_angle_deg(a, b, c) < min_angle_deg
    }

    /// After an insertion, requeues the fan triangles and any constrained
    /// edges whose adjacency just changed.
    fn requeue_fan(
        &self,
        new_tris_start: usize,
        seg_queue: &mut VecDeque<usize>,
        tri_queue: &mut VecDeque<usize>,
    ) {
        for t in new_tris_start..self.tris.len() {
            tri_queue.push_back(t);
            let v = self.tris[t].v;
            for k in 0..3 {
                let key = undirected(v[k], v[(k + 1) % 3]);
                if let Some(&si) = self.seg_map.get(&key) {
                    seg_queue.push_back(si);
                }
            }
        }
    }

    /// Ruppert-style refinement: encroached segments are split first, then
    /// skinny or oversized fluid/structure triangles get their circumcenter
    /// inserted, unless that circumcenter encroaches a segment, in which case
    /// the segment is split instead. Holes and the outside stay coarse. The
    /// area bound may vary over the domain; it is sampled at the centroid.
    pub fn refine(
        &mut self,
        min_angle_deg: f64,
        max_area: &dyn Fn(RegionClass, Point2) -> f64,
        budget: usize,
    ) -> Result<(), MeshError> {
        let mut seg_queue: VecDeque<usize> =
            (0..self.segments.len()).filter(|&s| self.segments[s].alive).collect();
        let mut tri_queue: VecDeque<usize> =
            (0..self.tris.len()).filter(|&t| self.tris[t].alive).collect();
        let mut inserted = 0usize;

        loop {
            if let Some(si) = seg_queue.pop_front() {
                if !self.segments[si].alive || !self.segment_encroached(si) {
                    continue;
                }
                let (_, fan) = self.split_segment(si)?;
                inserted += 1;
                if inserted > budget {
                    return Err(MeshError::GeometryFailure(
                        "refinement exceeded its insertion budget".into(),
                    ));
                }
                self.requeue_fan(fan, &mut seg_queue, &mut tri_queue);
                continue;
            }

            let Some(t) = tri_queue.pop_front() else {
                break;
            };
            if !self.tri_is_bad(t, min_angle_deg, max_area) {
                continue;
            }
            let [a, b, c] = self.tri_points(t);
            let Some(cc) = circumcenter(a, b, c) else {
                return Err(MeshError::GeometryFailure(
                    "degenerate triangle has no circumcenter".into(),
                ));
            };

            let encroached: Vec<usize> = (0..self.segments.len())
                .filter(|&si| {
                    self.segments[si].alive
                        && self.point_encroaches(si, cc, self.segment_len2(si))
                })
                .collect();
            if !encroached.is_empty() {
                for si in encroached {
                    if self.segments[si].alive {
                        let (_, fan) = self.split_segment(si)?;
                        inserted += 1;
                        self.requeue_fan(fan, &mut seg_queue, &mut tri_queue);
                    }
                }
                if inserted > budget {
                    return Err(MeshError::GeometryFailure(
                        "refinement exceeded its insertion budget".into(),
                    ));
                }
                if self.tris[t].alive {
                    tri_queue.push_back(t);
                }
                continue;
            }

            match self.insert_free(cc)? {
                InsertOutcome::Inserted {
                    new_tris_start, ..
                } => {
                    inserted += 1;
                    if inserted > budget {
                        return Err(MeshError::GeometryFailure(
                            "refinement exceeded its insertion budget".into(),
                        ));
                    }
                    self.requeue_fan(new_tris_start, &mut seg_queue, &mut tri_queue);
                }
                InsertOutcome::Blocked { seg } => {
                    if self.segments[seg].alive {
                        let (_, fan) = self.split_segment(seg)?;
                        inserted += 1;
                        self.requeue_fan(fan, &mut seg_queue, &mut tri_queue);
                    }
                    if self.tris[t].alive {
                        tri_queue.push_back(t);
                    }
                }
                InsertOutcome::Duplicate => {
                    // Circumcenter collides with an existing vertex; the
                    // triangle cannot be improved further this way.
                }
            }
        }
        Ok(())
    }

    /// Verifies that no kept triangle violates the refinement criteria. Run
    /// after the final classification: splitting an arc segment moves its
    /// midpoint onto the circle, which shifts the region boundary, so labels
    /// are only trustworthy after reclassifying.
    pub fn assert_refined(
        &self,
        min_angle_deg: f64,
        max_area: &dyn Fn(RegionClass, Point2) -> f64,
    ) -> Result<(), MeshError> {
        for t in 0..self.tris.len() {
            if self.tri_is_bad(t, min_angle_deg - 1e-9, max_area) {
                return Err(MeshError::GeometryFailure(
                    "refinement finished with bad triangles remaining".into(),
                ));
            }
        }
        Ok(())
    }

    /// Extracts the fluid and structure triangles into a Mesh, renumbering
    /// vertices and emitting the surviving constrained segments as tagged
    /// boundary edges.
    pub fn extract(&self) -> Result<super::Mesh, MeshError> {
        let mut vertex_map: Vec<Option<usize>> = vec![None; self.pts.len()];
        let mut vertices = Vec::new();
        let mut cells = Vec::new();
        for t in 0..self.tris.len() {
            let tri = self.tris[t];
            if !tri.alive {
                continue;
            }
            let region = match tri.region {
                RegionClass::Fluid => super::CellRegion::Fluid,
                RegionClass::Structure => super::CellRegion::Structure,
                _ => continue,
            };
            let mut v = [0usize; 3];
            for k in 0..3 {
                let old = tri.v[k];
                v[k] = *vertex_map[old].get_or_insert_with(|| {
                    vertices.push(self.pts[old]);
                    vertices.len() - 1
                });
            }
            cells.push(super::Cell { v, region });
        }

        let mut boundary_edges = Vec::new();
        for s in &self.segments {
            if !s.alive {
                continue;
            }
            let kept = [(s.a, s.b), (s.b, s.a)].iter().any(|&(x, y)| {
                self.edge_map.get(&(x, y)).map_or(false, |&t| {
                    matches!(
                        self.tris[t].region,
                        RegionClass::Fluid | RegionClass::Structure
                    )
                })
            });
            if !kept {
                return Err(MeshError::InvalidMesh(format!(
                    "constrained segment ({}, {}) borders no kept cell",
                    s.a, s.b
                )));
            }
            let (Some(a), Some(b)) = (vertex_map[s.a], vertex_map[s.b]) else {
                return Err(MeshError::InvalidMesh(
                    "constrained segment endpoint missing from extracted mesh".into(),
                ));
            };
            boundary_edges.push(super::BoundaryEdge { v: [a, b], tag: s.tag });
        }

        Ok(super::Mesh {
            vertices,
            cells,
            boundary_edges,
            reference_areas: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_with_constrained_diagonal_keeps_it() {
        let mut t = Triangulation::new(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0));
        let mut ids = Vec::new();
        for p in [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ] {
            match t.insert_free(p).unwrap() {
                InsertOutcome::Inserted { vertex, .. } => ids.push(vertex),
                _ => panic!("corner insert failed"),
            }
        }
        for (a, b, tag) in [
            (0, 1, EdgeTag::Walls),
            (1, 2, EdgeTag::Outlet),
            (2, 3, EdgeTag::Walls),
            (3, 0, EdgeTag::Inlet),
        ] {
            t.add_segment(ids[a], ids[b], tag, Carrier::Straight).unwrap();
        }
        t.recover_segments().unwrap();
        t.classify(&|p| {
            if p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0 {
                RegionClass::Fluid
            } else {
                RegionClass::Outside
            }
        })
        .unwrap();
        t.refine(20.0, &|_, _| 0.05, 10_000).unwrap();
        let mesh = t.extract().unwrap();
        mesh.validate().unwrap();
        assert!((mesh.total_area() - 1.0).abs() < 1e-9);
        let (angle, _) = mesh.quality();
        assert!(angle >= 20.0 - 1e-9, "min angle {angle}");
        for c in 0..mesh.cells.len() {
            assert!(mesh.cell_area(c) <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn circle_carrier_split_points_stay_on_circle() {
        let center = Point2::new(0.0, 0.0);
        let r = 1.0;
        let mut t = Triangulation::new(Point2::new(-1.5, -1.5), Point2::new(1.5, 1.5));
        let n = 6;
        let mut ring = Vec::new();
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
            let p = Point2::new(r * th.cos(), r * th.sin());
            match t.insert_free(p).unwrap() {
                InsertOutcome::Inserted { vertex, .. } => ring.push(vertex),
                _ => panic!("ring insert failed"),
            }
        }
        for k in 0..n {
            t.add_segment(
                ring[k],
                ring[(k + 1) % n],
                EdgeTag::Walls,
                Carrier::Circle { center, radius: r },
            )
            .unwrap();
        }
        t.recover_segments().unwrap();
        let si = (0..t.segments.len()).find(|&s| t.segments[s].alive).unwrap();
        let (v, _) = t.split_segment(si).unwrap();
        assert!((t.pts[v].dist(center) - r).abs() < 1e-12);
    }

    #[test]
    fn flood_fill_separates_hole_from_fluid() {
        // Unit square with a constrained inner square acting as a hole.
        let mut t = Triangulation::new(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0));
        let mut outer = Vec::new();
        for p in [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ] {
            match t.insert_free(p).unwrap() {
                InsertOutcome::Inserted { vertex, .. } => outer.push(vertex),
                _ => panic!(),
            }
        }
        let mut inner = Vec::new();
        for p in [
            Point2::new(0.4, 0.4),
            Point2::new(0.6, 0.4),
            Point2::new(0.6, 0.6),
            Point2::new(0.4, 0.6),
        ] {
            match t.insert_free(p).unwrap() {
                InsertOutcome::Inserted { vertex, .. } => inner.push(vertex),
                _ => panic!(),
            }
        }
        for k in 0..4 {
            t.add_segment(outer[k], outer[(k + 1) % 4], EdgeTag::Walls, Carrier::Straight)
                .unwrap();
            t.add_segment(inner[k], inner[(k + 1) % 4], EdgeTag::Walls, Carrier::Straight)
                .unwrap();
        }
        t.recover_segments().unwrap();
        t.classify(&|p| {
            let in_outer = p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0;
            let in_inner = p.x > 0.4 && p.x < 0.6 && p.y > 0.4 && p.y < 0.6;
            if !in_outer {
                RegionClass::Outside
            } else if in_inner {
                RegionClass::Hole
            } else {
                RegionClass::Fluid
            }
        })
        .unwrap();
        let mesh = t.extract().unwrap();
        mesh.validate().unwrap();
        // Kept area excludes the 0.2 x 0.2 hole.
        assert!((mesh.total_area() - (1.0 - 0.04)).abs() < 1e-9);
    }
}
