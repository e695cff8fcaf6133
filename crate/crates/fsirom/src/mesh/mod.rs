//! Triangle meshes for the channel-with-beam benchmark: region-tagged cells
//! (fluid vs structure), tagged boundary edges, conformity validation, quality
//! measures, and displaced copies for the moving-mesh formulation.

mod delaunay;
mod generator;
mod io;

pub use generator::{
    generate_benchmark_mesh, generate_benchmark_mesh_graded, generate_channel_mesh, MeshGrading,
};
pub use io::{load_mesh, save_mesh};

/// 2D point with the handful of vector operations the mesher needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRegion {
    Fluid,
    Structure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    Inlet,
    Walls,
    Outlet,
    Interface,
}

impl EdgeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeTag::Inlet => "inlet",
            EdgeTag::Walls => "walls",
            EdgeTag::Outlet => "outlet",
            EdgeTag::Interface => "interface",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub v: [usize; 3],
    pub region: CellRegion,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: EdgeTag,
}

/// Conforming triangle mesh. Cells are counter-clockwise; boundary edges carry
/// the inflow/wall/outflow/interface tags that drive boundary conditions.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub cells: Vec<Cell>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Cell areas of the undisplaced mesh this one was displaced from; `None`
    /// for meshes straight out of the generator or a file.
    pub reference_areas: Option<Vec<f64>>,
}

/// Channel/cylinder/beam dimensions and the two tracked points. `point_b` is
/// stored for completeness but not consumed by the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkGeometry {
    pub channel_length: f64,
    pub channel_height: f64,
    pub cylinder_center: Point2,
    pub cylinder_radius: f64,
    pub beam_length: f64,
    pub beam_height: f64,
    pub beam_lower_right: Point2,
    pub point_a: Point2,
    pub point_b: Point2,
}

impl Default for BenchmarkGeometry {
    fn default() -> Self {
        BenchmarkGeometry {
            channel_length: 2.5,
            channel_height: 0.41,
            cylinder_center: Point2::new(0.2, 0.2),
            cylinder_radius: 0.05,
            beam_length: 0.35,
            beam_height: 0.02,
            beam_lower_right: Point2::new(0.6, 0.19),
            point_a: Point2::new(0.6, 0.2),
            point_b: Point2::new(0.15, 0.2),
        }
    }
}

#[derive(Debug)]
pub enum MeshError {
    ParseError { line: usize, message: String },
    GeometryFailure(String),
    TangledMesh { cell: usize },
    InvalidMesh(String),
    Io(std::io::Error),
}

impl std::fmt::Display for MeshError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshError::ParseError { line, message } => {
                write!(f, "mesh parse error at line {line}: {message}")
            }
            MeshError::GeometryFailure(msg) => write!(f, "mesh generation failed: {msg}"),
            MeshError::TangledMesh { cell } => {
                write!(f, "displaced mesh tangles at cell {cell} (non-positive area)")
            }
            MeshError::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            MeshError::Io(e) => write!(f, "mesh io error: {e}"),
        }
    }
}

impl std::error::Error for MeshError {}

impl From<std::io::Error> for MeshError {
    fn from(e: std::io::Error) -> Self {
        MeshError::Io(e)
    }
}

pub fn triangle_signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b.sub(a)).cross(c.sub(a))
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_points(&self, c: usize) -> [Point2; 3] {
        let v = self.cells[c].v;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, p] = self.cell_points(c);
        triangle_signed_area(a, b, p)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    /// Structural and geometric validation: index bounds, positive cell
    /// areas, and boundary/interface conformity (a non-interface boundary edge
    /// belongs to exactly one cell; an interface edge separates exactly one
    /// fluid cell from one structure cell, and every fluid/structure contact
    /// is tagged as interface).
    pub fn validate(&self) -> Result<(), MeshError> {
        let nv = self.vertices.len();
        for (i, cell) in self.cells.iter().enumerate() {
            for &v in &cell.v {
                if v >= nv {
                    return Err(MeshError::InvalidMesh(format!(
                        "cell {i} references vertex {v} out of range"
                    )));
                }
            }
            if self.cell_area(i) <= 0.0 {
                return Err(MeshError::InvalidMesh(format!(
                    "cell {i} has non-positive area {}",
                    self.cell_area(i)
                )));
            }
        }
        let mut edge_cells: std::collections::HashMap<(usize, usize), Vec<usize>> =
            std::collections::HashMap::new();
        for (i, cell) in self.cells.iter().enumerate() {
            for k in 0..3 {
                let a = cell.v[k];
                let b = cell.v[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                edge_cells.entry(key).or_default().push(i);
            }
        }
        let mut tagged: std::collections::HashMap<(usize, usize), EdgeTag> =
            std::collections::HashMap::new();
        for (i, e) in self.boundary_edges.iter().enumerate() {
            if e.v[0] >= nv || e.v[1] >= nv || e.v[0] == e.v[1] {
                return Err(MeshError::InvalidMesh(format!(
                    "boundary edge {i} has invalid endpoints"
                )));
            }
            let key = (e.v[0].min(e.v[1]), e.v[0].max(e.v[1]));
            if tagged.insert(key, e.tag).is_some() {
                return Err(MeshError::InvalidMesh(format!(
                    "boundary edge {i} duplicated"
                )));
            }
            let Some(cells) = edge_cells.get(&key) else {
                return Err(MeshError::InvalidMesh(format!(
                    "boundary edge {i} is not an edge of any cell"
                )));
            };
            match e.tag {
                EdgeTag::Interface => {
                    if cells.len() != 2 {
                        return Err(MeshError::InvalidMesh(format!(
                            "interface edge {i} borders {} cells, expected 2",
                            cells.len()
                        )));
                    }
                    let r0 = self.cells[cells[0]].region;
                    let r1 = self.cells[cells[1]].region;
                    if r0 == r1 {
                        return Err(MeshError::InvalidMesh(format!(
                            "interface edge {i} does not separate fluid from structure"
                        )));
                    }
                }
                _ => {
                    if cells.len() != 1 {
                        return Err(MeshError::InvalidMesh(format!(
                            "boundary edge {i} borders {} cells, expected 1",
                            cells.len()
                        )));
                    }
                }
            }
        }
        // Every fluid/structure contact edge must be tagged interface, and
        // every edge on the outer hull must carry some tag.
        for (key, cells) in &edge_cells {
            match cells.len() {
                1 => {
                    if !tagged.contains_key(key) {
                        return Err(MeshError::InvalidMesh(format!(
                            "hull edge {key:?} carries no boundary tag"
                        )));
                    }
                }
                2 => {
                    let r0 = self.cells[cells[0]].region;
                    let r1 = self.cells[cells[1]].region;
                    if r0 != r1 && tagged.get(key) != Some(&EdgeTag::Interface) {
                        return Err(MeshError::InvalidMesh(format!(
                            "fluid/structure contact edge {key:?} not tagged interface"
                        )));
                    }
                }
                n => {
                    return Err(MeshError::InvalidMesh(format!(
                        "edge {key:?} shared by {n} cells"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Minimum interior angle (degrees) and minimum current/reference area
    /// ratio. The ratio is 1 for meshes that were never displaced.
    pub fn quality(&self) -> (f64, f64) {
        let mut min_angle = f64::INFINITY;
        let mut min_ratio = f64::INFINITY;
        for c in 0..self.cells.len() {
            let pts = self.cell_points(c);
            for k in 0..3 {
                let a = pts[k];
                let b = pts[(k + 1) % 3];
                let d = pts[(k + 2) % 3];
                let u = b.sub(a);
                let v = d.sub(a);
                let cosang = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cosang.acos().to_degrees());
            }
            let area = self.cell_area(c);
            let reference = self
                .reference_areas
                .as_ref()
                .map_or(area, |r| r[c]);
            min_ratio = min_ratio.min(area / reference);
        }
        if self.cells.is_empty() {
            (0.0, 1.0)
        } else {
            (min_angle, min_ratio)
        }
    }

    /// Returns a copy with vertices moved by `disp` (one displacement per
    /// vertex) and `reference_areas` set from this mesh. Fails with
    /// `TangledMesh` if any displaced cell loses positive orientation.
    pub fn displaced(&self, disp: &[Point2]) -> Result<Mesh, MeshError> {
        assert_eq!(disp.len(), self.vertices.len(), "displacement length");
        let vertices: Vec<Point2> = self
            .vertices
            .iter()
            .zip(disp)
            .map(|(p, d)| p.add(*d))
            .collect();
        let reference: Vec<f64> = (0..self.cells.len()).map(|c| self.cell_area(c)).collect();
        let moved = Mesh {
            vertices,
            cells: self.cells.clone(),
            boundary_edges: self.boundary_edges.clone(),
            reference_areas: Some(reference),
        };
        for c in 0..moved.cells.len() {
            if moved.cell_area(c) <= 0.0 {
                return Err(MeshError::TangledMesh { cell: c });
            }
        }
        Ok(moved)
    }

    /// Vertices belonging to at least one fluid cell.
    pub fn fluid_vertex_mask(&self) -> Vec<bool> {
        self.region_vertex_mask(CellRegion::Fluid)
    }

    /// Vertices belonging to at least one structure cell.
    pub fn structure_vertex_mask(&self) -> Vec<bool> {
        self.region_vertex_mask(CellRegion::Structure)
    }

    fn region_vertex_mask(&self, region: CellRegion) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for cell in &self.cells {
            if cell.region == region {
                for &v in &cell.v {
                    mask[v] = true;
                }
            }
        }
        mask
    }

    /// Vertices incident to an edge with the given tag.
    pub fn tag_vertex_mask(&self, tag: EdgeTag) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for e in &self.boundary_edges {
            if e.tag == tag {
                mask[e.v[0]] = true;
                mask[e.v[1]] = true;
            }
        }
        mask
    }

    /// Index of the vertex within `tol` of `p`, if any.
    pub fn find_vertex_at(&self, p: Point2, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = v.dist(p);
            if d <= tol && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }
}
