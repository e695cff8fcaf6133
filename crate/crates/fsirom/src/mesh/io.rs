//! Plain-text mesh format. Layout:
//!
//! ```text
//! FSIMESH 1
//! <n_vertices> <n_cells> <n_edges>
//! x y                (one line per vertex)
//! v0 v1 v2 region    (one line per cell, region: fluid|structure)
//! v0 v1 tag          (one line per edge, tag: inlet|walls|outlet|interface)
//! ```
//!
//! Indices are 0-based. Floats are written with Rust's shortest round-trip
//! formatting so save followed by load reproduces the mesh bit for bit.

use super::{BoundaryEdge, Cell, CellRegion, EdgeTag, Mesh, MeshError, Point2};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

const MAGIC: &str = "FSIMESH 1";

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{MAGIC}")?;
    writeln!(
        out,
        "{} {} {}",
        mesh.vertices.len(),
        mesh.cells.len(),
        mesh.boundary_edges.len()
    )?;
    for v in &mesh.vertices {
        writeln!(out, "{} {}", v.x, v.y)?;
    }
    for c in &mesh.cells {
        let region = match c.region {
            CellRegion::Fluid => "fluid",
            CellRegion::Structure => "structure",
        };
        writeln!(out, "{} {} {} {}", c.v[0], c.v[1], c.v[2], region)?;
    }
    for e in &mesh.boundary_edges {
        writeln!(out, "{} {} {}", e.v[0], e.v[1], e.tag.as_str())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let file = std::fs::File::open(path)?;
    let mesh = parse_mesh(BufReader::new(file))?;
    mesh.validate()?;
    Ok(mesh)
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::ParseError {
        line,
        message: message.into(),
    }
}

fn parse_mesh<R: Read>(reader: BufReader<R>) -> Result<Mesh, MeshError> {
    let mut lines = reader.lines().enumerate();
    // Line numbers in errors are 1-based.
    let mut next_line = |expect: &str| -> Result<(usize, String), MeshError> {
        match lines.next() {
            Some((i, Ok(text))) => Ok((i + 1, text)),
            Some((i, Err(e))) => Err(parse_err(i + 1, format!("read failed: {e}"))),
            None => Err(parse_err(0, format!("unexpected end of file, expected {expect}"))),
        }
    };

    let (line_no, header) = next_line("header")?;
    if header.trim() != MAGIC {
        return Err(parse_err(line_no, format!("expected '{MAGIC}' header")));
    }
    let (line_no, counts) = next_line("counts")?;
    let parts: Vec<&str> = counts.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(parse_err(
            line_no,
            "counts line must hold three integers: vertices cells edges",
        ));
    }
    let parse_count = |s: &str, what: &str| -> Result<usize, MeshError> {
        s.parse()
            .map_err(|_| parse_err(line_no, format!("bad {what} count '{s}'")))
    };
    let nv = parse_count(parts[0], "vertex")?;
    let nc = parse_count(parts[1], "cell")?;
    let ne = parse_count(parts[2], "edge")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line_no, text) = next_line("vertex line")?;
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(parse_err(line_no, "vertex line must hold two floats"));
        }
        let x: f64 = parts[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad x coordinate '{}'", parts[0])))?;
        let y: f64 = parts[1]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad y coordinate '{}'", parts[1])))?;
        vertices.push(Point2::new(x, y));
    }

    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line_no, text) = next_line("cell line")?;
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(parse_err(
                line_no,
                "cell line must hold three indices and a region",
            ));
        }
        let mut v = [0usize; 3];
        for (k, s) in parts[..3].iter().enumerate() {
            v[k] = s
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad vertex index '{s}'")))?;
            if v[k] >= nv {
                return Err(parse_err(line_no, format!("vertex index {} out of range", v[k])));
            }
        }
        let region = match parts[3] {
            "fluid" => CellRegion::Fluid,
            "structure" => CellRegion::Structure,
            other => return Err(parse_err(line_no, format!("unknown region '{other}'"))),
        };
        cells.push(Cell { v, region });
    }

    let mut boundary_edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line_no, text) = next_line("edge line")?;
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(
                line_no,
                "edge line must hold two indices and a tag",
            ));
        }
        let mut v = [0usize; 2];
        for (k, s) in parts[..2].iter().enumerate() {
            v[k] = s
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad vertex index '{s}'")))?;
            if v[k] >= nv {
                return Err(parse_err(line_no, format!("vertex index {} out of range", v[k])));
            }
        }
        let tag = match parts[2] {
            "inlet" => EdgeTag::Inlet,
            "walls" => EdgeTag::Walls,
            "outlet" => EdgeTag::Outlet,
            "interface" => EdgeTag::Interface,
            other => return Err(parse_err(line_no, format!("unknown edge tag '{other}'"))),
        };
        boundary_edges.push(BoundaryEdge { v, tag });
    }

    Ok(Mesh {
        vertices,
        cells,
        boundary_edges,
        reference_areas: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_mesh() -> Mesh {
        Mesh {
            vertices: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
            cells: vec![
                Cell {
                    v: [0, 1, 2],
                    region: CellRegion::Fluid,
                },
                Cell {
                    v: [0, 2, 3],
                    region: CellRegion::Fluid,
                },
            ],
            boundary_edges: vec![
                BoundaryEdge {
                    v: [0, 1],
                    tag: EdgeTag::Walls,
                },
                BoundaryEdge {
                    v: [1, 2],
                    tag: EdgeTag::Outlet,
                },
                BoundaryEdge {
                    v: [2, 3],
                    tag: EdgeTag::Walls,
                },
                BoundaryEdge {
                    v: [3, 0],
                    tag: EdgeTag::Inlet,
                },
            ],
            reference_areas: None,
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = std::env::temp_dir().join("fsirom-mesh-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("square.msh");
        let mesh = sample_mesh();
        save_mesh(&mesh, &path).unwrap();
        let loaded = load_mesh(&path).unwrap();
        assert_eq!(loaded.vertices.len(), mesh.vertices.len());
        for (a, b) in loaded.vertices.iter().zip(&mesh.vertices) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        for (a, b) in loaded.cells.iter().zip(&mesh.cells) {
            assert_eq!(a.v, b.v);
            assert_eq!(a.region, b.region);
        }
        for (a, b) in loaded.boundary_edges.iter().zip(&mesh.boundary_edges) {
            assert_eq!(a.v, b.v);
            assert_eq!(a.tag, b.tag);
        }
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn irrational_coordinates_survive_round_trip() {
        let dir = std::env::temp_dir().join("fsirom-mesh-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("skewed.msh");
        let mut mesh = sample_mesh();
        mesh.vertices[2] = Point2::new(0.2 + 0.05 * 0.96f64.sqrt(), 1.0 / 3.0);
        save_mesh(&mesh, &path).unwrap();
        let loaded = load_mesh(&path).unwrap();
        assert_eq!(
            loaded.vertices[2].x.to_bits(),
            mesh.vertices[2].x.to_bits()
        );
        assert_eq!(
            loaded.vertices[2].y.to_bits(),
            mesh.vertices[2].y.to_bits()
        );
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn malformed_counts_report_line_number() {
        let text = "FSIMESH 1\n4 2\n";
        let err = parse_mesh(BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            MeshError::ParseError { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        let text = "MESH 2\n0 0 0\n";
        let err = parse_mesh(BufReader::new(text.as_bytes())).unwrap_err();
        assert!(matches!(err, MeshError::ParseError { line: 1, .. }));
    }

    #[test]
    fn out_of_range_cell_index_is_rejected() {
        let text = "FSIMESH 1\n3 1 0\n0 0\n1 0\n0 1\n0 1 9 fluid\n";
        let err = parse_mesh(BufReader::new(text.as_bytes())).unwrap_err();
        assert!(matches!(err, MeshError::ParseError { line: 6, .. }));
    }

    #[test]
    fn unknown_region_is_rejected() {
        let text = "FSIMESH 1\n3 1 0\n0 0\n1 0\n0 1\n0 1 2 plasma\n";
        let err = parse_mesh(BufReader::new(text.as_bytes())).unwrap_err();
        assert!(matches!(err, MeshError::ParseError { line: 6, .. }));
    }
}
