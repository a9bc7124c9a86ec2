use std::fmt::Write as _;
use std::path::Path;

use super::{MeshError, TriMesh};
use crate::rotgeo::Vec3;

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MeshError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_obj(&text)
}

/// Parses ASCII OBJ `v` and `f` records; other records are ignored.
/// Polygonal faces are fan-triangulated; `i/j/k` and negative indices are
/// accepted.
pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::Parse { line, reason: format!("bad vertex coordinate: {e}") })?;
                if coords.len() != 3 {
                    return Err(MeshError::Parse { line, reason: "vertex needs three coordinates".into() });
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| resolve_index(t, vertices.len(), line))
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(MeshError::Parse { line, reason: "face needs at least three vertices".into() });
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(MeshError::Parse { line: 0, reason: "no faces".into() });
    }
    TriMesh::new(vertices, faces)
}

fn resolve_index(token: &str, count: usize, line: usize) -> Result<usize, MeshError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| MeshError::Parse { line, reason: format!("bad face index {token:?}") })?;
    let resolved = match raw {
        0 => None,
        r if r > 0 => Some(r as usize - 1),
        r => (count as i64 + r).try_into().ok(),
    };
    match resolved {
        Some(i) if i < count => Ok(i),
        _ => Err(MeshError::Parse { line, reason: format!("face index {raw} out of range") }),
    }
}

pub(crate) fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgeo::shapes;

    const QUAD_CUBE: &str = "\
# unit cube, quads
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v 0.5 0.5 0.5
v -0.5 0.5 0.5
vn 0 0 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2/1 3/1 7/1 6/1
f 3//1 4//1 8//1 7//1
f -8 -4 -1 -5
";

    #[test]
    fn quad_cube_is_fan_triangulated() {
        let mesh = parse_obj(QUAD_CUBE).unwrap();
        assert_eq!(mesh.faces().len(), 12);
        assert!(mesh.is_watertight());
        assert!((mesh.volume() - 1.0).abs() < 1e-9);
        assert!(mesh.com().norm() < 1e-9);
    }

    #[test]
    fn round_trip_through_text() {
        let mesh = shapes::t_prism();
        let back = parse_obj(&mesh.to_obj_string()).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 4, .. }));
        let err = parse_obj("v 0 zero 0\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 1, .. }));
        assert!(parse_obj("v 0 0 0\n").is_err());
        assert!(matches!(load_mesh("/nonexistent/mesh.obj"), Err(MeshError::Io { .. })));
    }
}
