//! Wavefront OBJ subset: `v`, `vt`, `vn` and triangular `f v/vt[/vn]` records.

use std::fmt::Write as _;
use std::path::Path;

use super::{TriangleMesh, Vec2, Vec3};
use crate::error::{Error, Result};

/// Loads and normalizes a mesh. Vertex normals in the file are ignored and
/// recomputed.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_obj(&text)?.normalized())
}

/// Parses OBJ text without normalizing.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut positions = Vec::new();
    let mut texcoords = Vec::new();
    let mut faces = Vec::new();
    let mut corner_uvs = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let c = parse_floats(tokens, 3, line)?;
                positions.push(Vec3::new(c[0], c[1], c[2]));
            }
            "vt" => {
                let c = parse_floats(tokens, 2, line)?;
                texcoords.push(Vec2::new(c[0], c[1]));
            }
            "f" => {
                let corners: Vec<&str> = tokens.collect();
                if corners.len() != 3 {
                    return Err(Error::NonTriangularFace {
                        line,
                        corners: corners.len(),
                    });
                }
                let mut vidx = [0usize; 3];
                let mut uv = [Vec2::zeros(); 3];
                for (k, corner) in corners.iter().enumerate() {
                    let mut parts = corner.split('/');
                    let v = parts.next().unwrap_or("");
                    let vt = parts.next().unwrap_or("");
                    if vt.is_empty() {
                        return Err(Error::MissingUvs);
                    }
                    vidx[k] = resolve_index(v, positions.len(), line)?;
                    uv[k] = texcoords[resolve_index(vt, texcoords.len(), line)?];
                }
                faces.push(vidx);
                corner_uvs.push(uv);
            }
            // Normals are recomputed; grouping and material records carry no geometry.
            "vn" | "o" | "g" | "s" | "mtllib" | "usemtl" | "vp" | "l" => {}
            other => {
                return Err(Error::MeshParse {
                    line,
                    message: format!("unsupported record `{other}`"),
                })
            }
        }
    }
    if !faces.is_empty() && texcoords.is_empty() {
        return Err(Error::MissingUvs);
    }
    TriangleMesh::new(positions, faces, corner_uvs)
}

fn parse_floats<'a>(tokens: impl Iterator<Item = &'a str>, n: usize, line: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = tokens
        .take(n)
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::MeshParse {
                line,
                message: format!("invalid number `{t}`"),
            })
        })
        .collect::<Result<_>>()?;
    if vals.len() < n {
        return Err(Error::MeshParse {
            line,
            message: format!("expected {n} coordinates"),
        });
    }
    Ok(vals)
}

/// 1-based, negative = relative to the end.
fn resolve_index(token: &str, len: usize, line: usize) -> Result<usize> {
    let i: i64 = token.parse().map_err(|_| Error::MeshParse {
        line,
        message: format!("invalid index `{token}`"),
    })?;
    let resolved = if i > 0 { i - 1 } else { len as i64 + i };
    if i == 0 || resolved < 0 || resolved >= len as i64 {
        return Err(Error::MeshParse {
            line,
            message: format!("index {i} out of range (have {len})"),
        });
    }
    Ok(resolved as usize)
}

/// Writes the mesh in its original (pre-normalization) frame. `material` is
/// `(mtl file name, material name)`.
pub fn write_obj(mesh: &TriangleMesh, path: &Path, material: Option<(&str, &str)>) -> Result<()> {
    let mut out = String::new();
    if let Some((mtl, name)) = material {
        let _ = writeln!(out, "mtllib {mtl}");
        let _ = writeln!(out, "usemtl {name}");
    }
    for v in 0..mesh.vertex_count() {
        let p = mesh.original_position(v);
        let _ = writeln!(out, "v {:.7} {:.7} {:.7}", p.x, p.y, p.z);
    }
    for uvs in &mesh.corner_uvs {
        for uv in uvs {
            let _ = writeln!(out, "vt {:.7} {:.7}", uv.x, uv.y);
        }
    }
    for n in &mesh.vertex_normals {
        let _ = writeln!(out, "vn {:.6} {:.6} {:.6}", n.x, n.y, n.z);
    }
    for (i, f) in mesh.faces.iter().enumerate() {
        let _ = write!(out, "f");
        for k in 0..3 {
            let _ = write!(out, " {}/{}/{}", f[k] + 1, 3 * i + k + 1, f[k] + 1);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
