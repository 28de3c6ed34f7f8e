//! Plain-text mesh format.
//!
//! ```text
//! fcfv-mesh <dim> <n_vertices> <n_cells> <n_boundary_faces>
//! <x> <y> [<z>]                      one line per vertex
//! <v0> <v1> <v2> [<v3>]              one line per cell, zero-based
//! <v0> <v1> [<v2>] dirichlet|neumann one line per boundary face
//! ```
//!
//! Blank lines are ignored. Boundary faces that are not listed default to
//! Dirichlet.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, MeshError, SimplicialMesh};

const MAGIC: &str = "fcfv-mesh";

pub fn write_mesh(mesh: &SimplicialMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<SimplicialMesh, MeshError> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

pub fn format_mesh(mesh: &SimplicialMesh) -> String {
    let dim = mesh.dim();
    let mut out = String::new();
    let nb = mesh.n_boundary_faces();
    writeln!(out, "{MAGIC} {dim} {} {} {nb}", mesh.n_vertices(), mesh.n_cells()).unwrap();
    for v in mesh.vertices() {
        let coords: Vec<String> = v[..dim].iter().map(|c| format!("{c:?}")).collect();
        writeln!(out, "{}", coords.join(" ")).unwrap();
    }
    for c in mesh.cells() {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        writeln!(out, "{}", ids.join(" ")).unwrap();
    }
    for f in mesh.boundary_faces() {
        let ids: Vec<String> = mesh.face(f).iter().map(|i| i.to_string()).collect();
        let tag = mesh.boundary_tag(f).unwrap_or(BoundaryTag::Dirichlet);
        writeln!(out, "{} {}", ids.join(" "), tag.as_str()).unwrap();
    }
    out
}

pub fn parse_mesh(text: &str) -> Result<SimplicialMesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: String| MeshError::Parse { line, msg };

    let (hl, header) = lines.next().ok_or_else(|| err(1, "empty mesh file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != MAGIC {
        return Err(err(hl, format!("expected `{MAGIC} <dim> <n_vertices> <n_cells> <n_boundary_faces>`")));
    }
    let count = |s: &str| s.parse::<usize>().map_err(|_| err(hl, format!("invalid count `{s}`")));
    let dim = count(tokens[1])?;
    if dim != 2 && dim != 3 {
        return Err(err(hl, format!("dimension must be 2 or 3, got {dim}")));
    }
    let (nv, nc, nb) = (count(tokens[2])?, count(tokens[3])?, count(tokens[4])?);

    let mut next = |what: &str, expected: usize| -> Result<(usize, Vec<&str>), MeshError> {
        let (ln, l) = lines.next().ok_or_else(|| err(0, format!("unexpected end of file while reading {what}")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != expected {
            return Err(err(ln, format!("{what} line has {} fields, expected {expected}", toks.len())));
        }
        Ok((ln, toks))
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, toks) = next("vertex", dim)?;
        let mut p = [0.0; 3];
        for (d, t) in toks.iter().enumerate() {
            p[d] = t.parse().map_err(|_| err(ln, format!("invalid coordinate `{t}`")))?;
        }
        vertices.push(p);
    }
    let index = |ln: usize, t: &str| -> Result<usize, MeshError> {
        let v: usize = t.parse().map_err(|_| err(ln, format!("invalid index `{t}`")))?;
        if v >= nv {
            return Err(err(ln, format!("vertex index {v} out of range (n_vertices = {nv})")));
        }
        Ok(v)
    };
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, toks) = next("cell", dim + 1)?;
        cells.push(toks.iter().map(|t| index(ln, t)).collect::<Result<Vec<_>, _>>()?);
    }
    let mut tagged = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, toks) = next("boundary face", dim + 1)?;
        let verts = toks[..dim].iter().map(|t| index(ln, t)).collect::<Result<Vec<_>, _>>()?;
        let tag = match toks[dim] {
            "dirichlet" => BoundaryTag::Dirichlet,
            "neumann" => BoundaryTag::Neumann,
            other => return Err(err(ln, format!("unknown boundary tag `{other}`"))),
        };
        tagged.push((ln, verts, tag));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing content after declared counts".into()));
    }

    let mut mesh = SimplicialMesh::new(dim, vertices, cells)?;
    for (ln, verts, tag) in tagged {
        let f = mesh
            .find_face(&verts)
            .filter(|&f| mesh.is_boundary_face(f))
            .ok_or_else(|| err(ln, format!("{verts:?} is not a boundary face")))?;
        mesh.set_boundary_tag(f, tag)?;
    }
    Ok(mesh)
}
