//! Mesh, field and report export.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::nodal_interpolant;
use crate::error::{Error, Result};
use crate::harness::StudyReport;
use crate::mesh::{BoundaryTag, Domain, Mesh, Point};
use crate::problems::ProblemCase;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the plain-text mesh format: a domain comment, then `VERTICES n`,
/// `TRIANGLES m` and `BEDGES k` sections with one entity per line.
pub fn write_mesh(mesh: &Mesh, mut out: impl Write) -> Result<()> {
    writeln!(out, "# maxnit mesh domain={}", mesh.domain())?;
    writeln!(out, "VERTICES {}", mesh.n_vertices())?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        writeln!(out, "{i} {:.16e} {:.16e}", v.x, v.y)?;
    }
    writeln!(out, "TRIANGLES {}", mesh.triangles().len())?;
    for (i, t) in mesh.triangles().iter().enumerate() {
        writeln!(out, "{i} {} {} {}", t.v[0], t.v[1], t.v[2])?;
    }
    writeln!(out, "BEDGES {}", mesh.boundary_edges().len())?;
    for (i, e) in mesh.boundary_edges().iter().enumerate() {
        writeln!(out, "{i} {} {} {}", e.v[0], e.v[1], e.tag)?;
    }
    Ok(())
}

pub fn export_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    write_mesh(mesh, &mut out)?;
    out.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidMesh(format!("line {line}: {msg}"))
}

/// Reads the format written by [`write_mesh`].
pub fn read_mesh(input: impl BufRead) -> Result<Mesh> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = || -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i, l?)),
            None => Err(Error::InvalidMesh("unexpected end of file".into())),
        }
    };

    let (ln, first) = next()?;
    let domain: Domain = first
        .strip_prefix("# maxnit mesh domain=")
        .ok_or_else(|| parse_err(ln, "missing domain header"))?
        .trim()
        .parse()?;

    let section = |name: &str, next: &mut dyn FnMut() -> Result<(usize, String)>| -> Result<Vec<Vec<String>>> {
        let (ln, head) = next()?;
        let count: usize = head
            .strip_prefix(name)
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| parse_err(ln, format!("expected '{name} <count>'")))?;
        (0..count)
            .map(|k| {
                let (ln, l) = next()?;
                let fields: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
                if fields.first().map(String::as_str) != Some(&k.to_string()) {
                    return Err(parse_err(ln, format!("expected entity id {k}")));
                }
                Ok(fields)
            })
            .collect()
    };

    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidMesh(format!("'{s}': {e}")));
    let id = |s: &str| s.parse::<usize>().map_err(|e| Error::InvalidMesh(format!("'{s}': {e}")));

    let points: Vec<Point> = section("VERTICES", &mut next)?
        .iter()
        .map(|f| match f.as_slice() {
            [_, x, y] => Ok([num(x)?, num(y)?]),
            _ => Err(Error::InvalidMesh("vertex lines need 3 fields".into())),
        })
        .collect::<Result<_>>()?;
    let connectivity: Vec<[usize; 3]> = section("TRIANGLES", &mut next)?
        .iter()
        .map(|f| match f.as_slice() {
            [_, a, b, c] => Ok([id(a)?, id(b)?, id(c)?]),
            _ => Err(Error::InvalidMesh("triangle lines need 4 fields".into())),
        })
        .collect::<Result<_>>()?;
    let mut tags = HashMap::new();
    for f in section("BEDGES", &mut next)? {
        match f.as_slice() {
            [_, a, b, tag] => {
                let (a, b) = (id(a)?, id(b)?);
                tags.insert((a.min(b), a.max(b)), tag.parse::<BoundaryTag>()?);
            }
            _ => return Err(Error::InvalidMesh("boundary edge lines need 4 fields".into())),
        }
    }
    let n_tags = tags.len();
    let mesh = Mesh::from_parts(domain, points, connectivity, |a, b, _| {
        tags.get(&(a.min(b), a.max(b)))
            .copied()
            .ok_or_else(|| Error::InvalidMesh(format!("boundary edge ({a}, {b}) has no tag")))
    })?;
    if mesh.boundary_edges().len() != n_tags {
        return Err(Error::InvalidMesh(format!(
            "file lists {n_tags} boundary edges, the triangles have {}",
            mesh.boundary_edges().len()
        )));
    }
    Ok(mesh)
}

pub fn import_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    read_mesh(BufReader::new(File::open(path)?))
}

/// Named nodal arrays on a mesh, ready for VTK output.
#[derive(Debug, Clone)]
pub struct FieldSnapshot<'a> {
    pub mesh: &'a Mesh,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl<'a> FieldSnapshot<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        FieldSnapshot {
            mesh,
            arrays: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.mesh.n_vertices() {
            return Err(Error::InvalidArgument(format!(
                "array '{name}' has {} values for {} vertices",
                values.len(),
                self.mesh.n_vertices()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid array name '{name}'")));
        }
        self.arrays.push((name, values));
        Ok(())
    }

    /// Computed and exact u_x, u_y, p. The exact value at a singular
    /// vertex is written as zero.
    pub fn from_solution(mesh: &'a Mesh, values: &[f64], case: &ProblemCase) -> Result<Self> {
        if values.len() != 3 * mesh.n_vertices() {
            return Err(Error::InvalidArgument("solution length does not match the mesh".into()));
        }
        let exact = nodal_interpolant(mesh, case)?;
        let field = |v: &[f64], k: usize| v.iter().skip(k).step_by(3).copied().collect::<Vec<_>>();
        let mut snap = FieldSnapshot::new(mesh);
        for (k, name) in ["u_x", "u_y", "p"].iter().enumerate() {
            snap.add(*name, field(values, k))?;
        }
        for (k, name) in ["u_x_exact", "u_y_exact", "p_exact"].iter().enumerate() {
            snap.add(*name, field(&exact, k))?;
        }
        Ok(snap)
    }

    /// Adds `<name>_error` = computed − exact for every pair present.
    pub fn add_pointwise_errors(&mut self) -> Result<()> {
        let mut extra = Vec::new();
        for (name, vals) in &self.arrays {
            if let Some((_, exact)) = self.arrays.iter().find(|(n, _)| *n == format!("{name}_exact")) {
                extra.push((format!("{name}_error"), vals.iter().zip(exact).map(|(a, b)| a - b).collect()));
            }
        }
        for (name, vals) in extra {
            self.add(name, vals)?;
        }
        Ok(())
    }
}

/// VTK legacy ASCII unstructured grid with one POINT_DATA scalar per array.
pub fn write_vtk(snapshot: &FieldSnapshot<'_>, mut out: impl Write) -> Result<()> {
    let mesh = snapshot.mesh;
    let n = mesh.n_vertices();
    let m = mesh.triangles().len();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "maxnit {} mesh", mesh.domain())?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} double")?;
    for v in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e} 0", v.x, v.y)?;
    }
    writeln!(out, "CELLS {m} {}", 4 * m)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t.v[0], t.v[1], t.v[2])?;
    }
    writeln!(out, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(out, "5")?;
    }
    if !snapshot.arrays.is_empty() {
        writeln!(out, "POINT_DATA {n}")?;
        for (name, vals) in &snapshot.arrays {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in vals {
                writeln!(out, "{v:.16e}")?;
            }
        }
    }
    Ok(())
}

pub fn export_vtk(snapshot: &FieldSnapshot<'_>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    write_vtk(snapshot, &mut out)?;
    out.flush()?;
    Ok(())
}

/// One CSV row of a study report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub h: f64,
    pub dofs: usize,
    pub err_u: f64,
    pub rate_u: Option<f64>,
    pub err_curl: f64,
    pub rate_curl: Option<f64>,
    pub err_p: f64,
    pub wall_ms: f64,
}

pub const REPORT_COLUMNS: [&str; 8] = ["h", "dofs", "err_u", "rate_u", "err_curl", "rate_curl", "err_p", "wall_ms"];

pub fn report_rows(report: &StudyReport) -> Vec<ReportRow> {
    report
        .levels
        .iter()
        .map(|l| ReportRow {
            h: l.errors.h,
            dofs: l.errors.dofs,
            err_u: l.errors.err_u,
            rate_u: l.rate_u,
            err_curl: l.errors.err_curl,
            rate_curl: l.rate_curl,
            err_p: l.errors.err_p,
            wall_ms: l.wall_ms,
        })
        .collect()
}

fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows(report: &StudyReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for r in report_rows(report) {
        let opt = |x: Option<f64>| x.map(f17).unwrap_or_default();
        w.write_record([
            f17(r.h),
            r.dofs.to_string(),
            f17(r.err_u),
            opt(r.rate_u),
            f17(r.err_curl),
            opt(r.rate_curl),
            f17(r.err_p),
            f17(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The report as CSV text (17 significant digits, empty rate cells on the
/// first row).
pub fn report_csv_string(report: &StudyReport) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(report, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn write_report_csv(report: &StudyReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    write_rows(report, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn parse_report_csv(input: impl std::io::Read) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != REPORT_COLUMNS {
        return Err(Error::InvalidArgument(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    parse_report_csv(File::open(path)?)
}
