//! Output writers: load-curve CSV and legacy ASCII VTK snapshots of the
//! damage and displacement fields on a per-element sampling grid.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::solver::{CurveRow, LoadCurve};
use std::io::Write;
use std::path::Path;

/// Field snapshot: control-point values plus a visualization sampling.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    /// Control-point displacements `(ux, uy)` per compact control point.
    pub nodal_u: Vec<[f64; 2]>,
    /// Control-point phase-field coefficients.
    pub nodal_phi: Vec<f64>,
    /// Sampled physical positions (per-element grid, duplicated at shared
    /// element edges).
    pub points: Vec<[f64; 2]>,
    pub point_u: Vec<[f64; 2]>,
    pub point_phi: Vec<f64>,
    /// Quad connectivity into `points`.
    pub cells: Vec<[usize; 4]>,
}

/// Samples the fields on an `m x m` grid per element (`m >= 2`).
pub fn build_snapshot(
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    step: usize,
    samples_per_element: usize,
) -> Result<Snapshot> {
    let m = samples_per_element;
    if m < 2 {
        return Err(Error::Config(
            "snapshot sampling needs at least 2 points per element".into(),
        ));
    }
    let mut points = Vec::new();
    let mut point_u = Vec::new();
    let mut point_phi = Vec::new();
    let mut cells = Vec::new();
    for e in &mesh.elements {
        let base = points.len();
        let ([x0, x1], [y0, y1]) = e.bounds;
        for i in 0..m {
            let xi = x0 + (x1 - x0) * i as f64 / (m - 1) as f64;
            for j in 0..m {
                let eta = y0 + (y1 - y0) * j as f64 / (m - 1) as f64;
                let (xy, uv, ph) = mesh.sample_fields(xi, eta, u, phi)?;
                if !(-0.01..=1.01).contains(&ph) {
                    return Err(Error::Solver(format!(
                        "sampled phase field {ph:.4} outside [-0.01, 1.01] at ({}, {})",
                        xy[0], xy[1]
                    )));
                }
                points.push(xy);
                point_u.push(uv);
                point_phi.push(ph);
            }
        }
        for i in 0..m - 1 {
            for j in 0..m - 1 {
                let p = base + i * m + j;
                cells.push([p, p + m, p + m + 1, p + 1]);
            }
        }
    }
    let nodal_u = (0..mesh.n_cp).map(|c| [u[2 * c], u[2 * c + 1]]).collect();
    Ok(Snapshot {
        step,
        nodal_u,
        nodal_phi: phi.to_vec(),
        points,
        point_u,
        point_phi,
        cells,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

/// Streaming CSV writer: one row per load step, flushed immediately so
/// interrupted runs keep their partial curve.
pub struct CurveWriter<W: Write> {
    out: W,
}

impl CurveWriter<std::io::BufWriter<std::fs::File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path)?;
        Self::new(std::io::BufWriter::new(file))
    }
}

impl<W: Write> CurveWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        out.write_all(b"step,applied_mm,reaction_N,cmod_mm,iters,status\n")?;
        out.flush()?;
        Ok(CurveWriter { out })
    }

    pub fn append(&mut self, row: &CurveRow) -> Result<()> {
        let cmod = row.cmod_mm.map(fmt).unwrap_or_default();
        writeln!(
            self.out,
            "{},{},{},{},{},{}",
            row.step,
            fmt(row.applied_mm),
            fmt(row.reaction_n),
            cmod,
            row.iters,
            row.status
        )?;
        self.out.flush()?;
        Ok(())
    }
}

/// One-shot curve export.
pub fn write_curve_csv(curve: &LoadCurve, path: &Path) -> Result<()> {
    let mut w = CurveWriter::create(path)?;
    for row in &curve.rows {
        w.append(row)?;
    }
    Ok(())
}

/// Renders the curve CSV into a string (deterministic bytes).
pub fn curve_csv_string(curve: &LoadCurve) -> String {
    let mut buf = Vec::new();
    {
        let mut w = CurveWriter::new(&mut buf).expect("in-memory write");
        for row in &curve.rows {
            w.append(row).expect("in-memory write");
        }
    }
    String::from_utf8(buf).expect("csv is ascii")
}

/// Legacy ASCII VTK unstructured grid with `phi` scalars and
/// `displacement` vectors on the sampling points.
pub fn write_vtk(snapshot: &Snapshot, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_vtk_to(snapshot, &mut w)
}

pub fn write_vtk_to(snapshot: &Snapshot, w: &mut impl Write) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "phase-field snapshot step {}", snapshot.step)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", snapshot.points.len())?;
    for p in &snapshot.points {
        writeln!(w, "{} {} 0", fmt(p[0]), fmt(p[1]))?;
    }
    writeln!(w, "CELLS {} {}", snapshot.cells.len(), 5 * snapshot.cells.len())?;
    for c in &snapshot.cells {
        writeln!(w, "4 {} {} {} {}", c[0], c[1], c[2], c[3])?;
    }
    writeln!(w, "CELL_TYPES {}", snapshot.cells.len())?;
    for _ in &snapshot.cells {
        writeln!(w, "9")?;
    }
    writeln!(w, "POINT_DATA {}", snapshot.points.len())?;
    writeln!(w, "SCALARS phi double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in &snapshot.point_phi {
        writeln!(w, "{}", fmt(*v))?;
    }
    writeln!(w, "VECTORS displacement double")?;
    for v in &snapshot.point_u {
        writeln!(w, "{} {} 0", fmt(v[0]), fmt(v[1]))?;
    }
    w.flush()?;
    Ok(())
}
