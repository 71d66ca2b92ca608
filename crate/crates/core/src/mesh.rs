//! Analysis mesh on top of a spline patch: elements (non-empty knot spans),
//! Gauss quadrature with precomputed basis data, coupled (u_x, u_y, phi)
//! dof numbering, graded refinement bands, rectangular cutouts (notches),
//! and boundary-condition plumbing.

use crate::error::{Error, Result};
use crate::splines::{Direction, KnotVector, SplinePatch};

/// Gauss–Legendre rule on `[-1, 1]` with `n` points (1..=6).
pub fn gauss_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (pts, wts): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 0.577_350_269_189_625_8;
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = 0.774_596_669_241_483_4;
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let (a, b) = (0.339_981_043_584_856_26, 0.861_136_311_594_052_6);
            let (wa, wb) = (0.652_145_154_862_546_1, 0.347_854_845_137_453_86);
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let (a, b) = (0.538_469_310_105_683_1, 0.906_179_845_938_664);
            let (wa, wb) = (0.478_628_670_499_366_47, 0.236_926_885_056_189_08);
            let w0 = 0.568_888_888_888_888_9;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, w0, wa, wb])
        }
        6 => {
            let (a, b, c) = (
                0.238_619_186_083_196_9,
                0.661_209_386_466_264_5,
                0.932_469_514_203_152,
            );
            let (wa, wb, wc) = (
                0.467_913_934_572_691_05,
                0.360_761_573_048_138_6,
                0.171_324_492_379_170_35,
            );
            (vec![-c, -b, -a, a, b, c], vec![wc, wb, wa, wa, wb, wc])
        }
        _ => {
            return Err(Error::Domain(format!(
                "gauss rule needs 1..=6 points, got {n}"
            )))
        }
    };
    Ok((pts, wts))
}

/// Precomputed basis data at one quadrature point.
#[derive(Debug, Clone)]
pub struct QuadPointData {
    pub xy: [f64; 2],
    /// Gauss weight times |J|.
    pub w_detj: f64,
    /// Basis values for the element's control points (local ordering).
    pub n: Vec<f64>,
    /// Physical first derivatives `[d/dx, d/dy]`.
    pub dn: Vec<[f64; 2]>,
    /// Laplacian entries `N_xx + N_yy`.
    pub lap: Vec<f64>,
}

/// One non-empty knot span with its active control points and quadrature.
#[derive(Debug, Clone)]
pub struct Element {
    pub span: (usize, usize),
    /// Physical bounds `([x0, x1], [y0, y1])` (rectangle meshes only).
    pub bounds: ([f64; 2], [f64; 2]),
    /// Compact control-point ids in local (xi-major) ordering.
    pub cps: Vec<usize>,
    pub qps: Vec<QuadPointData>,
}

/// Axis-aligned rectangular cutout used for notches and corner removals.
/// Interior edges must coincide with knot lines and the rectangle must
/// reach the patch boundary.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NotchSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

/// Analysis mesh: immutable after construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub patch: SplinePatch,
    pub degree: usize,
    pub elements: Vec<Element>,
    /// Number of active control points.
    pub n_cp: usize,
    /// compact id -> grid index (`ix * n_eta + iy`)
    active_grid: Vec<usize>,
    /// grid index -> compact id
    grid_to_compact: Vec<Option<usize>>,
    /// Greville physical position per compact control point.
    cp_xy: Vec<[f64; 2]>,
    /// Domain size (mm); parametric and physical coincide.
    pub extent: [f64; 2],
}

/// Patch edge tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSide {
    Left,
    Right,
    Bottom,
    Top,
}

/// A point constraint resolved on the boundary.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub side: EdgeSide,
    /// Parametric coordinate along the edge.
    pub param: f64,
    /// Active control points with their basis values at the point.
    pub weights: Vec<(usize, f64)>,
    /// Control point whose Greville position is closest.
    pub nearest_cp: usize,
}

/// Single prescribed dof. For `driven` dofs the applied value at a load
/// step is `value * applied_displacement`; otherwise it is `value`.
#[derive(Debug, Clone, Copy)]
pub struct DirichletDof {
    pub dof: usize,
    pub value: f64,
    pub driven: bool,
}

/// Constant traction (N/mm per unit thickness) on part of a patch edge.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EdgeTraction {
    pub side: EdgeSide,
    pub range: [f64; 2],
    pub t: [f64; 2],
}

#[derive(Debug, Clone, Default)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<DirichletDof>,
    pub tractions: Vec<EdgeTraction>,
    pub body_force: [f64; 2],
}

impl BoundaryConditions {
    pub fn driven_dofs(&self) -> Vec<&DirichletDof> {
        self.dirichlet.iter().filter(|d| d.driven).collect()
    }

    /// Checks the driven/traction exclusivity rule.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let mut traction_dofs = std::collections::HashSet::new();
        for tr in &self.tractions {
            for qp in mesh.edge_quadrature(tr.side, tr.range)? {
                for &(cp, _) in &qp.cps_n {
                    traction_dofs.insert(mesh.dof_ux(cp));
                    traction_dofs.insert(mesh.dof_uy(cp));
                }
            }
        }
        for d in &self.dirichlet {
            if d.driven && traction_dofs.contains(&d.dof) {
                return Err(Error::Config(format!(
                    "dof {} is both traction-loaded and displacement-driven",
                    d.dof
                )));
            }
        }
        Ok(())
    }
}

/// 1D quadrature point on a boundary edge.
#[derive(Debug, Clone)]
pub struct EdgeQp {
    /// Active control points with basis values.
    pub cps_n: Vec<(usize, f64)>,
    /// Gauss weight times arc-length Jacobian.
    pub w_ds: f64,
}

/// One refinement band: spans intersecting `range` along `axis` end up
/// with width at most `h`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefinementBand {
    pub axis: Axis,
    pub range: [f64; 2],
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Mesh recipe for a rectangular domain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeshSpec {
    pub degree: usize,
    /// Coarse span caps per direction (mm).
    pub h_max: [f64; 2],
    #[serde(default)]
    pub bands: Vec<RefinementBand>,
    /// Knot lines that must exist (load points, cutout edges, ...).
    #[serde(default)]
    pub align_x: Vec<f64>,
    #[serde(default)]
    pub align_y: Vec<f64>,
}

const MAX_SPANS_PER_DIRECTION: usize = 4000;

/// Builds the graded knot partition of `[0, length]`: band spans at their
/// target widths, growing outward by at most a factor 2 per span, capped
/// at `h_max`, honoring mandatory alignment coordinates.
fn refine_partition(
    length: f64,
    h_max: f64,
    bands: &[(f64, f64, f64)],
    aligns: &[f64],
) -> Result<Vec<f64>> {
    let tol = 1e-9 * length;
    if h_max <= 0.0 {
        return Err(Error::Refinement("h_max must be positive".into()));
    }
    for &(lo, hi, h) in bands {
        if lo < -tol || hi > length + tol || lo >= hi {
            return Err(Error::Refinement(format!(
                "band [{lo}, {hi}] outside domain [0, {length}]"
            )));
        }
        if h <= 0.0 {
            return Err(Error::Refinement("band width h must be positive".into()));
        }
    }
    let mut breaks = vec![0.0, length];
    for &a in aligns {
        if a < -tol || a > length + tol {
            return Err(Error::Refinement(format!(
                "alignment point {a} outside domain [0, {length}]"
            )));
        }
        breaks.push(a.clamp(0.0, length));
    }
    for &(lo, hi, _) in bands {
        breaks.push(lo.max(0.0));
        breaks.push(hi.min(length));
    }
    sort_dedup(&mut breaks, tol);

    // cap everything at h_max
    subdivide_gaps(&mut breaks, tol, |_, _| h_max);
    // band interiors at their target width
    for &(lo, hi, h) in bands {
        subdivide_gaps(&mut breaks, tol, |a, b| {
            if a >= lo - tol && b <= hi + tol {
                h
            } else {
                f64::INFINITY
            }
        });
    }
    // graded walk outward from each band edge
    for &(lo, hi, h) in bands {
        sweep(&mut breaks, hi, h, h_max, length, tol, true);
        sweep(&mut breaks, lo, h, h_max, length, tol, false);
    }
    // global smoothing: adjacent spans never differ by more than 2x
    let mut guard = 0;
    loop {
        let mut split_at = None;
        for i in 0..breaks.len() - 2 {
            let w1 = breaks[i + 1] - breaks[i];
            let w2 = breaks[i + 2] - breaks[i + 1];
            if w2 > 2.0 * w1 * (1.0 + 1e-9) {
                split_at = Some(i + 1);
                break;
            }
            if w1 > 2.0 * w2 * (1.0 + 1e-9) {
                split_at = Some(i);
                break;
            }
        }
        match split_at {
            Some(i) => {
                let mid = 0.5 * (breaks[i] + breaks[i + 1]);
                breaks.insert(i + 1, mid);
            }
            None => break,
        }
        guard += 1;
        if guard > 100_000 {
            return Err(Error::Refinement("grading smoother did not converge".into()));
        }
    }
    if breaks.len() > MAX_SPANS_PER_DIRECTION {
        return Err(Error::Refinement(format!(
            "partition of {} spans exceeds the {MAX_SPANS_PER_DIRECTION} cap",
            breaks.len() - 1
        )));
    }
    Ok(breaks)
}

fn sort_dedup(v: &mut Vec<f64>, tol: f64) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() <= tol);
}

fn subdivide_gaps(breaks: &mut Vec<f64>, tol: f64, target: impl Fn(f64, f64) -> f64) {
    let mut out = Vec::with_capacity(breaks.len());
    for i in 0..breaks.len() - 1 {
        let (a, b) = (breaks[i], breaks[i + 1]);
        out.push(a);
        let h = target(a, b);
        if h.is_finite() && b - a > h + tol {
            let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
            for k in 1..n {
                out.push(a + (b - a) * k as f64 / n as f64);
            }
        }
    }
    out.push(*breaks.last().unwrap());
    *breaks = out;
}

fn sweep(breaks: &mut Vec<f64>, from: f64, h: f64, h_max: f64, length: f64, tol: f64, right: bool) {
    let mut pos = from;
    let mut w = h;
    loop {
        let next = if right {
            breaks.iter().copied().filter(|&x| x > pos + tol).fold(f64::INFINITY, f64::min)
        } else {
            breaks.iter().copied().filter(|&x| x < pos - tol).fold(f64::NEG_INFINITY, f64::max)
        };
        if !next.is_finite() {
            break;
        }
        let allowed = (2.0 * w).min(h_max);
        let gap = (next - pos).abs();
        if gap <= allowed + tol {
            w = gap;
            pos = next;
        } else {
            let np = if right { pos + allowed } else { pos - allowed };
            breaks.push(np);
            sort_dedup(breaks, tol);
            w = allowed;
            pos = np;
        }
        if (right && pos >= length - tol) || (!right && pos <= tol) {
            break;
        }
    }
}

/// Builds the analysis mesh for a rectangular `lx x ly` domain via graded
/// knot insertion into a single Bezier patch.
pub fn build_mesh(lx: f64, ly: f64, spec: &MeshSpec) -> Result<Mesh> {
    if lx <= 0.0 || ly <= 0.0 {
        return Err(Error::Geometry("domain must have positive extent".into()));
    }
    let p = spec.degree;
    if !(2..=4).contains(&p) {
        return Err(Error::Domain(format!("degree {p} outside 2..=4")));
    }
    let mut bx = Vec::new();
    let mut by = Vec::new();
    for b in &spec.bands {
        match b.axis {
            Axis::X => bx.push((b.range[0], b.range[1], b.h)),
            Axis::Y => by.push((b.range[0], b.range[1], b.h)),
        }
    }
    let breaks_x = refine_partition(lx, spec.h_max[0], &bx, &spec.align_x)?;
    let breaks_y = refine_partition(ly, spec.h_max[1], &by, &spec.align_y)?;

    // grow from the single-span Bezier rectangle by knot insertion;
    // the mapped geometry stays the identity throughout
    let kv_x0 = KnotVector::from_breaks(p, 0.0, lx, &[])?;
    let kv_y0 = KnotVector::from_breaks(p, 0.0, ly, &[])?;
    let mut patch = SplinePatch::rectangle(kv_x0, kv_y0)?;
    for &x in &breaks_x[1..breaks_x.len() - 1] {
        patch = patch.insert_knot(Direction::Xi, x)?;
    }
    for &y in &breaks_y[1..breaks_y.len() - 1] {
        patch = patch.insert_knot(Direction::Eta, y)?;
    }
    Mesh::from_patch(patch, [lx, ly])
}

impl Mesh {
    /// Mesh over every non-empty span of `patch`, all control points active.
    pub fn from_patch(patch: SplinePatch, extent: [f64; 2]) -> Result<Mesh> {
        let px = patch.kv_xi.degree();
        let py = patch.kv_eta.degree();
        if px != py {
            return Err(Error::Domain(
                "mixed degrees per direction are not supported".into(),
            ));
        }
        let nq = px + 1;
        let (gp, gw) = gauss_rule(nq)?;
        let (n_xi, n_eta) = (patch.n_xi(), patch.n_eta());
        let n_grid = n_xi * n_eta;

        let mut elements = Vec::new();
        for &(sx, x0, x1) in &patch.kv_xi.spans() {
            for &(sy, y0, y1) in &patch.kv_eta.spans() {
                let mut cps = Vec::with_capacity((px + 1) * (py + 1));
                for lx in 0..=px {
                    let gx = sx - px + lx;
                    for ly in 0..=py {
                        let gy = sy - py + ly;
                        cps.push(gx * n_eta + gy);
                    }
                }
                let mut qps = Vec::with_capacity(nq * nq);
                for (i, &ti) in gp.iter().enumerate() {
                    let xi = 0.5 * ((x1 - x0) * ti + x0 + x1);
                    for (j, &tj) in gp.iter().enumerate() {
                        let eta = 0.5 * ((y1 - y0) * tj + y0 + y1);
                        let g = patch.evaluate(xi, eta)?;
                        debug_assert_eq!(g.spans, (sx, sy));
                        let w = gw[i] * gw[j] * 0.25 * (x1 - x0) * (y1 - y0);
                        qps.push(QuadPointData {
                            xy: g.xy,
                            w_detj: w * g.det_j,
                            n: g.n,
                            dn: g.dn_dx,
                            lap: g.d2n_dx2.iter().map(|d| d[0] + d[1]).collect(),
                        });
                    }
                }
                elements.push(Element {
                    span: (sx, sy),
                    bounds: ([x0, x1], [y0, y1]),
                    cps,
                    qps,
                });
            }
        }

        let active_grid: Vec<usize> = (0..n_grid).collect();
        let grid_to_compact = (0..n_grid).map(Some).collect();
        let mut mesh = Mesh {
            patch,
            degree: px,
            elements,
            n_cp: n_grid,
            active_grid,
            grid_to_compact,
            cp_xy: Vec::new(),
            extent,
        };
        mesh.rebuild_cp_positions()?;
        Ok(mesh)
    }

    fn rebuild_cp_positions(&mut self) -> Result<()> {
        let n_eta = self.patch.n_eta();
        self.cp_xy = self
            .active_grid
            .iter()
            .map(|&g| self.patch.greville_point(g / n_eta, g % n_eta))
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }

    /// Removes the elements inside an axis-aligned cutout and drops control
    /// points that lose all support. The cut faces become free boundaries.
    pub fn apply_notch(&self, notch: &NotchSpec) -> Result<Mesh> {
        let [lx, ly] = self.extent;
        let tol = 1e-9 * lx.max(ly);
        if notch.x0 >= notch.x1 || notch.y0 >= notch.y1 {
            // zero-extent slit: nothing to remove
            return Ok(self.clone());
        }
        let touches = notch.x0 <= tol
            || notch.x1 >= lx - tol
            || notch.y0 <= tol
            || notch.y1 >= ly - tol;
        if !touches {
            return Err(Error::Refinement(
                "notch must reach the patch boundary".into(),
            ));
        }
        // interior edges must land on knot lines
        for (val, kv, len) in [
            (notch.x0, &self.patch.kv_xi, lx),
            (notch.x1, &self.patch.kv_xi, lx),
        ] {
            if val > tol && val < len - tol && !is_break(kv, val, tol) {
                return Err(Error::Refinement(format!(
                    "notch edge x = {val} is not a knot line; refine the mesh first"
                )));
            }
        }
        for (val, kv, len) in [
            (notch.y0, &self.patch.kv_eta, ly),
            (notch.y1, &self.patch.kv_eta, ly),
        ] {
            if val > tol && val < len - tol && !is_break(kv, val, tol) {
                return Err(Error::Refinement(format!(
                    "notch edge y = {val} is not a knot line; refine the mesh first"
                )));
            }
        }

        let inside = |e: &Element| {
            e.bounds.0[0] >= notch.x0 - tol
                && e.bounds.0[1] <= notch.x1 + tol
                && e.bounds.1[0] >= notch.y0 - tol
                && e.bounds.1[1] <= notch.y1 + tol
        };
        let removed = self.elements.iter().filter(|e| inside(e)).count();
        if removed == 0 {
            return Err(Error::Refinement(
                "notch does not contain a single span; refine the mesh first".into(),
            ));
        }

        let n_grid = self.patch.n_xi() * self.patch.n_eta();
        let mut supported = vec![false; n_grid];
        let keep: Vec<&Element> = self.elements.iter().filter(|e| !inside(e)).collect();
        for e in &keep {
            for &c in &e.cps {
                supported[self.active_grid[c]] = true;
            }
        }
        let mut grid_to_compact = vec![None; n_grid];
        let mut active_grid = Vec::new();
        for g in 0..n_grid {
            if supported[g] {
                grid_to_compact[g] = Some(active_grid.len());
                active_grid.push(g);
            }
        }
        let elements = keep
            .into_iter()
            .map(|e| {
                let cps = e
                    .cps
                    .iter()
                    .map(|&c| grid_to_compact[self.active_grid[c]].unwrap())
                    .collect();
                Element {
                    span: e.span,
                    bounds: e.bounds,
                    cps,
                    qps: e.qps.clone(),
                }
            })
            .collect();
        let mut mesh = Mesh {
            patch: self.patch.clone(),
            degree: self.degree,
            elements,
            n_cp: active_grid.len(),
            active_grid,
            grid_to_compact,
            cp_xy: Vec::new(),
            extent: self.extent,
        };
        mesh.rebuild_cp_positions()?;
        Ok(mesh)
    }

    pub fn n_dof(&self) -> usize {
        3 * self.n_cp
    }

    pub fn n_u_dof(&self) -> usize {
        2 * self.n_cp
    }

    pub fn dof_ux(&self, cp: usize) -> usize {
        2 * cp
    }

    pub fn dof_uy(&self, cp: usize) -> usize {
        2 * cp + 1
    }

    pub fn dof_phi(&self, cp: usize) -> usize {
        2 * self.n_cp + cp
    }

    /// Greville physical position of a compact control point.
    pub fn cp_position(&self, cp: usize) -> [f64; 2] {
        self.cp_xy[cp]
    }

    pub fn compact_of_grid(&self, ix: usize, iy: usize) -> Option<usize> {
        self.grid_to_compact[ix * self.patch.n_eta() + iy]
    }

    /// Integrated quadrature area (equals the patch area before notching).
    pub fn total_area(&self) -> f64 {
        self.elements
            .iter()
            .flat_map(|e| e.qps.iter())
            .map(|q| q.w_detj)
            .sum()
    }

    /// Active control point closest to a physical point.
    pub fn nearest_cp(&self, xy: [f64; 2]) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (c, p) in self.cp_xy.iter().enumerate() {
            let d = (p[0] - xy[0]).powi(2) + (p[1] - xy[1]).powi(2);
            if d < dist {
                dist = d;
                best = c;
            }
        }
        best
    }

    /// Active control points on a patch edge whose Greville coordinate
    /// along the edge lies in `range`.
    pub fn edge_cps(&self, side: EdgeSide, range: [f64; 2]) -> Vec<usize> {
        let (n_xi, n_eta) = (self.patch.n_xi(), self.patch.n_eta());
        let tol = 1e-9 * self.extent[0].max(self.extent[1]);
        let mut out = Vec::new();
        match side {
            EdgeSide::Left | EdgeSide::Right => {
                let ix = if side == EdgeSide::Left { 0 } else { n_xi - 1 };
                for iy in 0..n_eta {
                    let g = self.patch.kv_eta.greville(iy);
                    if g >= range[0] - tol && g <= range[1] + tol {
                        if let Some(c) = self.compact_of_grid(ix, iy) {
                            out.push(c);
                        }
                    }
                }
            }
            EdgeSide::Bottom | EdgeSide::Top => {
                let iy = if side == EdgeSide::Bottom { 0 } else { n_eta - 1 };
                for ix in 0..n_xi {
                    let g = self.patch.kv_xi.greville(ix);
                    if g >= range[0] - tol && g <= range[1] + tol {
                        if let Some(c) = self.compact_of_grid(ix, iy) {
                            out.push(c);
                        }
                    }
                }
            }
        }
        out
    }

    fn edge_param_range(&self, side: EdgeSide) -> (f64, &KnotVector) {
        match side {
            EdgeSide::Left | EdgeSide::Right => (self.extent[1], &self.patch.kv_eta),
            EdgeSide::Bottom | EdgeSide::Top => (self.extent[0], &self.patch.kv_xi),
        }
    }

    fn edge_point(&self, side: EdgeSide, s: f64) -> Result<[f64; 2]> {
        let [lx, ly] = self.extent;
        match side {
            EdgeSide::Left => self.patch.map_point(0.0, s),
            EdgeSide::Right => self.patch.map_point(lx, s),
            EdgeSide::Bottom => self.patch.map_point(s, 0.0),
            EdgeSide::Top => self.patch.map_point(s, ly),
        }
    }

    /// Resolves a physical point on the boundary: 1D Newton inversion of
    /// the edge curve, active basis weights for distributing a constraint,
    /// and the nearest control point for a hard driven dof.
    pub fn locate_point_dof(&self, xy: [f64; 2]) -> Result<BoundaryPoint> {
        let mut best: Option<(EdgeSide, f64, f64)> = None;
        for side in [EdgeSide::Left, EdgeSide::Right, EdgeSide::Bottom, EdgeSide::Top] {
            let (len, _) = self.edge_param_range(side);
            // Newton on f(s) = (C(s) - xy) . C'(s)
            let mut s = len * 0.5;
            for _ in 0..60 {
                let h = 1e-6 * len;
                let c = self.edge_point(side, s)?;
                let cp = self.edge_point(side, (s + h).min(len))?;
                let cm = self.edge_point(side, (s - h).max(0.0))?;
                let d = [(cp[0] - cm[0]) / (2.0 * h), (cp[1] - cm[1]) / (2.0 * h)];
                let r = [c[0] - xy[0], c[1] - xy[1]];
                let f = r[0] * d[0] + r[1] * d[1];
                let df = d[0] * d[0] + d[1] * d[1];
                if df <= 0.0 {
                    break;
                }
                let step = f / df;
                s = (s - step).clamp(0.0, len);
                if step.abs() <= 1e-14 * len {
                    break;
                }
            }
            let c = self.edge_point(side, s)?;
            let dist = ((c[0] - xy[0]).powi(2) + (c[1] - xy[1]).powi(2)).sqrt();
            if best.map_or(true, |(_, _, bd)| dist < bd) {
                best = Some((side, s, dist));
            }
        }
        let (side, s, dist) = best.unwrap();
        if dist > 1e-8 {
            return Err(Error::Geometry(format!(
                "point ({}, {}) is not on the boundary (closest approach {dist:.3e} mm)",
                xy[0], xy[1]
            )));
        }
        let (_, kv) = self.edge_param_range(side);
        let basis = kv.basis_and_derivs(s, 0)?;
        let p = kv.degree();
        let (n_xi, n_eta) = (self.patch.n_xi(), self.patch.n_eta());
        let mut weights = Vec::new();
        for (j, &v) in basis.values.iter().enumerate() {
            if v.abs() <= 1e-14 {
                continue;
            }
            let idx = basis.span - p + j;
            let grid = match side {
                EdgeSide::Left => (0, idx),
                EdgeSide::Right => (n_xi - 1, idx),
                EdgeSide::Bottom => (idx, 0),
                EdgeSide::Top => (idx, n_eta - 1),
            };
            if let Some(c) = self.compact_of_grid(grid.0, grid.1) {
                weights.push((c, v));
            }
        }
        if weights.is_empty() {
            return Err(Error::Geometry(
                "boundary point lies on a removed (notched) edge section".into(),
            ));
        }
        let nearest_cp = self.nearest_cp(xy);
        Ok(BoundaryPoint {
            side,
            param: s,
            weights,
            nearest_cp,
        })
    }

    /// 1D quadrature along part of an edge for traction integrals.
    pub fn edge_quadrature(&self, side: EdgeSide, range: [f64; 2]) -> Result<Vec<EdgeQp>> {
        let (len, kv) = self.edge_param_range(side);
        let lo = range[0].max(0.0);
        let hi = range[1].min(len);
        if lo >= hi {
            return Err(Error::Domain(format!(
                "empty traction range [{}, {}]",
                range[0], range[1]
            )));
        }
        let p = kv.degree();
        let (gp, gw) = gauss_rule(p + 1)?;
        let (n_xi, n_eta) = (self.patch.n_xi(), self.patch.n_eta());
        let mut out = Vec::new();
        for &(span, s0, s1) in &kv.spans() {
            let a = s0.max(lo);
            let b = s1.min(hi);
            if b - a <= 1e-12 * len {
                continue;
            }
            for (i, &t) in gp.iter().enumerate() {
                let s = 0.5 * ((b - a) * t + a + b);
                let basis = kv.basis_and_derivs(s, 0)?;
                debug_assert_eq!(basis.span, span);
                let [lx, ly] = self.extent;
                let (xi, eta) = match side {
                    EdgeSide::Left => (0.0, s),
                    EdgeSide::Right => (lx, s),
                    EdgeSide::Bottom => (s, 0.0),
                    EdgeSide::Top => (s, ly),
                };
                let g = self.patch.evaluate(xi, eta)?;
                let tangent_col = match side {
                    EdgeSide::Left | EdgeSide::Right => 1,
                    EdgeSide::Bottom | EdgeSide::Top => 0,
                };
                let ds = (g.jacobian[(0, tangent_col)].powi(2)
                    + g.jacobian[(1, tangent_col)].powi(2))
                .sqrt();
                let mut cps_n = Vec::new();
                for (j, &v) in basis.values.iter().enumerate() {
                    let idx = basis.span - p + j;
                    let grid = match side {
                        EdgeSide::Left => (0, idx),
                        EdgeSide::Right => (n_xi - 1, idx),
                        EdgeSide::Bottom => (idx, 0),
                        EdgeSide::Top => (idx, n_eta - 1),
                    };
                    if let Some(c) = self.compact_of_grid(grid.0, grid.1) {
                        cps_n.push((c, v));
                    }
                }
                out.push(EdgeQp {
                    cps_n,
                    w_ds: gw[i] * 0.5 * (b - a) * ds,
                });
            }
        }
        Ok(out)
    }

    /// Evaluates the coupled fields at a parametric point from global
    /// solution vectors (`u` over u-dofs, `phi` over phi-dofs).
    pub fn sample_fields(
        &self,
        xi: f64,
        eta: f64,
        u: &[f64],
        phi: &[f64],
    ) -> Result<([f64; 2], [f64; 2], f64)> {
        let g = self.patch.evaluate(xi, eta)?;
        let (px, py) = (self.patch.kv_xi.degree(), self.patch.kv_eta.degree());
        let n_eta = self.patch.n_eta();
        let mut uv = [0.0; 2];
        let mut ph = 0.0;
        for lx in 0..=px {
            let gx = g.spans.0 - px + lx;
            for ly in 0..=py {
                let gy = g.spans.1 - py + ly;
                let a = lx * (py + 1) + ly;
                if let Some(c) = self.grid_to_compact[gx * n_eta + gy] {
                    uv[0] += g.n[a] * u[2 * c];
                    uv[1] += g.n[a] * u[2 * c + 1];
                    ph += g.n[a] * phi[c];
                }
            }
        }
        Ok((g.xy, uv, ph))
    }
}

fn is_break(kv: &KnotVector, val: f64, tol: f64) -> bool {
    kv.knots().iter().any(|&k| (k - val).abs() <= tol)
}
