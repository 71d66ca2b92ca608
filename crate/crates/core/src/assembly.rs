//! Element-level evaluation and global scatter of the coupled residuals
//! and the four tangent blocks, for second- and fourth-order crack
//! densities. Test functions are the trial basis (Bubnov–Galerkin).

use crate::material::{self, MaterialModel, ModelOrder};
use crate::mesh::{BoundaryConditions, Element, Mesh};
use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

/// How the history field behaves inside a Newton loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryMode {
    /// H frozen during iterations, updated once per converged step
    /// (robust default; makes the phi-u coupling block vanish).
    FrozenStep,
    /// H tracks the current iterate: `max(stored, trial(eps))`, with the
    /// active-branch derivative entering the phi-u block.
    PerIteration,
}

impl Default for HistoryMode {
    fn default() -> Self {
        HistoryMode::FrozenStep
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssemblyOptions {
    pub history: HistoryMode,
}

/// Per-quadrature-point history values, grouped per element.
pub type History = Vec<Vec<f64>>;

/// Fresh history at the nucleation floor.
pub fn initial_history(mesh: &Mesh, mat: &MaterialModel) -> History {
    mesh.elements
        .iter()
        .map(|e| vec![mat.h_floor(); e.qps.len()])
        .collect()
}

/// History after a converged step: per-point running maximum.
pub fn updated_history(
    mesh: &Mesh,
    u: &[f64],
    history: &History,
    mat: &MaterialModel,
) -> History {
    mesh.elements
        .iter()
        .zip(history)
        .map(|(e, h_e)| {
            e.qps
                .iter()
                .enumerate()
                .map(|(q, _)| {
                    let eps = strain_at(e, q, u);
                    let trial = material::driving_force(&eps, mat);
                    h_e[q].max(trial).max(mat.h_floor())
                })
                .collect()
        })
        .collect()
}

/// CSR block with a connectivity-fixed sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseBlock {
    fn from_pattern(nrows: usize, ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        SparseBlock {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals: vec![0.0; nnz],
        }
    }

    /// Accumulates into an entry that must exist in the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.vals[lo + k] += v,
            Err(_) => panic!("entry ({row}, {col}) outside the mesh sparsity pattern"),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.vals[k];
            }
        }
        m
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.vals[k]))
        })
    }
}

/// Coupled tangent blocks and residuals. Residuals are stored without
/// Dirichlet condensation so reactions remain recoverable at driven dofs;
/// `constrained` marks rows/columns eliminated in the reduced solve.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub n_cp: usize,
    pub kuu: SparseBlock,
    pub kuphi: SparseBlock,
    pub kphiu: SparseBlock,
    pub kphiphi: SparseBlock,
    /// Displacement residual (N per unit thickness).
    pub r_u: Vec<f64>,
    /// Phase-field residual.
    pub r_phi: Vec<f64>,
    /// Length `3 n_cp`, in global dof numbering (u block then phi block).
    pub constrained: Vec<bool>,
}

impl AssembledSystem {
    /// Infinity norms of the residuals over free dofs: `(|r_u|, |r_phi|)`.
    pub fn residual_norms(&self) -> (f64, f64) {
        let n_u = 2 * self.n_cp;
        let ru = self
            .r_u
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.constrained[*i])
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        let rphi = self
            .r_phi
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.constrained[n_u + *i])
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        (ru, rphi)
    }

    /// Sum of displacement residuals over a dof set (reaction recovery).
    pub fn reaction_sum(&self, dofs: &[usize]) -> f64 {
        dofs.iter().map(|&d| self.r_u[d]).sum()
    }
}

fn strain_at(e: &Element, q: usize, u: &[f64]) -> Matrix2<f64> {
    let qp = &e.qps[q];
    let (mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0);
    for (i, &c) in e.cps.iter().enumerate() {
        let ux = u[2 * c];
        let uy = u[2 * c + 1];
        exx += qp.dn[i][0] * ux;
        eyy += qp.dn[i][1] * uy;
        exy += 0.5 * (qp.dn[i][1] * ux + qp.dn[i][0] * uy);
    }
    Matrix2::new(exx, exy, exy, eyy)
}

struct ElementOut {
    r_u: DVector<f64>,
    r_phi: DVector<f64>,
    tangents: Option<ElementTangents>,
}

struct ElementTangents {
    kuu: DMatrix<f64>,
    kuphi: DMatrix<f64>,
    kphiu: DMatrix<f64>,
    kphiphi: DMatrix<f64>,
}

/// Gradient weight of the crack density weak form: the second-order
/// density carries `l0 (grad phi)^2`, the fourth-order one `l0/2`.
fn grad_coeff(mat: &MaterialModel) -> f64 {
    match mat.order {
        ModelOrder::Second => 2.0 * mat.gc * mat.l0 / mat.c_alpha(),
        ModelOrder::Fourth => mat.gc * mat.l0 / mat.c_alpha(),
    }
}

fn element_kernel(
    e: &Element,
    u: &[f64],
    phi: &[f64],
    h_elem: &[f64],
    body: [f64; 2],
    mat: &MaterialModel,
    opts: AssemblyOptions,
    want_tangents: bool,
) -> ElementOut {
    let nl = e.cps.len();
    let mut r_u = DVector::zeros(2 * nl);
    let mut r_phi = DVector::zeros(nl);
    let mut tg = want_tangents.then(|| ElementTangents {
        kuu: DMatrix::zeros(2 * nl, 2 * nl),
        kuphi: DMatrix::zeros(2 * nl, nl),
        kphiu: DMatrix::zeros(nl, 2 * nl),
        kphiphi: DMatrix::zeros(nl, nl),
    });

    let c_grad = grad_coeff(mat);
    let c_local = mat.gc / (mat.c_alpha() * mat.l0);
    let c_lap = match mat.order {
        ModelOrder::Fourth => mat.gc * mat.l0.powi(3) / (8.0 * mat.c_alpha()),
        ModelOrder::Second => 0.0,
    };

    for (q, qp) in e.qps.iter().enumerate() {
        let eps = strain_at(e, q, u);
        let (mut phi_q, mut gpx, mut gpy, mut lap_q) = (0.0, 0.0, 0.0, 0.0);
        for (i, &c) in e.cps.iter().enumerate() {
            let ph = phi[c];
            phi_q += qp.n[i] * ph;
            gpx += qp.dn[i][0] * ph;
            gpy += qp.dn[i][1] * ph;
            lap_q += qp.lap[i] * ph;
        }
        let (h, h_active) = match opts.history {
            HistoryMode::FrozenStep => (h_elem[q], false),
            HistoryMode::PerIteration => {
                let trial = material::driving_force(&eps, mat);
                (h_elem[q].max(trial), trial > h_elem[q])
            }
        };

        let (sigma, sig_plus, _) = material::stress(&eps, phi_q, mat);
        let (_, dg, ddg) = mat.degradation(phi_q);
        let (_, da, dda) = mat.alpha(phi_q);
        let w = qp.w_detj;

        let sv = [sigma[(0, 0)], sigma[(1, 1)], sigma[(0, 1)]];
        for i in 0..nl {
            let (nx, ny) = (qp.dn[i][0], qp.dn[i][1]);
            r_u[2 * i] += (nx * sv[0] + ny * sv[2]) * w;
            r_u[2 * i + 1] += (ny * sv[1] + nx * sv[2]) * w;
            r_u[2 * i] -= qp.n[i] * body[0] * w;
            r_u[2 * i + 1] -= qp.n[i] * body[1] * w;
            r_phi[i] += (c_local * da * qp.n[i]
                + c_grad * (gpx * qp.dn[i][0] + gpy * qp.dn[i][1])
                + c_lap * lap_q * qp.lap[i]
                + dg * h * qp.n[i])
                * w;
        }

        if let Some(tg) = tg.as_mut() {
            let cmat = material::material_tangent(&eps, phi_q, mat);
            // cache C * B_j (3x2 each)
            let mut cb = vec![[0.0f64; 6]; nl];
            for j in 0..nl {
                let (nx, ny) = (qp.dn[j][0], qp.dn[j][1]);
                for r in 0..3 {
                    cb[j][2 * r] = cmat[(r, 0)] * nx + cmat[(r, 2)] * ny;
                    cb[j][2 * r + 1] = cmat[(r, 1)] * ny + cmat[(r, 2)] * nx;
                }
            }
            let spv = [sig_plus[(0, 0)], sig_plus[(1, 1)], sig_plus[(0, 1)]];
            let dh = if h_active {
                material::driving_force_gradient(&eps, mat)
            } else {
                nalgebra::Vector3::zeros()
            };
            for i in 0..nl {
                let (nxi, nyi) = (qp.dn[i][0], qp.dn[i][1]);
                for j in 0..nl {
                    // K_uu: B_i^T (C B_j)
                    for b in 0..2 {
                        tg.kuu[(2 * i, 2 * j + b)] +=
                            (nxi * cb[j][b] + nyi * cb[j][4 + b]) * w;
                        tg.kuu[(2 * i + 1, 2 * j + b)] +=
                            (nyi * cb[j][2 + b] + nxi * cb[j][4 + b]) * w;
                    }
                    // K_uphi: B_i^T g' sigma+ N_j
                    tg.kuphi[(2 * i, j)] += dg * (nxi * spv[0] + nyi * spv[2]) * qp.n[j] * w;
                    tg.kuphi[(2 * i + 1, j)] += dg * (nyi * spv[1] + nxi * spv[2]) * qp.n[j] * w;
                    // K_phiu: g' N_i dH/deps B_j (active branch only)
                    if h_active {
                        let (nxj, nyj) = (qp.dn[j][0], qp.dn[j][1]);
                        tg.kphiu[(i, 2 * j)] += dg * qp.n[i] * (dh[0] * nxj + dh[2] * nyj) * w;
                        tg.kphiu[(i, 2 * j + 1)] +=
                            dg * qp.n[i] * (dh[1] * nyj + dh[2] * nxj) * w;
                    }
                    // K_phiphi
                    let (nxj, nyj) = (qp.dn[j][0], qp.dn[j][1]);
                    tg.kphiphi[(i, j)] += (c_grad * (nxi * nxj + nyi * nyj)
                        + (ddg * h + dda * c_local) * qp.n[i] * qp.n[j]
                        + c_lap * qp.lap[i] * qp.lap[j])
                        * w;
                }
            }
        }
    }
    ElementOut { r_u, r_phi, tangents: tg }
}

/// Element residual vectors `(r_u, r_phi)` by Gauss quadrature.
pub fn element_residuals(
    e: &Element,
    u: &[f64],
    phi: &[f64],
    h_elem: &[f64],
    mat: &MaterialModel,
    opts: AssemblyOptions,
) -> (DVector<f64>, DVector<f64>) {
    let out = element_kernel(e, u, phi, h_elem, [0.0, 0.0], mat, opts, false);
    (out.r_u, out.r_phi)
}

/// Element tangent blocks `(K_uu, K_uphi, K_phiu, K_phiphi)`.
pub fn element_tangents(
    e: &Element,
    u: &[f64],
    phi: &[f64],
    h_elem: &[f64],
    mat: &MaterialModel,
    opts: AssemblyOptions,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let out = element_kernel(e, u, phi, h_elem, [0.0, 0.0], mat, opts, true);
    let tg = out.tangents.unwrap();
    (tg.kuu, tg.kuphi, tg.kphiu, tg.kphiphi)
}

fn adjacency(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut adj: Vec<std::collections::BTreeSet<usize>> =
        vec![std::collections::BTreeSet::new(); mesh.n_cp];
    for e in &mesh.elements {
        for &ci in &e.cps {
            for &cj in &e.cps {
                adj[ci].insert(cj);
            }
        }
    }
    adj.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// External force vector over u-dofs from edge tractions (body forces are
/// integrated element-wise during assembly).
pub fn external_force(mesh: &Mesh, bcs: &BoundaryConditions) -> crate::Result<Vec<f64>> {
    let mut f = vec![0.0; 2 * mesh.n_cp];
    for tr in &bcs.tractions {
        for qp in mesh.edge_quadrature(tr.side, tr.range)? {
            for &(cp, v) in &qp.cps_n {
                f[2 * cp] += v * tr.t[0] * qp.w_ds;
                f[2 * cp + 1] += v * tr.t[1] * qp.w_ds;
            }
        }
    }
    Ok(f)
}

/// Assembles the coupled system at the given state. Element kernels run in
/// parallel; the scatter follows a fixed element order, so the result is
/// bitwise deterministic.
pub fn assemble(
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    history: &History,
    bcs: &BoundaryConditions,
    mat: &MaterialModel,
    opts: AssemblyOptions,
) -> crate::Result<AssembledSystem> {
    let n = mesh.n_cp;
    assert_eq!(u.len(), 2 * n, "u vector length mismatch");
    assert_eq!(phi.len(), n, "phi vector length mismatch");

    let adj = adjacency(mesh);
    let rows_uu: Vec<Vec<usize>> = (0..2 * n)
        .map(|r| adj[r / 2].iter().flat_map(|&j| [2 * j, 2 * j + 1]).collect())
        .collect();
    let rows_uphi: Vec<Vec<usize>> = (0..2 * n).map(|r| adj[r / 2].clone()).collect();
    let rows_phiu: Vec<Vec<usize>> = (0..n)
        .map(|r| adj[r].iter().flat_map(|&j| [2 * j, 2 * j + 1]).collect())
        .collect();
    let rows_phiphi: Vec<Vec<usize>> = (0..n).map(|r| adj[r].clone()).collect();

    let mut kuu = SparseBlock::from_pattern(2 * n, 2 * n, rows_uu);
    let mut kuphi = SparseBlock::from_pattern(2 * n, n, rows_uphi);
    let mut kphiu = SparseBlock::from_pattern(n, 2 * n, rows_phiu);
    let mut kphiphi = SparseBlock::from_pattern(n, n, rows_phiphi);
    let mut r_u = vec![0.0; 2 * n];
    let mut r_phi = vec![0.0; n];

    let outs: Vec<ElementOut> = mesh
        .elements
        .par_iter()
        .zip(history.par_iter())
        .map(|(e, h_e)| element_kernel(e, u, phi, h_e, bcs.body_force, mat, opts, true))
        .collect();

    for (e, out) in mesh.elements.iter().zip(outs) {
        let tg = out.tangents.unwrap();
        for (i, &ci) in e.cps.iter().enumerate() {
            r_u[2 * ci] += out.r_u[2 * i];
            r_u[2 * ci + 1] += out.r_u[2 * i + 1];
            r_phi[ci] += out.r_phi[i];
            for (j, &cj) in e.cps.iter().enumerate() {
                for a in 0..2 {
                    for b in 0..2 {
                        kuu.add(2 * ci + a, 2 * cj + b, tg.kuu[(2 * i + a, 2 * j + b)]);
                    }
                    kuphi.add(2 * ci + a, cj, tg.kuphi[(2 * i + a, j)]);
                }
                kphiu.add(ci, 2 * cj, tg.kphiu[(i, 2 * j)]);
                kphiu.add(ci, 2 * cj + 1, tg.kphiu[(i, 2 * j + 1)]);
                kphiphi.add(ci, cj, tg.kphiphi[(i, j)]);
            }
        }
    }

    let f_ext = external_force(mesh, bcs)?;
    for (r, f) in r_u.iter_mut().zip(&f_ext) {
        *r -= f;
    }

    let mut constrained = vec![false; 3 * n];
    for d in &bcs.dirichlet {
        constrained[d.dof] = true;
    }

    Ok(AssembledSystem {
        n_cp: n,
        kuu,
        kuphi,
        kphiu,
        kphiphi,
        r_u,
        r_phi,
        constrained,
    })
}

/// Residual-only assembly (no tangent blocks); used by finite-difference
/// oracles and cheap convergence checks.
pub fn assemble_residuals(
    mesh: &Mesh,
    u: &[f64],
    phi: &[f64],
    history: &History,
    bcs: &BoundaryConditions,
    mat: &MaterialModel,
    opts: AssemblyOptions,
) -> crate::Result<(Vec<f64>, Vec<f64>)> {
    let n = mesh.n_cp;
    let mut r_u = vec![0.0; 2 * n];
    let mut r_phi = vec![0.0; n];
    let outs: Vec<ElementOut> = mesh
        .elements
        .par_iter()
        .zip(history.par_iter())
        .map(|(e, h_e)| element_kernel(e, u, phi, h_e, bcs.body_force, mat, opts, false))
        .collect();
    for (e, out) in mesh.elements.iter().zip(outs) {
        for (i, &ci) in e.cps.iter().enumerate() {
            r_u[2 * ci] += out.r_u[2 * i];
            r_u[2 * ci + 1] += out.r_u[2 * i + 1];
            r_phi[ci] += out.r_phi[i];
        }
    }
    let f_ext = external_force(mesh, bcs)?;
    for (r, f) in r_u.iter_mut().zip(&f_ext) {
        *r -= f;
    }
    Ok((r_u, r_phi))
}

/// Discrete total energy: degraded elastic energy plus the regularized
/// crack surface term (per unit thickness). The tensile part is evaluated
/// live from the current strain.
pub fn assemble_energy(mesh: &Mesh, u: &[f64], phi: &[f64], mat: &MaterialModel) -> f64 {
    let c_alpha = mat.c_alpha();
    mesh.elements
        .iter()
        .map(|e| {
            let mut total = 0.0;
            for (q, qp) in e.qps.iter().enumerate() {
                let eps = strain_at(e, q, u);
                let (mut phi_q, mut gpx, mut gpy, mut lap_q) = (0.0, 0.0, 0.0, 0.0);
                for (i, &c) in e.cps.iter().enumerate() {
                    phi_q += qp.n[i] * phi[c];
                    gpx += qp.dn[i][0] * phi[c];
                    gpy += qp.dn[i][1] * phi[c];
                    lap_q += qp.lap[i] * phi[c];
                }
                let (g, _, _) = mat.degradation(phi_q);
                let (alpha, _, _) = mat.alpha(phi_q);
                let (wp, wm) = material::energy_split(&eps, mat);
                let grad2 = gpx * gpx + gpy * gpy;
                let crack = match mat.order {
                    ModelOrder::Second => {
                        (alpha / mat.l0 + mat.l0 * grad2) / c_alpha
                    }
                    ModelOrder::Fourth => {
                        (alpha / mat.l0
                            + 0.5 * mat.l0 * grad2
                            + mat.l0.powi(3) / 16.0 * lap_q * lap_q)
                            / c_alpha
                    }
                };
                total += (g * wp + wm + mat.gc * crack) * qp.w_detj;
            }
            total
        })
        .sum()
}
