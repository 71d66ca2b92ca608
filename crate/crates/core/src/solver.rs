//! Displacement-controlled monolithic Newton–Raphson driver: per load
//! step, iterate coupled updates until both residual infinity norms pass
//! the tolerance, then update the history field and record reactions.

use crate::assembly::{
    self, assemble, AssembledSystem, AssemblyOptions, History, HistoryMode, SparseBlock,
};
use crate::error::{Error, Result};
use crate::material::MaterialModel;
use crate::mesh::{BoundaryConditions, Mesh};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};

/// Global solution state between load steps.
#[derive(Debug, Clone)]
pub struct SimState {
    /// Control-point displacements, `(u_x, u_y)` interleaved (mm).
    pub u: Vec<f64>,
    /// Control-point phase-field coefficients.
    pub phi: Vec<f64>,
    /// Per-quadrature-point history field (MPa).
    pub history: History,
    pub step_index: usize,
    /// Currently applied displacement (mm).
    pub applied: f64,
}

impl SimState {
    pub fn new(mesh: &Mesh, mat: &MaterialModel) -> Self {
        SimState {
            u: vec![0.0; 2 * mesh.n_cp],
            phi: vec![0.0; mesh.n_cp],
            history: assembly::initial_history(mesh, mat),
            step_index: 0,
            applied: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Residual tolerance for both fields (infinity norm, N-mm units).
    pub tol: f64,
    pub max_iter: usize,
    pub history: HistoryMode,
    /// Step-halving attempts before a step is declared failed.
    pub max_halvings: usize,
    /// Cap on the phase-field Newton update (infinity norm). The full
    /// coupled direction is scaled, never re-evaluated, so the limiter is
    /// inactive near convergence and plain Newton is recovered there.
    pub max_phi_update: f64,
    /// Cap on the displacement Newton update (mm); overflow protection
    /// for nearly fully-degraded states.
    pub max_u_update: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-4,
            max_iter: 50,
            history: HistoryMode::FrozenStep,
            max_halvings: 4,
            max_phi_update: 0.2,
            max_u_update: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Converged,
    Halved,
    Failed,
}

impl std::fmt::Display for StepStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepStatus::Converged => write!(f, "converged"),
            StepStatus::Halved => write!(f, "halved"),
            StepStatus::Failed => write!(f, "failed"),
        }
    }
}

/// One row of the load–displacement record.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub step: usize,
    pub applied_mm: f64,
    pub reaction_n: f64,
    pub cmod_mm: Option<f64>,
    pub iters: usize,
    pub status: StepStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadCurve {
    pub rows: Vec<CurveRow>,
}

/// Newton outcome for one target displacement.
#[derive(Debug)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    /// `(|r_u|, |r_phi|)` per iterate, including the accepted one.
    pub residuals: Vec<(f64, f64)>,
    /// System assembled at the final iterate (reactions live here).
    pub system: AssembledSystem,
}

fn set_sequential_solver() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        // deterministic factorization regardless of thread environment
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Direct sparse LU solve of the condensed coupled system.
///
/// `rhs` has full length `3 n_cp`; entries at constrained dofs are
/// ignored and the returned update is zero there.
pub fn linear_solve(sys: &AssembledSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    set_sequential_solver();
    let n_u = 2 * sys.n_cp;
    let n3 = 3 * sys.n_cp;
    assert_eq!(rhs.len(), n3, "rhs length mismatch");
    let mut reduced = vec![usize::MAX; n3];
    let mut free = Vec::new();
    for d in 0..n3 {
        if !sys.constrained[d] {
            reduced[d] = free.len();
            free.push(d);
        }
    }
    let m = free.len();
    if m == 0 {
        return Ok(vec![0.0; n3]);
    }

    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::new();
    {
        let mut push_block = |blk: &SparseBlock, row_off: usize, col_off: usize| {
            for (r, c, v) in blk.entries() {
                let (gr, gc) = (r + row_off, c + col_off);
                if reduced[gr] != usize::MAX && reduced[gc] != usize::MAX {
                    triplets.push(Triplet::new(reduced[gr], reduced[gc], v));
                }
            }
        };
        push_block(&sys.kuu, 0, 0);
        push_block(&sys.kuphi, 0, n_u);
        push_block(&sys.kphiu, n_u, 0);
        push_block(&sys.kphiphi, n_u, n_u);
    }
    let a = SparseColMat::try_new_from_triplets(m, m, &triplets)
        .map_err(|e| Error::Solver(format!("sparse matrix build failed: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::Solver(format!("sparse LU factorization failed: {e:?}")))?;
    let mut b = faer::Mat::<f64>::zeros(m, 1);
    for (k, &d) in free.iter().enumerate() {
        b[(k, 0)] = rhs[d];
    }
    let x = lu.solve(&b);
    let mut out = vec![0.0; n3];
    for (k, &d) in free.iter().enumerate() {
        out[d] = x[(k, 0)];
        if !out[d].is_finite() {
            return Err(Error::Solver(
                "linear solve produced non-finite values (singular system?)".into(),
            ));
        }
    }
    Ok(out)
}

/// Full coupled matrix–vector product (no condensation); test support.
pub fn coupled_matvec(sys: &AssembledSystem, x: &[f64]) -> Vec<f64> {
    let n_u = 2 * sys.n_cp;
    let mut y = vec![0.0; 3 * sys.n_cp];
    for (r, c, v) in sys.kuu.entries() {
        y[r] += v * x[c];
    }
    for (r, c, v) in sys.kuphi.entries() {
        y[r] += v * x[n_u + c];
    }
    for (r, c, v) in sys.kphiu.entries() {
        y[n_u + r] += v * x[c];
    }
    for (r, c, v) in sys.kphiphi.entries() {
        y[n_u + r] += v * x[n_u + c];
    }
    y
}

fn apply_prescribed(state: &mut SimState, mesh: &Mesh, bcs: &BoundaryConditions, applied: f64) {
    let n_u = 2 * mesh.n_cp;
    for d in &bcs.dirichlet {
        let v = if d.driven { d.value * applied } else { d.value };
        if d.dof < n_u {
            state.u[d.dof] = v;
        } else {
            state.phi[d.dof - n_u] = v;
        }
    }
}

/// One displacement-controlled Newton solve: driven dofs are set to
/// `applied` times their direction before the first iteration, then the
/// coupled block system is solved until both residual norms pass `tol`.
///
/// The irreversibility bound `phi >= 0` is enforced by a primal-dual
/// active set inside the monolithic iteration: coefficients at the bound
/// are pinned (their rows/columns condensed like Dirichlet dofs) and
/// release as soon as their multiplier — the phase-field residual —
/// turns negative, which happens exactly when the local driving force
/// exceeds the nucleation floor. The reported phase-field residual is
/// the complementarity residual: plain `r_phi` on free dofs,
/// `max(0, -r_phi)` on pinned ones.
pub fn newton_step(
    mesh: &Mesh,
    state: &mut SimState,
    bcs: &BoundaryConditions,
    mat: &MaterialModel,
    opts: &SolverOptions,
    applied: f64,
) -> Result<NewtonReport> {
    apply_prescribed(state, mesh, bcs, applied);
    let aopts = AssemblyOptions {
        history: opts.history,
    };
    let n = mesh.n_cp;
    let n_u = 2 * n;
    let mut pinned: Vec<bool> = (0..n).map(|i| state.phi[i] <= 0.0).collect();
    for (i, p) in pinned.iter().enumerate() {
        if *p {
            state.phi[i] = 0.0;
        }
    }
    let mut residuals: Vec<(f64, f64)> = Vec::new();
    for it in 0..=opts.max_iter {
        let mut sys = assemble(mesh, &state.u, &state.phi, &state.history, bcs, mat, aopts)?;
        let ru = sys
            .r_u
            .iter()
            .enumerate()
            .filter(|(k, _)| !sys.constrained[*k])
            .map(|(_, v)| v.abs())
            .fold(0.0f64, f64::max);
        let rphi = (0..n)
            .filter(|&i| !sys.constrained[n_u + i])
            .map(|i| {
                if pinned[i] {
                    (-sys.r_phi[i]).max(0.0)
                } else {
                    sys.r_phi[i].abs()
                }
            })
            .fold(0.0f64, f64::max);
        let diverged = residuals
            .first()
            .is_some_and(|(u0, p0)| ru.max(rphi) > 1e8 * (u0.max(*p0) + 1.0));
        residuals.push((ru, rphi));
        if ru.max(rphi) <= opts.tol {
            return Ok(NewtonReport {
                converged: true,
                iterations: it,
                residuals,
                system: sys,
            });
        }
        if it == opts.max_iter || diverged {
            return Ok(NewtonReport {
                converged: false,
                iterations: it,
                residuals,
                system: sys,
            });
        }
        // release pinned dofs whose multiplier went negative (the bound
        // stopped being active), then condense the remaining pins
        for i in 0..n {
            if pinned[i] && sys.r_phi[i] < -0.25 * opts.tol {
                pinned[i] = false;
            }
        }
        for i in 0..n {
            if pinned[i] {
                sys.constrained[n_u + i] = true;
            }
        }
        let mut rhs = vec![0.0; 3 * n];
        for (k, v) in sys.r_u.iter().enumerate() {
            rhs[k] = -v;
        }
        for (k, v) in sys.r_phi.iter().enumerate() {
            rhs[n_u + k] = -v;
        }
        let dx = linear_solve(&sys, &rhs)?;
        // scale the whole direction so the phase-field update stays
        // bounded; around the knee of the degradation function the raw
        // Newton step can overshoot by orders of magnitude
        let max_du = dx[..n_u].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_dphi = dx[n_u..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut scale = 1.0f64;
        if max_dphi > opts.max_phi_update {
            scale = scale.min(opts.max_phi_update / max_dphi);
        }
        if max_du > opts.max_u_update {
            scale = scale.min(opts.max_u_update / max_du);
        }
        for k in 0..n_u {
            state.u[k] += scale * dx[k];
        }
        for k in 0..n {
            state.phi[k] += scale * dx[n_u + k];
        }
        // pin free coefficients that crossed the bound
        for i in 0..n {
            if !pinned[i] && state.phi[i] < 0.0 {
                state.phi[i] = 0.0;
                pinned[i] = true;
            }
        }
    }
    unreachable!("newton loop exits via return")
}

/// Signed reaction at the driven dofs (N), scaled by thickness.
pub fn reaction(sys: &AssembledSystem, bcs: &BoundaryConditions, thickness: f64) -> f64 {
    bcs.dirichlet
        .iter()
        .filter(|d| d.driven)
        .map(|d| sys.r_u[d.dof] * d.value.signum())
        .sum::<f64>()
        * thickness
}

/// Range of the phase field sampled at all quadrature points.
pub fn phi_field_range(mesh: &Mesh, phi: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in &mesh.elements {
        for qp in &e.qps {
            let mut v = 0.0;
            for (i, &c) in e.cps.iter().enumerate() {
                v += qp.n[i] * phi[c];
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if mesh.elements.is_empty() {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

/// When the run schedule stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Fixed number of load steps.
    Steps(usize),
    /// Run until the crack mouth opening displacement reaches this (mm).
    CmodTarget(f64),
}

/// Everything `run_simulation` needs, already resolved against a mesh.
pub struct RunSetup {
    pub mesh: Mesh,
    pub mat: MaterialModel,
    pub bcs: BoundaryConditions,
    /// Out-of-plane thickness (mm); enters reactions only.
    pub thickness: f64,
    /// Displacement increment per scheduled step (mm).
    pub du: f64,
    /// Hard cap on recorded steps.
    pub max_steps: usize,
    pub stop: StopRule,
    /// Compact control points `(left, right)` for the CMOD gauge.
    pub cmod_gauge: Option<(usize, usize)>,
    pub solver: SolverOptions,
}

fn cmod_of(state: &SimState, gauge: Option<(usize, usize)>) -> Option<f64> {
    gauge.map(|(l, r)| state.u[2 * r] - state.u[2 * l])
}

/// Executes the displacement-controlled schedule. After each converged
/// step the history field is updated and `observer` is invoked with the
/// new curve row (rows are emitted incrementally so interrupted runs keep
/// partial output). On non-convergence the increment is halved down to
/// `du / 2^max_halvings` before the run stops gracefully.
pub fn run_simulation(
    setup: &RunSetup,
    mut observer: impl FnMut(&CurveRow, &SimState),
) -> Result<(LoadCurve, SimState)> {
    let mesh = &setup.mesh;
    let mat = &setup.mat;
    if setup.du <= 0.0 {
        return Err(Error::Config("schedule du must be positive".into()));
    }
    if matches!(setup.stop, StopRule::CmodTarget(_)) && setup.cmod_gauge.is_none() {
        return Err(Error::Config(
            "CMOD stop criterion requires a cmod gauge".into(),
        ));
    }
    setup.bcs.validate(mesh)?;
    if setup.bcs.driven_dofs().is_empty() {
        return Err(Error::Config(
            "displacement-controlled run needs at least one driven dof".into(),
        ));
    }

    let mut state = SimState::new(mesh, mat);
    let mut curve = LoadCurve::default();

    for step in 1..=setup.max_steps {
        if let StopRule::CmodTarget(target) = setup.stop {
            if cmod_of(&state, setup.cmod_gauge).unwrap_or(0.0) >= target {
                break;
            }
        }
        if let StopRule::Steps(n) = setup.stop {
            if step > n {
                break;
            }
        }

        let mut accepted: Option<(SimState, NewtonReport, f64)> = None;
        let mut final_status = StepStatus::Failed;
        let mut last_iters = setup.solver.max_iter;
        for halving in 0..=setup.solver.max_halvings {
            let du = setup.du / (1 << halving) as f64;
            let target = state.applied + du;
            let mut trial = state.clone();
            let report = newton_step(mesh, &mut trial, &setup.bcs, mat, &setup.solver, target)?;
            last_iters = report.iterations;
            if report.converged {
                final_status = if halving == 0 {
                    StepStatus::Converged
                } else {
                    StepStatus::Halved
                };
                accepted = Some((trial, report, target));
                break;
            }
        }

        match accepted {
            Some((mut trial, report, target)) => {
                // accept: advance history (per-point running maximum)
                let new_history =
                    assembly::updated_history(mesh, &trial.u, &trial.history, mat);
                for (he_new, he_old) in new_history.iter().zip(&trial.history) {
                    for (hn, ho) in he_new.iter().zip(he_old) {
                        assert!(hn >= ho, "history field must never decrease");
                    }
                }
                trial.history = new_history;
                trial.applied = target;
                trial.step_index = step;
                let (plo, phi_hi) = phi_field_range(mesh, &trial.phi);
                if !(-0.01..=1.01).contains(&plo) || !(-0.01..=1.01).contains(&phi_hi) {
                    return Err(Error::Solver(format!(
                        "phase field left [-0.01, 1.01]: range [{plo:.4}, {phi_hi:.4}] at step {step}"
                    )));
                }
                let row = CurveRow {
                    step,
                    applied_mm: target,
                    reaction_n: reaction(&report.system, &setup.bcs, setup.thickness),
                    cmod_mm: cmod_of(&trial, setup.cmod_gauge),
                    iters: report.iterations,
                    status: final_status,
                };
                observer(&row, &trial);
                curve.rows.push(row);
                state = trial;
            }
            None => {
                // graceful stop: record the failed attempt, keep prior output
                let row = CurveRow {
                    step,
                    applied_mm: state.applied
                        + setup.du / (1 << setup.solver.max_halvings) as f64,
                    reaction_n: f64::NAN,
                    cmod_mm: cmod_of(&state, setup.cmod_gauge),
                    iters: last_iters,
                    status: StepStatus::Failed,
                };
                observer(&row, &state);
                curve.rows.push(row);
                break;
            }
        }
    }
    Ok((curve, state))
}
