//! Run configuration (JSON), benchmark presets, and the translation from
//! a validated config into a solver-ready setup.

use crate::assembly::HistoryMode;
use crate::error::{Error, Result};
use crate::material::{MaterialModel, ModelOrder, SofteningLaw, StressState};
use crate::mesh::{
    build_mesh, BoundaryConditions, DirichletDof, EdgeSide, EdgeTraction, Mesh, MeshSpec,
    NotchSpec, RefinementBand,
};
use crate::solver::{RunSetup, SolverOptions, StopRule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Components {
    X,
    Y,
    Both,
}

/// Zero-displacement constraint on part of a patch edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeClamp {
    pub side: EdgeSide,
    pub range: [f64; 2],
    pub components: Components,
}

/// Zero-displacement constraint at the control point nearest a physical
/// point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointPin {
    pub at: [f64; 2],
    pub components: Components,
}

/// Displacement-driven dof at the control point nearest a physical point.
/// The prescribed value at a step is `direction * applied`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivenPoint {
    pub at: [f64; 2],
    pub component: Components,
    pub direction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Domain extent in mm (rectangle; cutouts carve notches and corners).
    pub lx: f64,
    pub ly: f64,
    #[serde(default)]
    pub cutouts: Vec<NotchSpec>,
    #[serde(default)]
    pub clamps: Vec<EdgeClamp>,
    #[serde(default)]
    pub pins: Vec<PointPin>,
    pub driven: Vec<DrivenPoint>,
    #[serde(default)]
    pub tractions: Vec<EdgeTraction>,
    #[serde(default)]
    pub body_force: [f64; 2],
    /// Two physical points whose horizontal opening is reported as CMOD.
    #[serde(default)]
    pub cmod_gauge: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Young's modulus (MPa).
    pub e0: f64,
    pub nu: f64,
    /// Critical energy release density (N/mm).
    pub gc: f64,
    /// Tensile strength (MPa).
    pub ft: f64,
    /// Length scale (mm).
    pub l0: f64,
    #[serde(default = "default_chi")]
    pub chi: f64,
    pub softening: SofteningLaw,
    pub order: ModelOrder,
    pub stress_state: StressState,
    /// Out-of-plane thickness (mm).
    pub thickness: f64,
}

fn default_chi() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Coarse span caps per direction (mm).
    pub h_max: [f64; 2],
    #[serde(default)]
    pub bands: Vec<RefinementBand>,
    #[serde(default)]
    pub align_x: Vec<f64>,
    #[serde(default)]
    pub align_y: Vec<f64>,
}

fn default_degree() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopConfig {
    /// Fixed number of load steps.
    Steps { count: usize },
    /// Run until CMOD reaches the target, capped at `max_steps`.
    Cmod { target_mm: f64, max_steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Displacement increment per step (mm).
    pub du_mm: f64,
    pub stop: StopConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Steps between field snapshots (0 disables them).
    pub snapshot_interval: usize,
    pub dir: String,
    /// Snapshot sampling points per element per direction.
    pub sample_per_element: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            snapshot_interval: 10,
            dir: "out".into(),
            sample_per_element: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub history: HistoryMode,
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-4,
            max_iter: 50,
            history: HistoryMode::FrozenStep,
            max_halvings: 4,
        }
    }
}

/// Complete run description; the JSON wire format of the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub mesh: MeshConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// Parses and validates a JSON run configuration; unknown keys are
/// rejected. Returns the config together with non-fatal warnings.
pub fn parse_config(text: &str) -> Result<(RunConfig, Vec<String>)> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("schema violation: {e}")))?;
    let warnings = cfg.validate()?;
    Ok((cfg, warnings))
}

/// Pretty JSON with stable field order.
pub fn serialize_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serialization cannot fail")
}

/// Sets a dot-path inside a JSON document, e.g. `material.l0 = 5.0` or
/// `mesh.bands.0.h = 2.5`. The value is parsed as JSON, falling back to a
/// string literal.
pub fn apply_override(doc: &mut serde_json::Value, path: &str, raw: &str) -> Result<()> {
    let value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or(serde_json::Value::String(raw.to_string()));
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let last = k + 1 == parts.len();
        match cursor {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                cursor = map.get_mut(*part).ok_or_else(|| {
                    Error::Config(format!("override path `{path}`: no key `{part}`"))
                })?;
            }
            serde_json::Value::Array(arr) => {
                let idx: usize = part.parse().map_err(|_| {
                    Error::Config(format!("override path `{path}`: `{part}` is not an index"))
                })?;
                if idx >= arr.len() {
                    return Err(Error::Config(format!(
                        "override path `{path}`: index {idx} out of bounds"
                    )));
                }
                if last {
                    arr[idx] = value;
                    return Ok(());
                }
                cursor = &mut arr[idx];
            }
            _ => {
                return Err(Error::Config(format!(
                    "override path `{path}`: `{part}` is not addressable"
                )))
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Validates all physical invariants; error messages are path-qualified.
    /// Returns non-fatal warnings (e.g. under-resolved refinement bands).
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let err = |path: &str, msg: &str| Err(Error::Config(format!("{path}: {msg}")));

        let g = &self.geometry;
        if g.lx <= 0.0 || g.ly <= 0.0 {
            return err("geometry.lx/ly", "domain extent must be strictly positive");
        }
        if g.driven.is_empty() {
            return err("geometry.driven", "at least one driven point is required");
        }
        for (i, d) in g.driven.iter().enumerate() {
            if d.direction == 0.0 {
                return err(&format!("geometry.driven.{i}.direction"), "must be nonzero");
            }
            if d.component == Components::Both {
                return err(
                    &format!("geometry.driven.{i}.component"),
                    "driven dofs are scalar; use `x` or `y`",
                );
            }
        }
        for (i, c) in g.cutouts.iter().enumerate() {
            if c.x0 > c.x1 || c.y0 > c.y1 {
                return err(&format!("geometry.cutouts.{i}"), "empty or inverted rectangle");
            }
            if c.x0 < 0.0 || c.x1 > g.lx || c.y0 < 0.0 || c.y1 > g.ly {
                return err(&format!("geometry.cutouts.{i}"), "outside the domain");
            }
        }

        let m = &self.material;
        for (v, name) in [
            (m.e0, "e0"),
            (m.gc, "gc"),
            (m.ft, "ft"),
            (m.l0, "l0"),
            (m.thickness, "thickness"),
        ] {
            if v <= 0.0 {
                return err(&format!("material.{name}"), "must be strictly positive");
            }
        }
        if !(m.nu > 0.0 && m.nu < 0.5) {
            return err("material.nu", "must lie in (0, 0.5)");
        }
        if !(0.0..=2.0).contains(&m.chi) {
            return err("material.chi", "must lie in [0, 2]");
        }

        let me = &self.mesh;
        if !(2..=4).contains(&me.degree) {
            return err("mesh.degree", "supported degrees are 2, 3, 4");
        }
        if me.h_max[0] <= 0.0 || me.h_max[1] <= 0.0 {
            return err("mesh.h_max", "must be strictly positive");
        }
        for (i, b) in me.bands.iter().enumerate() {
            if b.h <= 0.0 {
                return err(&format!("mesh.bands.{i}.h"), "must be strictly positive");
            }
            if b.range[0] >= b.range[1] {
                return err(&format!("mesh.bands.{i}.range"), "empty range");
            }
            if b.h > 2.0 * m.l0 {
                warnings.push(format!(
                    "mesh.bands.{i}.h = {} exceeds 2 l0 = {}; the regularized crack \
                     will be under-resolved",
                    b.h,
                    2.0 * m.l0
                ));
            }
        }

        let s = &self.schedule;
        if s.du_mm <= 0.0 {
            return err("schedule.du_mm", "must be strictly positive");
        }
        match &s.stop {
            StopConfig::Cmod { target_mm, max_steps } => {
                if *target_mm <= 0.0 {
                    return err("schedule.stop.target_mm", "must be strictly positive");
                }
                if *max_steps == 0 {
                    return err("schedule.stop.max_steps", "must be at least 1");
                }
                if g.cmod_gauge.is_none() {
                    return err(
                        "schedule.stop",
                        "cmod stop criterion requires geometry.cmod_gauge",
                    );
                }
            }
            StopConfig::Steps { .. } => {}
        }

        if self.output.sample_per_element < 2 {
            return err("output.sample_per_element", "must be at least 2");
        }
        if self.solver.tol <= 0.0 {
            return err("solver.tol", "must be strictly positive");
        }
        if self.solver.max_iter == 0 {
            return err("solver.max_iter", "must be at least 1");
        }
        Ok(warnings)
    }

    pub fn material_model(&self) -> Result<MaterialModel> {
        let m = &self.material;
        MaterialModel::new(
            m.e0,
            m.nu,
            m.gc,
            m.ft,
            m.l0,
            m.chi,
            m.softening,
            m.order,
            m.stress_state,
        )
    }

    /// Builds the mesh (cutout edges and constraint points become
    /// mandatory knot lines), carves cutouts, and resolves boundary
    /// conditions to dofs.
    pub fn build_setup(&self) -> Result<RunSetup> {
        self.validate()?;
        let g = &self.geometry;
        let mut spec = MeshSpec {
            degree: self.mesh.degree,
            h_max: self.mesh.h_max,
            bands: self.mesh.bands.clone(),
            align_x: self.mesh.align_x.clone(),
            align_y: self.mesh.align_y.clone(),
        };
        let interior = |v: f64, len: f64| v > 1e-12 && v < len - 1e-12;
        for c in &g.cutouts {
            for x in [c.x0, c.x1] {
                if interior(x, g.lx) {
                    spec.align_x.push(x);
                }
            }
            for y in [c.y0, c.y1] {
                if interior(y, g.ly) {
                    spec.align_y.push(y);
                }
            }
        }
        let mut constraint_points: Vec<[f64; 2]> =
            g.pins.iter().map(|p| p.at).collect();
        constraint_points.extend(g.driven.iter().map(|d| d.at));
        if let Some(gauge) = g.cmod_gauge {
            constraint_points.extend(gauge);
        }
        for p in &constraint_points {
            if interior(p[0], g.lx) {
                spec.align_x.push(p[0]);
            }
            if interior(p[1], g.ly) {
                spec.align_y.push(p[1]);
            }
        }

        let mut mesh = build_mesh(g.lx, g.ly, &spec)?;
        for c in &g.cutouts {
            mesh = mesh.apply_notch(c)?;
        }

        let mut dirichlet: Vec<DirichletDof> = Vec::new();
        let push_components = |dofs: &mut Vec<DirichletDof>,
                                   mesh: &Mesh,
                                   cp: usize,
                                   comps: Components,
                                   value: f64,
                                   driven: bool| {
            if comps != Components::Y {
                dofs.push(DirichletDof {
                    dof: mesh.dof_ux(cp),
                    value,
                    driven,
                });
            }
            if comps != Components::X {
                dofs.push(DirichletDof {
                    dof: mesh.dof_uy(cp),
                    value,
                    driven,
                });
            }
        };
        for clamp in &g.clamps {
            for cp in mesh.edge_cps(clamp.side, clamp.range) {
                push_components(&mut dirichlet, &mesh, cp, clamp.components, 0.0, false);
            }
        }
        for pin in &g.pins {
            let cp = mesh.nearest_cp(pin.at);
            push_components(&mut dirichlet, &mesh, cp, pin.components, 0.0, false);
        }
        for d in &g.driven {
            let cp = mesh.nearest_cp(d.at);
            let dof = match d.component {
                Components::X => mesh.dof_ux(cp),
                _ => mesh.dof_uy(cp),
            };
            dirichlet.push(DirichletDof {
                dof,
                value: d.direction,
                driven: true,
            });
        }
        dirichlet.sort_by_key(|d| (d.dof, d.driven));
        dirichlet.dedup_by_key(|d| d.dof);

        let cmod_gauge = match g.cmod_gauge {
            Some([a, b]) => {
                let ca = mesh.nearest_cp(a);
                let cb = mesh.nearest_cp(b);
                if ca == cb {
                    return Err(Error::Config(
                        "geometry.cmod_gauge: both points resolve to the same control point"
                            .into(),
                    ));
                }
                Some((ca, cb))
            }
            None => None,
        };

        let bcs = BoundaryConditions {
            dirichlet,
            tractions: g.tractions.clone(),
            body_force: g.body_force,
        };
        let (stop, max_steps) = match self.schedule.stop {
            StopConfig::Steps { count } => (StopRule::Steps(count), count),
            StopConfig::Cmod { target_mm, max_steps } => {
                (StopRule::CmodTarget(target_mm), max_steps)
            }
        };
        Ok(RunSetup {
            mesh,
            mat: self.material_model()?,
            bcs,
            thickness: self.material.thickness,
            du: self.schedule.du_mm,
            max_steps,
            stop,
            cmod_gauge,
            solver: SolverOptions {
                tol: self.solver.tol,
                max_iter: self.solver.max_iter,
                history: self.solver.history,
                max_halvings: self.solver.max_halvings,
                ..SolverOptions::default()
            },
        })
    }
}

/// Symmetric three-point-bending concrete beam: 440 x 100 mm with a
/// 5 mm x 50 mm midspan notch, loaded downward at the top center.
pub fn beam_3pb_symmetric() -> RunConfig {
    let l0 = 2.5;
    let h = l0 / 2.0;
    RunConfig {
        name: "beam_3pb_symmetric".into(),
        description: "Symmetric three-point bending of a notched concrete beam \
                      (440 x 100 mm, plane stress); the crack runs vertically \
                      from the notch tip to the load point."
            .into(),
        geometry: GeometryConfig {
            lx: 440.0,
            ly: 100.0,
            cutouts: vec![NotchSpec {
                x0: 217.5,
                x1: 222.5,
                y0: 0.0,
                y1: 50.0,
            }],
            clamps: vec![],
            pins: vec![
                PointPin {
                    at: [0.0, 0.0],
                    components: Components::Both,
                },
                PointPin {
                    at: [440.0, 0.0],
                    components: Components::Y,
                },
            ],
            driven: vec![DrivenPoint {
                at: [220.0, 100.0],
                component: Components::Y,
                direction: -1.0,
            }],
            tractions: vec![],
            body_force: [0.0, 0.0],
            cmod_gauge: None,
        },
        material: MaterialConfig {
            e0: 20_000.0,
            nu: 0.2,
            gc: 0.113,
            ft: 2.4,
            l0,
            chi: 2.0,
            softening: SofteningLaw::Cornelissen,
            order: ModelOrder::Fourth,
            stress_state: StressState::PlaneStress,
            thickness: 100.0,
        },
        mesh: MeshConfig {
            degree: 3,
            h_max: [55.0, 12.5],
            bands: vec![
                RefinementBand {
                    axis: crate::mesh::Axis::X,
                    range: [210.0, 230.0],
                    h,
                },
                RefinementBand {
                    axis: crate::mesh::Axis::Y,
                    range: [0.0, 100.0],
                    h,
                },
            ],
            align_x: vec![],
            align_y: vec![],
        },
        schedule: ScheduleConfig {
            du_mm: 0.01,
            stop: StopConfig::Steps { count: 100 },
        },
        output: OutputConfig::default(),
        solver: SolverConfig::default(),
    }
}

/// L-shaped panel: a 500 x 500 mm square with the lower-right 250 x 250
/// quadrant removed, clamped along the remaining bottom edge and pushed
/// upward 30 mm from the right edge. The crack grows from the re-entrant
/// corner.
pub fn l_panel(l0: f64) -> RunConfig {
    let h = l0 / 2.0;
    RunConfig {
        name: if l0 == 7.5 {
            "l_panel".into()
        } else {
            format!("l_panel_l0_{l0:.1}")
        },
        description: format!(
            "L-shaped concrete panel (500 x 500 mm outline, 250 mm legs, plane \
             stress), upward displacement at (470, 250); length scale {l0} mm."
        ),
        geometry: GeometryConfig {
            lx: 500.0,
            ly: 500.0,
            cutouts: vec![NotchSpec {
                x0: 250.0,
                x1: 500.0,
                y0: 0.0,
                y1: 250.0,
            }],
            clamps: vec![EdgeClamp {
                side: EdgeSide::Bottom,
                range: [0.0, 250.0],
                components: Components::Both,
            }],
            pins: vec![],
            driven: vec![DrivenPoint {
                at: [470.0, 250.0],
                component: Components::Y,
                direction: 1.0,
            }],
            tractions: vec![],
            body_force: [0.0, 0.0],
            cmod_gauge: None,
        },
        material: MaterialConfig {
            e0: 20_000.0,
            nu: 0.18,
            gc: 0.13,
            ft: 2.5,
            l0,
            chi: 2.0,
            softening: SofteningLaw::Cornelissen,
            order: ModelOrder::Fourth,
            stress_state: StressState::PlaneStress,
            thickness: 100.0,
        },
        mesh: MeshConfig {
            degree: 3,
            h_max: [62.5, 62.5],
            bands: vec![
                RefinementBand {
                    axis: crate::mesh::Axis::X,
                    range: [0.0, 280.0],
                    h,
                },
                RefinementBand {
                    axis: crate::mesh::Axis::Y,
                    range: [230.0, 320.0],
                    h,
                },
            ],
            align_x: vec![],
            align_y: vec![],
        },
        schedule: ScheduleConfig {
            du_mm: 0.02,
            stop: StopConfig::Steps { count: 50 },
        },
        output: OutputConfig::default(),
        solver: SolverConfig::default(),
    }
}

/// Mixed-mode three-point bending beam of height `h_mm` (80/160/320) with
/// the notch offset `a * H` from midspan. Span is `3 H` with supports
/// inset `0.25 H`; the notch is 2 mm wide and `H / 2` deep (the offset
/// rule and notch depth are documented modeling choices; the experiment
/// series is defined by `H` and `a`). The length scale follows
/// `l0 = 0.001 H`.
pub fn beam_3pb_mixed(h_mm: f64, a: f64) -> RunConfig {
    let l0 = 0.001 * h_mm;
    let h = l0 / 2.0;
    let lx = 3.5 * h_mm;
    let mid = 0.5 * lx;
    let notch_center = mid + a * h_mm;
    let notch_w = 2.0;
    let band_lo = (notch_center.min(mid) - 20.0 * l0).max(0.0);
    let band_hi = (notch_center.max(mid) + 20.0 * l0).min(lx);
    RunConfig {
        name: format!("beam_3pb_mixed_h{h_mm}_a{a}"),
        description: format!(
            "Mixed-mode three-point bending beam, height {h_mm} mm, notch offset \
             {a} H from midspan (2 mm wide, H/2 deep), span 3 H, plane stress, \
             CMOD-controlled stop; l0 = 0.001 H = {l0} mm."
        ),
        geometry: GeometryConfig {
            lx,
            ly: h_mm,
            cutouts: vec![NotchSpec {
                x0: notch_center - 0.5 * notch_w,
                x1: notch_center + 0.5 * notch_w,
                y0: 0.0,
                y1: 0.5 * h_mm,
            }],
            clamps: vec![],
            pins: vec![
                PointPin {
                    at: [0.25 * h_mm, 0.0],
                    components: Components::Both,
                },
                PointPin {
                    at: [lx - 0.25 * h_mm, 0.0],
                    components: Components::Y,
                },
            ],
            driven: vec![DrivenPoint {
                at: [mid, h_mm],
                component: Components::Y,
                direction: -1.0,
            }],
            tractions: vec![],
            body_force: [0.0, 0.0],
            cmod_gauge: Some([
                [notch_center - 0.5 * notch_w, 0.0],
                [notch_center + 0.5 * notch_w, 0.0],
            ]),
        },
        material: MaterialConfig {
            e0: 33_800.0,
            nu: 0.2,
            gc: 0.08,
            ft: 3.5,
            l0,
            chi: 2.0,
            softening: SofteningLaw::Cornelissen,
            order: ModelOrder::Fourth,
            stress_state: StressState::PlaneStress,
            thickness: 50.0,
        },
        mesh: MeshConfig {
            degree: 3,
            h_max: [h_mm / 4.0, h_mm / 8.0],
            bands: vec![
                RefinementBand {
                    axis: crate::mesh::Axis::X,
                    range: [band_lo, band_hi],
                    h,
                },
                RefinementBand {
                    axis: crate::mesh::Axis::Y,
                    range: [0.35 * h_mm, h_mm],
                    h,
                },
            ],
            align_x: vec![],
            align_y: vec![],
        },
        schedule: ScheduleConfig {
            du_mm: 0.001,
            stop: StopConfig::Cmod {
                target_mm: 0.6,
                max_steps: 2000,
            },
        },
        output: OutputConfig::default(),
        solver: SolverConfig::default(),
    }
}

/// All built-in presets: the symmetric beam, the L-panel length-scale
/// family, and the mixed-mode beam H x a matrix.
pub fn presets() -> Vec<RunConfig> {
    let mut out = vec![beam_3pb_symmetric()];
    for l0 in [2.5, 5.0, 7.5, 10.0] {
        out.push(l_panel(l0));
    }
    for h in [80.0, 160.0, 320.0] {
        for a in [0.0, 0.3125, 0.625] {
            out.push(beam_3pb_mixed(h, a));
        }
    }
    out
}

/// Looks up a preset by name; `l_panel` is an alias for the 7.5 mm
/// length-scale variant.
pub fn preset(name: &str) -> Result<RunConfig> {
    if name == "l_panel_l0_7.5" {
        return Ok(l_panel(7.5));
    }
    if let Some(rest) = name.strip_prefix("l_panel_l0_") {
        if let Ok(l0) = rest.parse::<f64>() {
            if [2.5, 5.0, 10.0].contains(&l0) {
                return Ok(l_panel(l0));
            }
        }
    }
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn beam_preset_carries_benchmark_values() {
        let p = beam_3pb_symmetric();
        assert_eq!(p.material.e0, 20_000.0);
        assert_eq!(p.material.nu, 0.2);
        assert_eq!(p.material.gc, 0.113);
        assert_eq!(p.material.ft, 2.4);
        assert_eq!(p.material.l0, 2.5);
        assert_eq!(p.material.thickness, 100.0);
        assert_eq!(p.schedule.du_mm, 0.01);
        assert_eq!(p.schedule.stop, StopConfig::Steps { count: 100 });
        assert!(p.validate().unwrap().is_empty());
    }

    #[test]
    fn l_panel_preset_carries_benchmark_values() {
        let p = l_panel(7.5);
        assert_eq!(p.material.e0, 20_000.0);
        assert_eq!(p.material.nu, 0.18);
        assert_eq!(p.material.ft, 2.5);
        assert_eq!(p.material.gc, 0.13);
        assert_eq!(p.material.l0, 7.5);
        assert_eq!(p.material.thickness, 100.0);
        assert_eq!(p.schedule.du_mm, 0.02);
        assert!(p.validate().unwrap().is_empty());
    }

    #[test]
    fn mixed_beam_preset_carries_benchmark_values() {
        let p = beam_3pb_mixed(80.0, 0.3125);
        assert_eq!(p.material.e0, 33_800.0);
        assert_eq!(p.material.nu, 0.2);
        assert_eq!(p.material.ft, 3.5);
        assert_relative_eq!(p.material.gc, 0.08);
        assert_relative_eq!(p.material.l0, 0.08); // 0.001 H
        assert_eq!(p.material.thickness, 50.0);
        assert_eq!(p.schedule.du_mm, 0.001);
        assert_eq!(
            p.schedule.stop,
            StopConfig::Cmod {
                target_mm: 0.6,
                max_steps: 2000
            }
        );
        assert!(p.validate().unwrap().is_empty());
    }

    #[test]
    fn preset_listing_and_lookup() {
        let names: Vec<String> = presets().into_iter().map(|p| p.name).collect();
        assert!(names.contains(&"beam_3pb_symmetric".to_string()));
        assert!(names.contains(&"l_panel".to_string()));
        assert!(names.contains(&"l_panel_l0_2.5".to_string()));
        assert!(names.contains(&"beam_3pb_mixed_h320_a0.625".to_string()));
        assert_eq!(names.len(), 1 + 4 + 9);
        assert!(preset("l_panel").is_ok());
        assert!(preset("l_panel_l0_7.5").is_ok());
        assert!(preset("nope").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        for cfg in presets() {
            let text = serialize_config(&cfg);
            let (back, warnings) = parse_config(&text).unwrap();
            assert_eq!(back, cfg);
            assert!(warnings.is_empty());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut doc: serde_json::Value =
            serde_json::from_str(&serialize_config(&beam_3pb_symmetric())).unwrap();
        doc.as_object_mut()
            .unwrap()
            .insert("surprise".into(), serde_json::json!(1));
        assert!(parse_config(&doc.to_string()).is_err());
    }

    #[test]
    fn validation_rejects_bad_physicals() {
        let mut doc: serde_json::Value =
            serde_json::from_str(&serialize_config(&beam_3pb_symmetric())).unwrap();
        apply_override(&mut doc, "material.l0", "-2.5").unwrap();
        let e = parse_config(&doc.to_string()).unwrap_err();
        let msg = format!("{e}");
        assert!(msg.contains("material.l0"), "{msg}");
    }

    #[test]
    fn override_paths_work() {
        let mut doc: serde_json::Value =
            serde_json::from_str(&serialize_config(&beam_3pb_symmetric())).unwrap();
        apply_override(&mut doc, "material.l0", "5.0").unwrap();
        apply_override(&mut doc, "mesh.bands.0.h", "2.5").unwrap();
        apply_override(&mut doc, "schedule.stop.count", "7").unwrap();
        let (cfg, _) = parse_config(&doc.to_string()).unwrap();
        assert_eq!(cfg.material.l0, 5.0);
        assert_eq!(cfg.mesh.bands[0].h, 2.5);
        assert_eq!(cfg.schedule.stop, StopConfig::Steps { count: 7 });
        assert!(apply_override(&mut doc, "material.zzz.q", "1").is_err());
        assert!(apply_override(&mut doc, "mesh.bands.9.h", "1").is_err());
    }

    #[test]
    fn coarse_band_triggers_warning() {
        let mut doc: serde_json::Value =
            serde_json::from_str(&serialize_config(&beam_3pb_symmetric())).unwrap();
        apply_override(&mut doc, "mesh.bands.0.h", "10.0").unwrap();
        let (_, warnings) = parse_config(&doc.to_string()).unwrap();
        assert!(!warnings.is_empty());
        assert!(warnings[0].contains("2 l0"));
    }

    #[test]
    fn small_setup_builds_and_resolves_bcs() {
        // shrink the beam band so the mesh stays small for the test
        let mut cfg = beam_3pb_symmetric();
        cfg.mesh.bands = vec![RefinementBand {
            axis: crate::mesh::Axis::X,
            range: [215.0, 225.0],
            h: 2.5,
        }];
        cfg.mesh.h_max = [55.0, 25.0];
        let setup = cfg.build_setup().unwrap();
        // driven dof resolved near the top center
        let driven = setup.bcs.driven_dofs();
        assert_eq!(driven.len(), 1);
        let cp = driven[0].dof / 2;
        let [x, y] = setup.mesh.cp_position(cp);
        assert!((x - 220.0).abs() <= 5.0, "driven x = {x}");
        assert!((y - 100.0).abs() <= 1e-9, "driven y = {y}");
        // supports at the corners are exact
        let n_driven = 1;
        assert_eq!(setup.bcs.dirichlet.len(), 3 + n_driven);
        // notch removed elements: quadrature area strictly below the full area
        assert!(setup.mesh.total_area() < 440.0 * 100.0 - 1.0);
    }
}
