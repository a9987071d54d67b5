//! Benchmark drivers: analytical reference solutions, the five shipped
//! verification problems, and the generic `static` runner.
//!
//! Each driver consumes a [`CaseDefinition`], runs the solver, writes the
//! artifacts the case's output block asks for (run log, curve CSV, field
//! exports), and returns a typed report that the test suite asserts
//! against. Non-convergence is part of several procedures (limit-load
//! detection, strength-reduction failure) and is reported in the summary
//! rather than raised as an error.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::path::PathBuf;

use crate::casefile::{CaseDefinition, Driver, GeostaticDef, LoadDef, MeshSource};
use crate::error::{Error, Result};
use crate::export;
use crate::generators;
use crate::mesh::{BoundaryEdge, Mesh};
use crate::smoothing::Kernel;
use crate::solver::{dof, LoadState, ResolvedStep, RunLog, SolveSettings, System};

/// Thick-walled cylinder under internal pressure with a traction-free
/// axial direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticalCylinder {
    /// Inner radius, m.
    pub r_a: f64,
    /// Outer radius, m.
    pub r_b: f64,
    /// Internal pressure, Pa.
    pub p: f64,
    /// Young's modulus, Pa.
    pub e: f64,
    /// Poisson ratio.
    pub nu: f64,
}

impl AnalyticalCylinder {
    /// Checks the radii and pressure.
    pub fn validate(&self) -> Result<()> {
        if !(self.r_a > 0.0 && self.r_b > self.r_a && self.p >= 0.0 && self.e > 0.0) {
            return Err(Error::Config(format!(
                "cylinder needs 0 < R_a < R_b, P >= 0, E > 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Radial displacement at radius `r`.
    pub fn u_rad(&self, r: f64) -> Result<f64> {
        let tol = 1e-9 * self.r_b;
        if r < self.r_a - tol || r > self.r_b + tol {
            return Err(Error::Geometry(format!(
                "radius {r} outside the annulus [{}, {}]",
                self.r_a, self.r_b
            )));
        }
        let r = r.clamp(self.r_a, self.r_b);
        let scale = self.r_a.powi(2) * self.p * r / (self.e * (self.r_b.powi(2) - self.r_a.powi(2)));
        Ok(scale * (1.0 - self.nu + (self.r_b / r).powi(2) * (1.0 + self.nu)))
    }
}

/// Cartesian displacement of the analytical cylinder at `(r, theta)`.
pub fn cylinder_analytic_displacement(
    model: &AnalyticalCylinder,
    r: f64,
    theta: f64,
) -> Result<(f64, f64)> {
    let u = model.u_rad(r)?;
    Ok((u * theta.cos(), u * theta.sin()))
}

/// Ultimate major principal stress of a cohesive-frictional material under
/// lateral stress `sigma3` (compression positive, radians).
pub fn ultimate_biaxial_stress(c: f64, phi: f64, sigma3: f64) -> f64 {
    let s = phi.sin();
    sigma3 * (1.0 + s) / (1.0 - s) + 2.0 * c * phi.cos() / (1.0 - s)
}

/// Prandtl bearing capacity of a weightless strip footing (radians).
pub fn prandtl_capacity(c: f64, phi: f64) -> f64 {
    if phi.abs() < 1e-12 {
        return (std::f64::consts::PI + 2.0) * c;
    }
    let s = phi.sin();
    let n_q = (std::f64::consts::PI * phi.tan()).exp() * (1.0 + s) / (1.0 - s);
    c * (n_q - 1.0) / phi.tan()
}

/// Reduced strength pair `(c_m, phi_m)` for a reduction factor (radians).
pub fn reduce_strength(c: f64, phi: f64, f_r: f64) -> (f64, f64) {
    (c / f_r, (phi.tan() / f_r).atan())
}

/// Least-squares slope of `ln(e)` against `ln(h)`.
pub fn least_squares_rate(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for (h, e) in points {
        mx += h.ln();
        my += e.ln();
    }
    mx /= n;
    my /= n;
    let (mut num, mut den) = (0.0, 0.0);
    for (h, e) in points {
        num += (h.ln() - mx) * (e.ln() - my);
        den += (h.ln() - mx).powi(2);
    }
    num / den
}

/// Zero-valued constraints from the case's `fix` lines.
pub fn fix_constraints(case: &CaseDefinition, mesh: &Mesh) -> Result<BTreeMap<usize, f64>> {
    let mut constraints = BTreeMap::new();
    for fix in &case.fixes {
        for &n in mesh.node_set(&fix.set)? {
            if fix.x {
                constraints.insert(dof(n, 0), 0.0);
            }
            if fix.y {
                constraints.insert(dof(n, 1), 0.0);
            }
        }
    }
    Ok(constraints)
}

/// Boundary edges whose endpoints both belong to the named node set.
pub fn edges_of_set(mesh: &Mesh, set: &str) -> Result<Vec<BoundaryEdge>> {
    let members: HashSet<usize> = mesh.node_set(set)?.iter().copied().collect();
    let edges: Vec<BoundaryEdge> = mesh
        .boundary_edges()
        .into_iter()
        .filter(|e| members.contains(&e.nodes[0]) && members.contains(&e.nodes[1]))
        .collect();
    if edges.is_empty() {
        return Err(Error::Config(format!(
            "node set `{set}` spans no boundary edges"
        )));
    }
    Ok(edges)
}

/// The declared gravity scale (0 when no gravity load is present).
pub fn gravity_scale(case: &CaseDefinition) -> f64 {
    case.loads
        .iter()
        .find_map(|l| match l {
            LoadDef::Gravity { scale } => Some(*scale),
            _ => None,
        })
        .unwrap_or(0.0)
}

/// Builds the full-value external load state from the case's pressure and
/// traction lines (prescribed displacements are handled as constraints).
pub fn target_loads(case: &CaseDefinition, mesh: &Mesh) -> Result<LoadState> {
    let mut loads = LoadState {
        gravity_scale: gravity_scale(case),
        ..Default::default()
    };
    for load in &case.loads {
        match load {
            LoadDef::Pressure { set, value } => {
                for edge in edges_of_set(mesh, set)? {
                    loads
                        .tractions
                        .push((edge, [-value * edge.normal[0], -value * edge.normal[1]]));
                }
            }
            LoadDef::Traction { set, tx, ty } => {
                for edge in edges_of_set(mesh, set)? {
                    loads.tractions.push((edge, [*tx, *ty]));
                }
            }
            LoadDef::Gravity { .. } | LoadDef::DisplaceX { .. } | LoadDef::DisplaceY { .. } => {}
        }
    }
    Ok(loads)
}

/// Prescribed-displacement targets from `displace_x`/`displace_y` lines.
pub fn displacement_targets(case: &CaseDefinition, mesh: &Mesh) -> Result<BTreeMap<usize, f64>> {
    let mut targets = BTreeMap::new();
    for load in &case.loads {
        let (set, comp, value) = match load {
            LoadDef::DisplaceX { set, value } => (set, 0, *value),
            LoadDef::DisplaceY { set, value } => (set, 1, *value),
            _ => continue,
        };
        for &n in mesh.node_set(set)? {
            targets.insert(dof(n, comp), value);
        }
    }
    Ok(targets)
}

/// Builds the solver system for a case.
pub fn build_system(case: &CaseDefinition) -> Result<System> {
    let mesh = case.validate()?;
    let materials = case.build_materials()?;
    let settings = SolveSettings {
        tol_r: case.solver.tol_r,
        max_iter: case.solver.max_iter,
        kernel: case.solver.kernel()?,
    };
    System::new(mesh, materials, settings)
}

/// Runs the case's geostatic initialization if one is declared.
pub fn maybe_geostatic(
    case: &CaseDefinition,
    system: &mut System,
    constraints: &BTreeMap<usize, f64>,
    log: &mut RunLog,
) -> Result<()> {
    let k0 = match case.geostatic {
        GeostaticDef::None => return Ok(()),
        GeostaticDef::Auto => None,
        GeostaticDef::K0(r) => Some(r),
    };
    let surface = system
        .mesh
        .nodes
        .iter()
        .map(|n| n.y)
        .fold(f64::NEG_INFINITY, f64::max);
    let gravity = LoadState {
        gravity_scale: gravity_scale(case),
        ..Default::default()
    };
    system.geostatic_init(k0, surface, &gravity, constraints, log)?;
    Ok(())
}

/// How a run ended, for the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// Everything the driver required converged.
    Success,
    /// A step that must converge did not.
    NonConvergence,
}

/// Driver result surfaced to the CLI.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub outcome: RunOutcome,
    /// Human-readable result lines.
    pub notes: Vec<String>,
}

struct OutputSink {
    directory: Option<PathBuf>,
    vtk: bool,
    csv: bool,
}

impl OutputSink {
    fn new(case: &CaseDefinition) -> Result<OutputSink> {
        let directory = PathBuf::from(&case.output.directory);
        std::fs::create_dir_all(&directory)?;
        Ok(OutputSink {
            directory: Some(directory),
            vtk: case.output.vtk,
            csv: case.output.csv,
        })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.directory.as_ref().map(|d| d.join(name))
    }

    fn fields(&self, system: &System, title: &str, stem: &str) -> Result<()> {
        let Some(dir) = &self.directory else {
            return Ok(());
        };
        if self.vtk {
            export::write_vtk(system, title, &dir.join(format!("{stem}.vtk")))?;
        }
        if self.csv {
            export::write_field_csv(system, dir, stem)?;
        }
        Ok(())
    }

    fn curve(&self, name: &str, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        if let Some(path) = self.path(name) {
            export::write_curve_csv(&path, headers, rows)?;
        }
        Ok(())
    }
}

/// One mesh row of the cylinder convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// Target element size, m.
    pub h: f64,
    /// Relative L2 nodal displacement error, smoothed kernel.
    pub err_csfem: f64,
    /// Same mesh, compatible 2x2 Gauss kernel.
    pub err_fem: f64,
}

/// Cylinder study report.
#[derive(Debug, Clone)]
pub struct CylinderReport {
    pub rows: Vec<ConvergenceRow>,
    pub rate_csfem: f64,
    pub rate_fem: f64,
}

/// Runs the thick-cylinder convergence study over `param sizes`.
pub fn run_cylinder(case: &CaseDefinition, log: &mut RunLog) -> Result<CylinderReport> {
    let MeshSource::Generator { name, args } = &case.mesh else {
        return Err(Error::Config(
            "the cylinder driver needs a `mesh generator annulus ...` line".into(),
        ));
    };
    if name != "annulus" {
        return Err(Error::Config(format!(
            "the cylinder driver needs the annulus generator, got `{name}`"
        )));
    }
    let (r_a, r_b) = (
        *args.get("ra").ok_or_else(|| Error::Config("annulus is missing `ra`".into()))?,
        *args.get("rb").ok_or_else(|| Error::Config("annulus is missing `rb`".into()))?,
    );
    let pressure = case
        .loads
        .iter()
        .find_map(|l| match l {
            LoadDef::Pressure { set, value } if set == "inner" => Some(*value),
            _ => None,
        })
        .ok_or_else(|| Error::Config("cylinder case needs `load pressure inner <P>`".into()))?;
    let material = &case.materials[0];
    let model = AnalyticalCylinder {
        r_a,
        r_b,
        p: pressure,
        e: material.e,
        nu: material.nu,
    };
    model.validate()?;
    let sizes = case.param_list("sizes")?.to_vec();
    if sizes.len() < 2 || sizes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "param `sizes` must list at least two decreasing element sizes".into(),
        ));
    }

    // The reference solution has a traction-free axial direction; the
    // plane-strain model reproduces it exactly with the substituted
    // constants nu/(1 + nu) and E(1 + 2 nu)/(1 + nu)^2.
    let nu_eff = material.nu / (1.0 + material.nu);
    let e_eff = material.e * (1.0 + 2.0 * material.nu) / (1.0 + material.nu).powi(2);

    let sink = OutputSink::new(case)?;
    let mut rows = Vec::new();
    let mut last_system: Option<System> = None;
    for &h in &sizes {
        let nr = (((r_b - r_a) / h).round() as usize).max(1);
        let ntheta = ((0.5 * (r_a + r_b) * std::f64::consts::FRAC_PI_2 / h).round() as usize).max(1);
        let mesh = generators::quarter_annulus(r_a, r_b, nr, ntheta)?;
        let mut errors = [0.0f64; 2];
        for (slot, kernel) in [
            (0, case.solver.kernel()?),
            (1, Kernel::Fem),
        ] {
            let mut solve_case = case.clone();
            solve_case.materials[0].e = e_eff;
            solve_case.materials[0].nu = nu_eff;
            let materials = solve_case.build_materials()?;
            let settings = SolveSettings {
                tol_r: case.solver.tol_r,
                max_iter: case.solver.max_iter,
                kernel,
            };
            let mut system = System::new(mesh.clone(), materials, settings)?;
            let mut constraints = BTreeMap::new();
            for &n in system.mesh.node_set("x_axis")? {
                constraints.insert(dof(n, 1), 0.0);
            }
            for &n in system.mesh.node_set("y_axis")? {
                constraints.insert(dof(n, 0), 0.0);
            }
            let mut loads = LoadState::default();
            for edge in edges_of_set(&system.mesh, "inner")? {
                loads
                    .tractions
                    .push((edge, [-pressure * edge.normal[0], -pressure * edge.normal[1]]));
            }
            let step_name = format!("h{h}-{}", if slot == 0 { "csfem" } else { "fem" });
            let result = system.newton_increment(&loads, &constraints, log, &step_name)?;
            if !result.converged {
                return Err(Error::Solver(format!(
                    "elastic cylinder solve `{step_name}` did not converge"
                )));
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for node in &system.mesh.nodes {
                let r = node.x.hypot(node.y);
                let theta = node.y.atan2(node.x);
                let (ux, uy) = cylinder_analytic_displacement(&model, r, theta)?;
                num += (system.d[dof(node.id, 0)] - ux).powi(2)
                    + (system.d[dof(node.id, 1)] - uy).powi(2);
                den += ux * ux + uy * uy;
            }
            errors[slot] = (num / den).sqrt();
            if slot == 0 {
                last_system = Some(system);
            }
        }
        rows.push(ConvergenceRow {
            h,
            err_csfem: errors[0],
            err_fem: errors[1],
        });
        log.note(&format!(
            "h = {h}: csfem error {:.6e}, fem error {:.6e}",
            errors[0], errors[1]
        ));
    }
    let rate_csfem = least_squares_rate(
        &rows.iter().map(|r| (r.h, r.err_csfem)).collect::<Vec<_>>(),
    );
    let rate_fem = least_squares_rate(&rows.iter().map(|r| (r.h, r.err_fem)).collect::<Vec<_>>());
    log.note(&format!(
        "observed rates: csfem {rate_csfem:.3}, fem {rate_fem:.3}"
    ));
    sink.curve(
        "convergence.csv",
        &["h", "err_csfem", "err_fem"],
        &rows
            .iter()
            .map(|r| vec![r.h, r.err_csfem, r.err_fem])
            .collect::<Vec<_>>(),
    )?;
    if let Some(system) = &last_system {
        sink.fields(system, "thick cylinder, finest mesh", "fields")?;
    }
    Ok(CylinderReport {
        rows,
        rate_csfem,
        rate_fem,
    })
}

/// Biaxial compression report.
#[derive(Debug, Clone)]
pub struct BiaxialReport {
    /// `(axial strain, axial stress Pa)` per increment.
    pub curve: Vec<(f64, f64)>,
    /// Final (plateau) axial stress, Pa.
    pub plateau: f64,
    /// Closed-form ultimate stress for the case's parameters, Pa.
    pub ultimate: f64,
}

/// Runs the confined biaxial compression test.
pub fn run_biaxial(case: &CaseDefinition, log: &mut RunLog) -> Result<BiaxialReport> {
    let mut system = build_system(case)?;
    let sink = OutputSink::new(case)?;
    let fixes = fix_constraints(case, &system.mesh)?;
    let targets = displacement_targets(case, &system.mesh)?;
    if targets.is_empty() {
        return Err(Error::Config(
            "biaxial case needs a `load displace_y top <value>` line".into(),
        ));
    }
    let loads = target_loads(case, &system.mesh)?;
    let strength = case.materials[0]
        .strength
        .ok_or_else(|| Error::Config("biaxial case needs a strength block".into()))?;
    let confine = case
        .loads
        .iter()
        .find_map(|l| match l {
            LoadDef::Pressure { value, .. } => Some(*value),
            _ => None,
        })
        .unwrap_or(0.0);
    let ultimate = ultimate_biaxial_stress(strength.c, strength.phi_deg.to_radians(), confine);

    let top: Vec<usize> = system.mesh.node_set("top")?.to_vec();
    let top_dofs: HashSet<usize> = top.iter().map(|&n| dof(n, 1)).collect();
    let width = {
        let xs: Vec<f64> = top.iter().map(|&n| system.mesh.nodes[n].x).collect();
        xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - xs.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    };
    let height = system
        .mesh
        .nodes
        .iter()
        .map(|n| n.y)
        .fold(f64::NEG_INFINITY, f64::max)
        - system
            .mesh
            .nodes
            .iter()
            .map(|n| n.y)
            .fold(f64::INFINITY, f64::min);

    let mut held = fixes.clone();
    for &g in targets.keys() {
        held.insert(g, 0.0);
    }
    let confine_increments = case.param_or("confine_increments", 4.0)? as usize;
    let confine_step = ResolvedStep {
        name: "confine".into(),
        increments: confine_increments.max(1),
        deactivate: vec![],
        activate: vec![],
        constraints_from: held.clone(),
        constraints_to: held.clone(),
        loads_from: LoadState::default(),
        loads_to: loads.clone(),
    };
    let out = system.run_step(&confine_step, log, |_, _, _| {})?;
    if !out.completed {
        return Err(Error::Solver("confinement stage did not converge".into()));
    }

    let mut pushed = fixes.clone();
    for (&g, &v) in &targets {
        pushed.insert(g, v);
    }
    let axial_target = targets.values().next().copied().unwrap_or(0.0);
    let mut curve = Vec::new();
    let shear_step = ResolvedStep {
        name: "compress".into(),
        increments: case.increments,
        deactivate: vec![],
        activate: vec![],
        constraints_from: held,
        constraints_to: pushed,
        loads_from: loads.clone(),
        loads_to: loads,
    };
    let out = system.run_step(&shear_step, log, |_, result, alpha| {
        let reaction: f64 = result
            .reactions
            .iter()
            .filter(|(g, _)| top_dofs.contains(g))
            .map(|(_, v)| v)
            .sum();
        let strain = -(alpha * axial_target) / height;
        curve.push((strain, -reaction / width));
    })?;
    if !out.completed {
        return Err(Error::Solver("biaxial compression did not converge".into()));
    }
    let plateau = curve.last().map(|(_, s)| *s).unwrap_or(0.0);
    log.note(&format!(
        "plateau axial stress {plateau:.4e} Pa (closed form {ultimate:.4e} Pa)"
    ));
    sink.curve(
        "curve.csv",
        &["axial_strain", "axial_stress"],
        &curve.iter().map(|(e, s)| vec![*e, *s]).collect::<Vec<_>>(),
    )?;
    sink.fields(&system, "biaxial compression, final state", "fields")?;
    Ok(BiaxialReport {
        curve,
        plateau,
        ultimate,
    })
}

/// Footing report.
#[derive(Debug, Clone)]
pub struct FootingReport {
    /// `(footing pressure Pa, centerline settlement m)` per increment.
    pub curve: Vec<(f64, f64)>,
    /// Last converged pressure when the ramp did not complete.
    pub limit: Option<f64>,
    /// Target pressure of the ramp, Pa.
    pub target: f64,
}

/// Runs the strip-footing pressure ramp and reports the limit load.
pub fn run_footing(case: &CaseDefinition, log: &mut RunLog) -> Result<FootingReport> {
    let mut system = build_system(case)?;
    let sink = OutputSink::new(case)?;
    let constraints = fix_constraints(case, &system.mesh)?;
    let loads = target_loads(case, &system.mesh)?;
    let target = case
        .loads
        .iter()
        .find_map(|l| match l {
            LoadDef::Pressure { set, value } if set == "footing" => Some(*value),
            _ => None,
        })
        .ok_or_else(|| Error::Config("footing case needs `load pressure footing <q>`".into()))?;
    let monitor = *system
        .mesh
        .node_set("footing")?
        .iter()
        .min_by(|&&a, &&b| {
            system.mesh.nodes[a]
                .x
                .partial_cmp(&system.mesh.nodes[b].x)
                .unwrap()
        })
        .unwrap();

    let mut curve = Vec::new();
    let step = ResolvedStep {
        name: "press".into(),
        increments: case.increments,
        deactivate: vec![],
        activate: vec![],
        constraints_from: constraints.clone(),
        constraints_to: constraints,
        loads_from: LoadState {
            gravity_scale: loads.gravity_scale,
            ..Default::default()
        },
        loads_to: loads,
    };
    let out = system.run_step(&step, log, |sys, _, alpha| {
        curve.push((alpha * target, -sys.d[dof(monitor, 1)]));
    })?;
    let limit = if out.completed {
        None
    } else {
        Some(out.alpha_reached * target)
    };
    match limit {
        Some(q) => log.note(&format!("limit load {q:.2} Pa (ramp target {target} Pa)")),
        None => log.note("ramp completed without a limit"),
    }
    sink.curve(
        "curve.csv",
        &["pressure", "settlement"],
        &curve.iter().map(|(q, s)| vec![*q, *s]).collect::<Vec<_>>(),
    )?;
    sink.fields(&system, "strip footing, last converged state", "fields")?;
    Ok(FootingReport {
        curve,
        limit,
        target,
    })
}

/// Tunnel excavation report.
#[derive(Debug, Clone)]
pub struct TunnelReport {
    /// Crown vertical displacement after each stage, m.
    pub crown: Vec<f64>,
    /// Whether every stage converged.
    pub completed: bool,
}

/// Runs the staged excavation.
pub fn run_excavation(case: &CaseDefinition, log: &mut RunLog) -> Result<TunnelReport> {
    let mut system = build_system(case)?;
    let sink = OutputSink::new(case)?;
    let constraints = fix_constraints(case, &system.mesh)?;
    maybe_geostatic(case, &mut system, &constraints, log)?;
    let crown = system.mesh.node_set("crown")?[0];
    let gravity = LoadState {
        gravity_scale: gravity_scale(case),
        ..Default::default()
    };

    let mut stages = Vec::new();
    for k in 1.. {
        let name = format!("stage{k}");
        if system.mesh.element_sets.contains_key(&name) {
            stages.push(name);
        } else {
            break;
        }
    }
    if stages.is_empty() {
        return Err(Error::Config(
            "tunnel case mesh defines no `stage1..` element sets".into(),
        ));
    }

    let mut crown_history = Vec::new();
    for name in &stages {
        let set = system.mesh.element_set(name)?.to_vec();
        let step = ResolvedStep {
            name: name.clone(),
            increments: case.increments,
            deactivate: set,
            activate: vec![],
            constraints_from: constraints.clone(),
            constraints_to: constraints.clone(),
            loads_from: gravity.clone(),
            loads_to: gravity.clone(),
        };
        let out = system.run_step(&step, log, |_, _, _| {})?;
        let u = system.d[dof(crown, 1)];
        crown_history.push(u);
        log.note(&format!("{name}: crown displacement {u:.6e} m"));
        sink.fields(&system, &format!("excavation, {name}"), &format!("fields_{name}"))?;
        if !out.completed {
            return Ok(TunnelReport {
                crown: crown_history,
                completed: false,
            });
        }
    }
    sink.curve(
        "crown.csv",
        &["stage", "crown_uy"],
        &crown_history
            .iter()
            .enumerate()
            .map(|(i, u)| vec![(i + 1) as f64, *u])
            .collect::<Vec<_>>(),
    )?;
    Ok(TunnelReport {
        crown: crown_history,
        completed: true,
    })
}

/// One strength-reduction sweep entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub f_r: f64,
    /// Monitor-node displacement magnitude, m (last converged value).
    pub monitor: f64,
    pub converged: bool,
}

/// Slope stability report.
#[derive(Debug, Clone)]
pub struct SlopeReport {
    pub rows: Vec<SweepRow>,
    /// Factor of safety: last F_r before failure; `None` when the sweep
    /// is inconclusive.
    pub fos: Option<f64>,
    /// Whether the yielded cells at failure form a band connecting toe to
    /// crest (`None` when no failure was detected).
    pub band_connected: Option<bool>,
}

/// Elements sharing an edge, over the whole mesh.
fn element_neighbors(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut edge_owners: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for elem in &mesh.elements {
        for k in 0..4 {
            let a = elem.node_ids[k];
            let b = elem.node_ids[(k + 1) % 4];
            edge_owners
                .entry((a.min(b), a.max(b)))
                .or_default()
                .push(elem.id);
        }
    }
    let mut neighbors = vec![Vec::new(); mesh.elements.len()];
    for owners in edge_owners.values() {
        if owners.len() == 2 {
            neighbors[owners[0]].push(owners[1]);
            neighbors[owners[1]].push(owners[0]);
        }
    }
    neighbors
}

/// True when the yielded elements form an edge-connected path from the
/// neighborhood of `from_point` to the neighborhood of `to_point`. The
/// neighborhoods span 2.5 median element sizes, because a slip band can
/// daylight one element short of the exact surface point.
fn yielded_band_connected(
    system: &System,
    states: &[crate::constitutive::MaterialState],
    from_point: [f64; 2],
    to_point: [f64; 2],
) -> bool {
    let yielded_element = |e: usize| -> bool {
        (system.offsets[e]..system.offsets[e + 1])
            .any(|ci| states[ci].yielded || states[ci].plastic_strain_magnitude() > 1e-10)
    };
    let mut areas: Vec<f64> = system
        .mesh
        .elements
        .iter()
        .filter(|e| e.active)
        .map(|e| {
            (system.offsets[e.id]..system.offsets[e.id + 1])
                .map(|ci| system.cells[ci].weight)
                .sum()
        })
        .collect();
    if areas.is_empty() {
        return false;
    }
    areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let reach = 2.5 * areas[areas.len() / 2].sqrt();
    let touches = |e: usize, p: [f64; 2]| -> bool {
        system.mesh.elements[e].node_ids.iter().any(|&n| {
            let node = &system.mesh.nodes[n];
            (node.x - p[0]).hypot(node.y - p[1]) <= reach
        })
    };
    let neighbors = element_neighbors(&system.mesh);
    let mut queue = VecDeque::new();
    let mut seen = vec![false; system.mesh.elements.len()];
    for elem in system.mesh.elements.iter().filter(|e| e.active) {
        if touches(elem.id, from_point) && yielded_element(elem.id) {
            seen[elem.id] = true;
            queue.push_back(elem.id);
        }
    }
    while let Some(e) = queue.pop_front() {
        if touches(e, to_point) {
            return true;
        }
        for &n in &neighbors[e] {
            if !seen[n] && system.mesh.elements[n].active && yielded_element(n) {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    false
}

/// Runs the strength-reduction sweep and detects the factor of safety.
pub fn run_slope_stability(case: &CaseDefinition, log: &mut RunLog) -> Result<SlopeReport> {
    let mesh = case.validate()?;
    let sink = OutputSink::new(case)?;
    let base_materials = case.build_materials()?;
    for m in &base_materials {
        if m.mc.is_none() {
            return Err(Error::Config(format!(
                "slope material `{}` has no strength block",
                m.name
            )));
        }
    }
    let settings = SolveSettings {
        tol_r: case.solver.tol_r,
        max_iter: case.solver.max_iter,
        kernel: case.solver.kernel()?,
    };
    let constraints = {
        let mut c = BTreeMap::new();
        for fix in &case.fixes {
            for &n in mesh.node_set(&fix.set)? {
                if fix.x {
                    c.insert(dof(n, 0), 0.0);
                }
                if fix.y {
                    c.insert(dof(n, 1), 0.0);
                }
            }
        }
        c
    };
    let monitor = mesh.node_set("crest")?[0];
    let toe = mesh.node_set("toe")?[0];
    let crest_point = [mesh.nodes[monitor].x, mesh.nodes[monitor].y];
    let toe_point = [mesh.nodes[toe].x, mesh.nodes[toe].y];
    let start = case.param_or("sweep_start", 0.5)?;
    let step_size = case.param_or("sweep_step", 0.01)?;
    let max = case.param_or("sweep_max", 3.0)?;
    let jump_ratio = case.param_or("jump_ratio", 10.0)?;
    if !(start > 0.0 && step_size > 0.0 && max > start) {
        return Err(Error::Config(format!(
            "sweep schedule needs 0 < start < max and step > 0, got start {start}, \
             step {step_size}, max {max}"
        )));
    }
    let scale = gravity_scale(case);
    if scale == 0.0 {
        return Err(Error::Config("slope case needs `load gravity <scale>`".into()));
    }

    let mut rows: Vec<SweepRow> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    let mut previous_monitor: Option<f64> = None;
    let mut fos = None;
    let mut band_connected = None;

    let mut f_r = start;
    let steps = ((max - start) / step_size).round() as usize;
    for k in 0..=steps {
        f_r = start + k as f64 * step_size;
        let mut materials = base_materials.clone();
        for m in &mut materials {
            let mc = m.mc.as_mut().unwrap();
            let (c_m, phi_m) = reduce_strength(mc.c, mc.phi, f_r);
            let psi_m = if mc.psi == mc.phi {
                phi_m
            } else {
                mc.psi.min(phi_m)
            };
            mc.c = c_m;
            mc.phi = phi_m;
            mc.psi = psi_m;
        }
        let mut system = System::new(mesh.clone(), materials, settings)?;
        let step = ResolvedStep {
            name: format!("fr{f_r:.4}"),
            increments: case.increments,
            deactivate: vec![],
            activate: vec![],
            constraints_from: constraints.clone(),
            constraints_to: constraints.clone(),
            loads_from: LoadState::default(),
            loads_to: LoadState {
                gravity_scale: scale,
                ..Default::default()
            },
        };
        let out = system.run_step(&step, log, |_, _, _| {})?;
        if !out.completed {
            rows.push(SweepRow {
                f_r,
                monitor: f64::NAN,
                converged: false,
            });
            fos = rows
                .iter()
                .rev()
                .find(|r| r.converged)
                .map(|r| r.f_r);
            let failure_states = out
                .failure
                .as_ref()
                .map(|f| f.states.clone())
                .unwrap_or_else(|| system.states.clone());
            band_connected = Some(yielded_band_connected(
                &system,
                &failure_states,
                toe_point,
                crest_point,
            ));
            log.note(&format!(
                "failure at F_r = {f_r:.4} (non-convergence); FOS = {:?}",
                fos
            ));
            sink.fields(&system, "slope at failure (last converged state)", "fields_failure")?;
            break;
        }
        let u = system.d[dof(monitor, 0)].hypot(system.d[dof(monitor, 1)]);
        rows.push(SweepRow {
            f_r,
            monitor: u,
            converged: true,
        });
        if let Some(prev) = previous_monitor {
            let delta = (u - prev).abs();
            if deltas.len() >= 3 {
                // Median over a recent window so the flat elastic prefix
                // ages out; the relative floor ignores sub-0.1% changes
                // that are equilibrium noise, not deformation growth.
                let window = &deltas[deltas.len().saturating_sub(5)..];
                let mut sorted = window.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = sorted[sorted.len() / 2];
                if median > 0.0 && delta > jump_ratio * median && delta > 1e-3 * u.abs() {
                    fos = Some(f_r - step_size);
                    band_connected = Some(yielded_band_connected(
                        &system,
                        &system.states,
                        toe_point,
                        crest_point,
                    ));
                    log.note(&format!(
                        "failure at F_r = {f_r:.4} (displacement jump {delta:.3e} vs median \
                         {median:.3e}); FOS = {:.4}",
                        f_r - step_size
                    ));
                    sink.fields(&system, "slope at failure (jump state)", "fields_failure")?;
                    break;
                }
            }
            deltas.push(delta);
        }
        previous_monitor = Some(u);
    }
    if fos.is_none() {
        log.note(&format!(
            "sweep exhausted at F_r = {f_r:.4} without failure; inconclusive"
        ));
    }
    sink.curve(
        "sweep.csv",
        &["f_r", "monitor_displacement", "converged"],
        &rows
            .iter()
            .map(|r| vec![r.f_r, r.monitor, r.converged as u8 as f64])
            .collect::<Vec<_>>(),
    )?;
    Ok(SlopeReport {
        rows,
        fos,
        band_connected,
    })
}

/// Generic single-schedule run: optional geostatic initialization, then
/// one step ramping all declared loads and prescribed displacements.
pub fn run_static(case: &CaseDefinition, log: &mut RunLog) -> Result<RunSummary> {
    let mut system = build_system(case)?;
    let sink = OutputSink::new(case)?;
    let fixes = fix_constraints(case, &system.mesh)?;
    maybe_geostatic(case, &mut system, &fixes, log)?;
    let loads = target_loads(case, &system.mesh)?;
    let targets = displacement_targets(case, &system.mesh)?;
    let mut to = fixes.clone();
    for (&g, &v) in &targets {
        to.insert(g, v);
    }
    let mut from = fixes.clone();
    for &g in targets.keys() {
        from.insert(g, 0.0);
    }
    let loads_from = if case.geostatic == GeostaticDef::None {
        LoadState::default()
    } else {
        LoadState {
            gravity_scale: loads.gravity_scale,
            ..Default::default()
        }
    };
    let step = ResolvedStep {
        name: case.name.clone(),
        increments: case.increments,
        deactivate: vec![],
        activate: vec![],
        constraints_from: from,
        constraints_to: to,
        loads_from,
        loads_to: loads,
    };
    let out = system.run_step(&step, log, |_, _, _| {})?;
    sink.fields(&system, &case.name, "fields")?;
    let outcome = if out.completed {
        RunOutcome::Success
    } else {
        RunOutcome::NonConvergence
    };
    Ok(RunSummary {
        outcome,
        notes: vec![
            format!("completed fraction {:.4}", out.alpha_reached),
            system.summary(),
        ],
    })
}

/// Shipped benchmark case texts, embedded at compile time.
pub const BUILTIN_CASES: [(&str, &str); 5] = [
    ("cylinder", include_str!("../../../cases/cylinder.case")),
    ("biaxial", include_str!("../../../cases/biaxial.case")),
    ("footing", include_str!("../../../cases/footing.case")),
    ("tunnel", include_str!("../../../cases/tunnel.case")),
    ("slope", include_str!("../../../cases/slope.case")),
];

/// Parses a shipped benchmark case by name.
pub fn builtin_case(name: &str) -> Result<CaseDefinition> {
    for (key, text) in BUILTIN_CASES {
        if key == name {
            return crate::casefile::parse_case_str(text);
        }
    }
    Err(Error::Config(format!(
        "unknown benchmark `{name}` (expected cylinder, biaxial, footing, tunnel, or slope)"
    )))
}

/// Runs any case end to end, writing the run log into the output
/// directory; `echo` mirrors the log to stdout.
pub fn run_case(case: &CaseDefinition, echo: bool) -> Result<RunSummary> {
    crate::configure_deterministic();
    let mut log = RunLog::new(echo);
    let summary = match case.driver {
        Driver::Static => run_static(case, &mut log)?,
        Driver::Cylinder => {
            let report = run_cylinder(case, &mut log)?;
            let mut notes = vec![format!(
                "rates: csfem {:.3}, fem {:.3}",
                report.rate_csfem, report.rate_fem
            )];
            for row in &report.rows {
                notes.push(format!(
                    "h = {}: csfem error {:.4e}, fem error {:.4e}",
                    row.h, row.err_csfem, row.err_fem
                ));
            }
            RunSummary {
                outcome: RunOutcome::Success,
                notes,
            }
        }
        Driver::Biaxial => {
            let report = run_biaxial(case, &mut log)?;
            RunSummary {
                outcome: RunOutcome::Success,
                notes: vec![format!(
                    "plateau {:.4e} Pa, closed form {:.4e} Pa, deviation {:.3}%",
                    report.plateau,
                    report.ultimate,
                    100.0 * (report.plateau - report.ultimate).abs() / report.ultimate
                )],
            }
        }
        Driver::Footing => {
            let report = run_footing(case, &mut log)?;
            let notes = match report.limit {
                Some(q) => vec![format!("limit load {q:.2} Pa")],
                None => vec![format!(
                    "no limit detected up to {} Pa (elastic or under-loaded)",
                    report.target
                )],
            };
            RunSummary {
                outcome: RunOutcome::Success,
                notes,
            }
        }
        Driver::Tunnel => {
            let report = run_excavation(case, &mut log)?;
            let mut notes: Vec<String> = report
                .crown
                .iter()
                .enumerate()
                .map(|(i, u)| format!("stage {}: crown {u:.6} m", i + 1))
                .collect();
            let outcome = if report.completed {
                RunOutcome::Success
            } else {
                notes.push("a stage failed to converge".into());
                RunOutcome::NonConvergence
            };
            RunSummary { outcome, notes }
        }
        Driver::Slope => {
            let report = run_slope_stability(case, &mut log)?;
            let notes = match report.fos {
                Some(f) => vec![
                    format!("factor of safety {f:.3}"),
                    format!(
                        "yielded band toe-to-crest connected: {}",
                        report
                            .band_connected
                            .map(|b| if b { "yes" } else { "no" })
                            .unwrap_or("n/a")
                    ),
                ],
                None => vec!["sweep inconclusive (no failure up to sweep_max)".into()],
            };
            RunSummary {
                outcome: RunOutcome::Success,
                notes,
            }
        }
    };
    let dir = PathBuf::from(&case.output.directory);
    std::fs::create_dir_all(&dir)?;
    log.write_file(&dir.join("run.log"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn analytic_cylinder_matches_closed_form_values() {
        let model = AnalyticalCylinder {
            r_a: 1.0,
            r_b: 2.0,
            p: 1000.0,
            e: 10000.0,
            nu: 0.25,
        };
        let (ux, uy) = cylinder_analytic_displacement(&model, 1.0, 0.0).unwrap();
        assert_relative_eq!(ux, 0.191667, max_relative = 1e-5);
        assert_eq!(uy, 0.0);
        assert_relative_eq!(model.u_rad(2.0).unwrap(), 0.133333, max_relative = 1e-5);
        let (ux, uy) = cylinder_analytic_displacement(&model, 1.5, std::f64::consts::FRAC_PI_2)
            .unwrap();
        assert_relative_eq!(ux, 0.0, epsilon = 1e-16);
        assert_relative_eq!(uy, model.u_rad(1.5).unwrap(), max_relative = 1e-12);
        assert!(model.u_rad(0.5).is_err());
        assert!(model.u_rad(2.5).is_err());
    }

    #[test]
    fn ultimate_biaxial_stress_spot_values() {
        let phi = 30f64.to_radians();
        assert_relative_eq!(
            ultimate_biaxial_stress(10e3, phi, 100e3),
            334.64e3,
            max_relative = 2e-5
        );
        assert_relative_eq!(
            ultimate_biaxial_stress(5e3, 0.0, 70e3),
            70e3 + 2.0 * 5e3,
            max_relative = 1e-12
        );
        assert_eq!(ultimate_biaxial_stress(0.0, phi, 0.0), 0.0);
    }

    #[test]
    fn prandtl_capacity_spot_values() {
        assert_relative_eq!(
            prandtl_capacity(1000.0, 5f64.to_radians()),
            6489.0,
            max_relative = 2e-4
        );
        assert_relative_eq!(
            prandtl_capacity(1000.0, 0.0),
            5141.6,
            max_relative = 1e-4
        );
        assert_eq!(prandtl_capacity(0.0, 0.4), 0.0);
    }

    #[test]
    fn reduce_strength_spot_values() {
        let phi = 20f64.to_radians();
        let (c1, p1) = reduce_strength(12.38e3, phi, 1.0);
        assert_eq!(c1, 12.38e3);
        assert_eq!(p1, phi);
        let (c2, p2) = reduce_strength(12.38e3, phi, 2.0);
        assert_relative_eq!(c2, 6.19e3, max_relative = 1e-12);
        assert_relative_eq!(p2.to_degrees(), 10.31, max_relative = 1e-3);
        let (c3, p3) = reduce_strength(12.38e3, phi, 1e12);
        assert!(c3 < 1e-7 && p3 < 1e-12);
    }

    #[test]
    fn least_squares_rate_recovers_quadratic_decay() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.03]
            .iter()
            .map(|&h| (h, 3.0 * h * h))
            .collect();
        assert_relative_eq!(least_squares_rate(&pts), 2.0, max_relative = 1e-12);
    }
}
