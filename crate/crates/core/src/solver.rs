//! Global assembly, boundary conditions, and the incremental Newton loop.
//!
//! The solver walks a schedule of steps; each step carries activity
//! changes (element birth-death), load targets, and prescribed-displacement
//! targets, applied over a number of equal increments. Every increment is a
//! full Newton solve on the true residual `r = P - f_int(d)`: trial cell
//! states are recomputed from the last converged states at every iteration
//! (no accumulation across failed iterations), the stiffness is rebuilt
//! from the per-cell continuum tangent, and convergence is declared when
//! `||r_free|| / max(||P_free||, ||reactions||, 1 N) <= tol_r`.
//!
//! Strain increments are measured against a per-cell reference strain
//! recorded at the last commit. This makes displacement zeroing after
//! geostatic initialization and element reactivation trivial: zeroing
//! resets all references, reactivation re-anchors the cell's reference at
//! the current displacement while its frozen stress is kept.
//!
//! Non-convergence is data, not an error: the increment result carries a
//! flag plus the last iterate, and the step runner responds by halving the
//! increment (up to 4 times) before reporting failure upward. Limit-load
//! and strength-reduction drivers rely on that failure signal.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{SVector, Vector3};

use crate::constitutive::{
    elastic_stress_increment, elastoplastic_tangent, return_map, ElasticParams, MaterialState,
    MohrCoulombParams,
};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryEdge, Mesh};
use crate::smoothing::{build_cells, CellOps, Kernel};

/// One analysis material: elastic constants, optional Mohr-Coulomb
/// strength, and unit weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    /// Name used by the case file.
    pub name: String,
    /// Elastic constants.
    pub elastic: ElasticParams,
    /// Strength parameters; `None` keeps the material linear elastic.
    pub mc: Option<MohrCoulombParams>,
    /// Unit weight, N/m³ (applied as body force `(0, -gamma)`).
    pub gamma: f64,
}

impl Material {
    /// Validates all parameter blocks.
    pub fn validate(&self) -> Result<()> {
        self.elastic.validate()?;
        if let Some(mc) = &self.mc {
            mc.validate()?;
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!(
                "unit weight must be non-negative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Solver settings shared by every increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    /// Relative residual tolerance.
    pub tol_r: f64,
    /// Newton iteration cap per increment.
    pub max_iter: usize,
    /// Integration kernel.
    pub kernel: Kernel,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            tol_r: 1e-6,
            max_iter: 50,
            kernel: Kernel::Csfem { n_sc: 4 },
        }
    }
}

/// Global equation index of a node component (0 = x, 1 = y).
pub fn dof(node: usize, comp: usize) -> usize {
    2 * node + comp
}

/// Partition of the global DOFs into free and constrained sets.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Prescribed value per constrained DOF.
    pub constrained: BTreeMap<usize, f64>,
    /// Global indices of the free DOFs (attached to an active element and
    /// not constrained), ascending.
    pub free: Vec<usize>,
    /// Inverse map: global DOF to position in `free`.
    pub free_index: Vec<Option<usize>>,
}

impl DofMap {
    /// Builds the partition for the current activity state. DOFs touched
    /// by no active element are dropped from the system entirely.
    pub fn build(mesh: &Mesh, constraints: &BTreeMap<usize, f64>) -> Result<DofMap> {
        let n_dofs = 2 * mesh.nodes.len();
        let mut attached = vec![false; n_dofs];
        let mut any_active = false;
        for elem in mesh.elements.iter().filter(|e| e.active) {
            any_active = true;
            for &n in &elem.node_ids {
                attached[dof(n, 0)] = true;
                attached[dof(n, 1)] = true;
            }
        }
        if !any_active {
            return Err(Error::Solver("no active elements in the mesh".into()));
        }
        let mut free = Vec::new();
        let mut free_index = vec![None; n_dofs];
        for g in 0..n_dofs {
            if attached[g] && !constraints.contains_key(&g) {
                free_index[g] = Some(free.len());
                free.push(g);
            }
        }
        Ok(DofMap {
            constrained: constraints
                .iter()
                .filter(|(g, _)| attached[**g])
                .map(|(&g, &v)| (g, v))
                .collect(),
            free,
            free_index,
        })
    }
}

/// Resolved external loads at one point of pseudo-time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadState {
    /// Scale on the material unit weights (1 = full gravity).
    pub gravity_scale: f64,
    /// Traction vectors applied on boundary edges, Pa.
    pub tractions: Vec<(BoundaryEdge, [f64; 2])>,
    /// Concentrated nodal forces, N.
    pub nodal: Vec<(usize, [f64; 2])>,
    /// Extra global force vector (excavation release ramp); empty when
    /// unused.
    pub extra: Vec<f64>,
}

/// Result of one increment.
#[derive(Debug, Clone)]
pub struct IncrementResult {
    /// Whether the residual criterion was met within the iteration cap.
    pub converged: bool,
    /// Number of Newton solves performed.
    pub iterations: usize,
    /// Relative residual per iteration check (first entry is the
    /// unsolved residual).
    pub residual_history: Vec<f64>,
    /// Displacement at exit (committed when converged).
    pub displacement: Vec<f64>,
    /// Per-cell states at exit (committed when converged); for a failed
    /// increment these show the last attempted mechanism.
    pub states: Vec<MaterialState>,
    /// Reactions `f_int - P` at constrained DOFs.
    pub reactions: Vec<(usize, f64)>,
}

/// One resolved schedule step: activity changes plus load/constraint
/// interpolation endpoints. `loads_from`/`loads_to` and the two constraint
/// maps must share their geometry (same edge lists, same DOF keys).
#[derive(Debug, Clone)]
pub struct ResolvedStep {
    /// Step name used in logs.
    pub name: String,
    /// Number of equal increments.
    pub increments: usize,
    /// Elements deactivated at step start.
    pub deactivate: Vec<usize>,
    /// Elements reactivated at step start.
    pub activate: Vec<usize>,
    /// Prescribed DOF values at the start of the step.
    pub constraints_from: BTreeMap<usize, f64>,
    /// Prescribed DOF values at the end of the step.
    pub constraints_to: BTreeMap<usize, f64>,
    /// External loads at the start of the step.
    pub loads_from: LoadState,
    /// External loads at the end of the step.
    pub loads_to: LoadState,
}

/// Outcome of a step run.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// True when every increment (after substepping) converged.
    pub completed: bool,
    /// Fraction of the step reached by converged increments.
    pub alpha_reached: f64,
    /// The failing increment's result when not completed.
    pub failure: Option<IncrementResult>,
}

/// Line-oriented run log, echoed to stdout and written to a file.
#[derive(Debug, Default)]
pub struct RunLog {
    /// Accumulated lines (CSV with a leading header, `#` for notes).
    pub lines: Vec<String>,
    /// Echo records to stdout as they arrive.
    pub echo: bool,
}

impl RunLog {
    /// Creates a log; `echo` prints every record to stdout.
    pub fn new(echo: bool) -> RunLog {
        RunLog {
            lines: vec!["step,increment,iteration,residual".to_string()],
            echo,
        }
    }

    /// Records one Newton iteration.
    pub fn record(&mut self, step: &str, increment: usize, iteration: usize, residual: f64) {
        let line = format!("{step},{increment},{iteration},{residual:.6e}");
        if self.echo {
            println!("{line}");
        }
        self.lines.push(line);
    }

    /// Records a free-form note.
    pub fn note(&mut self, message: &str) {
        let line = format!("# {message}");
        if self.echo {
            println!("{line}");
        }
        self.lines.push(line);
    }

    /// Writes the log to a file.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.lines.join("\n") + "\n")?;
        Ok(())
    }
}

/// The assembled analysis: mesh, materials, integration cells, and the
/// committed solution state.
#[derive(Debug, Clone)]
pub struct System {
    /// Analysis mesh; element activity is mutated by steps.
    pub mesh: Mesh,
    /// Material table indexed by `Quad4Element::material_id`.
    pub materials: Vec<Material>,
    /// Solver settings.
    pub settings: SolveSettings,
    /// Integration cells, all elements, active or not.
    pub cells: Vec<CellOps>,
    /// Cells of element e occupy `cells[offsets[e]..offsets[e + 1]]`.
    pub offsets: Vec<usize>,
    /// Committed per-cell states.
    pub states: Vec<MaterialState>,
    /// Committed per-cell reference strains; trial strain increments are
    /// `B d_trial - eps_ref`.
    pub eps_ref: Vec<Vector3<f64>>,
    /// Committed displacements.
    pub d: Vec<f64>,
    /// Sequential counter of converged increments, for log numbering.
    increment_counter: usize,
}

impl System {
    /// Builds a system with zero initial state.
    pub fn new(mesh: Mesh, materials: Vec<Material>, settings: SolveSettings) -> Result<System> {
        mesh.validate()?;
        if materials.is_empty() {
            return Err(Error::Config("no materials defined".into()));
        }
        for m in &materials {
            m.validate()?;
        }
        for elem in &mesh.elements {
            if elem.material_id >= materials.len() {
                return Err(Error::Config(format!(
                    "element {} references missing material {}",
                    elem.id, elem.material_id
                )));
            }
        }
        if let Kernel::Csfem { n_sc } = settings.kernel {
            if n_sc == 1 {
                return Err(Error::Config(
                    "n_sc = 1 is rank-deficient (hourglass modes) and not allowed in solves; \
                     use 2 or 4"
                        .into(),
                ));
            }
        }
        let (cells, offsets) = build_cells(&mesh, settings.kernel)?;
        let n_cells = cells.len();
        let n_dofs = 2 * mesh.nodes.len();
        Ok(System {
            mesh,
            materials,
            settings,
            cells,
            offsets,
            states: vec![MaterialState::zero(); n_cells],
            eps_ref: vec![Vector3::zeros(); n_cells],
            d: vec![0.0; n_dofs],
            increment_counter: 0,
        })
    }

    /// Material of an element.
    pub fn material_of(&self, element: usize) -> &Material {
        &self.materials[self.mesh.elements[element].material_id]
    }

    /// True when every plastic material uses associated flow, making the
    /// assembled tangent symmetric.
    pub fn symmetric_tangent(&self) -> bool {
        self.materials
            .iter()
            .all(|m| m.mc.map_or(true, |mc| mc.psi == mc.phi))
    }

    /// Element displacement vector gathered from a global vector.
    fn gather(&self, element: usize, d: &[f64]) -> SVector<f64, 8> {
        let mut out = SVector::<f64, 8>::zeros();
        for (k, &n) in self.mesh.elements[element].node_ids.iter().enumerate() {
            out[2 * k] = d[dof(n, 0)];
            out[2 * k + 1] = d[dof(n, 1)];
        }
        out
    }

    /// Indices of the cells of one element.
    fn cell_range(&self, element: usize) -> std::ops::Range<usize> {
        self.offsets[element]..self.offsets[element + 1]
    }

    /// External force vector for a load state: edge tractions (2-node
    /// lumping, exact for constant traction on straight edges), body force
    /// from material unit weights via the cells' consistent nodal weights,
    /// concentrated forces, and the extra vector.
    pub fn external_force(&self, loads: &LoadState) -> Result<Vec<f64>> {
        let n_dofs = 2 * self.mesh.nodes.len();
        let mut p = vec![0.0; n_dofs];
        for (edge, t) in &loads.tractions {
            if !self.mesh.elements[edge.element].active {
                return Err(Error::Config(format!(
                    "traction applied on an edge of inactive element {}",
                    edge.element
                )));
            }
            for &n in &edge.nodes {
                p[dof(n, 0)] += 0.5 * t[0] * edge.length;
                p[dof(n, 1)] += 0.5 * t[1] * edge.length;
            }
        }
        if loads.gravity_scale != 0.0 {
            for elem in self.mesh.elements.iter().filter(|e| e.active) {
                let gamma = self.materials[elem.material_id].gamma;
                if gamma == 0.0 {
                    continue;
                }
                for cell in &self.cells[self.cell_range(elem.id)] {
                    let f = -gamma * cell.weight * loads.gravity_scale;
                    for k in 0..4 {
                        p[dof(elem.node_ids[k], 1)] += cell.node_weights[k] * f;
                    }
                }
            }
        }
        for (n, f) in &loads.nodal {
            p[dof(*n, 0)] += f[0];
            p[dof(*n, 1)] += f[1];
        }
        if !loads.extra.is_empty() {
            if loads.extra.len() != n_dofs {
                return Err(Error::Config(format!(
                    "extra force vector has length {}, expected {n_dofs}",
                    loads.extra.len()
                )));
            }
            for (slot, &v) in p.iter_mut().zip(&loads.extra) {
                *slot += v;
            }
        }
        Ok(p)
    }

    /// Recomputes all active cell states from the committed states for a
    /// trial displacement.
    fn trial_update(&self, d_trial: &[f64]) -> Result<Vec<MaterialState>> {
        let mut trial = self.states.clone();
        for elem in self.mesh.elements.iter().filter(|e| e.active) {
            let material = &self.materials[elem.material_id];
            let d_e = self.gather(elem.id, d_trial);
            for ci in self.cell_range(elem.id) {
                let deps = self.cells[ci].b * d_e - self.eps_ref[ci];
                let trial_stress =
                    self.states[ci].stress + elastic_stress_increment(&material.elastic, &deps);
                trial[ci] = match &material.mc {
                    Some(mc) => return_map(&trial_stress, &self.states[ci], &material.elastic, mc)?.0,
                    None => {
                        let mut s = self.states[ci];
                        s.stress = trial_stress;
                        s.yielded = false;
                        s
                    }
                };
            }
        }
        Ok(trial)
    }

    /// Internal force of the active cells for given per-cell states.
    fn internal_force(&self, states: &[MaterialState]) -> Vec<f64> {
        let mut f = vec![0.0; 2 * self.mesh.nodes.len()];
        for elem in self.mesh.elements.iter().filter(|e| e.active) {
            for ci in self.cell_range(elem.id) {
                let cell = &self.cells[ci];
                let s = &states[ci].stress;
                let sigma = Vector3::new(s[0], s[1], s[3]);
                let contrib = cell.b.transpose() * sigma * cell.weight;
                for k in 0..4 {
                    f[dof(elem.node_ids[k], 0)] += contrib[2 * k];
                    f[dof(elem.node_ids[k], 1)] += contrib[2 * k + 1];
                }
            }
        }
        f
    }

    /// Assembles the tangent stiffness on the free DOFs.
    fn assemble(
        &self,
        states: &[MaterialState],
        map: &DofMap,
    ) -> Result<SparseColMat<usize, f64>> {
        let n = map.free.len();
        let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::new();
        for elem in self.mesh.elements.iter().filter(|e| e.active) {
            let material = &self.materials[elem.material_id];
            let mut k_e = nalgebra::SMatrix::<f64, 8, 8>::zeros();
            for ci in self.cell_range(elem.id) {
                let cell = &self.cells[ci];
                let tangent = match &material.mc {
                    Some(mc) => elastoplastic_tangent(
                        &states[ci].stress,
                        mc,
                        &material.elastic,
                        states[ci].yielded,
                    )?,
                    None => elastoplastic_tangent(
                        &states[ci].stress,
                        &MohrCoulombParams {
                            c: 0.0,
                            phi: 0.0,
                            psi: 0.0,
                            h: 0.0,
                        },
                        &material.elastic,
                        false,
                    )?,
                };
                k_e += cell.b.transpose() * tangent * cell.b * cell.weight;
            }
            let mut global = [None; 8];
            for k in 0..4 {
                global[2 * k] = map.free_index[dof(elem.node_ids[k], 0)];
                global[2 * k + 1] = map.free_index[dof(elem.node_ids[k], 1)];
            }
            for r in 0..8 {
                let Some(gr) = global[r] else { continue };
                for c in 0..8 {
                    let Some(gc) = global[c] else { continue };
                    triplets.push(Triplet::new(gr, gc, k_e[(r, c)]));
                }
            }
        }
        SparseColMat::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Solver(format!("stiffness assembly failed: {e:?}")))
    }

    /// Solves `K x = r` with the path matching the tangent symmetry;
    /// Cholesky failures fall back to LU before reporting.
    fn linear_solve(
        &self,
        k: &SparseColMat<usize, f64>,
        r: &[f64],
        map: &DofMap,
    ) -> Result<Vec<f64>> {
        let n = map.free.len();
        let rhs = Mat::from_fn(n, 1, |i, _| r[i]);
        let solution = if self.symmetric_tangent() {
            match k.sp_cholesky(faer::Side::Lower) {
                Ok(f) => f.solve(&rhs),
                Err(_) => k
                    .sp_lu()
                    .map_err(|_| self.singular_error(k, map))?
                    .solve(&rhs),
            }
        } else {
            k.sp_lu().map_err(|_| self.singular_error(k, map))?.solve(&rhs)
        };
        let x: Vec<f64> = (0..n).map(|i| solution[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(self.singular_error(k, map));
        }
        Ok(x)
    }

    /// Builds a diagnostic for a singular stiffness, naming zero-energy
    /// DOFs by node and component.
    fn singular_error(&self, k: &SparseColMat<usize, f64>, map: &DofMap) -> Error {
        let dense = k.to_dense();
        let n = map.free.len();
        let mut max_diag = 0.0f64;
        for i in 0..n {
            max_diag = max_diag.max(dense[(i, i)].abs());
        }
        let mut offenders = Vec::new();
        for i in 0..n {
            if dense[(i, i)].abs() <= 1e-14 * max_diag {
                let g = map.free[i];
                offenders.push(format!(
                    "node {} {}",
                    g / 2,
                    if g % 2 == 0 { "x" } else { "y" }
                ));
                if offenders.len() >= 8 {
                    break;
                }
            }
        }
        if offenders.is_empty() {
            Error::Solver("stiffness factorization failed (matrix singular)".into())
        } else {
            Error::Solver(format!(
                "stiffness is singular; zero-energy DOFs: {}",
                offenders.join(", ")
            ))
        }
    }

    /// Runs one Newton increment toward the given loads and constraints.
    ///
    /// On convergence the displacement, states, and strain references are
    /// committed. On non-convergence nothing is committed and the result's
    /// `converged` flag is false.
    pub fn newton_increment(
        &mut self,
        loads: &LoadState,
        constraints: &BTreeMap<usize, f64>,
        log: &mut RunLog,
        step_name: &str,
    ) -> Result<IncrementResult> {
        let map = DofMap::build(&self.mesh, constraints)?;
        let p = self.external_force(loads)?;
        let mut d_trial = self.d.clone();
        for (&g, &v) in &map.constrained {
            d_trial[g] = v;
        }

        let p_free_norm: f64 = map.free.iter().map(|&g| p[g] * p[g]).sum::<f64>().sqrt();
        let increment_no = self.increment_counter + 1;
        let mut history = Vec::new();

        for iteration in 0..=self.settings.max_iter {
            let trial_states = self.trial_update(&d_trial)?;
            let f_int = self.internal_force(&trial_states);
            let reactions: Vec<(usize, f64)> = map
                .constrained
                .keys()
                .map(|&g| (g, f_int[g] - p[g]))
                .collect();
            let reaction_norm: f64 = reactions.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            let r_norm: f64 = map
                .free
                .iter()
                .map(|&g| (p[g] - f_int[g]).powi(2))
                .sum::<f64>()
                .sqrt();
            let denom = p_free_norm.max(reaction_norm).max(1.0);
            let rel = r_norm / denom;
            history.push(rel);
            log.record(step_name, increment_no, iteration, rel);

            if rel <= self.settings.tol_r {
                self.d = d_trial.clone();
                self.states = trial_states.clone();
                for elem in self.mesh.elements.iter().filter(|e| e.active) {
                    let d_e = self.gather(elem.id, &d_trial);
                    for ci in self.offsets[elem.id]..self.offsets[elem.id + 1] {
                        self.eps_ref[ci] = self.cells[ci].b * d_e;
                    }
                }
                self.increment_counter = increment_no;
                return Ok(IncrementResult {
                    converged: true,
                    iterations: iteration,
                    residual_history: history,
                    displacement: d_trial,
                    states: trial_states,
                    reactions,
                });
            }
            if iteration == self.settings.max_iter {
                return Ok(IncrementResult {
                    converged: false,
                    iterations: iteration,
                    residual_history: history,
                    displacement: d_trial,
                    states: trial_states,
                    reactions,
                });
            }

            let k = self.assemble(&trial_states, &map)?;
            let r_free: Vec<f64> = map.free.iter().map(|&g| p[g] - f_int[g]).collect();
            let delta = self.linear_solve(&k, &r_free, &map)?;
            for (i, &g) in map.free.iter().enumerate() {
                d_trial[g] += delta[i];
            }
        }
        unreachable!("newton loop exits by return");
    }

    /// Applies activity changes and returns the release force vector of
    /// the deactivated elements: their internal-force contribution minus
    /// the external gravity they carried. Ramping this vector out over a
    /// step re-equilibrates the excavation unloading gradually.
    pub fn set_element_activity(
        &mut self,
        deactivate: &[usize],
        activate: &[usize],
        gravity_scale: f64,
    ) -> Result<Vec<f64>> {
        let n_dofs = 2 * self.mesh.nodes.len();
        let mut release = vec![0.0; n_dofs];
        let mut any = false;
        for &e in deactivate {
            if e >= self.mesh.elements.len() {
                return Err(Error::Config(format!("cannot deactivate missing element {e}")));
            }
            if !self.mesh.elements[e].active {
                continue;
            }
            any = true;
            let gamma = self.material_of(e).gamma;
            let node_ids = self.mesh.elements[e].node_ids;
            for ci in self.cell_range(e) {
                let cell = &self.cells[ci];
                let s = &self.states[ci].stress;
                let sigma = Vector3::new(s[0], s[1], s[3]);
                let contrib = cell.b.transpose() * sigma * cell.weight;
                let body = -gamma * cell.weight * gravity_scale;
                for k in 0..4 {
                    release[dof(node_ids[k], 0)] += contrib[2 * k];
                    release[dof(node_ids[k], 1)] += contrib[2 * k + 1] - cell.node_weights[k] * body;
                }
            }
            self.mesh.elements[e].active = false;
        }
        for &e in activate {
            if e >= self.mesh.elements.len() {
                return Err(Error::Config(format!("cannot activate missing element {e}")));
            }
            if self.mesh.elements[e].active {
                continue;
            }
            self.mesh.elements[e].active = true;
            // Re-anchor the strain reference so the frozen stress pairs
            // with the current configuration.
            let d_e = self.gather(e, &self.d);
            for ci in self.cell_range(e) {
                self.eps_ref[ci] = self.cells[ci].b * d_e;
            }
        }
        if !any {
            release.clear();
        }
        Ok(release)
    }

    /// Runs one schedule step: activity changes, then `increments` equal
    /// increments with automatic halving (4 levels deep) on
    /// non-convergence. `on_increment` fires after every converged
    /// increment with the fraction of the step reached.
    pub fn run_step(
        &mut self,
        step: &ResolvedStep,
        log: &mut RunLog,
        mut on_increment: impl FnMut(&System, &IncrementResult, f64),
    ) -> Result<StepOutcome> {
        if step.increments == 0 {
            return Err(Error::Config(format!(
                "step `{}` must have at least 1 increment",
                step.name
            )));
        }
        let release =
            self.set_element_activity(&step.deactivate, &step.activate, step.loads_from.gravity_scale)?;

        let lerp_loads = |alpha: f64| -> LoadState {
            let from = &step.loads_from;
            let to = &step.loads_to;
            let mut tractions = Vec::with_capacity(to.tractions.len());
            for (i, (edge, t_to)) in to.tractions.iter().enumerate() {
                let t_from = from
                    .tractions
                    .get(i)
                    .map(|(_, t)| *t)
                    .unwrap_or([0.0, 0.0]);
                tractions.push((
                    *edge,
                    [
                        t_from[0] + alpha * (t_to[0] - t_from[0]),
                        t_from[1] + alpha * (t_to[1] - t_from[1]),
                    ],
                ));
            }
            let mut nodal = Vec::with_capacity(to.nodal.len());
            for (i, (n, f_to)) in to.nodal.iter().enumerate() {
                let f_from = from.nodal.get(i).map(|(_, f)| *f).unwrap_or([0.0, 0.0]);
                nodal.push((
                    *n,
                    [
                        f_from[0] + alpha * (f_to[0] - f_from[0]),
                        f_from[1] + alpha * (f_to[1] - f_from[1]),
                    ],
                ));
            }
            let mut extra = vec![];
            if !release.is_empty() {
                extra = release.iter().map(|v| -(1.0 - alpha) * v).collect();
            }
            LoadState {
                gravity_scale: from.gravity_scale
                    + alpha * (to.gravity_scale - from.gravity_scale),
                tractions,
                nodal,
                extra,
            }
        };
        let lerp_constraints = |alpha: f64| -> BTreeMap<usize, f64> {
            let mut out = BTreeMap::new();
            for (&g, &v_to) in &step.constraints_to {
                let v_from = step.constraints_from.get(&g).copied().unwrap_or(0.0);
                out.insert(g, v_from + alpha * (v_to - v_from));
            }
            out
        };

        let d_alpha = 1.0 / step.increments as f64;
        let mut alpha = 0.0;
        // Work list of (target_alpha, depth); halving pushes two halves.
        let mut frontier: Vec<(f64, usize)> =
            (1..=step.increments).rev().map(|i| (i as f64 * d_alpha, 0)).collect();
        while let Some((target, depth)) = frontier.pop() {
            let loads = lerp_loads(target);
            let constraints = lerp_constraints(target);
            let result = self.newton_increment(&loads, &constraints, log, &step.name)?;
            if result.converged {
                alpha = target;
                on_increment(self, &result, alpha);
                continue;
            }
            if depth >= 4 {
                log.note(&format!(
                    "step `{}` failed to converge at alpha = {target:.6} after 4 halvings",
                    step.name
                ));
                return Ok(StepOutcome {
                    completed: false,
                    alpha_reached: alpha,
                    failure: Some(result),
                });
            }
            let mid = 0.5 * (alpha + target);
            log.note(&format!(
                "step `{}`: halving increment toward alpha = {target:.6} (retry via {mid:.6})",
                step.name
            ));
            frontier.push((target, depth + 1));
            frontier.push((mid, depth + 1));
        }
        Ok(StepOutcome {
            completed: true,
            alpha_reached: 1.0,
            failure: None,
        })
    }

    /// Direct K0 initialization of the stress field followed by one
    /// equilibrium increment whose displacements are zeroed.
    ///
    /// `k0` defaults per material to `nu / (1 - nu)`. Depth is measured
    /// from `surface_y` down; cells above the surface get zero stress.
    /// Returns the peak residual displacement magnitude of the equilibrium
    /// increment (near zero for a self-equilibrated K0 field under
    /// laterally constrained conditions).
    pub fn geostatic_init(
        &mut self,
        k0: Option<f64>,
        surface_y: f64,
        gravity: &LoadState,
        constraints: &BTreeMap<usize, f64>,
        log: &mut RunLog,
    ) -> Result<f64> {
        for elem in &self.mesh.elements {
            let material = &self.materials[elem.material_id];
            let k0_eff = k0.unwrap_or(material.elastic.nu / (1.0 - material.elastic.nu));
            if !(k0_eff > 0.0 && k0_eff < 1.5) {
                log.note(&format!(
                    "warning: K0 = {k0_eff:.4} outside (0, 1.5) for material `{}`",
                    material.name
                ));
            }
            for ci in self.cell_range(elem.id) {
                let depth = (surface_y - self.cells[ci].point[1]).max(0.0);
                let syy = -material.gamma * depth * gravity.gravity_scale;
                let lateral = k0_eff * syy;
                self.states[ci] = MaterialState::with_stress(nalgebra::Vector4::new(
                    lateral, syy, lateral, 0.0,
                ));
            }
        }
        let result = self.newton_increment(gravity, constraints, log, "geostatic")?;
        if !result.converged {
            return Err(Error::Solver(
                "geostatic equilibrium increment did not converge".into(),
            ));
        }
        let peak = self
            .d
            .chunks(2)
            .map(|uv| uv[0].hypot(uv[1]))
            .fold(0.0f64, f64::max);
        self.d.iter_mut().for_each(|v| *v = 0.0);
        self.eps_ref.iter_mut().for_each(|e| *e = Vector3::zeros());
        log.note(&format!(
            "geostatic initialization complete; zeroed displacements (peak was {peak:.3e} m)"
        ));
        Ok(peak)
    }

    /// Writes summary state lines for debugging; used by the CLI `run`
    /// report.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let active = self.mesh.elements.iter().filter(|e| e.active).count();
        let yielded = self
            .mesh
            .elements
            .iter()
            .filter(|e| e.active)
            .flat_map(|e| self.cell_range(e.id))
            .filter(|&ci| self.states[ci].yielded)
            .count();
        let peak = self
            .d
            .chunks(2)
            .map(|uv| uv[0].hypot(uv[1]))
            .fold(0.0f64, f64::max);
        let _ = writeln!(out, "active elements: {active}/{}", self.mesh.elements.len());
        let _ = writeln!(out, "yielded cells: {yielded}/{}", self.cells.len());
        let _ = writeln!(out, "peak displacement magnitude: {peak:.6e} m");
        out
    }
}
