//! Built-in self checks behind `geosmooth verify`.
//!
//! Each check is independent and reports pass/fail with a short detail
//! line. The battery covers the kernel identities (partition, closure,
//! consistency with the compatible operator), the linear patch test, the
//! return-mapping contract, agreement of the assembled solver with a dense
//! direct solve, the analytical references used by the benchmarks, and
//! run-to-run determinism.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constitutive::{
    elastic_tangent, elastoplastic_tangent, return_map, yield_value, ElasticParams,
    MaterialState, MohrCoulombParams,
};
use crate::drivers::{
    cylinder_analytic_displacement, prandtl_capacity, ultimate_biaxial_stress, AnalyticalCylinder,
};
use crate::error::Result;
use crate::generators;
use crate::mesh::{build_subcells, Mesh, Node, Quad4Element};
use crate::smoothing::{smoothed_b, Kernel};
use crate::solver::{dof, LoadState, Material, RunLog, SolveSettings, System};

/// One self-check outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn random_quad(rng: &mut ChaCha8Rng) -> [[f64; 2]; 4] {
    let base = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let mut coords = [[0.0; 2]; 4];
    for (c, b) in coords.iter_mut().zip(base) {
        c[0] = b[0] + rng.gen_range(-0.25..0.25);
        c[1] = b[1] + rng.gen_range(-0.25..0.25);
    }
    coords
}

/// Subcell areas partition the element; every cell boundary closes; the
/// weighted smoothed operators sum to the whole-element average.
fn check_partition_and_closure() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_area = 0.0f64;
    let mut worst_closure = 0.0f64;
    let mut worst_consistency = 0.0f64;
    for _ in 0..60 {
        let coords = random_quad(&mut rng);
        let element = Quad4Element {
            id: 0,
            node_ids: [0, 1, 2, 3],
            active: true,
            material_id: 0,
        };
        let whole = build_subcells(&element, &coords, 1)?;
        let b_whole = smoothed_b(&whole[0], 0)?;
        for n_sc in [1u8, 2, 4] {
            let cells = build_subcells(&element, &coords, n_sc)?;
            let area_sum: f64 = cells.iter().map(|c| c.area).sum();
            worst_area = worst_area.max((area_sum - whole[0].area).abs() / whole[0].area);
            let mut b_sum = SMatrix::<f64, 3, 8>::zeros();
            for (i, cell) in cells.iter().enumerate() {
                let mut closure = [0.0f64; 2];
                for edge in &cell.edges {
                    closure[0] += edge.length * edge.normal[0];
                    closure[1] += edge.length * edge.normal[1];
                }
                worst_closure = worst_closure.max(closure[0].hypot(closure[1]));
                let op = smoothed_b(cell, i)?;
                b_sum += op.entries * cell.area;
            }
            worst_consistency = worst_consistency.max(
                (b_sum / whole[0].area - b_whole.entries).norm() / b_whole.entries.norm(),
            );
        }
    }
    let passed = worst_area < 1e-12 && worst_closure < 1e-12 && worst_consistency < 1e-12;
    Ok(CheckResult::new(
        "subcell partition and closure",
        passed,
        format!(
            "60 random quads, n_sc 1/2/4: area defect {worst_area:.2e}, closure \
             {worst_closure:.2e}, consistency {worst_consistency:.2e}"
        ),
    ))
}

fn distorted_patch_mesh(rng: &mut ChaCha8Rng) -> Mesh {
    let mut mesh = generators::rectangle(0.0, 0.0, 1.0, 1.0, 4, 4).unwrap();
    for node in &mut mesh.nodes {
        let interior = node.x > 1e-12 && node.x < 1.0 - 1e-12 && node.y > 1e-12 && node.y < 1.0 - 1e-12;
        if interior {
            node.x += rng.gen_range(-0.08..0.08);
            node.y += rng.gen_range(-0.08..0.08);
        }
    }
    mesh
}

/// Prescribing an affine displacement on the boundary of a distorted mesh
/// reproduces it at interior nodes with constant stress everywhere.
fn check_patch_test() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let field = |x: f64, y: f64| -> (f64, f64) {
        (1e-3 * (0.4 + 1.3 * x + 0.7 * y), 1e-3 * (-0.2 + 0.5 * x - 0.9 * y))
    };
    let mut worst_u = 0.0f64;
    let mut worst_s = 0.0f64;
    for kernel in [Kernel::Csfem { n_sc: 2 }, Kernel::Csfem { n_sc: 4 }, Kernel::Fem] {
        let mesh = distorted_patch_mesh(&mut rng);
        let material = Material {
            name: "patch".into(),
            elastic: ElasticParams { e: 3e7, nu: 0.3 },
            mc: None,
            gamma: 0.0,
        };
        let settings = SolveSettings {
            kernel,
            ..Default::default()
        };
        let mut system = System::new(mesh, vec![material], settings)?;
        let mut constraints = BTreeMap::new();
        for node in &system.mesh.nodes {
            let boundary = node.x < 1e-12 || node.x > 1.0 - 1e-12 || node.y < 1e-12 || node.y > 1.0 - 1e-12;
            if boundary {
                let (ux, uy) = field(node.x, node.y);
                constraints.insert(dof(node.id, 0), ux);
                constraints.insert(dof(node.id, 1), uy);
            }
        }
        let mut log = RunLog::new(false);
        let result =
            system.newton_increment(&LoadState::default(), &constraints, &mut log, "patch")?;
        if !result.converged {
            return Ok(CheckResult::new(
                "linear patch test",
                false,
                format!("{kernel:?}: solve did not converge"),
            ));
        }
        let scale = 1e-3;
        for node in &system.mesh.nodes {
            let (ux, uy) = field(node.x, node.y);
            worst_u = worst_u
                .max((system.d[dof(node.id, 0)] - ux).abs() / scale)
                .max((system.d[dof(node.id, 1)] - uy).abs() / scale);
        }
        let d = elastic_tangent(&ElasticParams { e: 3e7, nu: 0.3 })?;
        let eps = nalgebra::Vector3::new(1.3e-3, -0.9e-3, (0.7 + 0.5) * 1e-3);
        let expected = d.in_plane * eps;
        for state in &system.states {
            let s = &state.stress;
            let err = ((s[0] - expected[0]).powi(2)
                + (s[1] - expected[1]).powi(2)
                + (s[3] - expected[2]).powi(2))
            .sqrt()
                / expected.norm();
            worst_s = worst_s.max(err);
        }
    }
    Ok(CheckResult::new(
        "linear patch test",
        worst_u < 1e-10 && worst_s < 1e-10,
        format!("displacement defect {worst_u:.2e}, stress defect {worst_s:.2e}"),
    ))
}

/// Element stiffness from the cell table has exactly three zero-energy
/// modes (rigid translations and rotation) for every solve kernel.
fn check_rigid_modes() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let d = elastic_tangent(&ElasticParams { e: 3e7, nu: 0.3 })?.in_plane;
    let mut detail = String::new();
    let mut passed = true;
    for kernel in [Kernel::Csfem { n_sc: 2 }, Kernel::Csfem { n_sc: 4 }, Kernel::Fem] {
        let mut worst_zero = 0.0f64;
        let mut best_nonzero = f64::INFINITY;
        for _ in 0..20 {
            let coords = random_quad(&mut rng);
            let mesh = Mesh {
                nodes: coords
                    .iter()
                    .enumerate()
                    .map(|(id, c)| Node {
                        id,
                        x: c[0],
                        y: c[1],
                    })
                    .collect(),
                elements: vec![Quad4Element {
                    id: 0,
                    node_ids: [0, 1, 2, 3],
                    active: true,
                    material_id: 0,
                }],
                ..Default::default()
            };
            let (cells, _) = crate::smoothing::build_cells(&mesh, kernel)?;
            let mut k = SMatrix::<f64, 8, 8>::zeros();
            for cell in &cells {
                k += cell.b.transpose() * d * cell.b * cell.weight;
            }
            let mut eigen: Vec<f64> = k.symmetric_eigenvalues().iter().copied().collect();
            eigen.sort_by(|a, b| a.partial_cmp(b).unwrap());
            worst_zero = worst_zero.max(eigen[2].abs() / eigen[7]);
            best_nonzero = best_nonzero.min(eigen[3] / eigen[7]);
        }
        let ok = worst_zero < 1e-12 && best_nonzero > 1e-8;
        passed &= ok;
        detail.push_str(&format!(
            "{kernel:?}: modes 0-2 below {worst_zero:.1e}, mode 3 at {best_nonzero:.1e}; "
        ));
    }
    Ok(CheckResult::new("element rigid modes", passed, detail))
}

/// The sparse assembled solve agrees with a dense direct reference on an
/// elastic problem.
fn check_dense_reference() -> Result<CheckResult> {
    let mesh = generators::quarter_annulus(1.0, 2.0, 4, 6)?;
    let material = Material {
        name: "ring".into(),
        elastic: ElasticParams { e: 9600.0, nu: 0.2 },
        mc: None,
        gamma: 0.0,
    };
    let settings = SolveSettings::default();
    let mut system = System::new(mesh, vec![material], settings)?;
    let mut constraints = BTreeMap::new();
    for &n in system.mesh.node_set("x_axis")? {
        constraints.insert(dof(n, 1), 0.0);
    }
    for &n in system.mesh.node_set("y_axis")? {
        constraints.insert(dof(n, 0), 0.0);
    }
    let mut loads = LoadState::default();
    for edge in crate::drivers::edges_of_set(&system.mesh, "inner")? {
        loads
            .tractions
            .push((edge, [-1000.0 * edge.normal[0], -1000.0 * edge.normal[1]]));
    }
    let mut log = RunLog::new(false);
    let result = system.newton_increment(&loads, &constraints, &mut log, "dense")?;
    if !result.converged {
        return Ok(CheckResult::new(
            "dense direct reference",
            false,
            "elastic solve did not converge".into(),
        ));
    }

    // Dense reference: assemble K and P from scratch and solve the free
    // block with a dense LU.
    let n_dofs = 2 * system.mesh.nodes.len();
    let d_mat = elastic_tangent(&ElasticParams { e: 9600.0, nu: 0.2 })?.in_plane;
    let mut k = DMatrix::<f64>::zeros(n_dofs, n_dofs);
    for elem in &system.mesh.elements {
        let ids = elem.node_ids;
        let mut ke = SMatrix::<f64, 8, 8>::zeros();
        for ci in system.offsets[elem.id]..system.offsets[elem.id + 1] {
            let cell = &system.cells[ci];
            ke += cell.b.transpose() * d_mat * cell.b * cell.weight;
        }
        for a in 0..8 {
            let ga = dof(ids[a / 2], a % 2);
            for b in 0..8 {
                k[(ga, dof(ids[b / 2], b % 2))] += ke[(a, b)];
            }
        }
    }
    let mut p = DVector::<f64>::zeros(n_dofs);
    for (edge, t) in &loads.tractions {
        let half = 0.5 * edge.length;
        for &n in &edge.nodes {
            p[dof(n, 0)] += half * t[0];
            p[dof(n, 1)] += half * t[1];
        }
    }
    let free: Vec<usize> = (0..n_dofs).filter(|g| !constraints.contains_key(g)).collect();
    let kff = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
    let pf = DVector::from_fn(free.len(), |i, _| p[free[i]]);
    let sol = kff
        .lu()
        .solve(&pf)
        .ok_or_else(|| crate::error::Error::Solver("dense reference solve failed".into()))?;
    let mut worst = 0.0f64;
    let scale = system.d.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    for (i, &g) in free.iter().enumerate() {
        worst = worst.max((system.d[g] - sol[i]).abs() / scale);
    }
    Ok(CheckResult::new(
        "dense direct reference",
        worst < 1e-12,
        format!("max displacement deviation {worst:.2e} (relative)"),
    ))
}

/// Randomized return-mapping battery: the updated stress sits on the
/// yield surface, the plastic multiplier is positive, and associated flow
/// gives a symmetric elastoplastic tangent.
pub fn check_return_mapping(trials: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut yielded_count = 0usize;
    let mut worst_f = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut min_dlambda = f64::INFINITY;
    for _ in 0..trials {
        let elastic = ElasticParams {
            e: rng.gen_range(1e6..1e8),
            nu: rng.gen_range(0.05..0.45),
        };
        let associated = rng.gen_bool(0.5);
        let phi = rng.gen_range(0.02..0.75);
        let mc = MohrCoulombParams {
            c: rng.gen_range(1e3..2e5),
            phi,
            psi: if associated { phi } else { rng.gen_range(0.0..phi) },
            h: if rng.gen_bool(0.3) { rng.gen_range(0.0..1e6) } else { 0.0 },
        };
        let s = 4e5;
        let trial = Vector4::new(
            rng.gen_range(-s..0.5 * s),
            rng.gen_range(-s..0.5 * s),
            rng.gen_range(-s..0.5 * s),
            rng.gen_range(-0.5 * s..0.5 * s),
        );
        if yield_value(&trial, &mc, 0.0) <= 0.0 {
            continue;
        }
        let (state, dlambda) = return_map(&trial, &MaterialState::zero(), &elastic, &mc)?;
        yielded_count += 1;
        min_dlambda = min_dlambda.min(dlambda);
        let scale = trial.amax().max(1.0);
        worst_f = worst_f.max(yield_value(&state.stress, &mc, state.kappa) / scale);
        if associated {
            let dep: Matrix3<f64> = elastoplastic_tangent(&state.stress, &mc, &elastic, true)?;
            let asym = (dep - dep.transpose()).norm() / dep.norm();
            worst_sym = worst_sym.max(asym);
        }
    }
    let passed = yielded_count >= trials / 3
        && worst_f < 1e-8
        && min_dlambda > 0.0
        && worst_sym < 1e-10;
    Ok(CheckResult::new(
        "return mapping battery",
        passed,
        format!(
            "{yielded_count}/{trials} yielding trials: |F| residual {worst_f:.2e}, min \
             d-lambda {min_dlambda:.2e}, associated asymmetry {worst_sym:.2e}"
        ),
    ))
}

/// Analytical reference values used by the benchmark drivers.
fn check_analytical_references() -> Result<CheckResult> {
    let model = AnalyticalCylinder {
        r_a: 1.0,
        r_b: 2.0,
        p: 1000.0,
        e: 10000.0,
        nu: 0.25,
    };
    let (u_inner, _) = cylinder_analytic_displacement(&model, 1.0, 0.0)?;
    let u_outer = model.u_rad(2.0)?;
    let q_cohesive = prandtl_capacity(1000.0, 0.0);
    let q_frictional = prandtl_capacity(1000.0, 5f64.to_radians());
    let s_ult = ultimate_biaxial_stress(10e3, 30f64.to_radians(), 100e3);
    let checks = [
        (u_inner, 0.191667, 1e-5),
        (u_outer, 0.133333, 1e-5),
        (q_cohesive, 5141.6, 1e-4),
        (q_frictional, 6489.0, 2e-4),
        (s_ult, 334.64e3, 2e-5),
    ];
    let worst = checks
        .iter()
        .map(|(got, want, _)| (got - want).abs() / want)
        .fold(0.0f64, f64::max);
    let passed = checks.iter().all(|(got, want, tol)| (got - want).abs() / want < *tol);
    Ok(CheckResult::new(
        "analytical references",
        passed,
        format!(
            "cylinder {u_inner:.6}/{u_outer:.6} m, capacity {q_cohesive:.1}/{q_frictional:.1} \
             Pa, ultimate {s_ult:.1} Pa (worst deviation {worst:.1e})"
        ),
    ))
}

/// Two identical elastic-plastic runs produce bitwise identical
/// displacements.
fn check_determinism() -> Result<CheckResult> {
    let run = || -> Result<Vec<f64>> {
        let mesh = generators::rectangle(0.0, 0.0, 1.0, 2.0, 2, 4)?;
        let material = Material {
            name: "soil".into(),
            elastic: ElasticParams { e: 1e7, nu: 0.3 },
            mc: Some(MohrCoulombParams {
                c: 1e4,
                phi: 30f64.to_radians(),
                psi: 30f64.to_radians(),
                h: 0.0,
            }),
            gamma: 0.0,
        };
        let mut system = System::new(mesh, vec![material], SolveSettings::default())?;
        let mut constraints = BTreeMap::new();
        for &n in system.mesh.node_set("left")? {
            constraints.insert(dof(n, 0), 0.0);
        }
        for &n in system.mesh.node_set("bottom")? {
            constraints.insert(dof(n, 1), 0.0);
        }
        let top: Vec<usize> = system.mesh.node_set("top")?.to_vec();
        let mut log = RunLog::new(false);
        for k in 1..=6 {
            let mut c = constraints.clone();
            for &n in &top {
                c.insert(dof(n, 1), -0.02 * k as f64 / 6.0);
            }
            let result = system.newton_increment(&LoadState::default(), &c, &mut log, "determinism")?;
            if !result.converged {
                return Err(crate::error::Error::Solver(
                    "determinism probe did not converge".into(),
                ));
            }
        }
        Ok(system.d)
    };
    let a = run()?;
    let b = run()?;
    let identical = a.len() == b.len()
        && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok(CheckResult::new(
        "bitwise determinism",
        identical,
        if identical {
            format!("{} DOFs identical across two runs", a.len())
        } else {
            "repeated run differed".into()
        },
    ))
}

/// Runs the whole battery.
pub fn run_all() -> Result<Vec<CheckResult>> {
    crate::configure_deterministic();
    Ok(vec![
        check_partition_and_closure()?,
        check_patch_test()?,
        check_rigid_modes()?,
        check_dense_reference()?,
        check_return_mapping(1000)?,
        check_analytical_references()?,
        check_determinism()?,
    ])
}
