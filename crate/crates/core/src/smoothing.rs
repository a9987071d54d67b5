//! Smoothed strain-displacement operators and stiffness contributions.
//!
//! The smoothed operator of a cell is a pure boundary integral: for node k,
//!
//! ```text
//!            1   --                [ n_x N_k        0     ]
//! B~_k  =  ----  >   length_edge * [    0        n_y N_k  ]
//!           A_C  --                [ n_y N_k     n_x N_k  ]
//!               edges
//! ```
//!
//! with the shape value N_k taken at the edge midpoint. One midpoint sample
//! per edge integrates the boundary term exactly because N_k is linear
//! along each straight edge. The cell stiffness is then the single product
//! `B~' D B~ A_C`, and the internal force is `B~' sigma A_C`; no quadrature
//! loop exists anywhere in the smoothed path.
//!
//! The solver is written against [`CellOps`], one entry per integration
//! cell. For the smoothed kernel a cell is a smoothing subcell; for the
//! conventional FEM comparison kernel it is a 2x2 Gauss point of the
//! compatible formulation. Everything downstream (states, tangents,
//! assembly, output averaging) is identical for both.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{build_subcells, Mesh, SmoothingCell};
use crate::quad4::{compatible_b, gauss_1d, map_point, shape};

/// Smoothed strain-displacement operator of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedBOperator {
    /// Index of the cell within its element.
    pub subcell_id: usize,
    /// 3x8 map from nodal displacements `(u_1, v_1, ..., u_4, v_4)` to the
    /// smoothed strain `(eps_xx, eps_yy, gamma_xy)`.
    pub entries: SMatrix<f64, 3, 8>,
}

/// Stiffness contribution of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcellStiffness {
    /// Index of the cell within its element.
    pub subcell_id: usize,
    /// 8x8 contribution `B~' D B~ A_C`.
    pub entries: SMatrix<f64, 8, 8>,
    /// Cell area, m².
    pub area: f64,
}

/// Builds the smoothed operator of one cell from its boundary data.
pub fn smoothed_b(subcell: &SmoothingCell, subcell_id: usize) -> Result<SmoothedBOperator> {
    if !(subcell.area.is_finite() && subcell.area > 0.0) {
        return Err(Error::Geometry(format!(
            "smoothing cell of element {} has non-positive area {:.6e}",
            subcell.parent_element, subcell.area
        )));
    }
    let mut entries = SMatrix::<f64, 3, 8>::zeros();
    for edge in &subcell.edges {
        let (nx, ny) = (edge.normal[0], edge.normal[1]);
        for k in 0..4 {
            let w = edge.shape_values[k] * edge.length / subcell.area;
            entries[(0, 2 * k)] += nx * w;
            entries[(1, 2 * k + 1)] += ny * w;
            entries[(2, 2 * k)] += ny * w;
            entries[(2, 2 * k + 1)] += nx * w;
        }
    }
    Ok(SmoothedBOperator {
        subcell_id,
        entries,
    })
}

/// Smoothed strain of a cell under nodal displacements `d`.
pub fn smoothed_strain(b_op: &SmoothedBOperator, d: &SVector<f64, 8>) -> Vector3<f64> {
    b_op.entries * d
}

/// Cell stiffness `B~' D B~ A_C` for a 3x3 tangent `D`.
pub fn subcell_stiffness(
    b_op: &SmoothedBOperator,
    tangent: &Matrix3<f64>,
    area: f64,
) -> Result<SubcellStiffness> {
    if tangent.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "constitutive tangent contains non-finite entries".into(),
        ));
    }
    let entries = b_op.entries.transpose() * tangent * b_op.entries * area;
    Ok(SubcellStiffness {
        subcell_id: b_op.subcell_id,
        entries,
        area,
    })
}

/// Element internal force `sum_C B~_C' sigma_C A_C` over the element's
/// cells. `stresses` holds one in-plane stress `(sig_xx, sig_yy, tau_xy)`
/// per cell.
pub fn element_internal_force(
    b_ops: &[SmoothedBOperator],
    stresses: &[Vector3<f64>],
    areas: &[f64],
) -> Result<SVector<f64, 8>> {
    if b_ops.len() != stresses.len() || b_ops.len() != areas.len() {
        return Err(Error::Config(format!(
            "internal force needs matching cell counts, got {} operators, {} stresses, {} areas",
            b_ops.len(),
            stresses.len(),
            areas.len()
        )));
    }
    let mut f = SVector::<f64, 8>::zeros();
    for ((b_op, sigma), &area) in b_ops.iter().zip(stresses).zip(areas) {
        f += b_op.entries.transpose() * sigma * area;
    }
    Ok(f)
}

/// Integration kernel selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Cell-based smoothing with the given subcell count (1, 2, or 4).
    Csfem { n_sc: u8 },
    /// Conventional compatible formulation with 2x2 Gauss quadrature, used
    /// as the comparison baseline.
    Fem,
}

impl Kernel {
    /// Number of integration cells per element.
    pub fn cells_per_element(&self) -> usize {
        match self {
            Kernel::Csfem { n_sc } => *n_sc as usize,
            Kernel::Fem => 4,
        }
    }
}

/// One integration cell of an element, kernel-agnostic.
///
/// `weight` is the cell's volume measure: the subcell area for the
/// smoothed kernel, `w_gp * det J` for a Gauss point. `node_weights` are
/// consistent body-force weights that sum to 1 over the cell, so a body
/// force density `f` contributes `node_weights[k] * weight * f` to node k.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOps {
    /// Owning element id.
    pub element: usize,
    /// Strain-displacement operator of the cell.
    pub b: SMatrix<f64, 3, 8>,
    /// Volume measure, m².
    pub weight: f64,
    /// Consistent nodal body-force weights.
    pub node_weights: [f64; 4],
    /// Representative point of the cell (subcell centroid or Gauss point),
    /// used for depth-dependent initial stress and output.
    pub point: [f64; 2],
}

/// Builds the integration cells of one element.
pub fn element_cells(
    element: &crate::mesh::Quad4Element,
    coords: &[[f64; 2]; 4],
    kernel: Kernel,
) -> Result<Vec<CellOps>> {
    match kernel {
        Kernel::Csfem { n_sc } => {
            let subcells = build_subcells(element, coords, n_sc)?;
            let mut cells = Vec::with_capacity(subcells.len());
            for (i, sc) in subcells.iter().enumerate() {
                let b_op = smoothed_b(sc, i)?;
                // The mean of the midpoint shape values over the 4 edges
                // equals the mean over the 4 cell vertices, giving a
                // consistent partition-of-unity weight per node.
                let mut node_weights = [0.0; 4];
                for edge in &sc.edges {
                    for k in 0..4 {
                        node_weights[k] += edge.shape_values[k] / sc.edges.len() as f64;
                    }
                }
                let mut point = [0.0; 2];
                for v in &sc.vertices {
                    point[0] += v[0] / sc.vertices.len() as f64;
                    point[1] += v[1] / sc.vertices.len() as f64;
                }
                cells.push(CellOps {
                    element: element.id,
                    b: b_op.entries,
                    weight: sc.area,
                    node_weights,
                    point,
                });
            }
            Ok(cells)
        }
        Kernel::Fem => {
            let rule = gauss_1d(2)?;
            let mut cells = Vec::with_capacity(4);
            for &(eta, weta) in &rule {
                for &(xi, wxi) in &rule {
                    let (b, det) = compatible_b(coords, xi, eta).map_err(|_| {
                        Error::Geometry(format!(
                            "element {} has a non-positive Jacobian at a Gauss point \
                             (FEM kernel requires convex elements)",
                            element.id
                        ))
                    })?;
                    cells.push(CellOps {
                        element: element.id,
                        b,
                        weight: wxi * weta * det,
                        node_weights: shape(xi, eta),
                        point: map_point(coords, xi, eta),
                    });
                }
            }
            Ok(cells)
        }
    }
}

/// Builds integration cells for every element of a mesh, active or not.
///
/// Returns the flat cell list plus per-element offsets: the cells of
/// element e occupy `cells[offsets[e]..offsets[e + 1]]`. Inactive elements
/// still get cells (their state must survive deactivation), and the
/// per-element cell count is uniform for a given kernel.
pub fn build_cells(mesh: &Mesh, kernel: Kernel) -> Result<(Vec<CellOps>, Vec<usize>)> {
    let mut cells = Vec::with_capacity(mesh.elements.len() * kernel.cells_per_element());
    let mut offsets = Vec::with_capacity(mesh.elements.len() + 1);
    offsets.push(0);
    for element in &mesh.elements {
        let coords = mesh.element_coords(element);
        cells.extend(element_cells(element, &coords, kernel)?);
        offsets.push(cells.len());
    }
    Ok((cells, offsets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{elastic_tangent, ElasticParams};
    use crate::mesh::Quad4Element;
    use approx::assert_relative_eq;

    const UNIT_SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    fn element() -> Quad4Element {
        Quad4Element {
            id: 0,
            node_ids: [0, 1, 2, 3],
            active: true,
            material_id: 0,
        }
    }

    fn ops(coords: &[[f64; 2]; 4], n_sc: u8) -> Vec<(SmoothedBOperator, f64)> {
        build_subcells(&element(), coords, n_sc)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, sc)| (smoothed_b(sc, i).unwrap(), sc.area))
            .collect()
    }

    #[test]
    fn unit_square_single_cell_matches_hand_integral() {
        // The boundary integral of N_1 over the unit square picks up only
        // the bottom edge (n = (0,-1), N_1 = 1/2) and the left edge
        // (n = (-1,0), N_1 = 1/2), giving b_x = b_y = -1/2; this equals the
        // area average of dN_1/dx = -(1 - y).
        let (b_op, _) = &ops(&UNIT_SQUARE, 1)[0];
        assert_relative_eq!(b_op.entries[(0, 0)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(b_op.entries[(1, 1)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(b_op.entries[(2, 0)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(b_op.entries[(2, 1)], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn rigid_translation_gives_zero_strain() {
        let coords = [[0.0, 0.0], [2.0, 0.3], [1.9, 1.8], [-0.2, 1.4]];
        for n_sc in [1u8, 2, 4] {
            for (b_op, _) in ops(&coords, n_sc) {
                let mut dx = SVector::<f64, 8>::zeros();
                let mut dy = SVector::<f64, 8>::zeros();
                for k in 0..4 {
                    dx[2 * k] = 1.0;
                    dy[2 * k + 1] = 1.0;
                }
                assert_relative_eq!(smoothed_strain(&b_op, &dx).norm(), 0.0, epsilon = 1e-12);
                assert_relative_eq!(smoothed_strain(&b_op, &dy).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn linear_fields_give_exact_constant_strain() {
        let coords = [[0.5, -0.1], [2.2, 0.4], [2.0, 2.1], [0.1, 1.9]];
        let mut d = SVector::<f64, 8>::zeros();
        // u = x, v = 0 then u = y, v = x.
        for k in 0..4 {
            d[2 * k] = coords[k][0];
        }
        for n_sc in [1u8, 2, 4] {
            for (b_op, _) in ops(&coords, n_sc) {
                let eps = smoothed_strain(&b_op, &d);
                assert_relative_eq!(eps[0], 1.0, epsilon = 1e-12);
                assert_relative_eq!(eps[1], 0.0, epsilon = 1e-12);
                assert_relative_eq!(eps[2], 0.0, epsilon = 1e-12);
            }
        }
        let mut d = SVector::<f64, 8>::zeros();
        for k in 0..4 {
            d[2 * k] = coords[k][1];
            d[2 * k + 1] = coords[k][0];
        }
        for (b_op, _) in ops(&coords, 4) {
            let eps = smoothed_strain(&b_op, &d);
            assert_relative_eq!(eps[0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(eps[1], 0.0, epsilon = 1e-12);
            assert_relative_eq!(eps[2], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn element_stiffness_has_exactly_three_rigid_modes() {
        let tangent = elastic_tangent(&ElasticParams { e: 10000.0, nu: 0.25 })
            .unwrap()
            .in_plane;
        let mut k_sum = SMatrix::<f64, 8, 8>::zeros();
        for (b_op, area) in ops(&UNIT_SQUARE, 4) {
            let k = subcell_stiffness(&b_op, &tangent, area).unwrap();
            assert_relative_eq!(
                (k.entries - k.entries.transpose()).norm(),
                0.0,
                epsilon = 1e-12
            );
            k_sum += k.entries;
        }
        let eig = k_sum.symmetric_eigenvalues();
        let scale = eig.iter().cloned().fold(0.0f64, f64::max);
        let zeros = eig.iter().filter(|&&v| v.abs() < 1e-10 * scale).count();
        let positive = eig.iter().filter(|&&v| v > 1e-10 * scale).count();
        assert_eq!(zeros, 3);
        assert_eq!(positive, 5);
    }

    #[test]
    fn single_subcell_kernel_is_rank_deficient() {
        let tangent = elastic_tangent(&ElasticParams { e: 10000.0, nu: 0.25 })
            .unwrap()
            .in_plane;
        for (n_sc, expected_rank) in [(1u8, 3usize), (2, 5), (4, 5)] {
            let mut k_sum = SMatrix::<f64, 8, 8>::zeros();
            for (b_op, area) in ops(&UNIT_SQUARE, n_sc) {
                k_sum += subcell_stiffness(&b_op, &tangent, area).unwrap().entries;
            }
            let eig = k_sum.symmetric_eigenvalues();
            let scale = eig.iter().cloned().fold(0.0f64, f64::max);
            let rank = eig.iter().filter(|&&v| v > 1e-10 * scale).count();
            assert_eq!(rank, expected_rank, "n_sc = {n_sc}");
        }
    }

    #[test]
    fn stiffness_scales_with_area_and_rejects_bad_tangent() {
        let (b_op, area) = ops(&UNIT_SQUARE, 1).remove(0);
        let tangent = Matrix3::identity();
        let k1 = subcell_stiffness(&b_op, &tangent, area).unwrap();
        let k2 = subcell_stiffness(&b_op, &tangent, 2.0 * area).unwrap();
        assert_relative_eq!((k2.entries - 2.0 * k1.entries).norm(), 0.0, epsilon = 1e-14);
        assert!(subcell_stiffness(&b_op, &(tangent * f64::NAN), area).is_err());
        let zero = subcell_stiffness(&b_op, &Matrix3::zeros(), area).unwrap();
        assert_relative_eq!(zero.entries.norm(), 0.0);
    }

    #[test]
    fn internal_force_is_consistent_with_stiffness() {
        let coords = [[0.0, 0.0], [2.0, 0.3], [1.9, 1.8], [-0.2, 1.4]];
        let tangent = elastic_tangent(&ElasticParams { e: 10000.0, nu: 0.25 })
            .unwrap()
            .in_plane;
        let pairs = ops(&coords, 4);
        let mut d = SVector::<f64, 8>::zeros();
        for k in 0..8 {
            d[k] = 0.01 * (k as f64 + 1.0) * if k % 3 == 0 { -1.0 } else { 1.0 };
        }
        let b_ops: Vec<SmoothedBOperator> = pairs.iter().map(|(b, _)| b.clone()).collect();
        let areas: Vec<f64> = pairs.iter().map(|&(_, a)| a).collect();
        let stresses: Vec<Vector3<f64>> = b_ops
            .iter()
            .map(|b| tangent * smoothed_strain(b, &d))
            .collect();
        let f = element_internal_force(&b_ops, &stresses, &areas).unwrap();
        let mut k_sum = SMatrix::<f64, 8, 8>::zeros();
        for (b_op, area) in &pairs {
            k_sum += subcell_stiffness(b_op, &tangent, *area).unwrap().entries;
        }
        let kd = k_sum * d;
        assert_relative_eq!((f - kd).norm(), 0.0, max_relative = 1e-10, epsilon = 1e-12);
        // Rigid-mode property: the internal force has zero resultant.
        assert_relative_eq!(f[0] + f[2] + f[4] + f[6], 0.0, epsilon = 1e-10);
        assert_relative_eq!(f[1] + f[3] + f[5] + f[7], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn hydrostatic_stress_matches_boundary_pressure_resultant() {
        let p = 1000.0;
        let pairs = ops(&UNIT_SQUARE, 4);
        let b_ops: Vec<SmoothedBOperator> = pairs.iter().map(|(b, _)| b.clone()).collect();
        let areas: Vec<f64> = pairs.iter().map(|&(_, a)| a).collect();
        let stresses = vec![Vector3::new(p, p, 0.0); 4];
        let f = element_internal_force(&b_ops, &stresses, &areas).unwrap();
        // Equivalent to pulling each face outward with traction p: corner
        // node 0 sees -p/2 in both directions.
        assert_relative_eq!(f[0], -p / 2.0, epsilon = 1e-10);
        assert_relative_eq!(f[1], -p / 2.0, epsilon = 1e-10);
        assert_relative_eq!(f[2], p / 2.0, epsilon = 1e-10);
        assert_relative_eq!(f[3], -p / 2.0, epsilon = 1e-10);

        assert!(element_internal_force(&b_ops, &stresses[..2], &areas).is_err());
        let zero = element_internal_force(&b_ops, &vec![Vector3::zeros(); 4], &areas).unwrap();
        assert_relative_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn fem_cells_integrate_area_and_weights_exactly() {
        let coords = [[0.0, 0.0], [2.0, 0.3], [1.9, 1.8], [-0.2, 1.4]];
        let area = crate::quad4::polygon_area(&coords);
        for kernel in [Kernel::Csfem { n_sc: 4 }, Kernel::Fem] {
            let cells = element_cells(&element(), &coords, kernel).unwrap();
            assert_eq!(cells.len(), kernel.cells_per_element());
            let total: f64 = cells.iter().map(|c| c.weight).sum();
            assert_relative_eq!(total, area, max_relative = 1e-12);
            for cell in &cells {
                let s: f64 = cell.node_weights.iter().sum();
                assert_relative_eq!(s, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fem_kernel_rejects_folded_elements_csfem_tolerates_nonconvex() {
        // Mildly non-convex: fine for smoothing cells, and the interior
        // Gauss points still see a positive Jacobian.
        let nonconvex = [[0.0, 0.0], [2.0, 0.0], [0.9, 0.9], [0.0, 2.0]];
        assert!(element_cells(&element(), &nonconvex, Kernel::Csfem { n_sc: 4 }).is_ok());
        // Dart-shaped: the bilinear map folds, so the (+,+) Gauss point has
        // a negative Jacobian and the compatible kernel must refuse it.
        let dart = [[0.0, 0.0], [2.0, 0.0], [0.4, 0.4], [0.0, 2.0]];
        assert!(element_cells(&element(), &dart, Kernel::Fem).is_err());
    }
}
