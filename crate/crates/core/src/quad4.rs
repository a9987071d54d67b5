//! Bilinear four-node quadrilateral interpolation.
//!
//! Shared by the mesh layer (subcell site coordinates), the smoothed
//! operator (shape values on cell boundaries), and the conventional FEM
//! kernel (compatible strain-displacement matrix at Gauss points).
//!
//! Node ordering is counterclockwise with natural coordinates
//!
//! ```text
//!   4 (-1, 1) --- 3 (1, 1)
//!   |                 |
//!   1 (-1,-1) --- 2 (1,-1)
//! ```
//!
//! and the shape functions are `N_k = (1 + xi_k xi)(1 + eta_k eta) / 4`.

use nalgebra::{Matrix2, SMatrix};

use crate::error::{Error, Result};

/// Natural coordinates of the four corner nodes, in element order.
pub const NAT_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Shape function values at a natural point.
pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for k in 0..4 {
        n[k] = 0.25 * (1.0 + NAT_CORNERS[k][0] * xi) * (1.0 + NAT_CORNERS[k][1] * eta);
    }
    n
}

/// Shape function derivatives with respect to `(xi, eta)`.
///
/// Row `k` holds `[dN_k/dxi, dN_k/deta]`.
pub fn shape_deriv(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let mut d = [[0.0; 2]; 4];
    for k in 0..4 {
        let (xk, ek) = (NAT_CORNERS[k][0], NAT_CORNERS[k][1]);
        d[k][0] = 0.25 * xk * (1.0 + ek * eta);
        d[k][1] = 0.25 * ek * (1.0 + xk * xi);
    }
    d
}

/// Maps a natural point to physical coordinates.
pub fn map_point(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> [f64; 2] {
    let n = shape(xi, eta);
    let mut p = [0.0; 2];
    for k in 0..4 {
        p[0] += n[k] * coords[k][0];
        p[1] += n[k] * coords[k][1];
    }
    p
}

/// Jacobian of the isoparametric map at a natural point:
/// `J = [[dx/dxi, dy/dxi], [dx/deta, dy/deta]]`.
pub fn jacobian(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> Matrix2<f64> {
    let d = shape_deriv(xi, eta);
    let mut j = Matrix2::zeros();
    for k in 0..4 {
        j[(0, 0)] += d[k][0] * coords[k][0];
        j[(0, 1)] += d[k][0] * coords[k][1];
        j[(1, 0)] += d[k][1] * coords[k][0];
        j[(1, 1)] += d[k][1] * coords[k][1];
    }
    j
}

/// Compatible strain-displacement matrix (3 x 8) at a natural point.
///
/// Row order is `(eps_xx, eps_yy, gamma_xy)` with engineering shear; the
/// column order interleaves `(u_x, u_y)` per node. Fails if the Jacobian is
/// singular or negative, which indicates an inverted or degenerate element.
pub fn compatible_b(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> Result<(SMatrix<f64, 3, 8>, f64)> {
    let j = jacobian(coords, xi, eta);
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    if !(det.is_finite() && det > 0.0) {
        return Err(Error::Geometry(format!(
            "non-positive Jacobian determinant {det:.6e} at (xi, eta) = ({xi}, {eta})"
        )));
    }
    let inv = Matrix2::new(j[(1, 1)], -j[(0, 1)], -j[(1, 0)], j[(0, 0)]) / det;
    let d = shape_deriv(xi, eta);
    let mut b = SMatrix::<f64, 3, 8>::zeros();
    for k in 0..4 {
        let dx = inv[(0, 0)] * d[k][0] + inv[(0, 1)] * d[k][1];
        let dy = inv[(1, 0)] * d[k][0] + inv[(1, 1)] * d[k][1];
        b[(0, 2 * k)] = dx;
        b[(1, 2 * k + 1)] = dy;
        b[(2, 2 * k)] = dy;
        b[(2, 2 * k + 1)] = dx;
    }
    Ok((b, det))
}

/// One-dimensional Gauss-Legendre points and weights on `[-1, 1]`.
///
/// Supports 1 through 4 points, which is enough for the bilinear element
/// (2 x 2 in production) and for higher-order verification quadrature.
pub fn gauss_1d(n: usize) -> Result<Vec<(f64, f64)>> {
    let rule = match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3.0_f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (3.0 / 5.0_f64).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0 / 5.0_f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0 / 5.0_f64).sqrt()).sqrt();
            let wa = (18.0 + 30.0_f64.sqrt()) / 36.0;
            let wb = (18.0 - 30.0_f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => {
            return Err(Error::Config(format!(
                "unsupported Gauss rule with {n} points (1..=4 available)"
            )))
        }
    };
    Ok(rule)
}

/// Signed area of a simple polygon (shoelace formula).
///
/// Positive for counterclockwise vertex order.
pub fn polygon_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    let mut twice = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        twice += pts[i][0] * pts[j][1] - pts[j][0] * pts[i][1];
    }
    0.5 * twice
}
