//! Plane-strain elasticity and Mohr-Coulomb elastoplasticity.
//!
//! Stress is tension-positive. Point states carry the 4-component stress
//! `(sig_xx, sig_yy, sig_zz, tau_xy)`: plane strain forces `eps_zz = 0` but
//! `sig_zz` participates fully in yielding, so it must be tracked.
//!
//! The yield function is evaluated in principal-stress space,
//!
//! ```text
//! F = (sig_1 - sig_3) + (sig_1 + sig_3) sin(phi) - 2 c_eff cos(phi)
//! ```
//!
//! with `sig_1 >= sig_2 >= sig_3` and `c_eff = c + kappa` (linear cohesion
//! hardening, `d kappa = H d lambda`). The equivalent mean-stress form
//! `(sqrt(3) cos(theta_0) - sin(theta_0) sin(phi)) q + 3 p sin(phi)
//! - 3 c cos(phi)` is exactly `3/2 F` under the sine Lode-angle convention
//! used by [`invariants`]; a unit test pins that identity.
//!
//! The return mapping operates on the principal values while freezing the
//! trial principal directions. It selects among the main yield plane, the
//! two edge regions where principal values coalesce (triaxial compression
//! `sig_1 = sig_2`, triaxial extension `sig_2 = sig_3`), and the apex, by
//! trying the main-plane return first and escalating when the returned
//! values violate their ordering or a plastic multiplier turns negative.
//! Flow uses the plastic potential g, which is F with the dilation angle
//! psi in place of phi; psi = phi recovers associated flow.
//!
//! The continuum elastoplastic tangent (not the algorithmically consistent
//! one) is built from the main-plane gradients at the current stress; at
//! edge and apex states the gradient of the dominant plane is used.

use nalgebra::{Matrix2, Matrix3, Matrix4, RowVector3, Vector2, Vector3, Vector4};

use crate::error::{Error, Result};

/// Isotropic elastic constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    /// Young's modulus, Pa.
    pub e: f64,
    /// Poisson's ratio.
    pub nu: f64,
}

impl ElasticParams {
    /// Validates `E > 0` and `-1 < nu < 0.5`.
    pub fn validate(&self) -> Result<()> {
        if !(self.e.is_finite() && self.e > 0.0) {
            return Err(Error::Config(format!("E must be positive, got {}", self.e)));
        }
        if !(self.nu.is_finite() && self.nu > -1.0 && self.nu < 0.5) {
            return Err(Error::Config(format!(
                "nu must lie in (-1, 0.5), got {} (nu = 0.5 is incompressible and singular \
                 in plane strain)",
                self.nu
            )));
        }
        Ok(())
    }

    /// Lame constants `(lambda, G)`.
    pub fn lame(&self) -> (f64, f64) {
        let lambda = self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu));
        let g = self.e / (2.0 * (1.0 + self.nu));
        (lambda, g)
    }
}

/// Mohr-Coulomb strength parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MohrCoulombParams {
    /// Cohesion, Pa.
    pub c: f64,
    /// Friction angle, radians.
    pub phi: f64,
    /// Dilation angle, radians; `psi = phi` gives associated flow.
    pub psi: f64,
    /// Linear cohesion-hardening modulus, Pa; 0 is perfect plasticity.
    pub h: f64,
}

impl MohrCoulombParams {
    /// Validates `c >= 0`, `0 <= psi <= phi < pi/2`, `H >= 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::Config(format!(
                "cohesion must be non-negative, got {}",
                self.c
            )));
        }
        if !(self.phi.is_finite() && (0.0..std::f64::consts::FRAC_PI_2).contains(&self.phi)) {
            return Err(Error::Config(format!(
                "friction angle must lie in [0, pi/2), got {} rad",
                self.phi
            )));
        }
        if !(self.psi.is_finite() && self.psi >= 0.0 && self.psi <= self.phi) {
            return Err(Error::Config(format!(
                "dilation angle must lie in [0, phi], got {} rad",
                self.psi
            )));
        }
        if !(self.h.is_finite() && self.h >= 0.0) {
            return Err(Error::Config(format!(
                "hardening modulus must be non-negative, got {}",
                self.h
            )));
        }
        Ok(())
    }
}

/// Point state carried per integration cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialState {
    /// Stress `(sig_xx, sig_yy, sig_zz, tau_xy)`, Pa, tension-positive.
    pub stress: Vector4<f64>,
    /// Accumulated plastic strain `(exx, eyy, ezz, gamma_xy)` with
    /// engineering shear.
    pub plastic_strain: Vector4<f64>,
    /// Hardening variable (accumulated `H * d lambda`), Pa.
    pub kappa: f64,
    /// Whether the most recent update ended on the yield surface.
    pub yielded: bool,
}

impl MaterialState {
    /// Zero-stress virgin state.
    pub fn zero() -> Self {
        MaterialState {
            stress: Vector4::zeros(),
            plastic_strain: Vector4::zeros(),
            kappa: 0.0,
            yielded: false,
        }
    }

    /// State with a prescribed initial stress and no plastic history.
    pub fn with_stress(stress: Vector4<f64>) -> Self {
        MaterialState {
            stress,
            ..MaterialState::zero()
        }
    }

    /// Tensor norm of the accumulated plastic strain,
    /// `sqrt(exx^2 + eyy^2 + ezz^2 + gamma^2 / 2)`.
    pub fn plastic_strain_magnitude(&self) -> f64 {
        let e = &self.plastic_strain;
        (e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + 0.5 * e[3] * e[3]).sqrt()
    }
}

/// Mean stress, deviatoric stress, and Lode angle of a plane-strain state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressInvariants {
    /// Mean stress `(sig_1 + sig_2 + sig_3) / 3`, tension-positive, Pa.
    pub p: f64,
    /// Equivalent deviatoric stress `sqrt(3/2 s:s)`, Pa.
    pub q: f64,
    /// Lode angle in the sine convention, `[-pi/6, pi/6]`;
    /// `sin(3 theta_0) = -27 J_3 / (2 q^3)`.
    pub theta0: f64,
}

/// Plane-strain elastic tangent: the 3x3 in-plane block plus the row that
/// produces the out-of-plane stress rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStrainTangent {
    /// Maps `(d exx, d eyy, d gamma)` to `(d sig_xx, d sig_yy, d tau)`.
    pub in_plane: Matrix3<f64>,
    /// Maps `(d exx, d eyy, d gamma)` to `d sig_zz`; equals `(lambda,
    /// lambda, 0)`, so elastic straining from zero stress gives
    /// `sig_zz = nu (sig_xx + sig_yy)`.
    pub zz_row: RowVector3<f64>,
}

/// Builds the plane-strain elastic tangent.
pub fn elastic_tangent(params: &ElasticParams) -> Result<PlaneStrainTangent> {
    params.validate()?;
    let (lambda, g) = params.lame();
    let d11 = lambda + 2.0 * g;
    let in_plane = Matrix3::new(d11, lambda, 0.0, lambda, d11, 0.0, 0.0, 0.0, g);
    Ok(PlaneStrainTangent {
        in_plane,
        zz_row: RowVector3::new(lambda, lambda, 0.0),
    })
}

/// Full 4x4 elastic operator on `(exx, eyy, ezz, gamma)`; plane strain uses
/// it with `ezz = 0`.
fn elastic_d4(params: &ElasticParams) -> Matrix4<f64> {
    let (lambda, g) = params.lame();
    let d = lambda + 2.0 * g;
    Matrix4::new(
        d, lambda, lambda, 0.0, //
        lambda, d, lambda, 0.0, //
        lambda, lambda, d, 0.0, //
        0.0, 0.0, 0.0, g,
    )
}

/// Elastic stress increment for an in-plane strain increment
/// `(d exx, d eyy, d gamma)` under plane strain.
pub fn elastic_stress_increment(params: &ElasticParams, deps: &Vector3<f64>) -> Vector4<f64> {
    let (lambda, g) = params.lame();
    let d11 = lambda + 2.0 * g;
    Vector4::new(
        d11 * deps[0] + lambda * deps[1],
        lambda * deps[0] + d11 * deps[1],
        lambda * (deps[0] + deps[1]),
        g * deps[2],
    )
}

/// Stress invariants of a plane-strain state.
pub fn invariants(stress: &Vector4<f64>) -> StressInvariants {
    let p = (stress[0] + stress[1] + stress[2]) / 3.0;
    let (sxx, syy, szz, tau) = (stress[0] - p, stress[1] - p, stress[2] - p, stress[3]);
    let j2 = 0.5 * (sxx * sxx + syy * syy + szz * szz) + tau * tau;
    let q = (3.0 * j2).sqrt();
    let theta0 = if q > 0.0 {
        let j3 = szz * (sxx * syy - tau * tau);
        let sin3t = (-27.0 * j3 / (2.0 * q * q * q)).clamp(-1.0, 1.0);
        sin3t.asin() / 3.0
    } else {
        0.0
    };
    StressInvariants { p, q, theta0 }
}

/// Trial principal frame of a plane-strain stress: sorted principal values
/// plus the data needed to rotate principal-space results back.
#[derive(Debug, Clone, Copy)]
struct PrincipalFrame {
    /// Principal values sorted descending.
    vals: [f64; 3],
    /// `order[k]` names the source of sorted slot k: 0 = in-plane major,
    /// 1 = in-plane minor, 2 = out-of-plane.
    order: [usize; 3],
    cos2t: f64,
    sin2t: f64,
}

impl PrincipalFrame {
    fn of(stress: &Vector4<f64>) -> Self {
        let mean = 0.5 * (stress[0] + stress[1]);
        let half_diff = 0.5 * (stress[0] - stress[1]);
        let radius = half_diff.hypot(stress[3]);
        let (cos2t, sin2t) = if radius > 0.0 {
            (half_diff / radius, stress[3] / radius)
        } else {
            (1.0, 0.0)
        };
        let src = [mean + radius, mean - radius, stress[2]];
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| src[b].partial_cmp(&src[a]).unwrap());
        PrincipalFrame {
            vals: [src[order[0]], src[order[1]], src[order[2]]],
            order,
            cos2t,
            sin2t,
        }
    }

    /// Rebuilds a stress 4-vector from sorted principal values, preserving
    /// the frame's directions.
    fn stress_from(&self, sorted: [f64; 3]) -> Vector4<f64> {
        let mut src = [0.0; 3];
        for k in 0..3 {
            src[self.order[k]] = sorted[k];
        }
        let mean = 0.5 * (src[0] + src[1]);
        let half_diff = 0.5 * (src[0] - src[1]);
        Vector4::new(
            mean + half_diff * self.cos2t,
            mean - half_diff * self.cos2t,
            src[2],
            half_diff * self.sin2t,
        )
    }

    /// Rotates a strain-like principal triple (or a yield-surface gradient)
    /// back to `(xx, yy, zz, gamma)` components with engineering shear.
    fn strain_from(&self, sorted: [f64; 3]) -> Vector4<f64> {
        let mut src = [0.0; 3];
        for k in 0..3 {
            src[self.order[k]] = sorted[k];
        }
        let mean = 0.5 * (src[0] + src[1]);
        let half_diff = 0.5 * (src[0] - src[1]);
        Vector4::new(
            mean + half_diff * self.cos2t,
            mean - half_diff * self.cos2t,
            src[2],
            2.0 * half_diff * self.sin2t,
        )
    }
}

/// Yield function value in principal form.
fn yield_principal(s1: f64, s3: f64, sin_phi: f64, cos_phi: f64, c_eff: f64) -> f64 {
    (s1 - s3) + (s1 + s3) * sin_phi - 2.0 * c_eff * cos_phi
}

/// Yield function `F(stress, kappa)`; negative inside the elastic domain.
pub fn yield_value(stress: &Vector4<f64>, mc: &MohrCoulombParams, kappa: f64) -> f64 {
    let frame = PrincipalFrame::of(stress);
    yield_principal(
        frame.vals[0],
        frame.vals[2],
        mc.phi.sin(),
        mc.phi.cos(),
        mc.c + kappa,
    )
}

/// Scale-aware yield tolerance: `1e-8 * max(|F_trial|, 2 c_eff cos(phi))`.
fn yield_tol(f_trial: f64, c_eff: f64, cos_phi: f64) -> f64 {
    1e-8 * f_trial.abs().max(2.0 * c_eff * cos_phi)
}

/// Principal-space elastic operator.
fn principal_d(lambda: f64, g: f64) -> Matrix3<f64> {
    let d = lambda + 2.0 * g;
    Matrix3::new(d, lambda, lambda, lambda, d, lambda, lambda, lambda, d)
}

/// Outcome of the principal-space region selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReturnRegion {
    MainPlane,
    EdgeCompression,
    EdgeExtension,
    Apex,
}

/// Maps a trial stress back to the yield surface.
///
/// `state` supplies the accumulated plastic strain and hardening variable;
/// its stress is not consulted (the caller builds the trial from the last
/// converged stress). Returns the updated state and the total plastic
/// multiplier increment of this update.
pub fn return_map(
    trial_stress: &Vector4<f64>,
    state: &MaterialState,
    elastic: &ElasticParams,
    mc: &MohrCoulombParams,
) -> Result<(MaterialState, f64)> {
    if trial_stress.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("trial stress is non-finite".into()));
    }
    let (sin_phi, cos_phi) = (mc.phi.sin(), mc.phi.cos());
    let c_eff = mc.c + state.kappa;
    let frame = PrincipalFrame::of(trial_stress);
    let s_tr = frame.vals;
    let f_tr = yield_principal(s_tr[0], s_tr[2], sin_phi, cos_phi, c_eff);
    let tol = yield_tol(f_tr, c_eff, cos_phi);
    if f_tr <= tol {
        let mut next = *state;
        next.stress = *trial_stress;
        next.yielded = false;
        return Ok((next, 0.0));
    }

    let (lambda, g) = elastic.lame();
    let de = principal_d(lambda, g);
    let sin_psi = mc.psi.sin();
    let hardening = 2.0 * mc.h * cos_phi;
    let stress_scale = s_tr.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 2.0 * c_eff * cos_phi;
    let order_tol = 1e-10 * stress_scale;

    // Yield-plane normals a_f and flow directions a_g of the three planes
    // that can be active: the main plane (1-3), its 2-3 neighbor at the
    // triaxial compression edge, and its 1-2 neighbor at the triaxial
    // extension edge.
    let a_f = [
        Vector3::new(1.0 + sin_phi, 0.0, -(1.0 - sin_phi)),
        Vector3::new(0.0, 1.0 + sin_phi, -(1.0 - sin_phi)),
        Vector3::new(1.0 + sin_phi, -(1.0 - sin_phi), 0.0),
    ];
    let a_g = [
        Vector3::new(1.0 + sin_psi, 0.0, -(1.0 - sin_psi)),
        Vector3::new(0.0, 1.0 + sin_psi, -(1.0 - sin_psi)),
        Vector3::new(1.0 + sin_psi, -(1.0 - sin_psi), 0.0),
    ];
    let f_of = |s: &[f64; 3], plane: usize, c: f64| -> f64 {
        match plane {
            0 => yield_principal(s[0], s[2], sin_phi, cos_phi, c),
            1 => yield_principal(s[1], s[2], sin_phi, cos_phi, c),
            _ => yield_principal(s[0], s[1], sin_phi, cos_phi, c),
        }
    };

    // Main-plane trial return.
    let de_ag0 = de * a_g[0];
    let denom0 = a_f[0].dot(&de_ag0) + hardening;
    let dl_main = f_tr / denom0;
    let s_main = [
        s_tr[0] - dl_main * de_ag0[0],
        s_tr[1] - dl_main * de_ag0[1],
        s_tr[2] - dl_main * de_ag0[2],
    ];
    let top_ok = s_main[0] >= s_main[1] - order_tol;
    let bottom_ok = s_main[1] >= s_main[2] - order_tol;

    let mut region = match (top_ok, bottom_ok) {
        (true, true) => ReturnRegion::MainPlane,
        (false, true) => ReturnRegion::EdgeCompression,
        (true, false) => ReturnRegion::EdgeExtension,
        (false, false) => ReturnRegion::Apex,
    };

    let mut s_new = s_main;
    let mut dls: Vec<(usize, f64)> = vec![(0, dl_main)];

    if matches!(
        region,
        ReturnRegion::EdgeCompression | ReturnRegion::EdgeExtension
    ) {
        let second = if region == ReturnRegion::EdgeCompression {
            1
        } else {
            2
        };
        let de_ag = [de * a_g[0], de * a_g[second]];
        let m = Matrix2::new(
            a_f[0].dot(&de_ag[0]) + hardening,
            a_f[0].dot(&de_ag[1]) + hardening,
            a_f[second].dot(&de_ag[0]) + hardening,
            a_f[second].dot(&de_ag[1]) + hardening,
        );
        let rhs = Vector2::new(f_tr, f_of(&s_tr, second, c_eff));
        match m.lu().solve(&rhs) {
            Some(dl) if dl[0] >= -1e-12 * dl.amax().max(1.0) && dl[1] >= -1e-12 * dl.amax().max(1.0) => {
                let s_edge = [
                    s_tr[0] - dl[0] * de_ag[0][0] - dl[1] * de_ag[1][0],
                    s_tr[1] - dl[0] * de_ag[0][1] - dl[1] * de_ag[1][1],
                    s_tr[2] - dl[0] * de_ag[0][2] - dl[1] * de_ag[1][2],
                ];
                let ordered = if region == ReturnRegion::EdgeCompression {
                    s_edge[0] >= s_edge[2] - order_tol
                } else {
                    s_edge[0] >= s_edge[1] - order_tol
                };
                if ordered {
                    s_new = s_edge;
                    dls = vec![(0, dl[0]), (second, dl[1])];
                } else {
                    region = ReturnRegion::Apex;
                }
            }
            _ => region = ReturnRegion::Apex,
        }
    }

    let mut dlambda;
    let mut deps_p;
    if region == ReturnRegion::Apex {
        if sin_phi <= 0.0 {
            return Err(Error::Constitutive {
                message: "apex region reached with zero friction angle".into(),
                trial: (*trial_stress).into(),
            });
        }
        if sin_psi <= 0.0 {
            return Err(Error::Constitutive {
                message: "apex return requires a positive dilation angle (psi > 0)".into(),
                trial: (*trial_stress).into(),
            });
        }
        let ce = principal_d(lambda, g)
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular principal elastic operator".into()))?;
        let ag_norm = a_g[0].norm();
        let mut c_apex = c_eff;
        let mut apex = c_apex * cos_phi / sin_phi;
        // With hardening the apex moves as kappa grows; fixed-point
        // iteration on (apex, d lambda). H = 0 exits immediately.
        for iter in 0..50 {
            let diff = Vector3::new(s_tr[0] - apex, s_tr[1] - apex, s_tr[2] - apex);
            let eps = ce * diff;
            let dl = eps.norm() / ag_norm;
            let c_next = c_eff + mc.h * dl;
            let apex_next = c_next * cos_phi / sin_phi;
            let converged = (apex_next - apex).abs() <= 1e-12 * stress_scale.max(apex.abs());
            apex = apex_next;
            c_apex = c_next;
            if converged {
                break;
            }
            if iter == 49 {
                return Err(Error::Constitutive {
                    message: "apex hardening iteration did not converge in 50 iterations".into(),
                    trial: (*trial_stress).into(),
                });
            }
        }
        s_new = [apex, apex, apex];
        let diff = Vector3::new(s_tr[0] - apex, s_tr[1] - apex, s_tr[2] - apex);
        let eps = ce * diff;
        dlambda = eps.norm() / ag_norm;
        deps_p = [eps[0], eps[1], eps[2]];
        let _ = c_apex;
    } else {
        dlambda = 0.0;
        deps_p = [0.0; 3];
        for &(plane, dl) in &dls {
            dlambda += dl;
            for k in 0..3 {
                deps_p[k] += dl * a_g[plane][k];
            }
        }
    }

    if !(dlambda.is_finite() && dlambda >= 0.0) {
        return Err(Error::Constitutive {
            message: format!("invalid plastic multiplier {dlambda:.6e}"),
            trial: (*trial_stress).into(),
        });
    }

    let kappa_new = state.kappa + mc.h * dlambda;
    let f_new = yield_principal(s_new[0], s_new[2], sin_phi, cos_phi, mc.c + kappa_new);
    if f_new.abs() > 10.0 * yield_tol(f_tr, mc.c + kappa_new, cos_phi).max(1e-10 * stress_scale) {
        return Err(Error::Constitutive {
            message: format!("return mapping left residual F = {f_new:.6e}"),
            trial: (*trial_stress).into(),
        });
    }

    let next = MaterialState {
        stress: frame.stress_from(s_new),
        plastic_strain: state.plastic_strain + frame.strain_from(deps_p),
        kappa: kappa_new,
        yielded: true,
    };
    Ok((next, dlambda))
}

/// Continuum elastoplastic tangent, in-plane 3x3 block.
///
/// For an unyielded state this is the elastic tangent. For a yielded state
/// the main-plane gradients at the current stress are rotated back to
/// `(xx, yy, zz, gamma)` components, combined through the 4x4 elastic
/// operator, and the rows/columns belonging to `eps_zz` are condensed out
/// by the plane-strain constraint (`d eps_zz = 0`), which amounts to
/// selecting the in-plane block.
pub fn elastoplastic_tangent(
    stress: &Vector4<f64>,
    mc: &MohrCoulombParams,
    elastic: &ElasticParams,
    yielded: bool,
) -> Result<Matrix3<f64>> {
    let tangent = elastic_tangent(elastic)?;
    if !yielded {
        return Ok(tangent.in_plane);
    }
    let frame = PrincipalFrame::of(stress);
    let (sin_phi, cos_phi) = (mc.phi.sin(), mc.phi.cos());
    let sin_psi = mc.psi.sin();
    let af4 = frame.strain_from([1.0 + sin_phi, 0.0, -(1.0 - sin_phi)]);
    let ag4 = frame.strain_from([1.0 + sin_psi, 0.0, -(1.0 - sin_psi)]);
    let d4 = elastic_d4(elastic);
    let d_ag = d4 * ag4;
    let af_d = d4.transpose() * af4;
    let denom = af4.dot(&d_ag) + 2.0 * mc.h * cos_phi;
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Numeric(format!(
            "elastoplastic tangent denominator {denom:.6e} is not positive"
        )));
    }
    let dep4 = d4 - d_ag * af_d.transpose() / denom;
    let idx = [0usize, 1, 3];
    let mut dep = Matrix3::zeros();
    for (r, &ir) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            dep[(r, c)] = dep4[(ir, ic)];
        }
    }
    Ok(dep)
}
