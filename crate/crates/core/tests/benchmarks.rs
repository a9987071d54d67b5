//! Driver-level properties checked against closed-form scalings, plus the
//! case-format and VTK-output invariants, all on reduced meshes.

mod common;

use common::{sandboxed, set_gen_arg};
use geosmooth::casefile::{parse_case_str, write_case, LoadDef};
use geosmooth::drivers::{
    run_biaxial, run_excavation, run_footing, run_slope_stability, BUILTIN_CASES,
};
use geosmooth::solver::RunLog;

#[test]
fn shipped_cases_round_trip_through_the_writer() {
    for (name, text) in BUILTIN_CASES {
        let parsed = parse_case_str(text).unwrap();
        let reparsed = parse_case_str(&write_case(&parsed))
            .unwrap_or_else(|e| panic!("rewritten `{name}` does not parse: {e}"));
        assert_eq!(parsed, reparsed, "case `{name}` does not round-trip");
    }
}

#[test]
fn exported_vtk_loads_cleanly_and_biaxial_stress_is_uniform() {
    geosmooth::configure_deterministic();
    let mut checked = 0usize;

    let (case, dir) = sandboxed("biaxial");
    let mut log = RunLog::new(false);
    run_biaxial(&case, &mut log).unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "vtk") {
            let text = std::fs::read_to_string(&path).unwrap();
            let grid = common::read_vtk(&text)
                .unwrap_or_else(|e| panic!("{} rejected: {e}", path.display()));
            assert_eq!(grid.points.len(), grid.point_vectors["displacement"].len());
            let syy = &grid.cell_scalars["sigma_yy"];
            assert_eq!(syy.len(), grid.cells.len());
            for &s in syy {
                assert!(
                    (s + 334.64e3).abs() <= 0.005 * 334.64e3,
                    "final biaxial cell sigma_yy {s:.1} Pa is off the plateau"
                );
            }
            checked += 1;
        }
    }

    let (case, dir) = sandboxed("tunnel");
    let mut log = RunLog::new(false);
    run_excavation(&case, &mut log).unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "vtk") {
            let text = std::fs::read_to_string(&path).unwrap();
            common::read_vtk(&text)
                .unwrap_or_else(|e| panic!("{} rejected: {e}", path.display()));
            checked += 1;
        }
    }
    assert!(checked >= 6, "expected biaxial plus five stage files, got {checked}");
}

#[test]
fn footing_limit_doubles_with_cohesion() {
    geosmooth::configure_deterministic();
    let limit_for = |cohesion: f64, target: f64| -> f64 {
        let (mut case, _dir) = sandboxed("footing");
        set_gen_arg(&mut case, "n_under", 4.0);
        case.increments = 40;
        case.materials[0].strength.as_mut().unwrap().c = cohesion;
        for load in &mut case.loads {
            if let LoadDef::Pressure { value, .. } = load {
                *value = target;
            }
        }
        let mut log = RunLog::new(false);
        run_footing(&case, &mut log)
            .unwrap()
            .limit
            .expect("ramp target sits above the coarse-mesh capacity")
    };
    let base = limit_for(1000.0, 8000.0);
    let doubled = limit_for(2000.0, 16000.0);
    let ratio = doubled / base;
    assert!(
        (ratio - 2.0).abs() <= 0.08 * 2.0,
        "doubling cohesion moved the limit by {ratio:.3}x instead of 2x \
         ({base:.0} Pa to {doubled:.0} Pa)"
    );
}

/// Strength reduction divides c and tan(phi) by F_r, so scaling both by a
/// factor and sweeping at the scaled F_r poses the identical problem. The
/// crest displacement must agree to solver precision, which pins the
/// reduction to tan(phi) rather than phi itself.
#[test]
fn slope_response_is_invariant_under_matched_strength_and_factor_scaling() {
    geosmooth::configure_deterministic();
    let crest_at = |scale: f64, f_r: f64| -> f64 {
        let (mut case, _dir) = sandboxed("slope");
        set_gen_arg(&mut case, "size", 2.5);
        case.params.insert("sweep_start".into(), vec![f_r]);
        case.params.insert("sweep_step".into(), vec![0.01]);
        case.params.insert("sweep_max".into(), vec![f_r + 1e-3]);
        let strength = case.materials[0].strength.as_mut().unwrap();
        strength.c *= scale;
        let phi = (scale * strength.phi_deg.to_radians().tan()).atan().to_degrees();
        strength.phi_deg = phi;
        strength.psi_deg = phi;
        let mut log = RunLog::new(false);
        let report = run_slope_stability(&case, &mut log).unwrap();
        assert_eq!(report.rows.len(), 1, "sweep window should hold a single row");
        assert!(report.rows[0].converged, "F_r = {f_r} should converge");
        report.rows[0].monitor
    };
    for g in [0.8, 1.0, 1.1] {
        let base = crest_at(1.0, g);
        let scaled = crest_at(1.3, 1.3 * g);
        assert!(
            (scaled - base).abs() <= 1e-6 * base.abs(),
            "at F_r = {g} the scaled sweep moved the crest by {scaled:.9e} \
             instead of {base:.9e}"
        );
    }
}

#[test]
fn tunnel_without_gravity_stays_quiescent() {
    geosmooth::configure_deterministic();
    let (mut case, _dir) = sandboxed("tunnel");
    for load in &mut case.loads {
        if let LoadDef::Gravity { scale } = load {
            *scale = 0.0;
        }
    }
    let mut log = RunLog::new(false);
    let report = run_excavation(&case, &mut log).unwrap();
    assert!(report.completed);
    for (stage, u) in report.crown.iter().enumerate() {
        assert!(
            u.abs() <= 1e-12,
            "stage {} moved the crown by {u:.2e} m with no load present",
            stage + 1
        );
    }
}

#[test]
fn elastic_footing_completes_with_a_linear_curve() {
    geosmooth::configure_deterministic();
    let (mut case, _dir) = sandboxed("footing");
    set_gen_arg(&mut case, "n_under", 4.0);
    case.increments = 8;
    for m in &mut case.materials {
        m.strength = None;
    }
    let mut log = RunLog::new(false);
    let report = run_footing(&case, &mut log).unwrap();
    assert_eq!(report.limit, None, "an elastic ramp has no limit load");
    let (q_end, u_end) = *report.curve.last().unwrap();
    for &(q, u) in &report.curve {
        assert!(
            (u * q_end - u_end * q).abs() <= 1e-9 * (u_end * q_end).abs(),
            "settlement is not proportional to pressure at q = {q:.0} Pa"
        );
    }
}
