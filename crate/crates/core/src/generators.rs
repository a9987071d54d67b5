//! Mesh generators for the benchmark geometries.
//!
//! Every generator emits counterclockwise quads with deterministic node
//! numbering and named node/element sets, so drivers apply boundary
//! conditions by set name instead of coordinate matching. Dimensions are
//! meters.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Node, Quad4Element};

/// Evenly spaced coordinates over `[a, b]` with `n` intervals
/// (`n + 1` points).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

/// Coordinates over `[a, b]` with `n` intervals whose lengths grow by
/// `ratio` from `a` toward `b`; `ratio < 1` refines toward `b`.
pub fn graded_coords(a: f64, b: f64, n: usize, ratio: f64) -> Vec<f64> {
    assert!(n >= 1 && ratio > 0.0);
    if (ratio - 1.0).abs() < 1e-12 {
        return linspace(a, b, n);
    }
    let h0 = (b - a) * (ratio - 1.0) / (ratio.powi(n as i32) - 1.0);
    let mut out: Vec<f64> = (0..=n)
        .map(|k| a + h0 * (ratio.powi(k as i32) - 1.0) / (ratio - 1.0))
        .collect();
    out[n] = b;
    out
}

/// Tensor-product mesh over the given ascending coordinate arrays, with
/// node sets `bottom`, `top`, `left`, `right`.
pub fn tensor_mesh(xs: &[f64], ys: &[f64]) -> Result<Mesh> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::Geometry(
            "tensor mesh needs at least 2 coordinates per direction".into(),
        ));
    }
    for arr in [xs, ys] {
        if arr.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Geometry(
                "tensor mesh coordinates must be strictly ascending".into(),
            ));
        }
    }
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            nodes.push(Node {
                id: id(i, j),
                x,
                y,
            });
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(Quad4Element {
                id: elements.len(),
                node_ids: [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
                active: true,
                material_id: 0,
            });
        }
    }
    let mut node_sets = BTreeMap::new();
    node_sets.insert("bottom".to_string(), (0..=nx).map(|i| id(i, 0)).collect());
    node_sets.insert("top".to_string(), (0..=nx).map(|i| id(i, ny)).collect());
    node_sets.insert("left".to_string(), (0..=ny).map(|j| id(0, j)).collect());
    node_sets.insert("right".to_string(), (0..=ny).map(|j| id(nx, j)).collect());
    let mesh = Mesh {
        nodes,
        elements,
        node_sets,
        element_sets: BTreeMap::new(),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Uniform rectangle `[x0, x0 + width] x [y0, y0 + height]` with
/// `nx x ny` elements.
pub fn rectangle(x0: f64, y0: f64, width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::Geometry(format!(
            "rectangle dimensions must be positive, got {width} x {height}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::Geometry("rectangle needs nx, ny >= 1".into()));
    }
    tensor_mesh(
        &linspace(x0, x0 + width, nx),
        &linspace(y0, y0 + height, ny),
    )
}

/// Quarter annulus in the first quadrant, `nr x ntheta` elements.
///
/// Node sets: `inner` (r = ra), `outer` (r = rb), `x_axis` (theta = 0),
/// `y_axis` (theta = 90 degrees).
pub fn quarter_annulus(ra: f64, rb: f64, nr: usize, ntheta: usize) -> Result<Mesh> {
    if !(ra > 0.0 && rb > ra) {
        return Err(Error::Geometry(format!(
            "annulus needs 0 < ra < rb, got ra = {ra}, rb = {rb}"
        )));
    }
    if nr == 0 || ntheta == 0 {
        return Err(Error::Geometry("annulus needs nr, ntheta >= 1".into()));
    }
    let id = |i: usize, j: usize| j * (nr + 1) + i;
    let mut nodes = Vec::new();
    for j in 0..=ntheta {
        let theta = std::f64::consts::FRAC_PI_2 * j as f64 / ntheta as f64;
        let (sin, cos) = theta.sin_cos();
        for i in 0..=nr {
            let r = ra + (rb - ra) * i as f64 / nr as f64;
            let snap = |v: f64| if v.abs() < 1e-12 * rb { 0.0 } else { v };
            nodes.push(Node {
                id: id(i, j),
                x: snap(r * cos),
                y: snap(r * sin),
            });
        }
    }
    let mut elements = Vec::new();
    for j in 0..ntheta {
        for i in 0..nr {
            elements.push(Quad4Element {
                id: elements.len(),
                node_ids: [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
                active: true,
                material_id: 0,
            });
        }
    }
    let mut node_sets = BTreeMap::new();
    node_sets.insert("inner".to_string(), (0..=ntheta).map(|j| id(0, j)).collect());
    node_sets.insert("outer".to_string(), (0..=ntheta).map(|j| id(nr, j)).collect());
    node_sets.insert("x_axis".to_string(), (0..=nr).map(|i| id(i, 0)).collect());
    node_sets.insert("y_axis".to_string(), (0..=nr).map(|i| id(i, ntheta)).collect());
    let mesh = Mesh {
        nodes,
        elements,
        node_sets,
        element_sets: BTreeMap::new(),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Half-domain strip footing mesh: `[0, width] x [-depth, 0]` with the
/// footing contact on `[0, half_width]` at the surface. The grid is fine
/// under and beside the footing and coarsens geometrically toward the far
/// and bottom boundaries.
///
/// Node sets: tensor sets plus `footing` (surface nodes under the
/// footing); `top` is the full ground surface.
pub fn footing(width: f64, depth: f64, half_width: f64, n_under: usize) -> Result<Mesh> {
    if !(half_width > 0.0 && width > 6.0 * half_width && depth > 4.0 * half_width) {
        return Err(Error::Geometry(format!(
            "footing domain must dwarf the footing: half_width = {half_width}, \
             width = {width}, depth = {depth}"
        )));
    }
    if n_under < 2 {
        return Err(Error::Geometry("footing needs n_under >= 2".into()));
    }
    let fine_end = 5.0 * half_width;
    let mut xs = linspace(0.0, half_width, n_under);
    xs.extend_from_slice(&linspace(half_width, fine_end, 3 * n_under)[1..]);
    xs.extend_from_slice(&graded_coords(fine_end, width, 2 + n_under, 1.55)[1..]);
    let fine_depth = 3.0 * half_width;
    let mut ys = graded_coords(-depth, -fine_depth, 1 + n_under, 1.0 / 1.6);
    ys.extend_from_slice(&linspace(-fine_depth, 0.0, 2 * n_under)[1..]);
    let mut mesh = tensor_mesh(&xs, &ys)?;
    let surface: Vec<usize> = mesh.node_sets["top"].clone();
    let pad: Vec<usize> = surface
        .iter()
        .copied()
        .filter(|&n| mesh.nodes[n].x <= half_width + 1e-9)
        .collect();
    mesh.node_sets.insert("footing".to_string(), pad);
    Ok(mesh)
}

/// Which box wall a cast ray lands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wall {
    Right,
    Top,
    Left,
    Bottom,
}

impl Wall {
    fn set_name(self) -> &'static str {
        match self {
            Wall::Right => "right",
            Wall::Top => "surface",
            Wall::Left => "left",
            Wall::Bottom => "bottom",
        }
    }
}

/// Butterfly mesh of a shallow circular tunnel in a rectangular box.
///
/// The box is `[-half_width, half_width] x [-height, 0]` with the ground
/// surface at `y = 0` and the tunnel center at `(0, -cover)`. The tunnel
/// interior is meshed (a square core plus `n_trans` transition rings) so
/// excavation stages can deactivate it; `n_out` graded layers connect the
/// tunnel boundary to the box walls along rays from the center, with the
/// four rays nearest the box corners snapped onto them.
///
/// Node sets: `crown` (single node at the top of the tunnel boundary),
/// `surface`, `left`, `right`, `bottom`. Element sets: `tunnel` (the
/// interior) and `stage1..stageN` partitioning it into `n_stages`
/// horizontal bands, top band first.
pub fn tunnel(
    half_width: f64,
    height: f64,
    cover: f64,
    radius: f64,
    nq: usize,
    n_trans: usize,
    n_out: usize,
    n_stages: usize,
) -> Result<Mesh> {
    if !(radius > 0.0 && cover > 2.0 * radius && height > cover + 2.0 * radius) {
        return Err(Error::Geometry(format!(
            "tunnel needs radius < cover / 2 and room below: radius = {radius}, \
             cover = {cover}, height = {height}"
        )));
    }
    if half_width < cover {
        return Err(Error::Geometry(
            "tunnel box should be at least as wide as the cover depth".into(),
        ));
    }
    if nq < 4 || nq % 2 != 0 {
        return Err(Error::Geometry("tunnel needs even nq >= 4".into()));
    }
    if n_trans < 1 || n_out < 2 || n_stages < 1 {
        return Err(Error::Geometry(
            "tunnel needs n_trans >= 1, n_out >= 2, n_stages >= 1".into(),
        ));
    }
    let center = [0.0, -cover];
    let ring = 4 * nq;
    let s = 0.45 * radius;

    // Core grid: (nq + 1)^2 nodes over the square [-s, s]^2.
    let core_id = |i: usize, j: usize| j * (nq + 1) + i;
    let mut nodes = Vec::new();
    for j in 0..=nq {
        for i in 0..=nq {
            nodes.push(Node {
                id: core_id(i, j),
                x: center[0] - s + 2.0 * s * i as f64 / nq as f64,
                y: center[1] - s + 2.0 * s * j as f64 / nq as f64,
            });
        }
    }

    // Angular index j walks the ring counterclockwise from theta = 0; the
    // square boundary is parameterized side by side so that ring index j
    // matches grid spacing (corners at 45, 135, 225, 315 degrees).
    let square_grid = |j: usize| -> (usize, usize) {
        let a = (j + nq / 2) % ring;
        let side = a / nq;
        let u = a % nq;
        match side {
            0 => (nq, u),
            1 => (nq - u, nq),
            2 => (0, nq - u),
            _ => (u, 0),
        }
    };
    let theta = |j: usize| 2.0 * std::f64::consts::PI * j as f64 / ring as f64;
    let circle_pt = |j: usize| -> [f64; 2] {
        let (sin, cos) = theta(j).sin_cos();
        [center[0] + radius * cos, center[1] + radius * sin]
    };

    // Transition rings blend the square boundary into the circle.
    let trans_base = nodes.len();
    for k in 1..=n_trans {
        let t = k as f64 / n_trans as f64;
        for j in 0..ring {
            let (gi, gj) = square_grid(j);
            let sq = [nodes[core_id(gi, gj)].x, nodes[core_id(gi, gj)].y];
            let ci = circle_pt(j);
            nodes.push(Node {
                id: nodes.len(),
                x: (1.0 - t) * sq[0] + t * ci[0],
                y: (1.0 - t) * sq[1] + t * ci[1],
            });
        }
    }

    // Ray casting from the center through each circle node to the walls,
    // with the ray nearest each corner snapped exactly onto it.
    let below = height - cover;
    let corner_angles = [
        (f64::atan2(cover, half_width), [half_width, 0.0]),
        (f64::atan2(cover, -half_width), [-half_width, 0.0]),
        (f64::atan2(-below, -half_width), [-half_width, -height]),
        (f64::atan2(-below, half_width), [half_width, -height]),
    ];
    let norm = |t: f64| {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut v = t % two_pi;
        if v > std::f64::consts::PI {
            v -= two_pi;
        }
        v
    };
    let mut wall_point = Vec::with_capacity(ring);
    let mut walls: Vec<Vec<Wall>> = Vec::with_capacity(ring);
    for j in 0..ring {
        let th = norm(theta(j));
        let (sin, cos) = th.sin_cos();
        let (wall, t) = if th >= corner_angles[0].0 && th < corner_angles[1].0 {
            (Wall::Top, cover / sin)
        } else if th >= corner_angles[1].0 || th < corner_angles[2].0 {
            (Wall::Left, -half_width / cos)
        } else if th < corner_angles[3].0 {
            (Wall::Bottom, -below / sin)
        } else {
            (Wall::Right, half_width / cos)
        };
        wall_point.push([center[0] + t * cos, center[1] + t * sin]);
        walls.push(vec![wall]);
    }
    for (angle, corner) in corner_angles {
        let j_near = (0..ring)
            .min_by(|&a, &b| {
                let da = (norm(theta(a) - angle)).abs();
                let db = (norm(theta(b) - angle)).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        wall_point[j_near] = corner;
        let vertical = if corner[0] > 0.0 { Wall::Right } else { Wall::Left };
        let horizontal = if corner[1] < -0.5 * height {
            Wall::Bottom
        } else {
            Wall::Top
        };
        walls[j_near] = vec![vertical, horizontal];
    }

    let outer_base = nodes.len();
    let growth: f64 = 1.45;
    for l in 1..=n_out {
        let t = (growth.powi(l as i32) - 1.0) / (growth.powi(n_out as i32) - 1.0);
        for j in 0..ring {
            let ci = circle_pt(j);
            nodes.push(Node {
                id: nodes.len(),
                x: ci[0] + t * (wall_point[j][0] - ci[0]),
                y: ci[1] + t * (wall_point[j][1] - ci[1]),
            });
        }
    }

    let ring_node = |k: usize, j: usize| -> usize {
        let j = j % ring;
        if k == 0 {
            let (gi, gj) = square_grid(j);
            core_id(gi, gj)
        } else if k <= n_trans {
            trans_base + (k - 1) * ring + j
        } else {
            outer_base + (k - n_trans - 1) * ring + j
        }
    };

    let mut elements = Vec::new();
    for j in 0..nq {
        for i in 0..nq {
            elements.push(Quad4Element {
                id: elements.len(),
                node_ids: [
                    core_id(i, j),
                    core_id(i + 1, j),
                    core_id(i + 1, j + 1),
                    core_id(i, j + 1),
                ],
                active: true,
                material_id: 0,
            });
        }
    }
    for k in 0..(n_trans + n_out) {
        for j in 0..ring {
            elements.push(Quad4Element {
                id: elements.len(),
                node_ids: [
                    ring_node(k, j),
                    ring_node(k + 1, j),
                    ring_node(k + 1, j + 1),
                    ring_node(k, j + 1),
                ],
                active: true,
                material_id: 0,
            });
        }
    }

    let n_tunnel = nq * nq + n_trans * ring;
    let mut element_sets = BTreeMap::new();
    element_sets.insert("tunnel".to_string(), (0..n_tunnel).collect::<Vec<_>>());
    let band = 2.0 * radius / n_stages as f64;
    let mut stages: Vec<Vec<usize>> = vec![Vec::new(); n_stages];
    for e in 0..n_tunnel {
        let cy = elements[e]
            .node_ids
            .iter()
            .map(|&n| nodes[n].y)
            .sum::<f64>()
            / 4.0;
        let idx = (((center[1] + radius - cy) / band).floor() as isize)
            .clamp(0, n_stages as isize - 1) as usize;
        stages[idx].push(e);
    }
    for (i, stage) in stages.into_iter().enumerate() {
        if stage.is_empty() {
            return Err(Error::Geometry(format!(
                "tunnel stage {} is empty; increase nq or reduce n_stages",
                i + 1
            )));
        }
        element_sets.insert(format!("stage{}", i + 1), stage);
    }

    let mut node_sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    node_sets.insert("crown".to_string(), vec![ring_node(n_trans, nq)]);
    for name in ["surface", "left", "right", "bottom"] {
        node_sets.insert(name.to_string(), Vec::new());
    }
    for j in 0..ring {
        let outermost = ring_node(n_trans + n_out, j);
        for wall in &walls[j] {
            node_sets.get_mut(wall.set_name()).unwrap().push(outermost);
        }
    }
    for set in node_sets.values_mut() {
        set.sort_unstable();
    }

    let mesh = Mesh {
        nodes,
        elements,
        node_sets,
        element_sets,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Sheared-grid slope mesh: a foundation layer of the given thickness, a
/// slope of `height` at `angle_deg` from horizontal, level ground
/// `reach_left` behind the crest and `reach_right` past the toe. Columns
/// are snapped to the crest and toe so both are mesh nodes; `size` is the
/// target element edge length.
///
/// Node sets: `bottom`, `left`, `right`, `top` (whole surface), `crest`
/// and `toe` (one node each).
pub fn slope(
    height: f64,
    angle_deg: f64,
    foundation: f64,
    reach_left: f64,
    reach_right: f64,
    size: f64,
) -> Result<Mesh> {
    if !(height > 0.0 && foundation > 0.0 && reach_left > 0.0 && reach_right > 0.0 && size > 0.0) {
        return Err(Error::Geometry("slope dimensions must be positive".into()));
    }
    if !(10.0..=80.0).contains(&angle_deg) {
        return Err(Error::Geometry(format!(
            "slope angle must be in [10, 80] degrees, got {angle_deg}"
        )));
    }
    let run = height / angle_deg.to_radians().tan();
    let n1 = ((reach_left / size).round() as usize).max(2);
    let n2 = (((run.hypot(height) / size).round()) as usize).max(4);
    let n3 = ((reach_right / size).round() as usize).max(3);
    let ny = (((foundation + height) / size).round() as usize).max(4);
    let nx = n1 + n2 + n3;

    let mut xs = linspace(0.0, reach_left, n1);
    xs.extend_from_slice(&linspace(reach_left, reach_left + run, n2)[1..]);
    xs.extend_from_slice(&linspace(reach_left + run, reach_left + run + reach_right, n3)[1..]);
    let surface_height = |i: usize| -> f64 {
        if i <= n1 {
            foundation + height
        } else if i <= n1 + n2 {
            foundation + height * (1.0 - (i - n1) as f64 / n2 as f64)
        } else {
            foundation
        }
    };

    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for (i, &x) in xs.iter().enumerate() {
        let top = surface_height(i);
        for j in 0..=ny {
            nodes.push(Node {
                id: id(i, j),
                x,
                y: top * j as f64 / ny as f64,
            });
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            elements.push(Quad4Element {
                id: elements.len(),
                node_ids: [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
                active: true,
                material_id: 0,
            });
        }
    }
    let mut node_sets = BTreeMap::new();
    node_sets.insert("bottom".to_string(), (0..=nx).map(|i| id(i, 0)).collect());
    node_sets.insert("top".to_string(), (0..=nx).map(|i| id(i, ny)).collect());
    node_sets.insert("left".to_string(), (0..=ny).map(|j| id(0, j)).collect());
    node_sets.insert("right".to_string(), (0..=ny).map(|j| id(nx, j)).collect());
    node_sets.insert("crest".to_string(), vec![id(n1, ny)]);
    node_sets.insert("toe".to_string(), vec![id(n1 + n2, ny)]);
    let mesh = Mesh {
        nodes,
        elements,
        node_sets,
        element_sets: BTreeMap::new(),
    };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::{build_cells, Kernel};
    use approx::assert_relative_eq;

    #[test]
    fn graded_coords_hit_both_ends_with_the_requested_ratio() {
        let xs = graded_coords(2.0, 10.0, 5, 1.5);
        assert_eq!(xs.len(), 6);
        assert_eq!(xs[0], 2.0);
        assert_eq!(xs[5], 10.0);
        for w in xs.windows(3) {
            assert_relative_eq!((w[2] - w[1]) / (w[1] - w[0]), 1.5, max_relative = 1e-9);
        }
        let uniform = graded_coords(0.0, 1.0, 4, 1.0);
        assert_relative_eq!(uniform[1], 0.25, max_relative = 1e-12);
    }

    #[test]
    fn rectangle_sets_trace_the_boundary() {
        let mesh = rectangle(1.0, 2.0, 3.0, 4.0, 3, 2).unwrap();
        assert_eq!(mesh.nodes.len(), 12);
        assert_eq!(mesh.elements.len(), 6);
        assert_eq!(mesh.node_sets["bottom"].len(), 4);
        assert_eq!(mesh.node_sets["left"].len(), 3);
        for &n in mesh.node_sets["top"].iter() {
            assert_eq!(mesh.nodes[n].y, 6.0);
        }
        for &n in mesh.node_sets["right"].iter() {
            assert_eq!(mesh.nodes[n].x, 4.0);
        }
    }

    #[test]
    fn quarter_annulus_is_well_formed_on_both_kernels() {
        let mesh = quarter_annulus(1.0, 2.0, 4, 6).unwrap();
        for &n in mesh.node_sets["inner"].iter() {
            assert_relative_eq!(mesh.nodes[n].x.hypot(mesh.nodes[n].y), 1.0, max_relative = 1e-12);
        }
        for &n in mesh.node_sets["y_axis"].iter() {
            assert_eq!(mesh.nodes[n].x, 0.0);
        }
        build_cells(&mesh, Kernel::Csfem { n_sc: 4 }).unwrap();
        build_cells(&mesh, Kernel::Fem).unwrap();
    }

    #[test]
    fn footing_pad_nodes_sit_on_the_surface() {
        let mesh = footing(8.0, 5.0, 0.5, 4).unwrap();
        let pad = &mesh.node_sets["footing"];
        assert_eq!(pad.len(), 5);
        for &n in pad {
            assert_eq!(mesh.nodes[n].y, 0.0);
            assert!(mesh.nodes[n].x <= 0.5 + 1e-9);
        }
        let right = &mesh.node_sets["right"];
        for &n in right {
            assert_relative_eq!(mesh.nodes[n].x, 8.0, max_relative = 1e-12);
        }
        build_cells(&mesh, Kernel::Csfem { n_sc: 4 }).unwrap();
    }

    #[test]
    fn tunnel_mesh_has_crown_stages_and_snapped_corners() {
        let mesh = tunnel(10.0, 15.0, 5.0, 1.0, 8, 2, 6, 5).unwrap();
        let crown = mesh.node_sets["crown"][0];
        assert_relative_eq!(mesh.nodes[crown].x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(mesh.nodes[crown].y, -4.0, max_relative = 1e-12);

        let tunnel_set: Vec<usize> = mesh.element_sets["tunnel"].clone();
        let mut staged: Vec<usize> = (1..=5)
            .flat_map(|k| mesh.element_sets[&format!("stage{k}")].clone())
            .collect();
        staged.sort_unstable();
        assert_eq!(staged, tunnel_set, "stages must partition the tunnel set");
        for e in &tunnel_set {
            let c: f64 = mesh.elements[*e]
                .node_ids
                .iter()
                .map(|&n| {
                    let dx = mesh.nodes[n].x;
                    let dy = mesh.nodes[n].y + 5.0;
                    dx.hypot(dy)
                })
                .fold(0.0, f64::max);
            assert!(c <= 1.0 + 1e-9, "tunnel element {e} pokes outside the circle");
        }

        for corner in [[10.0, 0.0], [-10.0, 0.0], [10.0, -15.0], [-10.0, -15.0]] {
            assert!(
                mesh.nodes
                    .iter()
                    .any(|n| (n.x - corner[0]).abs() < 1e-9 && (n.y - corner[1]).abs() < 1e-9),
                "box corner {corner:?} must be a mesh node"
            );
        }
        for &n in mesh.node_sets["surface"].iter() {
            assert_relative_eq!(mesh.nodes[n].y, 0.0, epsilon = 1e-12);
        }
        for &n in mesh.node_sets["bottom"].iter() {
            assert_relative_eq!(mesh.nodes[n].y, -15.0, max_relative = 1e-12);
        }
        build_cells(&mesh, Kernel::Csfem { n_sc: 4 }).unwrap();
        build_cells(&mesh, Kernel::Fem).unwrap();
    }

    #[test]
    fn slope_snaps_crest_and_toe_columns() {
        let mesh = slope(10.0, 45.0, 5.0, 10.0, 15.0, 1.0).unwrap();
        let crest = mesh.node_sets["crest"][0];
        let toe = mesh.node_sets["toe"][0];
        assert_relative_eq!(mesh.nodes[crest].x, 10.0, max_relative = 1e-12);
        assert_relative_eq!(mesh.nodes[crest].y, 15.0, max_relative = 1e-12);
        assert_relative_eq!(mesh.nodes[toe].x, 20.0, max_relative = 1e-12);
        assert_relative_eq!(mesh.nodes[toe].y, 5.0, max_relative = 1e-12);
        for &n in mesh.node_sets["right"].iter() {
            assert!(mesh.nodes[n].y <= 5.0 + 1e-9);
        }
        build_cells(&mesh, Kernel::Csfem { n_sc: 4 }).unwrap();
    }
}
