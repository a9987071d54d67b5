//! Shared helpers for the integration suites: an independently coded
//! dense-quadrature oracle for the subcell-averaged strain operator, a
//! dense elastic reference solve, a strict VTK legacy reader, and random
//! geometry utilities.
//!
//! The oracle paths must stay clear of the crate's own quadrature tables
//! and shape-derivative code; they reimplement the math from scratch so
//! agreement with the production operators is a real cross-check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use geosmooth::casefile::{CaseDefinition, MeshSource};
use geosmooth::constitutive::elastic_tangent;
use geosmooth::drivers::builtin_case;
use geosmooth::solver::{dof, System};
use nalgebra::{DMatrix, DVector, SMatrix};
use rand::Rng;
use tempfile::TempDir;

/// Builtin case redirected into a fresh temporary output directory.
pub fn sandboxed(name: &str) -> (CaseDefinition, TempDir) {
    let dir = TempDir::new().expect("temporary output directory");
    let mut case = builtin_case(name).expect("builtin case");
    case.output.directory = dir.path().to_string_lossy().into_owned();
    (case, dir)
}

/// Overrides one argument of a case's generator mesh.
pub fn set_gen_arg(case: &mut CaseDefinition, key: &str, value: f64) {
    let MeshSource::Generator { args, .. } = &mut case.mesh else {
        panic!("case `{}` does not use a generator mesh", case.name);
    };
    args.insert(key.to_string(), value);
}

/// 8-point Gauss-Legendre rule on [-1, 1] as (abscissa, weight) pairs.
pub const GAUSS_8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.10122853629037626),
    (-0.7966664774136267, 0.22238103445337447),
    (-0.5255324099163290, 0.31370664587788729),
    (-0.1834346424956498, 0.36268378337836198),
    (0.1834346424956498, 0.36268378337836198),
    (0.5255324099163290, 0.31370664587788729),
    (0.7966664774136267, 0.22238103445337447),
    (0.9602898564975363, 0.10122853629037626),
];

/// Bilinear shape-function derivatives with respect to (xi, eta).
fn shape_deriv_nat(xi: f64, eta: f64) -> ([f64; 4], [f64; 4]) {
    (
        [
            -0.25 * (1.0 - eta),
            0.25 * (1.0 - eta),
            0.25 * (1.0 + eta),
            -0.25 * (1.0 + eta),
        ],
        [
            -0.25 * (1.0 - xi),
            -0.25 * (1.0 + xi),
            0.25 * (1.0 + xi),
            0.25 * (1.0 - xi),
        ],
    )
}

/// Natural-coordinate rectangles `[xi0, xi1, eta0, eta1]` of the smoothing
/// subcells, in the order the mesh module builds them. The bilinear map is
/// affine along iso-lines, so each rectangle maps exactly onto the
/// straight-sided physical subcell with the same index.
pub fn natural_rects(n_sc: u8) -> Vec<[f64; 4]> {
    match n_sc {
        1 => vec![[-1.0, 1.0, -1.0, 1.0]],
        2 => vec![[-1.0, 1.0, -1.0, 0.0], [-1.0, 1.0, 0.0, 1.0]],
        4 => vec![
            [-1.0, 0.0, -1.0, 0.0],
            [0.0, 1.0, -1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [-1.0, 0.0, 0.0, 1.0],
        ],
        other => panic!("unsupported subcell count {other}"),
    }
}

/// Dense-quadrature area average of the compatible strain-displacement
/// operator over one natural-coordinate rectangle of a quad: the ratio
/// `(integral of B det J) / (integral of det J)` on an 8x8 Gauss grid.
/// `B det J` is polynomial in (xi, eta), so the grid integrates both parts
/// exactly and the constant rectangle-to-square scale factor cancels.
pub fn dense_average_b(coords: &[[f64; 2]; 4], rect: [f64; 4]) -> SMatrix<f64, 3, 8> {
    let [xi0, xi1, eta0, eta1] = rect;
    let mut num = SMatrix::<f64, 3, 8>::zeros();
    let mut den = 0.0;
    for &(u, wu) in &GAUSS_8 {
        for &(v, wv) in &GAUSS_8 {
            let xi = 0.5 * (xi0 + xi1) + 0.5 * (xi1 - xi0) * u;
            let eta = 0.5 * (eta0 + eta1) + 0.5 * (eta1 - eta0) * v;
            let (dxi, deta) = shape_deriv_nat(xi, eta);
            let (mut x_xi, mut y_xi, mut x_eta, mut y_eta) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..4 {
                x_xi += dxi[k] * coords[k][0];
                y_xi += dxi[k] * coords[k][1];
                x_eta += deta[k] * coords[k][0];
                y_eta += deta[k] * coords[k][1];
            }
            let w = wu * wv;
            for k in 0..4 {
                let bx = y_eta * dxi[k] - y_xi * deta[k];
                let by = -x_eta * dxi[k] + x_xi * deta[k];
                num[(0, 2 * k)] += w * bx;
                num[(1, 2 * k + 1)] += w * by;
                num[(2, 2 * k)] += w * by;
                num[(2, 2 * k + 1)] += w * bx;
            }
            den += w * (x_xi * y_eta - y_xi * x_eta);
        }
    }
    num / den
}

/// Dense elastic reference solve: assembles the full stiffness of the
/// system's active cells with nalgebra, eliminates the constrained DOFs
/// (prescribed values may be nonzero), and solves with a dense LU.
pub fn dense_elastic_solve(
    system: &System,
    constraints: &BTreeMap<usize, f64>,
    p: &[f64],
) -> Vec<f64> {
    let n = 2 * system.mesh.nodes.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for elem in system.mesh.elements.iter().filter(|e| e.active) {
        let d_el = elastic_tangent(&system.material_of(elem.id).elastic)
            .expect("elastic tangent")
            .in_plane;
        let mut k_e = SMatrix::<f64, 8, 8>::zeros();
        for ci in system.offsets[elem.id]..system.offsets[elem.id + 1] {
            let cell = &system.cells[ci];
            k_e += cell.b.transpose() * d_el * cell.b * cell.weight;
        }
        let mut g = [0usize; 8];
        for kk in 0..4 {
            g[2 * kk] = dof(elem.node_ids[kk], 0);
            g[2 * kk + 1] = dof(elem.node_ids[kk], 1);
        }
        for r in 0..8 {
            for c in 0..8 {
                k[(g[r], g[c])] += k_e[(r, c)];
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|g| !constraints.contains_key(g)).collect();
    let nf = free.len();
    let mut kff = DMatrix::<f64>::zeros(nf, nf);
    let mut rhs = DVector::<f64>::zeros(nf);
    for (i, &gi) in free.iter().enumerate() {
        rhs[i] = p[gi];
        for (&gc, &val) in constraints {
            rhs[i] -= k[(gi, gc)] * val;
        }
        for (j, &gj) in free.iter().enumerate() {
            kff[(i, j)] = k[(gi, gj)];
        }
    }
    let sol = kff.lu().solve(&rhs).expect("dense reference solve");
    let mut d = vec![0.0; n];
    for (&g, &v) in constraints {
        d[g] = v;
    }
    for (i, &g) in free.iter().enumerate() {
        d[g] = sol[i];
    }
    d
}

/// Random convex quadrilateral: unit-square corners perturbed by up to
/// 0.25, then rotated and scaled. The perturbation boxes are disjoint by a
/// 0.5 margin, so the result cannot fold.
pub fn random_quad<R: Rng>(rng: &mut R) -> [[f64; 2]; 4] {
    let base = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let scale = rng.gen_range(0.5..2.0);
    let (s, c) = angle.sin_cos();
    let mut out = [[0.0; 2]; 4];
    for k in 0..4 {
        let x = base[k][0] + rng.gen_range(-0.25..0.25);
        let y = base[k][1] + rng.gen_range(-0.25..0.25);
        out[k] = [scale * (c * x - s * y), scale * (s * x + c * y)];
    }
    out
}

/// A parsed VTK legacy ASCII unstructured grid.
#[derive(Debug, Default)]
pub struct VtkGrid {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u32>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 3]>>,
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
}

fn parse_floats(line: &str, want: usize) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
    match vals {
        Ok(v) if v.len() == want => Ok(v),
        Ok(v) => Err(format!("expected {want} values, got {} in `{line}`", v.len())),
        Err(e) => Err(format!("bad number in `{line}`: {e}")),
    }
}

struct Cursor<'a> {
    lines: Vec<&'a str>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, String> {
        let line = self
            .lines
            .get(self.at)
            .copied()
            .ok_or_else(|| format!("file ended before {what}"))?;
        self.at += 1;
        Ok(line)
    }

    fn exhausted(&self) -> bool {
        self.at >= self.lines.len()
    }
}

/// Strict reader for the VTK legacy ASCII unstructured-grid format. Every
/// structural deviation a conforming loader would warn about (bad counts,
/// unknown cell types, out-of-range connectivity, trailing content) is an
/// error here.
pub fn read_vtk(text: &str) -> Result<VtkGrid, String> {
    let mut cur = Cursor {
        lines: text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect(),
        at: 0,
    };

    let header = cur.next("the version header")?;
    let version = header
        .strip_prefix("# vtk DataFile Version ")
        .ok_or_else(|| format!("bad header `{header}`"))?;
    version
        .parse::<f64>()
        .map_err(|_| format!("bad version `{version}`"))?;
    let title = cur.next("the title")?;
    if title.len() > 256 {
        return Err("title exceeds 256 characters".into());
    }
    if cur.next("the format line")? != "ASCII" {
        return Err("expected ASCII format".into());
    }
    if cur.next("the dataset line")? != "DATASET UNSTRUCTURED_GRID" {
        return Err("expected DATASET UNSTRUCTURED_GRID".into());
    }

    let mut grid = VtkGrid::default();
    let points_line = cur.next("POINTS")?;
    let mut tok = points_line.split_whitespace();
    if tok.next() != Some("POINTS") {
        return Err(format!("expected POINTS, got `{points_line}`"));
    }
    let n_points: usize = tok
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("bad POINTS count")?;
    match tok.next() {
        Some("float") | Some("double") => {}
        other => return Err(format!("bad POINTS type {other:?}")),
    }
    for _ in 0..n_points {
        let v = parse_floats(cur.next("a point")?, 3)?;
        grid.points.push([v[0], v[1], v[2]]);
    }

    let cells_line = cur.next("CELLS")?;
    let mut tok = cells_line.split_whitespace();
    if tok.next() != Some("CELLS") {
        return Err(format!("expected CELLS, got `{cells_line}`"));
    }
    let n_cells: usize = tok
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("bad CELLS count")?;
    let list_size: usize = tok
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("bad CELLS list size")?;
    let mut consumed = 0usize;
    for _ in 0..n_cells {
        let row: Vec<usize> = cur.next("a cell")?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| format!("bad index: {e}")))
            .collect::<Result<_, _>>()?;
        if row.is_empty() || row[0] != row.len() - 1 {
            return Err("cell row count does not match its indices".into());
        }
        if row[1..].iter().any(|&i| i >= n_points) {
            return Err("cell references a point out of range".into());
        }
        consumed += row.len();
        grid.cells.push(row[1..].to_vec());
    }
    if consumed != list_size {
        return Err(format!(
            "CELLS declares {list_size} list entries but rows hold {consumed}"
        ));
    }

    let types_line = cur.next("CELL_TYPES")?;
    let mut tok = types_line.split_whitespace();
    if tok.next() != Some("CELL_TYPES") {
        return Err(format!("expected CELL_TYPES, got `{types_line}`"));
    }
    let n_types: usize = tok
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("bad CELL_TYPES count")?;
    if n_types != n_cells {
        return Err("CELL_TYPES count differs from CELLS count".into());
    }
    for i in 0..n_cells {
        let t: u32 = cur.next("a cell type")?
            .trim()
            .parse()
            .map_err(|e| format!("bad cell type: {e}"))?;
        let expected_nodes = match t {
            5 => 3,
            9 => 4,
            12 => 8,
            _ => return Err(format!("unsupported cell type {t}")),
        };
        if grid.cells[i].len() != expected_nodes {
            return Err(format!(
                "cell {i} has {} points but type {t} needs {expected_nodes}",
                grid.cells[i].len()
            ));
        }
        grid.cell_types.push(t);
    }

    let mut section: Option<(bool, usize)> = None;
    while !cur.exhausted() {
        let line = cur.next("an attribute section")?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("POINT_DATA") => {
                let n: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or("bad POINT_DATA count")?;
                if n != n_points {
                    return Err("POINT_DATA count differs from POINTS".into());
                }
                section = Some((true, n));
            }
            Some("CELL_DATA") => {
                let n: usize = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or("bad CELL_DATA count")?;
                if n != n_cells {
                    return Err("CELL_DATA count differs from CELLS".into());
                }
                section = Some((false, n));
            }
            Some("VECTORS") => {
                let (_, n) = section.ok_or("VECTORS before POINT_DATA/CELL_DATA")?;
                let name = tok.next().ok_or("VECTORS without a name")?.to_string();
                let mut values = Vec::with_capacity(n);
                for _ in 0..n {
                    let v = parse_floats(cur.next("a vector tuple")?, 3)?;
                    values.push([v[0], v[1], v[2]]);
                }
                grid.point_vectors.insert(name, values);
            }
            Some("SCALARS") => {
                let (_, n) = section.ok_or("SCALARS before POINT_DATA/CELL_DATA")?;
                let name = tok.next().ok_or("SCALARS without a name")?.to_string();
                if cur.next("LOOKUP_TABLE")? != "LOOKUP_TABLE default" {
                    return Err("SCALARS without LOOKUP_TABLE default".into());
                }
                let mut values = Vec::with_capacity(n);
                for _ in 0..n {
                    values.push(parse_floats(cur.next("a scalar")?, 1)?[0]);
                }
                grid.cell_scalars.insert(name, values);
            }
            other => return Err(format!("unexpected content {other:?} in `{line}`")),
        }
    }
    Ok(grid)
}
