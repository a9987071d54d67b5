//! Mesh geometry, connectivity, and smoothing-cell construction.
//!
//! A mesh is a flat list of nodes and four-node quadrilaterals plus named
//! node/element sets used by boundary conditions, loads, and excavation
//! stages. Each element is subdivided into 1, 2, or 4 smoothing cells whose
//! boundary data (edge normals, lengths, and shape-function values at edge
//! midpoints) is everything the smoothed strain operator needs; no
//! isoparametric mapping is involved.
//!
//! Subcell construction uses nine sites per element: the 4 corners, the 4
//! edge midpoints, and the centroid. Shape-function values at these sites
//! are known constants for the bilinear quad. Values at subcell-edge
//! midpoints are arithmetic means of the endpoint values, which is exact
//! because every subcell edge is a straight segment lying on a line of
//! constant natural coordinate, along which the shape functions are linear.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quad4::polygon_area;

/// A mesh node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    /// Contiguous zero-based index.
    pub id: usize,
    /// Horizontal coordinate, m.
    pub x: f64,
    /// Vertical coordinate, m (gravity acts toward negative y).
    pub y: f64,
}

/// A four-node quadrilateral element with counterclockwise connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Quad4Element {
    /// Contiguous zero-based index.
    pub id: usize,
    /// Node indices in counterclockwise order.
    pub node_ids: [usize; 4],
    /// Birth-death state; inactive elements contribute nothing to the
    /// assembled system.
    pub active: bool,
    /// Index into the analysis material table.
    pub material_id: usize,
}

/// One straight boundary segment of a smoothing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcellEdge {
    /// Segment start point.
    pub start: [f64; 2],
    /// Segment end point.
    pub end: [f64; 2],
    /// Outward unit normal.
    pub normal: [f64; 2],
    /// Segment length, m.
    pub length: f64,
    /// The element's four nodal shape-function values at the segment
    /// midpoint.
    pub shape_values: [f64; 4],
}

/// A smoothing cell: one strain-smoothing domain inside an element.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingCell {
    /// Id of the element this cell subdivides.
    pub parent_element: usize,
    /// Cell corner points in counterclockwise order.
    pub vertices: Vec<[f64; 2]>,
    /// Boundary segments with outward normals and midpoint shape values.
    pub edges: Vec<SubcellEdge>,
    /// Cell area, m².
    pub area: f64,
}

/// An exterior element edge, used for traction loading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// End node indices, in the owning element's counterclockwise order.
    pub nodes: [usize; 2],
    /// The active element owning the edge.
    pub element: usize,
    /// Outward unit normal of the domain.
    pub normal: [f64; 2],
    /// Edge length, m.
    pub length: f64,
}

/// Mesh container: geometry, connectivity, and named sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    /// Nodes ordered by id.
    pub nodes: Vec<Node>,
    /// Elements ordered by id.
    pub elements: Vec<Quad4Element>,
    /// Named node index collections (boundary conditions, loads, probes).
    pub node_sets: BTreeMap<String, Vec<usize>>,
    /// Named element index collections (materials, excavation stages).
    pub element_sets: BTreeMap<String, Vec<usize>>,
}

/// Shape-function values at the nine subdivision sites of a quad:
/// corners 0-3, edge midpoints 4-7 (on edges 1-2, 2-3, 3-4, 4-1), and the
/// centroid 8.
const SITE_SHAPE: [[f64; 4]; 9] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0, 0.0],
    [0.0, 0.5, 0.5, 0.0],
    [0.0, 0.0, 0.5, 0.5],
    [0.5, 0.0, 0.0, 0.5],
    [0.25, 0.25, 0.25, 0.25],
];

/// Subcell corner indices into the nine sites, counterclockwise, for each
/// supported subdivision count.
const SUBCELLS_1: [[usize; 4]; 1] = [[0, 1, 2, 3]];
const SUBCELLS_2: [[usize; 4]; 2] = [[0, 1, 5, 7], [7, 5, 2, 3]];
const SUBCELLS_4: [[usize; 4]; 4] = [[0, 4, 8, 7], [4, 1, 5, 8], [8, 5, 2, 6], [7, 8, 6, 3]];

/// Centroid and edge midpoints of a quadrilateral.
///
/// The centroid is the arithmetic mean of the corners, which coincides with
/// the isoparametric image of the natural origin for the bilinear map.
/// Midpoint `i` lies on the edge from corner `i` to corner `i + 1`.
pub fn element_centroid_and_midpoints(coords: &[[f64; 2]; 4]) -> ([f64; 2], [[f64; 2]; 4]) {
    let mut centroid = [0.0; 2];
    let mut midpoints = [[0.0; 2]; 4];
    for k in 0..4 {
        let next = (k + 1) % 4;
        for c in 0..2 {
            centroid[c] += 0.25 * coords[k][c];
            midpoints[k][c] = 0.5 * (coords[k][c] + coords[next][c]);
        }
    }
    (centroid, midpoints)
}

/// Builds the smoothing cells of one element.
///
/// `n_sc` selects the subdivision: 1 (whole element), 2 (split through the
/// midpoints of opposite edges), or 4 (corners, edge midpoints, centroid).
pub fn build_subcells(
    element: &Quad4Element,
    coords: &[[f64; 2]; 4],
    n_sc: u8,
) -> Result<Vec<SmoothingCell>> {
    let parent_area = polygon_area(coords);
    if !(parent_area.is_finite() && parent_area > 0.0) {
        return Err(Error::Geometry(format!(
            "element {} has non-positive area {parent_area:.6e}",
            element.id
        )));
    }
    let tables: &[[usize; 4]] = match n_sc {
        1 => &SUBCELLS_1,
        2 => &SUBCELLS_2,
        4 => &SUBCELLS_4,
        other => {
            return Err(Error::Config(format!(
                "subcell count {other} not supported (choose 1, 2, or 4)"
            )))
        }
    };

    let (centroid, midpoints) = element_centroid_and_midpoints(coords);
    let mut sites = [[0.0; 2]; 9];
    sites[..4].copy_from_slice(coords);
    sites[4..8].copy_from_slice(&midpoints);
    sites[8] = centroid;

    let mut cells = Vec::with_capacity(tables.len());
    for table in tables {
        let vertices: Vec<[f64; 2]> = table.iter().map(|&s| sites[s]).collect();
        let area = polygon_area(&vertices);
        if !(area.is_finite() && area > 0.0) {
            return Err(Error::Geometry(format!(
                "element {} produces a subcell with non-positive area {area:.6e}",
                element.id
            )));
        }
        let mut edges = Vec::with_capacity(4);
        for i in 0..4 {
            let j = (i + 1) % 4;
            let (a, b) = (vertices[i], vertices[j]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let length = dx.hypot(dy);
            if length <= 0.0 {
                return Err(Error::Geometry(format!(
                    "element {} produces a zero-length subcell edge",
                    element.id
                )));
            }
            let mut shape_values = [0.0; 4];
            for k in 0..4 {
                shape_values[k] = 0.5 * (SITE_SHAPE[table[i]][k] + SITE_SHAPE[table[j]][k]);
            }
            edges.push(SubcellEdge {
                start: a,
                end: b,
                normal: [dy / length, -dx / length],
                length,
                shape_values,
            });
        }
        cells.push(SmoothingCell {
            parent_element: element.id,
            vertices,
            edges,
            area,
        });
    }
    Ok(cells)
}

impl Mesh {
    /// Corner coordinates of an element in connectivity order.
    pub fn element_coords(&self, element: &Quad4Element) -> [[f64; 2]; 4] {
        let mut coords = [[0.0; 2]; 4];
        for (k, &n) in element.node_ids.iter().enumerate() {
            coords[k] = [self.nodes[n].x, self.nodes[n].y];
        }
        coords
    }

    /// Looks up a node set, failing with the set name if it is missing.
    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Config(format!("unknown node set `{name}`")))
    }

    /// Looks up an element set, failing with the set name if it is missing.
    pub fn element_set(&self, name: &str) -> Result<&[usize]> {
        self.element_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Config(format!("unknown element set `{name}`")))
    }

    /// Checks structural invariants: contiguous ids, finite coordinates,
    /// in-range connectivity and set members, distinct element nodes, and
    /// positive element areas.
    pub fn validate(&self) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::Geometry(format!(
                    "node ids not contiguous: position {i} holds id {}",
                    node.id
                )));
            }
            if !(node.x.is_finite() && node.y.is_finite()) {
                return Err(Error::Geometry(format!("node {i} has non-finite coordinates")));
            }
        }
        for (i, elem) in self.elements.iter().enumerate() {
            if elem.id != i {
                return Err(Error::Geometry(format!(
                    "element ids not contiguous: position {i} holds id {}",
                    elem.id
                )));
            }
            for &n in &elem.node_ids {
                if n >= self.nodes.len() {
                    return Err(Error::Geometry(format!(
                        "element {i} references missing node {n}"
                    )));
                }
            }
            for a in 0..4 {
                for b in (a + 1)..4 {
                    if elem.node_ids[a] == elem.node_ids[b] {
                        return Err(Error::Geometry(format!(
                            "element {i} repeats node {}",
                            elem.node_ids[a]
                        )));
                    }
                }
            }
            let area = polygon_area(&self.element_coords(elem));
            if !(area.is_finite() && area > 0.0) {
                return Err(Error::Geometry(format!(
                    "element {i} has non-positive area {area:.6e} (check counterclockwise order)"
                )));
            }
        }
        for (name, members) in &self.node_sets {
            for &n in members {
                if n >= self.nodes.len() {
                    return Err(Error::Geometry(format!(
                        "node set `{name}` references missing node {n}"
                    )));
                }
            }
        }
        for (name, members) in &self.element_sets {
            for &e in members {
                if e >= self.elements.len() {
                    return Err(Error::Geometry(format!(
                        "element set `{name}` references missing element {e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exterior edges of the active part of the mesh, in deterministic
    /// element-then-local-edge order. An edge is exterior when exactly one
    /// active element uses it. Normals point out of the active domain.
    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for elem in self.elements.iter().filter(|e| e.active) {
            for i in 0..4 {
                let a = elem.node_ids[i];
                let b = elem.node_ids[(i + 1) % 4];
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut edges = Vec::new();
        for elem in self.elements.iter().filter(|e| e.active) {
            for i in 0..4 {
                let a = elem.node_ids[i];
                let b = elem.node_ids[(i + 1) % 4];
                if counts[&(a.min(b), a.max(b))] != 1 {
                    continue;
                }
                let (pa, pb) = (
                    [self.nodes[a].x, self.nodes[a].y],
                    [self.nodes[b].x, self.nodes[b].y],
                );
                let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                let length = dx.hypot(dy);
                edges.push(BoundaryEdge {
                    nodes: [a, b],
                    element: elem.id,
                    normal: [dy / length, -dx / length],
                    length,
                });
            }
        }
        edges
    }

    /// Parses the plain-text mesh format.
    ///
    /// The format is line-oriented and whitespace-delimited; `#` starts a
    /// comment. Blocks:
    ///
    /// ```text
    /// NODES <count>          # then `id x y` per line
    /// ELEMENTS <count>       # then `id n1 n2 n3 n4` per line
    /// NSET <name> <count>    # then <count> node indices, any line split
    /// ELSET <name> <count>   # then <count> element indices
    /// ```
    pub fn parse(src: &str) -> Result<Mesh> {
        let mut mesh = Mesh::default();
        let mut lines = src
            .lines()
            .enumerate()
            .map(|(i, raw)| {
                let text = raw.split('#').next().unwrap_or("").trim();
                (i + 1, text)
            })
            .filter(|(_, text)| !text.is_empty())
            .peekable();

        let parse_count = |line: usize, token: &str| -> Result<usize> {
            token.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("expected a count, got `{token}`"),
            })
        };

        while let Some((line, text)) = lines.next() {
            let mut tokens = text.split_whitespace();
            let keyword = tokens.next().unwrap();
            match keyword {
                "NODES" => {
                    let count = parse_count(
                        line,
                        tokens.next().ok_or(Error::Parse {
                            line,
                            message: "NODES requires a count".into(),
                        })?,
                    )?;
                    for _ in 0..count {
                        let (nline, ntext) = lines.next().ok_or(Error::Parse {
                            line,
                            message: "unexpected end of file inside NODES block".into(),
                        })?;
                        let fields: Vec<&str> = ntext.split_whitespace().collect();
                        if fields.len() != 3 {
                            return Err(Error::Parse {
                                line: nline,
                                message: format!(
                                    "node line needs `id x y`, got {} fields",
                                    fields.len()
                                ),
                            });
                        }
                        let id = parse_count(nline, fields[0])?;
                        let parse_f = |tok: &str| -> Result<f64> {
                            tok.parse::<f64>().map_err(|_| Error::Parse {
                                line: nline,
                                message: format!("invalid coordinate `{tok}`"),
                            })
                        };
                        mesh.nodes.push(Node {
                            id,
                            x: parse_f(fields[1])?,
                            y: parse_f(fields[2])?,
                        });
                    }
                }
                "ELEMENTS" => {
                    let count = parse_count(
                        line,
                        tokens.next().ok_or(Error::Parse {
                            line,
                            message: "ELEMENTS requires a count".into(),
                        })?,
                    )?;
                    for _ in 0..count {
                        let (eline, etext) = lines.next().ok_or(Error::Parse {
                            line,
                            message: "unexpected end of file inside ELEMENTS block".into(),
                        })?;
                        let fields: Vec<&str> = etext.split_whitespace().collect();
                        if fields.len() != 5 {
                            return Err(Error::Parse {
                                line: eline,
                                message: format!(
                                    "element line needs `id n1 n2 n3 n4`, got {} fields",
                                    fields.len()
                                ),
                            });
                        }
                        let mut vals = [0usize; 5];
                        for (slot, tok) in vals.iter_mut().zip(&fields) {
                            *slot = parse_count(eline, tok)?;
                        }
                        mesh.elements.push(Quad4Element {
                            id: vals[0],
                            node_ids: [vals[1], vals[2], vals[3], vals[4]],
                            active: true,
                            material_id: 0,
                        });
                    }
                }
                "NSET" | "ELSET" => {
                    let name = tokens
                        .next()
                        .ok_or(Error::Parse {
                            line,
                            message: format!("{keyword} requires a name"),
                        })?
                        .to_string();
                    let count = parse_count(
                        line,
                        tokens.next().ok_or(Error::Parse {
                            line,
                            message: format!("{keyword} requires a count"),
                        })?,
                    )?;
                    let mut members = Vec::with_capacity(count);
                    let mut pending: Vec<String> = tokens.map(str::to_string).collect();
                    let mut pending_line = line;
                    while members.len() < count {
                        if pending.is_empty() {
                            let (nline, ntext) = lines.next().ok_or(Error::Parse {
                                line,
                                message: format!(
                                    "unexpected end of file inside {keyword} `{name}`"
                                ),
                            })?;
                            pending = ntext.split_whitespace().map(str::to_string).collect();
                            pending_line = nline;
                        }
                        for tok in pending.drain(..) {
                            members.push(parse_count(pending_line, &tok)?);
                        }
                    }
                    if members.len() != count {
                        return Err(Error::Parse {
                            line: pending_line,
                            message: format!(
                                "{keyword} `{name}` lists {} indices, header says {count}",
                                members.len()
                            ),
                        });
                    }
                    let target = if keyword == "NSET" {
                        &mut mesh.node_sets
                    } else {
                        &mut mesh.element_sets
                    };
                    if target.insert(name.clone(), members).is_some() {
                        return Err(Error::Parse {
                            line,
                            message: format!("duplicate {keyword} `{name}`"),
                        });
                    }
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown keyword `{other}`"),
                    })
                }
            }
        }

        mesh.nodes.sort_by_key(|n| n.id);
        mesh.elements.sort_by_key(|e| e.id);
        mesh.validate()?;
        Ok(mesh)
    }

    /// Serializes to the plain-text mesh format parsed by [`Mesh::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NODES {}", self.nodes.len());
        for n in &self.nodes {
            let _ = writeln!(out, "{} {} {}", n.id, n.x, n.y);
        }
        let _ = writeln!(out, "ELEMENTS {}", self.elements.len());
        for e in &self.elements {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                e.id, e.node_ids[0], e.node_ids[1], e.node_ids[2], e.node_ids[3]
            );
        }
        for (name, members) in &self.node_sets {
            let _ = writeln!(out, "NSET {name} {}", members.len());
            write_index_block(&mut out, members);
        }
        for (name, members) in &self.element_sets {
            let _ = writeln!(out, "ELSET {name} {}", members.len());
            write_index_block(&mut out, members);
        }
        out
    }

    /// Reads and parses a mesh file.
    pub fn read_file(path: &Path) -> Result<Mesh> {
        let src = std::fs::read_to_string(path)?;
        Mesh::parse(&src)
    }

    /// Writes the mesh to a file in the plain-text format.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn write_index_block(out: &mut String, members: &[usize]) {
    for chunk in members.chunks(16) {
        let line: Vec<String> = chunk.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square_element() -> (Quad4Element, [[f64; 2]; 4]) {
        (
            Quad4Element {
                id: 0,
                node_ids: [0, 1, 2, 3],
                active: true,
                material_id: 0,
            },
            [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        )
    }

    /// A quadrilateral with a reflex corner; valid for smoothing cells even
    /// though conventional 2x2 quadrature would misbehave on it.
    const NONCONVEX: [[f64; 2]; 4] = [[0.0, 0.0], [2.0, 0.0], [0.9, 0.9], [0.0, 2.0]];

    #[test]
    fn centroid_and_midpoints_of_unit_square() {
        let (_, coords) = unit_square_element();
        let (c, m) = element_centroid_and_midpoints(&coords);
        assert_relative_eq!(c[0], 0.5);
        assert_relative_eq!(c[1], 0.5);
        assert_relative_eq!(m[0][0], 0.5);
        assert_relative_eq!(m[0][1], 0.0);
        assert_relative_eq!(m[3][0], 0.0);
        assert_relative_eq!(m[3][1], 0.5);
    }

    #[test]
    fn centroid_of_distorted_quad_is_corner_mean() {
        let coords = [[0.0, 0.0], [2.0, 0.0], [2.5, 1.5], [0.0, 1.0]];
        let (c, _) = element_centroid_and_midpoints(&coords);
        assert_relative_eq!(c[0], 1.125, epsilon = 1e-15);
        assert_relative_eq!(c[1], 0.625, epsilon = 1e-15);
    }

    #[test]
    fn centroid_scales_linearly() {
        let coords = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let (c, m) = element_centroid_and_midpoints(&coords);
        assert_relative_eq!(c[0], 1.0);
        assert_relative_eq!(c[1], 1.0);
        assert_relative_eq!(m[1][0], 2.0);
        assert_relative_eq!(m[1][1], 1.0);
    }

    #[test]
    fn four_subcells_of_unit_square_have_quarter_area() {
        let (elem, coords) = unit_square_element();
        let cells = build_subcells(&elem, &coords, 4).unwrap();
        assert_eq!(cells.len(), 4);
        for cell in &cells {
            assert_relative_eq!(cell.area, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn centroid_site_carries_quarter_shape_values() {
        let (elem, coords) = unit_square_element();
        let cells = build_subcells(&elem, &coords, 4).unwrap();
        // First subcell runs corner 0 -> midpoint -> centroid -> midpoint;
        // its second edge starts at the bottom midpoint and ends at the
        // centroid, so endpoint averaging must see (0.25, 0.25, 0.25, 0.25)
        // at the centroid endpoint.
        let edge = &cells[0].edges[1];
        let expected = [
            0.5 * (0.5 + 0.25),
            0.5 * (0.5 + 0.25),
            0.5 * 0.25,
            0.5 * 0.25,
        ];
        for k in 0..4 {
            assert_relative_eq!(edge.shape_values[k], expected[k], epsilon = 1e-15);
        }
        // The centroid vertex itself is shared by all four subcells.
        for cell in &cells {
            assert!(cell
                .vertices
                .iter()
                .any(|v| (v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15));
        }
    }

    #[test]
    fn single_subcell_matches_element_with_midpoint_values() {
        let (elem, coords) = unit_square_element();
        let cells = build_subcells(&elem, &coords, 1).unwrap();
        assert_eq!(cells.len(), 1);
        assert_relative_eq!(cells[0].area, 1.0, epsilon = 1e-15);
        let bottom = &cells[0].edges[0];
        assert_eq!(bottom.shape_values, [0.5, 0.5, 0.0, 0.0]);
        assert_relative_eq!(bottom.normal[0], 0.0);
        assert_relative_eq!(bottom.normal[1], -1.0);
    }

    #[test]
    fn subcell_partition_and_closure_hold_on_distorted_quads() {
        let quads = [
            [[0.0, 0.0], [2.0, 0.3], [1.9, 1.8], [-0.2, 1.4]],
            [[1.0, 1.0], [4.0, 0.5], [5.0, 3.5], [0.5, 2.5]],
            NONCONVEX,
        ];
        for coords in &quads {
            let elem = Quad4Element {
                id: 7,
                node_ids: [0, 1, 2, 3],
                active: true,
                material_id: 0,
            };
            let parent = polygon_area(coords);
            for n_sc in [1u8, 2, 4] {
                let cells = build_subcells(&elem, coords, n_sc).unwrap();
                assert_eq!(cells.len(), n_sc as usize);
                let total: f64 = cells.iter().map(|c| c.area).sum();
                assert_relative_eq!(total, parent, max_relative = 1e-12);
                for cell in &cells {
                    assert!(cell.area > 0.0);
                    let mut closure = [0.0; 2];
                    for edge in &cell.edges {
                        closure[0] += edge.length * edge.normal[0];
                        closure[1] += edge.length * edge.normal[1];
                        assert_relative_eq!(
                            edge.normal[0].hypot(edge.normal[1]),
                            1.0,
                            epsilon = 1e-12
                        );
                        let sum: f64 = edge.shape_values.iter().sum();
                        assert_relative_eq!(sum, 1.0, epsilon = 1e-15);
                    }
                    assert_relative_eq!(closure[0], 0.0, epsilon = 1e-12);
                    assert_relative_eq!(closure[1], 0.0, epsilon = 1e-12);
                    assert!(polygon_area(&cell.vertices) > 0.0);
                }
            }
        }
    }

    #[test]
    fn degenerate_and_misconfigured_subdivisions_fail() {
        let (elem, _) = unit_square_element();
        let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        assert!(matches!(
            build_subcells(&elem, &flat, 4),
            Err(Error::Geometry(_))
        ));
        let (_, coords) = unit_square_element();
        assert!(matches!(
            build_subcells(&elem, &coords, 3),
            Err(Error::Config(_))
        ));
    }

    fn two_element_strip() -> Mesh {
        let nodes = [
            (0.0, 0.0),
            (1.0, 0.0),
            (2.0, 0.0),
            (0.0, 1.0),
            (1.0, 1.0),
            (2.0, 1.0),
        ];
        Mesh {
            nodes: nodes
                .iter()
                .enumerate()
                .map(|(id, &(x, y))| Node { id, x, y })
                .collect(),
            elements: vec![
                Quad4Element {
                    id: 0,
                    node_ids: [0, 1, 4, 3],
                    active: true,
                    material_id: 0,
                },
                Quad4Element {
                    id: 1,
                    node_ids: [1, 2, 5, 4],
                    active: true,
                    material_id: 0,
                },
            ],
            node_sets: BTreeMap::from([("left".to_string(), vec![0, 3])]),
            element_sets: BTreeMap::from([("all".to_string(), vec![0, 1])]),
        }
    }

    #[test]
    fn boundary_edges_skip_shared_and_inactive() {
        let mut mesh = two_element_strip();
        let edges = mesh.boundary_edges();
        assert_eq!(edges.len(), 6);
        assert!(edges.iter().all(|e| {
            let (a, b) = (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]));
            (a, b) != (1, 4)
        }));
        mesh.elements[1].active = false;
        let edges = mesh.boundary_edges();
        assert_eq!(edges.len(), 4);
        assert!(edges.iter().any(|e| e.nodes == [1, 4]));
        let right = edges.iter().find(|e| e.nodes == [1, 4]).unwrap();
        assert_relative_eq!(right.normal[0], 1.0);
        assert_relative_eq!(right.normal[1], 0.0);
    }

    #[test]
    fn text_round_trip_preserves_everything() {
        let mesh = two_element_strip();
        let text = mesh.to_text();
        let back = Mesh::parse(&text).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let src = "NODES 1\n0 0.0 oops\n";
        match Mesh::parse(src) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let src = "SURPRISE 1\n";
        match Mesh::parse(src) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_accepts_comments_and_split_sets() {
        let src = "\
# strip of two elements
NODES 6
0 0 0
1 1 0
2 2 0
3 0 1
4 1 1
5 2 1
ELEMENTS 2
0 0 1 4 3
1 1 2 5 4
NSET left 2   # set spans lines
0
3
ELSET all 2
0 1
";
        let mesh = Mesh::parse(src).unwrap();
        assert_eq!(mesh.node_sets["left"], vec![0, 3]);
        assert_eq!(mesh.element_sets["all"], vec![0, 1]);
    }

    #[test]
    fn validate_rejects_bad_connectivity_and_sets() {
        let mut mesh = two_element_strip();
        mesh.elements[0].node_ids = [0, 1, 4, 99];
        assert!(matches!(mesh.validate(), Err(Error::Geometry(_))));

        let mut mesh = two_element_strip();
        mesh.elements[0].node_ids = [0, 1, 1, 3];
        assert!(matches!(mesh.validate(), Err(Error::Geometry(_))));

        let mut mesh = two_element_strip();
        mesh.node_sets.insert("bad".into(), vec![42]);
        assert!(matches!(mesh.validate(), Err(Error::Geometry(_))));

        let mut mesh = two_element_strip();
        mesh.elements[0].node_ids = [0, 3, 4, 1];
        assert!(matches!(mesh.validate(), Err(Error::Geometry(_))));
    }

    #[test]
    fn missing_sets_are_named_in_errors() {
        let mesh = two_element_strip();
        let err = mesh.node_set("nope").unwrap_err();
        assert!(err.to_string().contains("nope"));
        let err = mesh.element_set("nope").unwrap_err();
        assert!(err.to_string().contains("nope"));
    }
}
