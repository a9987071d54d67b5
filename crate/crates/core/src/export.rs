//! Result export: VTK legacy ASCII unstructured grids and RFC 4180 CSV.
//!
//! Field ordering, number formatting, and iteration order are all fixed,
//! so exporting the same state twice produces byte-identical files.
//! Stress, plastic-strain magnitude, and yield state are exported per
//! element as area-weighted averages over the element's integration
//! cells; displacements are exported per node.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector4;

use crate::error::Result;
use crate::solver::{dof, System};

/// Per-element averages of the cell fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementAverage {
    /// Area-weighted mean stress `(xx, yy, zz, xy)`, Pa.
    pub stress: Vector4<f64>,
    /// Area-weighted mean plastic-strain magnitude.
    pub plastic_strain: f64,
    /// Area fraction of the element currently on the yield surface.
    pub yield_fraction: f64,
    /// Whether the element is active.
    pub active: bool,
}

/// Computes the per-element averages of the committed state.
pub fn element_averages(system: &System) -> Vec<ElementAverage> {
    system
        .mesh
        .elements
        .iter()
        .map(|elem| {
            let range = system.offsets[elem.id]..system.offsets[elem.id + 1];
            let total: f64 = range.clone().map(|ci| system.cells[ci].weight).sum();
            let mut stress = Vector4::zeros();
            let mut plastic = 0.0;
            let mut yielded = 0.0;
            for ci in range {
                let w = system.cells[ci].weight / total;
                stress += system.states[ci].stress * w;
                plastic += system.states[ci].plastic_strain_magnitude() * w;
                if system.states[ci].yielded {
                    yielded += w;
                }
            }
            ElementAverage {
                stress,
                plastic_strain: plastic,
                yield_fraction: yielded,
                active: elem.active,
            }
        })
        .collect()
}

fn num(v: f64) -> String {
    format!("{v:.9e}")
}

/// Renders the VTK legacy ASCII unstructured-grid file for the committed
/// state.
pub fn vtk_string(system: &System, title: &str) -> String {
    let mesh = &system.mesh;
    let averages = element_averages(system);
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "# vtk DataFile Version 4.2");
    let _ = writeln!(w, "{title}");
    let _ = writeln!(w, "ASCII");
    let _ = writeln!(w, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(w, "POINTS {} double", mesh.nodes.len());
    for node in &mesh.nodes {
        let _ = writeln!(w, "{} {} 0", num(node.x), num(node.y));
    }
    let _ = writeln!(w, "CELLS {} {}", mesh.elements.len(), 5 * mesh.elements.len());
    for elem in &mesh.elements {
        let n = elem.node_ids;
        let _ = writeln!(w, "4 {} {} {} {}", n[0], n[1], n[2], n[3]);
    }
    let _ = writeln!(w, "CELL_TYPES {}", mesh.elements.len());
    for _ in &mesh.elements {
        let _ = writeln!(w, "9");
    }
    let _ = writeln!(w, "POINT_DATA {}", mesh.nodes.len());
    let _ = writeln!(w, "VECTORS displacement double");
    for node in &mesh.nodes {
        let ux = system.d[dof(node.id, 0)];
        let uy = system.d[dof(node.id, 1)];
        let _ = writeln!(w, "{} {} 0", num(ux), num(uy));
    }
    let _ = writeln!(w, "CELL_DATA {}", mesh.elements.len());
    let scalars: [(&str, Box<dyn Fn(&ElementAverage) -> f64>); 6] = [
        ("sigma_xx", Box::new(|a| a.stress[0])),
        ("sigma_yy", Box::new(|a| a.stress[1])),
        ("sigma_zz", Box::new(|a| a.stress[2])),
        ("sigma_xy", Box::new(|a| a.stress[3])),
        ("plastic_strain_magnitude", Box::new(|a| a.plastic_strain)),
        ("yield_fraction", Box::new(|a| a.yield_fraction)),
    ];
    for (name, get) in &scalars {
        let _ = writeln!(w, "SCALARS {name} double 1");
        let _ = writeln!(w, "LOOKUP_TABLE default");
        for a in &averages {
            let _ = writeln!(w, "{}", num(get(a)));
        }
    }
    let _ = writeln!(w, "SCALARS active int 1");
    let _ = writeln!(w, "LOOKUP_TABLE default");
    for a in &averages {
        let _ = writeln!(w, "{}", if a.active { 1 } else { 0 });
    }
    out
}

/// Writes the VTK file.
pub fn write_vtk(system: &System, title: &str, path: &Path) -> Result<()> {
    std::fs::write(path, vtk_string(system, title))?;
    Ok(())
}

fn csv_join(fields: &[String]) -> String {
    fields.join(",") + "\r\n"
}

/// Renders the per-node CSV (`node,x,y,ux,uy`).
pub fn nodes_csv_string(system: &System) -> String {
    let mut out = csv_join(&["node", "x", "y", "ux", "uy"].map(String::from));
    for node in &system.mesh.nodes {
        out += &csv_join(&[
            node.id.to_string(),
            num(node.x),
            num(node.y),
            num(system.d[dof(node.id, 0)]),
            num(system.d[dof(node.id, 1)]),
        ]);
    }
    out
}

/// Renders the per-cell CSV: one row per integration cell with its
/// location, stress, plastic-strain magnitude, yield and activity flags.
pub fn cells_csv_string(system: &System) -> String {
    let header = [
        "element",
        "cell",
        "x",
        "y",
        "sigma_xx",
        "sigma_yy",
        "sigma_zz",
        "sigma_xy",
        "plastic_strain_magnitude",
        "yielded",
        "active",
    ];
    let mut out = csv_join(&header.map(String::from));
    for elem in &system.mesh.elements {
        for (local, ci) in (system.offsets[elem.id]..system.offsets[elem.id + 1]).enumerate() {
            let cell = &system.cells[ci];
            let state = &system.states[ci];
            out += &csv_join(&[
                elem.id.to_string(),
                local.to_string(),
                num(cell.point[0]),
                num(cell.point[1]),
                num(state.stress[0]),
                num(state.stress[1]),
                num(state.stress[2]),
                num(state.stress[3]),
                num(state.plastic_strain_magnitude()),
                (state.yielded as u8).to_string(),
                (elem.active as u8).to_string(),
            ]);
        }
    }
    out
}

/// Writes both CSV field files next to each other: `<stem>_nodes.csv` and
/// `<stem>_cells.csv`.
pub fn write_field_csv(system: &System, directory: &Path, stem: &str) -> Result<()> {
    std::fs::write(
        directory.join(format!("{stem}_nodes.csv")),
        nodes_csv_string(system),
    )?;
    std::fs::write(
        directory.join(format!("{stem}_cells.csv")),
        cells_csv_string(system),
    )?;
    Ok(())
}

/// Writes a generic curve CSV with one header row; every data row must
/// match the header width.
pub fn write_curve_csv(path: &Path, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = csv_join(
        &headers
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<String>>(),
    );
    for row in rows {
        assert_eq!(row.len(), headers.len(), "curve row width mismatch");
        out += &csv_join(&row.iter().map(|v| num(*v)).collect::<Vec<String>>());
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;
    use crate::solver::{Material, SolveSettings};
    use crate::constitutive::ElasticParams;

    fn tiny_system() -> System {
        let mesh = generators::rectangle(0.0, 0.0, 1.0, 1.0, 2, 2).unwrap();
        let material = Material {
            name: "block".into(),
            elastic: ElasticParams { e: 1e4, nu: 0.25 },
            mc: None,
            gamma: 0.0,
        };
        System::new(mesh, vec![material], SolveSettings::default()).unwrap()
    }

    #[test]
    fn zero_state_exports_zero_displacement_tuples() {
        let system = tiny_system();
        let vtk = vtk_string(&system, "zero state");
        let displacement_lines: Vec<&str> = vtk
            .lines()
            .skip_while(|l| !l.starts_with("VECTORS displacement"))
            .skip(1)
            .take(system.mesh.nodes.len())
            .collect();
        assert_eq!(displacement_lines.len(), 9);
        for line in displacement_lines {
            assert_eq!(line, "0.000000000e0 0.000000000e0 0");
        }
    }

    #[test]
    fn re_export_is_byte_identical() {
        let system = tiny_system();
        assert_eq!(vtk_string(&system, "twice"), vtk_string(&system, "twice"));
        assert_eq!(nodes_csv_string(&system), nodes_csv_string(&system));
        assert_eq!(cells_csv_string(&system), cells_csv_string(&system));
    }

    #[test]
    fn vtk_sections_are_consistent() {
        let system = tiny_system();
        let vtk = vtk_string(&system, "structure");
        let lines: Vec<&str> = vtk.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 4.2");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert_eq!(lines[4], "POINTS 9 double");
        let cells_at = lines.iter().position(|l| l.starts_with("CELLS ")).unwrap();
        assert_eq!(lines[cells_at], "CELLS 4 20");
        let types_at = lines.iter().position(|l| l.starts_with("CELL_TYPES")).unwrap();
        for k in 1..=4 {
            assert_eq!(lines[types_at + k], "9");
        }
        assert!(lines.contains(&"SCALARS plastic_strain_magnitude double 1"));
        assert!(lines.contains(&"SCALARS yield_fraction double 1"));
    }

    #[test]
    fn csv_rows_are_crlf_terminated_with_fixed_width() {
        let system = tiny_system();
        let cells = cells_csv_string(&system);
        assert!(cells.ends_with("\r\n"));
        let rows: Vec<&str> = cells.trim_end().split("\r\n").collect();
        assert_eq!(rows.len(), 1 + 16, "header plus 4 cells x 4 elements");
        for row in &rows {
            assert_eq!(row.split(',').count(), 11);
        }
        let nodes = nodes_csv_string(&system);
        assert_eq!(nodes.trim_end().split("\r\n").count(), 10);
    }
}
