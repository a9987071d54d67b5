//! Case-file parsing and writing.
//!
//! A case file is a line-oriented text document that names a driver, a
//! mesh source, materials, boundary conditions, loads, and solver/output
//! settings. The grammar (documented in the README) is:
//!
//! ```text
//! case <name>
//! driver <static|cylinder|biaxial|footing|tunnel|slope>
//! mesh generator <name> <key>=<value> ...
//! mesh file <path>
//! material <name>
//!   e <Pa>  nu <->  gamma <N/m3>
//!   c <Pa>  phi_deg <deg>  psi_deg <deg>  h <Pa>   (strength, optional)
//! end
//! fix <node_set> <x|y|xy>
//! load pressure <node_set> <Pa>
//! load traction <node_set> <tx> <ty>
//! load gravity <scale>
//! load displace_x <node_set> <m>
//! load displace_y <node_set> <m>
//! geostatic auto
//! geostatic k0 <ratio>
//! schedule increments <n>
//! param <key> <value> [<value> ...]
//! solver
//!   kernel <csfem|fem>  n_sc <1|2|4>  tol_r <->  max_iter <n>
//! end
//! output
//!   directory <path>  vtk <on|off>  csv <on|off>
//! end
//! ```
//!
//! `#` starts a comment; keys are one per line. Parsing fills every
//! default, so `parse_case(write_case(defn))` reproduces `defn` exactly.
//! Angles are degrees in the file and in [`StrengthDef`]; they are
//! converted to radians only when solver materials are built.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::constitutive::{ElasticParams, MohrCoulombParams};
use crate::error::{Error, Result};
use crate::generators;
use crate::mesh::Mesh;
use crate::smoothing::Kernel;
use crate::solver::Material;

/// Benchmark procedure selected by a case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    /// Generic single-schedule run of the declared loads.
    Static,
    Cylinder,
    Biaxial,
    Footing,
    Tunnel,
    Slope,
}

impl Driver {
    /// Case-file spelling.
    pub fn name(self) -> &'static str {
        match self {
            Driver::Static => "static",
            Driver::Cylinder => "cylinder",
            Driver::Biaxial => "biaxial",
            Driver::Footing => "footing",
            Driver::Tunnel => "tunnel",
            Driver::Slope => "slope",
        }
    }

    fn parse(s: &str) -> Option<Driver> {
        Some(match s {
            "static" => Driver::Static,
            "cylinder" => Driver::Cylinder,
            "biaxial" => Driver::Biaxial,
            "footing" => Driver::Footing,
            "tunnel" => Driver::Tunnel,
            "slope" => Driver::Slope,
            _ => return None,
        })
    }
}

/// Where the analysis mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Built-in generator with named numeric arguments.
    Generator {
        name: String,
        args: BTreeMap<String, f64>,
    },
    /// Mesh file in the text format of the mesh module.
    File(String),
}

/// Mohr-Coulomb strength block; angles in degrees as written in the file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrengthDef {
    pub c: f64,
    pub phi_deg: f64,
    pub psi_deg: f64,
    pub h: f64,
}

/// One material block.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialDef {
    pub name: String,
    pub e: f64,
    pub nu: f64,
    pub gamma: f64,
    pub strength: Option<StrengthDef>,
}

impl MaterialDef {
    /// Builds the solver material (degrees to radians here).
    pub fn to_material(&self) -> Result<Material> {
        let material = Material {
            name: self.name.clone(),
            elastic: ElasticParams {
                e: self.e,
                nu: self.nu,
            },
            mc: self.strength.map(|s| MohrCoulombParams {
                c: s.c,
                phi: s.phi_deg.to_radians(),
                psi: s.psi_deg.to_radians(),
                h: s.h,
            }),
            gamma: self.gamma,
        };
        material.validate()?;
        Ok(material)
    }
}

/// One `fix` line: which components of a node set are pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FixDef {
    pub set: String,
    pub x: bool,
    pub y: bool,
}

/// One `load` line.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadDef {
    /// Uniform normal pressure on the boundary edges whose endpoints both
    /// belong to the set; positive pushes into the domain.
    Pressure { set: String, value: f64 },
    /// Constant traction vector on the same edge selection.
    Traction { set: String, tx: f64, ty: f64 },
    /// Gravity body force at the given scale of the material unit weights.
    Gravity { scale: f64 },
    /// Prescribed horizontal displacement ramp on a node set.
    DisplaceX { set: String, value: f64 },
    /// Prescribed vertical displacement ramp on a node set.
    DisplaceY { set: String, value: f64 },
}

/// Geostatic initialization mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeostaticDef {
    /// No initialization; analysis starts stress-free.
    None,
    /// K0 from each material's Poisson ratio.
    Auto,
    /// Explicit K0 ratio.
    K0(f64),
}

/// Solver settings as written.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverDef {
    pub kernel: String,
    pub n_sc: u8,
    pub tol_r: f64,
    pub max_iter: usize,
}

impl Default for SolverDef {
    fn default() -> Self {
        SolverDef {
            kernel: "csfem".to_string(),
            n_sc: 4,
            tol_r: 1e-6,
            max_iter: 50,
        }
    }
}

impl SolverDef {
    /// The integration kernel this block selects.
    pub fn kernel(&self) -> Result<Kernel> {
        match self.kernel.as_str() {
            "csfem" => Ok(Kernel::Csfem { n_sc: self.n_sc }),
            "fem" => Ok(Kernel::Fem),
            other => Err(Error::Config(format!(
                "unknown kernel `{other}` (expected csfem or fem)"
            ))),
        }
    }
}

/// Output settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDef {
    pub directory: String,
    pub vtk: bool,
    pub csv: bool,
}

/// A fully parsed case with all defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseDefinition {
    pub name: String,
    pub driver: Driver,
    pub mesh: MeshSource,
    pub materials: Vec<MaterialDef>,
    pub fixes: Vec<FixDef>,
    pub loads: Vec<LoadDef>,
    pub geostatic: GeostaticDef,
    pub increments: usize,
    pub params: BTreeMap<String, Vec<f64>>,
    pub solver: SolverDef,
    pub output: OutputDef,
}

impl CaseDefinition {
    /// Builds the mesh this case declares.
    pub fn build_mesh(&self) -> Result<Mesh> {
        match &self.mesh {
            MeshSource::File(path) => Mesh::read_file(Path::new(path)),
            MeshSource::Generator { name, args } => build_generator(name, args),
        }
    }

    /// Builds the solver material table in declaration order.
    pub fn build_materials(&self) -> Result<Vec<Material>> {
        self.materials.iter().map(|m| m.to_material()).collect()
    }

    /// Scalar driver parameter.
    pub fn param_scalar(&self, key: &str) -> Result<f64> {
        match self.params.get(key) {
            Some(v) if v.len() == 1 => Ok(v[0]),
            Some(v) => Err(Error::Config(format!(
                "param `{key}` must be a single value, got {} values",
                v.len()
            ))),
            None => Err(Error::Config(format!("case is missing param `{key}`"))),
        }
    }

    /// Scalar driver parameter with a default.
    pub fn param_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(_) => self.param_scalar(key),
        }
    }

    /// List-valued driver parameter.
    pub fn param_list(&self, key: &str) -> Result<&[f64]> {
        self.params
            .get(key)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Config(format!("case is missing param `{key}`")))
    }

    /// Semantic validation: materials build, the mesh builds, and every
    /// referenced node set exists.
    pub fn validate(&self) -> Result<Mesh> {
        if self.materials.is_empty() {
            return Err(Error::Config(format!(
                "case `{}` declares no materials",
                self.name
            )));
        }
        self.build_materials()?;
        self.solver.kernel()?;
        if self.increments == 0 {
            return Err(Error::Config("schedule increments must be >= 1".into()));
        }
        let mesh = self.build_mesh()?;
        for fix in &self.fixes {
            mesh.node_set(&fix.set).map_err(|_| {
                Error::Config(format!("fix references missing node set `{}`", fix.set))
            })?;
            if !(fix.x || fix.y) {
                return Err(Error::Config(format!(
                    "fix on `{}` constrains no components",
                    fix.set
                )));
            }
        }
        for load in &self.loads {
            let set = match load {
                LoadDef::Pressure { set, .. }
                | LoadDef::Traction { set, .. }
                | LoadDef::DisplaceX { set, .. }
                | LoadDef::DisplaceY { set, .. } => Some(set),
                LoadDef::Gravity { .. } => None,
            };
            if let Some(set) = set {
                mesh.node_set(set).map_err(|_| {
                    Error::Config(format!("load references missing node set `{set}`"))
                })?;
            }
        }
        Ok(mesh)
    }
}

/// Dispatches a `mesh generator` line to the generators module.
fn take_arg(residual: &mut BTreeMap<&str, f64>, name: &str, key: &str) -> Result<f64> {
    residual
        .remove(key)
        .ok_or_else(|| Error::Config(format!("generator `{name}` is missing `{key}`")))
}

fn take_count(residual: &mut BTreeMap<&str, f64>, name: &str, key: &str) -> Result<usize> {
    let v = take_arg(residual, name, key)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!(
            "generator argument `{key}` must be a non-negative integer, got {v}"
        )))
    }
}

pub fn build_generator(name: &str, args: &BTreeMap<String, f64>) -> Result<Mesh> {
    let mut res: BTreeMap<&str, f64> = args.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let mesh = match name {
        "rectangle" => {
            let x0 = res.remove("x0").unwrap_or(0.0);
            let y0 = res.remove("y0").unwrap_or(0.0);
            let (w, h) = (take_arg(&mut res, name, "width")?, take_arg(&mut res, name, "height")?);
            let nx = take_count(&mut res, name, "nx")?;
            let ny = take_count(&mut res, name, "ny")?;
            generators::rectangle(x0, y0, w, h, nx, ny)?
        }
        "annulus" => {
            let (ra, rb) = (take_arg(&mut res, name, "ra")?, take_arg(&mut res, name, "rb")?);
            let nr = take_count(&mut res, name, "nr")?;
            let nt = take_count(&mut res, name, "ntheta")?;
            generators::quarter_annulus(ra, rb, nr, nt)?
        }
        "footing" => {
            let (w, d) = (take_arg(&mut res, name, "width")?, take_arg(&mut res, name, "depth")?);
            let hw = take_arg(&mut res, name, "half_width")?;
            let n = take_count(&mut res, name, "n_under")?;
            generators::footing(w, d, hw, n)?
        }
        "tunnel" => {
            let hw = take_arg(&mut res, name, "half_width")?;
            let h = take_arg(&mut res, name, "height")?;
            let cover = take_arg(&mut res, name, "cover")?;
            let radius = take_arg(&mut res, name, "radius")?;
            let nq = take_count(&mut res, name, "nq")?;
            let n_trans = take_count(&mut res, name, "n_trans")?;
            let n_out = take_count(&mut res, name, "n_out")?;
            let n_stages = take_count(&mut res, name, "n_stages")?;
            generators::tunnel(hw, h, cover, radius, nq, n_trans, n_out, n_stages)?
        }
        "slope" => {
            let h = take_arg(&mut res, name, "height")?;
            let angle = take_arg(&mut res, name, "angle_deg")?;
            let foundation = take_arg(&mut res, name, "foundation")?;
            let left = take_arg(&mut res, name, "reach_left")?;
            let right = take_arg(&mut res, name, "reach_right")?;
            let size = take_arg(&mut res, name, "size")?;
            generators::slope(h, angle, foundation, left, right, size)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown mesh generator `{other}` (expected rectangle, annulus, footing, \
                 tunnel, or slope)"
            )))
        }
    };
    if let Some(key) = res.keys().next() {
        return Err(Error::Config(format!(
            "generator `{name}` does not take argument `{key}`"
        )));
    }
    Ok(mesh)
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got `{tok}`"),
    })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a non-negative integer, got `{tok}`"),
    })
}

fn parse_on_off(tok: &str, line: usize) -> Result<bool> {
    match tok {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(Error::Parse {
            line,
            message: format!("expected on or off, got `{tok}`"),
        }),
    }
}

struct Cursor<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Cursor<'a> {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let stripped = match raw.find('#') {
                    Some(pos) => &raw[..pos],
                    None => raw,
                };
                let toks: Vec<&str> = stripped.split_whitespace().collect();
                if toks.is_empty() {
                    None
                } else {
                    Some((i + 1, toks))
                }
            })
            .collect();
        Cursor { lines, at: 0 }
    }

    fn next(&mut self) -> Option<(usize, &[&'a str])> {
        let item = self.lines.get(self.at)?;
        self.at += 1;
        Some((item.0, item.1.as_slice()))
    }
}

fn expect_args(toks: &[&str], n: usize, line: usize, usage: &str) -> Result<()> {
    if toks.len() != n {
        return Err(Error::Parse {
            line,
            message: format!("expected `{usage}`"),
        });
    }
    Ok(())
}

/// Parses a case from text. Every default is filled in, so the result
/// compares equal after a write/parse round trip; errors carry the
/// 1-based source line.
pub fn parse_case_str(text: &str) -> Result<CaseDefinition> {
    let mut cursor = Cursor::new(text);
    let mut name: Option<String> = None;
    let mut driver: Option<Driver> = None;
    let mut mesh: Option<MeshSource> = None;
    let mut materials = Vec::new();
    let mut fixes = Vec::new();
    let mut loads = Vec::new();
    let mut geostatic = GeostaticDef::None;
    let mut increments = 10usize;
    let mut params: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut solver: Option<SolverDef> = None;
    let mut output: Option<OutputDef> = None;

    while let Some((line, toks)) = cursor.next() {
        match toks[0] {
            "case" => {
                expect_args(toks, 2, line, "case <name>")?;
                name = Some(toks[1].to_string());
            }
            "driver" => {
                expect_args(toks, 2, line, "driver <name>")?;
                driver = Some(Driver::parse(toks[1]).ok_or(Error::Parse {
                    line,
                    message: format!(
                        "unknown driver `{}` (expected static, cylinder, biaxial, footing, \
                         tunnel, or slope)",
                        toks[1]
                    ),
                })?);
            }
            "mesh" => {
                mesh = Some(parse_mesh_line(toks, line)?);
            }
            "material" => {
                expect_args(toks, 2, line, "material <name>")?;
                materials.push(parse_material_block(toks[1], &mut cursor, line)?);
            }
            "fix" => {
                if toks.len() < 3 {
                    return Err(Error::Parse {
                        line,
                        message: "expected `fix <node_set> <x|y|xy>`".to_string(),
                    });
                }
                let mut fix = FixDef {
                    set: toks[1].to_string(),
                    x: false,
                    y: false,
                };
                for &comp in &toks[2..] {
                    match comp {
                        "x" => fix.x = true,
                        "y" => fix.y = true,
                        "xy" => {
                            fix.x = true;
                            fix.y = true;
                        }
                        _ => {
                            return Err(Error::Parse {
                                line,
                                message: format!("unknown fix component `{comp}`"),
                            })
                        }
                    }
                }
                fixes.push(fix);
            }
            "load" => {
                loads.push(parse_load_line(toks, line)?);
            }
            "geostatic" => {
                geostatic = match toks[1..] {
                    ["auto"] => GeostaticDef::Auto,
                    ["k0", v] => GeostaticDef::K0(parse_f64(v, line)?),
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: "expected `geostatic auto` or `geostatic k0 <ratio>`"
                                .to_string(),
                        })
                    }
                };
            }
            "schedule" => {
                expect_args(toks, 3, line, "schedule increments <n>")?;
                if toks[1] != "increments" {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown schedule key `{}`", toks[1]),
                    });
                }
                increments = parse_usize(toks[2], line)?;
            }
            "param" => {
                if toks.len() < 3 {
                    return Err(Error::Parse {
                        line,
                        message: "expected `param <key> <value>...`".to_string(),
                    });
                }
                let values: Result<Vec<f64>> =
                    toks[2..].iter().map(|t| parse_f64(t, line)).collect();
                params.insert(toks[1].to_string(), values?);
            }
            "solver" => {
                expect_args(toks, 1, line, "solver")?;
                solver = Some(parse_solver_block(&mut cursor, line)?);
            }
            "output" => {
                expect_args(toks, 1, line, "output")?;
                output = Some(parse_output_block(&mut cursor, line)?);
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown directive `{other}`"),
                })
            }
        }
    }

    let name = name.ok_or(Error::Parse {
        line: 0,
        message: "case file is missing the `case <name>` line".to_string(),
    })?;
    let case = CaseDefinition {
        driver: driver.ok_or(Error::Parse {
            line: 0,
            message: "case file is missing the `driver` line".to_string(),
        })?,
        mesh: mesh.ok_or(Error::Parse {
            line: 0,
            message: "case file is missing the `mesh` line".to_string(),
        })?,
        materials,
        fixes,
        loads,
        geostatic,
        increments,
        params,
        solver: solver.unwrap_or_default(),
        output: output.unwrap_or(OutputDef {
            directory: format!("out/{name}"),
            vtk: true,
            csv: true,
        }),
        name,
    };
    Ok(case)
}

fn parse_mesh_line(toks: &[&str], line: usize) -> Result<MeshSource> {
    match toks.get(1) {
        Some(&"file") => {
            expect_args(toks, 3, line, "mesh file <path>")?;
            Ok(MeshSource::File(toks[2].to_string()))
        }
        Some(&"generator") => {
            if toks.len() < 3 {
                return Err(Error::Parse {
                    line,
                    message: "expected `mesh generator <name> <key>=<value>...`".to_string(),
                });
            }
            let mut args = BTreeMap::new();
            for &pair in &toks[3..] {
                let (k, v) = pair.split_once('=').ok_or(Error::Parse {
                    line,
                    message: format!("expected <key>=<value>, got `{pair}`"),
                })?;
                args.insert(k.to_string(), parse_f64(v, line)?);
            }
            Ok(MeshSource::Generator {
                name: toks[2].to_string(),
                args,
            })
        }
        _ => Err(Error::Parse {
            line,
            message: "expected `mesh generator ...` or `mesh file <path>`".to_string(),
        }),
    }
}

fn parse_load_line(toks: &[&str], line: usize) -> Result<LoadDef> {
    match toks.get(1) {
        Some(&"pressure") => {
            expect_args(toks, 4, line, "load pressure <node_set> <value>")?;
            Ok(LoadDef::Pressure {
                set: toks[2].to_string(),
                value: parse_f64(toks[3], line)?,
            })
        }
        Some(&"traction") => {
            expect_args(toks, 5, line, "load traction <node_set> <tx> <ty>")?;
            Ok(LoadDef::Traction {
                set: toks[2].to_string(),
                tx: parse_f64(toks[3], line)?,
                ty: parse_f64(toks[4], line)?,
            })
        }
        Some(&"gravity") => {
            expect_args(toks, 3, line, "load gravity <scale>")?;
            Ok(LoadDef::Gravity {
                scale: parse_f64(toks[2], line)?,
            })
        }
        Some(&"displace_x") => {
            expect_args(toks, 4, line, "load displace_x <node_set> <value>")?;
            Ok(LoadDef::DisplaceX {
                set: toks[2].to_string(),
                value: parse_f64(toks[3], line)?,
            })
        }
        Some(&"displace_y") => {
            expect_args(toks, 4, line, "load displace_y <node_set> <value>")?;
            Ok(LoadDef::DisplaceY {
                set: toks[2].to_string(),
                value: parse_f64(toks[3], line)?,
            })
        }
        other => Err(Error::Parse {
            line,
            message: format!(
                "unknown load kind `{}` (expected pressure, traction, gravity, displace_x, \
                 or displace_y)",
                other.unwrap_or(&"")
            ),
        }),
    }
}

fn parse_material_block(
    name: &str,
    cursor: &mut Cursor<'_>,
    start_line: usize,
) -> Result<MaterialDef> {
    let mut e = None;
    let mut nu = None;
    let mut gamma = 0.0;
    let mut c = None;
    let mut phi = None;
    let mut psi = None;
    let mut h = None;
    loop {
        let Some((line, toks)) = cursor.next() else {
            return Err(Error::Parse {
                line: start_line,
                message: format!("material `{name}` block is missing its `end`"),
            });
        };
        if toks[0] == "end" {
            break;
        }
        expect_args(toks, 2, line, "<key> <value>")?;
        let value = parse_f64(toks[1], line)?;
        match toks[0] {
            "e" => e = Some(value),
            "nu" => nu = Some(value),
            "gamma" => gamma = value,
            "c" => c = Some(value),
            "phi_deg" => phi = Some(value),
            "psi_deg" => psi = Some(value),
            "h" => h = Some(value),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown material key `{other}`"),
                })
            }
        }
    }
    let strength = match (c, phi) {
        (None, None) => {
            if psi.is_some() || h.is_some() {
                return Err(Error::Parse {
                    line: start_line,
                    message: format!(
                        "material `{name}` sets psi_deg/h without c and phi_deg"
                    ),
                });
            }
            None
        }
        (Some(c), Some(phi_deg)) => Some(StrengthDef {
            c,
            phi_deg,
            psi_deg: psi.unwrap_or(0.0),
            h: h.unwrap_or(0.0),
        }),
        _ => {
            return Err(Error::Parse {
                line: start_line,
                message: format!("material `{name}` needs both c and phi_deg or neither"),
            })
        }
    };
    Ok(MaterialDef {
        name: name.to_string(),
        e: e.ok_or(Error::Parse {
            line: start_line,
            message: format!("material `{name}` is missing `e`"),
        })?,
        nu: nu.ok_or(Error::Parse {
            line: start_line,
            message: format!("material `{name}` is missing `nu`"),
        })?,
        gamma,
        strength,
    })
}

fn parse_solver_block(cursor: &mut Cursor<'_>, start_line: usize) -> Result<SolverDef> {
    let mut def = SolverDef::default();
    loop {
        let Some((line, toks)) = cursor.next() else {
            return Err(Error::Parse {
                line: start_line,
                message: "solver block is missing its `end`".to_string(),
            });
        };
        if toks[0] == "end" {
            break;
        }
        expect_args(toks, 2, line, "<key> <value>")?;
        match toks[0] {
            "kernel" => {
                if toks[1] != "csfem" && toks[1] != "fem" {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown kernel `{}`", toks[1]),
                    });
                }
                def.kernel = toks[1].to_string();
            }
            "n_sc" => def.n_sc = parse_usize(toks[1], line)? as u8,
            "tol_r" => def.tol_r = parse_f64(toks[1], line)?,
            "max_iter" => def.max_iter = parse_usize(toks[1], line)?,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown solver key `{other}`"),
                })
            }
        }
    }
    Ok(def)
}

fn parse_output_block(cursor: &mut Cursor<'_>, start_line: usize) -> Result<OutputDef> {
    let mut directory = None;
    let mut vtk = true;
    let mut csv = true;
    loop {
        let Some((line, toks)) = cursor.next() else {
            return Err(Error::Parse {
                line: start_line,
                message: "output block is missing its `end`".to_string(),
            });
        };
        if toks[0] == "end" {
            break;
        }
        expect_args(toks, 2, line, "<key> <value>")?;
        match toks[0] {
            "directory" => directory = Some(toks[1].to_string()),
            "vtk" => vtk = parse_on_off(toks[1], line)?,
            "csv" => csv = parse_on_off(toks[1], line)?,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown output key `{other}`"),
                })
            }
        }
    }
    Ok(OutputDef {
        directory: directory.ok_or(Error::Parse {
            line: start_line,
            message: "output block is missing `directory`".to_string(),
        })?,
        vtk,
        csv,
    })
}

/// Reads and parses a case file.
pub fn parse_case(path: &Path) -> Result<CaseDefinition> {
    let text = std::fs::read_to_string(path)?;
    parse_case_str(&text)
}

/// Writes a case back to its text form (canonical key order, all defaults
/// explicit).
pub fn write_case(case: &CaseDefinition) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "case {}", case.name);
    let _ = writeln!(w, "driver {}", case.driver.name());
    match &case.mesh {
        MeshSource::File(path) => {
            let _ = writeln!(w, "mesh file {path}");
        }
        MeshSource::Generator { name, args } => {
            let _ = write!(w, "mesh generator {name}");
            for (k, v) in args {
                let _ = write!(w, " {k}={v}");
            }
            let _ = writeln!(w);
        }
    }
    for m in &case.materials {
        let _ = writeln!(w, "material {}", m.name);
        let _ = writeln!(w, "  e {}", m.e);
        let _ = writeln!(w, "  nu {}", m.nu);
        let _ = writeln!(w, "  gamma {}", m.gamma);
        if let Some(s) = &m.strength {
            let _ = writeln!(w, "  c {}", s.c);
            let _ = writeln!(w, "  phi_deg {}", s.phi_deg);
            let _ = writeln!(w, "  psi_deg {}", s.psi_deg);
            let _ = writeln!(w, "  h {}", s.h);
        }
        let _ = writeln!(w, "end");
    }
    for f in &case.fixes {
        let comp = match (f.x, f.y) {
            (true, true) => "xy",
            (true, false) => "x",
            (false, true) => "y",
            (false, false) => "xy",
        };
        let _ = writeln!(w, "fix {} {comp}", f.set);
    }
    for load in &case.loads {
        match load {
            LoadDef::Pressure { set, value } => {
                let _ = writeln!(w, "load pressure {set} {value}");
            }
            LoadDef::Traction { set, tx, ty } => {
                let _ = writeln!(w, "load traction {set} {tx} {ty}");
            }
            LoadDef::Gravity { scale } => {
                let _ = writeln!(w, "load gravity {scale}");
            }
            LoadDef::DisplaceX { set, value } => {
                let _ = writeln!(w, "load displace_x {set} {value}");
            }
            LoadDef::DisplaceY { set, value } => {
                let _ = writeln!(w, "load displace_y {set} {value}");
            }
        }
    }
    match case.geostatic {
        GeostaticDef::None => {}
        GeostaticDef::Auto => {
            let _ = writeln!(w, "geostatic auto");
        }
        GeostaticDef::K0(r) => {
            let _ = writeln!(w, "geostatic k0 {r}");
        }
    }
    let _ = writeln!(w, "schedule increments {}", case.increments);
    for (key, values) in &case.params {
        let _ = write!(w, "param {key}");
        for v in values {
            let _ = write!(w, " {v}");
        }
        let _ = writeln!(w);
    }
    let _ = writeln!(w, "solver");
    let _ = writeln!(w, "  kernel {}", case.solver.kernel);
    let _ = writeln!(w, "  n_sc {}", case.solver.n_sc);
    let _ = writeln!(w, "  tol_r {}", case.solver.tol_r);
    let _ = writeln!(w, "  max_iter {}", case.solver.max_iter);
    let _ = writeln!(w, "end");
    let _ = writeln!(w, "output");
    let _ = writeln!(w, "  directory {}", case.output.directory);
    let _ = writeln!(w, "  vtk {}", if case.output.vtk { "on" } else { "off" });
    let _ = writeln!(w, "  csv {}", if case.output.csv { "on" } else { "off" });
    let _ = writeln!(w, "end");
    out
}
