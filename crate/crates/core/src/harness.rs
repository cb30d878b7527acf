//! Configuration-driven convergence studies and table output.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{data_norm, l2_errors, rate, triple_norm, ErrorReport};
use crate::assembly::{build_system, CornerStrategy, Formulation, Params};
use crate::error::{Error, Result};
use crate::io;
use crate::linsolve::solve;
use crate::mesh::{self, Domain, Mesh};
use crate::problems::{self, ProblemCase};

/// Which manufactured solution a study uses, written `square`,
/// `lshape:<n>`, `curved-l:<n>` or `rotation@<domain>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CaseSelector {
    Square,
    LShape(u32),
    CurvedL(u32),
    Rotation(Domain),
}

impl CaseSelector {
    pub fn domain(&self) -> Domain {
        match *self {
            CaseSelector::Square => Domain::Square,
            CaseSelector::LShape(_) => Domain::LShape,
            CaseSelector::CurvedL(_) => Domain::CurvedL,
            CaseSelector::Rotation(d) => d,
        }
    }

    pub fn build(&self, nu: f64) -> Result<ProblemCase> {
        match *self {
            CaseSelector::Square => problems::square_case(nu),
            CaseSelector::LShape(n) => problems::lshape_case(n, nu),
            CaseSelector::CurvedL(n) => problems::curved_l_case(n, nu),
            CaseSelector::Rotation(_) => problems::rotation_case(nu),
        }
    }
}

impl fmt::Display for CaseSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseSelector::Square => write!(f, "square"),
            CaseSelector::LShape(n) => write!(f, "lshape:{n}"),
            CaseSelector::CurvedL(n) => write!(f, "curved-l:{n}"),
            CaseSelector::Rotation(d) => write!(f, "rotation@{}", d.name()),
        }
    }
}

impl FromStr for CaseSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown case '{s}' (expected square, lshape:n, curved-l:n or rotation@domain)"));
        if s == "square" {
            return Ok(CaseSelector::Square);
        }
        if let Some(d) = s.strip_prefix("rotation@") {
            return Ok(CaseSelector::Rotation(d.parse().map_err(|_| bad())?));
        }
        let (name, n) = s.split_once(':').ok_or_else(bad)?;
        let n: u32 = n.parse().map_err(|_| bad())?;
        if !matches!(n, 1 | 2 | 4) {
            return Err(Error::Config(format!("case '{s}': n must be 1, 2 or 4")));
        }
        match name {
            "lshape" => Ok(CaseSelector::LShape(n)),
            "curved-l" => Ok(CaseSelector::CurvedL(n)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for CaseSelector {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CaseSelector> for String {
    fn from(c: CaseSelector) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFamily {
    /// Right-angled triangles, one diagonal per cell.
    Uniform,
    /// Four triangles per cell, both diagonals.
    Crisscross,
    /// Powell-Sabin split of a base mesh.
    PowellSabin,
    /// Criss-cross L mesh mapped onto the curved domain, without splitting.
    CurvedMapped,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 4] = [
        MeshFamily::Uniform,
        MeshFamily::Crisscross,
        MeshFamily::PowellSabin,
        MeshFamily::CurvedMapped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Uniform => "uniform",
            MeshFamily::Crisscross => "crisscross",
            MeshFamily::PowellSabin => "powell-sabin",
            MeshFamily::CurvedMapped => "curved-mapped",
        }
    }

    pub fn supports(self, domain: Domain) -> bool {
        match self {
            MeshFamily::Uniform | MeshFamily::Crisscross => domain != Domain::CurvedL,
            MeshFamily::PowellSabin => true,
            MeshFamily::CurvedMapped => domain == Domain::CurvedL,
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeshFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mesh family '{s}'")))
    }
}

/// Builds the mesh of `family` on `domain` at refinement level `level`
/// (number of cells across [-1, 1]).
///
/// Square PS refines the uniform mesh, L-shape PS the uniform L mesh; the
/// curved families map the criss-cross L mesh first.
pub fn build_mesh(family: MeshFamily, domain: Domain, level: usize) -> Result<Mesh> {
    if !family.supports(domain) {
        return Err(Error::Config(format!(
            "mesh family {family} is not available on the {} domain",
            domain.name()
        )));
    }
    match (family, domain) {
        (MeshFamily::Uniform, Domain::Square) => mesh::gen_square_uniform(level),
        (MeshFamily::Uniform, _) => mesh::gen_lshape_uniform(level),
        (MeshFamily::Crisscross, Domain::Square) => mesh::gen_square_crisscross(level),
        (MeshFamily::Crisscross, _) => mesh::gen_lshape(level),
        (MeshFamily::PowellSabin, Domain::Square) => mesh::powell_sabin_refine(&mesh::gen_square_uniform(level)?),
        (MeshFamily::PowellSabin, Domain::LShape) => mesh::powell_sabin_refine(&mesh::gen_lshape_uniform(level)?),
        (MeshFamily::PowellSabin, Domain::CurvedL) => {
            mesh::powell_sabin_refine(&mesh::map_to_curved_l(&mesh::gen_lshape(level)?)?)
        }
        (MeshFamily::CurvedMapped, _) => mesh::map_to_curved_l(&mesh::gen_lshape(level)?),
    }
}

/// Optional artefacts written to the output directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitFlags {
    pub csv: bool,
    pub markdown: bool,
    pub vtk: bool,
    pub matrixmarket: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    #[serde(default)]
    pub name: String,
    pub case: CaseSelector,
    pub family: MeshFamily,
    pub levels: Vec<usize>,
    pub params: Params,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit: EmitFlags,
}

impl StudyConfig {
    pub fn new(case: CaseSelector, family: MeshFamily, levels: Vec<usize>, params: Params) -> Self {
        StudyConfig {
            name: String::new(),
            case,
            family,
            levels,
            params,
            output_dir: None,
            emit: EmitFlags::default(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn label(&self) -> String {
        if self.name.is_empty() {
            format!("{} {} {}", self.case, self.family, formulation_name(&self.params))
        } else {
            self.name.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("levels must not be empty".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("levels must be strictly increasing, got {:?}", self.levels)));
        }
        if self.levels[0] == 0 {
            return Err(Error::Config("levels must be positive".into()));
        }
        if !self.family.supports(self.case.domain()) {
            return Err(Error::Config(format!(
                "mesh family {} is not available for case {}",
                self.family, self.case
            )));
        }
        self.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.emit != EmitFlags::default() && self.output_dir.is_none() {
            return Err(Error::Config("emit flags need an output_dir".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn formulation_name(p: &Params) -> String {
    match p.formulation {
        Formulation::GalerkinNitsche => "galerkin-nitsche".into(),
        Formulation::StabilisedNitsche => "stabilised-nitsche".into(),
        Formulation::StabilisedStrong => {
            let corner = match p.corner_strategy {
                CornerStrategy::BothZero => "both-zero",
                CornerStrategy::Free => "free",
                CornerStrategy::BisectorNormal => "bisector-normal",
            };
            format!("stabilised-strong/{corner}")
        }
    }
}

/// One refinement level of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub errors: ErrorReport,
    pub rate_u: Option<f64>,
    pub rate_curl: Option<f64>,
    /// ‖[u_h, p_h]‖ divided by the data norm.
    pub stability_ratio: f64,
    pub n_triangles: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub label: String,
    pub case: CaseSelector,
    pub family: MeshFamily,
    pub params: Params,
    pub levels: Vec<LevelResult>,
    /// Penalty warnings raised on any level.
    pub warnings: Vec<String>,
}

impl StudyReport {
    pub fn empty(config: &StudyConfig) -> Self {
        StudyReport {
            label: config.label(),
            case: config.case,
            family: config.family,
            params: config.params,
            levels: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&LevelResult> {
        self.levels.last()
    }

    pub fn total_wall_ms(&self) -> f64 {
        self.levels.iter().map(|l| l.wall_ms).sum()
    }
}

fn optional_rate(ec: f64, ef: f64, hc: f64, hf: f64) -> Option<f64> {
    rate(ec, ef, hc, hf).ok()
}

/// Runs every level of `config`: mesh, assembly, solve, errors.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let case = config.case.build(config.params.nu)?;
    let mut report = StudyReport::empty(config);
    for &level in &config.levels {
        let with_level = |e: Error| Error::Level {
            level,
            source: Box::new(e),
        };
        let start = Instant::now();
        let mesh = build_mesh(config.family, config.case.domain(), level).map_err(with_level)?;
        for w in config.params.penalty_warnings(&mesh) {
            if !report.warnings.contains(&w) {
                report.warnings.push(w);
            }
        }
        let system = build_system(&mesh, &config.params, &case).map_err(with_level)?;
        let solution = solve(&system).map_err(with_level)?;
        let errors = l2_errors(&mesh, &solution.values, &case).map_err(with_level)?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;

        let triple = triple_norm(&mesh, &solution.values, &config.params).map_err(with_level)?;
        let data = data_norm(&mesh, &case, &config.params).map_err(with_level)?;
        let errors = ErrorReport {
            triple: Some(triple),
            ..errors
        };
        let (rate_u, rate_curl) = match report.levels.last() {
            Some(prev) => (
                optional_rate(prev.errors.err_u, errors.err_u, prev.errors.h, errors.h),
                optional_rate(prev.errors.err_curl, errors.err_curl, prev.errors.h, errors.h),
            ),
            None => (None, None),
        };
        if let Some(dir) = &config.output_dir {
            let stem = format!("{}-{}", sanitize(&config.label()), level);
            if config.emit.vtk {
                let snap = io::FieldSnapshot::from_solution(&mesh, &solution.values, &case).map_err(with_level)?;
                io::export_vtk(&snap, dir.join(format!("{stem}.vtk"))).map_err(with_level)?;
            }
            if config.emit.matrixmarket {
                std::fs::create_dir_all(dir)?;
                let file = std::fs::File::create(dir.join(format!("{stem}.mtx")))?;
                system.matrix.write_matrix_market(std::io::BufWriter::new(file))?;
            }
        }
        report.levels.push(LevelResult {
            level,
            errors,
            rate_u,
            rate_curl,
            stability_ratio: if data > 0.0 { triple / data } else { f64::NAN },
            n_triangles: mesh.triangles().len(),
            wall_ms,
        });
    }
    if let Some(dir) = &config.output_dir {
        let stem = sanitize(&config.label());
        if config.emit.csv {
            io::write_report_csv(&report, dir.join(format!("{stem}.csv")))?;
        }
        if config.emit.markdown {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{stem}.md")), emit_table(&report, TableFormat::Markdown))?;
        }
    }
    Ok(report)
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(Error::Config(format!("unknown table format '{s}'"))),
        }
    }
}

/// Scientific notation with three significant digits, e.g. `1.07e-01`.
pub fn sci3(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.2e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

fn with_rate(err: f64, r: Option<f64>) -> String {
    match r {
        Some(r) => format!("{} ({r:.2})", sci3(err)),
        None => sci3(err),
    }
}

/// Renders a report as a markdown table (h, ‖e_u‖ (rate), ‖∇×e_u‖ (rate))
/// or as CSV with full precision.
pub fn emit_table(report: &StudyReport, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => io::report_csv_string(report).expect("writing CSV to memory"),
        TableFormat::Markdown => {
            let mut out = String::from("| h | ‖e_u‖ | ‖∇×e_u‖ |\n|---|---|---|\n");
            for l in &report.levels {
                out.push_str(&format!(
                    "| {:.4} | {} | {} |\n",
                    l.errors.h,
                    with_rate(l.errors.err_u, l.rate_u),
                    with_rate(l.errors.err_curl, l.rate_curl)
                ));
            }
            out
        }
    }
}

/// A named group of studies reproducing one table.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub studies: Vec<StudyConfig>,
}

const SQUARE_LEVELS: [usize; 4] = [8, 16, 32, 64];
const LSHAPE_LEVELS: [usize; 4] = [16, 32, 64, 128];
const CURVED_LEVELS: [usize; 6] = [2, 4, 8, 16, 32, 64];

/// All table presets, ν = 1 and N_u = N_p = 100 throughout.
pub fn default_configs() -> Vec<Preset> {
    let strong = |p: Params, s: CornerStrategy| p.with_formulation(Formulation::StabilisedStrong).with_corner_strategy(s);
    let per_n = |case: fn(u32) -> CaseSelector, family, levels: &[usize], params| {
        [1, 2, 4]
            .map(|n| StudyConfig::new(case(n), family, levels.to_vec(), params))
            .to_vec()
    };
    let lshape = Params::stabilised(0.5, 1.0);
    vec![
        Preset {
            name: "table1-uniform",
            description: "square, uniform right-angled mesh, L0 = 0.1, c_u = 0.1",
            studies: vec![StudyConfig::new(
                CaseSelector::Square,
                MeshFamily::Uniform,
                SQUARE_LEVELS.to_vec(),
                Params::stabilised(0.1, 0.1),
            )],
        },
        Preset {
            name: "table1-crisscross",
            description: "square, criss-cross mesh, L0 = 2, c_u = 1",
            studies: vec![StudyConfig::new(
                CaseSelector::Square,
                MeshFamily::Crisscross,
                SQUARE_LEVELS.to_vec(),
                Params::stabilised(2.0, 1.0),
            )],
        },
        Preset {
            name: "table1-ps",
            description: "square, Powell-Sabin split of the uniform mesh, L0 = 2, c_u = 1",
            studies: vec![StudyConfig::new(
                CaseSelector::Square,
                MeshFamily::PowellSabin,
                SQUARE_LEVELS.to_vec(),
                Params::stabilised(2.0, 1.0),
            )],
        },
        Preset {
            name: "table2-strong",
            description: "square, Powell-Sabin mesh, strong boundary conditions",
            studies: vec![StudyConfig::new(
                CaseSelector::Square,
                MeshFamily::PowellSabin,
                SQUARE_LEVELS.to_vec(),
                strong(Params::stabilised(2.0, 1.0), CornerStrategy::BothZero),
            )],
        },
        Preset {
            name: "table3-crisscross",
            description: "L-shape n = 1, 2, 4, criss-cross mesh, L0 = 0.5, c_u = 1",
            studies: per_n(CaseSelector::LShape, MeshFamily::Crisscross, &LSHAPE_LEVELS, lshape),
        },
        Preset {
            name: "table4-ps",
            description: "L-shape n = 1, 2, 4, Powell-Sabin mesh, L0 = 0.5, c_u = 1",
            studies: per_n(CaseSelector::LShape, MeshFamily::PowellSabin, &LSHAPE_LEVELS, lshape),
        },
        Preset {
            name: "table5-corner",
            description: "L-shape n = 1, h = 0.0156: strong corner strategies and Nitsche",
            studies: [
                (strong(lshape, CornerStrategy::BothZero), "u1=u2=0"),
                (strong(lshape, CornerStrategy::Free), "u1,u2 free"),
                (strong(lshape, CornerStrategy::BisectorNormal), "bisector normal"),
                (lshape, "nitsche"),
            ]
            .into_iter()
            .map(|(p, name)| StudyConfig::new(CaseSelector::LShape(1), MeshFamily::Crisscross, vec![128], p).named(name))
            .collect(),
        },
        Preset {
            name: "table6-curved-ps",
            description: "curved L-shape n = 1, 2, 4, Powell-Sabin mesh, L0 = 0.5, c_u = 0.1",
            studies: per_n(CaseSelector::CurvedL, MeshFamily::PowellSabin, &CURVED_LEVELS, Params::stabilised(0.5, 0.1)),
        },
        Preset {
            name: "curved-unstructured",
            description: "curved L-shape n = 1 on the mapped mesh without Powell-Sabin split",
            studies: vec![StudyConfig::new(
                CaseSelector::CurvedL(1),
                MeshFamily::CurvedMapped,
                vec![8, 16, 32],
                Params::stabilised(0.5, 0.1),
            )],
        },
    ]
}

pub fn preset(name: &str) -> Result<Preset> {
    default_configs()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))
}

/// Caps the global thread pool at MAXNIT_THREADS when set. Only the first
/// call has an effect.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("MAXNIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("MAXNIT_THREADS must be a positive integer, got '{value}'")))?;
    if n == 0 {
        return Err(Error::Config("MAXNIT_THREADS must be at least 1".into()));
    }
    // a second initialisation fails harmlessly
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
