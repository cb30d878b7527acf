use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxnit_core::harness::{self, emit_table, run_study, MeshFamily, StudyConfig, TableFormat};
use maxnit_core::{io, Domain, Error};

#[derive(Parser)]
#[command(name = "maxnit", version, about = "Stabilised nodal elements for the 2D Maxwell problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the studies of a preset or of a JSON config file.
    Run {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Table format printed to stdout: markdown or csv.
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Write CSV and markdown tables for every study into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also print each study as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Generate a mesh and write it as text, or as VTK when the path ends in .vtk.
    Mesh {
        #[arg(long)]
        family: String,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value = "square")]
        domain: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// List preset names.
    Presets,
}

fn run(cli: Cli) -> maxnit_core::Result<()> {
    harness::configure_threads()?;
    match cli.command {
        Command::Presets => {
            for p in harness::default_configs() {
                println!("{:<20} {}", p.name, p.description);
            }
        }
        Command::Mesh {
            family,
            level,
            domain,
            out,
        } => {
            let family: MeshFamily = family.parse().map_err(config)?;
            let domain: Domain = domain.parse().map_err(config)?;
            if !family.supports(domain) {
                return Err(Error::Config(format!("mesh family {family} is not available on {domain}")));
            }
            if level == 0 {
                return Err(Error::Config("level must be positive".into()));
            }
            let mesh = harness::build_mesh(family, domain, level)?;
            if out.extension().is_some_and(|e| e == "vtk") {
                io::export_vtk(&io::FieldSnapshot::new(&mesh), &out)?;
            } else {
                io::export_mesh(&mesh, &out)?;
            }
            let s = maxnit_core::mesh::mesh_stats(&mesh);
            eprintln!(
                "wrote {}: {} vertices, {} triangles, h = {:.4}, min angle {:.1} deg",
                out.display(),
                s.n_vertices,
                s.n_triangles,
                s.h,
                s.min_angle
            );
        }
        Command::Run {
            preset,
            config,
            format,
            out_dir,
            json,
        } => {
            let format: TableFormat = format.parse()?;
            let mut studies = match (preset, config) {
                (Some(name), _) => harness::preset(&name)?.studies,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    vec![StudyConfig::from_json(&text)?]
                }
                (None, None) => unreachable!("clap requires one of --preset/--config"),
            };
            if let Some(dir) = out_dir {
                for s in &mut studies {
                    s.output_dir = Some(dir.clone());
                    s.emit.csv = true;
                    s.emit.markdown = true;
                }
            }
            for study in &studies {
                let report = run_study(study)?;
                println!("## {}\n", report.label);
                print!("{}", emit_table(&report, format));
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
                if json {
                    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
                }
                println!();
            }
        }
    }
    Ok(())
}

fn config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_solver_failure() {
        3
    } else if matches!(e, Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_)) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
