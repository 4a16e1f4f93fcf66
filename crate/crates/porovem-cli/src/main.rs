//! Command-line front end for the poroelasticity solver.
//!
//! Exit codes: 0 on success, 1 on numerical/regression failure, 2 on
//! configuration errors.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use porovem::error::Error;
use porovem::mesh::{generators, PolyMesh};
use porovem::stepper::SolverKind;
use porovem::verify::{self, cases};

#[derive(Parser)]
#[command(name = "porovem", version, about = "Virtual element poroelasticity solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh, print its regularity report, and write it out.
    Mesh(MeshArgs),
    /// Run a convergence study and write its CSV table.
    Convergence(ConvergenceArgs),
    /// Run a single transient simulation with snapshot output.
    Run(RunArgs),
}

#[derive(Args)]
struct MeshArgs {
    /// Mesh family: tri | quad | hex.
    #[arg(long = "family", visible_alias = "mesh-family", value_name = "FAMILY")]
    family: String,
    /// Resolution (subdivisions per side / hexagon rows).
    #[arg(long)]
    n: usize,
    /// Interior-vertex distortion for quad meshes, as a fraction of the
    /// cell size in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    distortion: f64,
    /// Seed of the deterministic perturbation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge-ratio regularity threshold to report against.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Output path for the poly-mesh file.
    #[arg(long)]
    out: PathBuf,
    /// Also write a legacy-ASCII VTK copy here.
    #[arg(long)]
    vtk: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Case id: steady_space | time_only | space_time.
    #[arg(long)]
    case: Option<String>,
    /// Configuration file (flags override its values).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of refinement levels.
    #[arg(long)]
    levels: Option<usize>,
    /// Mesh family for the stationary study: tri | quad | hex.
    #[arg(long = "mesh-family", default_value = "tri")]
    mesh_family: String,
    /// Perturbation seed for the quad family.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Hexagon rows of the fixed mesh (time_only study).
    #[arg(long)]
    hex_n: Option<usize>,
    /// Override the dilation modulus.
    #[arg(long)]
    lambda: Option<f64>,
    /// Output directory for CSV tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Linear solver: direct | iterative.
    #[arg(long, default_value = "direct")]
    solver: String,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario id (currently: footing).
    #[arg(long, default_value = "footing")]
    case: String,
    /// Configuration file (flags override its values).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Quad grid resolution.
    #[arg(long)]
    n: Option<usize>,
    /// Mesh distortion fraction.
    #[arg(long)]
    distortion: Option<f64>,
    /// Perturbation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Time step (t_final stays at the scenario default).
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write VTK snapshots of every step.
    #[arg(long)]
    vtk: bool,
    /// Displacement warp factor for the deformed-configuration output.
    #[arg(long, default_value_t = 1.0)]
    warp: f64,
    /// Linear solver: direct | iterative.
    #[arg(long, default_value = "direct")]
    solver: String,
    /// Dump per-element projector matrices (debug).
    #[arg(long)]
    dump_projectors: bool,
    /// Dump assembled operator blocks in Matrix Market format (debug).
    #[arg(long)]
    dump_matrices: bool,
}

fn parse_solver(name: &str) -> Result<SolverKind, Error> {
    match name {
        "direct" => Ok(SolverKind::Direct),
        "iterative" => Ok(SolverKind::Iterative),
        other => Err(Error::Configuration(format!(
            "unknown solver '{other}' (expected direct|iterative)"
        ))),
    }
}

fn cmd_mesh(args: &MeshArgs) -> Result<(), Error> {
    let mesh = match args.family.as_str() {
        "tri" => generators::generate_triangles(args.n)?,
        "quad" => generators::generate_distorted_quads(args.n, args.distortion, args.seed)?,
        "hex" => generators::generate_hexagons(args.n)?,
        other => {
            return Err(Error::Configuration(format!(
                "unknown mesh family '{other}' (expected tri|quad|hex)"
            )))
        }
    };
    let report = mesh.check_regularity(args.threshold);
    println!(
        "mesh: {} cells, {} vertices, {} edges, h = {:.6}",
        mesh.cell_count(),
        mesh.vertex_count(),
        mesh.edge_count(),
        report.h
    );
    let min_ratio = report
        .min_edge_to_diameter
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    println!(
        "regularity: min edge/diameter = {:.4}, {} cells below threshold {}, {} non-convex",
        min_ratio,
        report.violations.len(),
        report.threshold,
        report.convex.iter().filter(|&&c| !c).count()
    );
    porovem::io::save_poly_mesh(&mesh, &args.out)?;
    println!("wrote {}", args.out.display());
    if let Some(vtk) = &args.vtk {
        std::fs::write(vtk, porovem::io::mesh_to_vtk(&mesh, "porovem mesh"))?;
        println!("wrote {}", vtk.display());
    }
    Ok(())
}

/// Build the per-level schedule for a study, allowing a level-count override.
fn schedule_for(
    id: cases::CaseId,
    levels: Option<usize>,
    hex_n: Option<usize>,
) -> verify::StudySchedule {
    match verify::default_levels(id) {
        verify::StudySchedule::Space(mut ns) => {
            if let Some(l) = levels {
                ns = (0..l).map(|k| 4 << k).collect();
            }
            verify::StudySchedule::Space(ns)
        }
        verify::StudySchedule::Time {
            hex_n: default_n,
            mut step_counts,
        } => {
            if let Some(l) = levels {
                step_counts = (0..l).map(|k| 2 << k).collect();
            }
            verify::StudySchedule::Time {
                hex_n: hex_n.unwrap_or(default_n),
                step_counts,
            }
        }
        verify::StudySchedule::SpaceTime(mut pairs) => {
            if let Some(l) = levels {
                pairs = (0..l).map(|k| (10 << k, 10 << k)).collect();
            }
            verify::StudySchedule::SpaceTime(pairs)
        }
    }
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<bool, Error> {
    let mut cfg = args
        .config
        .as_ref()
        .map(|p| Config::load(p))
        .transpose()?
        .unwrap_or_default();
    if let Some(case) = &args.case {
        cfg.set_if_absent("case", case.clone());
    }
    // Flags win over file values.
    let case_name = args
        .case
        .clone()
        .or_else(|| cfg.get("case").map(str::to_string))
        .ok_or_else(|| Error::Configuration("no case given (--case or config)".into()))?;
    let id: cases::CaseId = case_name.parse()?;
    let lambda = match args.lambda {
        Some(l) => Some(l),
        None => cfg.get_parsed("params.lambda")?,
    };
    let levels = match args.levels {
        Some(l) => Some(l),
        None => cfg.get_parsed("study.levels")?,
    };
    let hex_n = match args.hex_n {
        Some(n) => Some(n),
        None => cfg.get_parsed("mesh.hex_n")?,
    };
    let solver = parse_solver(&args.solver)?;

    let mut case = cases::builtin_case(id, lambda);
    if let Some(scale) = cfg.get_parsed::<f64>("params.sigma_scale")? {
        case.params.stab_scale = [scale; 3];
    }
    let family = match args.mesh_family.as_str() {
        "tri" => verify::MeshFamily::Triangles,
        "quad" => verify::MeshFamily::DistortedQuads { seed: args.seed },
        "hex" => verify::MeshFamily::Hexagons,
        other => {
            return Err(Error::Configuration(format!(
                "unknown mesh family '{other}' (expected tri|quad|hex)"
            )))
        }
    };
    let schedule = schedule_for(id, levels, hex_n);
    let report = match schedule {
        verify::StudySchedule::Space(ns) => {
            verify::run_steady_space(&case, family, &ns, solver)?
        }
        verify::StudySchedule::Time { hex_n, step_counts } => {
            verify::run_time_only(&case, hex_n, &step_counts, solver)?
        }
        verify::StudySchedule::SpaceTime(pairs) => {
            verify::run_space_time(&case, &pairs, solver)?
        }
    };

    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join(format!("{case_name}.csv"));
    std::fs::write(&csv_path, report.to_csv())?;
    println!("# study: {case_name} (rates over {})", report.rate_basis);
    print!("{}", report.to_csv());
    println!("wrote {}", csv_path.display());

    let expected = verify::expected_rates(id);
    let ok = report.rates_within(&expected, 0.15);
    if ok {
        println!("rate regression: PASS (finest rates within 0.15 of {expected:?})");
    } else {
        println!(
            "rate regression: FAIL. finest rates {:?}, expected {:?} +/- 0.15",
            report.finest_rates(),
            expected
        );
    }
    Ok(ok)
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    if args.case != "footing" {
        return Err(Error::Configuration(format!(
            "unknown scenario '{}' (expected footing)",
            args.case
        )));
    }
    let cfg = args
        .config
        .as_ref()
        .map(|p| Config::load(p))
        .transpose()?
        .unwrap_or_default();
    let n = match args.n {
        Some(n) => n,
        None => cfg.get_parsed("mesh.n")?.unwrap_or(32),
    };
    let distortion = match args.distortion {
        Some(d) => d,
        None => cfg.get_parsed("mesh.distortion")?.unwrap_or(0.2),
    };
    let seed = match args.seed {
        Some(s) => s,
        None => cfg.get_parsed("mesh.seed")?.unwrap_or(7),
    };
    let solver = parse_solver(&args.solver)?;

    let mut scenario = cases::FootingScenario::default();
    if let Some(dt) = args.dt.or(cfg.get_parsed("time.dt")?) {
        if dt <= 0.0 || dt > scenario.t_final {
            return Err(Error::Configuration(format!("invalid time step {dt}")));
        }
        scenario.steps = (scenario.t_final / dt).round().max(1.0) as usize;
    }
    let mesh = generators::generate_distorted_quads(n, distortion, seed)?;
    println!(
        "footing: {} cells, dt = {:.4}, {} steps to t = {}",
        mesh.cell_count(),
        scenario.t_final / scenario.steps as f64,
        scenario.steps,
        scenario.t_final
    );

    if args.dump_projectors {
        dump_projectors(&mesh, &args.out)?;
    }
    let run = verify::run_footing(&scenario, mesh, solver)?;
    std::fs::create_dir_all(&args.out)?;
    if args.dump_matrices {
        dump_matrices(&run.mesh, &scenario, &args.out)?;
    }
    if args.vtk {
        let paths = porovem::io::write_snapshots(&run.mesh, &run.history, &args.out, args.warp)?;
        println!("wrote {} snapshots to {}", paths.len(), args.out.display());
    }
    let last = run.history.last().expect("at least one step");
    let csv_path = args.out.join("final_state.csv");
    std::fs::write(&csv_path, porovem::io::state_to_csv(&run.mesh, last))?;
    println!("wrote {}", csv_path.display());

    let cells = verify::checkerboard_cells(&run.mesh, &last.psi, 0.05);
    let verts = verify::checkerboard_vertices(&run.mesh, &last.p, 0.05);
    println!(
        "oscillation check: {} total-pressure cells, {} pressure vertices flagged",
        cells.len(),
        verts.len()
    );
    if !cells.is_empty() || !verts.is_empty() {
        return Err(Error::Data("checkerboard oscillations detected".into()));
    }
    Ok(())
}

fn dump_projectors(mesh: &PolyMesh, out: &std::path::Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    let packs = porovem::build_packs(mesh)?;
    let mut text = String::new();
    for (c, pack) in packs.iter().enumerate() {
        text.push_str(&porovem::io::projector_dump(pack, c));
    }
    std::fs::write(out.join("projectors.csv"), text)?;
    std::fs::write(
        out.join("quadrature_cell0.csv"),
        porovem::io::quadrature_dump(&packs[0]),
    )?;
    Ok(())
}

fn dump_matrices(
    mesh: &PolyMesh,
    scenario: &cases::FootingScenario,
    out: &std::path::Path,
) -> Result<(), Error> {
    let mut mesh = mesh.clone();
    mesh.retag_boundary(scenario.tagger());
    let packs = porovem::build_packs(&mesh)?;
    let dofmap = porovem::build_dofmap(&mesh, &scenario.bc_spec())?;
    let system = porovem::assemble_system(&mesh, &packs, &dofmap, &scenario.params)?;
    for (name, block) in [
        ("a1", &system.a1),
        ("b1", &system.b1),
        ("a2", &system.a2),
        ("a2_tilde", &system.a2_tilde),
        ("b2", &system.b2),
    ] {
        std::fs::write(
            out.join(format!("{name}.mtx")),
            porovem::io::csr_to_matrix_market(block, name),
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mesh(args) => cmd_mesh(args).map(|()| true),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Run(args) => cmd_run(args).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Configuration(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
