//! Verification harness: error norms against manufactured solutions,
//! convergence studies over mesh/time refinement, and the footing demo.
//!
//! Spatial errors compare the exact fields against the *projected* discrete
//! fields (strain projection for displacement, energy projection for fluid
//! pressure, the piecewise constant itself for total pressure), which is what
//! a virtual element solution makes available. Cumulative transient errors
//! are time-discrete L2 norms: sqrt(Δt Σ_n ‖·‖²) up to the final time.

pub mod cases;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::assembly::assemble_system;
use crate::dofs::{build_dofmap, DofMap};
use crate::error::{Error, Result};
use crate::mesh::{generators, PolyMesh};
use crate::projectors::ProjectorPack;
use crate::stepper::{
    solve_steady, FieldState, InitialData, ProblemData, SolverKind, TimeGrid, TransientSolver,
};
use cases::{CaseFields, CaseId, ManufacturedCase};

/// Squared broken norms of one state against the exact fields at time t,
/// plus the squared norms of the exact fields (denominators).
#[derive(Clone, Copy, Debug, Default)]
pub struct SpaceErrorsSq {
    pub u_h1: f64,
    pub u_l2: f64,
    pub p_h1: f64,
    pub p_l2: f64,
    pub psi_l2: f64,
    pub den_u_h1: f64,
    pub den_u_l2: f64,
    pub den_p_h1: f64,
    pub den_p_l2: f64,
    pub den_psi_l2: f64,
}

/// Relative (or absolute, when a denominator vanishes) errors at one time.
#[derive(Clone, Copy, Debug)]
pub struct SpaceErrors {
    pub e1_u: f64,
    pub e0_u: f64,
    pub e0_psi: f64,
    pub e1_p: f64,
    pub e0_p: f64,
    /// True when a denominator was too small and absolute norms are reported.
    pub absolute: bool,
}

fn ratio(err2: f64, den2: f64) -> (f64, bool) {
    if den2 > 1e-28 {
        ((err2 / den2).sqrt(), false)
    } else {
        (err2.sqrt(), true)
    }
}

/// Accumulate the squared broken norms of `state` at time `t` on all cells.
pub fn space_errors_sq(
    mesh: &PolyMesh,
    packs: &[ProjectorPack],
    dofmap: &DofMap,
    fields: &dyn CaseFields,
    state: &FieldState,
    t: f64,
) -> SpaceErrorsSq {
    let per_cell: Vec<SpaceErrorsSq> = (0..mesh.cell_count())
        .into_par_iter()
        .map(|c| {
            let pack = &packs[c];
            let u_loc = DVector::from_iterator(
                dofmap.cell_u_dofs[c].len(),
                dofmap.cell_u_dofs[c].iter().map(|&(g, s)| s * state.u[g]),
            );
            let p_loc = DVector::from_iterator(
                dofmap.cell_p_dofs[c].len(),
                dofmap.cell_p_dofs[c].iter().map(|&g| state.p[g]),
            );
            let u_coeff = &pack.pi_eps * &u_loc;
            let p_coeff = &pack.pi_nabla * &p_loc;
            let grad_uh = pack.vec_poly_gradient(&u_coeff);
            let grad_ph = pack.scalar_poly_gradient(&p_coeff);
            let psi_h = state.psi[c];

            let mut acc = SpaceErrorsSq::default();
            for (q, w) in pack.quad.points.iter().zip(&pack.quad.weights) {
                let gu = fields.grad_u(q, t);
                let du = gu - grad_uh;
                acc.u_h1 += w * (du.transpose() * du).trace();
                acc.den_u_h1 += w * (gu.transpose() * gu).trace();
                let eu = fields.u(q, t) - pack.eval_vec_poly(&u_coeff, q);
                acc.u_l2 += w * eu.norm_squared();
                acc.den_u_l2 += w * fields.u(q, t).norm_squared();
                let gp = fields.grad_p(q, t);
                let dp = gp - grad_ph;
                acc.p_h1 += w * dp.norm_squared();
                acc.den_p_h1 += w * gp.norm_squared();
                let ep = fields.p(q, t) - pack.eval_scalar_poly(&p_coeff, q);
                acc.p_l2 += w * ep * ep;
                acc.den_p_l2 += w * fields.p(q, t) * fields.p(q, t);
                let epsi = fields.psi(q, t) - psi_h;
                acc.psi_l2 += w * epsi * epsi;
                acc.den_psi_l2 += w * fields.psi(q, t) * fields.psi(q, t);
            }
            acc
        })
        .collect();
    let mut total = SpaceErrorsSq::default();
    for a in per_cell {
        total.u_h1 += a.u_h1;
        total.u_l2 += a.u_l2;
        total.p_h1 += a.p_h1;
        total.p_l2 += a.p_l2;
        total.psi_l2 += a.psi_l2;
        total.den_u_h1 += a.den_u_h1;
        total.den_u_l2 += a.den_u_l2;
        total.den_p_h1 += a.den_p_h1;
        total.den_p_l2 += a.den_p_l2;
        total.den_psi_l2 += a.den_psi_l2;
    }
    total
}

/// Relative broken norms at one time level.
pub fn compute_space_errors(
    mesh: &PolyMesh,
    packs: &[ProjectorPack],
    dofmap: &DofMap,
    fields: &dyn CaseFields,
    state: &FieldState,
    t: f64,
) -> SpaceErrors {
    let sq = space_errors_sq(mesh, packs, dofmap, fields, state, t);
    let (e1_u, a1) = ratio(sq.u_h1, sq.den_u_h1);
    let (e0_u, a2) = ratio(sq.u_l2, sq.den_u_l2);
    let (e0_psi, a3) = ratio(sq.psi_l2, sq.den_psi_l2);
    let (e1_p, a4) = ratio(sq.p_h1, sq.den_p_h1);
    let (e0_p, a5) = ratio(sq.p_l2, sq.den_p_l2);
    SpaceErrors {
        e1_u,
        e0_u,
        e0_psi,
        e1_p,
        e0_p,
        absolute: a1 || a2 || a3 || a4 || a5,
    }
}

/// Time-cumulative errors sqrt(Δt Σ_n ‖·‖²): collected by feeding every step
/// into [`CumulativeAccumulator::add_step`].
#[derive(Clone, Copy, Debug, Default)]
pub struct CumulativeErrors {
    pub e1_u: f64,
    pub e0_u: f64,
    pub e1_p: f64,
    pub e0_p: f64,
    pub e0_psi: f64,
}

#[derive(Default)]
pub struct CumulativeAccumulator {
    sums: SpaceErrorsSq,
    dt: f64,
}

impl CumulativeAccumulator {
    pub fn new(dt: f64) -> Self {
        CumulativeAccumulator {
            sums: SpaceErrorsSq::default(),
            dt,
        }
    }

    pub fn add_step(
        &mut self,
        mesh: &PolyMesh,
        packs: &[ProjectorPack],
        dofmap: &DofMap,
        fields: &dyn CaseFields,
        state: &FieldState,
    ) {
        let sq = space_errors_sq(mesh, packs, dofmap, fields, state, state.t);
        self.sums.u_h1 += self.dt * sq.u_h1;
        self.sums.u_l2 += self.dt * sq.u_l2;
        self.sums.p_h1 += self.dt * sq.p_h1;
        self.sums.p_l2 += self.dt * sq.p_l2;
        self.sums.psi_l2 += self.dt * sq.psi_l2;
        self.sums.den_u_h1 += self.dt * sq.den_u_h1;
        self.sums.den_u_l2 += self.dt * sq.den_u_l2;
        self.sums.den_p_h1 += self.dt * sq.den_p_h1;
        self.sums.den_p_l2 += self.dt * sq.den_p_l2;
        self.sums.den_psi_l2 += self.dt * sq.den_psi_l2;
    }

    /// Absolute cumulative errors.
    pub fn absolute(&self) -> CumulativeErrors {
        CumulativeErrors {
            e1_u: self.sums.u_h1.sqrt(),
            e0_u: self.sums.u_l2.sqrt(),
            e1_p: self.sums.p_h1.sqrt(),
            e0_p: self.sums.p_l2.sqrt(),
            e0_psi: self.sums.psi_l2.sqrt(),
        }
    }

    /// Cumulative errors divided by the matching cumulative exact norms.
    pub fn relative(&self) -> CumulativeErrors {
        CumulativeErrors {
            e1_u: ratio(self.sums.u_h1, self.sums.den_u_h1).0,
            e0_u: ratio(self.sums.u_l2, self.sums.den_u_l2).0,
            e1_p: ratio(self.sums.p_h1, self.sums.den_p_h1).0,
            e0_p: ratio(self.sums.p_l2, self.sums.den_p_l2).0,
            e0_psi: ratio(self.sums.psi_l2, self.sums.den_psi_l2).0,
        }
    }
}

/// One row of a convergence table.
#[derive(Clone, Debug)]
pub struct LevelRow {
    /// Free dofs after constraint elimination.
    pub ndof: usize,
    pub h: f64,
    pub dt: Option<f64>,
    pub errors: Vec<f64>,
}

/// A convergence table: named error columns, one row per refinement level,
/// and rates between consecutive rows.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub study: String,
    pub error_names: Vec<&'static str>,
    pub rows: Vec<LevelRow>,
    /// `rates[i][k]`: observed order for error k between rows i and i+1.
    pub rates: Vec<Vec<f64>>,
    /// Refinement measure used for rates ("h" or "dt").
    pub rate_basis: &'static str,
}

impl ErrorReport {
    fn compute_rates(rows: &[LevelRow], by_dt: bool) -> Vec<Vec<f64>> {
        let mut rates = Vec::new();
        for w in rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let scale = if by_dt {
                a.dt.unwrap_or(1.0) / b.dt.unwrap_or(1.0)
            } else {
                a.h / b.h
            };
            rates.push(
                a.errors
                    .iter()
                    .zip(&b.errors)
                    .map(|(ea, eb)| (ea / eb).ln() / scale.ln())
                    .collect(),
            );
        }
        rates
    }

    /// Rates between the two finest levels.
    pub fn finest_rates(&self) -> &[f64] {
        self.rates.last().expect("report needs >= 2 levels")
    }

    /// True when every finest-level rate is within `tol` of its expectation.
    pub fn rates_within(&self, expected: &[f64], tol: f64) -> bool {
        self.finest_rates()
            .iter()
            .zip(expected)
            .all(|(r, e)| (r - e).abs() <= tol)
    }

    /// Render in the CSV layout used by all studies: 6 significant digits
    /// for errors, 2 decimals for rates.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("ndof,h,dt");
        for n in &self.error_names {
            out.push_str(&format!(",{n},rate"));
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{:.6},{}",
                row.ndof,
                row.h,
                row.dt.map_or("-".to_string(), |d| format!("{d:.6}"))
            ));
            for (k, e) in row.errors.iter().enumerate() {
                let rate = if i == 0 {
                    "-".to_string()
                } else {
                    format!("{:.2}", self.rates[i - 1][k])
                };
                out.push_str(&format!(",{e:.5e},{rate}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-level mesh selection for the studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFamily {
    Triangles,
    DistortedQuads { seed: u64 },
    Hexagons,
}

impl MeshFamily {
    pub fn generate(&self, n: usize) -> Result<PolyMesh> {
        match self {
            MeshFamily::Triangles => generators::generate_triangles(n),
            MeshFamily::DistortedQuads { seed } => {
                generators::generate_distorted_quads(n, 0.2, *seed)
            }
            MeshFamily::Hexagons => generators::generate_hexagons(n),
        }
    }
}

fn prepare(
    case: &ManufacturedCase,
    mut mesh: PolyMesh,
) -> Result<(PolyMesh, Vec<ProjectorPack>, DofMap)> {
    mesh.retag_boundary(case.tagger());
    let packs = crate::build_packs(&mesh)?;
    let dofmap = build_dofmap(&mesh, &case.bc_spec())?;
    Ok((mesh, packs, dofmap))
}

/// Stationary space-convergence study on a mesh family.
pub fn run_steady_space(
    case: &ManufacturedCase,
    family: MeshFamily,
    levels: &[usize],
    solver: SolverKind,
) -> Result<ErrorReport> {
    if case.transient {
        return Err(Error::InvalidArgument("case is transient".into()));
    }
    let rows: Vec<LevelRow> = levels
        .par_iter()
        .map(|&n| -> Result<LevelRow> {
            let (mesh, packs, dofmap) = prepare(case, family.generate(n)?)?;
            let system = assemble_system(&mesh, &packs, &dofmap, &case.params)?;
            let fields = case.fields.clone();
            let body = move |p: &nalgebra::Point2<f64>, t: f64| fields.body(p, t);
            let fields2 = case.fields.clone();
            let source = move |p: &nalgebra::Point2<f64>, t: f64| fields2.source(p, t);
            let data = ProblemData {
                body: &body,
                source: &source,
            };
            let state = solve_steady(
                &mesh, &packs, &dofmap, &case.params, &system, &data, 0.0, solver,
            )?;
            let e = compute_space_errors(&mesh, &packs, &dofmap, &*case.fields, &state, 0.0);
            Ok(LevelRow {
                ndof: dofmap.free_count(),
                h: mesh.h(),
                dt: None,
                errors: vec![e.e1_u, e.e0_u, e.e0_psi, e.e1_p, e.e0_p],
            })
        })
        .collect::<Result<_>>()?;
    let rates = ErrorReport::compute_rates(&rows, false);
    Ok(ErrorReport {
        study: case.name.to_string(),
        error_names: vec!["e1_u", "e0_u", "e0_psi", "e1_p", "e0_p"],
        rows,
        rates,
        rate_basis: "h",
    })
}

/// Run one transient case on a fixed mesh and return cumulative errors.
pub fn run_transient_once(
    case: &ManufacturedCase,
    mesh: PolyMesh,
    steps: usize,
    solver: SolverKind,
) -> Result<(CumulativeAccumulator, usize, f64)> {
    let (mesh, packs, dofmap) = prepare(case, mesh)?;
    let system = assemble_system(&mesh, &packs, &dofmap, &case.params)?;
    let grid = TimeGrid::new(case.t_final, steps)?;
    let solver_driver = TransientSolver::new(
        &mesh, &packs, &dofmap, &case.params, &system, grid, solver,
    )?;
    let fields = case.fields.clone();
    let body = move |p: &nalgebra::Point2<f64>, t: f64| fields.body(p, t);
    let fields2 = case.fields.clone();
    let source = move |p: &nalgebra::Point2<f64>, t: f64| fields2.source(p, t);
    let data = ProblemData {
        body: &body,
        source: &source,
    };
    let u0 = |p: &nalgebra::Point2<f64>, t: f64| case.fields.u(p, t);
    let p0 = |p: &nalgebra::Point2<f64>, t: f64| case.fields.p(p, t);
    let psi0 = |p: &nalgebra::Point2<f64>, t: f64| case.fields.psi(p, t);
    let init = InitialData::Fields {
        u0: &u0,
        p0: &p0,
        psi0: &psi0,
    };
    let mut acc = CumulativeAccumulator::new(grid.dt());
    solver_driver.run(&data, init, |state| {
        acc.add_step(&mesh, &packs, &dofmap, &*case.fields, state);
        Ok(())
    })?;
    Ok((acc, dofmap.free_count(), mesh.h()))
}

/// Time-convergence study: fixed spatial mesh, halved time steps. Errors are
/// reported relative to the cumulative exact norms.
pub fn run_time_only(
    case: &ManufacturedCase,
    hex_n: usize,
    step_counts: &[usize],
    solver: SolverKind,
) -> Result<ErrorReport> {
    let rows: Vec<LevelRow> = step_counts
        .par_iter()
        .map(|&steps| -> Result<LevelRow> {
            let mesh = generators::generate_hexagons(hex_n)?;
            let (acc, ndof, h) = run_transient_once(case, mesh, steps, solver)?;
            let e = acc.relative();
            Ok(LevelRow {
                ndof,
                h,
                dt: Some(case.t_final / steps as f64),
                errors: vec![e.e0_u, e.e0_p, e.e0_psi],
            })
        })
        .collect::<Result<_>>()?;
    let rates = ErrorReport::compute_rates(&rows, true);
    Ok(ErrorReport {
        study: case.name.to_string(),
        error_names: vec!["E0_u", "E0_p", "E0_psi"],
        rows,
        rates,
        rate_basis: "dt",
    })
}

/// Joint space-time study: hexagonal meshes and time steps refined together.
/// Errors are absolute cumulative norms.
pub fn run_space_time(
    case: &ManufacturedCase,
    levels: &[(usize, usize)],
    solver: SolverKind,
) -> Result<ErrorReport> {
    let rows: Vec<LevelRow> = levels
        .par_iter()
        .map(|&(hex_n, steps)| -> Result<LevelRow> {
            let mesh = generators::generate_hexagons(hex_n)?;
            let (acc, ndof, h) = run_transient_once(case, mesh, steps, solver)?;
            let e = acc.absolute();
            Ok(LevelRow {
                ndof,
                h,
                dt: Some(case.t_final / steps as f64),
                errors: vec![e.e1_u, e.e0_u, e.e1_p, e.e0_p, e.e0_psi],
            })
        })
        .collect::<Result<_>>()?;
    let rates = ErrorReport::compute_rates(&rows, false);
    Ok(ErrorReport {
        study: case.name.to_string(),
        error_names: vec!["E1_u", "E0_u", "E1_p", "E0_p", "E0_psi"],
        rows,
        rates,
        rate_basis: "h",
    })
}

/// Default refinement schedules reproducing the published studies.
pub fn default_levels(id: CaseId) -> StudySchedule {
    match id {
        CaseId::SteadySpace => StudySchedule::Space(vec![4, 8, 16, 32, 64]),
        CaseId::TimeOnly => StudySchedule::Time {
            hex_n: 22,
            step_counts: vec![2, 4, 8, 16, 32, 64],
        },
        CaseId::SpaceTime => StudySchedule::SpaceTime(vec![
            (10, 10),
            (20, 20),
            (40, 40),
            (80, 80),
        ]),
    }
}

/// Refinement schedule of a study.
#[derive(Clone, Debug)]
pub enum StudySchedule {
    /// Triangle-mesh subdivisions per level.
    Space(Vec<usize>),
    /// Fixed hexagonal mesh, decreasing time steps.
    Time { hex_n: usize, step_counts: Vec<usize> },
    /// (hexagon resolution, step count) pairs.
    SpaceTime(Vec<(usize, usize)>),
}

/// Theoretical orders for each study's error columns.
pub fn expected_rates(id: CaseId) -> Vec<f64> {
    match id {
        CaseId::SteadySpace => vec![1.0, 2.0, 1.0, 1.0, 2.0],
        CaseId::TimeOnly => vec![1.0, 1.0, 1.0],
        CaseId::SpaceTime => vec![1.0, 2.0, 1.0, 2.0, 1.0],
    }
}

// ---------------------------------------------------------------------------
// Footing run and its oscillation check.
// ---------------------------------------------------------------------------

/// Result of the footing scenario: the mesh and every time level.
pub struct FootingRun {
    pub mesh: PolyMesh,
    pub history: Vec<FieldState>,
    pub dofmap_free: usize,
}

pub fn run_footing(
    scenario: &cases::FootingScenario,
    mut mesh: PolyMesh,
    solver: SolverKind,
) -> Result<FootingRun> {
    mesh.retag_boundary(scenario.tagger());
    let packs = crate::build_packs(&mesh)?;
    let dofmap = build_dofmap(&mesh, &scenario.bc_spec())?;
    let system = assemble_system(&mesh, &packs, &dofmap, &scenario.params)?;
    let grid = TimeGrid::new(scenario.t_final, scenario.steps)?;
    let driver = TransientSolver::new(
        &mesh,
        &packs,
        &dofmap,
        &scenario.params,
        &system,
        grid,
        solver,
    )?;
    let body = |_: &nalgebra::Point2<f64>, _: f64| nalgebra::Vector2::zeros();
    let source = |_: &nalgebra::Point2<f64>, _: f64| 0.0;
    let data = ProblemData {
        body: &body,
        source: &source,
    };
    let mut history = Vec::with_capacity(scenario.steps);
    driver.run(&data, InitialData::Rest, |state| {
        history.push(state.clone());
        Ok(())
    })?;
    Ok(FootingRun {
        mesh,
        history,
        dofmap_free: dofmap.free_count(),
    })
}

/// Checkerboard detector for a cell field: an interior cell (no boundary
/// edge) whose value exceeds `threshold * max|field|` in magnitude and whose
/// sign differs from every edge-neighbor is flagged.
pub fn checkerboard_cells(mesh: &PolyMesh, field: &DVector<f64>, threshold: f64) -> Vec<usize> {
    let max = field.abs().max();
    if max == 0.0 {
        return Vec::new();
    }
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); mesh.cell_count()];
    let mut touches_boundary = vec![false; mesh.cell_count()];
    for e in &mesh.edges {
        match e.cells {
            [Some(a), Some(b)] => {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
            [Some(a), None] => touches_boundary[a] = true,
            _ => {}
        }
    }
    (0..mesh.cell_count())
        .filter(|&c| {
            if touches_boundary[c] || neighbors[c].is_empty() {
                return false;
            }
            if field[c].abs() <= threshold * max {
                return false;
            }
            neighbors[c]
                .iter()
                .all(|&n| field[n] != 0.0 && field[n].signum() != field[c].signum())
        })
        .collect()
}

/// Checkerboard detector for a vertex field (fluid pressure): interior
/// vertices whose sign differs from all edge-connected neighbors while the
/// magnitude is significant.
pub fn checkerboard_vertices(mesh: &PolyMesh, field: &DVector<f64>, threshold: f64) -> Vec<usize> {
    let max = field.abs().max();
    if max == 0.0 {
        return Vec::new();
    }
    let nv = mesh.vertex_count();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nv];
    let mut on_boundary = vec![false; nv];
    for e in &mesh.edges {
        let [a, b] = e.vertices;
        neighbors[a].push(b);
        neighbors[b].push(a);
        if e.is_boundary() {
            on_boundary[a] = true;
            on_boundary[b] = true;
        }
    }
    (0..nv)
        .filter(|&v| {
            if on_boundary[v] || neighbors[v].is_empty() {
                return false;
            }
            if field[v].abs() <= threshold * max {
                return false;
            }
            neighbors[v]
                .iter()
                .all(|&n| field[n] != 0.0 && field[n].signum() != field[v].signum())
        })
        .collect()
}
