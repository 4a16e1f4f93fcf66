//! Backward-Euler time stepping of the three-field system.
//!
//! Each step solves the block system
//!
//! ```text
//! [ A1        0          B1^T ] [u]   [ F^n + traction        ]
//! [ 0    A2t + dt A2    -B2^T ] [p] = [ dt G^n + A2t p' - B2^T psi' ]
//! [ B1        B2         -A3  ] [psi] [ 0                     ]
//! ```
//!
//! with `'` marking the previous time level. The matrix does not change
//! between steps, so it is factorized once. Before factorizing, the pressure
//! row is scaled by -1, which makes the matrix symmetric indefinite. The
//! stationary problem is the same solve with `dt = 1` and zero history.
//!
//! Dirichlet conditions are imposed by interpolating the trace at each time
//! level and eliminating constrained rows and columns symmetrically; the
//! elimination keeps a list of (row, constrained column) couplings so the
//! lifting contribution can be recomputed per step.

use nalgebra::{DVector, Point2, Vector2};

use crate::assembly::{assemble_loads, BlockSystem, PhysicalParams};
use crate::dofs::DofMap;
use crate::error::{Error, Result};
use crate::linalg::{minres, CsrMatrix, DirectSolver, Triplets};
use crate::mesh::PolyMesh;
use crate::projectors::ProjectorPack;

/// Uniform partition of (0, t_final].
#[derive(Clone, Copy, Debug)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<TimeGrid> {
        if steps == 0 || t_final <= 0.0 {
            return Err(Error::InvalidArgument(
                "time grid needs steps >= 1 and t_final > 0".into(),
            ));
        }
        Ok(TimeGrid { t_final, steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.dt() * n as f64
    }
}

/// Coefficient vectors of the three fields at one time level.
#[derive(Clone, Debug)]
pub struct FieldState {
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    pub psi: DVector<f64>,
    pub t: f64,
}

/// Time-dependent problem data: body load, volumetric source. Boundary data
/// lives in the dof map (Dirichlet traces, traction and flux edges).
pub struct ProblemData<'a> {
    pub body: &'a (dyn Fn(&Point2<f64>, f64) -> Vector2<f64> + Sync),
    pub source: &'a (dyn Fn(&Point2<f64>, f64) -> f64 + Sync),
}

/// Linear solver selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Direct,
    /// MINRES on the symmetrized reduced system.
    Iterative,
}

#[allow(clippy::large_enum_variant)]
enum Factorization {
    Direct(DirectSolver),
    Iterative,
}

/// Assembled, constrained, and factorized operator for one time-step size.
///
/// The reduced matrix is symmetrically equilibrated (unit-magnitude diagonal)
/// before factorization: the blocks differ by many orders of magnitude when
/// the dilation modulus is large, and the sparse LU needs the rescue. Each
/// solve is finished with iterative refinement against the unscaled matrix.
pub struct StepOperator {
    global_of_free: Vec<usize>,
    /// (free row, constrained global column, value): lifting couplings.
    lift: Vec<(usize, usize, f64)>,
    factorization: Factorization,
    /// Reduced (unscaled) matrix kept for refinement and residual checks.
    reduced: CsrMatrix,
    /// Equilibration factors: scaled matrix = D A D with D = diag(scale).
    scale: Vec<f64>,
    n_total: usize,
    /// dt used to combine the pressure blocks (1 for the stationary solve).
    dt: f64,
}

/// Triplets of the full (unconstrained) step matrix; the pressure row is
/// scaled by -1 so the result is symmetric indefinite.
pub fn block_triplets(system: &BlockSystem, dt: f64) -> Vec<(usize, usize, f64)> {
    let (n_u, n_p) = (system.n_u, system.n_p);
    let off_p = n_u;
    let off_z = n_u + n_p;
    let mut entries = Vec::new();
    let push_csr = |entries: &mut Vec<(usize, usize, f64)>,
                    m: &CsrMatrix,
                    roff: usize,
                    coff: usize,
                    scale: f64,
                    transpose: bool| {
        for i in 0..m.nrows {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                let (r, c) = if transpose {
                    (m.cols[k] + roff, i + coff)
                } else {
                    (i + roff, m.cols[k] + coff)
                };
                entries.push((r, c, scale * m.vals[k]));
            }
        }
    };
    // Row u: A1 u + B1^T psi.
    push_csr(&mut entries, &system.a1, 0, 0, 1.0, false);
    push_csr(&mut entries, &system.b1, 0, off_z, 1.0, true);
    // Row p, scaled by -1 for symmetry: -(A2t + dt A2) p + B2^T psi.
    push_csr(&mut entries, &system.a2_tilde, off_p, off_p, -1.0, false);
    push_csr(&mut entries, &system.a2, off_p, off_p, -dt, false);
    push_csr(&mut entries, &system.b2, off_p, off_z, 1.0, true);
    // Row psi: B1 u + B2 p - A3 psi.
    push_csr(&mut entries, &system.b1, off_z, 0, 1.0, false);
    push_csr(&mut entries, &system.b2, off_z, off_p, 1.0, false);
    for k in 0..system.n_z {
        entries.push((off_z + k, off_z + k, -system.a3_diag[k]));
    }
    entries
}

impl StepOperator {
    pub fn build(
        system: &BlockSystem,
        dofmap: &DofMap,
        dt: f64,
        solver: SolverKind,
    ) -> Result<StepOperator> {
        let n_total = dofmap.total();
        let mask = dofmap.constrained_mask();
        let mut free_of_global = vec![None; n_total];
        let mut global_of_free = Vec::new();
        for g in 0..n_total {
            if !mask[g] {
                free_of_global[g] = Some(global_of_free.len());
                global_of_free.push(g);
            }
        }

        let entries = block_triplets(system, dt);
        let mut reduced_entries = Vec::with_capacity(entries.len());
        let mut lift = Vec::new();
        for (r, c, v) in entries {
            match (free_of_global[r], free_of_global[c]) {
                (Some(fr), Some(fc)) => reduced_entries.push((fr, fc, v)),
                (Some(fr), None) => lift.push((fr, c, v)),
                _ => {}
            }
        }

        let n_free = global_of_free.len();
        let mut t = Triplets::new(n_free, n_free);
        for &(r, c, v) in &reduced_entries {
            t.push(r, c, v);
        }
        let reduced = t.to_csr();

        // Symmetric Ruiz equilibration: drive every row/column maximum to
        // one. The raw blocks differ by up to eight orders of magnitude
        // (mass and coupling blocks carry 1/λ), which otherwise ruins the
        // sparse factorization.
        let mut scale = vec![1.0f64; n_free];
        for _ in 0..4 {
            let mut rowmax = vec![0.0f64; n_free];
            for &(r, c, v) in &reduced_entries {
                let s = (v * scale[r] * scale[c]).abs();
                if s > rowmax[r] {
                    rowmax[r] = s;
                }
                if s > rowmax[c] {
                    rowmax[c] = s;
                }
            }
            for i in 0..n_free {
                if rowmax[i] > 0.0 {
                    scale[i] /= rowmax[i].sqrt();
                }
            }
        }
        let factorization = match solver {
            SolverKind::Direct => {
                let scaled: Vec<(usize, usize, f64)> = reduced_entries
                    .iter()
                    .map(|&(r, c, v)| (r, c, v * scale[r] * scale[c]))
                    .collect();
                Factorization::Direct(DirectSolver::factorize(n_free, &scaled)?)
            }
            SolverKind::Iterative => Factorization::Iterative,
        };
        Ok(StepOperator {
            global_of_free,
            lift,
            factorization,
            reduced,
            scale,
            n_total,
            dt,
        })
    }

    /// Solve with the given full-length right-hand side (pressure row NOT yet
    /// negated; the sign flip applied at factorization time is repeated here)
    /// and boundary values. Returns the full solution vector.
    fn solve(
        &self,
        system: &BlockSystem,
        rhs_full: &DVector<f64>,
        boundary: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let n_free = self.global_of_free.len();
        let off_p = system.n_u;
        let off_z = system.n_u + system.n_p;
        let mut b = DVector::zeros(n_free);
        for (f, &g) in self.global_of_free.iter().enumerate() {
            let sign = if g >= off_p && g < off_z { -1.0 } else { 1.0 };
            b[f] = sign * rhs_full[g];
        }
        for &(fr, gc, v) in &self.lift {
            b[fr] -= v * boundary[gc];
        }
        let x_free = match &self.factorization {
            Factorization::Direct(lu) => {
                let solve_scaled = |rhs: &DVector<f64>| -> DVector<f64> {
                    let scaled_rhs = DVector::from_fn(n_free, |i, _| rhs[i] * self.scale[i]);
                    let y = lu.solve(&scaled_rhs);
                    DVector::from_fn(n_free, |i, _| y[i] * self.scale[i])
                };
                let mut x = solve_scaled(&b);
                // Iterative refinement against the unscaled matrix.
                let b_norm = b.norm().max(f64::MIN_POSITIVE);
                let mut residual = f64::INFINITY;
                for _ in 0..10 {
                    let r = &b - self.reduced.matvec(&x);
                    residual = r.norm() / b_norm;
                    if residual < 1e-12 {
                        break;
                    }
                    x += solve_scaled(&r);
                }
                if residual >= 1e-12 {
                    residual = (&b - self.reduced.matvec(&x)).norm() / b_norm;
                }
                if residual > 1e-9 {
                    return Err(Error::SingularGlobal(format!(
                        "direct solve stalled at relative residual {residual:.3e}"
                    )));
                }
                x
            }
            Factorization::Iterative => minres(&self.reduced, &b, 1e-11, 20 * n_free.max(100))?,
        };
        if x_free.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularGlobal("solution contains non-finite values".into()));
        }
        let mut x = boundary.clone();
        for (f, &g) in self.global_of_free.iter().enumerate() {
            x[g] = x_free[f];
        }
        Ok(x)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn free_count(&self) -> usize {
        self.global_of_free.len()
    }

    pub fn total(&self) -> usize {
        self.n_total
    }
}

/// Initial data selection.
pub enum InitialData<'a> {
    /// Fields start from zero (system at rest).
    Rest,
    /// Interpolate displacement and pressure, cell-average the total
    /// pressure.
    Fields {
        u0: &'a dyn Fn(&Point2<f64>, f64) -> Vector2<f64>,
        p0: &'a dyn Fn(&Point2<f64>, f64) -> f64,
        psi0: &'a dyn Fn(&Point2<f64>, f64) -> f64,
    },
}

/// Driver owning everything needed to advance the discrete system in time.
pub struct TransientSolver<'a> {
    pub mesh: &'a PolyMesh,
    pub packs: &'a [ProjectorPack],
    pub dofmap: &'a DofMap,
    pub params: &'a PhysicalParams,
    pub system: &'a BlockSystem,
    pub grid: TimeGrid,
    operator: StepOperator,
}

impl<'a> TransientSolver<'a> {
    pub fn new(
        mesh: &'a PolyMesh,
        packs: &'a [ProjectorPack],
        dofmap: &'a DofMap,
        params: &'a PhysicalParams,
        system: &'a BlockSystem,
        grid: TimeGrid,
        solver: SolverKind,
    ) -> Result<Self> {
        let operator = StepOperator::build(system, dofmap, grid.dt(), solver)?;
        Ok(TransientSolver {
            mesh,
            packs,
            dofmap,
            params,
            system,
            grid,
            operator,
        })
    }

    pub fn initialize(&self, data: &ProblemData, init: InitialData) -> FieldState {
        let _ = data;
        match init {
            InitialData::Rest => FieldState {
                u: DVector::zeros(self.dofmap.n_u),
                p: DVector::zeros(self.dofmap.n_p),
                psi: DVector::zeros(self.dofmap.n_z),
                t: 0.0,
            },
            InitialData::Fields { u0, p0, psi0 } => FieldState {
                u: crate::dofs::interpolate_into_vh(self.mesh, self.dofmap, 0.0, u0),
                p: crate::dofs::interpolate_into_qh(self.mesh, self.dofmap, 0.0, p0),
                psi: crate::dofs::project_into_zh(self.packs, 0.0, psi0),
                t: 0.0,
            },
        }
    }

    /// Advance one step from `state` to time `state.t + dt`.
    pub fn step(&self, state: &FieldState, data: &ProblemData) -> Result<FieldState> {
        let dt = self.grid.dt();
        let t_next = state.t + dt;
        let rhs = self.transient_rhs(state, data, t_next, dt)?;
        let boundary = self.dofmap.boundary_values(self.mesh, t_next);
        let x = self.operator.solve(self.system, &rhs, &boundary)?;
        Ok(self.split(x, t_next))
    }

    /// Run all steps, invoking the observer after each one (time history).
    pub fn run(
        &self,
        data: &ProblemData,
        init: InitialData,
        mut observer: impl FnMut(&FieldState) -> Result<()>,
    ) -> Result<FieldState> {
        let mut state = self.initialize(data, init);
        for _ in 0..self.grid.steps {
            state = self.step(&state, data)?;
            observer(&state)?;
        }
        Ok(state)
    }

    fn transient_rhs(
        &self,
        state: &FieldState,
        data: &ProblemData,
        t_next: f64,
        dt: f64,
    ) -> Result<DVector<f64>> {
        let (f_u, g_p) = assemble_loads(
            self.mesh,
            self.packs,
            self.dofmap,
            self.params,
            data.body,
            data.source,
            t_next,
        );
        if f_u.iter().chain(g_p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("load data produced non-finite values".into()));
        }
        let n = self.dofmap.total();
        let off_p = self.dofmap.p_offset();
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, self.dofmap.n_u).copy_from(&f_u);
        let lag = self.system.a2_tilde.matvec(&state.p)
            - self.system.b2.matvec_transpose(&state.psi);
        for i in 0..self.dofmap.n_p {
            rhs[off_p + i] = dt * g_p[i] + lag[i];
        }
        // psi row rhs is zero.
        Ok(rhs)
    }

    fn split(&self, x: DVector<f64>, t: f64) -> FieldState {
        let n_u = self.dofmap.n_u;
        let n_p = self.dofmap.n_p;
        let n_z = self.dofmap.n_z;
        FieldState {
            u: x.rows(0, n_u).into_owned(),
            p: x.rows(n_u, n_p).into_owned(),
            psi: x.rows(n_u + n_p, n_z).into_owned(),
            t,
        }
    }
}

/// Solve the stationary three-field system (the zeroth-order terms included):
/// one backward-Euler step with unit step size from zero history.
#[allow(clippy::too_many_arguments)]
pub fn solve_steady(
    mesh: &PolyMesh,
    packs: &[ProjectorPack],
    dofmap: &DofMap,
    params: &PhysicalParams,
    system: &BlockSystem,
    data: &ProblemData,
    t: f64,
    solver: SolverKind,
) -> Result<FieldState> {
    let operator = StepOperator::build(system, dofmap, 1.0, solver)?;
    let (f_u, g_p) = assemble_loads(mesh, packs, dofmap, params, data.body, data.source, t);
    let n = dofmap.total();
    let mut rhs = DVector::zeros(n);
    rhs.rows_mut(0, dofmap.n_u).copy_from(&f_u);
    let off_p = dofmap.p_offset();
    for i in 0..dofmap.n_p {
        rhs[off_p + i] = g_p[i];
    }
    let boundary = dofmap.boundary_values(mesh, t);
    let x = operator.solve(system, &rhs, &boundary)?;
    let n_u = dofmap.n_u;
    let n_p = dofmap.n_p;
    Ok(FieldState {
        u: x.rows(0, n_u).into_owned(),
        p: x.rows(n_u, n_p).into_owned(),
        psi: x.rows(n_u + n_p, dofmap.n_z).into_owned(),
        t,
    })
}

/// The discrete energy functional that backward Euler dissipates when loads
/// vanish: ½ a1h(u,u) + ½ ã2h(p,p) + ½ a3(ψ,ψ) − b2(p,ψ).
pub fn discrete_energy(system: &BlockSystem, state: &FieldState) -> f64 {
    0.5 * system.a1.quad_form(&state.u, &state.u)
        + 0.5 * system.a2_tilde.quad_form(&state.p, &state.p)
        + 0.5 * state.psi.dot(&state.psi.component_mul(&system.a3_diag))
        - state.psi.dot(&system.b2.matvec(&state.p))
}

/// Total-pressure cell values consistent with given displacement/pressure
/// dofs through the third discrete equation (used to build compatible
/// initial data).
pub fn consistent_total_pressure(
    system: &BlockSystem,
    packs: &[ProjectorPack],
    params: &PhysicalParams,
    u: &DVector<f64>,
    p: &DVector<f64>,
) -> DVector<f64> {
    let b1u = system.b1.matvec(u);
    let b2p = system.b2.matvec(p);
    DVector::from_fn(packs.len(), |k, _| {
        (b1u[k] + b2p[k]) * params.lambda / packs[k].geom.area
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_system;
    use crate::dofs::{build_dofmap, BcSpec};
    use crate::mesh::{generators, BoundaryTag};

    struct Setup {
        mesh: PolyMesh,
        packs: Vec<ProjectorPack>,
        dofmap: DofMap,
        params: PhysicalParams,
        system: BlockSystem,
    }

    fn setup(n: usize) -> Setup {
        let mesh = generators::generate_triangles(n).unwrap();
        let packs: Vec<_> = (0..mesh.cell_count())
            .map(|c| ProjectorPack::build(&mesh, c).unwrap())
            .collect();
        let bc = BcSpec::zero_dirichlet_everywhere(&[BoundaryTag::GammaClamped]);
        let dofmap = build_dofmap(&mesh, &bc).unwrap();
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let system = assemble_system(&mesh, &packs, &dofmap, &params).unwrap();
        Setup {
            mesh,
            packs,
            dofmap,
            params,
            system,
        }
    }

    fn zero_data() -> ProblemData<'static> {
        ProblemData {
            body: &|_, _| Vector2::zeros(),
            source: &|_, _| 0.0,
        }
    }

    #[test]
    fn time_grid() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        assert!((g.dt() * 8.0 - 1.0).abs() < 1e-14);
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn rest_state_stays_zero() {
        let s = setup(3);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let solver = TransientSolver::new(
            &s.mesh, &s.packs, &s.dofmap, &s.params, &s.system, grid,
            SolverKind::Direct,
        )
        .unwrap();
        let data = zero_data();
        let mut count = 0;
        let last = solver
            .run(&data, InitialData::Rest, |state| {
                count += 1;
                assert!(state.u.abs().max() < 1e-14);
                assert!(state.p.abs().max() < 1e-14);
                assert!(state.psi.abs().max() < 1e-14);
                Ok(())
            })
            .unwrap();
        assert_eq!(count, 4);
        assert!((last.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_step_matches_dense_solve() {
        // One square cell with a small random load; backward Euler step must
        // match a dense solve of the same block system.
        let mesh = PolyMesh::build(
            vec![
                nalgebra::Point2::new(0.0, 0.0),
                nalgebra::Point2::new(1.0, 0.0),
                nalgebra::Point2::new(1.0, 1.0),
                nalgebra::Point2::new(0.0, 1.0),
            ],
            vec![vec![0, 1, 2, 3]],
            |_| BoundaryTag::GammaClamped,
        )
        .unwrap();
        let packs = vec![ProjectorPack::build(&mesh, 0).unwrap()];
        // Leave the bottom edge traction-free so some displacement dofs stay
        // free (otherwise the single-cell test is fully constrained).
        let mut mesh = mesh;
        mesh.retag_boundary(|mid| {
            if mid.y < 1e-12 {
                BoundaryTag::SigmaTraction
            } else {
                BoundaryTag::GammaClamped
            }
        });
        let mut bc = BcSpec::zero_dirichlet_everywhere(&[BoundaryTag::GammaClamped]);
        bc.displacement.insert(
            BoundaryTag::SigmaTraction,
            crate::dofs::DispBc::Traction(std::sync::Arc::new(|_, _, _| Vector2::zeros())),
        );
        bc.pressure.insert(
            BoundaryTag::SigmaTraction,
            crate::dofs::PressureBc::Dirichlet(std::sync::Arc::new(|_, _| 0.0)),
        );
        let dofmap = build_dofmap(&mesh, &bc).unwrap();
        let params = PhysicalParams::new(2.0, 3.0, 0.9, 0.5, 1.2, 0.8);
        let system = assemble_system(&mesh, &packs, &dofmap, &params).unwrap();
        let grid = TimeGrid::new(0.2, 1).unwrap();
        let data = ProblemData {
            body: &|p, _| Vector2::new(0.3 * p.x - 0.1, 0.2 * p.y),
            source: &|p, _| 0.7 * p.x * p.y - 0.2,
        };
        let solver = TransientSolver::new(
            &mesh, &packs, &dofmap, &params, &system, grid, SolverKind::Direct,
        )
        .unwrap();
        let state0 = solver.initialize(&data, InitialData::Rest);
        let state1 = solver.step(&state0, &data).unwrap();

        // Dense oracle on the free dofs.
        let dt = grid.dt();
        let entries = block_triplets(&system, dt);
        let mask = dofmap.constrained_mask();
        let free: Vec<usize> = (0..dofmap.total()).filter(|&g| !mask[g]).collect();
        let pos: std::collections::HashMap<usize, usize> =
            free.iter().enumerate().map(|(f, &g)| (g, f)).collect();
        let nf = free.len();
        let mut dense = nalgebra::DMatrix::zeros(nf, nf);
        for (r, c, v) in entries {
            if let (Some(&fr), Some(&fc)) = (pos.get(&r), pos.get(&c)) {
                dense[(fr, fc)] += v;
            }
        }
        let (f_u, g_p) = assemble_loads(
            &mesh, &packs, &dofmap, &params, data.body, data.source, dt,
        );
        let mut rhs = DVector::zeros(nf);
        for (f, &g) in free.iter().enumerate() {
            if g < dofmap.n_u {
                rhs[f] = f_u[g];
            } else if g < dofmap.n_u + dofmap.n_p {
                rhs[f] = -(dt * g_p[g - dofmap.n_u]); // pressure row sign flip
            }
        }
        let x = dense.lu().solve(&rhs).unwrap();
        for (f, &g) in free.iter().enumerate() {
            let mine = if g < dofmap.n_u {
                state1.u[g]
            } else if g < dofmap.n_u + dofmap.n_p {
                state1.p[g - dofmap.n_u]
            } else {
                state1.psi[g - dofmap.n_u - dofmap.n_p]
            };
            assert!(
                (mine - x[f]).abs() < 1e-11 * x.abs().max().max(1.0),
                "dof {g}: {mine} vs {}",
                x[f]
            );
        }
    }

    #[test]
    fn linearity_in_data() {
        let s = setup(3);
        let grid = TimeGrid::new(0.5, 3).unwrap();
        let solver = TransientSolver::new(
            &s.mesh, &s.packs, &s.dofmap, &s.params, &s.system, grid,
            SolverKind::Direct,
        )
        .unwrap();
        let data1 = ProblemData {
            body: &|p, t| Vector2::new(p.x * t.sin(), -p.y),
            source: &|p, t| p.x + p.y + t,
        };
        let data2 = ProblemData {
            body: &|p, t| Vector2::new(2.0 * p.x * t.sin(), -2.0 * p.y),
            source: &|p, t| 2.0 * (p.x + p.y + t),
        };
        let mut h1 = Vec::new();
        solver
            .run(&data1, InitialData::Rest, |st| {
                h1.push(st.clone());
                Ok(())
            })
            .unwrap();
        let mut h2 = Vec::new();
        solver
            .run(&data2, InitialData::Rest, |st| {
                h2.push(st.clone());
                Ok(())
            })
            .unwrap();
        for (a, b) in h1.iter().zip(&h2) {
            let scale = b.u.abs().max().max(b.p.abs().max()).max(1e-30);
            assert!(((2.0 * &a.u) - &b.u).abs().max() < 1e-11 * scale.max(1.0));
            assert!(((2.0 * &a.p) - &b.p).abs().max() < 1e-11 * scale.max(1.0));
            assert!(((2.0 * &a.psi) - &b.psi).abs().max() < 1e-11 * scale.max(1.0));
        }
    }

    #[test]
    fn matrix_independent_of_step_index() {
        // Assembly depends only on dt, not on the step count or time.
        let s = setup(2);
        let t1 = block_triplets(&s.system, 0.125);
        let t2 = block_triplets(&s.system, 0.125);
        assert_eq!(t1.len(), t2.len());
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn iterative_solver_agrees_with_direct() {
        let s = setup(2);
        let grid = TimeGrid::new(0.3, 2).unwrap();
        let data = ProblemData {
            body: &|p, _| Vector2::new(p.y, p.x - 0.5),
            source: &|p, _| p.x,
        };
        let direct = TransientSolver::new(
            &s.mesh, &s.packs, &s.dofmap, &s.params, &s.system, grid,
            SolverKind::Direct,
        )
        .unwrap();
        let iterative = TransientSolver::new(
            &s.mesh, &s.packs, &s.dofmap, &s.params, &s.system, grid,
            SolverKind::Iterative,
        )
        .unwrap();
        let sd = direct.run(&data, InitialData::Rest, |_| Ok(())).unwrap();
        let si = iterative.run(&data, InitialData::Rest, |_| Ok(())).unwrap();
        let scale = sd.u.abs().max().max(sd.p.abs().max()).max(1e-12);
        assert!((sd.u - si.u).abs().max() < 1e-7 * scale);
        assert!((sd.p - si.p).abs().max() < 1e-7 * scale);
    }

    #[test]
    fn zero_load_energy_decays() {
        let s = setup(4);
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let solver = TransientSolver::new(
            &s.mesh, &s.packs, &s.dofmap, &s.params, &s.system, grid,
            SolverKind::Direct,
        )
        .unwrap();
        let data = zero_data();
        // Nonzero initial data compatible with the discrete constraint
        // equation (fields vanish on the boundary, matching the BCs).
        let u0 = crate::dofs::interpolate_into_vh(&s.mesh, &s.dofmap, 0.0, |p, _| {
            let b = p.x * (1.0 - p.x) * p.y * (1.0 - p.y);
            Vector2::new(b, -b)
        });
        let p0 = crate::dofs::interpolate_into_qh(&s.mesh, &s.dofmap, 0.0, |p, _| {
            (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin()
        });
        let psi0 = consistent_total_pressure(&s.system, &s.packs, &s.params, &u0, &p0);
        let mut state = FieldState {
            u: u0,
            p: p0,
            psi: psi0,
            t: 0.0,
        };
        let mut energy = discrete_energy(&s.system, &state);
        assert!(energy > 0.0);
        let e0 = energy;
        for _ in 0..grid.steps {
            state = solver.step(&state, &data).unwrap();
            let next = discrete_energy(&s.system, &state);
            assert!(next <= energy + 1e-12 * e0, "energy grew: {energy} -> {next}");
            energy = next;
        }
        assert!(energy < e0);
    }
}
