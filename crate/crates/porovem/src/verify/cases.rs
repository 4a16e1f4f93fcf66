//! Built-in verification problems: three manufactured solutions with
//! hand-derived loads, and the footing compression scenario.
//!
//! All derivatives are coded analytically so the manufactured data is exact;
//! a finite-difference cross-check in the tests guards against transcription
//! slips.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Point2, Vector2};

use crate::assembly::PhysicalParams;
use crate::dofs::{BcSpec, DispBc, PressureBc};
use crate::error::{Error, Result};
use crate::mesh::BoundaryTag;

/// Exact solution fields and the induced problem data.
pub trait CaseFields: Send + Sync {
    fn u(&self, p: &Point2<f64>, t: f64) -> Vector2<f64>;
    /// Row i is the gradient of the i-th displacement component.
    fn grad_u(&self, p: &Point2<f64>, t: f64) -> Matrix2<f64>;
    fn p(&self, p: &Point2<f64>, t: f64) -> f64;
    fn grad_p(&self, p: &Point2<f64>, t: f64) -> Vector2<f64>;
    fn psi(&self, p: &Point2<f64>, t: f64) -> f64;
    /// Momentum right-hand side ρ b.
    fn body(&self, p: &Point2<f64>, t: f64) -> Vector2<f64>;
    /// Mass-balance right-hand side ℓ.
    fn source(&self, p: &Point2<f64>, t: f64) -> f64;
}

/// Boundary-condition layout of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcLayout {
    /// Whole boundary clamped with zero fluid flux (the trace and flux data
    /// still come from the exact solution, which must be compatible).
    ClampedEverywhere,
    /// Bottom and left clamped/no-flux; top and right traction/pressure.
    GammaBottomLeft,
    /// Displacement and pressure fixed on the whole boundary.
    DirichletEverywhere,
}

/// A manufactured verification case: parameters, exact fields, layout.
pub struct ManufacturedCase {
    pub name: &'static str,
    pub params: PhysicalParams,
    pub fields: Arc<dyn CaseFields>,
    pub layout: BcLayout,
    /// False for the stationary problem.
    pub transient: bool,
    pub t_final: f64,
}

/// Identifiers of the built-in cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseId {
    SteadySpace,
    TimeOnly,
    SpaceTime,
}

impl std::str::FromStr for CaseId {
    type Err = Error;
    fn from_str(s: &str) -> Result<CaseId> {
        match s {
            "steady_space" => Ok(CaseId::SteadySpace),
            "time_only" => Ok(CaseId::TimeOnly),
            "space_time" => Ok(CaseId::SpaceTime),
            other => Err(Error::Configuration(format!("unknown case id '{other}'"))),
        }
    }
}

/// Build a case, optionally overriding the dilation modulus (used by the
/// locking-robustness probe).
pub fn builtin_case(id: CaseId, lambda_override: Option<f64>) -> ManufacturedCase {
    match id {
        CaseId::SteadySpace => {
            let params =
                PhysicalParams::from_young_poisson(100.0, 0.3, 1.0, 1.0, 0.1, 1.0);
            let fields = Arc::new(SteadySpaceFields {
                alpha: params.alpha,
                lambda: params.lambda,
                mu: params.mu,
                c0: params.c0,
                kappa_over_eta: 1.0 / params.eta,
            });
            ManufacturedCase {
                name: "steady_space",
                params,
                fields,
                layout: BcLayout::ClampedEverywhere,
                transient: false,
                t_final: 0.0,
            }
        }
        CaseId::TimeOnly => {
            let mut params = PhysicalParams::new(1.0, 1.0e3, 1.0, 0.0, 1.0, 0.1);
            if let Some(l) = lambda_override {
                params.lambda = l;
            }
            let fields = Arc::new(TimeOnlyFields {
                alpha: params.alpha,
                lambda: params.lambda,
                c0: params.c0,
            });
            ManufacturedCase {
                name: "time_only",
                params,
                fields,
                layout: BcLayout::GammaBottomLeft,
                transient: true,
                t_final: 1.0,
            }
        }
        CaseId::SpaceTime => {
            let mut params = PhysicalParams::new(1.0, 1.0e4, 1.0, 0.0, 1.0, 1.0);
            if let Some(l) = lambda_override {
                params.lambda = l;
            }
            let fields = Arc::new(SpaceTimeFields {
                alpha: params.alpha,
                lambda: params.lambda,
                mu: params.mu,
                c0: params.c0,
                kappa: 1.0,
                eta: params.eta,
            });
            ManufacturedCase {
                name: "space_time",
                params,
                fields,
                layout: BcLayout::DirichletEverywhere,
                transient: true,
                t_final: 1.0,
            }
        }
    }
}

impl ManufacturedCase {
    /// Tag assignment for this case's boundary layout.
    pub fn tagger(&self) -> impl Fn(Point2<f64>) -> BoundaryTag + 'static {
        let layout = self.layout;
        move |mid: Point2<f64>| match layout {
            BcLayout::ClampedEverywhere | BcLayout::DirichletEverywhere => {
                BoundaryTag::GammaClamped
            }
            BcLayout::GammaBottomLeft => {
                if mid.x < 1e-12 || mid.y < 1e-12 {
                    BoundaryTag::GammaClamped
                } else {
                    BoundaryTag::SigmaTraction
                }
            }
        }
    }

    /// Boundary conditions induced by the exact solution.
    pub fn bc_spec(&self) -> BcSpec {
        let f = self.fields.clone();
        let mut spec = BcSpec::default();
        let u_dir = {
            let f = f.clone();
            DispBc::Dirichlet(Arc::new(move |p, t| f.u(p, t)))
        };
        let p_dir = {
            let f = f.clone();
            PressureBc::Dirichlet(Arc::new(move |p, t| f.p(p, t)))
        };
        let (mu, kappa, eta) = (self.params.mu, self.params.kappa.clone(), self.params.eta);
        let traction = {
            let f = f.clone();
            DispBc::Traction(Arc::new(move |p, n, t| {
                let g = f.grad_u(p, t);
                let eps = 0.5 * (g + g.transpose());
                (2.0 * mu * eps - f.psi(p, t) * Matrix2::identity()) * n
            }))
        };
        let flux = {
            let f = f.clone();
            PressureBc::Flux(Arc::new(move |p, n, t| {
                (kappa.eval(p) * f.grad_p(p, t)).dot(n) / eta
            }))
        };
        match self.layout {
            BcLayout::ClampedEverywhere => {
                spec.displacement.insert(BoundaryTag::GammaClamped, u_dir);
                spec.pressure.insert(BoundaryTag::GammaClamped, flux);
            }
            BcLayout::DirichletEverywhere => {
                spec.displacement.insert(BoundaryTag::GammaClamped, u_dir);
                spec.pressure.insert(BoundaryTag::GammaClamped, p_dir);
            }
            BcLayout::GammaBottomLeft => {
                spec.displacement.insert(BoundaryTag::GammaClamped, u_dir);
                spec.pressure.insert(BoundaryTag::GammaClamped, flux);
                spec.displacement.insert(BoundaryTag::SigmaTraction, traction);
                spec.pressure.insert(BoundaryTag::SigmaTraction, p_dir);
            }
        }
        spec
    }
}

// ---------------------------------------------------------------------------
// Stationary case: trigonometric displacement/pressure on the unit square,
// clamped no-flux boundary (the solution satisfies u = 0 and ∂p/∂n = 0 on
// the whole boundary).
// ---------------------------------------------------------------------------
struct SteadySpaceFields {
    alpha: f64,
    lambda: f64,
    mu: f64,
    c0: f64,
    kappa_over_eta: f64,
}

impl SteadySpaceFields {
    fn trig(p: &Point2<f64>) -> (f64, f64, f64, f64, f64, f64, f64, f64) {
        let (x, y) = (p.x, p.y);
        (
            (PI * x).sin(),
            (PI * x).cos(),
            (2.0 * PI * x).sin(),
            (2.0 * PI * x).cos(),
            (PI * y).sin(),
            (PI * y).cos(),
            (2.0 * PI * y).sin(),
            (2.0 * PI * y).cos(),
        )
    }

    fn div_u(&self, p: &Point2<f64>) -> f64 {
        let (_, _, s2x, _, sy, _, _, _) = Self::trig(p);
        PI * s2x * sy * sy
    }

    fn grad_div_u(&self, p: &Point2<f64>) -> Vector2<f64> {
        let (_, _, s2x, c2x, sy, _, s2y, _) = Self::trig(p);
        Vector2::new(
            2.0 * PI * PI * c2x * sy * sy,
            PI * PI * s2x * s2y,
        )
    }
}

impl CaseFields for SteadySpaceFields {
    fn u(&self, p: &Point2<f64>, _t: f64) -> Vector2<f64> {
        let (sx, _, s2x, c2x, sy, _, s2y, c2y) = Self::trig(p);
        Vector2::new(
            -c2x * s2y + s2y + sx * sx * sy * sy,
            s2x * c2y - s2x,
        )
    }

    fn grad_u(&self, p: &Point2<f64>, _t: f64) -> Matrix2<f64> {
        let (sx, _, s2x, c2x, sy, _, s2y, c2y) = Self::trig(p);
        let u1x = 2.0 * PI * s2x * s2y + PI * s2x * sy * sy;
        let u1y = 2.0 * PI * c2y * (1.0 - c2x) + PI * sx * sx * s2y;
        let u2x = 2.0 * PI * c2x * (c2y - 1.0);
        let u2y = -2.0 * PI * s2x * s2y;
        Matrix2::new(u1x, u1y, u2x, u2y)
    }

    fn p(&self, p: &Point2<f64>, _t: f64) -> f64 {
        let (sx, _, _, _, sy, _, _, _) = Self::trig(p);
        sx * sx * sy * sy
    }

    fn grad_p(&self, p: &Point2<f64>, _t: f64) -> Vector2<f64> {
        let (sx, _, s2x, _, sy, _, s2y, _) = Self::trig(p);
        Vector2::new(PI * s2x * sy * sy, PI * sx * sx * s2y)
    }

    fn psi(&self, p: &Point2<f64>, t: f64) -> f64 {
        self.alpha * self.p(p, t) - self.lambda * self.div_u(p)
    }

    fn body(&self, p: &Point2<f64>, _t: f64) -> Vector2<f64> {
        let (sx, _, s2x, c2x, sy, _, s2y, c2y) = Self::trig(p);
        let pi2 = PI * PI;
        let u1xx = 4.0 * pi2 * c2x * s2y + 2.0 * pi2 * c2x * sy * sy;
        let u1yy = -4.0 * pi2 * s2y * (1.0 - c2x) + 2.0 * pi2 * sx * sx * c2y;
        let u1xy = 4.0 * pi2 * s2x * c2y + pi2 * s2x * s2y;
        let u2xx = -4.0 * pi2 * s2x * (c2y - 1.0);
        let u2yy = -4.0 * pi2 * s2x * c2y;
        let u2xy = -4.0 * pi2 * c2x * s2y;
        let div_eps = Vector2::new(
            u1xx + 0.5 * (u1yy + u2xy),
            0.5 * (u2xx + u1xy) + u2yy,
        );
        let grad_psi =
            self.alpha * self.grad_p(p, 0.0) - self.lambda * self.grad_div_u(p);
        -2.0 * self.mu * div_eps + grad_psi
    }

    fn source(&self, p: &Point2<f64>, t: f64) -> f64 {
        // Stationary mass balance: c0 p + α div u − (κ/η) Δp.
        let (sx, _, _, c2x, sy, _, _, c2y) = Self::trig(p);
        let lap_p = 2.0 * PI * PI * (c2x * sy * sy + sx * sx * c2y);
        self.c0 * self.p(p, t) + self.alpha * self.div_u(p) - self.kappa_over_eta * lap_p
    }
}

// ---------------------------------------------------------------------------
// Time-resolved case: fields linear in space so the spatial discretization is
// exact and the backward-Euler error dominates.
// ---------------------------------------------------------------------------
struct TimeOnlyFields {
    alpha: f64,
    lambda: f64,
    c0: f64,
}

impl CaseFields for TimeOnlyFields {
    fn u(&self, p: &Point2<f64>, t: f64) -> Vector2<f64> {
        100.0 * t.sin() * Vector2::new(p.x / self.lambda + p.y, p.x + p.y / self.lambda)
    }

    fn grad_u(&self, _p: &Point2<f64>, t: f64) -> Matrix2<f64> {
        let s = 100.0 * t.sin();
        Matrix2::new(s / self.lambda, s, s, s / self.lambda)
    }

    fn p(&self, p: &Point2<f64>, t: f64) -> f64 {
        t.sin() * (p.x + p.y)
    }

    fn grad_p(&self, _p: &Point2<f64>, t: f64) -> Vector2<f64> {
        Vector2::new(t.sin(), t.sin())
    }

    fn psi(&self, p: &Point2<f64>, t: f64) -> f64 {
        // div u = 200 sin(t) / λ.
        self.alpha * self.p(p, t) - 200.0 * t.sin()
    }

    fn body(&self, _p: &Point2<f64>, t: f64) -> Vector2<f64> {
        // Strains are constant in space; the load reduces to ∇ψ = α ∇p.
        self.alpha * t.sin() * Vector2::new(1.0, 1.0)
    }

    fn source(&self, p: &Point2<f64>, t: f64) -> f64 {
        // Pressure is harmonic; only the time derivatives contribute.
        let storage = self.c0 + self.alpha * self.alpha / self.lambda;
        let dpdt = t.cos() * (p.x + p.y);
        let dpsidt = self.alpha * dpdt - 200.0 * t.cos();
        storage * dpdt - self.alpha / self.lambda * dpsidt
    }
}

// ---------------------------------------------------------------------------
// Space-time case: exponential decay in time, trigonometric in space, with
// div u -> 0 as λ -> ∞ (locking-robustness family).
// ---------------------------------------------------------------------------
struct SpaceTimeFields {
    alpha: f64,
    lambda: f64,
    mu: f64,
    c0: f64,
    kappa: f64,
    eta: f64,
}

impl SpaceTimeFields {
    fn beta(&self) -> f64 {
        1.0 / (self.mu + self.lambda)
    }

    fn div_u(&self, p: &Point2<f64>, t: f64) -> f64 {
        self.beta() * PI * (-t).exp() * (PI * (p.x + p.y)).sin()
    }
}

impl CaseFields for SpaceTimeFields {
    fn u(&self, p: &Point2<f64>, t: f64) -> Vector2<f64> {
        let e = (-t).exp();
        let b = self.beta();
        let (x, y) = (p.x, p.y);
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let (s2x, c2x) = ((2.0 * PI * x).sin(), (2.0 * PI * x).cos());
        let (s2y, c2y) = ((2.0 * PI * y).sin(), (2.0 * PI * y).cos());
        Vector2::new(
            -e * s2y * (1.0 - c2x) + e * b * sx * sy,
            e * s2x * (1.0 - c2y) + e * b * sx * sy,
        )
    }

    fn grad_u(&self, p: &Point2<f64>, t: f64) -> Matrix2<f64> {
        let e = (-t).exp();
        let b = self.beta();
        let (x, y) = (p.x, p.y);
        let (sx, cx) = ((PI * x).sin(), (PI * x).cos());
        let (sy, cy) = ((PI * y).sin(), (PI * y).cos());
        let (s2x, c2x) = ((2.0 * PI * x).sin(), (2.0 * PI * x).cos());
        let (s2y, c2y) = ((2.0 * PI * y).sin(), (2.0 * PI * y).cos());
        let u1x = -2.0 * PI * e * s2y * s2x + e * b * PI * cx * sy;
        let u1y = -2.0 * PI * e * c2y * (1.0 - c2x) + e * b * PI * sx * cy;
        let u2x = 2.0 * PI * e * c2x * (1.0 - c2y) + e * b * PI * cx * sy;
        let u2y = 2.0 * PI * e * s2x * s2y + e * b * PI * sx * cy;
        Matrix2::new(u1x, u1y, u2x, u2y)
    }

    fn p(&self, p: &Point2<f64>, t: f64) -> f64 {
        (-t).exp() * (PI * p.x).sin() * (PI * p.y).sin()
    }

    fn grad_p(&self, p: &Point2<f64>, t: f64) -> Vector2<f64> {
        let e = (-t).exp();
        Vector2::new(
            PI * e * (PI * p.x).cos() * (PI * p.y).sin(),
            PI * e * (PI * p.x).sin() * (PI * p.y).cos(),
        )
    }

    fn psi(&self, p: &Point2<f64>, t: f64) -> f64 {
        self.alpha * self.p(p, t) - self.lambda * self.div_u(p, t)
    }

    fn body(&self, p: &Point2<f64>, t: f64) -> Vector2<f64> {
        let e = (-t).exp();
        let b = self.beta();
        let pi2 = PI * PI;
        let (x, y) = (p.x, p.y);
        let (sx, cx) = ((PI * x).sin(), (PI * x).cos());
        let (sy, cy) = ((PI * y).sin(), (PI * y).cos());
        let (s2x, c2x) = ((2.0 * PI * x).sin(), (2.0 * PI * x).cos());
        let (s2y, c2y) = ((2.0 * PI * y).sin(), (2.0 * PI * y).cos());
        let u1xx = -4.0 * pi2 * e * c2x * s2y - e * b * pi2 * sx * sy;
        let u1yy = 4.0 * pi2 * e * s2y * (1.0 - c2x) - e * b * pi2 * sx * sy;
        let u1xy = -4.0 * pi2 * e * s2x * c2y + e * b * pi2 * cx * cy;
        let u2xx = -4.0 * pi2 * e * s2x * (1.0 - c2y) - e * b * pi2 * sx * sy;
        let u2yy = 4.0 * pi2 * e * s2x * c2y - e * b * pi2 * sx * sy;
        let u2xy = 4.0 * pi2 * e * c2x * s2y + e * b * pi2 * cx * cy;
        let div_eps = Vector2::new(
            u1xx + 0.5 * (u1yy + u2xy),
            0.5 * (u2xx + u1xy) + u2yy,
        );
        let grad_div = b * pi2 * e * (PI * (x + y)).cos() * Vector2::new(1.0, 1.0);
        let grad_psi = self.alpha * self.grad_p(p, t) - self.lambda * grad_div;
        -2.0 * self.mu * div_eps + grad_psi
    }

    fn source(&self, p: &Point2<f64>, t: f64) -> f64 {
        let storage = self.c0 + self.alpha * self.alpha / self.lambda;
        let lap_p = -2.0 * PI * PI * self.p(p, t);
        // ∂t of both pressures is the negative of the field.
        -storage * self.p(p, t) + self.alpha / self.lambda * self.psi(p, t)
            - self.kappa / self.eta * lap_p
    }
}

// ---------------------------------------------------------------------------
// Footing scenario.
// ---------------------------------------------------------------------------

/// Gradual compression of a poroelastic block: sinusoidal traction pulse on
/// the middle half of the top edge, clamped sides and bottom, drained
/// boundary (zero pressure) everywhere.
pub struct FootingScenario {
    pub params: PhysicalParams,
    pub t_final: f64,
    pub steps: usize,
    /// Peak traction magnitude (applied downward).
    pub magnitude: f64,
}

impl Default for FootingScenario {
    fn default() -> Self {
        FootingScenario {
            params: PhysicalParams::from_young_poisson(
                3.0e4, 0.49995, 1.0, 1.0e-3, 1.0, 1.0e-4,
            ),
            t_final: 0.5,
            steps: 5,
            magnitude: 1.5e4,
        }
    }
}

/// Boundary tag for the load-free part of the top edge.
pub const TOP_FREE: BoundaryTag = BoundaryTag::User(2);

impl FootingScenario {
    pub fn tagger(&self) -> impl Fn(Point2<f64>) -> BoundaryTag + 'static {
        |mid: Point2<f64>| {
            if mid.y > 1.0 - 1e-12 {
                if mid.x > 0.25 && mid.x < 0.75 {
                    BoundaryTag::SigmaTraction
                } else {
                    TOP_FREE
                }
            } else {
                BoundaryTag::GammaClamped
            }
        }
    }

    pub fn bc_spec(&self) -> BcSpec {
        let mut spec = BcSpec::default();
        let zero_p: PressureBc = PressureBc::Dirichlet(Arc::new(|_, _| 0.0));
        spec.displacement.insert(
            BoundaryTag::GammaClamped,
            DispBc::Dirichlet(Arc::new(|_, _| Vector2::zeros())),
        );
        spec.pressure.insert(BoundaryTag::GammaClamped, zero_p.clone());
        let m = self.magnitude;
        spec.displacement.insert(
            BoundaryTag::SigmaTraction,
            DispBc::Traction(Arc::new(move |_, _, t| {
                Vector2::new(0.0, -m * (PI * t).sin())
            })),
        );
        spec.pressure.insert(BoundaryTag::SigmaTraction, zero_p.clone());
        spec.displacement.insert(
            TOP_FREE,
            DispBc::Traction(Arc::new(|_, _, _| Vector2::zeros())),
        );
        spec.pressure.insert(TOP_FREE, zero_p);
        spec
    }
}
