//! Corrected schemes: the O(s)-corrected primal-dual method (cPDHG) and the
//! O(√s)-corrected heavy-ball method (cHB), with parameter validation,
//! optimal parameter selection, and contraction certification.

use crate::problem::{Objective, SaddleSystem, Trajectory};
use crate::resolution::VectorField;
use crate::{Error, Matrix, Result, Vector};

/// Absolute slack absorbing floating-point rounding in theorem-exact
/// inequalities.
pub const CONTRACTION_SLACK: f64 = 1e-12;

/// Parameters of the corrected primal-dual scheme. `lipschitz` is the larger
/// of the two block constants; `q_norm` is the spectral norm of the coupling
/// matrix `Q`. For a bilinear instance (`lipschitz = 0`) the step-size bound
/// degenerates and only positivity of `s` is enforced.
#[derive(Debug, Clone, Copy)]
pub struct CpdhgParams {
    pub s: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub theta: f64,
    pub lipschitz: f64,
    pub q_norm: f64,
}

impl CpdhgParams {
    /// Validates against the system: the η-window `2η₂ < η₁ < 4 − 2θη₂`,
    /// positivity of `C1` and `C2`, and the three-way step-size bound
    /// (skipped when the instance is bilinear).
    pub fn new(sys: &SaddleSystem, s: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let q = sys.q_matrix();
        let q_norm = q.singular_values().max();
        let p = CpdhgParams {
            s,
            eta1,
            eta2,
            theta: sys.theta(),
            lipschitz: sys.lipschitz(),
            q_norm,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same validation but with only the continuous-flow requirements:
    /// the η-window and `0 < s < 2/L`.
    pub fn new_continuous(sys: &SaddleSystem, s: f64, eta1: f64, eta2: f64) -> Result<Self> {
        let q = sys.q_matrix();
        let p = CpdhgParams {
            s,
            eta1,
            eta2,
            theta: sys.theta(),
            lipschitz: sys.lipschitz(),
            q_norm: q.singular_values().max(),
        };
        p.validate_window()?;
        Ok(p)
    }

    fn validate_window(&self) -> Result<()> {
        if self.s <= 0.0 {
            return Err(Error::Parameter("step size must be positive".into()));
        }
        if self.eta1 <= 0.0 || self.eta2 <= 0.0 {
            return Err(Error::Parameter("eta1 and eta2 must be positive".into()));
        }
        if !(2.0 * self.eta2 < self.eta1 && self.eta1 < 4.0 - 2.0 * self.theta * self.eta2) {
            return Err(Error::Parameter(format!(
                "need 2*eta2 < eta1 < 4 - 2*theta*eta2, got eta1={}, eta2={}, theta={}",
                self.eta1, self.eta2, self.theta
            )));
        }
        if self.c1() <= 0.0 {
            return Err(Error::Parameter("C1 must be positive".into()));
        }
        if self.lipschitz > 0.0 && self.s >= 2.0 / self.lipschitz {
            return Err(Error::Parameter(format!(
                "need s < 2/L = {}, got s = {}",
                2.0 / self.lipschitz,
                self.s
            )));
        }
        if self.c2() <= 0.0 {
            return Err(Error::Parameter("C2 must be positive".into()));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.validate_window()?;
        if self.lipschitz > 0.0 && self.s > self.max_step() {
            return Err(Error::Parameter(format!(
                "step size {} exceeds the admissible bound {}",
                self.s,
                self.max_step()
            )));
        }
        Ok(())
    }

    /// The three-way step-size bound; `+∞` for bilinear instances.
    pub fn max_step(&self) -> f64 {
        let l = self.lipschitz;
        if l == 0.0 {
            return f64::INFINITY;
        }
        let coupling = self.q_norm * self.q_norm
            * (self.eta1 * self.eta1 + 4.0 * self.theta * self.theta * self.eta2 * self.eta2);
        let gap = self.eta1 - 2.0 * self.eta2;
        let b1 = 1.0 / l;
        let b2 = l * l * self.c1() / (4.0 * l * l + 2.0 * coupling);
        let b3 = 2.0 * l * l * gap / (gap * l * l * l + 8.0 * (2.0 * l * l + coupling));
        b1.min(b2).min(b3)
    }

    pub fn c1(&self) -> f64 {
        (4.0 - self.eta1 - 2.0 * self.theta * self.eta2) / 4.0
    }

    pub fn c2(&self) -> f64 {
        self.s * (2.0 - self.s * self.lipschitz) * (self.eta1 - 2.0 * self.eta2) / 4.0
    }
}

/// `η₁Q + 2η₂Q_θ`, the matrix multiplying `M(Z)` in the correction term.
pub fn cpdhg_correction_matrix(sys: &SaddleSystem, p: &CpdhgParams) -> Matrix {
    sys.q_matrix() * p.eta1 + sys.q_theta_matrix() * (2.0 * p.eta2)
}

/// The corrected flow `Z' = −M(Z) + (s/2)[η₁Q + 2η₂Q_θ]M(Z)`.
pub fn cpdhg_field<'a>(sys: &'a SaddleSystem, p: &CpdhgParams) -> VectorField<'a> {
    let correction = cpdhg_correction_matrix(sys, p) * (p.s / 2.0);
    VectorField::new(
        sys.dim(),
        0,
        format!("cpdhg(s={})", p.s),
        p.s,
        p.s,
        Box::new(move |z: &Vector| {
            let m = sys.eval_m(z).expect("dimension checked by the field");
            &correction * &m - m
        }),
        None,
    )
}

/// Explicit Euler on the corrected flow:
/// `Z⁺ = Z − sM(Z) + (s²/2)[η₁Q + 2η₂Q_θ]M(Z)`.
pub fn step_cpdhg(z: &Vector, sys: &SaddleSystem, p: &CpdhgParams) -> Result<Vector> {
    let field = cpdhg_field(sys, p);
    Ok(z + field.rhs(z)? * p.s)
}

pub fn run_cpdhg(
    z0: &Vector,
    sys: &SaddleSystem,
    p: &CpdhgParams,
    n_steps: usize,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut z = z0.clone();
    states.push(z.clone());
    for _ in 0..n_steps {
        z = step_cpdhg(&z, sys, p)?;
        states.push(z.clone());
    }
    Ok(Trajectory::from_states(states, p.s))
}

/// Parameters of the corrected heavy-ball scheme. `b` is the Lyapunov
/// velocity weight and `rho` the per-step contraction rate; both are derived.
#[derive(Debug, Clone, Copy)]
pub struct ChbParams {
    pub s: f64,
    pub eta: f64,
    pub mu: f64,
    pub lipschitz: f64,
    pub b: f64,
    pub rho: f64,
}

impl ChbParams {
    pub fn new(s: f64, eta: f64, mu: f64, lipschitz: f64) -> Result<Self> {
        if !(mu > 0.0 && lipschitz >= mu) {
            return Err(Error::Parameter("need L >= mu > 0".into()));
        }
        if s <= 0.0 || eta <= 0.0 {
            return Err(Error::Parameter("s and eta must be positive".into()));
        }
        let root = (mu * s).sqrt();
        let damping = 3.0 * eta * root;
        if damping >= 1.0 {
            return Err(Error::Parameter(format!(
                "need 3*eta*sqrt(mu*s) < 1, got {damping}"
            )));
        }
        let lhs = 9.0 * lipschitz * eta * eta * s
            + 4.0 * (1.0 + 2.5 * eta * root) * (1.0 - damping);
        if lhs > 12.0 * eta + CONTRACTION_SLACK {
            return Err(Error::Parameter(format!(
                "step-size condition violated: {} > {}",
                lhs,
                12.0 * eta
            )));
        }
        let b = mu * (1.0 - damping) / (1.0 + 2.5 * eta * root);
        let rho = root * (1.0 - damping);
        if rho <= 0.0 {
            return Err(Error::Parameter("contraction rate must be positive".into()));
        }
        Ok(ChbParams {
            s,
            eta,
            mu,
            lipschitz,
            b,
            rho,
        })
    }

    fn damping(&self) -> f64 {
        3.0 * self.eta * (self.mu * self.s).sqrt()
    }
}

/// The optimal `(η*, s*)` for given `(μ, L)`, giving contraction rate
/// `ρ = 6√μ/(11√μ + 6√L)`.
pub fn optimal_chb_params(mu: f64, lipschitz: f64) -> Result<ChbParams> {
    if !(mu > 0.0 && lipschitz >= mu) {
        return Err(Error::Parameter("need L >= mu > 0".into()));
    }
    let (rm, rl) = (mu.sqrt(), lipschitz.sqrt());
    let eta = rl * (11.0 * rm + 6.0 * rl) / (9.0 * (2.0 * rm + rl) * (2.0 * rm + rl));
    let s = 36.0 * (2.0 * rm + rl) * (2.0 * rm + rl)
        / (lipschitz * (11.0 * rm + 6.0 * rl) * (11.0 * rm + 6.0 * rl));
    ChbParams::new(s, eta, mu, lipschitz)
}

/// The corrected heavy-ball flow in `(x, w)` coordinates:
/// `x' = √μ(1−3η√(μs))(w−x) − (3/2)η√s∇F(x)`,
/// `w' = (1/2)(2+5η√(μs))(√μ(x−w) − ∇F(x)/√μ)`.
pub fn chb_field<'a>(f: &'a Objective, p: &ChbParams) -> VectorField<'a> {
    let n = f.dim();
    let rm = p.mu.sqrt();
    let cx = rm * (1.0 - p.damping());
    let cg = 1.5 * p.eta * p.s.sqrt();
    let cw = 0.5 * (2.0 + 5.0 * p.eta * (p.mu * p.s).sqrt());
    VectorField::new(
        2 * n,
        0,
        format!("chb(s={})", p.s),
        p.s,
        p.s.sqrt(),
        Box::new(move |z: &Vector| {
            let x = z.rows(0, n).into_owned();
            let w = z.rows(n, n).into_owned();
            let grad = f.grad(&x);
            let top = (&w - &x) * cx - &grad * cg;
            let bottom = ((&x - &w) * rm - grad / rm) * cw;
            let mut out = Vector::zeros(2 * n);
            out.rows_mut(0, n).copy_from(&top);
            out.rows_mut(n, n).copy_from(&bottom);
            out
        }),
        None,
    )
}

/// The same flow in `(x, v)` coordinates via `w = v/√μ + x`.
pub fn chb_field_xv<'a>(f: &'a Objective, p: &ChbParams) -> VectorField<'a> {
    let n = f.dim();
    let rm = p.mu.sqrt();
    let inner = chb_field(f, p);
    VectorField::new(
        2 * n,
        0,
        format!("chb-xv(s={})", p.s),
        p.s,
        p.s.sqrt(),
        Box::new(move |z: &Vector| {
            let x = z.rows(0, n).into_owned();
            let v = z.rows(n, n).into_owned();
            let mut xw = Vector::zeros(2 * n);
            xw.rows_mut(0, n).copy_from(&x);
            xw.rows_mut(n, n).copy_from(&(&v / rm + &x));
            let g = inner.rhs(&xw).expect("inner chb field is total");
            let gx = g.rows(0, n).into_owned();
            let gw = g.rows(n, n).into_owned();
            let mut out = Vector::zeros(2 * n);
            out.rows_mut(0, n).copy_from(&gx);
            out.rows_mut(n, n).copy_from(&((gw - &gx) * rm));
            out
        }),
        None,
    )
}

/// Semi-implicit step: the `x`-row is solved for `x⁺` (linear, closed form),
/// then the `w`-row for `w⁺` with `∇F(x⁺)` available.
pub fn step_chb(
    x: &Vector,
    w: &Vector,
    f: &Objective,
    p: &ChbParams,
) -> Result<(Vector, Vector)> {
    let rs = p.s.sqrt();
    let rm = p.mu.sqrt();
    let a1 = rs * rm * (1.0 - p.damping());
    let x_next = (x + w * a1 - f.grad(x) * (1.5 * p.eta * p.s)) / (1.0 + a1);
    let cw = 2.0 + 5.0 * p.eta * (p.mu * p.s).sqrt();
    let a2 = rs * rm / 2.0 * cw;
    let a3 = rs / (2.0 * rm) * cw;
    let w_next = (w + &x_next * a2 - f.grad(&x_next) * a3) / (1.0 + a2);
    Ok((x_next, w_next))
}

/// Runs cHB and returns the `(x, w)` trajectory on the `√s` grid.
pub fn run_chb(
    x0: &Vector,
    w0: &Vector,
    f: &Objective,
    p: &ChbParams,
    n_steps: usize,
) -> Result<Trajectory> {
    let n = f.dim();
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut x = x0.clone();
    let mut w = w0.clone();
    let pack = |x: &Vector, w: &Vector| {
        let mut z = Vector::zeros(2 * n);
        z.rows_mut(0, n).copy_from(x);
        z.rows_mut(n, n).copy_from(w);
        z
    };
    states.push(pack(&x, &w));
    for _ in 0..n_steps {
        let (xn, wn) = step_chb(&x, &w, f, p)?;
        x = xn;
        w = wn;
        states.push(pack(&x, &w));
    }
    Ok(Trajectory::from_states(states, p.s.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionVerdict {
    Pass,
    Fail { first_violation: usize },
}

impl ContractionVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, ContractionVerdict::Pass)
    }
}

/// Checks `E_{k+1} ≤ factor · E_k + slack` along a Lyapunov-value sequence;
/// a failure reports the first violating transition index.
pub fn certify_contraction(energies: &[f64], factor: f64) -> ContractionVerdict {
    for (k, pair) in energies.windows(2).enumerate() {
        if pair[1] > factor * pair[0] + CONTRACTION_SLACK {
            return ContractionVerdict::Fail {
                first_violation: k,
            };
        }
    }
    ContractionVerdict::Pass
}

/// Checks the global envelope `E_k ≤ E_0 · factor^k + slack`; weaker than the
/// per-step check, and the right form when only the accumulated rate is
/// guaranteed.
pub fn certify_envelope(energies: &[f64], factor: f64) -> ContractionVerdict {
    let e0 = match energies.first() {
        Some(&e) => e,
        None => return ContractionVerdict::Pass,
    };
    let mut bound = e0;
    for (k, &ek) in energies.iter().enumerate().skip(1) {
        bound *= factor;
        if ek > bound + CONTRACTION_SLACK {
            return ContractionVerdict::Fail { first_violation: k };
        }
    }
    ContractionVerdict::Pass
}

/// Per-step corrected-primal-dual decrease:
/// `E(Z⁺) − E(Z) ≤ −(sC1/2)⟨M(Z), Z−Z*⟩ − (sC2/2)‖Q(Z−Z*)‖² + slack`.
/// The factor `s` comes from `Z⁺ − Z = s·G(Z)` when the strong Lyapunov
/// inequality is applied to the displacement.
pub fn certify_cpdhg_decrease(
    traj: &Trajectory,
    sys: &SaddleSystem,
    p: &CpdhgParams,
    z_star: &Vector,
) -> ContractionVerdict {
    let q = sys.q_matrix();
    let energy = |z: &Vector| 0.5 * (z - z_star).norm_squared();
    for (k, pair) in traj.states.windows(2).enumerate() {
        let z = &pair[0];
        let gap = z - z_star;
        let m = match sys.eval_m(z) {
            Ok(m) => m,
            Err(_) => {
                return ContractionVerdict::Fail {
                    first_violation: k,
                }
            }
        };
        let bound = -0.5 * p.s * p.c1() * m.dot(&gap)
            - 0.5 * p.s * p.c2() * (&q * &gap).norm_squared();
        if energy(&pair[1]) - energy(z) > bound + CONTRACTION_SLACK {
            return ContractionVerdict::Fail {
                first_violation: k,
            };
        }
    }
    ContractionVerdict::Pass
}
