//! One-step updates and trajectory runners for the discrete-time algorithms,
//! plus the state liftings that turn momentum recursions into fixed-point
//! templates `X⁺ = Φ(X, √s)`.

use crate::problem::{Objective, ProxFunction, SaddleSystem, Trajectory};
use crate::{Error, Matrix, Result, Vector};

/// Momentum schedule as a function of `τ = √s`, normalized so `β(0) = 1`.
pub type BetaFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

const SOLVER_TOL: f64 = 1e-12;
const SOLVER_MAX_ITERS: usize = 100;
const FIXED_POINT_ITERS: usize = 30;

fn check_finite(v: &Vector, context: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::non_finite(context));
    }
    Ok(())
}

/// Gradient descent `x⁺ = x − s∇F(x)`.
pub fn step_gd(x: &Vector, f: &Objective, s: f64) -> Result<Vector> {
    let out = x - f.grad(x) * s;
    check_finite(&out, "step_gd")?;
    Ok(out)
}

/// Heavy-ball `x⁺ = x + β(x − x_prev) − s∇F(x)`.
pub fn step_hb(x: &Vector, x_prev: &Vector, f: &Objective, beta: f64, s: f64) -> Result<Vector> {
    let out = x + (x - x_prev) * beta - f.grad(x) * s;
    check_finite(&out, "step_hb")?;
    Ok(out)
}

/// General accelerated update
/// `x⁺ = x − s∇F(x) + β(x − x_prev) − [δ∇F(x) − η∇F(x_prev)]`.
///
/// `δ = η = sβ` recovers the gradient-correction form of Nesterov's method;
/// `δ = η = 0` recovers heavy-ball.
pub fn step_nag_general(
    x: &Vector,
    x_prev: &Vector,
    f: &Objective,
    beta: f64,
    delta: f64,
    eta: f64,
    s: f64,
) -> Result<Vector> {
    let g = f.grad(x);
    let g_prev = f.grad(x_prev);
    let out = x + (x - x_prev) * beta - &g * s - (g * delta - g_prev * eta);
    check_finite(&out, "step_nag_general")?;
    Ok(out)
}

/// Dual mirror descent `z⁺ = z − s∇F(∇φ*(z))`.
pub fn step_md_dual(z: &Vector, f: &Objective, prox: &ProxFunction, s: f64) -> Result<Vector> {
    let x = prox.grad_phi_star(z);
    check_finite(&x, "step_md_dual mirror map")?;
    let out = z - f.grad(&x) * s;
    check_finite(&out, "step_md_dual")?;
    Ok(out)
}

/// Accelerated mirror descent in explicit dual form:
/// `z⁺ = z − s(k+1)/2 ∇F(x)`;
/// `x⁺ = 2/(k+3) ∇φ*(z⁺) + (k+1)/(k+3)(x − s∇F(x))`.
pub fn step_amd(
    x: &Vector,
    z: &Vector,
    k: usize,
    f: &Objective,
    prox: &ProxFunction,
    s: f64,
) -> Result<(Vector, Vector)> {
    let g = f.grad(x);
    let z_new = z - &g * (s * (k as f64 + 1.0) / 2.0);
    let w = k as f64 + 3.0;
    let x_new = prox.grad_phi_star(&z_new) * (2.0 / w) + (x - g * s) * ((k as f64 + 1.0) / w);
    check_finite(&x_new, "step_amd")?;
    Ok((x_new, z_new))
}

/// Explicit/implicit schemes for the monotone operator `M` of a saddle system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimaxScheme {
    /// `z⁺ = z − sM(z)`
    Gda,
    /// `z⁺ = z − sM(z⁺)`
    Ppm,
    /// `z⁺ = z − sM(z − sM(z))`
    Egm,
    /// Sequential proximal subproblems with extrapolation `θ` from the system.
    PdhgCp,
}

/// Solves `residual(u) = 0`: a few fixed-point sweeps `u ← u − residual(u)`
/// while they help, then Newton with the exact Jacobian. One Newton step is
/// exact for affine residuals.
fn solve_implicit<R, J>(init: &Vector, residual: R, jacobian: J) -> Result<Vector>
where
    R: Fn(&Vector) -> Vector,
    J: Fn(&Vector) -> Matrix,
{
    let mut u = init.clone();
    let mut res = residual(&u);
    let mut res_norm = res.norm();
    let mut iters = 0;
    while res_norm > SOLVER_TOL && iters < FIXED_POINT_ITERS {
        let trial = &u - &res;
        let trial_res = residual(&trial);
        let trial_norm = trial_res.norm();
        if !trial_norm.is_finite() || trial_norm >= 0.9 * res_norm {
            break; // stalled; hand off to Newton
        }
        u = trial;
        res = trial_res;
        res_norm = trial_norm;
        iters += 1;
    }
    while res_norm > SOLVER_TOL && iters < SOLVER_MAX_ITERS {
        let jac = jacobian(&u);
        let delta = jac
            .lu()
            .solve(&res)
            .ok_or(Error::SolverFailed {
                residual: res_norm,
                iters,
            })?;
        u -= delta;
        res = residual(&u);
        res_norm = res.norm();
        if !res_norm.is_finite() {
            return Err(Error::non_finite("implicit solve"));
        }
        iters += 1;
    }
    if res_norm > SOLVER_TOL {
        return Err(Error::SolverFailed {
            residual: res_norm,
            iters,
        });
    }
    Ok(u)
}

/// One step of the chosen minimax scheme.
pub fn step_minimax(
    z: &Vector,
    sys: &SaddleSystem,
    s: f64,
    scheme: MinimaxScheme,
) -> Result<Vector> {
    if s <= 0.0 {
        return Err(Error::Parameter("step size must be positive".into()));
    }
    let out = match scheme {
        MinimaxScheme::Gda => z - sys.eval_m(z)? * s,
        MinimaxScheme::Egm => {
            let mid = z - sys.eval_m(z)? * s;
            z - sys.eval_m(&mid)? * s
        }
        MinimaxScheme::Ppm => {
            if sys.is_bilinear() {
                let dim = sys.dim();
                let lhs = Matrix::identity(dim, dim) + sys.q_matrix() * s;
                lhs.lu()
                    .solve(z)
                    .ok_or_else(|| Error::Parameter("singular implicit system".into()))?
            } else {
                let dim = sys.dim();
                solve_implicit(
                    z,
                    |u| u - z + sys.eval_m(u).expect("dim checked") * s,
                    |u| Matrix::identity(dim, dim) + sys.jac_m(u).expect("dim checked") * s,
                )?
            }
        }
        MinimaxScheme::PdhgCp => {
            sys.eval_m(z)?; // dimension check
            let (x, y) = sys.split(z);
            let theta = sys.theta();
            let aty = sys.a().transpose() * &y;
            // x⁺ = x − s(∇F(x⁺) + Aᵀy)
            let n = sys.n();
            let x_new = solve_implicit(
                &x,
                |u| u - &x + (sys.grad_f(u) + &aty) * s,
                |u| Matrix::identity(n, n) + sys.hess_f(u) * s,
            )?;
            // y⁺ = y − s(∇G(y⁺) − A(x⁺ + θ(x⁺ − x)))
            let extrapolated = &x_new + (&x_new - &x) * theta;
            let ax = sys.a() * extrapolated;
            let m = sys.m();
            let y_new = solve_implicit(
                &y,
                |u| u - &y + (sys.grad_g(u) - &ax) * s,
                |u| Matrix::identity(m, m) + sys.hess_g(u) * s,
            )?;
            sys.join(&x_new, &y_new)
        }
    };
    check_finite(&out, "step_minimax")?;
    Ok(out)
}

/// Runs a minimax scheme for `n_steps`, returning states on the grid `t_k = ks`.
pub fn run_minimax(
    z0: &Vector,
    sys: &SaddleSystem,
    s: f64,
    scheme: MinimaxScheme,
    n_steps: usize,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(z0.clone());
    for _ in 0..n_steps {
        let next = step_minimax(states.last().unwrap(), sys, s, scheme)?;
        states.push(next);
    }
    Ok(Trajectory::from_states(states, s))
}

/// Runs dual mirror descent, grid step `s`.
pub fn run_md_dual(
    z0: &Vector,
    f: &Objective,
    prox: &ProxFunction,
    s: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(z0.clone());
    for _ in 0..n_steps {
        let next = step_md_dual(states.last().unwrap(), f, prox, s)?;
        states.push(next);
    }
    Ok(Trajectory::from_states(states, s))
}

/// Runs a two-term momentum recursion with the convention `x_1 = x_0`,
/// returning the iterates `x_0, x_1, …, x_{n_steps}`. The schedule closures
/// receive the iterate index `k` of the step producing `x_{k+1}`.
pub fn run_two_term<B, D, E>(
    x0: &Vector,
    f: &Objective,
    s: f64,
    beta: B,
    delta: D,
    eta: E,
    n_steps: usize,
) -> Result<Vec<Vector>>
where
    B: Fn(usize) -> f64,
    D: Fn(usize) -> f64,
    E: Fn(usize) -> f64,
{
    let mut xs = Vec::with_capacity(n_steps + 1);
    xs.push(x0.clone());
    if n_steps == 0 {
        return Ok(xs);
    }
    xs.push(x0.clone());
    for k in 1..n_steps {
        let next = step_nag_general(
            &xs[k],
            &xs[k - 1],
            f,
            beta(k),
            delta(k),
            eta(k),
            s,
        )?;
        xs.push(next);
    }
    Ok(xs)
}

/// State of a lifted momentum template: primal `x`, companion `v` (the
/// velocity, or the dual variable for mirror-descent lifting), and the time
/// coordinate for schedules that depend on it.
#[derive(Debug, Clone)]
pub struct LiftedState {
    pub x: Vector,
    pub v: Vector,
    pub t: Option<f64>,
}

impl LiftedState {
    pub fn xv(x: Vector, v: Vector) -> Self {
        LiftedState { x, v, t: None }
    }

    pub fn xvt(x: Vector, v: Vector, t: f64) -> Self {
        LiftedState { x, v, t: Some(t) }
    }

    /// Flattens to `[x; v]` or `[x; v; t]` for trajectory storage and as an
    /// ODE initial state.
    pub fn flatten(&self) -> Vector {
        let extra = usize::from(self.t.is_some());
        let mut out = Vector::zeros(self.x.len() + self.v.len() + extra);
        out.rows_mut(0, self.x.len()).copy_from(&self.x);
        out.rows_mut(self.x.len(), self.v.len()).copy_from(&self.v);
        if let Some(t) = self.t {
            out[self.x.len() + self.v.len()] = t;
        }
        out
    }
}

/// Exact fixed-point templates `X⁺ = Φ(X, √s)` for the momentum methods.
/// Each variant satisfies `Φ(X, 0) = X` identically, and stepping with
/// `τ = √s` reproduces the corresponding two-term recursion exactly.
pub enum Lifted<'a> {
    /// Heavy-ball with schedule `β(τ)`: `v⁺ = β(τ)v − τ∇F(x)`, `x⁺ = x + τv⁺`.
    Hb { f: &'a Objective, beta: BetaFn },
    /// Constant-`β(τ)` accelerated gradient:
    /// `x⁺ = x + τβ²v − τ²(1+β)∇F(x)`, `v⁺ = βv − τ∇F(x)`.
    NagSc { f: &'a Objective, beta: BetaFn },
    /// Time-dependent `β = 1 − 3τ/t` variant with `t⁺ = t + τ` and the
    /// velocity renormalized by the incoming `β` so the lifting is exact.
    NagC { f: &'a Objective },
    /// Accelerated mirror descent carrying the dual variable in `v`.
    Amd {
        f: &'a Objective,
        prox: &'a ProxFunction,
    },
}

impl<'a> Lifted<'a> {
    /// Heavy-ball template; rejects schedules with `β(0) ≠ 1`.
    pub fn hb(f: &'a Objective, beta: BetaFn) -> Result<Self> {
        if (beta(0.0) - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "momentum schedule must satisfy beta(0) = 1, got {}",
                beta(0.0)
            )));
        }
        Ok(Lifted::Hb { f, beta })
    }

    /// Heavy-ball with `β(τ) = (1 − √μ τ)²`.
    pub fn hb_polyak(f: &'a Objective) -> Result<Self> {
        let mu = f.mu();
        Self::hb(f, Box::new(move |tau| (1.0 - mu.sqrt() * tau).powi(2)))
    }

    /// Heavy-ball with `β(τ) = (1 − √μ τ)/(1 + √μ τ)`.
    pub fn hb_alternate(f: &'a Objective) -> Result<Self> {
        let mu = f.mu();
        Self::hb(
            f,
            Box::new(move |tau| (1.0 - mu.sqrt() * tau) / (1.0 + mu.sqrt() * tau)),
        )
    }

    /// Strongly convex accelerated gradient, `β(τ) = (1 − √μ τ)/(1 + √μ τ)`.
    pub fn nag_sc(f: &'a Objective) -> Result<Self> {
        if f.mu() <= 0.0 {
            return Err(Error::Config(
                "this momentum schedule needs strong convexity (mu > 0)".into(),
            ));
        }
        let mu = f.mu();
        let beta: BetaFn = Box::new(move |tau| (1.0 - mu.sqrt() * tau) / (1.0 + mu.sqrt() * tau));
        if (beta(0.0) - 1.0).abs() > 1e-12 {
            return Err(Error::Config("beta(0) must be 1".into()));
        }
        Ok(Lifted::NagSc { f, beta })
    }

    pub fn nag_c(f: &'a Objective) -> Self {
        Lifted::NagC { f }
    }

    pub fn amd(f: &'a Objective, prox: &'a ProxFunction) -> Self {
        Lifted::Amd { f, prox }
    }

    /// Applies `Φ(X, τ)`.
    pub fn phi(&self, state: &LiftedState, tau: f64) -> Result<LiftedState> {
        let out = match self {
            Lifted::Hb { f, beta } => {
                let b = beta(tau);
                let v_new = &state.v * b - f.grad(&state.x) * tau;
                let x_new = &state.x + &v_new * tau;
                LiftedState {
                    x: x_new,
                    v: v_new,
                    t: state.t,
                }
            }
            Lifted::NagSc { f, beta } => {
                let b = beta(tau);
                let g = f.grad(&state.x);
                let x_new = &state.x + &state.v * (tau * b * b) - &g * (tau * tau * (1.0 + b));
                let v_new = &state.v * b - g * tau;
                LiftedState {
                    x: x_new,
                    v: v_new,
                    t: state.t,
                }
            }
            Lifted::NagC { f } => {
                let t = state
                    .t
                    .ok_or_else(|| Error::Config("time coordinate required".into()))?;
                let b = 1.0 - 3.0 * tau / t;
                let b_next = 1.0 - 3.0 * tau / (t + tau);
                if b_next == 0.0 {
                    return Err(Error::Config("degenerate time coordinate".into()));
                }
                let g = f.grad(&state.x);
                let x_new = &state.x + &state.v * (tau * b * b) - &g * (tau * tau * (1.0 + b));
                let v_new = (&state.v * b - g * tau) * (b / b_next);
                LiftedState {
                    x: x_new,
                    v: v_new,
                    t: Some(t + tau),
                }
            }
            Lifted::Amd { f, prox } => {
                let t = state
                    .t
                    .ok_or_else(|| Error::Config("time coordinate required".into()))?;
                let g = f.grad(&state.x);
                let z_new = &state.v - &g * (tau * (t / 2.0 - tau));
                let w = 2.0 * tau / t;
                let x_new = &state.x * (1.0 - w) + prox.grad_phi_star(&z_new) * w
                    - g * (tau * tau * (1.0 - w));
                LiftedState {
                    x: x_new,
                    v: z_new,
                    t: Some(t + tau),
                }
            }
        };
        check_finite(&out.x, "lifted step")?;
        check_finite(&out.v, "lifted step")?;
        Ok(out)
    }

    /// One discrete step, `Φ(X, √s)`.
    pub fn step(&self, state: &LiftedState, s: f64) -> Result<LiftedState> {
        self.phi(state, s.sqrt())
    }

    /// Runs `n_steps` of the template; flattened states on the grid
    /// `t_k = k√s`.
    pub fn run(&self, init: &LiftedState, s: f64, n_steps: usize) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut current = init.clone();
        states.push(current.flatten());
        for _ in 0..n_steps {
            current = self.step(&current, s)?;
            states.push(current.flatten());
        }
        Ok(Trajectory::from_states(states, s.sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn unit_quadratic() -> Objective {
        Objective::quadratic(Matrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn hb_stationary_fixed_point() {
        let f = unit_quadratic();
        let x = scalar(0.0);
        let out = step_hb(&x, &x, &f, 0.5, 0.1).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn hb_lessard_first_step() {
        let f = Objective::piecewise_lessard();
        let x = scalar(3.25);
        let out = step_hb(&x, &x, &f, 4.0 / 9.0, 1.0 / 9.0).unwrap();
        assert_abs_diff_eq!(out[0], 3.25 - 57.25 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn hb_polyak_critically_damped() {
        // μ = L = 1, s = 4/(√L+√μ)² = 1, β = 0: one step lands on x*.
        let f = unit_quadratic();
        let out = step_hb(&scalar(0.8), &scalar(0.8), &f, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 0.0);
    }

    #[test]
    fn nag_general_reduces_to_hb() {
        let f = Objective::piecewise_lessard();
        let x = scalar(2.5);
        let xp = scalar(2.1);
        let hb = step_hb(&x, &xp, &f, 0.4, 0.05).unwrap();
        let nag = step_nag_general(&x, &xp, &f, 0.4, 0.0, 0.0, 0.05).unwrap();
        assert_eq!(hb, nag);
    }

    #[test]
    fn nag_c_hand_step() {
        // β_1 = 1/4, δ = η = sβ, equal history points kill the correction.
        let f = unit_quadratic();
        let s = 0.1;
        let beta = 1.0 / 4.0;
        let out =
            step_nag_general(&scalar(1.0), &scalar(1.0), &f, beta, s * beta, s * beta, s).unwrap();
        assert_abs_diff_eq!(out[0], 0.9, epsilon = 1e-14);
    }

    #[test]
    fn nag_sc_hand_step() {
        let f = unit_quadratic();
        let s = 0.04;
        let beta = (1.0 - 0.2) / (1.0 + 0.2);
        let out =
            step_nag_general(&scalar(1.0), &scalar(1.0), &f, beta, s * beta, s * beta, s).unwrap();
        assert_abs_diff_eq!(out[0], 0.96, epsilon = 1e-14);
    }

    #[test]
    fn md_dual_euclidean_is_gd() {
        let f = unit_quadratic();
        let prox = ProxFunction::euclidean(1);
        let z = scalar(1.0);
        let md = step_md_dual(&z, &f, &prox, 0.1).unwrap();
        let gd = step_gd(&z, &f, 0.1).unwrap();
        assert_eq!(md, gd);
    }

    #[test]
    fn md_dual_scaled_prox() {
        let f = unit_quadratic();
        let prox = ProxFunction::quadratic(Matrix::from_element(1, 1, 2.0)).unwrap();
        let out = step_md_dual(&scalar(1.0), &f, &prox, 0.1).unwrap();
        assert_abs_diff_eq!(out[0], 0.95, epsilon = 1e-14);
    }

    #[test]
    fn amd_hand_step() {
        let f = unit_quadratic();
        let prox = ProxFunction::euclidean(1);
        let (x, z) = step_amd(&scalar(1.0), &scalar(1.0), 0, &f, &prox, 0.1).unwrap();
        assert_abs_diff_eq!(z[0], 0.95, epsilon = 1e-14);
        assert_abs_diff_eq!(x[0], (2.0 / 3.0) * 0.95 + (1.0 / 3.0) * 0.9, epsilon = 1e-14);
    }

    #[test]
    fn amd_stationary_fixed_point() {
        let f = unit_quadratic();
        let prox = ProxFunction::euclidean(1);
        let (x, z) = step_amd(&scalar(0.0), &scalar(0.0), 5, &f, &prox, 0.1).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(z[0], 0.0);
    }

    #[test]
    fn ppm_exact_solve() {
        let sys = SaddleSystem::bilinear(Matrix::from_element(1, 1, 1.0), 0.0).unwrap();
        let z = Vector::from_vec(vec![1.0, 1.0]);
        let out = step_minimax(&z, &sys, 1.0, MinimaxScheme::Ppm).unwrap();
        assert_abs_diff_eq!(out[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pdhg_hand_step() {
        let sys = SaddleSystem::bilinear(Matrix::from_element(1, 1, 1.0), 0.0).unwrap();
        let z = Vector::from_vec(vec![1.0, 1.0]);
        let out = step_minimax(&z, &sys, 0.3, MinimaxScheme::PdhgCp).unwrap();
        assert_abs_diff_eq!(out[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 1.21, epsilon = 1e-12);
    }

    #[test]
    fn minimax_stationary_point_fixed() {
        let sys = SaddleSystem::quartic_scalar(1.0).unwrap();
        let z = Vector::zeros(2);
        for scheme in [
            MinimaxScheme::Gda,
            MinimaxScheme::Ppm,
            MinimaxScheme::Egm,
            MinimaxScheme::PdhgCp,
        ] {
            let out = step_minimax(&z, &sys, 0.1, scheme).unwrap();
            assert!(out.norm() < 1e-12, "{scheme:?} moved off z*");
        }
    }

    #[test]
    fn gda_norm_growth_on_skew() {
        let sys = SaddleSystem::bilinear(Matrix::from_element(1, 1, 1.0), 0.0).unwrap();
        let s = 0.3;
        let traj = run_minimax(&Vector::from_vec(vec![1.0, 1.0]), &sys, s, MinimaxScheme::Gda, 10)
            .unwrap();
        let factor = (1.0 + s * s).sqrt();
        for k in 1..traj.len() {
            let ratio = traj.states[k].norm() / traj.states[k - 1].norm();
            assert_abs_diff_eq!(ratio, factor, epsilon = 1e-12);
        }
    }

    #[test]
    fn ppm_nonexpansive_on_skew() {
        let sys = SaddleSystem::bilinear(Matrix::from_row_slice(1, 2, &[1.0, -0.5]), 0.0).unwrap();
        for i in 0..10 {
            let z = Vector::from_vec(vec![i as f64 * 0.3 - 1.0, 0.7, -0.2 * i as f64]);
            let out = step_minimax(&z, &sys, 0.4, MinimaxScheme::Ppm).unwrap();
            assert!(out.norm() <= z.norm() + 1e-12);
        }
    }

    #[test]
    fn ppm_newton_matches_exact_on_bilinear() {
        // force the generic implicit path via the quartic system at z where
        // the smooth parts vanish slowly, and compare against tiny residual
        let sys = SaddleSystem::quartic_scalar(0.0).unwrap();
        let z = Vector::from_vec(vec![0.5, -0.25]);
        let s = 0.05;
        let out = step_minimax(&z, &sys, s, MinimaxScheme::Ppm).unwrap();
        let res = (&out - &z + sys.eval_m(&out).unwrap() * s).norm();
        assert!(res < 1e-11, "residual {res}");
    }

    #[test]
    fn lifted_fixed_point_at_zero() {
        let f = unit_quadratic();
        let prox = ProxFunction::euclidean(1);
        let variants: Vec<Lifted> = vec![
            Lifted::hb_polyak(&f).unwrap(),
            Lifted::hb_alternate(&f).unwrap(),
            Lifted::nag_sc(&f).unwrap(),
            Lifted::nag_c(&f),
            Lifted::amd(&f, &prox),
        ];
        for variant in &variants {
            for i in 0..5 {
                let state = LiftedState::xvt(scalar(0.3 * i as f64 - 1.0), scalar(0.7 - i as f64), 1.5);
                let out = variant.phi(&state, 0.0).unwrap();
                assert_eq!(out.x, state.x);
                assert_eq!(out.v, state.v);
                assert_eq!(out.t, state.t);
            }
        }
    }

    #[test]
    fn hb_beta_zero_rejected() {
        let f = unit_quadratic();
        assert!(Lifted::hb(&f, Box::new(|_| 0.5)).is_err());
    }

    #[test]
    fn hb_polyak_hand_step() {
        let f = unit_quadratic();
        let s: f64 = 0.02;
        let lifted = Lifted::hb_polyak(&f).unwrap();
        let out = lifted
            .step(&LiftedState::xv(scalar(0.8), scalar(0.8)), s)
            .unwrap();
        let beta = (1.0 - s.sqrt()).powi(2);
        let v_expected = beta * 0.8 - s.sqrt() * 0.8;
        assert_abs_diff_eq!(out.v[0], v_expected, epsilon = 1e-12);
        assert_abs_diff_eq!(out.x[0], 0.8 + s.sqrt() * v_expected, epsilon = 1e-12);
    }

    #[test]
    fn run_zero_steps_returns_init() {
        let f = unit_quadratic();
        let lifted = Lifted::hb_polyak(&f).unwrap();
        let init = LiftedState::xv(scalar(0.8), scalar(0.8));
        let traj = lifted.run(&init, 0.02, 0).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.states[0], init.flatten());
    }

    #[test]
    fn run_matches_manual_composition() {
        let f = unit_quadratic();
        let lifted = Lifted::hb_polyak(&f).unwrap();
        let init = LiftedState::xv(scalar(0.8), scalar(0.8));
        let traj = lifted.run(&init, 0.02, 3).unwrap();
        let mut state = init;
        for k in 1..=3 {
            state = lifted.step(&state, 0.02).unwrap();
            assert_eq!(traj.states[k], state.flatten());
        }
    }

    // exact equivalence between the lifted templates and two-term recursions
    fn assert_equivalent<B>(lifted: &Lifted, f: &Objective, s: f64, beta_k: B, history: bool)
    where
        B: Fn(usize) -> f64,
    {
        let n = 120;
        let x0 = scalar(0.8);
        let xs = run_two_term(
            &x0,
            f,
            s,
            &beta_k,
            |k| if history { s * beta_k(k) } else { 0.0 },
            |k| if history { s * beta_k(k) } else { 0.0 },
            n,
        )
        .unwrap();
        // lifted launch from k = 1 with the defining velocity
        let tau = s.sqrt();
        let b1 = beta_k(1);
        let g0 = f.grad(&xs[0]);
        let correction = if history { &g0 * s } else { Vector::zeros(1) };
        let v1 = (&xs[1] - &xs[0] + correction) / (tau * b1);
        let mut state = if matches!(lifted, Lifted::NagC { .. }) {
            LiftedState::xvt(xs[1].clone(), v1, 4.0 * tau)
        } else {
            LiftedState::xv(xs[1].clone(), v1)
        };
        for k in 1..n {
            state = lifted.step(&state, s).unwrap();
            let diff = (&state.x - &xs[k + 1]).norm();
            assert!(diff < 1e-10, "divergence {diff} at step {k}");
        }
    }

    #[test]
    fn lifted_hb_matches_recursion() {
        let f = unit_quadratic();
        let s = 0.02;
        let beta = (1.0 - (s as f64).sqrt()).powi(2);
        let lifted = Lifted::hb_polyak(&f).unwrap();
        assert_equivalent(&lifted, &f, s, |_| beta, false);
    }

    #[test]
    fn lifted_nag_sc_matches_recursion() {
        let f = unit_quadratic();
        let s = 0.04;
        let beta = (1.0 - (s as f64).sqrt()) / (1.0 + (s as f64).sqrt());
        let lifted = Lifted::nag_sc(&f).unwrap();
        assert_equivalent(&lifted, &f, s, |_| beta, true);
    }

    #[test]
    fn lifted_nag_c_matches_recursion() {
        let f = unit_quadratic();
        let lifted = Lifted::nag_c(&f);
        assert_equivalent(&lifted, &f, 0.04, |k| k as f64 / (k as f64 + 3.0), true);
    }

    #[test]
    fn lifted_amd_matches_recursion() {
        let f = unit_quadratic();
        let prox = ProxFunction::quadratic(Matrix::from_element(1, 1, 2.0)).unwrap();
        let lifted = Lifted::amd(&f, &prox);
        let s = 0.04_f64;
        let tau = s.sqrt();
        let (mut x, mut z) = (scalar(0.8), scalar(1.6));
        let mut state = LiftedState::xvt(x.clone(), z.clone(), 3.0 * tau);
        for k in 0..120 {
            let (xn, zn) = step_amd(&x, &z, k, &f, &prox, s).unwrap();
            x = xn;
            z = zn;
            state = lifted.step(&state, s).unwrap();
            assert!((&state.x - &x).norm() < 1e-10, "x mismatch at {k}");
            assert!((&state.v - &z).norm() < 1e-10, "z mismatch at {k}");
        }
    }

    #[test]
    fn hb_equals_nag_beta_identity() {
        // (1 − √(μs))² = (1 − √(μs))/(1 + √(μs)) · (1 − μs)
        for &(mu, s) in &[(1.0, 0.04), (0.25, 0.1), (4.0, 0.01)] {
            let root = (mu * s as f64).sqrt();
            let polyak = (1.0 - root).powi(2);
            let alternate = (1.0 - root) / (1.0 + root) * (1.0 - mu * s);
            assert_abs_diff_eq!(polyak, alternate, epsilon = 1e-12);
        }
    }
}
