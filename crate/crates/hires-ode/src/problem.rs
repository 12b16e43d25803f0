//! Problem oracles: smooth (strongly) convex objectives, bilinear-coupled
//! saddle systems, quadratic prox-functions, and finite-difference Jacobians.

use crate::{Error, Matrix, Result, Vector};

/// Default step for central finite differences.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

type ValueFn = Box<dyn Fn(&Vector) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;
type HessVecFn = Box<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// A smooth convex objective with value/gradient oracles, optional exact
/// Hessian action, and `(μ, L)` metadata.
pub struct Objective {
    dim: usize,
    mu: f64,
    lipschitz: f64,
    value: ValueFn,
    grad: GradFn,
    hess_vec: Option<HessVecFn>,
    minimizer: Option<Vector>,
}

impl Objective {
    pub fn new(
        dim: usize,
        mu: f64,
        lipschitz: f64,
        value: ValueFn,
        grad: GradFn,
        hess_vec: Option<HessVecFn>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("objective dimension must be positive".into()));
        }
        if !(mu >= 0.0 && lipschitz > 0.0 && mu <= lipschitz) {
            return Err(Error::Parameter(format!(
                "need 0 <= mu <= L, got mu = {mu}, L = {lipschitz}"
            )));
        }
        Ok(Objective {
            dim,
            mu,
            lipschitz,
            value,
            grad,
            hess_vec,
            minimizer: None,
        })
    }

    /// `F(x) = ½ xᵀPx` with `P` symmetric positive semidefinite.
    pub fn quadratic(p: Matrix) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::Input("quadratic matrix must be square".into()));
        }
        let dim = p.nrows();
        let eigs = p.clone().symmetric_eigenvalues();
        let mu = eigs.min();
        let l = eigs.max();
        let p2 = p.clone();
        let p3 = p.clone();
        let mut obj = Objective::new(
            dim,
            mu.max(0.0),
            l.max(f64::MIN_POSITIVE),
            Box::new(move |x| 0.5 * x.dot(&(&p * x))),
            Box::new(move |x| &p2 * x),
            Some(Box::new(move |_x, v| &p3 * v)),
        )?;
        obj.minimizer = Some(Vector::zeros(dim));
        Ok(obj)
    }

    /// Scalar `F(x) = ¼ x⁴` (no strong convexity, no global Lipschitz
    /// gradient; the stated `L` is an effective bound for unit-box tests).
    pub fn quartic_quarter() -> Self {
        let mut obj = Objective::new(
            1,
            0.0,
            3.0,
            Box::new(|x| 0.25 * x[0].powi(4)),
            Box::new(|x| Vector::from_element(1, x[0].powi(3))),
            Some(Box::new(|x, v| Vector::from_element(1, 3.0 * x[0] * x[0] * v[0]))),
        )
        .expect("valid");
        obj.minimizer = Some(Vector::zeros(1));
        obj
    }

    /// The scalar objective with piecewise linear gradient
    /// `∇F(x) = 25x (x<1); x+24 (1<=x<2); 25x−24 (x>=2)`,
    /// strongly convex with `μ = 1`, `L = 25`. The value is the
    /// piecewise quadratic antiderivative normalized by `F(0) = 0`.
    pub fn piecewise_lessard() -> Self {
        let mut obj = Objective::new(
            1,
            1.0,
            25.0,
            Box::new(|x| {
                let x = x[0];
                if x < 1.0 {
                    12.5 * x * x
                } else if x < 2.0 {
                    0.5 * x * x + 24.0 * x - 12.0
                } else {
                    12.5 * x * x - 24.0 * x + 36.0
                }
            }),
            Box::new(|x| {
                let x = x[0];
                let g = if x < 1.0 {
                    25.0 * x
                } else if x < 2.0 {
                    x + 24.0
                } else {
                    25.0 * x - 24.0
                };
                Vector::from_element(1, g)
            }),
            Some(Box::new(|x, v| {
                let x = x[0];
                let h = if (1.0..2.0).contains(&x) { 1.0 } else { 25.0 };
                Vector::from_element(1, h * v[0])
            })),
        )
        .expect("valid");
        obj.minimizer = Some(Vector::zeros(1));
        obj
    }

    /// Drops the exact Hessian oracle (`hess_vec` falls back to finite
    /// differences; order-1 field construction will refuse this oracle).
    pub fn strip_hessian(mut self) -> Self {
        self.hess_vec = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    /// Condition number `L/μ`; `None` when `μ = 0`.
    pub fn kappa(&self) -> Option<f64> {
        (self.mu > 0.0).then(|| self.lipschitz / self.mu)
    }
    pub fn has_exact_hessian(&self) -> bool {
        self.hess_vec.is_some()
    }
    /// Known minimizer, when the instance carries one.
    pub fn minimizer(&self) -> Option<&Vector> {
        self.minimizer.as_ref()
    }
    pub fn with_minimizer(mut self, x_star: Vector) -> Self {
        self.minimizer = Some(x_star);
        self
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        (self.grad)(x)
    }

    /// Hessian action `∇²F(x)·v`: exact when available, otherwise a central
    /// finite difference of the gradient with step [`DEFAULT_FD_STEP`].
    pub fn hess_vec(&self, x: &Vector, v: &Vector) -> Vector {
        match &self.hess_vec {
            Some(h) => h(x, v),
            None => {
                let h = DEFAULT_FD_STEP;
                let xp = x + v * h;
                let xm = x - v * h;
                ((self.grad)(&xp) - (self.grad)(&xm)) / (2.0 * h)
            }
        }
    }
}

/// Quadratic prox-function `φ(x) = ½ xᵀPx` with `P` symmetric positive
/// definite, so that `∇φ* = P⁻¹` exactly.
pub struct ProxFunction {
    p: Matrix,
    p_inv: Matrix,
}

impl ProxFunction {
    pub fn quadratic(p: Matrix) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::Input("prox matrix must be square".into()));
        }
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Parameter("prox matrix must be invertible".into()))?;
        Ok(ProxFunction { p, p_inv })
    }

    pub fn euclidean(dim: usize) -> Self {
        ProxFunction {
            p: Matrix::identity(dim, dim),
            p_inv: Matrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn phi(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.p * x))
    }

    pub fn grad_phi(&self, x: &Vector) -> Vector {
        &self.p * x
    }

    pub fn grad_phi_star(&self, z: &Vector) -> Vector {
        &self.p_inv * z
    }

    /// Action of `∇²φ*(z) = P⁻¹` (constant for the quadratic family).
    pub fn hess_phi_star_vec(&self, _z: &Vector, v: &Vector) -> Vector {
        &self.p_inv * v
    }

    /// Bregman divergence `D_φ(x, y)`; used for validation only.
    pub fn bregman(&self, x: &Vector, y: &Vector) -> f64 {
        self.phi(x) - self.phi(y) - self.grad_phi(y).dot(&(x - y))
    }
}

type BlockGradFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;
type BlockHessFn = Box<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// One smooth convex block (`F` on the primal side or `G` on the dual side)
/// of a saddle system.
pub struct SaddleBlock {
    dim: usize,
    grad: BlockGradFn,
    hess: BlockHessFn,
    lipschitz: f64,
    zero: bool,
}

impl SaddleBlock {
    pub fn zero(dim: usize) -> Self {
        SaddleBlock {
            dim,
            grad: Box::new(move |_| Vector::zeros(dim)),
            hess: Box::new(move |_| Matrix::zeros(dim, dim)),
            lipschitz: 0.0,
            zero: true,
        }
    }

    pub fn new(dim: usize, grad: BlockGradFn, hess: BlockHessFn, lipschitz: f64) -> Self {
        SaddleBlock {
            dim,
            grad,
            hess,
            lipschitz,
            zero: false,
        }
    }
}

/// Bilinear-coupled saddle problem `min_x max_y F(x) + ⟨y, Ax⟩ − G(y)`
/// exposing the monotone operator `M`, the smooth part `H`, the skew
/// coupling `Q`, and the extrapolation weighting `I_θ`.
pub struct SaddleSystem {
    f: SaddleBlock,
    g: SaddleBlock,
    a: Matrix,
    theta: f64,
}

impl SaddleSystem {
    pub fn new(f: SaddleBlock, g: SaddleBlock, a: Matrix, theta: f64) -> Result<Self> {
        if a.nrows() != g.dim || a.ncols() != f.dim {
            return Err(Error::Input(format!(
                "coupling matrix is {}x{} but blocks have dims n = {}, m = {}",
                a.nrows(),
                a.ncols(),
                f.dim,
                g.dim
            )));
        }
        if !(-1.0..=1.0).contains(&theta) {
            return Err(Error::Parameter(format!(
                "extrapolation parameter must lie in [-1, 1], got {theta}"
            )));
        }
        Ok(SaddleSystem { f, g, a, theta })
    }

    /// Pure bilinear saddle `L(x, y) = ⟨y, Ax⟩` (`F = G = 0`).
    pub fn bilinear(a: Matrix, theta: f64) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        SaddleSystem::new(SaddleBlock::zero(n), SaddleBlock::zero(m), a, theta)
    }

    /// The scalar saddle `L(x, y) = x⁴ + xy − y²`, i.e. `F(x) = x⁴`,
    /// `A = [1]`, `G(y) = y²`. The stated Lipschitz constant of `∇F`
    /// is the effective bound `12` on the unit box.
    pub fn quartic_scalar(theta: f64) -> Result<Self> {
        let f = SaddleBlock::new(
            1,
            Box::new(|x| Vector::from_element(1, 4.0 * x[0].powi(3))),
            Box::new(|x| Matrix::from_element(1, 1, 12.0 * x[0] * x[0])),
            12.0,
        );
        let g = SaddleBlock::new(
            1,
            Box::new(|y| Vector::from_element(1, 2.0 * y[0])),
            Box::new(|_| Matrix::from_element(1, 1, 2.0)),
            2.0,
        );
        SaddleSystem::new(f, g, Matrix::from_element(1, 1, 1.0), theta)
    }

    pub fn n(&self) -> usize {
        self.f.dim
    }
    pub fn m(&self) -> usize {
        self.g.dim
    }
    pub fn dim(&self) -> usize {
        self.f.dim + self.g.dim
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn a(&self) -> &Matrix {
        &self.a
    }
    /// `L := max(L_f, L_g)`.
    pub fn lipschitz(&self) -> f64 {
        self.f.lipschitz.max(self.g.lipschitz)
    }

    pub fn grad_f(&self, x: &Vector) -> Vector {
        (self.f.grad)(x)
    }
    pub fn grad_g(&self, y: &Vector) -> Vector {
        (self.g.grad)(y)
    }
    pub fn hess_f(&self, x: &Vector) -> Matrix {
        (self.f.hess)(x)
    }
    pub fn hess_g(&self, y: &Vector) -> Matrix {
        (self.g.hess)(y)
    }
    /// True when `F = G = 0`, i.e. `M(z) = Qz` is linear.
    pub fn is_bilinear(&self) -> bool {
        self.f.zero && self.g.zero
    }

    fn check_dim(&self, z: &Vector) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    pub fn split<'a>(&self, z: &'a Vector) -> (Vector, Vector) {
        let x = Vector::from(z.rows(0, self.n()));
        let y = Vector::from(z.rows(self.n(), self.m()));
        (x, y)
    }

    pub fn join(&self, x: &Vector, y: &Vector) -> Vector {
        let mut z = Vector::zeros(self.dim());
        z.rows_mut(0, self.n()).copy_from(x);
        z.rows_mut(self.n(), self.m()).copy_from(y);
        z
    }

    /// The monotone operator `M(z) = (∇F(x) + Aᵀy, ∇G(y) − Ax)`.
    pub fn eval_m(&self, z: &Vector) -> Result<Vector> {
        self.check_dim(z)?;
        let (x, y) = self.split(z);
        let top = (self.f.grad)(&x) + self.a.transpose() * &y;
        let bottom = (self.g.grad)(&y) - &self.a * &x;
        let out = self.join(&top, &bottom);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("eval_m"));
        }
        Ok(out)
    }

    /// Smooth part `H(z) = (∇F(x), ∇G(y))`, so that `M(z) = H(z) + Qz`.
    pub fn eval_h(&self, z: &Vector) -> Result<Vector> {
        self.check_dim(z)?;
        let (x, y) = self.split(z);
        Ok(self.join(&(self.f.grad)(&x), &(self.g.grad)(&y)))
    }

    /// Skew coupling `Q = [[0, Aᵀ], [−A, 0]]`.
    pub fn q_matrix(&self) -> Matrix {
        let (n, m) = (self.n(), self.m());
        let mut q = Matrix::zeros(n + m, n + m);
        q.view_mut((0, n), (n, m)).copy_from(&self.a.transpose());
        q.view_mut((n, 0), (m, n)).copy_from(&(-&self.a));
        q
    }

    /// `I_θ = diag(θI, −I)`.
    pub fn i_theta_matrix(&self) -> Matrix {
        let (n, m) = (self.n(), self.m());
        let mut d = Matrix::zeros(n + m, n + m);
        for i in 0..n {
            d[(i, i)] = self.theta;
        }
        for i in n..n + m {
            d[(i, i)] = -1.0;
        }
        d
    }

    /// `Q_θ = Q·I_θ`.
    pub fn q_theta_matrix(&self) -> Matrix {
        self.q_matrix() * self.i_theta_matrix()
    }

    /// Exact block Jacobian `∇M(z) = [[∇²F(x), Aᵀ], [−A, ∇²G(y)]]`.
    pub fn jac_m(&self, z: &Vector) -> Result<Matrix> {
        self.check_dim(z)?;
        let (x, y) = self.split(z);
        let (n, m) = (self.n(), self.m());
        let mut j = Matrix::zeros(n + m, n + m);
        j.view_mut((0, 0), (n, n)).copy_from(&(self.f.hess)(&x));
        j.view_mut((0, n), (n, m)).copy_from(&self.a.transpose());
        j.view_mut((n, 0), (m, n)).copy_from(&(-&self.a));
        j.view_mut((n, n), (m, m)).copy_from(&(self.g.hess)(&y));
        Ok(j)
    }
}

/// Central-difference Jacobian of a vector map: entry `(i, j)` is
/// `(map(z + h e_j) − map(z − h e_j))_i / (2h)`.
pub fn fd_jacobian<F>(map: F, z: &Vector, h_fd: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Vector,
{
    if h_fd <= 0.0 {
        return Err(Error::Input("finite-difference step must be positive".into()));
    }
    let probe = map(z);
    let (rows, cols) = (probe.len(), z.len());
    let mut jac = Matrix::zeros(rows, cols);
    for j in 0..cols {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[j] += h_fd;
        zm[j] -= h_fd;
        let col = (map(&zp) - map(&zm)) / (2.0 * h_fd);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("fd_jacobian"));
        }
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Time-stamped sequence of states on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub grid_step: f64,
}

impl Trajectory {
    pub fn new(grid_step: f64) -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            grid_step,
        }
    }

    /// Builds from states at `t_k = k·grid_step` (timestamps are exact
    /// multiples, never accumulated sums).
    pub fn from_states(states: Vec<Vector>, grid_step: f64) -> Self {
        let times = (0..states.len()).map(|k| k as f64 * grid_step).collect();
        Trajectory {
            times,
            states,
            grid_step,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&Vector> {
        self.states.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vec2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    #[test]
    fn eval_m_bilinear_unit() {
        // L(x, y) = xy
        let sys = SaddleSystem::bilinear(Matrix::from_element(1, 1, 1.0), 0.0).unwrap();
        let m = sys.eval_m(&vec2(1.0, 1.0)).unwrap();
        assert_eq!(m, vec2(1.0, -1.0));
    }

    #[test]
    fn eval_m_zero_operator() {
        let sys = SaddleSystem::bilinear(Matrix::zeros(2, 3), 0.0).unwrap();
        let z = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 7.0]);
        assert_eq!(sys.eval_m(&z).unwrap(), Vector::zeros(5));
    }

    #[test]
    fn eval_m_quartic_instance() {
        // L(x, y) = x⁴ + xy − y²: M(1, 1) = (4 + 1, 2 − 1) = (5, 1).
        let sys = SaddleSystem::quartic_scalar(0.0).unwrap();
        let m = sys.eval_m(&vec2(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(m[0], 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eval_m_dimension_error() {
        let sys = SaddleSystem::quartic_scalar(0.0).unwrap();
        assert!(sys.eval_m(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn q_is_skew_and_decomposition_holds() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, -0.5, 2.0, 0.25, 3.0, -1.0]);
        let sys = SaddleSystem::bilinear(a, 1.0).unwrap();
        let q = sys.q_matrix();
        assert_eq!(q.transpose(), -&q);
        let z = Vector::from_vec(vec![0.3, -1.2, 0.7, 2.0, -0.4]);
        assert!((&q * &z).dot(&z).abs() < 1e-12);
        // M(z) − H(z) − Qz = 0
        let m = sys.eval_m(&z).unwrap();
        let h = sys.eval_h(&z).unwrap();
        assert!((m - h - q * z).norm() < 1e-14);
    }

    #[test]
    fn fd_jacobian_linear_maps_exact() {
        let z = Vector::from_vec(vec![0.2, -0.7]);
        let id = fd_jacobian(|v| v.clone(), &z, 1e-4).unwrap();
        assert!((id - Matrix::identity(2, 2)).norm() < 1e-10);

        let q = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let qc = q.clone();
        let jac = fd_jacobian(move |v| &qc * v, &z, 1e-4).unwrap();
        assert!((jac - q).norm() < 1e-10);
    }

    #[test]
    fn fd_jacobian_quartic_gradient() {
        // ∇F for F = ¼x⁴; second derivative at x = 2 is 3·4 = 12.
        let f = Objective::quartic_quarter();
        let x = Vector::from_element(1, 2.0);
        let jac = fd_jacobian(|v| f.grad(v), &x, 1e-4).unwrap();
        assert_abs_diff_eq!(jac[(0, 0)], 12.0, epsilon = 1e-6);
    }

    #[test]
    fn fd_jacobian_of_eval_m_matches_block_jacobian() {
        let sys = SaddleSystem::quartic_scalar(0.0).unwrap();
        let z = vec2(0.8, -0.3);
        let fd = fd_jacobian(|v| sys.eval_m(v).unwrap(), &z, 1e-4).unwrap();
        let exact = sys.jac_m(&z).unwrap();
        assert!((fd - exact).norm() < 1e-5);
    }

    #[test]
    fn quadratic_objective_is_exact() {
        let p = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = Objective::quadratic(p.clone()).unwrap();
        let x = vec2(1.0, -2.0);
        assert!((f.grad(&x) - &p * &x).norm() == 0.0);
        let v = vec2(0.3, 0.4);
        assert!((f.hess_vec(&x, &v) - &p * &v).norm() == 0.0);
        assert!(f.mu() <= f.lipschitz());
    }

    #[test]
    fn fd_hessian_fallback_close_to_exact() {
        let exact = Objective::quartic_quarter();
        let stripped = Objective::quartic_quarter().strip_hessian();
        assert!(!stripped.has_exact_hessian());
        let x = Vector::from_element(1, 1.3);
        let v = Vector::from_element(1, 1.0);
        let diff = (exact.hess_vec(&x, &v) - stripped.hess_vec(&x, &v)).norm();
        assert!(diff < 1e-8, "fd fallback off by {diff}");
    }

    #[test]
    fn lessard_value_is_continuous_antiderivative() {
        let f = Objective::piecewise_lessard();
        for &(a, b) in &[(1.0 - 1e-9, 1.0 + 1e-9), (2.0 - 1e-9, 2.0 + 1e-9)] {
            let fa = f.value(&Vector::from_element(1, a));
            let fb = f.value(&Vector::from_element(1, b));
            assert!((fa - fb).abs() < 1e-6);
        }
        assert_eq!(f.value(&Vector::zeros(1)), 0.0);
        assert_abs_diff_eq!(f.grad(&Vector::from_element(1, 3.25))[0], 57.25);
    }

    #[test]
    fn prox_fenchel_inversion() {
        let p = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let prox = ProxFunction::quadratic(p).unwrap();
        for seed in 0..5 {
            let x = vec2(seed as f64 * 0.7 - 1.0, 0.3 * seed as f64);
            let back = prox.grad_phi_star(&prox.grad_phi(&x));
            assert!((back - x).norm() < 1e-12);
        }
    }

    #[test]
    fn trajectory_grid_is_exact_multiples() {
        let states = vec![Vector::zeros(1); 5];
        let t = Trajectory::from_states(states, 0.1);
        assert_eq!(t.times[4], 4.0 * 0.1);
        assert_eq!(t.len(), 5);
    }
}
