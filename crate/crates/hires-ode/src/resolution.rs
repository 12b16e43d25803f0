//! Construction of resolution-ODE vector fields: the exact coefficient
//! recursion for affine iteration maps at arbitrary order, the closed-form
//! first-order right-hand sides for every analyzed method, and the
//! literature-comparison models.

use std::rc::Rc;

use crate::problem::{fd_jacobian, Objective, ProxFunction, SaddleSystem, Trajectory};
use crate::{Error, Matrix, Result, Vector};

/// One affine map `z ↦ Gz + c`.
#[derive(Debug, Clone)]
pub struct AffineTerm {
    pub matrix: Matrix,
    pub offset: Vector,
}

impl AffineTerm {
    pub fn zeros(dim: usize) -> Self {
        AffineTerm {
            matrix: Matrix::zeros(dim, dim),
            offset: Vector::zeros(dim),
        }
    }

    pub fn eval(&self, z: &Vector) -> Vector {
        &self.matrix * z + &self.offset
    }

    fn scaled(&self, factor: f64) -> Self {
        AffineTerm {
            matrix: &self.matrix * factor,
            offset: &self.offset * factor,
        }
    }

    fn sub_assign(&mut self, other: &AffineTerm) {
        self.matrix -= &other.matrix;
        self.offset -= &other.offset;
    }

    /// `(∇self)·other` as an affine map: `H(Fz + e)`.
    fn jacobian_compose(&self, other: &AffineTerm) -> Self {
        AffineTerm {
            matrix: &self.matrix * &other.matrix,
            offset: &self.matrix * &other.offset,
        }
    }
}

/// Power-series presentation of an affine iteration map
/// `g(z, s) = Σ_j s^j (G_j z + c_j)` with `G_0 = I`, `c_0 = 0` (the
/// fixed-point normalization `g(z, 0) = z`).
pub struct AffineMapSeries {
    terms: Vec<AffineTerm>,
}

impl AffineMapSeries {
    pub fn new(terms: Vec<AffineTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Input("series needs at least the identity term".into()))?;
        let dim = first.matrix.nrows();
        if (&first.matrix - Matrix::identity(dim, dim)).norm() > 0.0 || first.offset.norm() > 0.0 {
            return Err(Error::Input(
                "series must start with the identity (fixed-point normalization)".into(),
            ));
        }
        Ok(AffineMapSeries { terms })
    }

    /// Highest usable resolution order: terms up to `j = r + 1` are needed
    /// for order `r`.
    pub fn order(&self) -> usize {
        self.terms.len().saturating_sub(2)
    }

    pub fn dim(&self) -> usize {
        self.terms[0].matrix.nrows()
    }

    fn padded(q: Matrix, mut powers: Vec<Matrix>, order: usize) -> Result<Self> {
        let dim = q.nrows();
        let mut terms = vec![AffineTerm {
            matrix: Matrix::identity(dim, dim),
            offset: Vector::zeros(dim),
        }];
        terms.push(AffineTerm {
            matrix: -q,
            offset: Vector::zeros(dim),
        });
        for _ in 2..=order + 1 {
            let matrix = if powers.is_empty() {
                Matrix::zeros(dim, dim)
            } else {
                powers.remove(0)
            };
            terms.push(AffineTerm {
                matrix,
                offset: Vector::zeros(dim),
            });
        }
        AffineMapSeries::new(terms)
    }

    /// `z − sQz` on a bilinear saddle.
    pub fn gda(sys: &SaddleSystem, order: usize) -> Result<Self> {
        Self::require_bilinear(sys)?;
        Self::padded(sys.q_matrix(), vec![], order)
    }

    /// `(I + sQ)⁻¹z = Σ (−sQ)^j z` truncated at `order + 1`.
    pub fn ppm(sys: &SaddleSystem, order: usize) -> Result<Self> {
        Self::require_bilinear(sys)?;
        let q = sys.q_matrix();
        let mut powers = Vec::new();
        let mut current = -&q * -&q; // (−Q)²
        for _ in 2..=order + 1 {
            powers.push(current.clone());
            current = &current * (-&q);
        }
        Self::padded(q, powers, order)
    }

    /// `z − sQ(z − sQz) = z − sQz + s²Q²z`, truncated after `s²`.
    pub fn egm(sys: &SaddleSystem, order: usize) -> Result<Self> {
        Self::require_bilinear(sys)?;
        let q = sys.q_matrix();
        let mut powers = vec![&q * &q];
        powers.extend((3..=order + 1).map(|_| Matrix::zeros(q.nrows(), q.ncols())));
        if order == 0 {
            powers.clear();
        }
        Self::padded(q, powers, order)
    }

    /// The sequential primal-dual update on a bilinear saddle:
    /// `x⁺ = x − sAᵀy`, `y⁺ = y + sA(x⁺ + θ(x⁺ − x))`, whose `s²` block is
    /// `−(1+θ)AAᵀ` acting on `y`.
    pub fn pdhg_cp(sys: &SaddleSystem, order: usize) -> Result<Self> {
        Self::require_bilinear(sys)?;
        let q = sys.q_matrix();
        let (n, m) = (sys.n(), sys.m());
        let aat = sys.a() * sys.a().transpose();
        let mut g2 = Matrix::zeros(n + m, n + m);
        g2.view_mut((n, n), (m, m))
            .copy_from(&(aat * (-(1.0 + sys.theta()))));
        let mut powers = vec![g2];
        powers.extend((3..=order + 1).map(|_| Matrix::zeros(n + m, n + m)));
        if order == 0 {
            powers.clear();
        }
        Self::padded(q, powers, order)
    }

    fn require_bilinear(sys: &SaddleSystem) -> Result<()> {
        if !sys.is_bilinear() {
            return Err(Error::Capability(
                "affine series construction needs a bilinear saddle".into(),
            ));
        }
        Ok(())
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// The coefficient recursion: given the series of the iteration map, returns
/// the affine maps `f_0, …, f_r` of the resolution ODE
/// `Z' = f_0(Z) + s f_1(Z) + ⋯ + s^r f_r(Z)`.
///
/// `f_0 = g_1`; `f_j = g_{j+1}/(j+1)! − Σ_{k=2}^{j+1} h_{k,j+1−k}/k!`, where
/// `h_{1,i} = f_i` and `h_{k,i} = Σ_{l≤i} ∇h_{k−1,l}·f_{i−l}`. All maps stay
/// affine, so the products are exact matrix arithmetic.
pub fn resolution_coeffs_affine(series: &AffineMapSeries, r: usize) -> Result<Vec<AffineTerm>> {
    if r > series.order() {
        return Err(Error::Input(format!(
            "requested order {r} exceeds series order {}",
            series.order()
        )));
    }
    let mut fs: Vec<AffineTerm> = Vec::with_capacity(r + 1);

    fn h_term(k: usize, i: usize, fs: &[AffineTerm], dim: usize) -> AffineTerm {
        if k == 1 {
            return fs[i].clone();
        }
        let mut acc = AffineTerm::zeros(dim);
        for l in 0..=i {
            let prev = h_term(k - 1, l, fs, dim);
            let composed = prev.jacobian_compose(&fs[i - l]);
            acc.matrix += composed.matrix;
            acc.offset += composed.offset;
        }
        acc
    }

    let dim = series.dim();
    for j in 0..=r {
        // g_{j+1}/(j+1)! is exactly the stored series term
        let mut f_j = series.terms[j + 1].clone();
        for k in 2..=j + 1 {
            let h = h_term(k, j + 1 - k, &fs, dim);
            f_j.sub_assign(&h.scaled(1.0 / factorial(k)));
        }
        fs.push(f_j);
    }
    Ok(fs)
}

type RhsFn<'a> = Box<dyn Fn(&Vector) -> Vector + 'a>;

/// A resolution-ODE right-hand side `Γ₀(X) + w·Γ₁(X)`, where the correction
/// weight `w` is `s` for the saddle/mirror families and `√s` for the momentum
/// families. `correction_scale` is a test hook that perturbs the correction
/// term; oracle-equivalence checks use it to confirm the term is live.
pub struct VectorField<'a> {
    dim: usize,
    order: usize,
    label: String,
    s: f64,
    correction_weight: f64,
    correction_scale: f64,
    gamma0: RhsFn<'a>,
    gamma1: Option<RhsFn<'a>>,
}

impl<'a> VectorField<'a> {
    pub fn new(
        dim: usize,
        order: usize,
        label: impl Into<String>,
        s: f64,
        correction_weight: f64,
        gamma0: RhsFn<'a>,
        gamma1: Option<RhsFn<'a>>,
    ) -> Self {
        VectorField {
            dim,
            order,
            label: label.into(),
            s,
            correction_weight,
            correction_scale: 1.0,
            gamma0,
            gamma1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Multiplies the correction term by `factor` (test hook).
    pub fn scale_correction(&mut self, factor: f64) {
        self.correction_scale *= factor;
    }

    pub fn rhs(&self, z: &Vector) -> Result<Vector> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        let mut out = (self.gamma0)(z);
        if self.order >= 1 {
            if let Some(gamma1) = &self.gamma1 {
                out += gamma1(z) * (self.correction_weight * self.correction_scale);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("field {}", self.label)));
        }
        Ok(out)
    }

    /// Builds a field directly from affine resolution coefficients
    /// (`f_0` plus, at order 1, the correction `s·f_1`).
    pub fn from_affine(coeffs: &[AffineTerm], s: f64, label: impl Into<String>) -> Result<Self> {
        let f0 = coeffs
            .first()
            .ok_or_else(|| Error::Input("need at least f_0".into()))?
            .clone();
        let order = (coeffs.len() - 1).min(1);
        let dim = f0.matrix.nrows();
        let gamma1: Option<RhsFn<'a>> = coeffs.get(1).map(|f1| {
            let f1 = f1.clone();
            Box::new(move |z: &Vector| f1.eval(z)) as RhsFn<'a>
        });
        Ok(VectorField::new(
            dim,
            order,
            label,
            s,
            s,
            Box::new(move |z| f0.eval(z)),
            gamma1,
        ))
    }
}

fn require_hessian(f: &Objective, order: usize, label: &str) -> Result<()> {
    if order >= 1 && !f.has_exact_hessian() {
        return Err(Error::Capability(format!(
            "order-1 field {label} needs an exact Hessian oracle"
        )));
    }
    Ok(())
}

fn split_xv(state: &Vector, n: usize) -> (Vector, Vector) {
    (
        Vector::from(state.rows(0, n)),
        Vector::from(state.rows(n, n)),
    )
}

fn join2(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

fn join2t(a: &Vector, b: &Vector, t: f64) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len() + 1);
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out[a.len() + b.len()] = t;
    out
}

/// `Z' = −M(Z) − (s/2)∇M(Z)M(Z)` (explicit descent-ascent; order 0 drops
/// the correction).
pub fn gda_field<'a>(sys: &'a SaddleSystem, s: f64, order: usize) -> VectorField<'a> {
    saddle_field(sys, s, order, "gda", -0.5, false)
}

/// `Z' = −M(Z) + (s/2)∇M(Z)M(Z)` (proximal-point and extragradient share it).
pub fn ppm_field<'a>(sys: &'a SaddleSystem, s: f64, order: usize) -> VectorField<'a> {
    saddle_field(sys, s, order, "ppm", 0.5, false)
}

/// `Z' = −M(Z) + (s/2)[∇M(Z) + 2Q_θ]M(Z)`.
pub fn pdhg_field<'a>(sys: &'a SaddleSystem, s: f64, order: usize) -> VectorField<'a> {
    saddle_field(sys, s, order, "pdhg", 0.5, true)
}

fn saddle_field<'a>(
    sys: &'a SaddleSystem,
    s: f64,
    order: usize,
    label: &str,
    jac_weight: f64,
    with_q_theta: bool,
) -> VectorField<'a> {
    let dim = sys.dim();
    let q_theta = sys.q_theta_matrix();
    let gamma1: Option<RhsFn<'a>> = (order >= 1).then(|| {
        Box::new(move |z: &Vector| {
            let m = sys.eval_m(z).expect("dim checked");
            let mut out = sys.jac_m(z).expect("dim checked") * &m * jac_weight;
            if with_q_theta {
                out += &q_theta * &m;
            }
            out
        }) as RhsFn<'a>
    });
    VectorField::new(
        dim,
        order.min(1),
        label,
        s,
        s,
        Box::new(move |z| -sys.eval_m(z).expect("dim checked")),
        gamma1,
    )
}

/// Dual mirror-descent field
/// `Z' = −∇F(∇φ*(Z)) − (s/2)∇²F(∇φ*(Z))∇²φ*(Z)∇F(∇φ*(Z))`.
pub fn md_dual_field<'a>(
    f: &'a Objective,
    prox: &'a ProxFunction,
    s: f64,
    order: usize,
) -> Result<VectorField<'a>> {
    require_hessian(f, order, "md-dual")?;
    let dim = f.dim();
    let gamma1: Option<RhsFn<'a>> = (order >= 1).then(|| {
        Box::new(move |z: &Vector| {
            let x = prox.grad_phi_star(z);
            let g = f.grad(&x);
            let inner = prox.hess_phi_star_vec(z, &g);
            f.hess_vec(&x, &inner) * (-0.5)
        }) as RhsFn<'a>
    });
    Ok(VectorField::new(
        dim,
        order.min(1),
        "md-dual",
        s,
        s,
        Box::new(move |z| -f.grad(&prox.grad_phi_star(z))),
        gamma1,
    ))
}

/// Heavy-ball family field in `(x, v)` with schedule derivatives
/// `b1 = β'(0)`, `b2 = β''(0)`:
/// `Γ₀ = (v, b1·v − ∇F)`,
/// `Γ₁ = ½(b1·v − ∇F, (b2 − b1²)v + ∇²F·v + b1·∇F)`.
pub fn hb_field<'a>(
    f: &'a Objective,
    s: f64,
    b1: f64,
    b2: f64,
    order: usize,
    label: impl Into<String>,
) -> Result<VectorField<'a>> {
    let label = label.into();
    require_hessian(f, order, &label)?;
    let n = f.dim();
    let gamma1: Option<RhsFn<'a>> = (order >= 1).then(|| {
        Box::new(move |state: &Vector| {
            let (x, v) = split_xv(state, n);
            let g = f.grad(&x);
            let top = &v * b1 - &g;
            let bottom = &v * (b2 - b1 * b1) + f.hess_vec(&x, &v) + &g * b1;
            join2(&(top * 0.5), &(bottom * 0.5))
        }) as RhsFn<'a>
    });
    Ok(VectorField::new(
        2 * n,
        order.min(1),
        label,
        s,
        s.sqrt(),
        Box::new(move |state| {
            let (x, v) = split_xv(state, n);
            let bottom = &v * b1 - f.grad(&x);
            join2(&v, &bottom)
        }),
        gamma1,
    ))
}

/// Heavy-ball with `β(τ) = (1 − √μ τ)²`: `b1 = −2√μ`, `b2 = 2μ`.
pub fn hb_polyak_field<'a>(f: &'a Objective, s: f64, order: usize) -> Result<VectorField<'a>> {
    let rm = f.mu().sqrt();
    hb_field(f, s, -2.0 * rm, 2.0 * f.mu(), order, "hb-polyak")
}

/// Heavy-ball with `β(τ) = (1 − √μ τ)/(1 + √μ τ)`: `b1 = −2√μ`, `b2 = 4μ`.
pub fn hb_alternate_field<'a>(f: &'a Objective, s: f64, order: usize) -> Result<VectorField<'a>> {
    let rm = f.mu().sqrt();
    hb_field(f, s, -2.0 * rm, 4.0 * f.mu(), order, "hb-alternate")
}

/// General accelerated-gradient field in `(x, v)`. `b1, b2` are the schedule
/// derivatives; `eta1, eta2` the expansion weights of `η/β` in `τ`; `delta1,
/// delta2` those of `(δ + s − η/β)/(√s·β)`:
/// `Γ₀ = (v − η₁∇F, b1·v − δ₁∇F)`,
/// `Γ₁ = ½(3b1·v + η₁∇²F·v − (2η₂+δ₁)∇F − η₁²∇²F∇F,
///        (b2 − b1²)v + δ₁∇²F·v + (δ₁b1 − 2δ₂)∇F − η₁δ₁∇²F∇F)`.
#[allow(clippy::too_many_arguments)]
pub fn nag_general_field<'a>(
    f: &'a Objective,
    s: f64,
    b1: f64,
    b2: f64,
    eta1: f64,
    eta2: f64,
    delta1: f64,
    delta2: f64,
    order: usize,
    label: impl Into<String>,
) -> Result<VectorField<'a>> {
    let label = label.into();
    require_hessian(f, order, &label)?;
    let n = f.dim();
    let gamma1: Option<RhsFn<'a>> = (order >= 1).then(|| {
        Box::new(move |state: &Vector| {
            let (x, v) = split_xv(state, n);
            let g = f.grad(&x);
            let hv = f.hess_vec(&x, &v);
            let hg = f.hess_vec(&x, &g);
            let top = &v * (3.0 * b1) + &hv * eta1 - &g * (2.0 * eta2 + delta1) - &hg * (eta1 * eta1);
            let bottom = &v * (b2 - b1 * b1) + &hv * delta1 + &g * (delta1 * b1 - 2.0 * delta2)
                - &hg * (eta1 * delta1);
            join2(&(top * 0.5), &(bottom * 0.5))
        }) as RhsFn<'a>
    });
    Ok(VectorField::new(
        2 * n,
        order.min(1),
        label,
        s,
        s.sqrt(),
        Box::new(move |state| {
            let (x, v) = split_xv(state, n);
            let g = f.grad(&x);
            let top = &v - &g * eta1;
            let bottom = &v * b1 - &g * delta1;
            join2(&top, &bottom)
        }),
        gamma1,
    ))
}

/// Nesterov's strongly convex choice: `b1 = −2√μ`, `b2 = 4μ`,
/// `(η₁, η₂, δ₁, δ₂) = (0, 1, 1, 0)`.
pub fn nag_sc_field<'a>(f: &'a Objective, s: f64, order: usize) -> Result<VectorField<'a>> {
    if f.mu() <= 0.0 {
        return Err(Error::Config("schedule needs strong convexity".into()));
    }
    let rm = f.mu().sqrt();
    nag_general_field(f, s, -2.0 * rm, 4.0 * f.mu(), 0.0, 1.0, 1.0, 0.0, order, "nag-sc")
}

/// Time-varying momentum field in `(x, v, t)`:
/// `Γ₀ = (v, −3/t·v − ∇F, 1)`,
/// `Γ₁ = ½(−9/t·v − 3∇F, ∇²F·v − 12/t²·v − 3/t·∇F, 0)`.
pub fn nag_c_field<'a>(f: &'a Objective, s: f64, order: usize) -> Result<VectorField<'a>> {
    require_hessian(f, order, "nag-c")?;
    let n = f.dim();
    let gamma1: Option<RhsFn<'a>> = (order >= 1).then(|| {
        Box::new(move |state: &Vector| {
            let (x, v) = split_xv(state, n);
            let t = state[2 * n];
            let g = f.grad(&x);
            let top = &v * (-9.0 / t) - &g * 3.0;
            let bottom = f.hess_vec(&x, &v) - &v * (12.0 / (t * t)) - &g * (3.0 / t);
            join2t(&(top * 0.5), &(bottom * 0.5), 0.0)
        }) as RhsFn<'a>
    });
    Ok(VectorField::new(
        2 * n + 1,
        order.min(1),
        "nag-c",
        s,
        s.sqrt(),
        Box::new(move |state| {
            let (x, v) = split_xv(state, n);
            let t = state[2 * n];
            let bottom = &v * (-3.0 / t) - f.grad(&x);
            join2t(&v, &bottom, 1.0)
        }),
        gamma1,
    ))
}

/// Accelerated mirror-descent field in `(x, z, t)`:
/// `Γ₀ = (2/t(∇φ*(z) − x), −t/2·∇F(x), 1)`,
/// `Γ₁ = ½(−∇²φ*(z)∇F − 2∇F + 6/t²(∇φ*(z) − x),
///        5/2·∇F + ∇²F·(∇φ*(z) − x), 0)`.
pub fn amd_field<'a>(
    f: &'a Objective,
    prox: &'a ProxFunction,
    s: f64,
    order: usize,
) -> Result<VectorField<'a>> {
    require_hessian(f, order, "amd")?;
    let n = f.dim();
    let gamma1: Option<RhsFn<'a>> = (order >= 1).then(|| {
        Box::new(move |state: &Vector| {
            let (x, z) = split_xv(state, n);
            let t = state[2 * n];
            let g = f.grad(&x);
            let mirror_gap = prox.grad_phi_star(&z) - &x;
            let top = -prox.hess_phi_star_vec(&z, &g) - &g * 2.0 + &mirror_gap * (6.0 / (t * t));
            let bottom = &g * 2.5 + f.hess_vec(&x, &mirror_gap);
            join2t(&(top * 0.5), &(bottom * 0.5), 0.0)
        }) as RhsFn<'a>
    });
    Ok(VectorField::new(
        2 * n + 1,
        order.min(1),
        "amd",
        s,
        s.sqrt(),
        Box::new(move |state| {
            let (x, z) = split_xv(state, n);
            let t = state[2 * n];
            let top = (prox.grad_phi_star(&z) - &x) * (2.0 / t);
            let bottom = f.grad(&x) * (-t / 2.0);
            join2t(&top, &bottom, 1.0)
        }),
        gamma1,
    ))
}

/// Literature-comparison models, kept as plain fields (the embedded `√s`
/// terms are part of the model, not a switchable correction).
pub enum ComparisonModel {
    /// `x'' + 2√μ x' + ∇F = 0`
    HbLowRes,
    /// `x'' + 2√μ x' + (1 + √(μs))∇F = 0`
    HbShi,
    /// `x'' + (2√μ + √s∇²F)x' + (1 + √(μs))∇F = 0`
    NagScShi,
    /// `x'' + (3/t)x' + ∇F = 0` in `(x, v, t)`
    Avd,
    /// `x'' + (3/t + √s∇²F)x' + (1 + 3√s/(2t))∇F = 0` in `(x, v, t)`
    NagCShi,
}

pub fn comparison_field<'a>(
    model: ComparisonModel,
    f: &'a Objective,
    s: f64,
) -> Result<VectorField<'a>> {
    let n = f.dim();
    let rm = f.mu().sqrt();
    let tau = s.sqrt();
    let (dim, label, rhs): (usize, &str, RhsFn<'a>) = match model {
        ComparisonModel::HbLowRes => (
            2 * n,
            "hb-low-res",
            Box::new(move |state| {
                let (x, v) = split_xv(state, n);
                join2(&v, &(&v * (-2.0 * rm) - f.grad(&x)))
            }),
        ),
        ComparisonModel::HbShi => (
            2 * n,
            "hb-shi",
            Box::new(move |state| {
                let (x, v) = split_xv(state, n);
                let bottom = &v * (-2.0 * rm) - f.grad(&x) * (1.0 + rm * tau);
                join2(&v, &bottom)
            }),
        ),
        ComparisonModel::NagScShi => {
            require_hessian(f, 1, "nag-sc-shi")?;
            (
                2 * n,
                "nag-sc-shi",
                Box::new(move |state| {
                    let (x, v) = split_xv(state, n);
                    let bottom =
                        &v * (-2.0 * rm) - f.hess_vec(&x, &v) * tau - f.grad(&x) * (1.0 + rm * tau);
                    join2(&v, &bottom)
                }),
            )
        }
        ComparisonModel::Avd => (
            2 * n + 1,
            "avd",
            Box::new(move |state| {
                let (x, v) = split_xv(state, n);
                let t = state[2 * n];
                join2t(&v, &(&v * (-3.0 / t) - f.grad(&x)), 1.0)
            }),
        ),
        ComparisonModel::NagCShi => {
            require_hessian(f, 1, "nag-c-shi")?;
            (
                2 * n + 1,
                "nag-c-shi",
                Box::new(move |state| {
                    let (x, v) = split_xv(state, n);
                    let t = state[2 * n];
                    let bottom = &v * (-3.0 / t)
                        - f.hess_vec(&x, &v) * tau
                        - f.grad(&x) * (1.0 + 3.0 * tau / (2.0 * t));
                    join2t(&v, &bottom, 1.0)
                }),
            )
        }
    };
    Ok(VectorField::new(dim, 0, label, s, s.sqrt(), rhs, None))
}

/// Generic first-order construction from a lifted template's expansion:
/// `Γ₀ = Φ₁`, `Γ₁ = ½Φ₂ − ½∇Φ₁·Φ₁`, with `∇Φ₁` by central differences.
pub fn field_from_template<'a>(
    dim: usize,
    s: f64,
    correction_weight: f64,
    label: impl Into<String>,
    phi1: Rc<dyn Fn(&Vector) -> Vector + 'a>,
    phi2: Rc<dyn Fn(&Vector) -> Vector + 'a>,
    h_fd: f64,
) -> VectorField<'a> {
    let phi1_for_gamma0 = Rc::clone(&phi1);
    let gamma1: RhsFn<'a> = Box::new(move |z: &Vector| {
        let jac = fd_jacobian(|u| phi1(u), z, h_fd).expect("finite template");
        (phi2(z) - jac * phi1(z)) * 0.5
    });
    VectorField::new(
        dim,
        1,
        label,
        s,
        correction_weight,
        Box::new(move |z| phi1_for_gamma0(z)),
        Some(gamma1),
    )
}

/// Scalar second-order forms obtained by eliminating the velocity from the
/// first-order systems, plus the literature models, used as finite-difference
/// consistency checks along an integrated `x(t)` trajectory.
pub enum SecondOrderForm {
    /// `x'' + (2√μ + μ√s)x' + (1 + √(μs) − μs/2)∇F − (s/4)∇²F∇F = 0`
    HbPolyak,
    /// `x'' + 2√μ x' + (1 + √(μs) − μs)∇F − (s/4)∇²F∇F = 0`
    HbAlternate,
    /// `x'' + (2√μ + √s∇²F)x' + (1 + √(μs) − 3μs)∇F − (3s/4)∇²F∇F = 0`
    NagSc,
    /// `x'' + (3/t + 6√s/t² + √s∇²F)x' + (1 + 3√s/(2t) + 9s/(4t²))∇F − (3s/4)∇²F∇F = 0`
    NagC,
    /// `x'' + 2√μ x' + (1 + √(μs))∇F = 0`
    HbShi,
    /// `x'' + (2√μ + √s∇²F)x' + (1 + √(μs))∇F = 0`
    NagScShi,
    /// `x'' + (3/t + √s∇²F)x' + (1 + 3√s/(2t))∇F = 0`
    NagCShi,
}

/// Evaluates the chosen second-order residual at the interior points of
/// `x_traj` (whose states are the `x` component only). `t_offset` is the
/// ODE time of the first sample, needed by the `3/t` forms.
pub fn second_order_form_residual(
    form: &SecondOrderForm,
    f: &Objective,
    x_traj: &Trajectory,
    s: f64,
    t_offset: f64,
) -> Result<Vec<f64>> {
    if x_traj.len() < 3 {
        return Err(Error::Input(
            "need at least three samples for second differences".into(),
        ));
    }
    let dt = x_traj.grid_step;
    let tau = s.sqrt();
    let rm = f.mu().sqrt();
    let mut residuals = Vec::with_capacity(x_traj.len() - 2);
    for k in 1..x_traj.len() - 1 {
        let x = &x_traj.states[k];
        let xdot = (&x_traj.states[k + 1] - &x_traj.states[k - 1]) / (2.0 * dt);
        let xddot = (&x_traj.states[k + 1] - x * 2.0 + &x_traj.states[k - 1]) / (dt * dt);
        let g = f.grad(x);
        let hxd = f.hess_vec(x, &xdot);
        let t = t_offset + x_traj.times[k];
        let res: Vector = match form {
            SecondOrderForm::HbPolyak => {
                xddot
                    + xdot * (2.0 * rm + f.mu() * tau)
                    + &g * (1.0 + rm * tau - f.mu() * s / 2.0)
                    - f.hess_vec(x, &g) * (s / 4.0)
            }
            SecondOrderForm::HbAlternate => {
                xddot + xdot * (2.0 * rm) + &g * (1.0 + rm * tau - f.mu() * s)
                    - f.hess_vec(x, &g) * (s / 4.0)
            }
            SecondOrderForm::NagSc => {
                xddot + xdot * (2.0 * rm)
                    + hxd * tau
                    + &g * (1.0 + rm * tau - 3.0 * f.mu() * s)
                    - f.hess_vec(x, &g) * (3.0 * s / 4.0)
            }
            SecondOrderForm::NagC => {
                xddot
                    + xdot * (3.0 / t + 6.0 * tau / (t * t))
                    + hxd * tau
                    + &g * (1.0 + 3.0 * tau / (2.0 * t) + 9.0 * s / (4.0 * t * t))
                    - f.hess_vec(x, &g) * (3.0 * s / 4.0)
            }
            SecondOrderForm::HbShi => xddot + xdot * (2.0 * rm) + &g * (1.0 + rm * tau),
            SecondOrderForm::NagScShi => {
                xddot + xdot * (2.0 * rm) + hxd * tau + &g * (1.0 + rm * tau)
            }
            SecondOrderForm::NagCShi => {
                xddot
                    + xdot * (3.0 / t)
                    + hxd * tau
                    + &g * (1.0 + 3.0 * tau / (2.0 * t))
            }
        };
        residuals.push(res.norm());
    }
    Ok(residuals)
}
