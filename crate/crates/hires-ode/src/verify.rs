//! Self-contained property suite: structural identities that must hold to
//! machine precision, independent of any experiment. Each check returns a
//! pass/fail verdict with a measured quantity so failures are diagnosable.

use crate::catalog::{random_bilinear, unit_quadratic, DEFAULT_SEED};
use crate::corrected::{chb_field, cpdhg_field, optimal_chb_params, CpdhgParams};
use crate::dta::{
    run_two_term, step_amd, step_minimax, Lifted, LiftedState, MinimaxScheme,
};
use crate::integrate::{richardson_check, IntegratorConfig};
use crate::metrics::lyapunov_hb;
use crate::problem::{Objective, ProxFunction, SaddleSystem};
use crate::resolution::{
    gda_field, hb_polyak_field, pdhg_field, ppm_field, resolution_coeffs_affine, AffineMapSeries,
    VectorField,
};
use crate::{Error, Matrix, Result, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match body() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every check; the suite passes iff all entries do.
pub fn run_all() -> Vec<Check> {
    vec![
        check("lifted-fixed-point", lifted_fixed_point),
        check("scheme-stationary-point", scheme_stationary_point),
        check("affine-recursion-gda", || affine_recursion("gda")),
        check("affine-recursion-ppm", || affine_recursion("ppm")),
        check("affine-recursion-pdhg", || affine_recursion("pdhg")),
        check("correction-sensitivity", correction_sensitivity),
        check("lifted-equivalence-hb", lifted_equivalence_hb),
        check("lifted-equivalence-nag-sc", lifted_equivalence_nag_sc),
        check("lifted-equivalence-nag-c", lifted_equivalence_nag_c),
        check("lifted-equivalence-amd", lifted_equivalence_amd),
        check("strong-lyapunov-pdhg", strong_lyapunov_pdhg),
        check("strong-lyapunov-chb", strong_lyapunov_chb),
        check("richardson-certification", richardson_certification),
        check("hessian-capability-gate", hessian_capability_gate),
    ]
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

fn scalar(x: f64) -> Vector {
    Vector::from_element(1, x)
}

/// `Φ(X, 0) = X` exactly for every lifted momentum template.
fn lifted_fixed_point() -> Result<(bool, String)> {
    let f = unit_quadratic();
    let prox = ProxFunction::euclidean(1);
    let variants: Vec<(&str, Lifted)> = vec![
        ("hb-polyak", Lifted::hb_polyak(&f)?),
        ("hb-alternate", Lifted::hb_alternate(&f)?),
        ("nag-sc", Lifted::nag_sc(&f)?),
        ("nag-c", Lifted::nag_c(&f)),
        ("amd", Lifted::amd(&f, &prox)),
    ];
    for (label, variant) in &variants {
        for i in 0..8 {
            let state = LiftedState::xvt(scalar(0.4 * i as f64 - 1.3), scalar(0.9 - i as f64), 2.0);
            let out = variant.phi(&state, 0.0)?;
            if out.x != state.x || out.v != state.v || out.t != state.t {
                return Ok((false, format!("{label} moves at zero step")));
            }
        }
    }
    Ok((true, format!("{} templates exact at τ=0", variants.len())))
}

/// Every explicit/implicit saddle scheme fixes the stationary point.
fn scheme_stationary_point() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for theta in [0.0, 1.0] {
        let sys = SaddleSystem::quartic_scalar(theta)?;
        let z_star = Vector::zeros(2);
        for scheme in [
            MinimaxScheme::Gda,
            MinimaxScheme::Ppm,
            MinimaxScheme::Egm,
            MinimaxScheme::PdhgCp,
        ] {
            let out = step_minimax(&z_star, &sys, 0.1, scheme)?;
            worst = worst.max((out - &z_star).norm());
        }
    }
    Ok((worst <= 1e-12, format!("max drift {worst:.2e}")))
}

/// The generic coefficient recursion applied to a scheme's affine expansion
/// reproduces the closed-form first-order field to ≤ 1e−12 on random
/// bilinear instances.
fn affine_recursion(which: &str) -> Result<(bool, String)> {
    let s = 0.05;
    let mut worst: f64 = 0.0;
    for seed in DEFAULT_SEED..DEFAULT_SEED + 3 {
        let sys = random_bilinear(2, 3, 1.0, seed)?;
        let series = match which {
            "gda" => AffineMapSeries::gda(&sys, 1)?,
            "ppm" => AffineMapSeries::ppm(&sys, 1)?,
            "pdhg" => AffineMapSeries::pdhg_cp(&sys, 1)?,
            other => return Err(Error::Config(format!("unknown scheme {other}"))),
        };
        let coeffs = resolution_coeffs_affine(&series, 1)?;
        let from_recursion = VectorField::from_affine(&coeffs, s, which)?;
        let closed = match which {
            "gda" => gda_field(&sys, s, 1),
            "ppm" => ppm_field(&sys, s, 1),
            _ => pdhg_field(&sys, s, 1),
        };
        worst = worst.max(max_field_gap(&from_recursion, &closed, seed)?);
    }
    Ok((worst <= 1e-12, format!("max field gap {worst:.2e}")))
}

fn max_field_gap(a: &VectorField, b: &VectorField, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919));
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z = Vector::from_fn(a.dim(), |_, _| rng.gen_range(-1.0..1.0));
        worst = worst.max((a.rhs(&z)? - b.rhs(&z)?).norm());
    }
    Ok(worst)
}

/// Tampering with the correction weight by one part in a thousand must break
/// the recursion/closed-form agreement — guards against a vacuous comparison.
fn correction_sensitivity() -> Result<(bool, String)> {
    let s = 0.05;
    let sys = random_bilinear(2, 3, 1.0, DEFAULT_SEED)?;
    let coeffs = resolution_coeffs_affine(&AffineMapSeries::pdhg_cp(&sys, 1)?, 1)?;
    let mut tampered = VectorField::from_affine(&coeffs, s, "pdhg-tampered")?;
    tampered.scale_correction(1.001);
    let gap = max_field_gap(&tampered, &pdhg_field(&sys, s, 1), DEFAULT_SEED)?;
    Ok((gap > 1e-12, format!("tampered gap {gap:.2e} (must be > 1e-12)")))
}

fn worst_over_steps(
    lifted: &Lifted,
    f: &Objective,
    s: f64,
    beta_k: impl Fn(usize) -> f64,
    history: bool,
) -> Result<f64> {
    let n = 100;
    let x0 = scalar(0.8);
    let delta = |k: usize| if history { s * beta_k(k) } else { 0.0 };
    let xs = run_two_term(&x0, f, s, &beta_k, &delta, &delta, n)?;
    let tau = s.sqrt();
    let g0 = f.grad(&xs[0]);
    let correction = if history { &g0 * s } else { Vector::zeros(1) };
    let v1 = (&xs[1] - &xs[0] + correction) / (tau * beta_k(1));
    let mut state = if matches!(lifted, Lifted::NagC { .. }) {
        LiftedState::xvt(xs[1].clone(), v1, 4.0 * tau)
    } else {
        LiftedState::xv(xs[1].clone(), v1)
    };
    let mut worst: f64 = 0.0;
    for k in 1..n {
        state = lifted.step(&state, s)?;
        worst = worst.max((&state.x - &xs[k + 1]).norm());
    }
    Ok(worst)
}

fn lifted_equivalence_hb() -> Result<(bool, String)> {
    let f = unit_quadratic();
    let s = 0.02_f64;
    let beta = (1.0 - s.sqrt()).powi(2);
    let worst = worst_over_steps(&Lifted::hb_polyak(&f)?, &f, s, |_| beta, false)?;
    Ok((worst <= 1e-10, format!("max |x| gap {worst:.2e}")))
}

fn lifted_equivalence_nag_sc() -> Result<(bool, String)> {
    let f = unit_quadratic();
    let s = 0.04_f64;
    let beta = (1.0 - s.sqrt()) / (1.0 + s.sqrt());
    let worst = worst_over_steps(&Lifted::nag_sc(&f)?, &f, s, |_| beta, true)?;
    Ok((worst <= 1e-10, format!("max |x| gap {worst:.2e}")))
}

fn lifted_equivalence_nag_c() -> Result<(bool, String)> {
    let f = unit_quadratic();
    let worst = worst_over_steps(
        &Lifted::nag_c(&f),
        &f,
        0.04,
        |k| k as f64 / (k as f64 + 3.0),
        true,
    )?;
    Ok((worst <= 1e-10, format!("max |x| gap {worst:.2e}")))
}

fn lifted_equivalence_amd() -> Result<(bool, String)> {
    let f = unit_quadratic();
    let prox = ProxFunction::quadratic(Matrix::from_element(1, 1, 2.0))?;
    let lifted = Lifted::amd(&f, &prox);
    let s = 0.04_f64;
    let tau = s.sqrt();
    let (mut x, mut z) = (scalar(0.8), scalar(1.6));
    let mut state = LiftedState::xvt(x.clone(), z.clone(), 3.0 * tau);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let (xn, zn) = step_amd(&x, &z, k, &f, &prox, s)?;
        x = xn;
        z = zn;
        state = lifted.step(&state, s)?;
        worst = worst.max((&state.x - &x).norm()).max((&state.v - &z).norm());
    }
    Ok((worst <= 1e-10, format!("max (x,z) gap {worst:.2e}")))
}

/// `−⟨Z−Z*, G(Z)⟩ ≥ C1⟨M(Z), Z−Z*⟩ + C2‖Q(Z−Z*)‖²` at random states of the
/// quartic saddle, for the corrected primal-dual flow `G`.
fn strong_lyapunov_pdhg() -> Result<(bool, String)> {
    let sys = SaddleSystem::quartic_scalar(1.0)?;
    let p = CpdhgParams::new(&sys, 0.05, 1.5, 1.0 / 12.0)?;
    let field = cpdhg_field(&sys, &p);
    let q = sys.q_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let z = Vector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let lhs = -z.dot(&field.rhs(&z)?);
        let rhs = p.c1() * sys.eval_m(&z)?.dot(&z) + p.c2() * (&q * &z).norm_squared();
        worst = worst.min(lhs - rhs);
    }
    Ok((worst >= -1e-10, format!("min slack {worst:.2e}")))
}

/// `−⟨∇E, G⟩ ≥ √μ(1−3η√(μs))E + (3/2)η√s‖∇F‖²` at random states of the
/// quadratic, for the corrected heavy-ball flow `G` at the optimal parameters.
fn strong_lyapunov_chb() -> Result<(bool, String)> {
    let f = unit_quadratic();
    let p = optimal_chb_params(1.0, 1.0)?;
    let field = chb_field(&f, &p);
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED + 1);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let x = scalar(rng.gen_range(-3.0..3.0));
        let w = scalar(rng.gen_range(-3.0..3.0));
        let z = Vector::from_vec(vec![x[0], w[0]]);
        let g = field.rhs(&z)?;
        let grad_e = Vector::from_vec(vec![f.grad(&x)[0], p.b * w[0]]);
        let e = lyapunov_hb(&x, &w, &f, p.eta, p.s, &Vector::zeros(1))?;
        let lhs = -grad_e.dot(&g);
        let rhs = p.mu.sqrt() * (1.0 - 3.0 * p.eta * (p.mu * p.s).sqrt()) * e
            + 1.5 * p.eta * p.s.sqrt() * f.grad(&x).norm_squared();
        worst = worst.min(lhs - rhs);
    }
    Ok((worst >= -1e-10, format!("min slack {worst:.2e}")))
}

/// The default integrator resolution is already in the round-off regime for
/// the table fields at their finest step.
fn richardson_certification() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let sys = SaddleSystem::quartic_scalar(1.0)?;
    let s = 2f64.powi(-8);
    let z0 = Vector::from_vec(vec![1.0, 1.0]);
    for order in [0, 1] {
        let field = pdhg_field(&sys, s, order);
        worst = worst.max(richardson_check(&field, &z0, &IntegratorConfig::new(s, 32))?);
    }
    let f = unit_quadratic();
    let tau = 2f64.powi(-7);
    let x0 = Vector::from_vec(vec![0.8, 0.8]);
    for order in [0, 1] {
        let field = hb_polyak_field(&f, tau * tau, order)?;
        worst = worst.max(richardson_check(&field, &x0, &IntegratorConfig::new(tau, 32))?);
    }
    Ok((worst <= 1e-12, format!("max Richardson estimate {worst:.2e}")))
}

/// Order-1 fields require an exact Hessian oracle; a gradient-only objective
/// must be rejected rather than silently mis-corrected.
fn hessian_capability_gate() -> Result<(bool, String)> {
    let f = unit_quadratic().strip_hessian();
    let gated = matches!(hb_polyak_field(&f, 0.01, 1), Err(Error::Capability(_)));
    let order0_ok = hb_polyak_field(&f, 0.01, 0).is_ok();
    Ok((
        gated && order0_ok,
        format!("order-1 gated: {gated}, order-0 allowed: {order0_ok}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let checks = run_all();
        for c in &checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
        assert!(all_passed(&checks));
        assert_eq!(checks.len(), 14);
    }

    #[test]
    fn check_helper_captures_errors() {
        let c = check("boom", || Err(Error::Config("broken".into())));
        assert!(!c.pass);
        assert!(c.detail.contains("broken"));
    }
}
