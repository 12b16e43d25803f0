//! Built-in instances and named experiments: the convergence-order tables,
//! the trajectory comparisons, and the two divergence counterexamples.

use crate::corrected::{
    certify_envelope, optimal_chb_params, run_chb, run_cpdhg, ContractionVerdict, CpdhgParams,
};
use crate::dta::{run_minimax, step_hb, Lifted, LiftedState, MinimaxScheme};
use crate::integrate::{integrate, IntegratorConfig};
use crate::metrics::{
    compute_errors, detect_nonconvergence, empirical_orders, lyapunov_hb, ErrorReport, OrderTable,
    Projector, Verdict,
};
use crate::problem::{Objective, SaddleSystem, Trajectory};
use crate::resolution::{
    comparison_field, hb_polyak_field, nag_c_field, nag_sc_field, pdhg_field, ComparisonModel,
    VectorField,
};
use crate::{Error, Matrix, Result, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed of the random bilinear instances; recorded in every report.
pub const DEFAULT_SEED: u64 = 9;

pub fn unit_quadratic() -> Objective {
    Objective::quadratic(Matrix::identity(1, 1)).expect("identity is SPD")
}

/// Bilinear saddle `L(x,y) = yᵀAx` with i.i.d. uniform `[-1,1]` entries.
pub fn random_bilinear(m: usize, n: usize, theta: f64, seed: u64) -> Result<SaddleSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    SaddleSystem::bilinear(a, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumKind {
    HbPolyak,
    NagSc,
}

#[derive(Debug, Clone, Copy)]
pub enum RatesKind {
    /// PDHG/CP on the quartic saddle; full-state errors on the `s` grid.
    Saddle { theta: f64 },
    /// HB/NAG on the quadratic objective; `x`-errors on the `√s` grid.
    Momentum { method: MomentumKind },
}

#[derive(Debug, Clone)]
pub struct RatesExperiment {
    pub name: String,
    pub kind: RatesKind,
    pub order: usize,
    pub s_values: Vec<f64>,
    pub horizon: f64,
}

fn halving(from: i32, count: usize) -> Vec<f64> {
    (0..count).map(|i| 2f64.powi(-from - i as i32)).collect()
}

/// The eight named order-table experiments.
pub fn builtin_rates(name: &str) -> Result<RatesExperiment> {
    let (kind, order, s_values, horizon) = match name {
        "table1_pdhg" => (RatesKind::Saddle { theta: 0.0 }, 0, halving(5, 4), 20.0),
        "table1_cp" => (RatesKind::Saddle { theta: 1.0 }, 0, halving(5, 4), 20.0),
        "table2_pdhg" => (RatesKind::Saddle { theta: 0.0 }, 1, halving(5, 4), 20.0),
        "table2_cp" => (RatesKind::Saddle { theta: 1.0 }, 1, halving(5, 4), 20.0),
        "table3_hb" => (
            RatesKind::Momentum {
                method: MomentumKind::HbPolyak,
            },
            0,
            halving(4, 4),
            5.0,
        ),
        "table3_nag" => (
            RatesKind::Momentum {
                method: MomentumKind::NagSc,
            },
            0,
            halving(4, 4),
            5.0,
        ),
        "table4_hb" => (
            RatesKind::Momentum {
                method: MomentumKind::HbPolyak,
            },
            1,
            halving(4, 4),
            5.0,
        ),
        "table4_nag" => (
            RatesKind::Momentum {
                method: MomentumKind::NagSc,
            },
            1,
            halving(4, 4),
            5.0,
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown rates experiment '{other}' (try table1_pdhg .. table4_nag)"
            )))
        }
    };
    Ok(RatesExperiment {
        name: name.to_string(),
        kind,
        order,
        s_values,
        horizon,
    })
}

pub fn rates_experiment_names() -> Vec<&'static str> {
    vec![
        "table1_pdhg",
        "table1_cp",
        "table2_pdhg",
        "table2_cp",
        "table3_hb",
        "table3_nag",
        "table4_hb",
        "table4_nag",
    ]
}

fn saddle_report(theta: f64, order: usize, s: f64, horizon: f64) -> Result<ErrorReport> {
    let sys = SaddleSystem::quartic_scalar(theta)?;
    let z0 = Vector::from_vec(vec![0.5, 0.5]);
    let n_steps = (horizon / s).round() as usize;
    let discrete = run_minimax(&z0, &sys, s, MinimaxScheme::PdhgCp, n_steps)?;
    let field = pdhg_field(&sys, s, order);
    let ode = integrate(&field, &z0, &IntegratorConfig::new(s, n_steps))?;
    compute_errors(&ode, &discrete, Projector::Full, s)
}

/// The sweep parameter for momentum experiments is the effective step
/// `τ = √s` (the grid spacing), so halving it halves the grid and the error
/// exponents read off directly as (r+2, r, r+1). The method step is `τ²`.
fn momentum_report(
    method: MomentumKind,
    order: usize,
    tau: f64,
    horizon: f64,
) -> Result<ErrorReport> {
    let f = unit_quadratic();
    let s = tau * tau;
    let n_steps = (horizon / tau).round() as usize;
    let init = LiftedState::xv(Vector::from_element(1, 0.8), Vector::from_element(1, 0.8));
    let (discrete, field): (Trajectory, VectorField) = match method {
        MomentumKind::HbPolyak => (
            Lifted::hb_polyak(&f)?.run(&init, s, n_steps)?,
            hb_polyak_field(&f, s, order)?,
        ),
        MomentumKind::NagSc => (
            Lifted::nag_sc(&f)?.run(&init, s, n_steps)?,
            nag_sc_field(&f, s, order)?,
        ),
    };
    let ode = integrate(&field, &init.flatten(), &IntegratorConfig::new(tau, n_steps))?;
    compute_errors(&ode, &discrete, Projector::Block { offset: 0, len: 1 }, tau)
}

pub fn single_report(exp: &RatesExperiment, s: f64) -> Result<ErrorReport> {
    match exp.kind {
        RatesKind::Saddle { theta } => saddle_report(theta, exp.order, s, exp.horizon),
        RatesKind::Momentum { method } => momentum_report(method, exp.order, s, exp.horizon),
    }
}

/// Runs the experiment over its step-size sweep and assembles the table.
pub fn run_rates(exp: &RatesExperiment) -> Result<OrderTable> {
    let reports = exp
        .s_values
        .iter()
        .map(|&s| single_report(exp, s))
        .collect::<Result<Vec<_>>>()?;
    empirical_orders(&reports)
}

/// One labeled trajectory of a comparison plot.
#[derive(Debug, Clone)]
pub struct LabeledTrajectory {
    pub label: String,
    pub traj: Trajectory,
}

pub fn trajectory_experiment_names() -> Vec<&'static str> {
    vec!["fig1_pdhg", "fig1_cp", "fig2_hb_nag", "fig3_nag_c"]
}

/// The named trajectory experiments; `s` and `steps` override the defaults.
pub fn run_trajectory(
    name: &str,
    s: Option<f64>,
    steps: Option<usize>,
) -> Result<Vec<LabeledTrajectory>> {
    match name {
        "fig1_pdhg" | "fig1_cp" => {
            let theta = if name == "fig1_cp" { 1.0 } else { 0.0 };
            let s = s.unwrap_or(0.3);
            let n = steps.unwrap_or(100);
            let sys = SaddleSystem::bilinear(Matrix::from_element(1, 1, 1.0), theta)?;
            let z0 = Vector::from_vec(vec![1.0, 1.0]);
            let discrete = run_minimax(&z0, &sys, s, MinimaxScheme::PdhgCp, n)?;
            let cfg = IntegratorConfig::new(s, n);
            let ode0 = integrate(&pdhg_field(&sys, s, 0), &z0, &cfg)?;
            let ode1 = integrate(&pdhg_field(&sys, s, 1), &z0, &cfg)?;
            Ok(vec![
                LabeledTrajectory {
                    label: "iterates".into(),
                    traj: discrete,
                },
                LabeledTrajectory {
                    label: "ode-order0".into(),
                    traj: ode0,
                },
                LabeledTrajectory {
                    label: "ode-order1".into(),
                    traj: ode1,
                },
            ])
        }
        "fig2_hb_nag" => {
            let f = unit_quadratic();
            let s = s.unwrap_or(0.02);
            let tau = s.sqrt();
            let n = steps.unwrap_or_else(|| (5.0 / tau).round() as usize);
            let init = LiftedState::xv(Vector::from_element(1, 0.8), Vector::from_element(1, 0.8));
            let cfg = IntegratorConfig::new(tau, n);
            let mut out = Vec::new();
            for (tag, lifted) in [
                ("hb", Lifted::hb_polyak(&f)?),
                ("nag-sc", Lifted::nag_sc(&f)?),
            ] {
                out.push(LabeledTrajectory {
                    label: tag.into(),
                    traj: lifted.run(&init, s, n)?,
                });
                for order in [0, 1] {
                    let field = match tag {
                        "hb" => hb_polyak_field(&f, s, order)?,
                        _ => nag_sc_field(&f, s, order)?,
                    };
                    out.push(LabeledTrajectory {
                        label: format!("{tag}-ode{order}"),
                        traj: integrate(&field, &init.flatten(), &cfg)?,
                    });
                }
            }
            Ok(out)
        }
        "fig3_nag_c" => {
            let f = unit_quadratic();
            let s = s.unwrap_or(0.1);
            let tau = s.sqrt();
            let n = steps.unwrap_or_else(|| (10.0 / tau).round() as usize);
            let init = LiftedState::xvt(
                Vector::from_element(1, 0.8),
                Vector::from_element(1, 0.8),
                3.0 * tau,
            );
            let cfg = IntegratorConfig::new(tau, n);
            let discrete = Lifted::nag_c(&f).run(&init, s, n)?;
            let ode1 = integrate(&nag_c_field(&f, s, 1)?, &init.flatten(), &cfg)?;
            let shi = integrate(
                &comparison_field(ComparisonModel::NagCShi, &f, s)?,
                &init.flatten(),
                &cfg,
            )?;
            Ok(vec![
                LabeledTrajectory {
                    label: "iterates".into(),
                    traj: discrete,
                },
                LabeledTrajectory {
                    label: "ode-order1".into(),
                    traj: ode1,
                },
                LabeledTrajectory {
                    label: "ode-no-gradient-correction".into(),
                    traj: shi,
                },
            ])
        }
        other => Err(Error::Config(format!(
            "unknown trajectory experiment '{other}' (try fig1_pdhg, fig1_cp, fig2_hb_nag, fig3_nag_c)"
        ))),
    }
}

/// Side-by-side uncorrected/corrected run of one counterexample instance.
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    pub name: String,
    pub seed: Option<u64>,
    pub uncorrected: LabeledTrajectory,
    pub corrected: LabeledTrajectory,
    pub uncorrected_verdict: Verdict,
    pub corrected_verdict: Verdict,
    /// Corrected-scheme contraction certificate (linear-rate envelope for the
    /// primal-dual case, Lyapunov envelope for heavy-ball).
    pub envelope: Option<ContractionVerdict>,
}

impl CounterexampleReport {
    /// Distance-to-optimum series of both runs (optimum at the origin).
    pub fn distance_series(&self) -> (Vec<f64>, Vec<f64>) {
        let d = |t: &Trajectory| t.states.iter().map(|z| z.norm()).collect();
        (d(&self.uncorrected.traj), d(&self.corrected.traj))
    }
}

/// PDHG vs the corrected scheme on a seeded bilinear instance with
/// `s = 0.5/‖A‖`, `η₁ = 3/2`, `η₂ = 1/12`, `θ = 1`.
pub fn pdhg_bilinear_counterexample(
    m: usize,
    n: usize,
    seed: u64,
    n_steps: usize,
) -> Result<CounterexampleReport> {
    let sys_pdhg = random_bilinear(m, n, 0.0, seed)?;
    let sys_corrected = random_bilinear(m, n, 1.0, seed)?;
    let a_norm = sys_pdhg.a().clone().singular_values().max();
    let s = 0.5 / a_norm;
    let z0 = Vector::from_element(m + n, 1.0);
    let z_star = Vector::zeros(m + n);

    let uncorrected = run_minimax(&z0, &sys_pdhg, s, MinimaxScheme::PdhgCp, n_steps)?;
    let p = CpdhgParams::new(&sys_corrected, s, 1.5, 1.0 / 12.0)?;
    let corrected = run_cpdhg(&z0, &sys_corrected, &p, n_steps)?;

    let window = 50.min(n_steps / 2).max(2);
    let uncorrected_verdict = detect_nonconvergence(&uncorrected, &z_star, window, 1e-3)?;
    let corrected_verdict = detect_nonconvergence(&corrected, &z_star, window, 1e-3)?;

    // the linear-rate envelope needs an invertible square A
    let envelope = (m == n).then(|| {
        let sigma_min = sys_pdhg.a().clone().singular_values().min();
        let factor = 1.0 - p.c2() * sigma_min * sigma_min;
        let energies: Vec<f64> = corrected
            .states
            .iter()
            .map(|z| 0.5 * (z - &z_star).norm_squared())
            .collect();
        certify_envelope(&energies, factor)
    });

    Ok(CounterexampleReport {
        name: format!("pdhg_bilinear_{m}x{n}"),
        seed: Some(seed),
        uncorrected: LabeledTrajectory {
            label: "pdhg".into(),
            traj: uncorrected,
        },
        corrected: LabeledTrajectory {
            label: "cpdhg".into(),
            traj: corrected,
        },
        uncorrected_verdict,
        corrected_verdict,
        envelope,
    })
}

/// Heavy-ball with the classical parameters on the piecewise-quadratic
/// objective (`β = 4/9`, `s = 1/9`, `x₁ = x₀`) vs corrected heavy-ball with
/// the optimal `(η*, s*)` from `(x₀, 0)`.
pub fn hb_lessard_counterexample(x0: f64, n_steps: usize) -> Result<CounterexampleReport> {
    let f = Objective::piecewise_lessard();
    let s_hb = 1.0 / 9.0;
    let beta = 4.0 / 9.0;
    let start = Vector::from_element(1, x0);

    let mut states = vec![start.clone(), start.clone()];
    for k in 1..n_steps {
        let next = step_hb(&states[k], &states[k - 1], &f, beta, s_hb)?;
        states.push(next);
    }
    let uncorrected = Trajectory::from_states(states, s_hb.sqrt());

    let p = optimal_chb_params(f.mu(), f.lipschitz())?;
    let corrected = run_chb(&start, &Vector::zeros(1), &f, &p, n_steps)?;
    let x_star = Vector::zeros(1);
    let energies: Vec<f64> = corrected
        .states
        .iter()
        .map(|z| {
            lyapunov_hb(
                &z.rows(0, 1).into_owned(),
                &z.rows(1, 1).into_owned(),
                &f,
                p.eta,
                p.s,
                &x_star,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let window = 50.min(n_steps / 2).max(2);
    let uncorrected_verdict = detect_nonconvergence(&uncorrected, &x_star, window, 1e-3)?;
    let corrected_verdict = detect_nonconvergence(&corrected, &Vector::zeros(2), window, 1e-3)?;

    Ok(CounterexampleReport {
        name: "hb_lessard".into(),
        seed: None,
        uncorrected: LabeledTrajectory {
            label: "hb".into(),
            traj: uncorrected,
        },
        corrected: LabeledTrajectory {
            label: "chb".into(),
            traj: corrected,
        },
        uncorrected_verdict,
        corrected_verdict,
        envelope: Some(certify_envelope(&energies, 1.0 / (1.0 + p.rho))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_resolve() {
        for name in rates_experiment_names() {
            assert!(builtin_rates(name).is_ok(), "{name}");
        }
        assert!(builtin_rates("table9_xyz").is_err());
    }

    #[test]
    fn random_bilinear_deterministic_and_bounded() {
        let a = random_bilinear(5, 8, 0.0, DEFAULT_SEED).unwrap();
        let b = random_bilinear(5, 8, 0.0, DEFAULT_SEED).unwrap();
        assert_eq!(a.a(), b.a());
        assert!(a.a().iter().all(|v| v.abs() <= 1.0));
        let c = random_bilinear(5, 8, 0.0, DEFAULT_SEED + 1).unwrap();
        assert_ne!(a.a(), c.a());
    }

    #[test]
    fn momentum_order1_rates_accelerate() {
        // coarse two-point check; the full sweep lives in the acceptance suite
        let exp = RatesExperiment {
            name: "mini".into(),
            kind: RatesKind::Momentum {
                method: MomentumKind::HbPolyak,
            },
            order: 1,
            s_values: vec![2f64.powi(-4), 2f64.powi(-5)],
            horizon: 5.0,
        };
        let table = run_rates(&exp).unwrap();
        let row = table.last().unwrap();
        assert!((row.rate1.unwrap() - 3.0).abs() < 0.2, "{row:?}");
        assert!((row.rate3.unwrap() - 2.0).abs() < 0.2, "{row:?}");
    }

    #[test]
    fn fig1_order0_ode_stays_on_circle() {
        let series = run_trajectory("fig1_pdhg", None, Some(60)).unwrap();
        let ode0 = series
            .iter()
            .find(|t| t.label == "ode-order0")
            .unwrap();
        for z in &ode0.traj.states {
            assert!((z.norm() - 2f64.sqrt()).abs() < 1e-9);
        }
        // discrete iterates stay on a bounded cycle away from the saddle
        let iterates = &series[0].traj;
        assert!(iterates.states.iter().all(|z| z.norm() > 0.5));
        assert!(iterates.last().unwrap().norm() > 0.5);
    }

    #[test]
    fn fig2_has_six_series() {
        let series = run_trajectory("fig2_hb_nag", None, Some(10)).unwrap();
        assert_eq!(series.len(), 6);
        let labels: Vec<_> = series.iter().map(|t| t.label.as_str()).collect();
        assert!(labels.contains(&"hb-ode1") && labels.contains(&"nag-sc-ode0"));
    }

    #[test]
    fn lessard_counterexample_verdicts() {
        let report = hb_lessard_counterexample(3.25, 500).unwrap();
        assert_eq!(report.uncorrected_verdict, Verdict::Cycling);
        assert_eq!(report.corrected_verdict, Verdict::Converged);
        assert!(report.envelope.unwrap().passed());
    }

    #[test]
    fn lessard_from_optimum_converges_immediately() {
        let report = hb_lessard_counterexample(0.0, 200).unwrap();
        assert_eq!(report.uncorrected_verdict, Verdict::Converged);
        assert_eq!(report.corrected_verdict, Verdict::Converged);
    }

    #[test]
    fn bilinear_counterexample_scalar_instance() {
        let report = pdhg_bilinear_counterexample(1, 1, DEFAULT_SEED, 600).unwrap();
        assert_ne!(report.uncorrected_verdict, Verdict::Converged);
        assert_eq!(report.corrected_verdict, Verdict::Converged);
        let (unc, cor) = report.distance_series();
        assert!(cor.last().unwrap() < &1e-3);
        assert!(unc.last().unwrap() > &0.5);
    }
}
