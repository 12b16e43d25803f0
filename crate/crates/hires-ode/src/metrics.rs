//! Discrete-vs-continuous error metrics, empirical convergence orders,
//! Lyapunov functions, and convergence verdicts.

use crate::problem::{Objective, Trajectory};
use crate::{Error, Result, Vector};

/// Which coordinates of the state enter the error norms: the full state, or
/// one contiguous block (the momentum experiments compare only `x`).
#[derive(Debug, Clone, Copy)]
pub enum Projector {
    Full,
    Block { offset: usize, len: usize },
}

impl Projector {
    pub fn project(&self, state: &Vector) -> Vector {
        match self {
            Projector::Full => state.clone(),
            Projector::Block { offset, len } => state.rows(*offset, *len).into_owned(),
        }
    }
}

/// E-metrics of one `(s, trajectory pair)`: `E1` is the projected error at
/// the first grid point, `E2` the sum over all grid points `k ≥ 1`, and
/// `E3` the grid-weighted `ℓ²` aggregate `√(Σ h‖·‖²)`.
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    pub s: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

/// Computes the E-metrics between a reference ODE trajectory and a discrete
/// run on the same grid. `s` is the method step size recorded in the report
/// (the grid spacing itself may be `s` or `√s`).
pub fn compute_errors(
    ode: &Trajectory,
    dta: &Trajectory,
    projector: Projector,
    s: f64,
) -> Result<ErrorReport> {
    if ode.len() != dta.len() {
        return Err(Error::Input(format!(
            "trajectory lengths differ: {} vs {}",
            ode.len(),
            dta.len()
        )));
    }
    if ode.len() < 2 {
        return Err(Error::Input("need at least one step".into()));
    }
    if (ode.grid_step - dta.grid_step).abs() > 1e-12 * ode.grid_step.abs() {
        return Err(Error::Input(format!(
            "grid steps differ: {} vs {}",
            ode.grid_step, dta.grid_step
        )));
    }
    let initial_gap = (projector.project(&ode.states[0]) - projector.project(&dta.states[0])).norm();
    if initial_gap > 1e-9 {
        return Err(Error::Input(format!(
            "initial states differ by {initial_gap}"
        )));
    }
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    let mut sq_sum = 0.0;
    for k in 1..ode.len() {
        let gap = (projector.project(&ode.states[k]) - projector.project(&dta.states[k])).norm();
        if k == 1 {
            e1 = gap;
        }
        e2 += gap;
        sq_sum += ode.grid_step * gap * gap;
    }
    Ok(ErrorReport {
        s,
        e1,
        e2,
        e3: sq_sum.sqrt(),
    })
}

/// One row of an order table; rates are `log₂(E(s)/E(s/2))` between
/// consecutive rows and absent on the first row (or when an error vanishes).
#[derive(Debug, Clone, Copy)]
pub struct OrderRow {
    pub s: f64,
    pub e1: f64,
    pub rate1: Option<f64>,
    pub e2: f64,
    pub rate2: Option<f64>,
    pub e3: f64,
    pub rate3: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OrderTable {
    pub rows: Vec<OrderRow>,
}

impl OrderTable {
    pub fn last(&self) -> Option<&OrderRow> {
        self.rows.last()
    }
}

fn rate(prev: f64, cur: f64) -> Option<f64> {
    (prev > 0.0 && cur > 0.0).then(|| (prev / cur).log2())
}

/// Builds the order table from reports at halving step sizes.
pub fn empirical_orders(reports: &[ErrorReport]) -> Result<OrderTable> {
    if reports.len() < 2 {
        return Err(Error::Input("need at least two step sizes".into()));
    }
    for pair in reports.windows(2) {
        let ratio = pair[0].s / pair[1].s;
        if (ratio - 2.0).abs() > 1e-9 {
            return Err(Error::Input(format!(
                "step sizes must halve, got ratio {ratio}"
            )));
        }
    }
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let prev = (i > 0).then(|| reports[i - 1]);
            OrderRow {
                s: r.s,
                e1: r.e1,
                rate1: prev.and_then(|p| rate(p.e1, r.e1)),
                e2: r.e2,
                rate2: prev.and_then(|p| rate(p.e2, r.e2)),
                e3: r.e3,
                rate3: prev.and_then(|p| rate(p.e3, r.e3)),
            }
        })
        .collect();
    Ok(OrderTable { rows })
}

/// `E(z) = ½‖z − z*‖²`.
pub fn lyapunov_saddle(z: &Vector, z_star: &Vector) -> f64 {
    0.5 * (z - z_star).norm_squared()
}

/// `E(x, w) = F(x) − F(x*) + (b/2)‖w − x*‖²` with
/// `b = μ(1 − 3η√(μs))/(1 + 5η√(μs)/2)`.
pub fn lyapunov_hb(
    x: &Vector,
    w: &Vector,
    f: &Objective,
    eta: f64,
    s: f64,
    x_star: &Vector,
) -> Result<f64> {
    let b = hb_lyapunov_weight(f.mu(), eta, s)?;
    Ok(f.value(x) - f.value(x_star) + 0.5 * b * (w - x_star).norm_squared())
}

/// The weight `b` of the velocity term; errors when `3η√(μs) ≥ 1` (`b ≤ 0`).
pub fn hb_lyapunov_weight(mu: f64, eta: f64, s: f64) -> Result<f64> {
    let root = (mu * s).sqrt();
    let b = mu * (1.0 - 3.0 * eta * root) / (1.0 + 2.5 * eta * root);
    if b <= 0.0 {
        return Err(Error::Parameter(format!(
            "Lyapunov weight nonpositive: 3η√(μs) = {} >= 1",
            3.0 * eta * root
        )));
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Cycling,
    Diverging,
}

/// Classifies the tail behavior of a trajectory relative to `x_star`:
/// converged (terminal distance ≤ `tol`), diverging (monotone growth over the
/// final window beyond 10× the initial distance), or cycling (bounded,
/// bounded away from the target, revisiting an earlier state).
pub fn detect_nonconvergence(
    traj: &Trajectory,
    x_star: &Vector,
    window: usize,
    tol: f64,
) -> Result<Verdict> {
    if window < 2 || traj.len() < window + 1 {
        return Err(Error::Input(
            "trajectory shorter than the detection window".into(),
        ));
    }
    let dists: Vec<f64> = traj.states.iter().map(|z| (z - x_star).norm()).collect();
    let n = dists.len();
    let terminal = dists[n - 1];
    if terminal <= tol {
        return Ok(Verdict::Converged);
    }
    let initial = dists[0].max(tol);
    let tail = &dists[n - window..];
    let monotone_growth = tail.windows(2).all(|p| p[1] >= p[0] - 1e-15);
    if monotone_growth && terminal > 10.0 * initial {
        return Ok(Verdict::Diverging);
    }
    let bounded_away = tail.iter().all(|&d| d > tol);
    let revisits = (1..window).any(|p| (&traj.states[n - 1] - &traj.states[n - 1 - p]).norm() <= tol);
    if bounded_away && revisits {
        return Ok(Verdict::Cycling);
    }
    // bounded oscillation without a clean revisit still counts as cycling;
    // unbounded non-monotone growth as divergence
    if terminal > 10.0 * initial {
        Ok(Verdict::Diverging)
    } else {
        Ok(Verdict::Cycling)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Objective;
    use crate::Matrix;
    use approx::assert_abs_diff_eq;

    fn const_traj(states: Vec<Vector>, h: f64) -> Trajectory {
        Trajectory::from_states(states, h)
    }

    #[test]
    fn identical_trajectories_zero_errors() {
        let states = vec![Vector::from_element(2, 1.0); 5];
        let a = const_traj(states.clone(), 0.25);
        let b = const_traj(states, 0.25);
        let r = compute_errors(&a, &b, Projector::Full, 0.25).unwrap();
        assert_eq!((r.e1, r.e2, r.e3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_unit_discrepancy() {
        // same start, then unit gap at each of the N = 4 later grid points
        let a: Vec<Vector> = (0..5).map(|_| Vector::zeros(1)).collect();
        let mut b = a.clone();
        for state in b.iter_mut().skip(1) {
            state[0] = 1.0;
        }
        let r = compute_errors(
            &const_traj(a, 0.25),
            &const_traj(b, 0.25),
            Projector::Full,
            0.25,
        )
        .unwrap();
        assert_abs_diff_eq!(r.e1, 1.0);
        assert_abs_diff_eq!(r.e2, 4.0);
        assert_abs_diff_eq!(r.e3, 1.0); // √(4·0.25)
    }

    #[test]
    fn e1_bounded_by_e2() {
        let a: Vec<Vector> = (0..6).map(|k| Vector::from_element(1, k as f64 * 0.1)).collect();
        let b: Vec<Vector> = (0..6).map(|k| Vector::from_element(1, k as f64 * 0.11)).collect();
        let r = compute_errors(
            &const_traj(a, 0.1),
            &const_traj(b, 0.1),
            Projector::Full,
            0.1,
        )
        .unwrap();
        assert!(r.e1 <= r.e2);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = const_traj(vec![Vector::zeros(1); 3], 0.1);
        let b = const_traj(vec![Vector::zeros(1); 3], 0.2);
        assert!(compute_errors(&a, &b, Projector::Full, 0.1).is_err());
        let c = const_traj(vec![Vector::zeros(1); 4], 0.1);
        assert!(compute_errors(&a, &c, Projector::Full, 0.1).is_err());
    }

    #[test]
    fn block_projector_ignores_other_coordinates() {
        let a = const_traj(
            vec![
                Vector::from_vec(vec![0.0, 5.0]),
                Vector::from_vec(vec![1.0, -3.0]),
            ],
            0.5,
        );
        let b = const_traj(
            vec![
                Vector::from_vec(vec![0.0, 9.0]),
                Vector::from_vec(vec![1.5, 100.0]),
            ],
            0.5,
        );
        let r = compute_errors(&a, &b, Projector::Block { offset: 0, len: 1 }, 0.5).unwrap();
        assert_abs_diff_eq!(r.e1, 0.5);
    }

    #[test]
    fn exact_linear_scaling_gives_rate_one() {
        let reports: Vec<ErrorReport> = (0..4)
            .map(|i| {
                let s = 0.1 / 2f64.powi(i);
                ErrorReport {
                    s,
                    e1: s,
                    e2: s,
                    e3: s,
                }
            })
            .collect();
        let table = empirical_orders(&reports).unwrap();
        assert!(table.rows[0].rate1.is_none());
        for row in &table.rows[1..] {
            assert_abs_diff_eq!(row.rate1.unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(row.rate3.unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn published_rate_arithmetic() {
        let r1 = ErrorReport {
            s: 2f64.powi(-7),
            e1: 1.26e-5,
            e2: 5.15e-1,
            e3: 1.0,
        };
        let r2 = ErrorReport {
            s: 2f64.powi(-8),
            e1: 1.70e-6,
            e2: 5.14e-1,
            e3: 1.0,
        };
        let table = empirical_orders(&[r1, r2]).unwrap();
        let row = table.last().unwrap();
        assert!((row.rate1.unwrap() - 2.89).abs() < 0.01);
        assert!(row.rate2.unwrap().abs() < 0.01);
    }

    #[test]
    fn zero_error_rate_absent() {
        let r1 = ErrorReport {
            s: 0.2,
            e1: 0.0,
            e2: 1.0,
            e3: 1.0,
        };
        let r2 = ErrorReport {
            s: 0.1,
            e1: 0.0,
            e2: 0.5,
            e3: 0.5,
        };
        let table = empirical_orders(&[r1, r2]).unwrap();
        assert!(table.last().unwrap().rate1.is_none());
        assert!(table.last().unwrap().rate2.is_some());
    }

    #[test]
    fn lyapunov_saddle_values() {
        let z_star = Vector::zeros(2);
        assert_eq!(lyapunov_saddle(&z_star, &z_star), 0.0);
        let z = Vector::from_vec(vec![3.0, 4.0]);
        assert_abs_diff_eq!(lyapunov_saddle(&z, &z_star), 12.5);
        // exact quadratic scaling
        let d = Vector::from_vec(vec![0.3, -0.7]);
        assert_abs_diff_eq!(
            lyapunov_saddle(&(&d * 2.0), &z_star),
            4.0 * lyapunov_saddle(&d, &z_star),
            epsilon = 1e-14
        );
    }

    #[test]
    fn lyapunov_hb_hand_values() {
        let f = Objective::quadratic(Matrix::identity(1, 1)).unwrap();
        // choose η, s with 3η√s = 0.3 → b = 0.7/1.25 = 0.56
        let s = 0.01_f64;
        let eta = 0.3 / (3.0 * s.sqrt());
        let x_star = Vector::zeros(1);
        let one = Vector::from_element(1, 1.0);
        let val = lyapunov_hb(&one, &one, &f, eta, s, &x_star).unwrap();
        assert_abs_diff_eq!(val, 0.5 + 0.28, epsilon = 1e-12);
        assert_eq!(
            lyapunov_hb(&x_star, &x_star, &f, eta, s, &x_star).unwrap(),
            0.0
        );
    }

    #[test]
    fn lyapunov_hb_lessard_weight() {
        // 3η*√(μs*) = 2/7 → b = (5/7)/(26/21) = 15/26
        let b = hb_lyapunov_weight(1.0, 205.0 / 441.0, 1764.0 / 42025.0).unwrap();
        assert_abs_diff_eq!(b, 15.0 / 26.0, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_hb_rejects_bad_weight() {
        assert!(hb_lyapunov_weight(1.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn verdict_converged() {
        let states: Vec<Vector> = (0..100)
            .map(|k| Vector::from_element(1, 0.9f64.powi(k)))
            .collect();
        let traj = Trajectory::from_states(states, 1.0);
        let v = detect_nonconvergence(&traj, &Vector::zeros(1), 50, 1e-3).unwrap();
        assert_eq!(v, Verdict::Converged);
    }

    #[test]
    fn verdict_cycling_on_rotation() {
        let states: Vec<Vector> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.1;
                Vector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect();
        let traj = Trajectory::from_states(states, 0.1);
        let v = detect_nonconvergence(&traj, &Vector::zeros(2), 50, 1e-3).unwrap();
        assert_eq!(v, Verdict::Cycling);
    }

    #[test]
    fn verdict_diverging_on_growth() {
        let states: Vec<Vector> = (0..100)
            .map(|k| Vector::from_element(1, 1.1f64.powi(k)))
            .collect();
        let traj = Trajectory::from_states(states, 1.0);
        let v = detect_nonconvergence(&traj, &Vector::zeros(1), 50, 1e-3).unwrap();
        assert_eq!(v, Verdict::Diverging);
    }
}
