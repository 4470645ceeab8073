//! The six experiments. Each returns a [`Report`]; nothing here touches the
//! file system.

use std::f64::consts::PI;

use liegen_core::floquet_avg::{averaged_terms, stroboscopic_solve, AveragedSystem};
use liegen_core::linalg::frobenius;
use liegen_core::magnus_linear::{
    magnus_terms_prelie, magnus_terms_recursive, omega_descent_oracle, omega_permutation_oracle,
    propagate_linear, reference_propagator, MatrixFunction, ORACLE_NODES,
};
use liegen_core::magnus_nonlinear::{generator_terms, reconstruct_state, GeneratorSeries};
use liegen_core::odeint::{integrate, IntegratorConfig};
use liegen_core::quadrature::QuadratureRule;
use liegen_core::systems::{
    autonomous_to_periodic, nls_hamiltonian, nls_mass, nls_spectral_field, nls_symplectic_matrix,
    vdp_field, vdp_limit_cycle_invariant, RotatingFrameSystem, SpectralNlsConfig,
};
use liegen_core::{FieldHandle, SeriesTerms};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Experiment, Resolved, System};
use crate::output::{Check, ErrorRow, Report, Series};
use crate::RunError;

/// Four linear-Magnus routes must agree to this.
pub const ORACLE_TOL: f64 = 1e-9;
/// Half-width around `n + 1` for linear order slopes.
pub const LINEAR_SLOPE_TOL: f64 = 0.3;
/// Half-width around `n + 1` for stroboscopic error slopes.
pub const STROBE_SLOPE_TOL: f64 = 0.4;
/// Bound on the refined limit-cycle invariant.
pub const CYCLE_TOL: f64 = 0.05;
/// Bound on `|‖X‖ - 2|` for the first-order cycle.
pub const RADIUS_TOL: f64 = 1e-6;

/// Samples written per trajectory.
const SAMPLES: usize = 201;

pub fn run(cfg: &Resolved) -> Result<Report, RunError> {
    match cfg.experiment {
        Experiment::MagnusLinearOrder => magnus_linear_order(cfg),
        Experiment::MagnusNonlinear => magnus_nonlinear(cfg),
        Experiment::VdpAveraging => vdp_averaging(cfg),
        Experiment::VdpLimitCycle => vdp_limit_cycle(cfg),
        Experiment::NlsAveraging => nls_averaging(cfg),
        Experiment::OracleCrosscheck => oracle_crosscheck(cfg),
    }
}

fn quad(cfg: &Resolved) -> QuadratureRule {
    // NLS frequencies reach 2(2πM/a)², so its period is split into panels
    let panels = match cfg.system {
        System::Nls1d if cfg.experiment != Experiment::MagnusLinearOrder => 8,
        _ => 1,
    };
    QuadratureRule::new(cfg.quad_nodes, panels)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn sample_times(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

/// Least-squares slope of `ln error` against `ln eps`.
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope checks `|slope_n - (n + 1)| ≤ tol` for every order in the sweep.
fn slope_checks(report: &mut Report, eps: &[f64], orders: usize, tol: f64) {
    if eps.len() < 2 {
        return;
    }
    for n in 1..=orders {
        let errs: Vec<f64> = eps
            .iter()
            .map(|&e| {
                report
                    .errors
                    .iter()
                    .find(|r| r.eps == e && r.order == n)
                    .map_or(f64::NAN, |r| r.error)
            })
            .collect();
        let slope = loglog_slope(eps, &errs);
        report.checks.push(Check::within(format!("slope_order_{n}"), slope, n as f64 + 1.0, tol));
    }
}

/// `A(t) = α + tβ` with `α = e_12`, `β = e_21`.
pub fn alpha_beta() -> MatrixFunction<f64> {
    let alpha = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let beta = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
    MatrixFunction::polynomial(vec![alpha, beta])
}

fn magnus_linear_order(cfg: &Resolved) -> Result<Report, RunError> {
    let a = alpha_beta();
    let q = quad(cfg);
    let jobs: Vec<(usize, f64)> = (1..=cfg.order)
        .flat_map(|n| cfg.eps.iter().map(move |&e| (n, e)))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(n, eps)| {
            let y = propagate_linear(&a, n, cfg.t_end, eps, &q)?;
            let r = reference_propagator(&a, eps, cfg.t_end, cfg.tol)?;
            Ok(ErrorRow {
                eps,
                order: n,
                error: frobenius(&(y - r)),
            })
        })
        .collect::<Result<Vec<_>, liegen_core::Error>>()?;
    let mut report = Report {
        errors,
        ..Report::default()
    };
    slope_checks(&mut report, &cfg.eps, cfg.order, LINEAR_SLOPE_TOL);

    // exp(Ω^[n](t)) e_1 over [0, t_end] at the first ε
    let times = sample_times(cfg.t_end, SAMPLES);
    let states = times
        .par_iter()
        .map(|&t| {
            let y = propagate_linear(&a, cfg.order, t, cfg.eps[0], &q)?;
            Ok(y.column(0).iter().copied().collect())
        })
        .collect::<Result<Vec<Vec<f64>>, liegen_core::Error>>()?;
    report.trajectory = Series::new(times, states);
    Ok(report)
}

fn truncated_generator(w: &GeneratorSeries, n: usize, eps: f64) -> GeneratorSeries {
    GeneratorSeries {
        rates: SeriesTerms::new(w.rates.role, w.rates.terms[..n].to_vec()),
        terms: SeriesTerms::new(w.terms.role, w.terms.terms[..n].to_vec()),
        eps,
    }
}

fn small_state(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

fn periodic_field(cfg: &Resolved) -> Result<(RotatingFrameSystem, FieldHandle), RunError> {
    let sys = match cfg.system {
        System::Vdp => vdp_field(),
        System::Nls1d => nls_spectral_field(&SpectralNlsConfig::cubic(2.0 * PI, 8))?,
    };
    let g = autonomous_to_periodic(&sys)?;
    Ok((sys, g))
}

fn magnus_nonlinear(cfg: &Resolved) -> Result<Report, RunError> {
    let (_, g) = periodic_field(cfg)?;
    let x0 = match cfg.system {
        System::Vdp => vec![1.0, 0.5],
        System::Nls1d => small_state(&mut ChaCha8Rng::seed_from_u64(cfg.seed), g.dim(), 0.3),
    };
    let w = generator_terms(&g, cfg.order, &quad(cfg))?;
    let ode = IntegratorConfig::new(cfg.tol, cfg.tol);

    let references = cfg
        .eps
        .par_iter()
        .map(|&eps| integrate(&g.scale(eps), &x0, 0.0, cfg.t_end, &ode))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (1..=cfg.order)
        .flat_map(|n| (0..cfg.eps.len()).map(move |i| (n, i)))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(n, i)| {
            let eps = cfg.eps[i];
            let r = reconstruct_state(&truncated_generator(&w, n, eps), &x0, cfg.t_end, cfg.tol)?;
            Ok(ErrorRow {
                eps,
                order: n,
                error: dist(&r.state, references[i].last_state()),
            })
        })
        .collect::<Result<Vec<_>, liegen_core::Error>>()?;

    let mut report = Report {
        errors,
        ..Report::default()
    };
    // the order-n reconstruction is at least O(ε^{n+1}) at fixed t
    if cfg.eps.len() >= 2 {
        for n in 1..=cfg.order {
            let errs: Vec<f64> = report.errors.iter().filter(|r| r.order == n).map(|r| r.error).collect();
            let slope = loglog_slope(&cfg.eps, &errs);
            report.checks.push(Check::at_least(format!("slope_order_{n}"), slope, n as f64 + 0.5));
        }
    }

    let times = sample_times(cfg.t_end, 11);
    let series = w.with_eps(cfg.eps[0]);
    let states = times
        .par_iter()
        .map(|&t| Ok(reconstruct_state(&series, &x0, t, cfg.tol)?.state))
        .collect::<Result<Vec<_>, liegen_core::Error>>()?;
    report.trajectory = Series::new(times.clone(), states);
    let dense = IntegratorConfig::new(cfg.tol, cfg.tol).with_dense_output(times);
    let reference = integrate(&g.scale(cfg.eps[0]), &x0, 0.0, cfg.t_end, &dense)?;
    report.extra.push(("reference".into(), Series::new(reference.times, reference.states)));
    Ok(report)
}

/// Max distance at stroboscopic times between the averaged solution and the
/// exact one.
fn strobe_error(
    g: &FieldHandle,
    sys: &AveragedSystem,
    x0: &[f64],
    eps: f64,
    t_end: f64,
    tol: f64,
) -> Result<f64, liegen_core::Error> {
    let avg = stroboscopic_solve(sys, x0, t_end, eps, tol)?;
    let ode = IntegratorConfig::new(tol, tol).with_dense_output(avg.times.clone());
    let full = integrate(&g.scale(eps), x0, 0.0, t_end, &ode)?;
    Ok(avg
        .states
        .iter()
        .zip(&full.states)
        .map(|(a, b)| dist(a, b))
        .fold(0.0, f64::max))
}

fn strobe_sweep(
    cfg: &Resolved,
    g: &FieldHandle,
    sys: &AveragedSystem,
    x0: &[f64],
) -> Result<Vec<ErrorRow>, RunError> {
    let jobs: Vec<(usize, f64)> = (1..=cfg.order)
        .flat_map(|n| cfg.eps.iter().map(move |&e| (n, e)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(n, eps)| {
            let s = sys.truncated(n)?;
            Ok(ErrorRow {
                eps,
                order: n,
                error: strobe_error(g, &s, x0, eps, cfg.t_end, cfg.tol)?,
            })
        })
        .collect::<Result<Vec<_>, liegen_core::Error>>()?)
}

fn vdp_averaging(cfg: &Resolved) -> Result<Report, RunError> {
    let (frame_sys, g) = periodic_field(cfg)?;
    let sys = averaged_terms(&g, cfg.order, &quad(cfg))?;
    let x0 = [1.0, 1.0];
    let mut report = Report {
        errors: strobe_sweep(cfg, &g, &sys, &x0)?,
        ..Report::default()
    };
    for r in report.errors.clone() {
        report.diag(format!("strobe_max_error_eps_{}_order_{}", r.eps, r.order), r.error);
    }
    if cfg.eps.len() >= 2 {
        slope_checks(&mut report, &cfg.eps, cfg.order, STROBE_SLOPE_TOL);
    } else {
        // over εt = O(1) the order-n error is O(ε^n); the constant is loose
        let eps = cfg.eps[0];
        for r in report.errors.clone() {
            let bound = 10.0 * eps.powi(r.order as i32);
            report.checks.push(Check::at_most(format!("strobe_error_order_{}", r.order), r.error, bound));
        }
    }

    // full and averaged trajectories at the first ε, in both frames
    let eps = cfg.eps[0];
    let per_period = 32.0;
    let n = ((cfg.t_end / sys.period * per_period).ceil() as usize).max(2) + 1;
    let times = sample_times(cfg.t_end, n);
    let ode = IntegratorConfig::new(cfg.tol, cfg.tol).with_dense_output(times.clone());
    let full = integrate(&g.scale(eps), &x0, 0.0, cfg.t_end, &ode)?;
    let avg = integrate(&sys.g_terms.sum(eps)?, &x0, 0.0, cfg.t_end, &ode)?;
    let original = |s: &[Vec<f64>]| -> Vec<Vec<f64>> {
        times.iter().zip(s).map(|(&t, x)| frame_sys.frame.apply(t, x)).collect()
    };
    report.extra.push(("averaged".into(), Series::new(times.clone(), avg.states.clone())));
    report.extra.push(("original".into(), Series::new(times.clone(), original(&full.states))));
    report
        .extra
        .push(("averaged_original".into(), Series::new(times.clone(), original(&avg.states))));
    report.trajectory = Series::new(times, full.states);
    Ok(report)
}

fn vdp_limit_cycle(cfg: &Resolved) -> Result<Report, RunError> {
    let (_, g) = periodic_field(cfg)?;
    let eps = cfg.eps[0];
    let sys = averaged_terms(&g, cfg.order, &quad(cfg))?;
    let mut report = Report::default();
    let ode = IntegratorConfig::new(cfg.tol, cfg.tol);

    // first order: ‖X‖ = 2 from a seeded start off the cycle
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r0 = rng.gen_range(0.5..3.0);
    let th = rng.gen_range(0.0..2.0 * PI);
    let start = [r0 * th.cos(), r0 * th.sin()];
    let first = sys.truncated(1)?;
    let settled = stroboscopic_solve(&first, &start, cfg.t_end, eps, cfg.tol)?;
    let x = settled.last_state();
    let radius = (x[0] * x[0] + x[1] * x[1]).sqrt();
    report.diag("first_order_radius", radius);
    report.checks.push(Check::at_most("first_order_radius_error", (radius - 2.0).abs(), RADIUS_TOL));

    // requested order: relax onto the cycle, then follow one slow revolution
    let settle = stroboscopic_solve(&sys, &start, cfg.t_end, eps, cfg.tol)?;
    let field = sys.g_terms.sum(eps)?;
    let revolution = 16.0 / (eps * eps) * 2.0 * PI;
    let times = sample_times(revolution, 2001);
    let cycle = integrate(
        &field,
        settle.last_state(),
        0.0,
        revolution,
        &ode.clone().with_dense_output(times.clone()),
    )?;
    let worst = cycle
        .states
        .iter()
        .map(|s| vdp_limit_cycle_invariant(s, eps).abs())
        .fold(0.0, f64::max);
    report.diag("cycle_invariant_max", worst);
    if cfg.order >= 2 {
        report.checks.push(Check::at_most("cycle_invariant_max", worst, CYCLE_TOL));
    }
    report.trajectory = Series::new(times, cycle.states);
    Ok(report)
}

fn nls_averaging(cfg: &Resolved) -> Result<Report, RunError> {
    let c = SpectralNlsConfig::cubic(2.0 * PI, 8);
    let (sys, g) = periodic_field(cfg)?;
    let period = c.period();
    let d = c.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = Report::default();

    // periodicity of the frame and of the rotating field
    let mut periodic = sys.periodicity_residual();
    for _ in 0..5 {
        let x = small_state(&mut rng, d, 0.3);
        let t = rng.gen_range(0.0..period);
        periodic = periodic.max(dist(&g.value(&x, t)?, &g.value(&x, t + period)?));
    }
    report.checks.push(Check::at_most("periodicity_residual", periodic, 1e-10));

    // mass Σ|c_l|² along the reference solution over one period
    let x0 = small_state(&mut rng, d, 0.2);
    let ode = IntegratorConfig::new(cfg.tol, cfg.tol);
    let tr = integrate(&g, &x0, 0.0, period, &ode)?;
    let m0 = nls_mass(&x0);
    let drift = tr.states.iter().map(|s| (nls_mass(s) - m0).abs()).fold(0.0, f64::max);
    report.checks.push(Check::at_most("mass_drift", drift, 1e-10));

    // J ∇H = g
    let j = nls_symplectic_matrix(&c);
    let mut grad_err = 0.0f64;
    for _ in 0..3 {
        let x = small_state(&mut rng, d, 0.3);
        let t = rng.gen_range(0.0..period);
        let h = 1e-6;
        let mut grad = DVector::zeros(d);
        for i in 0..d {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            grad[i] = (nls_hamiltonian(&c, &xp, t)? - nls_hamiltonian(&c, &xm, t)?) / (2.0 * h);
        }
        let jg = &j * DVector::from_vec(g.value(&x, t)?);
        grad_err = grad_err.max((&jg - &grad).norm() / grad.norm());
    }
    report.checks.push(Check::at_most("gradient_relative_error", grad_err, 1e-5));

    // averaged system: G_1 stays Hamiltonian
    let avg = averaged_terms(&g, cfg.order, &quad(cfg))?;
    let mut asym = 0.0f64;
    for _ in 0..5 {
        let x = small_state(&mut rng, d, 0.3);
        let m = &j * avg.g(1).eval(&x, 0.0, 1)?.jacobian();
        asym = asym.max((&m - m.transpose()).norm() / (1.0 + m.norm()));
    }
    report.checks.push(Check::at_most("g1_symplectic_asymmetry", asym, 1e-6));

    let x0 = small_state(&mut rng, d, 0.3);
    report.errors = strobe_sweep(cfg, &g, &avg, &x0)?;
    if cfg.eps.len() >= 2 {
        for n in 1..=cfg.order {
            let errs: Vec<f64> = report.errors.iter().filter(|r| r.order == n).map(|r| r.error).collect();
            report.diag(format!("strobe_slope_order_{n}"), loglog_slope(&cfg.eps, &errs));
        }
    }

    let times = sample_times(cfg.t_end, SAMPLES);
    let dense = ode.with_dense_output(times.clone());
    let full = integrate(&g.scale(cfg.eps[0]), &x0, 0.0, cfg.t_end, &dense)?;
    let averaged = integrate(&avg.g_terms.sum(cfg.eps[0])?, &x0, 0.0, cfg.t_end, &dense)?;
    report.extra.push(("averaged".into(), Series::new(times.clone(), averaged.states)));
    report.trajectory = Series::new(times, full.states);
    Ok(report)
}

/// Seeded random polynomial `A(t)` of the given degree.
pub fn random_poly(rng: &mut ChaCha8Rng, dim: usize, degree: usize) -> MatrixFunction<f64> {
    let coeffs = (0..=degree)
        .map(|_| DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    MatrixFunction::polynomial(coeffs)
}

fn max_pairwise(ms: &[DMatrix<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..ms.len() {
        for j in i + 1..ms.len() {
            worst = worst.max(frobenius(&(&ms[i] - &ms[j])));
        }
    }
    worst
}

/// Largest pairwise discrepancy among the recursive, pre-Lie word,
/// permutation and descent routes, per order `2..=order`.
pub fn oracle_discrepancies(seed: u64, order: usize, t: f64, q: &QuadratureRule) -> Result<Vec<f64>, liegen_core::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<MatrixFunction<f64>> = (0..5)
        .flat_map(|_| [2usize, 3].map(|d| random_poly(&mut rng, d, 3)))
        .collect();
    let per_case = cases
        .par_iter()
        .map(|a| {
            let rec = magnus_terms_recursive(a, order, t, q)?;
            let pl = magnus_terms_prelie(a, order, t, q)?;
            (2..=order)
                .map(|n| {
                    let perm = omega_permutation_oracle(a, n, t, ORACLE_NODES)?;
                    let desc = omega_descent_oracle(a, n, t, ORACLE_NODES)?;
                    Ok(max_pairwise(&[rec.omega(n).clone(), pl.omega(n).clone(), perm, desc]))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..order - 1)
        .map(|k| per_case.iter().map(|c| c[k]).fold(0.0, f64::max))
        .collect())
}

fn oracle_crosscheck(cfg: &Resolved) -> Result<Report, RunError> {
    let q = quad(cfg);
    let disc = oracle_discrepancies(cfg.seed, cfg.order, cfg.t_end, &q)?;
    let mut report = Report::default();
    for (k, d) in disc.iter().enumerate() {
        let n = k + 2;
        report.errors.push(ErrorRow {
            eps: 1.0,
            order: n,
            error: *d,
        });
        report.checks.push(Check::at_most(format!("max_discrepancy_order_{n}"), *d, ORACLE_TOL));
    }
    report.diag("max_discrepancy", disc.iter().copied().fold(0.0, f64::max));

    // exp(Ω^[n](t)) e_1 for the first sampled matrix
    let a = random_poly(&mut ChaCha8Rng::seed_from_u64(cfg.seed), 2, 3);
    let times = sample_times(cfg.t_end, SAMPLES);
    let states = times
        .par_iter()
        .map(|&t| {
            let y = propagate_linear(&a, cfg.order, t, cfg.eps[0], &q)?;
            Ok(y.column(0).iter().copied().collect())
        })
        .collect::<Result<Vec<Vec<f64>>, liegen_core::Error>>()?;
    report.trajectory = Series::new(times, states);
    Ok(report)
}
