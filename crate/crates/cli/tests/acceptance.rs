//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned
//! here and never adjusted to make a line pass.

use std::f64::consts::PI;
use std::process::Command;

use liegen_cli::experiments::{loglog_slope, oracle_discrepancies, random_poly};
use liegen_cli::{compute, EpsSpec, Experiment, ExperimentConfig, Outcome};
use liegen_core::fields::{prelie_identity_residual, AntiderivativeMode, FieldHandle};
use liegen_core::floquet_avg::{averaged_terms, floquet_linear};
use liegen_core::linalg::frobenius;
use liegen_core::magnus_linear::{magnus_terms_recursive, reference_propagator, MatrixFunction};
use liegen_core::magnus_nonlinear::generator_terms;
use liegen_core::quadrature::QuadratureRule;
use liegen_core::Error;
use liegen_core::systems::{autonomous_to_periodic, vdp_field, vdp_g1_closed, vdp_g2_closed};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn trig() -> QuadratureRule {
    QuadratureRule::with_nodes(QuadratureRule::TRIG_NODES)
}

fn run(cfg: ExperimentConfig) -> Result<Outcome, String> {
    compute(&cfg).map_err(|e| e.to_string())
}

fn checks_line(o: &Outcome, names: &[&str]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in names {
        match o.report.checks.iter().find(|c| c.name == *name) {
            Some(c) => {
                pass &= c.pass;
                let range = match (c.min, c.max) {
                    (Some(lo), Some(hi)) => format!("in [{lo}, {hi}]"),
                    (None, Some(hi)) => format!("<= {hi:e}"),
                    (Some(lo), None) => format!(">= {lo}"),
                    (None, None) => String::new(),
                };
                parts.push(format!("{name} = {:.4e} ({range})", c.value));
            }
            None => {
                pass = false;
                parts.push(format!("{name} missing"));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

fn c1_oracles() -> Result<Verdict, String> {
    let d = oracle_discrepancies(1, 4, 0.9, &QuadratureRule::default()).map_err(|e| e.to_string())?;
    let worst = d.iter().copied().fold(0.0, f64::max);
    Ok(verdict(
        worst <= 1e-9,
        format!("max pairwise discrepancy over n = 2..4, 5 seeds × {{2×2, 3×3}}: {worst:.3e} (<= 1e-9)"),
    ))
}

fn c2_order_scaling() -> Result<Verdict, String> {
    let mut cfg = ExperimentConfig::new(Experiment::MagnusLinearOrder);
    cfg.eps = Some(EpsSpec::List(vec![0.2, 0.1, 0.05, 0.025]));
    cfg.order = Some(4);
    cfg.t_end = Some(1.0);
    let o = run(cfg)?;
    Ok(checks_line(&o, &["slope_order_2", "slope_order_4"]))
}

/// `Σ_{k=1,2} C_k cos kt + S_k sin kt`: zero mean, period 2π.
fn zero_mean_trig(rng: &mut ChaCha8Rng, d: usize) -> FieldHandle {
    let mut m = || DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let (c1, s1, c2, s2) = (m(), m(), m(), m());
    let a = MatrixFunction::new(d, move |t| {
        &c1 * t.cos() + &s1 * t.sin() + &c2 * (2.0 * t).cos() + &s2 * (2.0 * t).sin()
    });
    FieldHandle::linear(a).with_period(2.0 * PI)
}

fn c3_prelie() -> Result<Verdict, String> {
    let q = QuadratureRule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut poly_worst = 0.0f64;
    for _ in 0..20 {
        let f: Vec<FieldHandle> = (0..3).map(|_| FieldHandle::linear(random_poly(&mut rng, 2, 3))).collect();
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let t = rng.gen_range(0.0..1.5);
        let r = prelie_identity_residual(&f[0], &f[1], &f[2], &x, t, &AntiderivativeMode::FromZero, &q)
            .map_err(|e| e.to_string())?;
        poly_worst = poly_worst.max(r);
    }
    let mode = AntiderivativeMode::ZeroMeanFourier {
        period: 2.0 * PI,
        modes: 8,
    };
    // General zero-mean triples: ⊳ products need not stay zero-mean, and the
    // zero-mean antiderivative then rejects them.
    let (mut trig_worst, mut undefined, mut worst_mean) = (0.0f64, 0, 0.0f64);
    for _ in 0..20 {
        let f: Vec<FieldHandle> = (0..3).map(|_| zero_mean_trig(&mut rng, 2)).collect();
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let t = rng.gen_range(0.0..2.0 * PI);
        match prelie_identity_residual(&f[0], &f[1], &f[2], &x, t, &mode, &trig()) {
            Ok(r) => trig_worst = trig_worst.max(r),
            Err(Error::NonZeroMean { mean }) => {
                undefined += 1;
                worst_mean = worst_mean.max(mean);
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    // cos t·P x triples keep every product zero-mean, so the residual is defined
    let mut cos_worst = 0.0f64;
    for _ in 0..20 {
        let f: Vec<FieldHandle> = (0..3)
            .map(|_| {
                let p = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
                FieldHandle::linear(MatrixFunction::constant(p))
                    .modulate(f64::cos)
                    .with_period(2.0 * PI)
            })
            .collect();
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let t = rng.gen_range(0.0..2.0 * PI);
        let r = prelie_identity_residual(&f[0], &f[1], &f[2], &x, t, &mode, &trig())
            .map_err(|e| e.to_string())?;
        cos_worst = cos_worst.max(r);
    }
    let rest = if undefined == 20 {
        "none defined".to_string()
    } else {
        format!("max residual on the rest {trig_worst:.3e}")
    };
    Ok(verdict(
        poly_worst <= 1e-9 && undefined == 0 && trig_worst <= 1e-8 && cos_worst <= 1e-8,
        format!(
            "FromZero on 20 polynomial triples: {poly_worst:.3e} (<= 1e-9); \
             ZeroMeanFourier on 20 zero-mean trigonometric triples: {undefined}/20 undefined \
             (a nested product has mean up to {worst_mean:.3e}), {rest}; \
             on 20 cos t-modulated triples: {cos_worst:.3e} (<= 1e-8)"
        ),
    ))
}

fn c4_nonlinear_linear() -> Result<Verdict, String> {
    let q = QuadratureRule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let dim = rng.gen_range(2..4);
        let a = random_poly(&mut rng, dim, 3);
        let w = generator_terms(&FieldHandle::linear(a.clone()), 4, &q).map_err(|e| e.to_string())?;
        let t = rng.gen_range(0.3..1.2);
        let m = magnus_terms_recursive(&a, 4, t, &q).map_err(|e| e.to_string())?;
        let x = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        for j in 1..=4 {
            let wx = w.term(j).value(x.as_slice(), t).map_err(|e| e.to_string())?;
            worst = worst.max(dist(&wx, (m.omega(j) * &x).as_slice()));
        }
    }
    Ok(verdict(worst <= 1e-10, format!("max |W_j x - Ω_j x| for j <= 4: {worst:.3e} (<= 1e-10)")))
}

fn vdp_points(seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|_| {
            let r = 3.0 * rng.gen::<f64>().sqrt();
            let th = rng.gen_range(0.0..2.0 * PI);
            [r * th.cos(), r * th.sin()]
        })
        .collect()
}

fn c5_vdp_g1() -> Result<Verdict, String> {
    let g = autonomous_to_periodic(&vdp_field()).map_err(|e| e.to_string())?;
    let sys = averaged_terms(&g, 1, &trig()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for x in vdp_points(5) {
        let v = sys.g(1).value(&x, 0.0).map_err(|e| e.to_string())?;
        worst = worst.max(dist(&v, &vdp_g1_closed(&x)));
    }
    let at = sys.g(1).value(&[2.0, 0.0], 0.0).map_err(|e| e.to_string())?;
    let at_norm = dist(&at, &[0.0, 0.0]);
    Ok(verdict(
        worst <= 1e-8 && at_norm <= 1e-8,
        format!("max |G_1 - closed form| at 20 points: {worst:.3e} (<= 1e-8); |G_1(2,0)| = {at_norm:.3e}"),
    ))
}

fn c6_vdp_g2() -> Result<Verdict, String> {
    let g = autonomous_to_periodic(&vdp_field()).map_err(|e| e.to_string())?;
    let sys = averaged_terms(&g, 2, &trig()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for x in vdp_points(6) {
        let v = sys.g(2).value(&x, 0.0).map_err(|e| e.to_string())?;
        worst = worst.max(dist(&v, &vdp_g2_closed(&x)));
    }
    let at = sys.g(2).value(&[2.0, 0.0], 0.0).map_err(|e| e.to_string())?;
    let at_err = dist(&at, &[0.0, 0.125]);
    Ok(verdict(
        worst <= 1e-7 && at_err <= 1e-7,
        format!(
            "max |G_2 - closed form| at 20 points: {worst:.3e} (<= 1e-7); G_2(2,0) = ({:.3e}, {:.12})",
            at[0], at[1]
        ),
    ))
}

fn c7_strobe_orders() -> Result<Verdict, String> {
    let mut cfg = ExperimentConfig::new(Experiment::VdpAveraging);
    cfg.eps = Some(EpsSpec::List(vec![0.1, 0.05, 0.025]));
    cfg.order = Some(2);
    cfg.t_end = Some(20.0 * 2.0 * PI);
    let o = run(cfg)?;
    Ok(checks_line(&o, &["slope_order_1", "slope_order_2"]))
}

fn c8_limit_cycle() -> Result<Verdict, String> {
    let mut cfg = ExperimentConfig::new(Experiment::VdpLimitCycle);
    cfg.eps = Some(EpsSpec::Scalar(0.1));
    cfg.order = Some(2);
    let o = run(cfg)?;
    Ok(checks_line(&o, &["cycle_invariant_max", "first_order_radius_error"]))
}

fn random_periodic(seed: u64, dim: usize) -> MatrixFunction<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = || DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let (c0, c1, s1, c2) = (m(), m(), m(), m());
    MatrixFunction::new(dim, move |t| &c0 + &c1 * t.cos() + &s1 * t.sin() + &c2 * (2.0 * t).cos())
        .with_period(2.0 * PI)
}

fn c9_floquet() -> Result<Verdict, String> {
    let q = QuadratureRule::new(32, 4);
    let period = 2.0 * PI;
    let (mut ends, mut fk) = (0.0f64, 0.0f64);
    for seed in 0..3 {
        let a = random_periodic(seed, 2);
        let fl = floquet_linear(&a, 3, &q).map_err(|e| e.to_string())?;
        let omega = magnus_terms_recursive(&a, 3, period, &q).map_err(|e| e.to_string())?;
        for k in 1..=3 {
            ends = ends
                .max(frobenius(&fl.lambda_unreduced(k, 0.0)))
                .max(frobenius(&fl.lambda_unreduced(k, period)));
            fk = fk.max(frobenius(&(&fl.f_terms[k - 1] - omega.omega(k) / period)));
        }
    }
    let a = random_periodic(9, 2);
    let eps = [0.2, 0.1, 0.05, 0.025];
    let mut slopes = Vec::new();
    let mut slopes_ok = true;
    for n in 1..=3usize {
        let fl = floquet_linear(&a, n, &q).map_err(|e| e.to_string())?;
        let mut errs = Vec::new();
        for &e in &eps {
            let r = reference_propagator(&a, e, 1.0, 1e-13).map_err(|e| e.to_string())?;
            errs.push(frobenius(&(fl.propagator(e, 1.0) - r)));
        }
        let s = loglog_slope(&eps, &errs);
        slopes_ok &= (s - (n as f64 + 1.0)).abs() <= 0.3;
        slopes.push(format!("n={n}: {s:.3}"));
    }
    Ok(verdict(
        ends <= 1e-9 && fk <= 1e-9 && slopes_ok,
        format!(
            "max |Λ_k(0)|,|Λ_k(T)|: {ends:.3e} (<= 1e-9); max |F_k - Ω_k(T)/T|: {fk:.3e} (<= 1e-9); \
             slopes {} (n+1 ± 0.3)",
            slopes.join(", ")
        ),
    ))
}

fn c10_nls() -> Result<Verdict, String> {
    let o = run(ExperimentConfig::new(Experiment::NlsAveraging))?;
    Ok(checks_line(
        &o,
        &[
            "periodicity_residual",
            "mass_drift",
            "g1_symplectic_asymmetry",
            "gradient_relative_error",
        ],
    ))
}

fn c11_determinism() -> Result<Verdict, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let mut cfg = ExperimentConfig::new(Experiment::OracleCrosscheck);
    cfg.seed = Some(1);
    cfg.order = Some(3);
    cfg.out_dir = Some(out.clone());
    let path = dir.path().join("oracle.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for _ in 0..2 {
        let status = Command::new(env!("CARGO_BIN_EXE_liegen"))
            .args(["run", "--config"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Ok(verdict(false, format!("liegen exited with {}", status.status)));
        }
        let summary = std::fs::read(out.join("summary.json")).map_err(|e| e.to_string())?;
        let traj = std::fs::read(out.join("trajectory.csv")).map_err(|e| e.to_string())?;
        std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        runs.push((summary, traj));
    }
    let same = runs[0] == runs[1];
    Ok(verdict(
        same,
        format!(
            "two `liegen run` invocations: summary.json {} bytes, identical = {same}",
            runs[0].0.len()
        ),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Verdict, String>); 11] = [
        ("linear Magnus oracle equivalence", c1_oracles),
        ("order scaling of exp(Ω^[n])", c2_order_scaling),
        ("pre-Lie relation", c3_prelie),
        ("nonlinear/linear generator consistency", c4_nonlinear_linear),
        ("Van der Pol G_1", c5_vdp_g1),
        ("Van der Pol G_2", c6_vdp_g2),
        ("stroboscopic averaging order", c7_strobe_orders),
        ("limit-cycle refinement", c8_limit_cycle),
        ("Floquet linear", c9_floquet),
        ("NLS toy", c10_nls),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let v = f().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        if !v.pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
