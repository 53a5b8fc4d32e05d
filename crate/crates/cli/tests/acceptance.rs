//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Artifacts go under `$CARGO_TARGET_TMPDIR/acceptance`, which is cleared
//! first unless `SMM_ACCEPTANCE_REUSE` is set.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smm_cli::experiment::{ModelKey, Subject, SwingupRow};
use smm_cli::formats;
use smm_cli::report::pooled;
use smm_cli::{ExperimentConfig, Runner};
use smm_core::autodiff::{grad, jacobian, mlp_apply, Activation, Dual, MlpParams, Var};
use smm_core::integrators::{rk4_step, Discretization};
use smm_core::mechanics::{self, christoffel, MechState};
use smm_core::models::{DiscreteModel, Linearization, ModelCheckpoint, ModelClass, ModelConfig, NetRole, TrueModel};
use smm_core::systems::{SystemKind, SystemSpec};
use smm_core::trajopt::{diag, solve_dircol, SolverOptions, Trajectory, TrajoptProblem};
use smm_core::tvlqr::{grid_search, riccati, swingup_cost, synthesize_gains, track, TrackingGrid, TrackingWeights};

type Outcome = Result<String, String>;

struct Suite {
    failed: usize,
}

impl Suite {
    fn run(&mut self, id: &str, title: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {id} ({title}): {msg} [{secs:.0} s]"),
            Err(msg) => {
                self.failed += 1;
                println!("FAIL criterion {id} ({title}): {msg} [{secs:.0} s]");
            }
        }
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn runner(cfg: ExperimentConfig) -> Runner {
    Runner { cfg, force: false, jobs: jobs(), quiet: false }
}

fn desk_config(root: &Path) -> ExperimentConfig {
    ExperimentConfig { output_dir: root.join("desk"), ..ExperimentConfig::default() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// Criterion 1.

fn generalization(root: &Path) -> Outcome {
    let start = Instant::now();
    let r = runner(desk_config(root));
    r.gen_data().map_err(err)?;
    r.train().map_err(err)?;
    r.eval().map_err(err)?;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let mut parts = Vec::new();
    let mut ok = true;
    for sys in ["cartpole", "furuta"] {
        let rows = r.read_metrics(sys).map_err(err)?;
        let mut best_ratio = 0.0f64;
        for &size in &r.cfg.sizes {
            let m = |class: &str| {
                mean(&rows.iter().filter(|x| x.class == class && x.size == size).map(|x| x.mse).collect::<Vec<_>>())
            };
            let (smm, bb) = (m("smm_c"), m("bbnn"));
            if !(smm < bb) {
                ok = false;
                parts.push(format!("{sys} n={size}: SMM-C {smm:.3e} not below BBNN {bb:.3e}"));
            }
            best_ratio = best_ratio.max(bb / smm);
        }
        if best_ratio < 10.0 {
            ok = false;
        }
        parts.push(format!("{sys} max BBNN/SMM-C ratio {best_ratio:.1}"));
    }
    if minutes > 45.0 {
        ok = false;
    }
    parts.push(format!("pipeline {minutes:.1} min (limit 45)"));
    let msg = parts.join("; ");
    if ok { Ok(msg) } else { Err(msg) }
}

// Criterion 2.

fn true_swingup(root: &Path) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for sys in ["cartpole", "furuta"] {
        let mut cfg = ExperimentConfig { output_dir: root.join("true"), ..ExperimentConfig::default() };
        cfg.systems = vec![sys.into()];
        cfg.swingup.systems = vec![sys.into()];
        cfg.swingup.include_learned = false;
        let r = runner(cfg);
        let start = Instant::now();
        r.trajopt().map_err(err)?;
        r.swingup().map_err(err)?;
        let secs = start.elapsed().as_secs_f64();
        let row = r.read_swingup_summary(sys).map_err(err)?.into_iter().find(|x| x.class == "true").ok_or("no true row")?;
        let cost = row.cost.unwrap_or(f64::INFINITY);
        if !(cost < 1e-2) || secs > 300.0 {
            ok = false;
        }
        parts.push(format!("{sys} cost {cost:.3e} (limit 1e-2) in {secs:.0} s (limit 300)"));
    }
    let msg = parts.join("; ");
    if ok { Ok(msg) } else { Err(msg) }
}

// Criterion 3.

fn learned_swingup(root: &Path) -> Outcome {
    let mut cfg = desk_config(root);
    cfg.swingup.systems = vec!["cartpole".into()];
    cfg.swingup.size = 4096;
    cfg.swingup.include_true = false;
    let r = runner(cfg);
    r.trajopt().map_err(err)?;
    r.swingup().map_err(err)?;
    let rows: Vec<SwingupRow> = r.read_swingup_summary("cartpole").map_err(err)?;
    let costs = |class: &str| -> Vec<f64> {
        rows.iter().filter(|x| x.class == class).map(|x| x.cost.unwrap_or(f64::INFINITY)).collect()
    };
    let (smm, bb) = (costs("smm_c"), costs("bbnn"));
    let good = smm.iter().filter(|&&c| c < 0.1).count();
    let (ms, mb) = (median(smm.clone()), median(bb.clone()));
    let msg = format!(
        "SMM-C costs {:?}, {good}/3 below 1e-1; median SMM-C {ms:.3e} vs BBNN {mb:.3e} (BBNN costs {:?})",
        smm.iter().map(|c| format!("{c:.2e}")).collect::<Vec<_>>(),
        bb.iter().map(|c| format!("{c:.2e}")).collect::<Vec<_>>()
    );
    if good >= 2 && ms < mb { Ok(msg) } else { Err(msg) }
}

// Criterion 4.

fn jacobian_ordering(root: &Path) -> Outcome {
    let r = runner(desk_config(root));
    let rows = r.read_metrics("cartpole").map_err(err)?;
    let group = |class: &'static str, size: usize| rows.iter().filter(move |x| x.class == class && x.size == size);
    let mse = |class: &'static str, size: usize| mean(&group(class, size).map(|x| x.mse).collect::<Vec<_>>());
    let bb_size = *r.cfg.sizes.iter().max().expect("sizes");
    let target = mse("bbnn", bb_size).ln();
    let smm_size = *r
        .cfg
        .sizes
        .iter()
        .min_by(|&&a, &&b| (mse("smm_c", a).ln() - target).abs().total_cmp(&(mse("smm_c", b).ln() - target).abs()))
        .expect("sizes");
    let jac = |class: &'static str, size: usize| {
        let ex: Vec<(f64, f64)> = group(class, size).map(|x| (x.jac_err_x, x.jac_err_x_std)).collect();
        let eu: Vec<(f64, f64)> = group(class, size).map(|x| (x.jac_err_u, x.jac_err_u_std)).collect();
        (pooled(&ex), pooled(&eu))
    };
    let ((sx, _), (su, _)) = jac("smm_c", smm_size);
    let ((bx, _), (bu, _)) = jac("bbnn", bb_size);
    let msg = format!(
        "matched SMM-C n={smm_size} (MSE {:.2e}) to BBNN n={bb_size} (MSE {:.2e}): jac_err_x {sx:.3e} vs {bx:.3e}, jac_err_u {su:.3e} vs {bu:.3e}",
        mse("smm_c", smm_size),
        mse("bbnn", bb_size)
    );
    if sx <= bx && su <= bu { Ok(msg) } else { Err(msg) }
}

// Criterion 5: property checks, each returning its worst measured value.

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    num / den
}

fn central_diff(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|i| {
            let mut p = at.to_vec();
            let mut m = at.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn ad_fd_checks() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst_grad = 0.0f64;
    let mut worst_jac = 0.0f64;
    for seed in 0..50 {
        let net = MlpParams::init(&[3, 7, 7, 2], Activation::Tanh, seed).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let consts = |net: &MlpParams| net.flat().iter().map(|&v| Var::constant(v)).collect::<Vec<_>>();
        let g = grad(|v: &[Var]| mlp_apply(net.sizes(), net.activation(), &consts(&net), v).unwrap()[0], &x).unwrap();
        let fd = central_diff(|p| net.forward(p).unwrap()[0], &x, 1e-5);
        if fd.iter().any(|v| v.abs() > 1e-4) {
            worst_grad = worst_grad.max(rel_err(&g, &fd));
        }
        let j = jacobian(
            |v: &[Dual<f64>]| {
                let p: Vec<Dual<f64>> = net.flat().iter().map(|&w| Dual::constant(w)).collect();
                mlp_apply(net.sizes(), net.activation(), &p, v).unwrap()
            },
            &x,
        )
        .unwrap();
        for (i, row) in j.iter().enumerate() {
            let fd = central_diff(|p| net.forward(p).unwrap()[i], &x, 1e-5);
            if fd.iter().any(|v| v.abs() > 1e-4) {
                worst_jac = worst_jac.max(rel_err(row, &fd));
            }
        }
    }
    (worst_grad, worst_jac)
}

fn mixed_second_order() -> f64 {
    let net = MlpParams::init(&[2, 5, 2], Activation::Tanh, 5).unwrap();
    let q = [0.3, -1.1];
    let s_of = |flat: &[f64]| -> f64 {
        let j = jacobian(
            |x: &[Dual<f64>]| {
                let p: Vec<Dual<f64>> = flat.iter().map(|&v| Dual::constant(v)).collect();
                mlp_apply(net.sizes(), net.activation(), &p, x).unwrap()
            },
            &q,
        )
        .unwrap();
        j.iter().flatten().map(|v| v * v).sum()
    };
    let ad = grad(
        |theta: &[Var]| {
            let qv: Vec<Var> = q.iter().map(|&v| Var::constant(v)).collect();
            let j = jacobian(
                |x: &[Dual<Var>]| {
                    let p: Vec<Dual<Var>> = theta.iter().map(|&v| Dual::constant(v)).collect();
                    mlp_apply(net.sizes(), net.activation(), &p, x).unwrap()
                },
                &qv,
            )
            .unwrap();
            let mut acc = Var::constant(0.0);
            for v in j.iter().flatten() {
                acc = acc + *v * *v;
            }
            acc
        },
        net.flat(),
    )
    .unwrap();
    rel_err(&ad, &central_diff(s_of, net.flat(), 1e-6))
}

fn random_state(spec: &SystemSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    spec.state_box.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()
}

fn christoffel_skew() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for kind in SystemKind::BENCHMARKS {
        let spec = SystemSpec::new(kind);
        let n = spec.n_q();
        for _ in 0..200 {
            let x = random_state(&spec, &mut rng);
            let (q, qd) = (&x[..n], &x[n..]);
            let t = spec.truth_terms(q, qd, &[0.0]).unwrap();
            let dm = &t.mass_jacobian;
            let mdot = |i: usize, j: usize| (0..n).map(|k| dm[(i * n + j) * n + k] * qd[k]).sum::<f64>();
            let c = |i: usize, j: usize| (0..n).map(|k| christoffel(dm, n, i, j, k) * qd[k]).sum::<f64>();
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((mdot(i, j) - 2.0 * c(i, j) + mdot(j, i) - 2.0 * c(j, i)).abs());
                }
            }
        }
    }
    worst
}

fn energy_drift() -> f64 {
    let disc = Discretization::rk4(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for kind in SystemKind::BENCHMARKS {
        let spec = SystemSpec::new(kind).frictionless();
        let n = spec.n_q();
        for _ in 0..5 {
            let x0: Vec<f64> = (0..2 * n).map(|i| spec.home[i] + rng.gen_range(-0.5..0.5)).collect();
            let xs = spec.rollout(&x0, &vec![vec![0.0]; 500], &disc).unwrap();
            let e0 = spec.total_energy(&x0);
            let scale = e0 - spec.total_energy(&spec.home);
            let drift = xs.iter().map(|x| (spec.total_energy(x) - e0).abs()).fold(0.0, f64::max);
            worst = worst.max(drift / scale);
        }
    }
    worst
}

fn friction_monotone() -> bool {
    let disc = Discretization::rk4(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    SystemKind::BENCHMARKS.iter().all(|&kind| {
        let spec = SystemSpec::new(kind);
        (0..3).all(|_| {
            let x0 = random_state(&spec, &mut rng);
            let xs = spec.rollout(&x0, &vec![vec![0.0]; 500], &disc).unwrap();
            let e: Vec<f64> = xs.iter().map(|x| spec.total_energy(x)).collect();
            e.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0)) && e[e.len() - 1] < e[0]
        })
    })
}

fn min_eigenvalue(m: &[f64], n: usize) -> f64 {
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let shifted: Vec<f64> = (0..n * n).map(|k| m[k] - if k % (n + 1) == 0 { mid } else { 0.0 }).collect();
        if mechanics::cholesky(&shifted, n).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn perturbed(class: ModelClass, kind: SystemKind, seed: u64, gain: f64) -> ModelCheckpoint {
    let spec = SystemSpec::new(kind);
    let cfg = ModelConfig::new(class, spec.n_q(), spec.n_u(), spec.angle_mask()).with_hidden(&[16, 16]);
    let mut ckpt = ModelCheckpoint::init(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    for p in &mut ckpt.params {
        for v in p.flat_mut() {
            *v = gain * *v + 0.1 * rng.gen_range(-1.0..1.0);
        }
    }
    ckpt
}

fn random_input(spec: &SystemSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    spec.u_max.iter().map(|&u| rng.gen_range(-u..=u)).collect()
}

/// Worst asymmetry and worst `lambda_min / eps^2`.
fn mass_floor() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut asym, mut ratio) = (0.0f64, f64::INFINITY);
    for kind in SystemKind::BENCHMARKS {
        let spec = SystemSpec::new(kind);
        let n = spec.n_q();
        for seed in 0..5 {
            let ckpt = perturbed(ModelClass::SmmC, kind, seed, 4.0);
            let eps = ckpt.config.eps;
            for _ in 0..20 {
                let x = random_state(&spec, &mut rng);
                let (m, _) = ckpt.mass_matrix(&x[..n]).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        asym = asym.max((m[i * n + j] - m[j * n + i]).abs());
                    }
                }
                ratio = ratio.min(min_eigenvalue(&m, n) / (eps * eps));
            }
        }
    }
    (asym, ratio)
}

fn identity_mass_equivalence() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    SystemKind::BENCHMARKS.iter().all(|&kind| {
        let spec = SystemSpec::new(kind);
        let bbnn = perturbed(ModelClass::Bbnn, kind, 12, 1.0);
        let mut cfg = ModelConfig::new(ModelClass::Smm, spec.n_q(), spec.n_u(), spec.angle_mask()).with_hidden(&[16, 16]);
        cfg.identity_mass = true;
        let mut smm = ModelCheckpoint::zeros(cfg).unwrap();
        *smm.params_for_mut(NetRole::Force).unwrap() = bbnn.params[0].clone();
        (0..50).all(|_| {
            let x = random_state(&spec, &mut rng);
            let s = MechState::from_vector(&x).unwrap();
            let u = random_input(&spec, &mut rng);
            let a = bbnn.accel(&s, &u).unwrap();
            let b = smm.accel(&s, &u).unwrap();
            a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits())
        })
    })
}

fn affine_residual() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for kind in SystemKind::BENCHMARKS {
        let spec = SystemSpec::new(kind);
        let ckpt = perturbed(ModelClass::SmmC, kind, 2, 1.0);
        for _ in 0..20 {
            let s = MechState::from_vector(&random_state(&spec, &mut rng)).unwrap();
            let (u1, u2) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let a = |u: f64| ckpt.accel(&s, &[u]).unwrap();
            let (a12, a1, a2, a0) = (a(u1 + u2), a(u1), a(u2), a(0.0));
            for i in 0..spec.n_q() {
                worst = worst.max((a12[i] - a1[i] - a2[i] + a0[i]).abs());
            }
        }
    }
    worst
}

fn rk4_checks() -> (f64, Vec<f64>) {
    let exp_field = |x: &[f64], _u: &[f64]| -> smm_core::Result<Vec<f64>> { Ok(vec![x[0]]) };
    let e = (rk4_step(exp_field, &[1.0], &[], 0.1).unwrap()[0] - 0.1f64.exp()).abs();
    // Damped oscillator from (1, 0) against its closed form.
    let osc = |x: &[f64], _u: &[f64]| -> smm_core::Result<Vec<f64>> { Ok(vec![x[1], -4.0 * x[0] - 0.3 * x[1]]) };
    let exact = |t: f64| {
        let (a, w) = (0.15, (4.0f64 - 0.0225).sqrt());
        let e = (-a * t).exp();
        [e * ((w * t).cos() + a / w * (w * t).sin()), e * (-(a * a + w * w) / w) * (w * t).sin()]
    };
    let global = |steps: usize| {
        let dt = 2.0 / steps as f64;
        let mut x = vec![1.0, 0.0];
        for _ in 0..steps {
            x = rk4_step(osc, &x, &[], dt).unwrap();
        }
        let ex = exact(2.0);
        ((x[0] - ex[0]).powi(2) + (x[1] - ex[1]).powi(2)).sqrt()
    };
    let ratios = [20, 40, 80].iter().map(|&n| global(n) / global(2 * n)).collect();
    (e, ratios)
}

fn max_defect(model: &dyn DiscreteModel, traj: &Trajectory) -> f64 {
    let next = model.step_batch(&traj.states[..traj.inputs.len()], &traj.inputs).unwrap();
    next.iter()
        .zip(&traj.states[1..])
        .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

struct DoubleIntegrator {
    dt: f64,
}

impl DoubleIntegrator {
    fn a(&self) -> [f64; 4] {
        [1.0, self.dt, 0.0, 1.0]
    }
    fn b(&self) -> [f64; 2] {
        [0.5 * self.dt * self.dt, self.dt]
    }
}

impl DiscreteModel for DoubleIntegrator {
    fn label(&self) -> &'static str {
        "double_integrator"
    }
    fn n_x(&self) -> usize {
        2
    }
    fn n_u(&self) -> usize {
        1
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn step_batch(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> smm_core::Result<Vec<Vec<f64>>> {
        let (a, b) = (self.a(), self.b());
        Ok(xs
            .iter()
            .zip(us)
            .map(|(x, u)| vec![a[0] * x[0] + a[1] * x[1] + b[0] * u[0], a[2] * x[0] + a[3] * x[1] + b[1] * u[0]])
            .collect())
    }
    fn linearize_batch(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> smm_core::Result<Vec<Linearization>> {
        let next = self.step_batch(xs, us)?;
        Ok(next.into_iter().map(|next| Linearization { next, a: self.a().to_vec(), b: self.b().to_vec() }).collect())
    }
}

/// Relative cost error and max defect of the double-integrator DIRCOL.
fn double_integrator_dircol() -> (f64, f64) {
    let model = DoubleIntegrator { dt: 0.02 };
    let horizon = 51;
    let p = TrajoptProblem {
        x0: vec![0.0, 0.0],
        xg: vec![1.0, 0.0],
        horizon,
        q: vec![0.0; 4],
        r: vec![1.0],
        qf: diag(&[1e4, 1e4]),
        u_max: vec![1e6],
    };
    let traj = solve_dircol(&p, &model, &p.initial_guess(model.dt), &SolverOptions::default()).unwrap();
    // Optimal cost x_g' (Q_F^-1 + G G')^-1 x_g with G the reachability map.
    let (a, b) = (model.a(), model.b());
    let mut g = [[0.0; 2]; 2];
    let mut col = b;
    for _ in 0..horizon - 1 {
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += col[i] * col[j];
            }
        }
        col = [a[0] * col[0] + a[1] * col[1], a[2] * col[0] + a[3] * col[1]];
    }
    let m = [[g[0][0] + 1e-4, g[0][1]], [g[1][0], g[1][1] + 1e-4]];
    let oracle = m[1][1] / (m[0][0] * m[1][1] - m[0][1] * m[1][0]);
    ((traj.cost - oracle).abs() / oracle, max_defect(&model, &traj))
}

/// Max defect over every converged trajectory an earlier criterion wrote.
fn returned_solution_defects(root: &Path) -> Result<(usize, f64), String> {
    let mut count = 0;
    let mut worst = 0.0f64;
    let mut checked = |r: &Runner, s: &Subject| -> Result<(), String> {
        let Ok((rec, Some(traj))) = r.read_trajopt(s) else { return Ok(()) };
        if rec.status != "converged" {
            return Ok(());
        }
        let model: Box<dyn DiscreteModel> = match s {
            Subject::True { system } => {
                Box::new(TrueModel::new(r.cfg.system_spec(system).map_err(err)?, r.cfg.discretization()))
            }
            Subject::Learned(k) => Box::new(formats::read_checkpoint(&r.checkpoint_path(k)).map_err(err)?),
        };
        count += 1;
        worst = worst.max(max_defect(model.as_ref(), &traj));
        Ok(())
    };
    let truth = Runner::new(ExperimentConfig { output_dir: root.join("true"), ..ExperimentConfig::default() });
    for sys in ["cartpole", "furuta"] {
        checked(&truth, &Subject::True { system: sys.into() })?;
    }
    let desk = Runner::new(desk_config(root));
    for class in [ModelClass::SmmC, ModelClass::Bbnn] {
        for seed in 0..3 {
            checked(&desk, &Subject::Learned(ModelKey { system: "cartpole".into(), class, size: 4096, seed }))?;
        }
    }
    Ok((count, worst))
}

fn dare_gain_error() -> f64 {
    let dt = 0.1;
    let (q, r) = (1.0, 0.5);
    let lin = vec![Linearization { next: vec![0.0; 2], a: vec![1.0, dt, 0.0, 1.0], b: vec![0.5 * dt * dt, dt] }; 3000];
    let g = riccati(&lin, 2, 1, &TrackingWeights::scaled_identity(2, 1, q, r, q)).unwrap();
    let (a, b) = ([[1.0, dt], [0.0, 1.0]], [0.5 * dt * dt, dt]);
    let mut p = [[q, 0.0], [0.0, q]];
    let mut k = [0.0; 2];
    for _ in 0..100_000 {
        let pb = [p[0][0] * b[0] + p[0][1] * b[1], p[1][0] * b[0] + p[1][1] * b[1]];
        let s = r + b[0] * pb[0] + b[1] * pb[1];
        let bpa = [pb[0] * a[0][0] + pb[1] * a[1][0], pb[0] * a[0][1] + pb[1] * a[1][1]];
        k = [bpa[0] / s, bpa[1] / s];
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut apa = 0.0;
                for m in 0..2 {
                    for n in 0..2 {
                        apa += a[m][i] * p[m][n] * a[n][j];
                    }
                }
                next[i][j] = if i == j { q } else { 0.0 } + apa - bpa[i] * bpa[j] / s;
            }
        }
        let change = (0..4).map(|e| (next[e / 2][e % 2] - p[e / 2][e % 2]).abs()).fold(0.0, f64::max);
        p = next;
        if change < 1e-14 {
            break;
        }
    }
    let k1 = &g.gains[0];
    ((k1[0] - k[0]).powi(2) + (k1[1] - k[1]).powi(2)).sqrt() / (k[0] * k[0] + k[1] * k[1]).sqrt()
}

fn cartpole() -> TrueModel {
    TrueModel::new(SystemSpec::new(SystemKind::Cartpole), Discretization::rk4(0.05).with_substeps(5))
}

fn rollout_nominal(model: &TrueModel, steps: usize) -> Trajectory {
    let inputs: Vec<Vec<f64>> = (0..steps).map(|t| vec![4.0 * (0.2 * t as f64).sin()]).collect();
    Trajectory::rollout(model, &model.spec.home, &inputs).unwrap()
}

/// Worst asymmetry, PSD flag, worst relative gain change under scaling.
fn riccati_checks() -> (f64, bool, f64) {
    let model = cartpole();
    let traj = rollout_nominal(&model, 60);
    let w = TrackingWeights::scaled_identity(4, 1, 1.0, 0.1, 100.0);
    let g = synthesize_gains(&model, &traj, &w).unwrap();
    let mut asym = 0.0f64;
    let mut psd = true;
    for p in &g.cost_to_go {
        for i in 0..4 {
            for j in 0..4 {
                asym = asym.max((p[i * 4 + j] - p[j * 4 + i]).abs());
            }
        }
        let scale = p.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let shifted: Vec<f64> = (0..16).map(|k| p[k] + if k % 5 == 0 { 1e-10 * scale } else { 0.0 }).collect();
        psd &= mechanics::cholesky(&shifted, 4).is_ok();
    }
    let mut scaling = 0.0f64;
    for alpha in [1e-3, 7.0, 250.0] {
        let s = synthesize_gains(&model, &traj, &w.scaled(alpha)).unwrap();
        for (a, b) in g.gains.iter().flatten().zip(s.gains.iter().flatten()) {
            scaling = scaling.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    (asym, psd, scaling)
}

fn exact_tracking_error() -> f64 {
    let model = cartpole();
    let traj = rollout_nominal(&model, 80);
    let g = synthesize_gains(&model, &traj, &TrackingWeights::scaled_identity(4, 1, 1.0, 0.1, 100.0)).unwrap();
    let run = track(&model, &traj.states[0], &traj, &g, true).unwrap();
    run.states.iter().zip(&traj.states).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}

fn swingup_metric_trivia() -> bool {
    let xg = vec![0.0, std::f64::consts::PI, 0.0, 0.0];
    let passing = vec![vec![1.0, 0.0, 0.0, 0.0], xg.clone(), vec![0.5; 4]];
    let zero = swingup_cost(&passing, &xg, None) == 0.0;
    let model = cartpole();
    let mut traj = rollout_nominal(&model, 40);
    for u in &mut traj.inputs {
        u[0] *= 0.9;
    }
    let small = TrackingGrid { q: vec![0.1], r: vec![0.01, 0.1], qf: vec![10.0] };
    let larger = TrackingGrid { q: vec![0.1, 10.0], r: vec![0.01, 0.1, 1.0], qf: vec![10.0, 100.0] };
    let a = grid_search(&model, &model, &traj, &small, true).unwrap();
    let b = grid_search(&model, &model, &traj, &larger, true).unwrap();
    zero && b.cost <= a.cost && a.costs.iter().flatten().all(|c| a.cost <= *c)
}

fn properties(root: &Path) -> Outcome {
    let start = Instant::now();
    let mut checks: Vec<(String, bool)> = Vec::new();
    let mut add = |name: String, ok: bool| checks.push((name, ok));

    let (g, j) = ad_fd_checks();
    add(format!("AD gradient FD rel err {g:.1e} < 1e-4"), g < 1e-4);
    add(format!("AD Jacobian FD rel err {j:.1e} < 1e-4"), j < 1e-4);
    let m = mixed_second_order();
    add(format!("mixed second order rel err {m:.1e} < 1e-3"), m < 1e-3);
    let c = christoffel_skew();
    add(format!("Christoffel skew {c:.1e} < 1e-9"), c < 1e-9);
    let e = energy_drift();
    add(format!("undamped energy drift {e:.1e} < 1e-5"), e < 1e-5);
    add("friction energy monotone".into(), friction_monotone());
    let (asym, floor) = mass_floor();
    add(format!("SMM mass symmetric (asym {asym:.0e}) with lambda_min/eps^2 = {floor:.3}"), asym == 0.0 && floor >= 1.0 - 1e-6);
    add("identity-M SMM equals BBNN bitwise".into(), identity_mass_equivalence());
    let a = affine_residual();
    add(format!("SMM-C affine residual {a:.1e} < 1e-10"), a < 1e-10);
    let (rk, ratios) = rk4_checks();
    add(format!("RK4 e^0.1 error {rk:.1e} < 1e-7"), rk < 1e-7);
    add(
        format!("RK4 halving ratios {:?} in [13, 19]", ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()),
        ratios.iter().all(|r| (13.0..19.0).contains(r)),
    );
    let (rel, di_defect) = double_integrator_dircol();
    add(format!("double-integrator DIRCOL cost rel err {rel:.1e} < 1e-2"), rel < 1e-2);
    match returned_solution_defects(root) {
        Ok((n, d)) => {
            let d = d.max(di_defect);
            add(format!("DIRCOL defects {d:.1e} <= 1e-6 over {} solutions", n + 1), d <= 1e-6)
        }
        Err(msg) => add(format!("DIRCOL defects: {msg}"), false),
    }
    let k = dare_gain_error();
    add(format!("TVLQR vs DARE gain rel err {k:.1e} < 1e-4"), k < 1e-4);
    let (asym, psd, scaling) = riccati_checks();
    add(format!("Riccati P asym {asym:.1e}, PSD {psd}"), asym < 1e-9 && psd);
    add(format!("gain change under cost scaling {scaling:.1e} < 1e-8"), scaling < 1e-8);
    let t = exact_tracking_error();
    add(format!("exact-model tracking error {t:.1e} < 1e-6"), t < 1e-6);
    add("swing-up metric zero at goal and monotone under grid extension".into(), swingup_metric_trivia());

    let secs = start.elapsed().as_secs_f64();
    add(format!("suite time {secs:.0} s <= 300"), secs <= 300.0);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    let all: Vec<&str> = checks.iter().map(|c| c.0.as_str()).collect();
    if failed.is_empty() {
        Ok(all.join("; "))
    } else {
        Err(format!("failed: {}", failed.join("; ")))
    }
}

// Criterion 6.

fn tiny_config(dir: &Path) -> String {
    format!(
        r#"output_dir = "{}"
systems = ["cartpole"]
classes = ["smm_c", "bbnn"]
sizes = [64, 128]
seeds = [0, 1]
test_size = 128

[train]
epochs = 3

[trajopt]
horizon = 21
max_outer = 3
max_inner = 8

[tvlqr]
q = [1.0]
r = [0.1, 1.0]
qf = [10.0]

[swingup]
systems = ["cartpole"]
size = 128
"#,
        dir.display()
    )
}

fn smm(config: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_smm"))
        .arg("--config")
        .arg(config)
        .args(["--jobs", "1", "--quiet"])
        .args(args)
        .output()
        .map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("smm {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

/// Every file under `dir` keyed by relative path. Timing sidecars are
/// dropped and the wall-time column of the metrics is blanked.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
                continue;
            }
            let rel = path.strip_prefix(base).unwrap().to_path_buf();
            if rel.to_string_lossy().ends_with(".timing.json") {
                continue;
            }
            let mut bytes = std::fs::read(&path).unwrap();
            if rel.starts_with("metrics") && rel.extension().is_some_and(|e| e == "csv") {
                let text = String::from_utf8(bytes).unwrap();
                let masked: Vec<String> = text
                    .lines()
                    .map(|l| {
                        let mut cols: Vec<&str> = l.split(',').collect();
                        cols[9] = "";
                        cols.join(",")
                    })
                    .collect();
                bytes = masked.join("\n").into_bytes();
            }
            out.insert(rel, bytes);
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn reproducibility(root: &Path) -> Outcome {
    let stages = ["gen-data", "train", "eval", "trajopt", "swingup", "report"];
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let dir = root.join("repro").join(name);
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).map_err(err)?;
        let cfg = dir.join("config.toml");
        std::fs::write(&cfg, tiny_config(&dir.join("out"))).map_err(err)?;
        for stage in stages {
            smm(&cfg, &[stage])?;
        }
        trees.push((cfg, dir.join("out")));
    }
    let a = snapshot(&trees[0].1);
    let b = snapshot(&trees[1].1);
    let kinds = ["data", "models", "trajopt", "swingup", "report"];
    for k in kinds {
        if !a.keys().any(|p| p.starts_with(k)) {
            return Err(format!("no {k} artifacts were written"));
        }
    }
    if a.keys().ne(b.keys()) {
        return Err("the two runs wrote different file sets".into());
    }
    let differing: Vec<String> = a.iter().filter(|(p, v)| b[*p] != **v).map(|(p, _)| p.display().to_string()).collect();
    if !differing.is_empty() {
        return Err(format!("files differ between runs: {differing:?}"));
    }
    // In place: a plain rerun skips everything, a forced rerun rewrites the same bytes.
    let (cfg, out) = &trees[0];
    for stage in stages {
        smm(cfg, &[stage])?;
    }
    smm(cfg, &["all", "--force"])?;
    if snapshot(out) != a {
        return Err("rerunning in place changed artifacts".into());
    }
    Ok(format!("{} files byte-identical across fresh, repeated and forced runs", a.len()))
}

fn print_report(root: &Path) {
    let mut cfg = desk_config(root);
    cfg.swingup.systems = vec!["cartpole".into()];
    cfg.swingup.include_true = false;
    let mut r = runner(cfg);
    r.force = true;
    match r.report() {
        Ok(()) => {
            for name in ["generalization.md", "jacobians.md", "swingup.md"] {
                if let Ok(text) = std::fs::read_to_string(r.report_dir().join(name)) {
                    println!("\n{text}");
                }
            }
        }
        Err(e) => println!("report not generated: {e}"),
    }
}

fn main() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    if std::env::var_os("SMM_ACCEPTANCE_REUSE").is_none() {
        let _ = std::fs::remove_dir_all(&root);
    }
    std::fs::create_dir_all(&root).expect("create acceptance dir");
    println!("acceptance artifacts in {}", root.display());
    let mut suite = Suite { failed: 0 };
    suite.run("6", "reproducibility", || reproducibility(&root));
    suite.run("2", "swing-up with the true model", || true_swingup(&root));
    suite.run("5", "property suites", || properties(&root));
    suite.run("1", "generalization gap", || generalization(&root));
    suite.run("4", "Jacobian error at matched MSE", || jacobian_ordering(&root));
    suite.run("3", "swing-up with learned models", || learned_swingup(&root));
    print_report(&root);
    if suite.failed > 0 {
        println!("{} criteria failed", suite.failed);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
