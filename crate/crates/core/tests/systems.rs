use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smm_core::integrators::Discretization;
use smm_core::mechanics::{self, MechState};
use smm_core::systems::{SystemKind, SystemSpec};

const ALL: [SystemKind; 5] = [
    SystemKind::Pendulum,
    SystemKind::Furuta,
    SystemKind::Cartpole,
    SystemKind::Acrobot,
    SystemKind::DoubleCartpole,
];

fn random_state(spec: &SystemSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    spec.state_box.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()
}

fn min_eigenvalue_sym(m: &[f64], n: usize) -> f64 {
    // Shifted Cholesky bisection: smallest s with M - s I still PD.
    let (mut lo, mut hi) = (-1e3, 1e3);
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

#[test]
fn mass_matrix_symmetric_pd_at_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in ALL {
        let spec = SystemSpec::new(kind);
        let n = spec.n_q();
        for _ in 0..1000 {
            let x = random_state(&spec, &mut rng);
            let terms = spec.truth_terms(&x[..n], &x[n..], &[0.0]).unwrap();
            assert!(terms.asymmetry() < 1e-12, "{kind:?}");
            assert!(min_eigenvalue_sym(&terms.mass_matrix, n) > 1e-6, "{kind:?} at {x:?}");
        }
    }
}

#[test]
fn mass_jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-6;
    for kind in ALL {
        let spec = SystemSpec::new(kind);
        let n = spec.n_q();
        for _ in 0..20 {
            let x = random_state(&spec, &mut rng);
            let q = &x[..n];
            let terms = spec.truth_terms(q, &x[n..], &[0.0]).unwrap();
            for k in 0..n {
                let mut qp = q.to_vec();
                let mut qm = q.to_vec();
                qp[k] += h;
                qm[k] -= h;
                let (mp, mm) = (spec.mass_matrix(&qp), spec.mass_matrix(&qm));
                for ij in 0..n * n {
                    let fd = (mp[ij] - mm[ij]) / (2.0 * h);
                    assert!((fd - terms.mass_jacobian[ij * n + k]).abs() < 1e-7);
                }
                let fd = (spec.potential(&qp) - spec.potential(&qm)) / (2.0 * h);
                assert!((fd - terms.potential_gradient[k]).abs() < 1e-6);
            }
        }
    }
}

// Independently coded Furuta geometry: arm of length L1 turning about the
// vertical axis, pendulum hinged at the arm tip swinging in the plane normal
// to the arm.
fn furuta_lagrangian(q: &[f64], qd: &[f64]) -> f64 {
    let (m2, big_l1, l2, j1, j2, g) = (1.0, 1.0, 0.5, 1.0 / 3.0, 1.0 / 12.0, 9.81);
    let (th, al) = (q[0], q[1]);
    let (thd, ald) = (qd[0], qd[1]);
    // Pendulum centre of mass p = (L1 c_th - l2 s_al s_th, L1 s_th + l2 s_al c_th, -l2 c_al).
    let vx = -big_l1 * th.sin() * thd - l2 * (al.cos() * ald * th.sin() + al.sin() * th.cos() * thd);
    let vy = big_l1 * th.cos() * thd + l2 * (al.cos() * ald * th.cos() - al.sin() * th.sin() * thd);
    let vz = l2 * al.sin() * ald;
    // Body angular velocity and rod axis.
    let w = [ald * th.cos(), ald * th.sin(), thd];
    let d = [-al.sin() * th.sin(), al.sin() * th.cos(), -al.cos()];
    let w_axial = w[0] * d[0] + w[1] * d[1] + w[2] * d[2];
    let w_perp_sq = w.iter().map(|c| c * c).sum::<f64>() - w_axial * w_axial;
    let t = 0.5 * j1 * thd * thd + 0.5 * m2 * (vx * vx + vy * vy + vz * vz) + 0.5 * j2 * w_perp_sq;
    let z = -l2 * al.cos();
    t - m2 * g * z
}

fn euler_lagrange_accel(lag: impl Fn(&[f64], &[f64]) -> f64, q: &[f64], qd: &[f64], gen_force: &[f64]) -> Vec<f64> {
    let n = q.len();
    let h = 1e-4;
    let shift = |v: &[f64], i: usize, s: f64| {
        let mut w = v.to_vec();
        w[i] += s;
        w
    };
    // dL/dq, d2L/dqd2 and d2L/(dqd dq) by central differences.
    let dl_dq: Vec<f64> = (0..n).map(|i| (lag(&shift(q, i, h), qd) - lag(&shift(q, i, -h), qd)) / (2.0 * h)).collect();
    let dl_dqd = |q: &[f64], qd: &[f64], i: usize| (lag(q, &shift(qd, i, h)) - lag(q, &shift(qd, i, -h))) / (2.0 * h);
    let mut hess = vec![0.0; n * n];
    let mut mixed = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            hess[i * n + j] = (dl_dqd(q, &shift(qd, j, h), i) - dl_dqd(q, &shift(qd, j, -h), i)) / (2.0 * h);
            mixed[i * n + j] = (dl_dqd(&shift(q, j, h), qd, i) - dl_dqd(&shift(q, j, -h), qd, i)) / (2.0 * h);
        }
    }
    let rhs: Vec<f64> = (0..n)
        .map(|i| dl_dq[i] + gen_force[i] - (0..n).map(|j| mixed[i * n + j] * qd[j]).sum::<f64>())
        .collect();
    let l = mechanics::cholesky(&hess, n).unwrap();
    mechanics::cholesky_solve(&l, &rhs)
}

#[test]
fn furuta_matches_lagrangian_oracle() {
    let spec = SystemSpec::new(SystemKind::Furuta);
    let cases: [([f64; 2], [f64; 2], f64); 3] = [
        ([0.0, std::f64::consts::FRAC_PI_4], [1.0, 0.0], 0.1),
        ([0.7, -2.1], [-0.5, 3.0], -4.0),
        ([-2.5, 2.9], [2.0, -1.0], 7.5),
    ];
    for (q, qd, u) in cases {
        let friction = spec.friction();
        let gen: Vec<f64> = vec![u - friction[0] * qd[0], -friction[1] * qd[1]];
        let oracle = euler_lagrange_accel(furuta_lagrangian, &q, &qd, &gen);
        let got = spec.truth_accel(&q, &qd, &[u]).unwrap();
        for i in 0..2 {
            assert!((got[i] - oracle[i]).abs() < 1e-5 * (1.0 + oracle[i].abs()), "{got:?} vs {oracle:?}");
        }
    }
}

#[test]
fn unstable_equilibrium_is_fixed() {
    let disc = Discretization::rk4(0.05).with_substeps(5);
    for kind in [SystemKind::Cartpole, SystemKind::Furuta, SystemKind::Acrobot, SystemKind::DoubleCartpole] {
        let spec = SystemSpec::new(kind);
        let next = spec.step(&spec.goal, &[0.0], &disc).unwrap();
        for (a, b) in next.iter().zip(&spec.goal) {
            assert!((a - b).abs() < 1e-12, "{kind:?}: {next:?}");
        }
    }
}

#[test]
fn zero_gravity_cartpole_momentum_grows_linearly() {
    let spec = SystemSpec::new(SystemKind::Cartpole).frictionless().with_param("gravity", 0.0).unwrap();
    let disc = Discretization::rk4(0.05).with_substeps(5);
    let u = 2.5;
    let (mc, mp, lc) = (spec.param("cart_mass"), spec.param("pole_mass"), spec.param("pole_com"));
    let mut state = MechState::new(vec![0.0, 0.3], vec![0.0, 0.0]).unwrap();
    for step in 1..=10 {
        state = spec.truth_step(&state, &[u], &disc).unwrap();
        let momentum = (mc + mp) * state.qdot[0] + mp * lc * state.q[1].cos() * state.qdot[1];
        assert!((momentum - u * disc.dt * step as f64).abs() < 1e-8);
    }
}

#[test]
fn small_angle_pendulum_is_harmonic() {
    let spec = SystemSpec::new(SystemKind::Pendulum).frictionless();
    let disc = Discretization::rk4(0.01);
    let q0 = 1e-2;
    let omega = (spec.param("gravity") / spec.param("length")).sqrt();
    let inputs = vec![vec![0.0]; 100];
    let xs = spec.rollout(&[q0, 0.0], &inputs, &disc).unwrap();
    for (t, x) in xs.iter().enumerate() {
        let exact = q0 * (omega * t as f64 * disc.dt).cos();
        assert!((x[0] - exact).abs() < 1e-4 * q0);
    }
}

// Drift is measured against the energy above the resting state, which does
// not depend on the potential's additive constant.
#[test]
fn undamped_energy_is_conserved() {
    let disc = Discretization::rk4(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in ALL {
        let spec = SystemSpec::new(kind).frictionless();
        let n = spec.n_q();
        for _ in 0..5 {
            let x0: Vec<f64> = (0..2 * n).map(|i| spec.home[i] + rng.gen_range(-0.5..0.5)).collect();
            let xs = spec.rollout(&x0, &vec![vec![0.0]; 500], &disc).unwrap();
            let e0 = spec.total_energy(&x0);
            let scale = e0 - spec.total_energy(&spec.home);
            let drift = xs.iter().map(|x| (spec.total_energy(x) - e0).abs()).fold(0.0, f64::max);
            assert!(drift < 1e-5 * scale, "{kind:?}: drift {drift} from {e0}");
        }
    }
}

#[test]
fn energy_error_shrinks_at_fourth_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in ALL {
        let spec = SystemSpec::new(kind).frictionless();
        let x0 = random_state(&spec, &mut rng);
        let e0 = spec.total_energy(&x0);
        let drift = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let xs = spec.rollout(&x0, &vec![vec![0.0]; steps], &Discretization::rk4(dt)).unwrap();
            (spec.total_energy(&xs[steps]) - e0).abs()
        };
        let (coarse, fine) = (drift(0.01), drift(0.005));
        assert!(fine < coarse / 8.0 || coarse < 1e-11, "{kind:?}: {coarse} -> {fine}");
    }
}

#[test]
fn friction_dissipates_energy() {
    let disc = Discretization::rk4(0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for kind in ALL {
        let spec = SystemSpec::new(kind);
        for _ in 0..3 {
            let x0 = random_state(&spec, &mut rng);
            let xs = spec.rollout(&x0, &vec![vec![0.0]; 500], &disc).unwrap();
            let energies: Vec<f64> = xs.iter().map(|x| spec.total_energy(x)).collect();
            for w in energies.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{kind:?}: {} -> {}", w[0], w[1]);
            }
            assert!(energies[energies.len() - 1] < energies[0]);
        }
    }
}
