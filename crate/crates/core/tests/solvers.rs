use std::sync::Arc;

use ddrom::fem::{channel_inlet, DirichletData};
use ddrom::linalg::{dot, norm2, norm_inf};
use ddrom::mesh::{generate_rect_mesh, DofMap};
use ddrom::solvers::{
    compute_functional, compute_gradient, monolithic_flux, monolithic_step, subdomain_adjoint, subdomain_state_step,
    Discretisation, FlowDomain, NewtonSettings, Parameter, StateSolution, StateSolver,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DT: f64 = 0.01;

fn rel_l2(domain: &FlowDomain, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    domain.velocity_l2(&d) / domain.velocity_l2(b)
}

fn channel(lx: f64, ly: f64, h: f64) -> Arc<FlowDomain> {
    let mesh = generate_rect_mesh(lx, ly, h).unwrap();
    let dofs = DofMap::new(&mesh);
    Arc::new(FlowDomain::new(mesh, dofs, channel_inlet(1.0, ly), None).unwrap())
}

fn poiseuille_error(domain: &FlowDomain, s: &StateSolution, ly: f64) -> f64 {
    domain
        .dofmap()
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let ux = 4.0 * p[1] * (ly - p[1]) / (ly * ly);
            (s.u[2 * k] - ux).abs().max(s.u[2 * k + 1].abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn steady_poiseuille_is_reproduced_at_every_node() {
    let domain = channel(4.0, 1.0, 0.25);
    let mut solver = StateSolver::new(domain.clone(), 0.5, None, true, NewtonSettings::default()).unwrap();
    let s = solver.solve(None, None, &domain.dirichlet(Parameter::new(1.0, 0.5)), None).unwrap();
    assert!(poiseuille_error(&domain, &s, 1.0) <= 1e-8);
    assert!(s.divergence <= 1e-9);
    // pressure is linear, vanishing at the do-nothing outlet: p = 8ν(Lx − x)/Ly²
    let h = domain.mesh().h();
    for (k, key) in domain.dofmap().pressure_keys().iter().enumerate() {
        let x = key[0] as f64 * 0.5 * h;
        assert!((s.p[k] - 8.0 * 0.5 * (4.0 - x)).abs() <= 1e-8);
    }
}

#[test]
fn transient_channel_relaxes_to_poiseuille() {
    let domain = channel(2.0, 1.0, 0.25);
    let mu = Parameter::new(1.0, 1.0);
    let mut solver = StateSolver::new(domain.clone(), mu.nu, Some(0.5), true, NewtonSettings::default()).unwrap();
    let mut s = StateSolution::zeros(&domain);
    for _ in 0..30 {
        s = monolithic_step(&mut solver, &s.u.clone(), mu, Some(&s.stacked())).unwrap();
        assert!(s.divergence <= 1e-9);
    }
    assert!(poiseuille_error(&domain, &s, 1.0) <= 1e-8);
}

#[test]
fn zero_data_gives_zero_solution() {
    let disc = Discretisation::backward_facing_step(0.5, 9.0, true).unwrap();
    let mono = disc.monolithic().clone();
    let mu = Parameter::new(0.0, 0.4);
    let mut solver = StateSolver::new(mono.clone(), mu.nu, Some(DT), true, NewtonSettings::default()).unwrap();
    let s = monolithic_step(&mut solver, &vec![0.0; mono.num_velocity()], mu, None).unwrap();
    assert!(norm_inf(&s.u) == 0.0 && norm_inf(&s.p) == 0.0);
    let d1 = disc.subdomain(0).clone();
    let mut s1 = StateSolver::new(d1.clone(), mu.nu, Some(DT), true, NewtonSettings::default()).unwrap();
    let g = vec![0.0; disc.interface().dim()];
    let r = subdomain_state_step(&mut s1, 0, disc.interface(), &g, &vec![0.0; d1.num_velocity()], mu, None).unwrap();
    assert_eq!(norm_inf(&r.u), 0.0);
}

#[test]
fn constant_state_with_large_viscosity() {
    // u = (1, 0) on the whole boundary: the interior follows after one step
    let mesh = generate_rect_mesh(2.0, 1.0, 0.25).unwrap();
    let dofs = DofMap::new(&mesh);
    let mut constrained: Vec<usize> = (0..dofs.num_nodes())
        .filter(|&n| {
            let p = dofs.nodes()[n];
            p[0] == 0.0 || p[0] == 2.0 || p[1] == 0.0 || p[1] == 1.0
        })
        .flat_map(|n| [2 * n, 2 * n + 1])
        .collect();
    constrained.sort_unstable();
    let values = constrained.iter().map(|&d| if d % 2 == 0 { 1.0 } else { 0.0 }).collect();
    let data = DirichletData::new(constrained.clone(), values).unwrap();
    let domain = Arc::new(FlowDomain::new(mesh, dofs, |_| [0.0, 0.0], None).unwrap());
    // enclosed flow: fix the pressure level with the symmetric-elimination helper
    let ops = domain.ops();
    let nu = domain.num_velocity();
    let n = domain.num_state();
    let mut trip = Vec::new();
    for r in 0..nu {
        for (c, v) in ops.mass.row(r) {
            trip.push((r, c, v / 0.1));
        }
        for (c, v) in ops.laplace.row(r) {
            trip.push((r, c, 1e3 * v));
        }
    }
    for q in 0..domain.num_pressure() {
        for (c, v) in ops.divergence.row(q) {
            trip.push((nu + q, c, v));
            trip.push((c, nu + q, v));
        }
    }
    let a = ddrom::linalg::SparseMatrix::from_triplets(n, n, &trip);
    let mut rhs = vec![0.0; n];
    let mut all = constrained;
    all.push(nu);
    let mut vals: Vec<f64> = all.iter().map(|&d| if d < nu && d % 2 == 0 { 1.0 } else { 0.0 }).collect();
    vals[all.len() - 1] = 0.0;
    let data2 = DirichletData::new(all, vals).unwrap();
    let a2 = ddrom::fem::apply_dirichlet(&a, &mut rhs, &data2).unwrap();
    let x = ddrom::linalg::lu_solve(&a2, &rhs).unwrap();
    for k in 0..domain.dofmap().num_nodes() {
        assert!((x[2 * k] - 1.0).abs() < 1e-3 && x[2 * k + 1].abs() < 1e-3);
    }
    for (&d, &v) in data.dofs().iter().zip(data.values()) {
        assert_eq!(x[d], v);
    }
}

#[test]
fn stokes_response_is_affine_in_the_control() {
    let disc = Discretisation::backward_facing_step(0.5, 9.0, true).unwrap();
    let mu = Parameter::new(1.5, 0.8);
    let d1 = disc.subdomain(0).clone();
    let mut s = StateSolver::new(d1.clone(), mu.nu, Some(DT), false, NewtonSettings::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ng = disc.interface().dim();
    let g1: Vec<f64> = (0..ng).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g2: Vec<f64> = (0..ng).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g12: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
    let prev = vec![0.0; d1.num_velocity()];
    let mut run = |g: &[f64]| subdomain_state_step(&mut s, 0, disc.interface(), g, &prev, mu, None).unwrap().u;
    let u0 = run(&vec![0.0; ng]);
    let (u1, u2, u12) = (run(&g1), run(&g2), run(&g12));
    let lhs: Vec<f64> = u12.iter().zip(&u0).map(|(a, b)| a - b).collect();
    let rhs: Vec<f64> = (0..lhs.len()).map(|k| u1[k] - u0[k] + u2[k] - u0[k]).collect();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    assert!(norm_inf(&diff) <= 1e-10, "{}", norm_inf(&diff));
}

struct Run {
    disc: Discretisation,
    mu: Parameter,
    mono: Vec<StateSolution>,
}

fn monolithic_run(mu: Parameter, steps: usize) -> Run {
    let disc = Discretisation::backward_facing_step(0.5, 9.0, true).unwrap();
    let m = disc.monolithic().clone();
    let mut solver = StateSolver::new(m.clone(), mu.nu, Some(DT), true, NewtonSettings::default()).unwrap();
    let mut states = vec![StateSolution::zeros(&m)];
    for n in 0..steps {
        let prev = states[n].clone();
        let s = monolithic_step(&mut solver, &prev.u, mu, Some(&prev.stacked())).unwrap();
        assert!(s.divergence <= 1e-9);
        states.push(s);
    }
    Run { disc, mu, mono: states }
}

#[test]
fn monolithic_flux_reproduces_the_monolithic_solution() {
    let run = monolithic_run(Parameter::new(4.5, 0.4), 3);
    let disc = &run.disc;
    let space = disc.interface();
    let solvers: Vec<StateSolver> = (0..2)
        .map(|i| StateSolver::new(disc.subdomain(i).clone(), run.mu.nu, Some(DT), true, NewtonSettings::default()).unwrap())
        .collect();
    let mut solvers = solvers;
    for n in 1..=3 {
        let g = monolithic_flux(&solvers[0], space, disc.restriction(0), &run.mono[n], &run.mono[n - 1].u).unwrap();
        let mut traces = vec![];
        let mut sols = vec![];
        for i in 0..2 {
            let r = disc.restriction(i);
            let prev = r.velocity(&run.mono[n - 1].u);
            let s = subdomain_state_step(&mut solvers[i], i, space, &g, &prev, run.mu, None).unwrap();
            let d = disc.subdomain(i);
            let exact_u = r.velocity(&run.mono[n].u);
            let exact_p = r.pressure(&run.mono[n].p);
            assert!(rel_l2(d, &s.u, &exact_u) <= 1e-8, "u{i}: {}", rel_l2(d, &s.u, &exact_u));
            let dp: Vec<f64> = s.p.iter().zip(&exact_p).map(|(a, b)| a - b).collect();
            assert!(d.pressure_l2(&dp) <= 1e-8 * d.pressure_l2(&exact_p));
            assert!(s.divergence <= 1e-9);
            traces.push(d.trace().unwrap().extract(&s.u));
            sols.push(s);
        }
        let j = compute_functional(space, &traces[0], &traces[1]);
        assert!(j <= 1e-12, "J = {j}");
        let delta: Vec<f64> = traces[0].iter().zip(&traces[1]).map(|(a, b)| a - b).collect();
        let xi: Vec<_> = (0..2)
            .map(|i| {
                let a = subdomain_adjoint(&mut solvers[i], i, space, &sols[i].u, &delta).unwrap();
                disc.subdomain(i).trace().unwrap().extract(&a.xi)
            })
            .collect();
        let grad = compute_gradient(space, &xi[0], &xi[1]);
        assert!(space.norm(&grad.riesz) <= 1e-7);
    }
}

fn fd_check(mu: Parameter, convective: bool, steps: usize, seed: u64) {
    let run = monolithic_run(mu, steps);
    let disc = &run.disc;
    let space = disc.interface();
    let mut solvers: Vec<StateSolver> = (0..2)
        .map(|i| StateSolver::new(disc.subdomain(i).clone(), mu.nu, Some(DT), convective, NewtonSettings::default()).unwrap())
        .collect();
    let n = steps;
    let prevs: Vec<Vec<f64>> = (0..2).map(|i| disc.restriction(i).velocity(&run.mono[n - 1].u)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g_exact = monolithic_flux(&solvers[0], space, disc.restriction(0), &run.mono[n], &run.mono[n - 1].u).unwrap();
    // perturbed control so that the mismatch is not zero
    let g: Vec<f64> = g_exact.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
    let mut eval = |g: &[f64], grad: bool| {
        let mut traces = vec![];
        let mut sols = vec![];
        for i in 0..2 {
            let s = subdomain_state_step(&mut solvers[i], i, space, g, &prevs[i], mu, None).unwrap();
            assert!(s.divergence <= 1e-9);
            traces.push(disc.subdomain(i).trace().unwrap().extract(&s.u));
            sols.push(s);
        }
        let j = compute_functional(space, &traces[0], &traces[1]);
        if !grad {
            return (j, None);
        }
        let delta: Vec<f64> = traces[0].iter().zip(&traces[1]).map(|(a, b)| a - b).collect();
        let mut xi = vec![];
        for i in 0..2 {
            let a = subdomain_adjoint(&mut solvers[i], i, space, &sols[i].u, &delta).unwrap();
            assert!(a.divergence <= 1e-9);
            xi.push(disc.subdomain(i).trace().unwrap().extract(&a.xi));
        }
        (j, Some(compute_gradient(space, &xi[0], &xi[1])))
    };
    let (j0, grad) = eval(&g, true);
    let grad = grad.unwrap();
    assert!(j0 > 0.0);
    for _ in 0..2 {
        let dir: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps = 1e-6 * norm2(&g) + 1e-8;
        let gp: Vec<f64> = g.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let gm: Vec<f64> = g.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
        let fd = (eval(&gp, false).0 - eval(&gm, false).0) / (2.0 * eps);
        let ad = dot(&grad.raw, &dir);
        let rel = (ad - fd).abs() / fd.abs();
        assert!(rel <= 1e-5, "adjoint {ad} vs fd {fd}: rel {rel}");
    }
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    fd_check(Parameter::new(4.5, 0.4), true, 2, 1);
    fd_check(Parameter::new(1.2, 1.5), true, 3, 2);
}

#[test]
fn stokes_adjoint_gradient_matches_finite_differences() {
    fd_check(Parameter::new(2.0, 1.0), false, 1, 3);
}

#[test]
fn equal_states_give_zero_adjoint() {
    let disc = Discretisation::backward_facing_step(0.5, 9.0, true).unwrap();
    let d = disc.subdomain(1).clone();
    let mut s = StateSolver::new(d.clone(), 0.4, Some(DT), true, NewtonSettings::default()).unwrap();
    let u: Vec<f64> = (0..d.num_velocity()).map(|k| (k as f64 * 0.1).sin()).collect();
    let a = subdomain_adjoint(&mut s, 1, disc.interface(), &u, &vec![0.0; disc.interface().dim()]).unwrap();
    assert_eq!(norm_inf(&a.xi), 0.0);
    assert_eq!(norm_inf(&a.lambda), 0.0);
}

#[test]
fn monolithic_step_runs_to_final_time() {
    let run = monolithic_run(Parameter::new(4.5, 0.4), 100);
    assert_eq!(run.mono.len(), 101);
    assert!(run.mono.iter().all(|s| s.u.iter().all(|v| v.is_finite())));
}
