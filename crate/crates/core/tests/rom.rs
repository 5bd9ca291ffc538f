use std::sync::{Arc, OnceLock};

use ddrom::coupling::{CouplingMode, CouplingProblem, SubState, TransientSettings};
use ddrom::linalg::{dense_solve, dot, norm_inf, DenseMatrix};
use ddrom::rom::{
    collect_parameter, collect_snapshots, load_basis, manifest_path, orthonormality_error, pod_basis,
    projection_error, reduced_inf_sup, save_basis, BasisSizes, ControlProjection, ReducedBasis, ReducedSolver,
    ReducedState, SnapshotSet, SnapshotSettings, VelocityProjection,
};
use ddrom::solvers::{interface_load, Discretisation, NewtonSettings, Parameter, StateSolution};
use ddrom::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DT: f64 = 0.01;
const SIZES: BasisSizes = BasisSizes { u1: 5, u2: 5, p1: 2, p2: 2, g: 4 };

struct Fixture {
    disc: Arc<Discretisation>,
    snapshots: SnapshotSet,
    basis: Arc<ReducedBasis>,
    settings: SnapshotSettings,
}

fn settings(steps: usize) -> SnapshotSettings {
    SnapshotSettings {
        dt: DT,
        transient: TransientSettings { steps, ..Default::default() },
        newton: NewtonSettings::default(),
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let disc = Arc::new(Discretisation::backward_facing_step(0.5, 9.0, true).unwrap());
        let settings = settings(3);
        let training = [Parameter::new(2.0, 1.0), Parameter::new(4.0, 0.6)];
        let (snapshots, failed) = collect_snapshots(&disc, &training, &settings).unwrap();
        assert_eq!(failed, 0);
        let basis = Arc::new(ReducedBasis::build(&disc, &snapshots, SIZES, 11).unwrap());
        Fixture { disc, snapshots, basis, settings }
    })
}

#[test]
fn snapshot_bookkeeping() {
    let f = fixture();
    let s = &f.snapshots;
    assert_eq!(s.len(), 6);
    assert!(s.index_is_bijective());
    for i in 0..2 {
        assert_eq!(s.velocity[i].ncols(), 6);
        assert_eq!(s.pressure[i].ncols(), 6);
        let dir = f.disc.subdomain(i).dofmap().dirichlet_dofs();
        for c in s.velocity[i].columns() {
            assert!(dir.iter().all(|&d| c[d] == 0.0), "homogenised snapshot nonzero on a Dirichlet DoF");
        }
    }
    let single = collect_parameter(&f.disc, Parameter::new(1.0, 1.5), &settings(2), &SnapshotSet::for_discretisation(&f.disc).unwrap()).unwrap();
    assert_eq!(single.len(), 2);
    assert_eq!(single.control.ncols(), 2);
    let merged = SnapshotSet::merge(vec![s.clone(), single]).unwrap();
    assert_eq!(merged.len(), 8);
    assert!(merged.index_is_bijective());
}

#[test]
fn snapshot_columns_reproduce_stored_objective() {
    let f = fixture();
    let s = &f.snapshots;
    for (col, &(param, step)) in s.index.iter().enumerate() {
        let mu = s.parameters[param];
        let mut p = CouplingProblem::new(CouplingMode::Fff, f.disc.clone(), None, mu, DT, NewtonSettings::default()).unwrap();
        if step > 1 {
            let prev = s.column(param, step - 1).unwrap();
            let states = [0, 1].map(|i| {
                let mut st = StateSolution::zeros(f.disc.subdomain(i));
                st.u = s.velocity[i].col(prev).iter().zip(s.lifting(i)).map(|(h, l)| h + mu.u_bar * l).collect();
                SubState::Fem(st)
            });
            p.commit(states);
        }
        let x = p.coordinates(s.control.col(col)).unwrap();
        let j = p.evaluate(&x).unwrap().j;
        assert!((j - s.objective[col]).abs() <= 1e-12 + 1e-8 * s.objective[col], "column {col}: {j} vs {}", s.objective[col]);
    }
}

#[test]
fn snapshot_archive_round_trip() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.bin");
    f.snapshots.save(&path, f.disc.fingerprint()).unwrap();
    assert_eq!(SnapshotSet::load(&path, f.disc.fingerprint()).unwrap(), f.snapshots);
    assert!(matches!(SnapshotSet::load(&path, "other"), Err(Error::Fingerprint { .. })));
}

#[test]
fn lifting_matches_dirichlet_data_and_is_solenoidal() {
    let f = fixture();
    for i in 0..2 {
        let d = f.disc.subdomain(i);
        let l = &f.basis.subdomain(i).lifting;
        let data = d.unit_dirichlet();
        for (&k, &v) in data.dofs().iter().zip(data.values()) {
            assert_eq!(l[k], v);
        }
        assert!(d.divergence_norm(l) <= 1e-9);
    }
    assert!(f.basis.subdomain(1).lifting.iter().all(|&v| v == 0.0));
    assert!(f.basis.subdomain(0).lifting.iter().any(|&v| v != 0.0));
}

#[test]
fn bases_are_orthonormal_and_homogeneous() {
    let f = fixture();
    for i in 0..2 {
        let d = f.disc.subdomain(i);
        let b = f.basis.subdomain(i);
        assert_eq!(b.velocity.ncols(), SIZES.velocity(i) + b.n_supremizer);
        assert_eq!(b.n_supremizer, SIZES.pressure(i));
        assert!(orthonormality_error(&b.velocity, &d.ops().h1_inner()) <= 1e-10);
        assert!(orthonormality_error(&b.pressure, &d.ops().pressure_mass) <= 1e-10);
        let dir = d.dofmap().dirichlet_dofs();
        for c in b.velocity.columns() {
            assert!(dir.iter().all(|&k| c[k] == 0.0));
        }
    }
    assert!(orthonormality_error(&f.basis.control, f.disc.interface().mass()) <= 1e-10);
}

#[test]
fn supremizers_give_positive_reduced_inf_sup() {
    let f = fixture();
    for i in 0..2 {
        let d = f.disc.subdomain(i);
        let b = f.basis.subdomain(i);
        let enriched = reduced_inf_sup(d, &b.velocity, &b.pressure).unwrap();
        let plain = reduced_inf_sup(d, &b.velocity.leading_columns(b.n_pod), &b.pressure).unwrap();
        assert!(enriched > 1e-10, "subdomain {}: {enriched}", i + 1);
        assert!(enriched >= plain);
    }
}

#[test]
fn projection_round_trips() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mu = Parameter::new(3.0, 0.8);
    let ctrl = ControlProjection::new(&f.basis.control, f.disc.interface().mass());
    let c: Vec<f64> = (0..SIZES.g).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let back = ctrl.pi_x(&ctrl.pi_x_t(&c).unwrap()).unwrap();
    assert!(back.iter().zip(&c).all(|(a, b)| (a - b).abs() <= 1e-10));
    assert!(matches!(ctrl.pi_x(&[1.0]), Err(Error::Dimension(_))));
    for i in 0..2 {
        let x = f.disc.subdomain(i).ops().h1_inner();
        let b = f.basis.subdomain(i);
        let p = VelocityProjection::new(b, &x);
        let a: Vec<f64> = (0..b.velocity.ncols()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u0 = p.pi0_t(&a).unwrap();
        // Π₀ᵀ a lies in the span of the modes, so projecting it back is exact
        let r = p.pi0(&u0).unwrap();
        assert!(r.iter().zip(&a).all(|(x, y)| (x - y).abs() <= 1e-10));
        let u = p.pi_t(mu, &a).unwrap();
        let r = p.pi(mu, &u).unwrap();
        assert!(r.iter().zip(&a).all(|(x, y)| (x - y).abs() <= 1e-10));
        // the lifting alone has zero homogeneous coefficients
        let l: Vec<f64> = b.lifting.iter().map(|v| mu.u_bar * v).collect();
        assert!(norm_inf(&p.pi(mu, &l).unwrap()) <= 1e-12);
        assert!(matches!(p.pi0_t(&[0.0]), Err(Error::Dimension(_))));
    }
}

#[test]
fn reduced_stokes_equals_galerkin_projection() {
    let f = fixture();
    let space = f.disc.interface();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mu = Parameter::new(2.5, 0.7);
    let g: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for i in 0..2 {
        let d = f.disc.subdomain(i);
        let b = f.basis.subdomain(i);
        let ops = d.ops();
        let sign = Discretisation::sign(i);
        let solver = ReducedSolver::new(&b.reduced, mu.nu, None, false);
        let load: Vec<f64> = b.reduced.load.matvec(&g).iter().map(|v| sign * v).collect();
        let prev = ReducedState::zeros(&b.reduced);
        let st = solver.solve(mu.u_bar, &prev, &load, None).unwrap();
        let r = solver.residual(&st.extended(), &st.p, &prev.extended(), &load);
        assert!(norm_inf(&r) <= 1e-9);

        // oracle assembled straight from the full-order matrices
        let z = &b.velocity;
        let zp = &b.pressure;
        let (nz, np) = (z.ncols(), zp.ncols());
        let kz: Vec<Vec<f64>> = z.columns().map(|c| ops.laplace.matvec(c)).collect();
        let bz: Vec<Vec<f64>> = z.columns().map(|c| ops.divergence.matvec(c)).collect();
        let lift: Vec<f64> = b.lifting.iter().map(|v| mu.u_bar * v).collect();
        let kl = ops.laplace.matvec(&lift);
        let bl = ops.divergence.matvec(&lift);
        let fem_load = interface_load(d, space, sign, &g).unwrap();
        let a = DenseMatrix::from_fn(nz + np, nz + np, |r, c| match (r < nz, c < nz) {
            (true, true) => mu.nu * dot(z.col(r), &kz[c]),
            (true, false) => dot(zp.col(c - nz), &bz[r]),
            (false, true) => dot(zp.col(r - nz), &bz[c]),
            (false, false) => 0.0,
        });
        let mut rhs: Vec<f64> = (0..nz).map(|k| dot(z.col(k), &fem_load) - mu.nu * dot(z.col(k), &kl)).collect();
        rhs.extend((0..np).map(|q| -dot(zp.col(q), &bl)));
        let oracle = dense_solve(&a, &rhs).unwrap();
        let mine: Vec<f64> = st.a.iter().chain(&st.p).copied().collect();
        let scale = norm_inf(&oracle).max(1.0);
        let err = mine.iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9 * scale, "subdomain {}: {err}", i + 1);
        assert!(norm_inf(&b.reduced.divergence.matvec(&st.extended())) <= 1e-9);
    }
}

#[test]
fn zero_data_and_equal_traces_give_zero_reduced_solutions() {
    let f = fixture();
    for i in 0..2 {
        let ops = &f.basis.subdomain(i).reduced;
        let solver = ReducedSolver::new(ops, 1.0, Some(DT), true);
        let zero = ReducedState::zeros(ops);
        let st = solver.solve(0.0, &zero, &vec![0.0; ops.nz], None).unwrap();
        assert!(st.a.iter().chain(&st.p).all(|&v| v == 0.0));
        let adj = solver.adjoint(&st, &vec![0.0; ops.nz]).unwrap();
        assert!(adj.xi.iter().chain(&adj.lambda).all(|&v| v == 0.0));
    }
}

#[test]
fn basis_file_round_trip_and_integrity() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.bin");
    save_basis(&f.basis, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let loaded = load_basis(&path, f.disc.fingerprint()).unwrap();
    assert_eq!(&loaded, f.basis.as_ref());
    save_basis(&loaded, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);

    let manifest = std::fs::read_to_string(manifest_path(&path)).unwrap();
    for field in ["field u1", "field u2", "field p1", "field p2", "field g", "supremizers=2", "seed 11"] {
        assert!(manifest.contains(field), "manifest lacks {field}");
    }

    // bit-identical reduced solve from the reloaded operators
    let mu = Parameter::new(3.0, 0.9);
    let solve = |b: &ReducedBasis| {
        let ops = &b.subdomain(0).reduced;
        let load: Vec<f64> = ops.load.matvec(&vec![0.3; f.disc.interface().dim()]);
        ReducedSolver::new(ops, mu.nu, Some(DT), true).solve(mu.u_bar, &ReducedState::zeros(ops), &load, None).unwrap()
    };
    assert_eq!(solve(&loaded), solve(&f.basis));

    assert!(matches!(load_basis(&path, "another-mesh"), Err(Error::Fingerprint { .. })));
    // header tampering: change one fingerprint byte
    let mut bad = first.clone();
    bad[20] ^= 0x01;
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(load_basis(&path, f.disc.fingerprint()), Err(Error::Fingerprint { .. })));
    // payload tampering
    let mut bad = first.clone();
    let last = bad.len() - 3;
    bad[last] ^= 0x40;
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(load_basis(&path, f.disc.fingerprint()), Err(Error::Format(_))));
    assert!(matches!(load_basis(&dir.path().join("none.bin"), "x"), Err(Error::MissingArtifact(_))));
}

#[test]
fn reproduction_error_decreases_with_mode_count() {
    let f = fixture();
    let d = f.disc.subdomain(0);
    let x = d.ops().h1_inner();
    let s = &f.snapshots.velocity[0];
    let mut prev = f64::INFINITY;
    for n in [1, 3, 5] {
        let z = pod_basis(s, n, &x).unwrap().modes;
        let err: f64 = s.columns().map(|c| projection_error(&z, &x, c).powi(2)).sum::<f64>().sqrt();
        assert!(err <= prev * (1.0 + 1e-12), "N = {n}: {err} > {prev}");
        prev = err;
    }
    assert!(matches!(pod_basis(s, 7, &x), Err(Error::RankDeficient { .. })));
}

#[test]
fn reduced_run_reproduces_training_trajectory() {
    let f = fixture();
    let s = &f.snapshots;
    let mu = s.parameters[0];
    let mut p = CouplingProblem::new(CouplingMode::Rrr, f.disc.clone(), Some(f.basis.clone()), mu, DT, NewtonSettings::default()).unwrap();
    for step in 1..=f.settings.transient.steps {
        let col = s.column(0, step).unwrap();
        let x = p.coordinates(s.control.col(col)).unwrap();
        let e = p.evaluate(&x).unwrap();
        let lifted = p.lift(&e.states);
        for i in 0..2 {
            let d = f.disc.subdomain(i);
            let fem: Vec<f64> = s.velocity[i].col(col).iter().zip(s.lifting(i)).map(|(h, l)| h + mu.u_bar * l).collect();
            let diff: Vec<f64> = lifted.u[i].iter().zip(&fem).map(|(a, b)| a - b).collect();
            let rel = d.velocity_l2(&diff) / d.velocity_l2(&fem);
            eprintln!("step {step} subdomain {}: reproduction error {rel:.3e}", i + 1);
            assert!(rel.is_finite() && rel < 0.1);
        }
        p.commit(e.states);
    }
}
