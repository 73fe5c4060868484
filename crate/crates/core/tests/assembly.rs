use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use phasefrac::assembly::{apply_dirichlet_reduction, Assembler, AssemblyError, Mode, State};
use phasefrac::linsolve::ldlt_factorize;
use phasefrac::mesh::Component;
use phasefrac::{MaterialParams, Mesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(nx: usize, ny: usize, lx: f64, ly: f64, thickness: f64) -> Mesh {
    let mut nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut sets = BTreeMap::new();
    sets.insert("left".to_string(), (0..=ny).map(|j| id(0, j)).collect());
    sets.insert("right".to_string(), (0..=ny).map(|j| id(nx, j)).collect());
    sets.insert("bottom".to_string(), (0..=nx).map(|i| id(i, 0)).collect());
    sets.insert("top".to_string(), (0..=nx).map(|i| id(i, ny)).collect());
    Mesh { nodes, elements, boundary_sets: sets, thickness }
}

/// 3x3 patch with jittered interior nodes.
fn patch(rng: &mut ChaCha8Rng) -> Mesh {
    let mut m = grid(3, 3, 1.0, 1.0, 0.7);
    for j in 1..3 {
        for i in 1..3 {
            let a = j * 4 + i;
            m.nodes[a][0] += rng.gen_range(-0.08..0.08);
            m.nodes[a][1] += rng.gen_range(-0.08..0.08);
        }
    }
    m
}

fn steel() -> MaterialParams {
    MaterialParams::new(210.0, 0.3, 2.7, 0.4, 0.01).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> State {
    let mut st = State::zeros(n);
    for v in st.u.iter_mut() {
        *v = rng.gen_range(-0.05..0.05);
    }
    for a in 0..n {
        st.d[a] = rng.gen_range(0.0..0.9);
        st.d_prev[a] = rng.gen_range(0.0..0.9);
    }
    st
}

fn dense_general(asm: &Assembler, st: &State, mode: Mode) -> DMatrix<f64> {
    let (_, j) = asm.residual_and_general_jacobian(st, mode).unwrap();
    let d = j.to_dense();
    let n = asm.n_dofs();
    DMatrix::from_fn(n, n, |r, c| d[r][c])
}

fn fd_jacobian(asm: &Assembler, st: &State, mode: Mode, h: f64) -> DMatrix<f64> {
    let n = asm.n_dofs();
    let x0 = st.stacked();
    let mut out = DMatrix::zeros(n, n);
    let mut s = st.clone();
    for c in 0..n {
        let mut x = x0.clone();
        x[c] += h;
        s.set_stacked(&x);
        let rp = asm.assemble_residual(&s, mode).unwrap();
        x[c] -= 2.0 * h;
        s.set_stacked(&x);
        let rm = asm.assemble_residual(&s, mode).unwrap();
        for r in 0..n {
            out[(r, c)] = (rp[r] - rm[r]) / (2.0 * h);
        }
    }
    out
}

fn rel_max(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

#[test]
fn zero_state_residual_is_surface_term() {
    let mat = steel();
    let h = 0.25;
    let t = 2.0;
    let mesh = grid(4, 4, 1.0, 1.0, t);
    let asm = Assembler::new(&mesh, mat).unwrap();
    let st = State::zeros(mesh.n_nodes());
    let r = asm.assemble_residual(&st, Mode::Full).unwrap();
    let m = mesh.n_nodes();
    assert!(r[..2 * m].iter().all(|v| *v == 0.0));
    let c = 3.0 * mat.gc / (8.0 * mat.length);
    for j in 0..=4 {
        for i in 0..=4 {
            // integral of a bilinear hat: h^2 inside, halved per boundary side
            let mut area = h * h;
            if i == 0 || i == 4 {
                area *= 0.5;
            }
            if j == 0 || j == 4 {
                area *= 0.5;
            }
            let expected = c * area * t;
            let got = r[2 * m + j * 5 + i];
            assert!((got - expected).abs() < 1e-12 * expected, "node ({i},{j}): {got} vs {expected}");
        }
    }
}

/// Plain bilinear elasticity with engineering shear strain.
fn elastic_stiffness(coords: &[[f64; 2]; 4], lambda: f64, mu: f64, t: f64) -> DMatrix<f64> {
    let g = 1.0 / 3f64.sqrt();
    let c = DMatrix::from_row_slice(3, 3, &[lambda + 2.0 * mu, lambda, 0.0, lambda, lambda + 2.0 * mu, 0.0, 0.0, 0.0, mu]);
    let mut k = DMatrix::<f64>::zeros(8, 8);
    let xi_n = [-1.0, 1.0, 1.0, -1.0];
    let eta_n = [-1.0, -1.0, 1.0, 1.0];
    for (xi, eta) in [(-g, -g), (g, -g), (g, g), (-g, g)] {
        let mut dn = [[0.0; 2]; 4];
        for a in 0..4 {
            dn[a][0] = 0.25 * xi_n[a] * (1.0 + eta_n[a] * eta);
            dn[a][1] = 0.25 * eta_n[a] * (1.0 + xi_n[a] * xi);
        }
        let mut jac = DMatrix::<f64>::zeros(2, 2);
        for a in 0..4 {
            for r in 0..2 {
                for s in 0..2 {
                    jac[(r, s)] += coords[a][r] * dn[a][s];
                }
            }
        }
        let det = jac.determinant();
        let jinv = jac.clone().try_inverse().unwrap();
        let mut b = DMatrix::<f64>::zeros(3, 8);
        for a in 0..4 {
            let gx = dn[a][0] * jinv[(0, 0)] + dn[a][1] * jinv[(1, 0)];
            let gy = dn[a][0] * jinv[(0, 1)] + dn[a][1] * jinv[(1, 1)];
            b[(0, 2 * a)] = gx;
            b[(1, 2 * a + 1)] = gy;
            b[(2, 2 * a)] = gy;
            b[(2, 2 * a + 1)] = gx;
        }
        k += b.transpose() * &c * &b * (det * t);
    }
    k
}

/// `K u` of the single element mapped back to global displacement order.
fn local_force(mesh: &Mesh, k: &DMatrix<f64>, u: &[f64]) -> DVector<f64> {
    let conn = mesh.elements[0];
    let ul = DVector::from_fn(8, |i, _| u[2 * conn[i / 2] + i % 2]);
    let fl = k * ul;
    let mut f = DVector::zeros(8);
    for i in 0..8 {
        f[2 * conn[i / 2] + i % 2] = fl[i];
    }
    f
}

#[test]
fn undamaged_residual_matches_plain_elasticity() {
    let mat = steel();
    let mut mesh = grid(1, 1, 1.0, 1.0, 1.3);
    mesh.nodes[3] = [1.2, 0.9];
    let asm = Assembler::new(&mesh, mat).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let mut st = State::zeros(4);
        for v in st.u.iter_mut() {
            *v = rng.gen_range(-0.01..0.01);
        }
        let r = asm.assemble_residual(&st, Mode::Full).unwrap();
        let k = elastic_stiffness(&mesh.element_coords(0), mat.lambda, mat.mu, mesh.thickness);
        let f = local_force(&mesh, &k, &st.u);
        for i in 0..8 {
            assert!((r[i] - f[i]).abs() < 1e-10 * f.amax(), "dof {i}: {} vs {}", r[i], f[i]);
        }
    }
}

#[test]
fn uniaxial_stretch_single_element() {
    let mat = steel();
    let mesh = grid(1, 1, 1.0, 1.0, 1.0);
    let asm = Assembler::new(&mesh, mat).unwrap();
    let mut st = State::zeros(4);
    let eps = 1e-3;
    for a in 0..4 {
        st.u[2 * a] = eps * mesh.nodes[a][0];
    }
    let r = asm.assemble_residual(&st, Mode::Full).unwrap();
    let k = elastic_stiffness(&mesh.element_coords(0), mat.lambda, mat.mu, 1.0);
    let f = local_force(&mesh, &k, &st.u);
    for i in 0..8 {
        assert!((r[i] - f[i]).abs() < 1e-12 * f.amax());
    }
}

#[test]
fn penalty_sign() {
    let mat = steel();
    let mesh = grid(2, 2, 1.0, 1.0, 1.0);
    let asm = Assembler::new(&mesh, mat).unwrap();
    let m = mesh.n_nodes();
    let delta = 0.01;
    let base = State::zeros(m);
    let mut pen = State::zeros(m);
    pen.d_prev = vec![delta; m];
    let r0 = asm.assemble_residual(&base, Mode::Full).unwrap();
    let r1 = asm.assemble_residual(&pen, Mode::Full).unwrap();
    // surface term alone is (3Gc/8l) * int(phi), which isolates int(phi)
    let c = 3.0 * mat.gc / (8.0 * mat.length);
    for a in 0..m {
        let int_phi = r0[2 * m + a] / c;
        let expected = -mat.gamma * delta * int_phi;
        let got = r1[2 * m + a] - r0[2 * m + a];
        assert!(got < 0.0);
        assert!((got - expected).abs() < 1e-9 * expected.abs());
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let mesh = patch(&mut rng);
        let asm = Assembler::new(&mesh, steel()).unwrap();
        let st = random_state(&mut rng, mesh.n_nodes());
        let j = dense_general(&asm, &st, Mode::Full);
        let fd = fd_jacobian(&asm, &st, Mode::Full, 1e-7);
        assert!(rel_max(&j, &fd) < 1e-6, "full: {}", rel_max(&j, &fd));

        let dt: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.gen_range(0.0..0.9)).collect();
        let mode = Mode::QuasiMonolithic(&dt);
        let j = dense_general(&asm, &st, mode);
        let fd = fd_jacobian(&asm, &st, mode, 1e-7);
        assert!(rel_max(&j, &fd) < 1e-6, "quasi-monolithic: {}", rel_max(&j, &fd));
    }
}

#[test]
fn symmetric_storage_agrees_with_general() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh = patch(&mut rng);
    let asm = Assembler::new(&mesh, steel()).unwrap();
    let st = random_state(&mut rng, mesh.n_nodes());
    let g = dense_general(&asm, &st, Mode::Full);
    let (r1, s) = asm.residual_and_jacobian(&st).unwrap();
    let (r2, _) = asm.residual_and_general_jacobian(&st, Mode::Full).unwrap();
    assert_eq!(r1, r2);
    let sd = s.to_dense();
    let n = asm.n_dofs();
    let scale = g.amax();
    for r in 0..n {
        for c in 0..n {
            assert!((g[(r, c)] - g[(c, r)]).abs() <= 1e-12 * scale);
            assert!((sd[r][c] - g[(r, c)]).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn quasi_monolithic_coupling_block_vanishes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mesh = patch(&mut rng);
    let asm = Assembler::new(&mesh, steel()).unwrap();
    let st = random_state(&mut rng, mesh.n_nodes());
    let m = mesh.n_nodes();
    let dt: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..0.9)).collect();
    let j = dense_general(&asm, &st, Mode::QuasiMonolithic(&dt));
    let mut du_nonzero = false;
    for r in 0..2 * m {
        for c in 2 * m..3 * m {
            assert_eq!(j[(r, c)], 0.0);
            du_nonzero |= j[(c, r)] != 0.0;
        }
    }
    assert!(du_nonzero);
}

#[test]
fn energy_gradient_is_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..4 {
        let mesh = patch(&mut rng);
        let asm = Assembler::new(&mesh, steel()).unwrap();
        let st = random_state(&mut rng, mesh.n_nodes());
        let r = asm.assemble_residual(&st, Mode::Full).unwrap();
        let x0 = st.stacked();
        let mut s = st.clone();
        let h = 1e-7;
        let mut err: f64 = 0.0;
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for c in 0..x0.len() {
            let mut x = x0.clone();
            x[c] += h;
            s.set_stacked(&x);
            let ep = asm.total_energy(&s).unwrap();
            x[c] -= 2.0 * h;
            s.set_stacked(&x);
            let em = asm.total_energy(&s).unwrap();
            err = err.max(((ep - em) / (2.0 * h) - r[c]).abs());
        }
        assert!(err / scale < 1e-6, "relative gradient error {}", err / scale);
    }
}

#[test]
fn zero_state_energy_is_zero() {
    let mesh = grid(3, 2, 2.0, 1.0, 1.0);
    let asm = Assembler::new(&mesh, steel()).unwrap();
    assert_eq!(asm.total_energy(&State::zeros(mesh.n_nodes())).unwrap(), 0.0);
}

#[test]
fn uniform_damage_energy() {
    let mat = steel();
    let t = 0.5;
    let mesh = grid(5, 4, 1.0, 1.0, t);
    let asm = Assembler::new(&mesh, mat).unwrap();
    let mut st = State::zeros(mesh.n_nodes());
    let d0 = 0.3;
    st.d = vec![d0; mesh.n_nodes()];
    st.d_prev = st.d.clone();
    let expected = 3.0 * mat.gc / 8.0 * d0 / mat.length * t;
    let e = asm.total_energy(&st).unwrap();
    assert!((e - expected).abs() < 1e-12 * expected);
}

#[test]
fn reaction_under_uniform_stretch() {
    let mat = steel();
    let (lx, ly, t) = (2.0, 1.5, 0.8);
    let mesh = grid(4, 3, lx, ly, t);
    let asm = Assembler::new(&mesh, mat).unwrap();
    let mut st = State::zeros(mesh.n_nodes());
    let eps = 2e-3;
    for (a, p) in mesh.nodes.iter().enumerate() {
        st.u[2 * a] = eps * p[0];
    }
    // plane strain with eps_yy = 0: sigma_xx = (lambda + 2 mu) eps
    let traction = (mat.lambda + 2.0 * mat.mu) * eps;
    let expected = traction * ly * t;
    let right = asm.reaction_on_set(&st, "right", Component::X).unwrap();
    let left = asm.reaction_on_set(&st, "left", Component::X).unwrap();
    assert!((right - expected).abs() < 1e-10 * expected);
    assert!((left + expected).abs() < 1e-10 * expected);
    // sigma_yy = lambda eps on the top edge
    let top = asm.reaction_on_set(&st, "top", Component::Y).unwrap();
    assert!((top - mat.lambda * eps * lx * t).abs() < 1e-10 * expected);

    let r = asm.assemble_residual(&st, Mode::Full).unwrap();
    let all: Vec<usize> = (0..mesh.n_nodes()).collect();
    for comp in [Component::X, Component::Y] {
        let sum = phasefrac::assembly::reaction_from_residual(&r, &all, comp);
        assert!(sum.abs() < 1e-8 * expected);
    }
    assert!(matches!(asm.reaction_on_set(&st, "nope", Component::X), Err(AssemblyError::Mesh(_))));
    assert_eq!(asm.reaction_on_set(&State::zeros(mesh.n_nodes()), "right", Component::X).unwrap(), 0.0);
}

#[test]
fn reduction_matches_dense_elimination() {
    let mesh = grid(1, 1, 1.0, 1.0, 1.0);
    let asm = Assembler::new(&mesh, steel()).unwrap();
    let st = State::zeros(4);
    let (_, k) = asm.residual_and_jacobian(&st).unwrap();
    let n = k.dim();
    let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let prescribed = [(0usize, 0.01), (1usize, -0.02)];
    let (kr, br, red) = apply_dirichlet_reduction(&k, &rhs, &prescribed).unwrap();
    assert_eq!(kr.dim(), n - 2);
    // two constraints leave the rigid rotation free; a unit diagonal shift
    // keeps both routes nonsingular without touching the coupling columns
    let xf = ldlt_factorize(&kr, 1.0).unwrap().solve(&br).unwrap();
    let x = red.recover(&xf, &prescribed);

    let kd = k.to_dense();
    let a = DMatrix::from_fn(n, n, |r, c| kd[r][c]);
    let free: Vec<usize> = (2..n).collect();
    let aff = DMatrix::from_fn(free.len(), free.len(), |r, c| a[(free[r], free[c])] + if r == c { 1.0 } else { 0.0 });
    let bf = DVector::from_fn(free.len(), |r, _| {
        rhs[free[r]] - a[(free[r], 0)] * 0.01 - a[(free[r], 1)] * -0.02
    });
    let xd = aff.lu().solve(&bf).unwrap();
    assert_eq!(x[0], 0.01);
    assert_eq!(x[1], -0.02);
    for (k, &i) in free.iter().enumerate() {
        assert!((x[i] - xd[k]).abs() < 1e-10 * xd.amax());
    }
}

#[test]
fn penalty_inactive_when_damage_grows() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mesh = patch(&mut rng);
    let mat = steel();
    let mut off = mat;
    off.gamma = 0.0;
    let a = Assembler::new(&mesh, mat).unwrap();
    let b = Assembler::new(&mesh, off).unwrap();
    let mut st = random_state(&mut rng, mesh.n_nodes());
    for i in 0..st.d.len() {
        st.d_prev[i] = st.d[i] - rng.gen_range(0.0..0.1) - 1e-9;
    }
    let (ra, ja) = a.residual_and_jacobian(&st).unwrap();
    let (rb, jb) = b.residual_and_jacobian(&st).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(ja, jb);
    assert_eq!(a.total_energy(&st).unwrap(), b.total_energy(&st).unwrap());
}

#[test]
fn assembly_is_independent_of_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mesh = grid(60, 60, 1.0, 1.0, 1.0);
    for p in mesh.nodes.iter_mut() {
        p[0] += 0.001 * (p[1] * 7.0).sin();
    }
    let asm = Assembler::new(&mesh, steel()).unwrap();
    let st = random_state(&mut rng, mesh.n_nodes());
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| (asm.residual_and_jacobian(&st).unwrap(), asm.total_energy(&st).unwrap()))
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.0 .0, four.0 .0);
    assert_eq!(one.0 .1, four.0 .1);
    assert_eq!(one.1.to_bits(), four.1.to_bits());
}

#[test]
fn dimension_mismatch_is_reported() {
    let mesh = grid(2, 2, 1.0, 1.0, 1.0);
    let asm = Assembler::new(&mesh, steel()).unwrap();
    let mut st = State::zeros(mesh.n_nodes());
    st.d.pop();
    assert!(matches!(
        asm.assemble_residual(&st, Mode::Full),
        Err(AssemblyError::DimensionMismatch { .. })
    ));
    let st = State::zeros(mesh.n_nodes());
    let short = vec![0.0; 3];
    assert!(matches!(
        asm.assemble_residual(&st, Mode::QuasiMonolithic(&short)),
        Err(AssemblyError::DimensionMismatch { .. })
    ));
}
