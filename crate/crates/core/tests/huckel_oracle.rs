use proptest::prelude::*;
use qpm_core::huckel::{density_asymmetry, solve, PiSystem};

/// Cyclic Jacobi rotations on a dense symmetric matrix; returns eigenvalues
/// and eigenvectors (as columns) in ascending order.
fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x][x].total_cmp(&a[y][y]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&o| (0..n).map(|k| v[k][o]).collect()).collect();
    (values, vectors)
}

fn oracle_matrix(sys: &PiSystem) -> Vec<Vec<f64>> {
    let n = sys.atom_count;
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = -sys.alpha_shift[i];
    }
    for (&(i, j), &k) in sys.bonds.iter().zip(&sys.bond_factor) {
        m[i][j] = -k;
        m[j][i] = -k;
    }
    m
}

fn oracle_densities(sys: &PiSystem) -> (Vec<f64>, Vec<f64>) {
    let (values, vectors) = jacobi(oracle_matrix(sys));
    let occ = sys.electron_count / 2;
    let q = (0..sys.atom_count)
        .map(|i| 2.0 * vectors[..occ].iter().map(|v| v[i] * v[i]).sum::<f64>())
        .collect();
    (values, q)
}

fn naphthalene() -> PiSystem {
    let bonds = vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 9), (9, 0), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9)];
    PiSystem::hydrocarbon(10, bonds, 10)
}

#[test]
fn benzene_matches_jacobi() {
    let sys = PiSystem::benzene();
    let mo = solve(&sys).unwrap();
    let (values, q) = oracle_densities(&sys);
    for (a, b) in mo.energies.iter().zip(&values) {
        assert!((a - b).abs() < 1e-10);
    }
    for (a, b) in [-2.0, -1.0, -1.0, 1.0, 1.0, 2.0].iter().zip(&mo.energies) {
        assert!((a - b).abs() < 1e-10);
    }
    for (a, b) in mo.densities.iter().zip(&q) {
        assert!((a - b).abs() < 1e-10);
        assert!((a - 1.0).abs() < 1e-10);
    }
    for row in mo.symmetrized_weights(1e-8) {
        for w in row {
            assert!((w - 1.0 / 6.0).abs() < 1e-10);
        }
    }
}

#[test]
fn naphthalene_matches_jacobi() {
    let sys = naphthalene();
    let mo = solve(&sys).unwrap();
    let (values, q) = oracle_densities(&sys);
    for (a, b) in mo.energies.iter().zip(&values) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    for (a, b) in mo.densities.iter().zip(&q) {
        assert!((a - b).abs() < 1e-10);
    }
    // Alternant hydrocarbon: uniform density, paired spectrum.
    assert!(mo.densities.iter().all(|q| (q - 1.0).abs() < 1e-10));
    for k in 0..5 {
        assert!((mo.energies[k] + mo.energies[9 - k]).abs() < 1e-10);
    }
}

#[test]
fn acceptor_donor_ring_polarizes() {
    let mut sys = PiSystem::benzene();
    sys.alpha_shift[0] = 0.5;
    sys.alpha_shift[3] = -0.1;
    let mo = solve(&sys).unwrap();
    let (_, q) = oracle_densities(&sys);
    for (a, b) in mo.densities.iter().zip(&q) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!(mo.densities[0] > 1.0 && mo.densities[3] < 1.0);
    assert!(density_asymmetry(&mo, 0, 3).unwrap() > 0.0);
    let total: f64 = mo.densities.iter().sum();
    assert!((total - 6.0).abs() < 1e-10);
}

fn ring_with_chords() -> impl Strategy<Value = PiSystem> {
    (4usize..9).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec((0..n, 0..n), 0..3),
            proptest::collection::vec(-1.0f64..1.0, n),
            proptest::collection::vec(0.7f64..1.3, n + 3),
        )
            .prop_map(|(n, chords, shifts, factors)| {
                let mut bonds: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
                for (a, b) in chords {
                    let dup = bonds.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a));
                    if a != b && !dup {
                        bonds.push((a, b));
                    }
                }
                let electrons = 2 * (n / 2);
                PiSystem {
                    atom_count: n,
                    bond_factor: factors[..bonds.len()].to_vec(),
                    bonds,
                    alpha_shift: shifts,
                    electron_count: electrons,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_systems_match_jacobi(sys in ring_with_chords()) {
        let mo = solve(&sys).unwrap();
        let (values, q) = oracle_densities(&sys);
        for (a, b) in mo.energies.iter().zip(&values) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let occ = sys.electron_count / 2;
        let gap = if occ < sys.atom_count { values[occ] - values[occ - 1] } else { f64::INFINITY };
        if gap > 1e-6 {
            for (a, b) in mo.densities.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
        let total: f64 = mo.densities.iter().sum();
        prop_assert!((total - sys.electron_count as f64).abs() < 1e-9);
        let ortho = mo.coefficients.transpose() * &mo.coefficients;
        for i in 0..sys.atom_count {
            for j in 0..sys.atom_count {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((ortho[(i, j)] - want).abs() < 1e-10);
            }
        }
    }
}
