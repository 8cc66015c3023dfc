//! Topological Hückel molecular orbitals for conjugated π-systems.
//!
//! Energies are reported in units of |β| relative to α with β < 0, so the most
//! bonding orbital has the lowest energy. A heteroatom shift `h` lowers the
//! site energy to α + hβ, i.e. it makes the site more electronegative.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{QpmError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiSystem {
    pub atom_count: usize,
    pub bonds: Vec<(usize, usize)>,
    /// Coulomb-integral shift h per atom, in units of β.
    pub alpha_shift: Vec<f64>,
    /// Resonance scaling k per bond, aligned with `bonds`.
    pub bond_factor: Vec<f64>,
    pub electron_count: usize,
}

impl PiSystem {
    /// Carbon-only system: h = 0 everywhere, k = 1 on every bond.
    pub fn hydrocarbon(atom_count: usize, bonds: Vec<(usize, usize)>, electron_count: usize) -> Self {
        let nb = bonds.len();
        PiSystem {
            atom_count,
            bonds,
            alpha_shift: vec![0.0; atom_count],
            bond_factor: vec![1.0; nb],
            electron_count,
        }
    }

    /// Six-membered ring 0-1-2-3-4-5-0 with six π electrons.
    pub fn benzene() -> Self {
        let bonds = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        Self::hydrocarbon(6, bonds, 6)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.atom_count;
        if n == 0 {
            return Err(QpmError::invalid("atom_count", "must be >= 1"));
        }
        if self.alpha_shift.len() != n {
            return Err(QpmError::invalid(
                "alpha_shift",
                format!("expected {n} entries, got {}", self.alpha_shift.len()),
            ));
        }
        if self.bond_factor.len() != self.bonds.len() {
            return Err(QpmError::invalid(
                "bond_factor",
                format!("expected {} entries, got {}", self.bonds.len(), self.bond_factor.len()),
            ));
        }
        for &(i, j) in &self.bonds {
            for idx in [i, j] {
                if idx >= n {
                    return Err(QpmError::IndexOutOfRange { index: idx, len: n });
                }
            }
            if i == j {
                return Err(QpmError::invalid("bonds", format!("self-bond on atom {i}")));
            }
        }
        if !self.electron_count.is_multiple_of(2) {
            return Err(QpmError::OddElectronCount(self.electron_count));
        }
        if self.electron_count > 2 * n {
            return Err(QpmError::invalid(
                "electron_count",
                format!("{} exceeds 2 × {n} atoms", self.electron_count),
            ));
        }
        if !self.is_connected() {
            return Err(QpmError::DisconnectedGraph);
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.atom_count;
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &self.bonds {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Hückel matrix in energy units of |β| (β < 0): diagonal −h, bonds −k.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let n = self.atom_count;
        let mut h = DMatrix::zeros(n, n);
        for (i, &shift) in self.alpha_shift.iter().enumerate() {
            h[(i, i)] = -shift;
        }
        for (&(i, j), &k) in self.bonds.iter().zip(&self.bond_factor) {
            h[(i, j)] = -k;
            h[(j, i)] = -k;
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoResult {
    /// Orbital energies, ascending, in units of |β| relative to α.
    pub energies: Vec<f64>,
    /// Column `o` holds the coefficients of orbital `o` over the atoms.
    pub coefficients: DMatrix<f64>,
    /// π density q_i = 2 Σ_occupied C²_{io}.
    pub densities: Vec<f64>,
    pub occupied: usize,
}

impl MoResult {
    pub fn coefficient(&self, orbital: usize, atom: usize) -> f64 {
        self.coefficients[(atom, orbital)]
    }

    /// Per-atom weights |C_i|² averaged over each set of degenerate orbitals.
    ///
    /// Individual coefficients inside a degenerate set depend on the arbitrary
    /// basis the eigensolver picks; the averaged weight is basis independent.
    pub fn symmetrized_weights(&self, degeneracy_tol: f64) -> Vec<Vec<f64>> {
        let n = self.energies.len();
        let atoms = self.coefficients.nrows();
        let mut out = vec![vec![0.0; atoms]; n];
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && (self.energies[end] - self.energies[start]).abs() < degeneracy_tol {
                end += 1;
            }
            let g = (end - start) as f64;
            for atom in 0..atoms {
                let w = (start..end)
                    .map(|o| self.coefficients[(atom, o)].powi(2))
                    .sum::<f64>()
                    / g;
                for row in &mut out[start..end] {
                    row[atom] = w;
                }
            }
            start = end;
        }
        out
    }
}

/// Diagonalizes the Hückel matrix and fills the lowest `electron_count / 2` orbitals.
pub fn solve(system: &PiSystem) -> Result<MoResult> {
    system.validate()?;
    let n = system.atom_count;
    let eig = SymmetricEigen::new(system.hamiltonian());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let energies: Vec<f64> = order.iter().map(|&o| eig.eigenvalues[o]).collect();
    let mut coefficients = DMatrix::zeros(n, n);
    for (col, &o) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(o);
        // Deterministic phase: first significant coefficient positive.
        let sign = v
            .iter()
            .find(|c| c.abs() > 1e-12)
            .map_or(1.0, |c| c.signum());
        coefficients.set_column(col, &(v * sign));
    }

    let occupied = system.electron_count / 2;
    let densities = (0..n)
        .map(|atom| 2.0 * (0..occupied).map(|o| coefficients[(atom, o)].powi(2)).sum::<f64>())
        .collect();

    Ok(MoResult {
        energies,
        coefficients,
        densities,
        occupied,
    })
}

/// Δq = q_acceptor − q_donor.
pub fn density_asymmetry(result: &MoResult, acceptor_atom: usize, donor_atom: usize) -> Result<f64> {
    let len = result.densities.len();
    for index in [acceptor_atom, donor_atom] {
        if index >= len {
            return Err(QpmError::IndexOutOfRange { index, len });
        }
    }
    Ok(result.densities[acceptor_atom] - result.densities[donor_atom])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn perturbed_benzene(h0: f64, h3: f64) -> PiSystem {
        let mut sys = PiSystem::benzene();
        sys.alpha_shift[0] = h0;
        sys.alpha_shift[3] = h3;
        sys
    }

    fn residual(sys: &PiSystem, r: &MoResult) -> f64 {
        let h = sys.hamiltonian();
        let e = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.energies.clone()));
        (h * &r.coefficients - &r.coefficients * e).amax()
    }

    #[test]
    fn benzene_uniform_density() {
        let sys = PiSystem::benzene();
        let r = solve(&sys).unwrap();
        for q in &r.densities {
            assert_relative_eq!(*q, 1.0, epsilon = 1e-10);
        }
        for row in r.symmetrized_weights(1e-8) {
            for w in row {
                assert_relative_eq!(w, 1.0 / 6.0, epsilon = 1e-10);
            }
        }
        let expected = [-2.0, -1.0, -1.0, 1.0, 1.0, 2.0];
        for (e, x) in r.energies.iter().zip(expected) {
            assert_relative_eq!(*e, x, epsilon = 1e-10);
        }
        assert!(residual(&sys, &r) < 1e-10);
    }

    #[test]
    fn benzene_alternant_pairing() {
        let r = solve(&PiSystem::benzene()).unwrap();
        let n = r.energies.len();
        for i in 0..n {
            assert_relative_eq!(r.energies[i], -r.energies[n - 1 - i], epsilon = 1e-10);
        }
    }

    #[test]
    fn dimer() {
        let sys = PiSystem::hydrocarbon(2, vec![(0, 1)], 2);
        let r = solve(&sys).unwrap();
        assert_relative_eq!(r.energies[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(r.energies[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.densities[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.densities[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthonormal_and_conserving() {
        let sys = perturbed_benzene(0.5, -0.3);
        let r = solve(&sys).unwrap();
        let ctc = r.coefficients.transpose() * &r.coefficients;
        assert!((ctc - DMatrix::<f64>::identity(6, 6)).amax() < 1e-10);
        assert_relative_eq!(r.densities.iter().sum::<f64>(), 6.0, epsilon = 1e-10);
        assert!(residual(&sys, &r) < 1e-10);
        assert!(r.energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn asymmetry() {
        let r = solve(&PiSystem::benzene()).unwrap();
        assert_relative_eq!(density_asymmetry(&r, 0, 3).unwrap(), 0.0, epsilon = 1e-10);

        let r = solve(&perturbed_benzene(0.5, 0.0)).unwrap();
        assert!(density_asymmetry(&r, 0, 3).unwrap() > 0.0);
        assert!(r.densities[0] > 1.0 && r.densities[3] < 1.0);

        let r = solve(&perturbed_benzene(0.5, 0.5)).unwrap();
        assert_relative_eq!(density_asymmetry(&r, 0, 3).unwrap(), 0.0, epsilon = 1e-10);

        assert!(matches!(
            density_asymmetry(&r, 6, 0),
            Err(QpmError::IndexOutOfRange { index: 6, len: 6 })
        ));
    }

    #[test]
    fn density_invariant_under_ring_automorphism() {
        // Mirror through atoms 0 and 3 maps i -> (6 - i) % 6.
        let mut sys = perturbed_benzene(0.5, 0.0);
        sys.alpha_shift[1] = 0.2;
        let r = solve(&sys).unwrap();
        let mut mirrored = sys.clone();
        for i in 0..6 {
            mirrored.alpha_shift[(6 - i) % 6] = sys.alpha_shift[i];
        }
        let m = solve(&mirrored).unwrap();
        for i in 0..6 {
            assert_relative_eq!(r.densities[i], m.densities[(6 - i) % 6], epsilon = 1e-10);
        }
    }

    #[test]
    fn invalid_systems() {
        let disconnected = PiSystem::hydrocarbon(4, vec![(0, 1), (2, 3)], 4);
        assert_eq!(solve(&disconnected).unwrap_err(), QpmError::DisconnectedGraph);
        let odd = PiSystem::hydrocarbon(2, vec![(0, 1)], 1);
        assert_eq!(solve(&odd).unwrap_err(), QpmError::OddElectronCount(1));
        let too_many = PiSystem::hydrocarbon(2, vec![(0, 1)], 6);
        assert!(solve(&too_many).is_err());
        let bad_index = PiSystem::hydrocarbon(2, vec![(0, 2)], 2);
        assert!(matches!(solve(&bad_index), Err(QpmError::IndexOutOfRange { .. })));
    }
}
