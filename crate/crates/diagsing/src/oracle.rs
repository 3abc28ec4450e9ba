//! Brute-force referee: the model discretised on the grid as a dense
//! Hermitian matrix, evolved through its eigendecomposition.
//!
//! Basis convention: |i⟩ ≈ √w_i |ω_i⟩. A regular kernel A(ω, ω′) maps to
//! √(w_i w_j)·A(ω_i, ω_j); a singular diagonal a(ω)δ(ω − ω′) maps to δ_ij a_i.
//! States map dually: kernel k to √(w_i w_j)·k_ij off the diagonal and the
//! density to w_i d_i on it. Then Tr(ρ_or O_or) equals the pairing exactly
//! whenever k_ii = d_i, which holds for every mixture of wavefunctions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::functionals::{ObservableKernel, StateFunctional};
use crate::grid::EnergyGrid;
use crate::model::ScatteringModel;

#[derive(Debug, Clone)]
pub struct DiscretizedSystem {
    grid: EnergyGrid,
    hamiltonian: DMatrix<Complex64>,
    energies: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

impl DiscretizedSystem {
    /// H_or[i][j] = ω_i δ_ij + κ √(w_i w_j) g(ω_i) conj(g(ω_j)).
    pub fn new(model: &ScatteringModel) -> Self {
        let grid = model.grid().clone();
        let n = grid.len();
        let u: Vec<Complex64> = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .map(|(&x, &w)| model.g(Complex64::new(x, 0.0)) * w.sqrt())
            .collect();
        let kappa = model.kappa();
        let h = DMatrix::from_fn(n, n, |i, j| {
            let free = if i == j { grid.nodes()[i] } else { 0.0 };
            free + kappa * u[i] * u[j].conj()
        });
        DiscretizedSystem::from_hamiltonian(grid, h)
    }

    fn from_hamiltonian(grid: EnergyGrid, hamiltonian: DMatrix<Complex64>) -> Self {
        let eig = hamiltonian.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(grid.len(), grid.len(), |i, k| eig.eigenvectors[(i, order[k])]);
        DiscretizedSystem { grid, hamiltonian, energies, vectors }
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.hamiltonian
    }

    /// Eigenvalues in ascending order.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Orthonormal eigenvectors as columns, ordered like the energies.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    /// Smallest spacing between consecutive eigenvalues and where it sits.
    pub fn min_gap(&self) -> (f64, usize) {
        self.energies
            .windows(2)
            .enumerate()
            .map(|(k, p)| (p[1] - p[0], k))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }

    pub fn map_observable(&self, obs: &ObservableKernel) -> DMatrix<Complex64> {
        let w = self.grid.weights();
        let reg = obs.reg();
        let n = w.len();
        DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { obs.diag()[i] } else { 0.0 };
            reg[(i, j)] * (w[i] * w[j]).sqrt() + d
        })
    }

    pub fn map_state(&self, rho: &StateFunctional) -> DMatrix<Complex64> {
        let w = self.grid.weights();
        let n = w.len();
        let k = rho.k();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(w[i] * rho.d()[i], 0.0)
            } else {
                k[(i, j)] * (w[i] * w[j]).sqrt()
            }
        })
    }

    /// ψ_i = √w_i φ(ω_i).
    pub fn map_wavefunction(&self, phi: &[Complex64]) -> DVector<Complex64> {
        DVector::from_iterator(phi.len(), phi.iter().zip(self.grid.weights()).map(|(p, w)| p * w.sqrt()))
    }

    /// e^{−iHt} ρ e^{iHt}.
    pub fn evolve(&self, rho: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
        let v = &self.vectors;
        let phases: Vec<Complex64> = self.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect();
        let mut r = v.adjoint() * rho * v;
        let n = r.nrows();
        for l in 0..n {
            for k in 0..n {
                r[(k, l)] *= phases[k] * phases[l].conj();
            }
        }
        v * r * v.adjoint()
    }

    /// Tr(ρ O).
    pub fn mean(&self, rho: &DMatrix<Complex64>, obs: &DMatrix<Complex64>) -> Complex64 {
        let n = rho.nrows();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += rho[(i, j)] * obs[(j, i)];
            }
        }
        acc
    }

    /// Means of one observable at many times, rotating into the eigenbasis
    /// once.
    pub fn means_at(&self, rho: &DMatrix<Complex64>, obs: &DMatrix<Complex64>, times: &[f64]) -> Vec<Complex64> {
        let v = &self.vectors;
        let r = v.adjoint() * rho * v;
        let o = v.adjoint() * obs * v;
        let n = r.nrows();
        times
            .iter()
            .map(|&t| {
                let ph: Vec<Complex64> = self.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect();
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    for l in 0..n {
                        acc += r[(k, l)] * ph[k] * ph[l].conj() * o[(l, k)];
                    }
                }
                acc
            })
            .collect()
    }

    /// Infinite-time average of ρ mapped back to a density on the free
    /// basis: Σ_k |V_ik|² (V†ρV)_kk / w_i.
    pub fn longtime_diagonal(&self, rho: &DMatrix<Complex64>) -> Result<Vec<f64>> {
        let (gap, k) = self.min_gap();
        let scale = self.energies.last().copied().unwrap_or(1.0).abs().max(1.0);
        if gap <= 1e-12 * scale {
            return Err(Error::NearDegenerate { gap, i: k, j: k + 1 });
        }
        let v = &self.vectors;
        let pop: Vec<f64> = (0..v.ncols())
            .map(|k| {
                let col = v.column(k);
                (col.adjoint() * rho * col)[(0, 0)].re
            })
            .collect();
        Ok((0..v.nrows())
            .map(|i| {
                let s: f64 = (0..v.ncols()).map(|k| v[(i, k)].norm_sqr() * pop[k]).sum();
                s / self.grid.weights()[i]
            })
            .collect())
    }
}
