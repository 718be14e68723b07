//! Density-matrix simulation of an ancilla plus an `n`-qubit probe.
//!
//! The ancilla is qubit 0 (most significant bit of the basis index); probe
//! qubit `k` is global qubit `k + 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense::{CMatrix, DenseOperator, MAX_DENSE_QUBITS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Owner {
    Alice,
    Bob,
}

#[derive(Debug, Clone)]
pub enum GateOp {
    /// Unitary on all `n + 1` qubits.
    Dense(CMatrix),
    Diagonal(Vec<Complex64>),
    /// `|i⟩ ↦ |perm[i]⟩`
    Permutation(Vec<usize>),
    /// Unitary on the listed global qubits, first listed most significant.
    Local { targets: Vec<usize>, matrix: CMatrix },
}

#[derive(Debug, Clone)]
pub struct Gate {
    pub op: GateOp,
    pub owner: Owner,
    /// Whether the gate acts conditionally on the ancilla.
    pub controlled: bool,
    pub label: String,
}

impl Gate {
    pub fn hadamard(owner: Owner) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = CMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)]);
        Gate { op: GateOp::Local { targets: vec![0], matrix: m }, owner, controlled: false, label: "H_a".into() }
    }

    /// `1 ⊗ U` on the probe.
    pub fn probe(u: &DenseOperator, owner: Owner, label: &str) -> Self {
        let targets = (1..=u.n()).collect();
        Gate { op: GateOp::Local { targets, matrix: u.matrix().clone() }, owner, controlled: false, label: label.into() }
    }

    /// `|0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ U`
    pub fn controlled(u: &DenseOperator, owner: Owner, label: &str) -> Self {
        let d = u.dim();
        let mut m = CMatrix::identity(2 * d, 2 * d);
        m.view_mut((d, d), (d, d)).copy_from(u.matrix());
        let targets = (0..=u.n()).collect();
        Gate { op: GateOp::Local { targets, matrix: m }, owner, controlled: true, label: label.into() }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Ancilla plus probe state `ρ = M M† / 2^n`.
///
/// The initial state has rank `2^n`, and unitaries preserve it, so the
/// `2^{n+1} × 2^n` factor `M` carries everything and gates act on it from the
/// left only.
#[derive(Debug, Clone)]
pub struct DensityState {
    qubits: usize,
    factor: CMatrix,
}

impl DensityState {
    /// Ancilla `|0⟩`, probe maximally mixed.
    pub fn dqc1_initial(n: usize) -> Result<Self> {
        if n + 1 > MAX_DENSE_QUBITS {
            return Err(Error::ResourceLimit { n: n + 1, max: MAX_DENSE_QUBITS });
        }
        let d = 1usize << n;
        let mut factor = CMatrix::zeros(2 * d, d);
        for i in 0..d {
            factor[(i, i)] = c(1.0);
        }
        Ok(Self { qubits: n + 1, factor })
    }

    pub fn probe_qubits(&self) -> usize {
        self.qubits - 1
    }

    pub fn rho(&self) -> CMatrix {
        &self.factor * self.factor.adjoint() / c(self.factor.ncols() as f64)
    }

    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        let dim = self.factor.nrows();
        match op {
            GateOp::Dense(u) => {
                check_dim(u.nrows(), dim)?;
                self.factor = u * &self.factor;
            }
            GateOp::Diagonal(d) => {
                check_dim(d.len(), dim)?;
                for mut col in self.factor.column_iter_mut() {
                    for (x, di) in col.iter_mut().zip(d) {
                        *x *= di;
                    }
                }
            }
            GateOp::Permutation(p) => {
                check_dim(p.len(), dim)?;
                let mut out = vec![Complex64::new(0.0, 0.0); self.factor.len()];
                for (src, dst) in self.factor.as_slice().chunks_exact(dim).zip(out.chunks_exact_mut(dim)) {
                    for (x, &pi) in src.iter().zip(p) {
                        dst[pi] = *x;
                    }
                }
                self.factor = DMatrix::from_vec(dim, self.factor.ncols(), out);
            }
            GateOp::Local { targets, matrix } => {
                let k = targets.len();
                if matrix.nrows() != 1 << k || targets.iter().any(|&t| t >= self.qubits) {
                    return Err(Error::DimensionMismatch { left: 1 << k, right: matrix.nrows() });
                }
                self.factor = left_local(&self.factor, self.qubits, targets, matrix);
            }
        }
        Ok(())
    }

    pub fn run(&mut self, gates: &[Gate]) -> Result<()> {
        for g in gates {
            self.apply(&g.op)?;
        }
        Ok(())
    }

    /// `(⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩)` of the ancilla.
    pub fn ancilla_bloch(&self) -> (f64, f64, f64) {
        let d = self.factor.nrows() / 2;
        let mut coh = Complex64::new(0.0, 0.0);
        let mut z = 0.0;
        for col in self.factor.column_iter() {
            for i in 0..d {
                // ρ_{1i,0i}
                coh += col[d + i] * col[i].conj();
                z += col[i].norm_sqr() - col[d + i].norm_sqr();
            }
        }
        let norm = self.factor.ncols() as f64;
        (2.0 * coh.re / norm, 2.0 * coh.im / norm, z / norm)
    }

    /// Partial trace over the ancilla.
    pub fn probe_reduced(&self) -> CMatrix {
        let d = self.factor.nrows() / 2;
        let top = self.factor.rows(0, d);
        let bottom = self.factor.rows(d, d);
        (top * top.adjoint() + bottom * bottom.adjoint()) / c(self.factor.ncols() as f64)
    }
}

fn check_dim(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch { left: want, right: got });
    }
    Ok(())
}

/// `U_targets · m` for a matrix `m` over all qubits.
fn left_local(m: &CMatrix, qubits: usize, targets: &[usize], u: &CMatrix) -> CMatrix {
    let dim = m.nrows();
    let k = targets.len();
    let block = 1usize << k;
    let bits: Vec<usize> = targets.iter().map(|&t| qubits - 1 - t).collect();
    let mask: usize = bits.iter().map(|&b| 1usize << b).sum();
    let offsets: Vec<usize> = (0..block)
        .map(|a| (0..k).filter(|&j| a >> (k - 1 - j) & 1 == 1).map(|j| 1usize << bits[j]).sum())
        .collect();
    let bases: Vec<usize> = (0..dim).filter(|i| i & mask == 0).collect();
    let uu: Vec<Complex64> = (0..block * block).map(|i| u[(i / block, i % block)]).collect();
    let src = m.as_slice();
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); block];
    for (col_in, col_out) in src.chunks_exact(dim).zip(out.chunks_exact_mut(dim)) {
        for &base in &bases {
            for (a, &off) in offsets.iter().enumerate() {
                buf[a] = col_in[base | off];
            }
            for (r, &off) in offsets.iter().enumerate() {
                let row = &uu[r * block..(r + 1) * block];
                col_out[base | off] = row.iter().zip(&buf).map(|(x, y)| x * y).sum();
            }
        }
    }
    DMatrix::from_vec(dim, m.ncols(), out)
}

/// Largest deviation of the probe's reduced state from `1/2^n`.
pub fn probe_mixedness_defect(state: &DensityState) -> f64 {
    let r = state.probe_reduced();
    let d = r.nrows();
    let target = 1.0 / d as f64;
    let mut worst: f64 = 0.0;
    for j in 0..d {
        for i in 0..d {
            let want = if i == j { target } else { 0.0 };
            worst = worst.max((r[(i, j)] - c(want)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{evolve, product_matrix};
    use crate::pauli::PauliSum;

    #[test]
    fn trace_circuit_reports_heisenberg_cosine() {
        let h0 = PauliSum::parse_terms(&["0.3*ZI", "0.3*IZ"]).unwrap();
        let w = evolve(&h0, 1.0).unwrap();
        let x = product_matrix(&"XI".parse().unwrap()).unwrap();
        let gates = vec![
            Gate::hadamard(Owner::Alice),
            Gate::controlled(&x, Owner::Alice, "c-X"),
            Gate::probe(&w, Owner::Bob, "W"),
            Gate::controlled(&x, Owner::Alice, "c-X"),
        ];
        let mut s = DensityState::dqc1_initial(2).unwrap();
        s.run(&gates).unwrap();
        let (bx, _, _) = s.ancilla_bloch();
        assert!((bx - 0.6f64.cos()).abs() < 1e-12);
        assert!(probe_mixedness_defect(&s) < 1e-12);
    }

    #[test]
    fn gate_kinds_agree() {
        let n = 2;
        let dim = 1 << (n + 1);
        let perm: Vec<usize> = (0..dim).map(|i| (i + 3) % dim).collect();
        let mut pm = CMatrix::zeros(dim, dim);
        for (i, &p) in perm.iter().enumerate() {
            pm[(p, i)] = c(1.0);
        }
        let diag: Vec<Complex64> = (0..dim).map(|i| Complex64::from_polar(1.0, 0.3 * i as f64)).collect();
        let dm = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));

        let mut a = DensityState::dqc1_initial(n).unwrap();
        let mut b = a.clone();
        for s in [&mut a, &mut b] {
            s.apply(&Gate::hadamard(Owner::Alice).op).unwrap();
        }
        a.apply(&GateOp::Permutation(perm)).unwrap();
        a.apply(&GateOp::Diagonal(diag)).unwrap();
        b.apply(&GateOp::Dense(pm)).unwrap();
        b.apply(&GateOp::Dense(dm)).unwrap();
        assert!((a.rho() - b.rho()).norm() < 1e-12);
    }
}
