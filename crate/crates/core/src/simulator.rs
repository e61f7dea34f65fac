//! Dense state-vector simulation of small qubit registers.
//!
//! Qubit `q` is bit `q` of the amplitude index (qubit 0 is the least
//! significant bit). A gate acting on `targets` reads its local basis index
//! in list order: `targets[0]` is the most significant bit of the gate's row
//! and column index, so `controlled(g)` applied to `[control, target]`
//! behaves like the textbook `|c t⟩` matrix.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type Complex = Complex64;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);
const I: Complex = Complex::new(0.0, 1.0);

/// Amplitudes of an `n_qubits` register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Self { n_qubits, amps }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if index >= 1 << n_qubits {
            return Err(Error::DimensionMismatch {
                gate_dim: index,
                n_targets: n_qubits,
            });
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the norm is
    /// not checked.
    pub fn from_amplitudes(amps: Vec<Complex>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                gate_dim: len,
                n_targets: 0,
            });
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies `gate` to `targets` in place.
    pub fn apply(&mut self, gate: &GateMatrix, targets: &[usize]) -> Result<()> {
        check_targets(self.n_qubits, gate, targets)?;
        apply_unchecked(&mut self.amps, self.n_qubits, gate, targets);
        Ok(())
    }
}

/// Dense square matrix acting on `log2(dim)` qubits, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GateMatrix {
    dim: usize,
    entries: Vec<Complex>,
}

impl GateMatrix {
    pub fn new(dim: usize, entries: Vec<Complex>) -> Result<Self> {
        if dim == 0 || !dim.is_power_of_two() || entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                gate_dim: dim,
                n_targets: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    fn from_2x2(m: [[Complex; 2]; 2]) -> Self {
        Self {
            dim: 2,
            entries: vec![m[0][0], m[0][1], m[1][0], m[1][1]],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[Complex] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.entries[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                entries[c * d + r] = self.entries[r * d + c].conj();
            }
        }
        Self { dim: d, entries }
    }

    pub fn scale(&self, s: Complex) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * s).collect(),
        }
    }

    pub fn add(&self, other: &GateMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &GateMatrix) -> Self {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.entries[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    entries[r * d + c] += a * rhs.entries[k * d + c];
                }
            }
        }
        Self { dim: d, entries }
    }

    /// Kronecker product `self ⊗ rhs`; `self` occupies the high bits.
    pub fn kron(&self, rhs: &GateMatrix) -> Self {
        let (a, b) = (self.dim, rhs.dim);
        let d = a * b;
        let mut entries = vec![ZERO; d * d];
        for r1 in 0..a {
            for c1 in 0..a {
                let x = self.entries[r1 * a + c1];
                for r2 in 0..b {
                    for c2 in 0..b {
                        entries[(r1 * b + r2) * d + c1 * b + c2] = x * rhs.entries[r2 * b + c2];
                    }
                }
            }
        }
        Self { dim: d, entries }
    }

    /// Matrix-vector product on a raw amplitude slice of length `dim`.
    pub fn mul_vec(&self, v: &[Complex]) -> Vec<Complex> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| {
                self.entries[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Largest elementwise deviation of `U†U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint().matmul(self);
        let id = GateMatrix::identity(self.dim);
        p.max_abs_diff(&id)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    pub fn max_abs_diff(&self, other: &GateMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Distance to `other` after removing the best-aligned global phase.
    pub fn max_abs_diff_up_to_phase(&self, other: &GateMatrix) -> f64 {
        let overlap: Complex = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        self.scale(phase).max_abs_diff(other)
    }
}

/// Angles of the general single-qubit rotation `U(θ, φ, λ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct U3Params {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl U3Params {
    pub fn new(theta: f64, phi: f64, lambda: f64) -> Self {
        Self { theta, phi, lambda }
    }

    pub fn from_slice(w: &[f64]) -> Self {
        Self::new(w[0], w[1], w[2])
    }
}

/// Unit rotation axis `n̂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
}

impl Axis {
    pub const X: Axis = Axis {
        nx: 1.0,
        ny: 0.0,
        nz: 0.0,
    };
    pub const Y: Axis = Axis {
        nx: 0.0,
        ny: 1.0,
        nz: 0.0,
    };
    pub const Z: Axis = Axis {
        nx: 0.0,
        ny: 0.0,
        nz: 1.0,
    };

    /// Normalizes `(nx, ny, nz)`; the zero vector is rejected.
    pub fn normalized(nx: f64, ny: f64, nz: f64) -> Result<Self> {
        let n = (nx * nx + ny * ny + nz * nz).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::AxisNotNormalized(n));
        }
        Ok(Self {
            nx: nx / n,
            ny: ny / n,
            nz: nz / n,
        })
    }

    pub fn norm(&self) -> f64 {
        (self.nx * self.nx + self.ny * self.ny + self.nz * self.nz).sqrt()
    }
}

pub fn u3_matrix(p: U3Params) -> GateMatrix {
    let (s, c) = (p.theta / 2.0).sin_cos();
    GateMatrix::from_2x2([
        [Complex::new(c, 0.0), -Complex::from_polar(s, p.lambda)],
        [
            Complex::from_polar(s, p.phi),
            Complex::from_polar(c, p.phi + p.lambda),
        ],
    ])
}

/// Partial derivatives of [`u3_matrix`] with respect to θ, φ and λ.
pub fn u3_derivatives(p: U3Params) -> [GateMatrix; 3] {
    let (s, c) = (p.theta / 2.0).sin_cos();
    let d_theta = GateMatrix::from_2x2([
        [
            Complex::new(-s / 2.0, 0.0),
            -Complex::from_polar(c / 2.0, p.lambda),
        ],
        [
            Complex::from_polar(c / 2.0, p.phi),
            -Complex::from_polar(s / 2.0, p.phi + p.lambda),
        ],
    ]);
    let d_phi = GateMatrix::from_2x2([
        [ZERO, ZERO],
        [
            I * Complex::from_polar(s, p.phi),
            I * Complex::from_polar(c, p.phi + p.lambda),
        ],
    ]);
    let d_lambda = GateMatrix::from_2x2([
        [ZERO, -I * Complex::from_polar(s, p.lambda)],
        [ZERO, I * Complex::from_polar(c, p.phi + p.lambda)],
    ]);
    [d_theta, d_phi, d_lambda]
}

/// `exp(−i·α/2·(n̂·σ))`.
pub fn axis_rotation_matrix(alpha: f64, axis: Axis) -> Result<GateMatrix> {
    let n = axis.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::AxisNotNormalized(n));
    }
    let (s, c) = (alpha / 2.0).sin_cos();
    // cos·I − i·sin·(nx X + ny Y + nz Z)
    Ok(GateMatrix::from_2x2([
        [
            Complex::new(c, -s * axis.nz),
            Complex::new(-s * axis.ny, -s * axis.nx),
        ],
        [
            Complex::new(s * axis.ny, -s * axis.nx),
            Complex::new(c, s * axis.nz),
        ],
    ]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> GateMatrix {
        match self {
            Pauli::I => GateMatrix::identity(2),
            Pauli::X => GateMatrix::from_2x2([[ZERO, ONE], [ONE, ZERO]]),
            Pauli::Y => GateMatrix::from_2x2([[ZERO, -I], [I, ZERO]]),
            Pauli::Z => GateMatrix::from_2x2([[ONE, ZERO], [ZERO, -ONE]]),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Kronecker product of a Pauli word; `word[0]` is the most significant factor.
pub fn pauli_word_matrix(word: &[Pauli]) -> GateMatrix {
    word.iter()
        .fold(GateMatrix::identity(1), |acc, p| acc.kron(&p.matrix()))
}

/// `exp(−i·θ/2·P)` for a Pauli word `P` (which squares to the identity).
pub fn pauli_rotation_matrix(word: &[Pauli], theta: f64) -> GateMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    let p = pauli_word_matrix(word);
    GateMatrix::identity(p.dim())
        .scale(Complex::new(c, 0.0))
        .add(&p.scale(Complex::new(0.0, -s)))
}

/// d/dθ of [`pauli_rotation_matrix`].
pub fn pauli_rotation_derivative(word: &[Pauli], theta: f64) -> GateMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    let p = pauli_word_matrix(word);
    GateMatrix::identity(p.dim())
        .scale(Complex::new(-s / 2.0, 0.0))
        .add(&p.scale(Complex::new(0.0, -c / 2.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsingKind {
    XX,
    YY,
    ZZ,
}

impl IsingKind {
    pub fn pauli(self) -> Pauli {
        match self {
            IsingKind::XX => Pauli::X,
            IsingKind::YY => Pauli::Y,
            IsingKind::ZZ => Pauli::Z,
        }
    }
}

/// `exp(−i·θ/2·P⊗P)`.
pub fn ising_matrix(kind: IsingKind, theta: f64) -> GateMatrix {
    let p = kind.pauli();
    pauli_rotation_matrix(&[p, p], theta)
}

pub fn ising_derivative(kind: IsingKind, theta: f64) -> GateMatrix {
    let p = kind.pauli();
    pauli_rotation_derivative(&[p, p], theta)
}

#[derive(Clone, Debug)]
pub struct FixedGates {
    pub x: GateMatrix,
    pub y: GateMatrix,
    pub z: GateMatrix,
    pub h: GateMatrix,
    pub cnot: GateMatrix,
}

pub fn fixed_gates() -> FixedGates {
    let h = Complex::new(FRAC_1_SQRT_2, 0.0);
    let x = Pauli::X.matrix();
    FixedGates {
        cnot: controlled_unchecked(&x),
        x,
        y: Pauli::Y.matrix(),
        z: Pauli::Z.matrix(),
        h: GateMatrix::from_2x2([[h, h], [h, -h]]),
    }
}

/// Block-diagonal `[I, g]`: `g` acts on the second target when the first is `|1⟩`.
pub fn controlled(g: &GateMatrix) -> Result<GateMatrix> {
    if g.dim() != 2 {
        return Err(Error::DimensionMismatch {
            gate_dim: g.dim(),
            n_targets: 1,
        });
    }
    let err = g.unitarity_error();
    if err > 1e-9 {
        return Err(Error::NotUnitary(err));
    }
    Ok(controlled_unchecked(g))
}

/// `[0, g]` blocks without the unitarity check; used for derivative matrices.
pub(crate) fn controlled_block(g: &GateMatrix, upper: Complex) -> GateMatrix {
    let mut entries = vec![ZERO; 16];
    entries[0] = upper;
    entries[5] = upper;
    for r in 0..2 {
        for c in 0..2 {
            entries[(r + 2) * 4 + c + 2] = g.get(r, c);
        }
    }
    GateMatrix { dim: 4, entries }
}

fn controlled_unchecked(g: &GateMatrix) -> GateMatrix {
    controlled_block(g, ONE)
}

fn check_targets(n_qubits: usize, gate: &GateMatrix, targets: &[usize]) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::TargetOutOfRange { qubit: t, n_qubits });
        }
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateTarget(t));
        }
    }
    if gate.dim() != 1 << targets.len() {
        return Err(Error::DimensionMismatch {
            gate_dim: gate.dim(),
            n_targets: targets.len(),
        });
    }
    Ok(())
}

/// Applies `gate` on `targets`, which must already be validated.
pub(crate) fn apply_unchecked(
    amps: &mut [Complex],
    n_qubits: usize,
    gate: &GateMatrix,
    targets: &[usize],
) {
    let k = targets.len();
    if k == 1 {
        apply_single(amps, gate, targets[0]);
        return;
    }
    let dim = 1 << k;
    let offsets: Vec<usize> = (0..dim)
        .map(|local| {
            targets
                .iter()
                .enumerate()
                .filter(|(j, _)| local >> (k - 1 - j) & 1 == 1)
                .map(|(_, &t)| 1 << t)
                .sum()
        })
        .collect();
    let mut sorted = targets.to_vec();
    sorted.sort_unstable();
    let mut buf = vec![ZERO; dim];
    for rest in 0..1usize << (n_qubits - k) {
        let base = insert_zero_bits(rest, &sorted);
        for (b, off) in buf.iter_mut().zip(&offsets) {
            *b = amps[base + off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let row = &gate.entries[r * dim..(r + 1) * dim];
            amps[base + off] = row.iter().zip(&buf).map(|(g, v)| g * v).sum();
        }
    }
}

fn apply_single(amps: &mut [Complex], gate: &GateMatrix, target: usize) {
    let (m00, m01, m10, m11) = (
        gate.get(0, 0),
        gate.get(0, 1),
        gate.get(1, 0),
        gate.get(1, 1),
    );
    let stride = 1 << target;
    for block in amps.chunks_mut(stride << 1) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let (v0, v1) = (*a0, *a1);
            *a0 = m00 * v0 + m01 * v1;
            *a1 = m10 * v0 + m11 * v1;
        }
    }
}

/// Spreads the bits of `value` over the positions not listed in `sorted_zero_positions`.
fn insert_zero_bits(mut value: usize, sorted_zero_positions: &[usize]) -> usize {
    for &p in sorted_zero_positions {
        let low = value & ((1 << p) - 1);
        value = ((value >> p) << (p + 1)) | low;
    }
    value
}

/// Returns `state` transformed by `g` on `targets`.
pub fn apply_gate(
    mut state: StateVector,
    g: &GateMatrix,
    targets: &[usize],
) -> Result<StateVector> {
    state.apply(g, targets)?;
    Ok(state)
}

/// Probability that measuring `qubit` yields `1`.
pub fn readout_prob_one(state: &StateVector, qubit: usize) -> Result<f64> {
    if qubit >= state.n_qubits {
        return Err(Error::TargetOutOfRange {
            qubit,
            n_qubits: state.n_qubits,
        });
    }
    Ok(state
        .amps
        .iter()
        .enumerate()
        .filter(|(i, _)| i >> qubit & 1 == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// Full `2^n × 2^n` unitary of a gate list, built by Kronecker expansion.
///
/// Each gate is first placed as `I ⊗ g` on a relabelled register where its
/// targets are the low qubits, then conjugated back by the qubit permutation.
/// This is a test oracle and shares no code with [`StateVector::apply`].
pub fn dense_circuit_oracle(
    gates: &[(GateMatrix, Vec<usize>)],
    n_qubits: usize,
) -> Result<GateMatrix> {
    if n_qubits > 10 {
        return Err(Error::TooManyQubits(n_qubits));
    }
    let full_dim = 1 << n_qubits;
    let mut total = GateMatrix::identity(full_dim);
    for (g, targets) in gates {
        check_targets(n_qubits, g, targets)?;
        let k = targets.len();
        let lifted = GateMatrix::identity(1 << (n_qubits - k)).kron(g);
        // physical qubit -> position in the relabelled register
        let mut position = vec![usize::MAX; n_qubits];
        for (j, &t) in targets.iter().enumerate() {
            position[t] = k - 1 - j;
        }
        let mut next = k;
        for p in position.iter_mut() {
            if *p == usize::MAX {
                *p = next;
                next += 1;
            }
        }
        let relabel = |i: usize| -> usize {
            (0..n_qubits)
                .filter(|q| i >> q & 1 == 1)
                .map(|q| 1 << position[q])
                .sum()
        };
        let perm: Vec<usize> = (0..full_dim).map(relabel).collect();
        let mut placed = vec![ZERO; full_dim * full_dim];
        for r in 0..full_dim {
            for c in 0..full_dim {
                placed[r * full_dim + c] = lifted.get(perm[r], perm[c]);
            }
        }
        let placed = GateMatrix {
            dim: full_dim,
            entries: placed,
        };
        total = placed.matmul(&total);
    }
    Ok(total)
}

/// Random inputs for oracle comparisons and property checks.
pub mod sampling {
    use super::*;

    pub fn random_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> StateVector {
        let mut amps: Vec<Complex> = (0..1 << n_qubits)
            .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector { n_qubits, amps }
    }

    pub fn random_u3<R: Rng + ?Sized>(rng: &mut R) -> U3Params {
        let mut angle = || rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI) * 2.0;
        U3Params::new(angle(), angle(), angle())
    }

    /// Unitary from Gram-Schmidt on a random complex matrix.
    pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> GateMatrix {
        let mut cols: Vec<Vec<Complex>> = Vec::with_capacity(dim);
        while cols.len() < dim {
            let mut v: Vec<Complex> = (0..dim)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            for u in &cols {
                let proj: Complex = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(u).for_each(|(x, a)| *x -= proj * a);
            }
            let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if n < 1e-6 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= n);
            cols.push(v);
        }
        let mut entries = vec![ZERO; dim * dim];
        for (c, col) in cols.iter().enumerate() {
            for (r, x) in col.iter().enumerate() {
                entries[r * dim + c] = *x;
            }
        }
        GateMatrix { dim, entries }
    }

    /// Up to `max_gates` random 1- and 2-qubit unitaries on distinct random targets.
    pub fn random_circuit<R: Rng + ?Sized>(
        n_qubits: usize,
        n_gates: usize,
        rng: &mut R,
    ) -> Vec<(GateMatrix, Vec<usize>)> {
        (0..n_gates)
            .map(|_| {
                let k = if n_qubits >= 2 && rng.gen_bool(0.5) {
                    2
                } else {
                    1
                };
                let mut targets = Vec::with_capacity(k);
                while targets.len() < k {
                    let t = rng.gen_range(0..n_qubits);
                    if !targets.contains(&t) {
                        targets.push(t);
                    }
                }
                (random_unitary(1 << k, rng), targets)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::sampling::*;
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn u3_special_values() {
        assert!(
            u3_matrix(U3Params::new(0.0, 0.0, 0.0)).max_abs_diff(&GateMatrix::identity(2)) < 1e-15
        );
        let x = u3_matrix(U3Params::new(PI, 0.0, PI));
        assert!(x.max_abs_diff(&fixed_gates().x) < 1e-15);
    }

    #[test]
    fn u3_derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_u3(&mut rng);
            let ds = u3_derivatives(p);
            let h = 1e-6;
            for (k, d) in ds.iter().enumerate() {
                let mut plus = [p.theta, p.phi, p.lambda];
                let mut minus = plus;
                plus[k] += h;
                minus[k] -= h;
                let fd = u3_matrix(U3Params::from_slice(&plus))
                    .add(&u3_matrix(U3Params::from_slice(&minus)).scale(c(-1.0, 0.0)))
                    .scale(c(0.5 / h, 0.0));
                assert!(fd.max_abs_diff(d) < 1e-8);
            }
        }
    }

    #[test]
    fn axis_rotation_cases() {
        assert!(
            axis_rotation_matrix(0.0, Axis::normalized(1.0, 2.0, 3.0).unwrap())
                .unwrap()
                .max_abs_diff(&GateMatrix::identity(2))
                < 1e-15
        );
        let rz_pi = axis_rotation_matrix(PI, Axis::Z).unwrap();
        let expected = GateMatrix::from_2x2([[c(0.0, -1.0), ZERO], [ZERO, c(0.0, 1.0)]]);
        assert!(rz_pi.max_abs_diff(&expected) < 1e-15);
        let bad = Axis {
            nx: 1.0,
            ny: 1.0,
            nz: 0.0,
        };
        assert!(matches!(
            axis_rotation_matrix(0.3, bad),
            Err(Error::AxisNotNormalized(_))
        ));
    }

    #[test]
    fn z_rotation_equals_u3_phase_gate_up_to_global_phase() {
        for k in 0..25 {
            let alpha = -3.0 + 0.25 * k as f64;
            let r = axis_rotation_matrix(alpha, Axis::Z).unwrap();
            let u = u3_matrix(U3Params::new(0.0, 0.0, alpha));
            assert!(r.max_abs_diff_up_to_phase(&u) < 1e-12, "alpha={alpha}");
            // a phase-sensitive comparison must not agree
            if (alpha / 2.0).sin().abs() > 0.1 {
                assert!(r.max_abs_diff(&u) > 1e-3);
            }
        }
    }

    #[test]
    fn ising_closed_forms() {
        let t = 0.73;
        let zz = ising_matrix(IsingKind::ZZ, t);
        let (m, p) = (
            Complex::from_polar(1.0, -t / 2.0),
            Complex::from_polar(1.0, t / 2.0),
        );
        for (i, d) in [m, p, p, m].into_iter().enumerate() {
            for j in 0..4 {
                let want = if i == j { d } else { ZERO };
                assert!((zz.get(i, j) - want).norm() < 1e-15);
            }
        }
        assert!(ising_matrix(IsingKind::XX, 0.0).max_abs_diff(&GateMatrix::identity(4)) < 1e-15);
    }

    /// Truncated Taylor series of exp(A); the oracle for the closed-form Ising gates.
    fn expm_series(a: &GateMatrix) -> GateMatrix {
        let mut term = GateMatrix::identity(a.dim());
        let mut sum = term.clone();
        for k in 1..40 {
            term = term.matmul(a).scale(c(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        sum
    }

    #[test]
    fn ising_yy_matches_series_exponential() {
        let yy = Pauli::Y.matrix().kron(&Pauli::Y.matrix());
        for t in [-2.9, -0.4, 0.0, 0.31, 1.7, 3.1] {
            let oracle = expm_series(&yy.scale(c(0.0, -t / 2.0)));
            assert!(ising_matrix(IsingKind::YY, t).max_abs_diff(&oracle) < 1e-12);
        }
    }

    #[test]
    fn fixed_gate_actions() {
        let g = fixed_gates();
        let one = StateVector::basis(1, 0)
            .and_then(|s| apply_gate(s, &g.x, &[0]))
            .unwrap();
        assert_eq!(one.amplitudes(), &[ZERO, ONE]);
        assert!(g.h.matmul(&g.h).max_abs_diff(&GateMatrix::identity(2)) < 1e-15);
        // |c t⟩ = |10⟩: control qubit 1 set, target qubit 0 clear -> index 2
        let s = StateVector::basis(2, 0b10).unwrap();
        let s = apply_gate(s, &g.cnot, &[1, 0]).unwrap();
        assert_eq!(s.amplitudes()[0b11], ONE);
    }

    #[test]
    fn apply_x_and_identity() {
        let s = apply_gate(StateVector::zero(2), &fixed_gates().x, &[0]).unwrap();
        assert_eq!(s.amplitudes()[1], ONE);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_state(3, &mut rng);
        let t = apply_gate(s.clone(), &GateMatrix::identity(4), &[2, 0]).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn apply_errors() {
        let x = fixed_gates().x;
        assert!(matches!(
            apply_gate(StateVector::zero(2), &x, &[2]),
            Err(Error::TargetOutOfRange { qubit: 2, .. })
        ));
        assert!(matches!(
            apply_gate(StateVector::zero(2), &GateMatrix::identity(4), &[1, 1]),
            Err(Error::DuplicateTarget(1))
        ));
        assert!(matches!(
            apply_gate(StateVector::zero(2), &x, &[0, 1]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            readout_prob_one(&StateVector::zero(2), 5),
            Err(Error::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn controlled_gates() {
        let g = fixed_gates();
        assert_eq!(controlled(&g.x).unwrap(), g.cnot);
        assert!(
            controlled(&GateMatrix::identity(2))
                .unwrap()
                .max_abs_diff(&GateMatrix::identity(4))
                < 1e-15
        );
        let not_unitary = GateMatrix::identity(2).scale(c(2.0, 0.0));
        assert!(matches!(
            controlled(&not_unitary),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn controlled_u3_with_control_zero_leaves_target_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let cu = controlled(&u3_matrix(random_u3(&mut rng))).unwrap();
            // control qubit 1 in |0⟩, target qubit 0 in a random state
            let target = random_state(1, &mut rng);
            let amps = vec![target.amplitudes()[0], target.amplitudes()[1], ZERO, ZERO];
            let s = StateVector::from_amplitudes(amps).unwrap();
            let before = readout_prob_one(&s, 0).unwrap();
            let out = apply_gate(s.clone(), &cu, &[1, 0]).unwrap();
            assert!((readout_prob_one(&out, 0).unwrap() - before).abs() < 1e-12);
            assert!(out.max_diff(&s) < 1e-15);
        }
    }

    #[test]
    fn readout_cases() {
        assert_eq!(readout_prob_one(&StateVector::zero(3), 1).unwrap(), 0.0);
        let h = apply_gate(StateVector::zero(1), &fixed_gates().h, &[0]).unwrap();
        assert!((readout_prob_one(&h, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn oracle_simple_cases() {
        let x = fixed_gates().x;
        let full = dense_circuit_oracle(&[(x.clone(), vec![0])], 2).unwrap();
        assert!(full.max_abs_diff(&GateMatrix::identity(2).kron(&x)) < 1e-15);
        assert_eq!(
            dense_circuit_oracle(&[], 3).unwrap(),
            GateMatrix::identity(8)
        );
        assert!(matches!(
            dense_circuit_oracle(&[], 11),
            Err(Error::TooManyQubits(11))
        ));
    }

    #[test]
    fn random_two_qubit_gate_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(4, &mut rng);
        let s = random_state(4, &mut rng);
        let full = dense_circuit_oracle(&[(u.clone(), vec![3, 1])], 4).unwrap();
        let want = full.mul_vec(s.amplitudes());
        let got = apply_gate(s, &u, &[3, 1]).unwrap();
        let diff = got
            .amplitudes()
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    impl StateVector {
        fn max_diff(&self, other: &StateVector) -> f64 {
            self.amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        }
    }

    proptest! {
        #[test]
        fn apply_preserves_norm(seed in any::<u64>(), n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = random_state(n, &mut rng);
            for (g, t) in random_circuit(n, 6, &mut rng) {
                s.apply(&g, &t).unwrap();
            }
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn disjoint_gates_commute(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_state(3, &mut rng);
            let (g1, g2) = (random_unitary(2, &mut rng), random_unitary(2, &mut rng));
            let a = apply_gate(apply_gate(s.clone(), &g1, &[0]).unwrap(), &g2, &[2]).unwrap();
            let b = apply_gate(apply_gate(s, &g2, &[2]).unwrap(), &g1, &[0]).unwrap();
            prop_assert!(a.max_diff(&b) < 1e-12);
        }

        #[test]
        fn readout_complements(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_state(n, &mut rng);
            for q in 0..n {
                let p1 = readout_prob_one(&s, q).unwrap();
                let p0: f64 = s.amplitudes().iter().enumerate()
                    .filter(|(i, _)| i >> q & 1 == 0).map(|(_, a)| a.norm_sqr()).sum();
                prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p1));
            }
        }
    }
}
