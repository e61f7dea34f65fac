//! Quantum convolutional neural network circuit.
//!
//! One depth is a shared-weight convolution over neighbouring active wires
//! followed by pooling, which conditions a U3 on every odd-position wire and
//! keeps the even-position wires. Pooling is realized with controlled gates,
//! so a forward pass is a single pure-state evolution. After the last depth a
//! Pauli-word rotation layer with `4^r − 1` angles acts on the `r` remaining
//! wires and the first of them is read out.

use std::ops::Range;

use crate::embedding::amplitude_embed;
use crate::error::{Error, Result};
use crate::simulator::{
    controlled_block, ising_derivative, ising_matrix, pauli_rotation_derivative,
    pauli_rotation_matrix, readout_prob_one, u3_derivatives, u3_matrix, Complex, GateMatrix,
    IsingKind, Pauli, StateVector, U3Params,
};

pub const CONV_WEIGHTS: usize = 15;
pub const POOL_WEIGHTS: usize = 3;
pub const WEIGHTS_PER_DEPTH: usize = CONV_WEIGHTS + POOL_WEIGHTS;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QcnnArchitecture {
    pub n_qubits: usize,
    pub depth: usize,
    /// Wires entering each depth's convolution.
    pub active_wires_per_depth: Vec<Vec<usize>>,
    pub remaining_wires: Vec<usize>,
    pub param_count: usize,
}

/// `18·d + 4^r − 1`.
pub fn param_count_formula(depth: usize, remaining: usize) -> usize {
    WEIGHTS_PER_DEPTH * depth + flatten_param_count(remaining)
}

pub fn flatten_param_count(remaining: usize) -> usize {
    (1usize << (2 * remaining)) - 1
}

/// Wires kept by pooling: the even positions of `wires`.
pub fn pool_survivors(wires: &[usize]) -> Vec<usize> {
    wires.iter().step_by(2).copied().collect()
}

pub fn build_architecture(n_qubits: usize, depth: usize) -> Result<QcnnArchitecture> {
    if n_qubits < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "need at least 2 qubits, got {n_qubits}"
        )));
    }
    let mut active: Vec<usize> = (0..n_qubits).collect();
    let mut per_depth = Vec::with_capacity(depth);
    for _ in 0..depth {
        if active.len() < 2 {
            return Err(Error::TooDeep { n_qubits, depth });
        }
        per_depth.push(active.clone());
        active = pool_survivors(&active);
    }
    Ok(QcnnArchitecture {
        n_qubits,
        depth,
        param_count: param_count_formula(depth, active.len()),
        active_wires_per_depth: per_depth,
        remaining_wires: active,
    })
}

impl QcnnArchitecture {
    pub fn readout_wire(&self) -> usize {
        self.remaining_wires[0]
    }

    pub fn flatten_len(&self) -> usize {
        flatten_param_count(self.remaining_wires.len())
    }

    /// Compiles the whole network into a gate list over the flat parameter vector.
    pub fn circuit(&self) -> Circuit {
        let mut b = CircuitBuilder::new(self.n_qubits);
        for (d, wires) in self.active_wires_per_depth.iter().enumerate() {
            let conv = b.reserve(CONV_WEIGHTS, LayerKind::Conv(d));
            b.conv(wires, conv.start, d == 0);
            let pool = b.reserve(POOL_WEIGHTS, LayerKind::Pool(d));
            b.pool(wires, pool.start);
        }
        let flat = b.reserve(self.flatten_len(), LayerKind::Flatten);
        b.flatten(&self.remaining_wires, flat.start);
        b.finish(self.readout_wire())
    }
}

/// Weights of a network, split by role.
#[derive(Clone, Debug, PartialEq)]
pub struct QcnnParams {
    pub conv_pool_weights: Vec<[f64; WEIGHTS_PER_DEPTH]>,
    pub flatten_weights: Vec<f64>,
}

impl QcnnParams {
    pub fn zeros(arch: &QcnnArchitecture) -> Self {
        Self {
            conv_pool_weights: vec![[0.0; WEIGHTS_PER_DEPTH]; arch.depth],
            flatten_weights: vec![0.0; arch.flatten_len()],
        }
    }

    /// Splits a flat vector laid out as depth 0, …, depth d−1, flatten.
    pub fn from_flat(arch: &QcnnArchitecture, flat: &[f64]) -> Result<Self> {
        if flat.len() != arch.param_count {
            return Err(Error::WeightLengthMismatch {
                expected: arch.param_count,
                got: flat.len(),
            });
        }
        let split = arch.depth * WEIGHTS_PER_DEPTH;
        let conv_pool_weights = flat[..split]
            .chunks_exact(WEIGHTS_PER_DEPTH)
            .map(|c| c.try_into().expect("chunk of 18"))
            .collect();
        Ok(Self {
            conv_pool_weights,
            flatten_weights: flat[split..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.conv_pool_weights
            .iter()
            .flatten()
            .chain(&self.flatten_weights)
            .copied()
            .collect()
    }

    /// One decimal radian per line; values round-trip exactly.
    pub fn to_csv(&self) -> String {
        self.to_flat().iter().map(|v| format!("{v:?}\n")).collect()
    }

    pub fn from_csv(arch: &QcnnArchitecture, text: &str) -> Result<Self> {
        let flat = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<f64>().map_err(|e| Error::Malformed {
                    path: "<params>".into(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_flat(arch, &flat)
    }
}

/// A gate whose angles are read from the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub enum GateOp {
    U3 {
        wire: usize,
        params: [usize; 3],
    },
    Ising {
        kind: IsingKind,
        wires: [usize; 2],
        param: usize,
    },
    /// U3 on `target`, conditioned on `control` being `|1⟩`.
    ControlledU3 {
        control: usize,
        target: usize,
        params: [usize; 3],
    },
    /// `exp(−i·θ/2·P)` with `word[k]` acting on `wires[k]`.
    PauliRotation {
        word: Vec<Pauli>,
        wires: Vec<usize>,
        param: usize,
    },
}

impl GateOp {
    pub fn targets(&self) -> Vec<usize> {
        match self {
            GateOp::U3 { wire, .. } => vec![*wire],
            GateOp::Ising { wires, .. } => wires.to_vec(),
            GateOp::ControlledU3 {
                control, target, ..
            } => vec![*control, *target],
            GateOp::PauliRotation { wires, .. } => wires.clone(),
        }
    }

    pub fn param_indices(&self) -> &[usize] {
        match self {
            GateOp::U3 { params, .. } | GateOp::ControlledU3 { params, .. } => params,
            GateOp::Ising { param, .. } | GateOp::PauliRotation { param, .. } => {
                std::slice::from_ref(param)
            }
        }
    }

    fn u3(params: &[usize; 3], w: &[f64]) -> U3Params {
        U3Params::new(w[params[0]], w[params[1]], w[params[2]])
    }

    pub fn matrix(&self, w: &[f64]) -> GateMatrix {
        match self {
            GateOp::U3 { params, .. } => u3_matrix(Self::u3(params, w)),
            GateOp::Ising { kind, param, .. } => ising_matrix(*kind, w[*param]),
            GateOp::ControlledU3 { params, .. } => {
                controlled_block(&u3_matrix(Self::u3(params, w)), Complex::new(1.0, 0.0))
            }
            GateOp::PauliRotation { word, param, .. } => pauli_rotation_matrix(word, w[*param]),
        }
    }

    /// Derivatives with respect to each entry of [`GateOp::param_indices`], in order.
    pub fn derivatives(&self, w: &[f64]) -> Vec<GateMatrix> {
        match self {
            GateOp::U3 { params, .. } => u3_derivatives(Self::u3(params, w)).to_vec(),
            GateOp::Ising { kind, param, .. } => vec![ising_derivative(*kind, w[*param])],
            GateOp::ControlledU3 { params, .. } => u3_derivatives(Self::u3(params, w))
                .iter()
                .map(|d| controlled_block(d, Complex::new(0.0, 0.0)))
                .collect(),
            GateOp::PauliRotation { word, param, .. } => {
                vec![pauli_rotation_derivative(word, w[*param])]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv(usize),
    Pool(usize),
    Flatten,
}

/// A compiled gate list plus the parameter block each layer owns.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub n_qubits: usize,
    pub ops: Vec<GateOp>,
    pub readout: usize,
    pub layout: Vec<(LayerKind, Range<usize>)>,
}

impl Circuit {
    /// Total parameter slots handed out to layers.
    pub fn param_slots(&self) -> usize {
        self.layout.iter().map(|(_, r)| r.len()).sum()
    }

    /// Matrices of every op at the given parameters.
    pub fn bind(&self, w: &[f64]) -> Result<Vec<GateMatrix>> {
        if w.len() != self.param_slots() {
            return Err(Error::WeightLengthMismatch {
                expected: self.param_slots(),
                got: w.len(),
            });
        }
        Ok(self.ops.iter().map(|op| op.matrix(w)).collect())
    }

    /// Runs bound matrices on `state`.
    pub fn run(&self, bound: &[GateMatrix], state: &mut StateVector) -> Result<()> {
        for (op, m) in self.ops.iter().zip(bound) {
            state.apply(m, &op.targets())?;
        }
        Ok(())
    }
}

struct CircuitBuilder {
    n_qubits: usize,
    ops: Vec<GateOp>,
    layout: Vec<(LayerKind, Range<usize>)>,
    next_param: usize,
}

impl CircuitBuilder {
    fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
            layout: Vec::new(),
            next_param: 0,
        }
    }

    fn reserve(&mut self, len: usize, kind: LayerKind) -> Range<usize> {
        let r = self.next_param..self.next_param + len;
        self.next_param += len;
        self.layout.push((kind, r.clone()));
        r
    }

    fn u3(&mut self, wire: usize, first: usize) {
        self.ops.push(GateOp::U3 {
            wire,
            params: [first, first + 1, first + 2],
        });
    }

    fn conv(&mut self, wires: &[usize], offset: usize, first_depth: bool) {
        for parity in 0..2 {
            for i in (parity..wires.len().saturating_sub(1)).step_by(2) {
                let (a, b) = (wires[i], wires[i + 1]);
                if parity == 0 && first_depth {
                    self.u3(a, offset);
                    self.u3(b, offset + 3);
                }
                for (k, kind) in [IsingKind::XX, IsingKind::YY, IsingKind::ZZ]
                    .into_iter()
                    .enumerate()
                {
                    self.ops.push(GateOp::Ising {
                        kind,
                        wires: [a, b],
                        param: offset + 6 + k,
                    });
                }
                self.u3(a, offset + 9);
                self.u3(b, offset + 12);
            }
        }
    }

    fn pool(&mut self, wires: &[usize], offset: usize) {
        for j in (1..wires.len()).step_by(2) {
            self.ops.push(GateOp::ControlledU3 {
                control: wires[j],
                target: wires[j - 1],
                params: [offset, offset + 1, offset + 2],
            });
        }
    }

    fn flatten(&mut self, wires: &[usize], offset: usize) {
        for (k, word) in pauli_words(wires.len()).into_iter().enumerate() {
            self.ops.push(GateOp::PauliRotation {
                word,
                wires: wires.to_vec(),
                param: offset + k,
            });
        }
    }

    fn finish(self, readout: usize) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            ops: self.ops,
            readout,
            layout: self.layout,
        }
    }
}

/// Non-identity Pauli words of length `r` in lexicographic order (I < X < Y < Z).
pub fn pauli_words(r: usize) -> Vec<Vec<Pauli>> {
    (1..1usize << (2 * r))
        .map(|code| {
            (0..r)
                .map(|pos| Pauli::ALL[code >> (2 * (r - 1 - pos)) & 3])
                .collect()
        })
        .collect()
}

fn check_len(w: &[f64], expected: usize) -> Result<()> {
    if w.len() != expected {
        return Err(Error::WeightLengthMismatch {
            expected,
            got: w.len(),
        });
    }
    Ok(())
}

fn check_wires(state: &StateVector, wires: &[usize], min: usize) -> Result<()> {
    if wires.len() < min {
        return Err(Error::InvalidArchitecture(format!(
            "layer needs at least {min} wires, got {}",
            wires.len()
        )));
    }
    if let Some(&w) = wires.iter().find(|&&w| w >= state.n_qubits()) {
        return Err(Error::TargetOutOfRange {
            qubit: w,
            n_qubits: state.n_qubits(),
        });
    }
    Ok(())
}

fn run_builder(b: CircuitBuilder, w: &[f64], state: &mut StateVector) -> Result<()> {
    let c = b.finish(0);
    for op in &c.ops {
        state.apply(&op.matrix(w), &op.targets())?;
    }
    Ok(())
}

/// Shared-weight convolution on `wires`; `first_depth` enables the leading U3 pair.
pub fn conv_layer(
    mut state: StateVector,
    weights: &[f64],
    wires: &[usize],
    first_depth: bool,
) -> Result<StateVector> {
    check_len(weights, CONV_WEIGHTS)?;
    check_wires(&state, wires, 2)?;
    let mut b = CircuitBuilder::new(state.n_qubits());
    b.conv(wires, 0, first_depth);
    run_builder(b, weights, &mut state)?;
    Ok(state)
}

/// Pooling by controlled U3 from each odd-position wire onto its left neighbour.
pub fn pool_layer(
    mut state: StateVector,
    weights: &[f64],
    wires: &[usize],
) -> Result<(StateVector, Vec<usize>)> {
    check_len(weights, POOL_WEIGHTS)?;
    check_wires(&state, wires, 2)?;
    let mut b = CircuitBuilder::new(state.n_qubits());
    b.pool(wires, 0);
    run_builder(b, weights, &mut state)?;
    Ok((state, pool_survivors(wires)))
}

pub fn flatten_layer(
    mut state: StateVector,
    weights: &[f64],
    wires: &[usize],
) -> Result<StateVector> {
    check_len(weights, flatten_param_count(wires.len()))?;
    check_wires(&state, wires, 1)?;
    let mut b = CircuitBuilder::new(state.n_qubits());
    b.flatten(wires, 0);
    run_builder(b, weights, &mut state)?;
    Ok(state)
}

/// Final state of the network on an image.
pub fn forward_state(
    arch: &QcnnArchitecture,
    params: &QcnnParams,
    pixels: &[f64],
) -> Result<StateVector> {
    if params.conv_pool_weights.len() != arch.depth {
        return Err(Error::WeightLengthMismatch {
            expected: arch.depth * WEIGHTS_PER_DEPTH,
            got: params.conv_pool_weights.len() * WEIGHTS_PER_DEPTH,
        });
    }
    let mut state = amplitude_embed(pixels, arch.n_qubits)?;
    for (d, (wires, w)) in arch
        .active_wires_per_depth
        .iter()
        .zip(&params.conv_pool_weights)
        .enumerate()
    {
        state = conv_layer(state, &w[..CONV_WEIGHTS], wires, d == 0)?;
        state = pool_layer(state, &w[CONV_WEIGHTS..], wires)?.0;
    }
    flatten_layer(state, &params.flatten_weights, &arch.remaining_wires)
}

/// Probability of reading `1` on the readout wire.
pub fn forward(arch: &QcnnArchitecture, params: &QcnnParams, pixels: &[f64]) -> Result<f64> {
    let state = forward_state(arch, params, pixels)?;
    readout_prob_one(&state, arch.readout_wire())
}

/// Class 1 iff `p1 > 0.5`.
pub fn predict(p1: f64) -> u8 {
    u8::from(p1 > 0.5)
}

/// Reference semantics for pooling with explicit mid-circuit measurement.
pub mod oracle {
    use super::*;

    /// Zeroes the amplitudes where `qubit` differs from `outcome` and returns
    /// the probability of the kept branch.
    fn project(state: &mut StateVector, qubit: usize, outcome: bool) -> f64 {
        let mut kept = 0.0;
        for (i, a) in state.amplitudes_mut().iter_mut().enumerate() {
            if (i >> qubit & 1 == 1) == outcome {
                kept += a.norm_sqr();
            } else {
                *a = Complex::new(0.0, 0.0);
            }
        }
        kept
    }

    /// Measures every odd-position wire at each pooling step, applies the
    /// pooling U3 only in the `1` branch, and averages the final readout over
    /// all branches weighted by their probabilities.
    pub fn branch_forward(
        arch: &QcnnArchitecture,
        params: &QcnnParams,
        pixels: &[f64],
    ) -> Result<f64> {
        let mut branches = vec![(1.0, amplitude_embed(pixels, arch.n_qubits)?)];
        for (d, (wires, w)) in arch
            .active_wires_per_depth
            .iter()
            .zip(&params.conv_pool_weights)
            .enumerate()
        {
            let mut next = Vec::with_capacity(branches.len());
            for (p, s) in branches {
                next.push((p, conv_layer(s, &w[..CONV_WEIGHTS], wires, d == 0)?));
            }
            branches = next;
            let pool_gate = u3_matrix(U3Params::from_slice(&w[CONV_WEIGHTS..]));
            for j in (1..wires.len()).step_by(2) {
                let mut next = Vec::with_capacity(branches.len() * 2);
                for (p, s) in branches {
                    for outcome in [false, true] {
                        let mut b = s.clone();
                        let kept = project(&mut b, wires[j], outcome);
                        if kept <= 1e-300 {
                            continue;
                        }
                        let scale = 1.0 / kept.sqrt();
                        b.amplitudes_mut().iter_mut().for_each(|a| *a *= scale);
                        if outcome {
                            b.apply(&pool_gate, &[wires[j - 1]])?;
                        }
                        next.push((p * kept, b));
                    }
                }
                branches = next;
            }
        }
        let mut p1 = 0.0;
        for (p, s) in branches {
            let s = flatten_layer(s, &params.flatten_weights, &arch.remaining_wires)?;
            p1 += p * readout_prob_one(&s, arch.readout_wire())?;
        }
        Ok(p1)
    }
}
