//! Classical-to-quantum feature maps.

use crate::error::{Error, Result};
use crate::simulator::{Complex, StateVector};

/// Amplitude embedding: `amps[i] = pixels[i] / ‖pixels‖`, zero-padded to `2^n_qubits`.
pub fn amplitude_embed(pixels: &[f64], n_qubits: usize) -> Result<StateVector> {
    let dim = 1usize << n_qubits;
    if pixels.len() > dim {
        return Err(Error::RegisterTooSmall {
            n_pixels: pixels.len(),
            n_qubits,
        });
    }
    if let Some(&bad) = pixels.iter().find(|v| !v.is_finite()) {
        return Err(Error::OutOfRange(bad));
    }
    let norm = pixels.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::AllZeroImage);
    }
    let mut amps = vec![Complex::new(0.0, 0.0); dim];
    for (a, &p) in amps.iter_mut().zip(pixels) {
        a.re = p / norm;
    }
    StateVector::from_amplitudes(amps)
}

/// Single-qubit angle embedding of `x ∈ [0, 1]` rescaled to `[0, π]`.
pub fn qubit_embed(x: f64) -> Result<StateVector> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(x));
    }
    let (s, c) = (std::f64::consts::PI * x / 2.0).sin_cos();
    StateVector::from_amplitudes(vec![Complex::new(c, 0.0), Complex::new(s, 0.0)])
}

/// Smallest register that holds `n_values` amplitudes.
pub fn qubits_for(n_values: usize) -> usize {
    n_values.next_power_of_two().trailing_zeros() as usize
}
