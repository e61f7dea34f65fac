//! Quick numerical self-checks: gate algebra, simulator against a dense
//! oracle, deferred measurement, gradients and augmentation invariants.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{contrast, draw, rotate, AugmentConfig};
use crate::datasets::ImageSample;
use crate::embedding::amplitude_embed;
use crate::error::Result;
use crate::qcnn::{build_architecture, forward, oracle::branch_forward, QcnnParams};
use crate::simulator::sampling::{random_circuit, random_state, random_u3};
use crate::simulator::*;
use crate::training::{grad_exact, grad_fd, mse_loss};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, tol: f64) -> Check {
    Check {
        name,
        passed: value <= tol,
        detail: format!("max error {value:.3e} (tolerance {tol:.0e})"),
    }
}

fn gate_unitarity(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    let angle = |rng: &mut ChaCha8Rng| rng.gen_range(-2.0 * PI..2.0 * PI);
    for _ in 0..200 {
        let a = angle(rng);
        let (x, y, z) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let axis = Axis::normalized(x, y, z + 1e-3)?;
        let u3 = u3_matrix(random_u3(rng));
        let gates = [
            axis_rotation_matrix(a, axis)?,
            ising_matrix(IsingKind::XX, a),
            ising_matrix(IsingKind::YY, a),
            ising_matrix(IsingKind::ZZ, a),
            controlled(&u3)?,
            u3,
        ];
        worst = gates
            .iter()
            .map(GateMatrix::unitarity_error)
            .fold(worst, f64::max);
    }
    Ok(check("gate unitarity", worst, 1e-10))
}

fn oracle_equivalence(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=6);
        let n_gates = rng.gen_range(1..=8);
        let circuit = random_circuit(n, n_gates, rng);
        let psi = random_state(n, rng);
        let dense = dense_circuit_oracle(&circuit, n)?.mul_vec(psi.amplitudes());
        let mut state = psi;
        for (g, t) in &circuit {
            state.apply(g, t)?;
        }
        for (a, b) in state.amplitudes().iter().zip(&dense) {
            worst = worst.max((a - b).norm());
        }
    }
    Ok(check("simulator vs dense oracle", worst, 1e-10))
}

fn random_params(
    n: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(crate::qcnn::QcnnArchitecture, QcnnParams)> {
    let arch = build_architecture(n, d)?;
    let flat: Vec<f64> = (0..arch.param_count)
        .map(|_| rng.gen_range(-PI..PI))
        .collect();
    let params = QcnnParams::from_flat(&arch, &flat)?;
    Ok((arch, params))
}

fn deferred_measurement(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for (n, d) in [(4, 1), (6, 2)] {
        for _ in 0..20 {
            let (arch, params) = random_params(n, d, rng)?;
            let pixels: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a = forward(&arch, &params, &pixels)?;
            let b = branch_forward(&arch, &params, &pixels)?;
            worst = worst.max((a - b).abs());
        }
    }
    Ok(check("deferred measurement", worst, 1e-12))
}

fn gradients(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for (n, d) in [(4, 1), (6, 2)] {
        let (arch, params) = random_params(n, d, rng)?;
        let batch: Vec<ImageSample> = (0..3)
            .map(|i| {
                let pixels = (0..1 << n).map(|_| rng.gen_range(0.0..1.0)).collect();
                ImageSample::new(1, 1 << n, pixels, (i % 2) as u8)
            })
            .collect();
        let exact = grad_exact(&arch, &params, &batch)?;
        let labels: Vec<u8> = batch.iter().map(|s| s.label).collect();
        let loss = |flat: &[f64]| {
            let p = QcnnParams::from_flat(&arch, flat).expect("length fixed");
            let p1s: Vec<f64> = batch
                .iter()
                .map(|s| forward(&arch, &p, &s.pixels).expect("valid input"))
                .collect();
            mse_loss(&p1s, &labels).expect("matching lengths")
        };
        let fd = grad_fd(loss, &params.to_flat(), 1e-4);
        worst = exact
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).abs())
            .fold(worst, f64::max);
    }
    Ok(check("exact gradient vs finite differences", worst, 1e-6))
}

fn parameter_count() -> Result<Check> {
    let arch = build_architecture(10, 2)?;
    Ok(Check {
        name: "parameter count (10 qubits, depth 2)",
        passed: arch.param_count == 99 && arch.circuit().param_slots() == 99,
        detail: format!("{} parameters", arch.param_count),
    })
}

fn augmentation(rng: &mut ChaCha8Rng) -> Result<Check> {
    let cfg = AugmentConfig {
        flip_horizontal: true,
        rotation: true,
        contrast: true,
        ..AugmentConfig::disabled()
    };
    let mut ok = true;
    for _ in 0..1000 {
        let d = draw(&cfg, rng);
        let a = d.angle.unwrap_or(0.0);
        let f = d.factor.unwrap_or(1.0);
        ok &= (-0.05..0.05).contains(&a) && (0.9..1.1).contains(&f);
    }
    let img = ImageSample::new(8, 8, (0..64).map(|_| rng.gen_range(0.0..1.0)).collect(), 0);
    ok &= rotate(&img, 0.0, &cfg)? == img;
    ok &= contrast(&img, 1.0, &cfg)? == img;
    Ok(Check {
        name: "augmentation bounds and identities",
        passed: ok,
        detail: if ok {
            "all draws in range".into()
        } else {
            "violation found".into()
        },
    })
}

fn embedding_norm(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pixels: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..16.0)).collect();
        worst = worst.max((amplitude_embed(&pixels, 6)?.norm() - 1.0).abs());
    }
    Ok(check("embedding norm", worst, 1e-12))
}

/// Runs every check with a fixed seed.
pub fn run() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    Ok(vec![
        gate_unitarity(&mut rng)?,
        oracle_equivalence(&mut rng)?,
        deferred_measurement(&mut rng)?,
        gradients(&mut rng)?,
        parameter_count()?,
        augmentation(&mut rng)?,
        embedding_norm(&mut rng)?,
    ])
}
