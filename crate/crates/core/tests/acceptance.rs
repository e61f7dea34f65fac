//! Acceptance suite. Runs every criterion in order and prints one PASS/FAIL
//! line each; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64 as C;
use qcnn_lab::augment::{augment_sample, contrast, draw, flip_h, rotate, AugmentConfig};
use qcnn_lab::cnn::{loss_and_grad_at, CnnArchitecture, CnnModel};
use qcnn_lab::datasets::{Dataset, ImageSample};
use qcnn_lab::harness::{
    compare_da, comparison_files, experiment_files, load_dataset, run_experiment, write_outputs,
    ConfigMap, ExperimentConfig, ExperimentRun,
};
use qcnn_lab::qcnn::{build_architecture, forward, oracle::branch_forward, QcnnParams};
use qcnn_lab::simulator::sampling::{random_circuit, random_state, random_u3};
use qcnn_lab::simulator::*;
use qcnn_lab::training::grad_exact;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn evidence_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name)
}

fn desk_config(name: &str) -> ExperimentConfig {
    let mut map =
        ConfigMap::load(repo_root().join("configs/desk").join(name)).expect("desk config");
    let digits = repo_root().join("data/digits.csv");
    map.set("digits_path", digits.display().to_string())
        .unwrap();
    ExperimentConfig::from_map(&map).expect("valid desk config")
}

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Dense row-major matrix used by the independent oracles below.
type Dense = Vec<Vec<C>>;

fn to_dense(g: &GateMatrix) -> Dense {
    (0..g.dim())
        .map(|r| (0..g.dim()).map(|col| g.get(r, col)).collect())
        .collect()
}

fn max_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn unitarity_error(g: &GateMatrix) -> f64 {
    let u = to_dense(g);
    let n = u.len();
    let udag: Dense = (0..n)
        .map(|i| (0..n).map(|j| u[j][i].conj()).collect())
        .collect();
    let prod = dense_mul(&udag, &u);
    let eye: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) })
                .collect()
        })
        .collect();
    max_diff(&prod, &eye)
}

fn pauli(p: char) -> Dense {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match p {
        'I' => vec![vec![o, z], vec![z, o]],
        'X' => vec![vec![z, o], vec![o, z]],
        'Y' => vec![vec![z, -i], vec![i, z]],
        'Z' => vec![vec![o, z], vec![z, -o]],
        _ => unreachable!(),
    }
}

fn kron(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.len());
    (0..n * m)
        .map(|r| {
            (0..n * m)
                .map(|col| a[r / m][col / m] * b[r % m][col % m])
                .collect()
        })
        .collect()
}

/// `cos(t/2)·I − i·sin(t/2)·P` for an involutory `P`.
fn rotation_closed_form(p: &Dense, t: f64) -> Dense {
    let (s, co) = (t / 2.0).sin_cos();
    let n = p.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let id = if i == j { co } else { 0.0 };
                    c(id, 0.0) - c(0.0, s) * p[i][j]
                })
                .collect()
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut unitarity = 0.0f64;
    let mut closed = 0.0f64;
    let angle = |rng: &mut ChaCha8Rng| rng.gen_range(-4.0 * PI..4.0 * PI);
    for _ in 0..1000 {
        let p = random_u3(&mut rng);
        let g = u3_matrix(p);
        let (s, co) = (p.theta / 2.0).sin_cos();
        let expect = vec![
            vec![c(co, 0.0), -C::from_polar(s, p.lambda)],
            vec![C::from_polar(s, p.phi), C::from_polar(co, p.phi + p.lambda)],
        ];
        unitarity = unitarity.max(unitarity_error(&g));
        closed = closed.max(max_diff(&to_dense(&g), &expect));

        let a = angle(&mut rng);
        let v: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let axis = Axis::normalized(v[0], v[1], v[2]).unwrap();
        let g = axis_rotation_matrix(a, axis).unwrap();
        let (px, py, pz) = (pauli('X'), pauli('Y'), pauli('Z'));
        let ndotsigma: Dense = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| (px[i][j] * v[0] + py[i][j] * v[1] + pz[i][j] * v[2]) / norm)
                    .collect()
            })
            .collect();
        unitarity = unitarity.max(unitarity_error(&g));
        closed = closed.max(max_diff(
            &to_dense(&g),
            &rotation_closed_form(&ndotsigma, a),
        ));

        for (kind, p) in [
            (IsingKind::XX, 'X'),
            (IsingKind::YY, 'Y'),
            (IsingKind::ZZ, 'Z'),
        ] {
            let t = angle(&mut rng);
            let g = ising_matrix(kind, t);
            unitarity = unitarity.max(unitarity_error(&g));
            closed = closed.max(max_diff(
                &to_dense(&g),
                &rotation_closed_form(&kron(&pauli(p), &pauli(p)), t),
            ));
            if kind == IsingKind::ZZ {
                let (m, pl) = (C::from_polar(1.0, -t / 2.0), C::from_polar(1.0, t / 2.0));
                let diag = [m, pl, pl, m];
                for (r, d) in diag.iter().enumerate() {
                    for col in 0..4 {
                        let e = if r == col { *d } else { c(0.0, 0.0) };
                        closed = closed.max((g.get(r, col) - e).norm());
                    }
                }
            }
        }

        let len = rng.gen_range(1..=3);
        let letters: Vec<char> = (0..len)
            .map(|_| ['I', 'X', 'Y', 'Z'][rng.gen_range(0..4)])
            .collect();
        let word: Vec<Pauli> = letters
            .iter()
            .map(|l| match l {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                _ => Pauli::Z,
            })
            .collect();
        let t = angle(&mut rng);
        let g = pauli_rotation_matrix(&word, t);
        // word[0] is the most significant factor of the local index
        let full = letters
            .iter()
            .fold(vec![vec![c(1.0, 0.0)]], |acc, &l| kron(&acc, &pauli(l)));
        unitarity = unitarity.max(unitarity_error(&g));
        closed = closed.max(max_diff(&to_dense(&g), &rotation_closed_form(&full, t)));

        let u = u3_matrix(random_u3(&mut rng));
        let cg = controlled(&u).unwrap();
        unitarity = unitarity.max(unitarity_error(&cg));
        for r in 0..4 {
            for col in 0..4 {
                let e = match (r < 2, col < 2) {
                    (true, true) => {
                        if r == col {
                            c(1.0, 0.0)
                        } else {
                            c(0.0, 0.0)
                        }
                    }
                    (false, false) => u.get(r - 2, col - 2),
                    _ => c(0.0, 0.0),
                };
                closed = closed.max((cg.get(r, col) - e).norm());
            }
        }
    }
    let id = max_diff(
        &to_dense(&u3_matrix(U3Params::new(0.0, 0.0, 0.0))),
        &pauli('I'),
    );
    let x = max_diff(
        &to_dense(&u3_matrix(U3Params::new(PI, 0.0, PI))),
        &pauli('X'),
    );
    let passed = unitarity <= 1e-10 && closed <= 1e-10 && id <= 1e-12 && x <= 1e-12;
    outcome(
        passed,
        format!(
            "unitarity {unitarity:.2e}, closed forms {closed:.2e}, u3(0,0,0)-I {id:.1e}, u3(pi,0,pi)-X {x:.1e}"
        ),
    )
}

/// Full-register matrix of a gate by direct bit manipulation; `targets[0]`
/// maps to the most significant bit of the gate's local index.
fn embed_full(g: &GateMatrix, targets: &[usize], n: usize) -> Dense {
    let dim = 1 << n;
    let k = targets.len();
    let local = |i: usize| {
        targets
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &t)| acc | ((i >> t) & 1) << (k - 1 - j))
    };
    let mask: usize = targets.iter().map(|t| 1 << t).sum();
    (0..dim)
        .map(|r| {
            (0..dim)
                .map(|col| {
                    if r & !mask == col & !mask {
                        g.get(local(r), local(col))
                    } else {
                        c(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_lib = 0.0f64;
    let mut worst_bits = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let n_gates = rng.gen_range(1..=8);
        let circuit = random_circuit(n, n_gates, &mut rng);
        let psi = random_state(n, &mut rng);
        let lib_dense = dense_circuit_oracle(&circuit, n)
            .unwrap()
            .mul_vec(psi.amplitudes());
        let mut bits: Vec<C> = psi.amplitudes().to_vec();
        for (g, t) in &circuit {
            let m = embed_full(g, t, n);
            bits = m
                .iter()
                .map(|row| row.iter().zip(&bits).map(|(a, b)| a * b).sum())
                .collect();
        }
        let mut state = psi;
        for (g, t) in &circuit {
            state = apply_gate(state, g, t).unwrap();
        }
        for ((a, b), d) in state.amplitudes().iter().zip(&lib_dense).zip(&bits) {
            worst_lib = worst_lib.max((a - b).norm());
            worst_bits = worst_bits.max((a - d).norm());
        }
    }
    outcome(
        worst_lib <= 1e-10 && worst_bits <= 1e-10,
        format!("vs dense oracle {worst_lib:.2e}, vs bitwise oracle {worst_bits:.2e}"),
    )
}

fn random_params(
    n: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> (qcnn_lab::qcnn::QcnnArchitecture, QcnnParams) {
    let arch = build_architecture(n, d).unwrap();
    let flat: Vec<f64> = (0..arch.param_count)
        .map(|_| rng.gen_range(-PI..PI))
        .collect();
    let params = QcnnParams::from_flat(&arch, &flat).unwrap();
    (arch, params)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for (n, d) in [(4, 1), (6, 2)] {
        for _ in 0..50 {
            let (arch, params) = random_params(n, d, &mut rng);
            let pixels: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a = forward(&arch, &params, &pixels).unwrap();
            let b = branch_forward(&arch, &params, &pixels).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst < 1e-12,
        format!("max |dp1| {worst:.2e} over 100 parameter sets"),
    )
}

fn central_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn random_batch(n_pixels: usize, h: usize, rng: &mut ChaCha8Rng) -> Vec<ImageSample> {
    (0..3)
        .map(|i| {
            let pixels = (0..n_pixels).map(|_| rng.gen_range(0.0..1.0)).collect();
            ImageSample::new(h, n_pixels / h, pixels, (i % 2) as u8)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_q = 0.0f64;
    let mut instances = 0;
    while instances < 20 {
        let n = rng.gen_range(2..=6);
        let d = rng.gen_range(1..=3);
        let Ok(arch) = build_architecture(n, d) else {
            continue;
        };
        let flat: Vec<f64> = (0..arch.param_count)
            .map(|_| rng.gen_range(-PI..PI))
            .collect();
        let params = QcnnParams::from_flat(&arch, &flat).unwrap();
        let batch = random_batch(1 << n, 1, &mut rng);
        let exact = grad_exact(&arch, &params, &batch).unwrap();
        let loss = |w: &[f64]| {
            let p = QcnnParams::from_flat(&arch, w).unwrap();
            batch
                .iter()
                .map(|s| (forward(&arch, &p, &s.pixels).unwrap() - s.label as f64).powi(2))
                .sum::<f64>()
                / batch.len() as f64
        };
        let fd = central_fd(loss, &flat, 1e-4);
        worst_q = exact
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).abs())
            .fold(worst_q, f64::max);
        instances += 1;
    }
    // coordinates whose stencil straddles a ReLU or max-pool kink are
    // detected against a smaller step and counted
    let mut worst_c = 0.0f64;
    let (mut kinks, mut coords) = (0usize, 0usize);
    for seed in 0..5 {
        let model = CnnModel::init(CnnArchitecture::for_input(8, 8), seed);
        let batch = random_batch(64, 8, &mut rng);
        let (_, exact) = loss_and_grad_at(&model.arch, &model.params, &batch).unwrap();
        let loss = |w: &[f64]| {
            let m = CnnModel {
                arch: model.arch.clone(),
                params: w.to_vec(),
            };
            batch.iter().map(|s| m.forward(s).unwrap().0).sum::<f64>() / batch.len() as f64
        };
        let fd = central_fd(loss, &model.params, 1e-4);
        let fine = central_fd(loss, &model.params, 1e-5);
        for ((e, f), g) in exact.iter().zip(&fd).zip(&fine) {
            coords += 1;
            if (f - g).abs() > 1e-6 {
                kinks += 1;
            } else {
                worst_c = worst_c.max((e - f).abs());
            }
        }
    }
    outcome(
        worst_q < 1e-6 && worst_c < 1e-6 && kinks * 100 < coords,
        format!(
            "QCNN max diff {worst_q:.2e} over 20 instances; CNN 8x8 max diff {worst_c:.2e} over {} of {coords} coordinates ({kinks} straddle a kink)",
            coords - kinks
        ),
    )
}

fn criterion_5() -> Outcome {
    let ten_two = build_architecture(10, 2).unwrap().param_count;
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for n in 1..=10usize {
        for d in 1..=3usize {
            // survivors after each pooling step keep even positions
            let mut active = n;
            let mut valid = n >= 2;
            for _ in 0..d {
                if active < 2 {
                    valid = false;
                }
                active = active.div_ceil(2);
            }
            match build_architecture(n, d) {
                Ok(arch) if valid => {
                    let formula = 18 * d + 4usize.pow(active as u32) - 1;
                    let circuit = arch.circuit();
                    let mut used: Vec<usize> = circuit
                        .ops
                        .iter()
                        .flat_map(|op| op.param_indices().to_vec())
                        .collect();
                    used.sort_unstable();
                    used.dedup();
                    // the six-weight U3 prefix of the conv block only runs at depth 0
                    let structural = used.len() + 6 * (d - 1);
                    if arch.param_count != formula
                        || circuit.param_slots() != formula
                        || structural != formula
                    {
                        mismatches.push(format!("({n},{d})"));
                    }
                    checked += 1;
                }
                Err(_) if !valid => {}
                _ => mismatches.push(format!("({n},{d}) validity")),
            }
        }
    }
    outcome(
        ten_two == 99 && mismatches.is_empty(),
        format!(
            "(10,2) -> {ten_two}; {checked} valid (n,d) pairs checked, mismatches {mismatches:?}"
        ),
    )
}

fn mean_final(runs: &[ExperimentRun], n: usize) -> f64 {
    runs.iter()
        .find(|r| r.n_per_class == n)
        .unwrap()
        .mean_final_test_acc()
}

fn save_evidence(name: &str, cfg: &ExperimentConfig, files: Vec<(PathBuf, Vec<u8>)>) {
    let dir = evidence_dir(name);
    let _ = std::fs::remove_dir_all(&dir);
    write_outputs(&dir, cfg, files).expect("evidence written");
}

fn criterion_6(data: &Dataset) -> Outcome {
    let cfg = desk_config("digits01.cfg");
    assert_eq!(
        (cfg.n_qubits, cfg.depth, cfg.train.epochs, cfg.repetitions),
        (6, 2, 100, 5)
    );
    let runs = run_experiment(&cfg, data).unwrap();
    save_evidence(
        "criterion6",
        &cfg,
        experiment_files(&cfg, &runs, Path::new("")),
    );
    let (a5, a10, a50) = (
        mean_final(&runs, 5),
        mean_final(&runs, 10),
        mean_final(&runs, 50),
    );
    let slack = 0.02;
    let passed = a50 >= 0.90 && a50 + slack >= a10 && a10 + slack >= a5;
    outcome(
        passed,
        format!("mean test accuracy N=50 {a50:.3} (>= 0.90), N=10 {a10:.3}, N=5 {a5:.3}"),
    )
}

fn criterion_7(data: &Dataset) -> Outcome {
    let cfg = desk_config("compare_da.cfg");
    assert_eq!(
        (
            cfg.class_b.as_slice(),
            cfg.n_per_class.as_slice(),
            cfg.repetitions
        ),
        (&[1u8, 9][..], &[30usize][..], 10)
    );
    let out = compare_da(&cfg, data).unwrap();
    save_evidence("criterion7", &cfg, comparison_files(&cfg, &out));
    let mut passed = true;
    let mut parts = Vec::new();
    for r in &out.table.rows {
        passed &= r.delta <= 0.01;
        let band = if (-0.06..=0.01).contains(&r.delta) {
            "in"
        } else {
            "outside"
        };
        parts.push(format!(
            "0v{} {:.3} -> {:.3} (delta {:+.3}, {band} [-0.06, +0.01])",
            r.class_b, r.acc_no_da, r.acc_da, r.delta
        ));
    }
    outcome(passed, parts.join("; "))
}

fn criterion_8(data: &Dataset) -> Outcome {
    let cfg = desk_config("cnn.cfg");
    let runs = run_experiment(&cfg, data).unwrap();
    save_evidence(
        "criterion8",
        &cfg,
        experiment_files(&cfg, &runs, Path::new("")),
    );
    let n10 = runs.iter().find(|r| r.n_per_class == 10).unwrap();
    let train10 = n10.mean.last().unwrap().train_acc;
    let (t10, t50) = (mean_final(&runs, 10), mean_final(&runs, 50));
    outcome(
        train10 >= 0.95 && t50 + 0.02 >= t10,
        format!("train accuracy N=10 {train10:.3} (>= 0.95); test accuracy N=10 {t10:.3}, N=50 {t50:.3}"),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = Vec::new();
    let all = AugmentConfig {
        flip_horizontal: true,
        rotation: true,
        contrast: true,
        ..AugmentConfig::disabled()
    };
    for _ in 0..100 {
        let (h, w) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let img = ImageSample::new(
            h,
            w,
            (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect(),
            0,
        );
        if flip_h(&flip_h(&img)) != img {
            failures.push("flip involution");
        }
        if rotate(&img, 0.0, &all).unwrap() != img || contrast(&img, 1.0, &all).unwrap() != img {
            failures.push("identity");
        }
        let seed = rng.gen();
        let a = augment_sample(&img, &all, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = augment_sample(&img, &all, &mut ChaCha8Rng::seed_from_u64(seed));
        if a != b {
            failures.push("determinism");
        }
        if a.pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            failures.push("pixel range");
        }
    }
    if rotate(&ImageSample::new(2, 2, vec![0.5; 4], 0), 0.06, &all).is_ok()
        || contrast(&ImageSample::new(2, 2, vec![0.5; 4], 0), 1.2, &all).is_ok()
    {
        failures.push("out-of-bounds parameters accepted");
    }
    let draws = 10_000;
    let (mut flips, mut angle_sum, mut factor_sum) = (0usize, 0.0, 0.0);
    for _ in 0..draws {
        let d = draw(&all, &mut rng);
        let (f, a, k) = (d.flip.unwrap(), d.angle.unwrap(), d.factor.unwrap());
        if !(-0.05..0.05).contains(&a) || !(0.9..1.1).contains(&k) {
            failures.push("draw bounds");
        }
        flips += f as usize;
        angle_sum += a;
        factor_sum += k;
    }
    let flip_rate = flips as f64 / draws as f64;
    let (angle_mean, factor_mean) = (angle_sum / draws as f64, factor_sum / draws as f64);
    // four standard errors of the mean for each distribution
    if (flip_rate - 0.5).abs() > 4.0 * 0.005 {
        failures.push("flip rate");
    }
    if angle_mean.abs() > 4.0 * 0.1 / 12f64.sqrt() / 100.0 {
        failures.push("angle mean");
    }
    if (factor_mean - 1.0).abs() > 4.0 * 0.2 / 12f64.sqrt() / 100.0 {
        failures.push("factor mean");
    }
    failures.dedup();
    outcome(
        failures.is_empty(),
        format!(
            "flip rate {flip_rate:.4}, angle mean {angle_mean:+.5}, factor mean {factor_mean:.5}; failures {failures:?}"
        ),
    )
}

fn criterion_10(data: &Dataset) -> Outcome {
    let digits = repo_root().join("data/digits.csv").display().to_string();
    let mut diffs = Vec::new();
    for (model, extra) in [
        ("qcnn", "augment = rotation,contrast"),
        ("cnn", "augment = rotation,contrast"),
    ] {
        let text = format!(
            "model = {model}\ndigits_path = {digits}\nclass_b = 1,7\nn_per_class = 8\nn_test = 20\nepochs = 8\nrepetitions = 3\nbase_seed = 11\n{extra}\n"
        );
        let cfg = ExperimentConfig::from_map(&ConfigMap::parse(&text).unwrap()).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let runs = run_experiment(&cfg, data).unwrap();
                let mut files = experiment_files(&cfg, &runs, Path::new("runs"));
                files.extend(comparison_files(&cfg, &compare_da(&cfg, data).unwrap()));
                files
            })
        };
        let (one, many) = (run(1), run(4));
        if one.len() != many.len() {
            diffs.push(format!("{model}: file count"));
        }
        for ((pa, a), (pb, b)) in one.iter().zip(&many) {
            if pa != pb || a != b {
                diffs.push(format!("{model}: {}", pa.display()));
            }
        }
    }
    outcome(
        diffs.is_empty(),
        format!("1 vs 4 threads, QCNN and CNN outputs; differing files {diffs:?}"),
    )
}

type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let data = load_dataset(&desk_config("digits01.cfg")).expect("digits data");
    let criteria: Vec<Criterion> = vec![
        (
            "gate algebra",
            Duration::from_secs(5),
            Box::new(criterion_1),
        ),
        (
            "oracle equivalence",
            Duration::from_secs(30),
            Box::new(criterion_2),
        ),
        (
            "deferred measurement",
            Duration::from_secs(60),
            Box::new(criterion_3),
        ),
        (
            "gradient checks",
            Duration::from_secs(300),
            Box::new(criterion_4),
        ),
        ("parameter counting", Duration::MAX, Box::new(criterion_5)),
        (
            "desk-scale QCNN accuracy",
            Duration::from_secs(600),
            Box::new(|| criterion_6(&data)),
        ),
        (
            "augmentation direction on QCNN",
            Duration::from_secs(1800),
            Box::new(|| criterion_7(&data)),
        ),
        (
            "CNN baseline sanity",
            Duration::MAX,
            Box::new(|| criterion_8(&data)),
        ),
        (
            "augmentation properties",
            Duration::from_secs(10),
            Box::new(criterion_9),
        ),
        (
            "determinism across thread counts",
            Duration::MAX,
            Box::new(|| criterion_10(&data)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let passed = out.passed && in_time;
        failed += usize::from(!passed);
        let budget = if *limit == Duration::MAX {
            String::new()
        } else {
            format!(" / {}s", limit.as_secs())
        };
        println!(
            "{} criterion {:>2} {name}: {} [{:.1}s{budget}]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
