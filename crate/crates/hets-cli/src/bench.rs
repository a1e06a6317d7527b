//! Benchmark suites mirroring the published measurement protocol: each
//! operation is timed over `rounds` rounds of `iterations` runs; the
//! report carries mean and standard deviation across rounds, alongside
//! the published reference numbers (different hardware, informational
//! only).

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use hets_core::backend::{Backend, BackendKind};
use hets_core::error::{Error, Result};
use hets_core::nn::{self, fixtures};
use hets_core::tensors::{self, EncryptedVector, PlainTensor};
use hets_core::{Context, SchemeParams};

use crate::commands::rng_from;

/// Published reference latencies (ms) on the 8-vCPU setup, by op name and
/// shape. Hardware differs; the column is informational.
const PAPER_SHAPES: [usize; 5] = [256, 1024, 4096, 8192, 16384];
const PAPER_ROWS: [(&str, [f64; 5]); 11] = [
    ("negate", [0.07, 0.07, 0.07, 0.13, 0.26]),
    ("square", [4.29, 4.29, 4.29, 8.49, 17.16]),
    ("polyval", [10.55, 10.46, 10.51, 21.32, 42.68]),
    ("add", [0.08, 0.08, 0.08, 0.16, 0.31]),
    ("multiply", [4.45, 4.34, 4.43, 8.84, 17.75]),
    ("sub", [0.08, 0.08, 0.08, 0.15, 0.30]),
    ("dot", [20.15, 23.96, 28.11, 55.94, 112.36]),
    ("add_plain", [0.80, 0.86, 1.07, 2.13, 4.19]),
    ("multiply_plain", [1.75, 1.81, 2.03, 4.02, 7.97]),
    ("sub_plain", [0.80, 0.86, 1.08, 2.14, 4.21]),
    ("dot_plain", [17.37, 21.36, 25.63, 51.14, 101.82]),
];

/// Table-2 reference rows (8 vCPUs), ms.
const PAPER_MNIST: [(&str, f64); 8] = [
    ("Key generation", 940.01),
    ("Input preparation", 9.8),
    ("Convolutional layer evaluation", 236.9),
    ("First activation(square)", 8.47),
    ("FC1", 1084.65),
    ("Second activation(square)", 4.29),
    ("FC2", 121.36),
    ("Full forward step", 1456.29),
];

fn paper_ms(name: &str, shape: usize) -> Option<f64> {
    let idx = PAPER_SHAPES.iter().position(|&s| s == shape)?;
    PAPER_ROWS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, vals)| vals[idx])
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub shape: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub rounds: usize,
    pub iterations: usize,
    /// Published value on different hardware; informational.
    pub paper_ms: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub suite: String,
    pub profile: String,
    pub backend: String,
    pub worker_count: usize,
    pub cpu_count: usize,
    pub rounds: usize,
    pub iterations: usize,
    pub rows: Vec<BenchRow>,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Time one op: `rounds` rounds, each timing `iterations` calls.
fn time_op(rounds: usize, iterations: usize, mut op: impl FnMut()) -> (f64, f64) {
    let mut per_round = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let t0 = Instant::now();
        for _ in 0..iterations {
            op();
        }
        per_round.push(t0.elapsed().as_secs_f64() * 1e3 / iterations as f64);
    }
    mean_std(&per_round)
}

fn parse_shapes(arg: Option<&str>, slots: usize) -> Result<Vec<usize>> {
    match arg {
        Some(s) => {
            let mut shapes = Vec::new();
            for part in s.split(',') {
                let shape: usize = part
                    .trim()
                    .parse()
                    .map_err(|_| Error::ParseError(format!("bad shape '{part}'")))?;
                if shape > slots {
                    return Err(Error::ShapeTooLarge { got: shape, slots });
                }
                shapes.push(shape);
            }
            Ok(shapes)
        }
        // default: the published shapes that fit this profile
        None => Ok(PAPER_SHAPES
            .iter()
            .copied()
            .filter(|&s| s + 1 <= slots + 1 && s <= slots)
            .collect()),
    }
}

struct Bencher<'a> {
    backend: &'a Backend,
    rounds: usize,
    iterations: usize,
    rows: Vec<BenchRow>,
}

impl Bencher<'_> {
    fn run(&mut self, name: &str, shape: usize, mut op: impl FnMut()) {
        let (mean_ms, std_ms) = time_op(self.rounds, self.iterations, &mut op);
        self.rows.push(BenchRow {
            name: name.to_string(),
            shape,
            mean_ms,
            std_ms,
            rounds: self.rounds,
            iterations: self.iterations,
            paper_ms: paper_ms(name, shape),
        });
    }

    fn encrypted(&self, shape: usize, rng: &mut impl FnMut() -> f64) -> EncryptedVector {
        let data: Vec<f64> = (0..shape).map(|_| rng()).collect();
        tensors::encrypt_vector(
            self.backend,
            &PlainTensor::vector(data),
            false,
            &mut rand_chacha::ChaCha20Rng::seed_from_u64(shape as u64),
        )
        .unwrap()
    }
}

use rand::SeedableRng;

#[allow(clippy::too_many_arguments)]
pub fn run(
    suite: &str,
    profile: &str,
    shapes: Option<&str>,
    backend_kind: &str,
    out: Option<&Path>,
    rounds: usize,
    iterations: usize,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let kind: BackendKind = backend_kind.parse()?;
    let params = SchemeParams::by_name(profile)?;
    let shapes = parse_shapes(shapes, params.slot_count())?;

    if suite == "mnist" {
        return mnist_suite(profile, kind, out, rounds, iterations, workers, seed);
    }

    let backend = match kind {
        BackendKind::Mock => Backend::mock_standalone(params.clone(), &[]),
        BackendKind::Real => {
            let ctx = Context::create(params.clone(), &[], seed)?;
            let ctx = match workers {
                Some(w) => ctx.set_flags(true, true, w)?,
                None => ctx,
            };
            Backend::real(&ctx)
        }
    };
    let mut bencher = Bencher {
        backend: &backend,
        rounds,
        iterations,
        rows: Vec::new(),
    };
    let mut value_rng = rng_from(seed.map(|s| s ^ 0xbe75));
    let mut next = move || value_rng.random_range(-1.0..1.0);

    for &shape in &shapes {
        let a = bencher.encrypted(shape, &mut next);
        let b = bencher.encrypted(shape, &mut next);
        let plain =
            PlainTensor::vector((0..shape).map(|_| next()).collect::<Vec<f64>>());
        match suite {
            "unary" => {
                bencher.run("negate", shape, || {
                    tensors::negate(&backend, &a).unwrap();
                });
                bencher.run("square", shape, || {
                    tensors::square(&backend, &a).unwrap();
                });
                // the published polyval benchmark evaluates 2x^2 + x
                bencher.run("polyval", shape, || {
                    tensors::polyval(&backend, &a, &[0.0, 1.0, 2.0]).unwrap();
                });
            }
            "binary" => {
                bencher.run("add", shape, || {
                    tensors::add(&backend, &a, &b).unwrap();
                });
                bencher.run("multiply", shape, || {
                    tensors::mul(&backend, &a, &b).unwrap();
                });
                bencher.run("sub", shape, || {
                    tensors::sub(&backend, &a, &b).unwrap();
                });
                bencher.run("dot", shape, || {
                    tensors::dot_product(&backend, &a, &b).unwrap();
                });
                bencher.run("add_plain", shape, || {
                    tensors::add_plain(&backend, &a, &plain).unwrap();
                });
                bencher.run("multiply_plain", shape, || {
                    tensors::mul_plain(&backend, &a, &plain).unwrap();
                });
                bencher.run("sub_plain", shape, || {
                    tensors::sub_plain(&backend, &a, &plain).unwrap();
                });
                bencher.run("dot_plain", shape, || {
                    tensors::dot_product_plain(&backend, &a, &plain).unwrap();
                });
            }
            other => {
                return Err(Error::InvalidParams(format!(
                    "unknown suite '{other}' (unary, binary or mnist)"
                )))
            }
        }
    }

    let report = BenchReport {
        suite: suite.to_string(),
        profile: profile.to_string(),
        backend: backend_kind.to_string(),
        worker_count: workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }),
        cpu_count: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        rounds,
        iterations,
        rows: bencher.rows,
    };
    emit(&report, out)
}

#[allow(clippy::too_many_arguments)]
fn mnist_suite(
    profile: &str,
    kind: BackendKind,
    out: Option<&Path>,
    rounds: usize,
    iterations: usize,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let params = SchemeParams::by_name(profile)?;
    let model = fixtures::mnist_model(fixtures::MNIST_MODEL_SEED);
    if params.slot_count() < 4096 {
        return Err(Error::ShapeTooLarge {
            got: 4096,
            slots: params.slot_count(),
        });
    }
    let extra = nn::hot_rotation_steps(&model, params.slot_count());
    let t0 = Instant::now();
    let backend = match kind {
        BackendKind::Mock => Backend::mock_standalone(params, &extra),
        BackendKind::Real => {
            let ctx = Context::create(params, &extra, seed)?;
            let ctx = match workers {
                Some(w) => ctx.set_flags(true, true, w)?,
                None => ctx,
            };
            Backend::real(&ctx)
        }
    };
    let keygen_ms = t0.elapsed().as_secs_f64() * 1e3;

    let image = &fixtures::fixture_images(fixtures::MNIST_IMAGE_SEED, 1)[0];
    let mut rng = rng_from(seed);

    // stage names in table order, accumulated per run
    let labels = [
        "Input preparation",
        "Convolutional layer evaluation",
        "First activation(square)",
        "FC1",
        "Second activation(square)",
        "FC2",
        "Full forward step",
    ];
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for _ in 0..rounds {
        let mut acc = vec![0.0f64; labels.len()];
        for _ in 0..iterations {
            let t1 = Instant::now();
            let ev = nn::prepare_input(&backend, &model, image, &mut rng)?;
            let prep = t1.elapsed().as_secs_f64() * 1e3;
            let (records, result) = nn::encrypted_forward_traced(&backend, &model, &ev);
            result?;
            let stage = |name: &str| -> f64 {
                records
                    .iter()
                    .filter(|r| r.name == name)
                    .map(|r| r.ms)
                    .sum()
            };
            let conv = stage("conv") + stage("mask");
            let squares: Vec<f64> = records
                .iter()
                .filter(|r| r.name == "square")
                .map(|r| r.ms)
                .collect();
            let row = [
                prep,
                conv,
                squares.first().copied().unwrap_or(0.0),
                stage("fc1"),
                squares.get(1).copied().unwrap_or(0.0),
                stage("fc2"),
                prep + records.iter().map(|r| r.ms).sum::<f64>(),
            ];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        for (s, a) in samples.iter_mut().zip(&acc) {
            s.push(a / iterations as f64);
        }
    }

    let mut rows = vec![BenchRow {
        name: "Key generation".into(),
        shape: 0,
        mean_ms: keygen_ms,
        std_ms: 0.0,
        rounds: 1,
        iterations: 1,
        paper_ms: Some(PAPER_MNIST[0].1),
    }];
    for (label, sample) in labels.iter().zip(&samples) {
        let (mean_ms, std_ms) = mean_std(sample);
        rows.push(BenchRow {
            name: label.to_string(),
            shape: 0,
            mean_ms,
            std_ms,
            rounds,
            iterations,
            paper_ms: PAPER_MNIST
                .iter()
                .find(|(n, _)| n == label)
                .map(|(_, v)| *v),
        });
    }
    let report = BenchReport {
        suite: "mnist".into(),
        profile: profile.to_string(),
        backend: match kind {
            BackendKind::Real => "real".into(),
            BackendKind::Mock => "mock".into(),
        },
        worker_count: workers.unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }),
        cpu_count: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        rounds,
        iterations,
        rows,
    };
    emit(&report, out)
}

fn emit(report: &BenchReport, out: Option<&Path>) -> Result<()> {
    println!(
        "suite {} | profile {} | backend {} | workers {} | cpus {} | {} rounds x {} iterations",
        report.suite,
        report.profile,
        report.backend,
        report.worker_count,
        report.cpu_count,
        report.rounds,
        report.iterations
    );
    println!(
        "{:<34} {:>7} {:>12} {:>10} {:>26}",
        "op", "shape", "mean ms", "std ms", "paper (different hardware)"
    );
    for row in &report.rows {
        let paper = row
            .paper_ms
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<34} {:>7} {:>12.3} {:>10.3} {:>26}",
            row.name, row.shape, row.mean_ms, row.std_ms, paper
        );
    }
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(report)
            .map_err(|e| Error::ParseError(e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| Error::IoError(format!("{}: {e}", path.display())))?;
        println!("report written to {}", path.display());
    }
    Ok(())
}
