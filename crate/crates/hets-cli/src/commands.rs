//! keygen / infer / serve command implementations.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use hets_core::backend::{Backend, BackendKind};
use hets_core::error::{Error, Result};
use hets_core::nn::{self, fixtures, StageRecord};
use hets_core::tensors::{self, PlainTensor};
use hets_core::{wire, Context, SchemeParams};

pub fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}

fn apply_workers(ctx: Context, workers: Option<usize>) -> Result<Context> {
    match workers {
        Some(w) => ctx.set_flags(ctx.auto_rescale(), ctx.auto_relin(), w),
        None => Ok(ctx),
    }
}

fn load_context_file(path: &Path, workers: Option<usize>) -> Result<Context> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::IoError(format!("{}: {e}", path.display())))?;
    let (kind, payload) = wire::decode_frame(&bytes)?;
    if kind != wire::FrameKind::PublicContext {
        return Err(Error::ParseError(format!(
            "{} is not a context file",
            path.display()
        )));
    }
    apply_workers(wire::deserialize_context(&payload)?, workers)
}

fn write_context_file(path: &Path, ctx: &Context) -> Result<usize> {
    let frame = wire::encode_frame(
        wire::FrameKind::PublicContext,
        &wire::serialize_context(ctx),
    );
    std::fs::write(path, &frame).map_err(|e| Error::IoError(format!("{}: {e}", path.display())))?;
    Ok(frame.len())
}

/// Create a keyed context for `profile` and write the private and public
/// context files.
pub fn keygen(
    profile: &str,
    out_dir: &Path,
    model: Option<&Path>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::IoError(format!("{}: {e}", out_dir.display())))?;
    let params = SchemeParams::by_name(profile)?;
    let hot_model = match model {
        Some(path) => Some(nn::load_model(path)?),
        None if profile == "mnist-8192" => Some(fixtures::mnist_model(fixtures::MNIST_MODEL_SEED)),
        None => None,
    };
    let extra: Vec<i64> = hot_model
        .map(|m| nn::hot_rotation_steps(&m, params.slot_count()))
        .unwrap_or_default();

    let t0 = Instant::now();
    let ctx = apply_workers(Context::create(params, &extra, seed)?, workers)?;
    let elapsed = t0.elapsed().as_secs_f64() * 1e3;

    let private_len = write_context_file(&out_dir.join("private.ctx"), &ctx)?;
    let public_len = write_context_file(&out_dir.join("public.ctx"), &ctx.make_public())?;

    println!("profile:        {profile}");
    println!("key generation: {elapsed:.1} ms");
    println!("private.ctx:    {private_len} bytes");
    println!("public.ctx:     {public_len} bytes");
    println!(
        "galois steps:   {:?}{}",
        ctx.galois_keys().supported_steps(),
        if extra.is_empty() {
            String::new()
        } else {
            format!(" (workload extras: {extra:?})")
        }
    );
    Ok(())
}

fn load_image(path: &Path) -> Result<PlainTensor> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))
}

/// Map pipeline stage records onto the published table's row names.
fn stage_table(keygen_ms: Option<f64>, prepare_ms: f64, records: &[StageRecord]) -> Vec<(String, f64)> {
    let mut rows = vec![
        (
            "Key generation".to_string(),
            keygen_ms.unwrap_or(f64::NAN),
        ),
        ("Input preparation".to_string(), prepare_ms),
    ];
    let mut squares = 0usize;
    let mut conv_ms = 0.0;
    let mut saw_conv = false;
    for rec in records {
        match rec.name.as_str() {
            "conv" | "mask" => {
                conv_ms += rec.ms;
                saw_conv = true;
            }
            "square" => {
                squares += 1;
                let label = match squares {
                    1 => "First activation(square)".to_string(),
                    2 => "Second activation(square)".to_string(),
                    n => format!("Activation {n} (square)"),
                };
                if saw_conv {
                    rows.push(("Convolutional layer evaluation".to_string(), conv_ms));
                    saw_conv = false;
                }
                rows.push((label, rec.ms));
            }
            name => {
                if saw_conv {
                    rows.push(("Convolutional layer evaluation".to_string(), conv_ms));
                    saw_conv = false;
                }
                rows.push((name.to_uppercase(), rec.ms));
            }
        }
    }
    if saw_conv {
        rows.push(("Convolutional layer evaluation".to_string(), conv_ms));
    }
    let total: f64 = rows.iter().skip(1).map(|(_, ms)| ms).sum();
    rows.push(("Full forward step".to_string(), total));
    rows
}

fn print_stage_table(rows: &[(String, f64)]) {
    println!("{:<34} {:>12}", "Operation", "Duration(ms)");
    for (name, ms) in rows {
        if ms.is_nan() {
            println!("{name:<34} {:>12}", "-");
        } else {
            println!("{name:<34} {ms:>12.2}");
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[allow(clippy::too_many_arguments)]
pub fn infer(
    model_path: &Path,
    image_path: &Path,
    context: Option<&Path>,
    profile: Option<&str>,
    connect: Option<&str>,
    backend_kind: &str,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let kind: BackendKind = backend_kind.parse()?;
    let model = nn::load_model(model_path)?;
    let image = load_image(image_path)?;
    let mut rng = rng_from(seed);

    if let Some(addr) = connect {
        if kind != BackendKind::Real {
            return Err(Error::InvalidParams(
                "remote inference requires the real backend".into(),
            ));
        }
        let ctx = match (context, profile) {
            (Some(path), _) => load_context_file(path, workers)?,
            (None, Some(name)) => {
                apply_workers(Context::create_named(name, &[], seed)?, workers)?
            }
            (None, None) => {
                return Err(Error::InvalidParams(
                    "remote inference needs --context or --profile".into(),
                ))
            }
        };
        if ctx.is_public() {
            return Err(Error::MissingKey(
                "a private context is required to decrypt the response".into(),
            ));
        }
        let report = wire::client_infer(addr, &ctx, &model, &image, &mut rng)?;
        println!("logits: {:?}", report.logits.data);
        println!("predicted class: {}", argmax(&report.logits.data));
        println!(
            "bytes sent: {}, received: {}, total: {} \
             (reference point from the published setup: 427 KB)",
            report.bytes_sent,
            report.bytes_received,
            report.bytes_sent + report.bytes_received
        );
        println!(
            "prepare {:.1} ms, round trip {:.1} ms, decrypt {:.1} ms",
            report.prepare_ms, report.round_trip_ms, report.decrypt_ms
        );
        return Ok(());
    }

    // local evaluation
    let (backend, keygen_ms, can_decrypt) = match (context, profile, kind) {
        (Some(path), _, _) => {
            let ctx = load_context_file(path, workers)?;
            let private = !ctx.is_public();
            (Backend::of_kind(&ctx, kind), None, private)
        }
        (None, Some(name), BackendKind::Mock) => {
            // the mock needs no key material
            let params = SchemeParams::by_name(name)?;
            (Backend::mock_standalone(params, &[]), Some(0.0), true)
        }
        (None, Some(name), BackendKind::Real) => {
            let params = SchemeParams::by_name(name)?;
            let extra = nn::hot_rotation_steps(&model, params.slot_count());
            let t0 = Instant::now();
            let ctx = apply_workers(Context::create(params, &extra, seed)?, workers)?;
            (
                Backend::real(&ctx),
                Some(t0.elapsed().as_secs_f64() * 1e3),
                true,
            )
        }
        (None, None, _) => {
            return Err(Error::InvalidParams(
                "local inference needs --context or --profile".into(),
            ))
        }
    };

    let t1 = Instant::now();
    let ev = nn::prepare_input(&backend, &model, &image, &mut rng)?;
    let prepare_ms = t1.elapsed().as_secs_f64() * 1e3;
    let (records, out) = nn::encrypted_forward_traced(&backend, &model, &ev);
    let out = out?;
    print_stage_table(&stage_table(keygen_ms, prepare_ms, &records));
    let trace: Vec<(String, usize)> = records
        .iter()
        .map(|r| (r.name.clone(), r.levels))
        .collect();
    println!(
        "level trace: {:?} (total {})",
        trace,
        records.iter().map(|r| r.levels).sum::<usize>()
    );
    if can_decrypt {
        let logits = tensors::decrypt_vector(&backend, &out)?;
        println!("logits: {:?}", logits.data);
        println!("predicted class: {}", argmax(&logits.data));
    } else {
        println!("public context: result left encrypted");
    }
    Ok(())
}

pub fn serve(listen: &str, context: &Path, model_path: &Path, workers: Option<usize>) -> Result<()> {
    let ctx = load_context_file(context, workers)?;
    let model = nn::load_model(model_path)?;
    let service = wire::serve_inference(listen, &ctx, &model)?;
    println!("serving encrypted inference on {}", service.addr());
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}
