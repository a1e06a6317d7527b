//! A uniform evaluation interface with two interchangeable implementations:
//! the real scheme, and a mock computing exact arithmetic on plain slot
//! vectors while enforcing identical level/scale/rotation/slot constraints.
//!
//! The mock is the correctness oracle for every higher layer: any tensor
//! computation run on both backends must agree within the operation's ε,
//! and both must fail with the same error at the same op index. Scale
//! bookkeeping uses the same f64 arithmetic on both sides, so mismatch
//! checks trigger in lockstep.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use rand::Rng;

use crate::context::Context;
use crate::error::{Error, Result};
use crate::scheme::{plan_rotation, scales_match, Ciphertext, Evaluator, SchemeParams};

static BACKEND_IDS: AtomicU64 = AtomicU64::new(1);

/// Which implementation a backend dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Real,
    Mock,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(BackendKind::Real),
            "mock" => Ok(BackendKind::Mock),
            other => Err(Error::InvalidParams(format!("unknown backend '{other}'"))),
        }
    }
}

/// Exact-arithmetic stand-in for a ciphertext: plain slot values plus the
/// same level/scale metadata, transitioning at the same points.
#[derive(Debug, Clone, PartialEq)]
pub struct MockCiphertext {
    pub slots: Vec<f64>,
    pub scale: f64,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    Real(Ciphertext),
    Mock(MockCiphertext),
}

/// A ciphertext bound to the backend instance that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendVector {
    backend_id: u64,
    payload: Payload,
}

impl BackendVector {
    pub fn level(&self) -> usize {
        match &self.payload {
            Payload::Real(ct) => ct.level,
            Payload::Mock(m) => m.level,
        }
    }

    pub fn scale(&self) -> f64 {
        match &self.payload {
            Payload::Real(ct) => ct.scale,
            Payload::Mock(m) => m.scale,
        }
    }

    /// Auto-rescaled multiplications still available (two-prime floor).
    pub fn remaining_levels(&self) -> usize {
        self.level().saturating_sub(1)
    }

    /// The real ciphertext, if this vector came from a real backend.
    pub fn as_real(&self) -> Option<&Ciphertext> {
        match &self.payload {
            Payload::Real(ct) => Some(ct),
            Payload::Mock(_) => None,
        }
    }
}

/// One recorded evaluation step.
#[derive(Debug, Clone, PartialEq)]
pub enum OpEvent {
    Add,
    Sub,
    Negate,
    AddPlain,
    SubPlain,
    MulCt { level: usize },
    MulPlain { level: usize },
    Rotate { step: i64 },
    Rescale { level: usize },
    ModDrop { count: usize },
}

/// Shared recording buffer installed via `Backend::start_trace`.
pub type TraceHandle = Arc<Mutex<Vec<OpEvent>>>;

enum Engine {
    Real { ctx: Context, eval: Evaluator },
    Mock(MockEngine),
}

struct MockEngine {
    params: Arc<SchemeParams>,
    steps: BTreeSet<usize>,
    auto_rescale: bool,
    has_relin: bool,
}

/// Evaluation handle dispatching to the real scheme or the mock.
pub struct Backend {
    id: u64,
    engine: Engine,
    trace: RwLock<Option<TraceHandle>>,
}

impl Backend {
    /// Real backend over a context's keys and flags.
    pub fn real(ctx: &Context) -> Backend {
        Backend {
            id: BACKEND_IDS.fetch_add(1, Ordering::Relaxed),
            engine: Engine::Real {
                ctx: ctx.clone(),
                eval: ctx.evaluator(),
            },
            trace: RwLock::new(None),
        }
    }

    /// Mock backend mirroring a context's parameters, declared rotation
    /// steps and flags.
    pub fn mock_of(ctx: &Context) -> Backend {
        Backend {
            id: BACKEND_IDS.fetch_add(1, Ordering::Relaxed),
            engine: Engine::Mock(MockEngine {
                params: ctx.params().clone(),
                steps: ctx.galois_keys().supported_steps().into_iter().collect(),
                auto_rescale: ctx.auto_rescale(),
                has_relin: ctx.relin_key().is_some(),
            }),
            trace: RwLock::new(None),
        }
    }

    /// Mock backend without any key material (no key generation cost).
    pub fn mock_standalone(params: Arc<SchemeParams>, rotation_steps: &[i64]) -> Backend {
        let slots = params.slot_count();
        let mut steps: BTreeSet<usize> = Context::default_rotation_steps(&params)
            .iter()
            .map(|s| s.rem_euclid(slots as i64) as usize)
            .collect();
        for &s in rotation_steps {
            steps.insert(s.rem_euclid(slots as i64) as usize);
        }
        Backend {
            id: BACKEND_IDS.fetch_add(1, Ordering::Relaxed),
            engine: Engine::Mock(MockEngine {
                params,
                steps,
                auto_rescale: true,
                has_relin: true,
            }),
            trace: RwLock::new(None),
        }
    }

    pub fn of_kind(ctx: &Context, kind: BackendKind) -> Backend {
        match kind {
            BackendKind::Real => Backend::real(ctx),
            BackendKind::Mock => Backend::mock_of(ctx),
        }
    }

    pub fn kind(&self) -> BackendKind {
        match &self.engine {
            Engine::Real { .. } => BackendKind::Real,
            Engine::Mock(_) => BackendKind::Mock,
        }
    }

    pub fn params(&self) -> &Arc<SchemeParams> {
        match &self.engine {
            Engine::Real { eval, .. } => &eval.params,
            Engine::Mock(m) => &m.params,
        }
    }

    pub fn slots(&self) -> usize {
        self.params().slot_count()
    }

    pub fn top_level(&self) -> usize {
        self.params().top_level()
    }

    pub fn delta(&self) -> f64 {
        self.params().scale
    }

    pub fn prime_f64(&self, i: usize) -> f64 {
        self.params().prime_f64(i)
    }

    fn auto_rescale(&self) -> bool {
        match &self.engine {
            Engine::Real { eval, .. } => eval.auto_rescale,
            Engine::Mock(m) => m.auto_rescale,
        }
    }

    /// Install a fresh trace buffer and return it.
    pub fn start_trace(&self) -> TraceHandle {
        let handle: TraceHandle = Arc::new(Mutex::new(Vec::new()));
        *self.trace.write().unwrap() = Some(handle.clone());
        handle
    }

    pub fn stop_trace(&self) {
        *self.trace.write().unwrap() = None;
    }

    fn record(&self, event: OpEvent) {
        if let Some(handle) = self.trace.read().unwrap().as_ref() {
            handle.lock().unwrap().push(event);
        }
    }

    fn own(&self, payload: Payload) -> BackendVector {
        BackendVector {
            backend_id: self.id,
            payload,
        }
    }

    fn check_owned(&self, v: &BackendVector) -> Result<()> {
        if v.backend_id != self.id {
            return Err(Error::BackendMismatch);
        }
        Ok(())
    }

    fn check_pair(&self, a: &BackendVector, b: &BackendVector) -> Result<()> {
        self.check_owned(a)?;
        self.check_owned(b)?;
        if a.level() != b.level() {
            return Err(Error::LevelMismatch {
                left: a.level(),
                right: b.level(),
            });
        }
        if !scales_match(a.scale(), b.scale()) {
            return Err(Error::ScaleMismatch {
                left: a.scale(),
                right: b.scale(),
            });
        }
        Ok(())
    }

    fn scale_budget(&self, scale: f64, level: usize) -> Result<()> {
        let budget: f64 = (0..level + 1)
            .map(|i| self.prime_f64(i).log2())
            .sum();
        if scale.log2() > budget - 2.0 {
            return Err(Error::ScaleOverflow { scale, level });
        }
        Ok(())
    }

    /// Bind a deserialized ciphertext to this (real) backend.
    pub fn adopt(&self, ct: Ciphertext) -> Result<BackendVector> {
        match &self.engine {
            Engine::Real { .. } => Ok(self.own(Payload::Real(ct))),
            Engine::Mock(_) => Err(Error::ParseError(
                "mock backend cannot adopt wire ciphertexts".into(),
            )),
        }
    }

    /// Encrypt at the top level and the scheme scale.
    pub fn encrypt<R: Rng + Send + ?Sized>(
        &self,
        values: &[f64],
        rng: &mut R,
    ) -> Result<BackendVector> {
        self.encrypt_scaled(values, self.delta(), rng)
    }

    pub fn encrypt_scaled<R: Rng + Send + ?Sized>(
        &self,
        values: &[f64],
        scale: f64,
        rng: &mut R,
    ) -> Result<BackendVector> {
        let slots = self.slots();
        if values.len() > slots {
            return Err(Error::TooManyValues {
                got: values.len(),
                slots,
            });
        }
        match &self.engine {
            Engine::Real { ctx, eval } => {
                let pt = eval.encode(values, self.top_level(), scale)?;
                let ct = ctx.run(|| eval.encrypt(&pt, ctx.public_key(), rng))?;
                Ok(self.own(Payload::Real(ct)))
            }
            Engine::Mock(m) => {
                let mut padded = values.to_vec();
                padded.resize(slots, 0.0);
                Ok(self.own(Payload::Mock(MockCiphertext {
                    slots: padded,
                    scale,
                    level: m.params.top_level(),
                })))
            }
        }
    }

    pub fn decrypt(&self, v: &BackendVector) -> Result<Vec<f64>> {
        self.check_owned(v)?;
        match (&self.engine, &v.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(ct)) => {
                let sk = ctx
                    .secret_key()
                    .ok_or_else(|| Error::MissingKey("secret key".into()))?;
                let pt = ctx.run(|| eval.decrypt(ct, sk))?;
                eval.decode(&pt)
            }
            (Engine::Mock(_), Payload::Mock(m)) => Ok(m.slots.clone()),
            _ => Err(Error::BackendMismatch),
        }
    }

    pub fn add(&self, a: &BackendVector, b: &BackendVector) -> Result<BackendVector> {
        self.check_pair(a, b)?;
        let out = match (&self.engine, &a.payload, &b.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(x), Payload::Real(y)) => {
                Payload::Real(ctx.run(|| eval.add(x, y))?)
            }
            (Engine::Mock(_), Payload::Mock(x), Payload::Mock(y)) => {
                let slots = x.slots.iter().zip(&y.slots).map(|(p, q)| p + q).collect();
                Payload::Mock(MockCiphertext {
                    slots,
                    scale: x.scale,
                    level: x.level,
                })
            }
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::Add);
        Ok(self.own(out))
    }

    pub fn sub(&self, a: &BackendVector, b: &BackendVector) -> Result<BackendVector> {
        self.check_pair(a, b)?;
        let out = match (&self.engine, &a.payload, &b.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(x), Payload::Real(y)) => {
                Payload::Real(ctx.run(|| eval.sub(x, y))?)
            }
            (Engine::Mock(_), Payload::Mock(x), Payload::Mock(y)) => {
                let slots = x.slots.iter().zip(&y.slots).map(|(p, q)| p - q).collect();
                Payload::Mock(MockCiphertext {
                    slots,
                    scale: x.scale,
                    level: x.level,
                })
            }
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::Sub);
        Ok(self.own(out))
    }

    pub fn negate(&self, a: &BackendVector) -> Result<BackendVector> {
        self.check_owned(a)?;
        let out = match (&self.engine, &a.payload) {
            (Engine::Real { eval, .. }, Payload::Real(x)) => Payload::Real(eval.negate(x)),
            (Engine::Mock(_), Payload::Mock(x)) => Payload::Mock(MockCiphertext {
                slots: x.slots.iter().map(|v| -v).collect(),
                scale: x.scale,
                level: x.level,
            }),
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::Negate);
        Ok(self.own(out))
    }

    fn padded(&self, values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        v.resize(self.slots(), 0.0);
        v
    }

    pub fn add_plain(&self, a: &BackendVector, values: &[f64]) -> Result<BackendVector> {
        self.check_owned(a)?;
        let out = match (&self.engine, &a.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(x)) => {
                Payload::Real(ctx.run(|| eval.add_plain(x, values))?)
            }
            (Engine::Mock(_), Payload::Mock(x)) => {
                let padded = self.padded(values);
                Payload::Mock(MockCiphertext {
                    slots: x.slots.iter().zip(&padded).map(|(p, q)| p + q).collect(),
                    scale: x.scale,
                    level: x.level,
                })
            }
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::AddPlain);
        Ok(self.own(out))
    }

    pub fn sub_plain(&self, a: &BackendVector, values: &[f64]) -> Result<BackendVector> {
        let neg: Vec<f64> = values.iter().map(|v| -v).collect();
        let out = self.add_plain(a, &neg)?;
        if let Some(handle) = self.trace.read().unwrap().as_ref() {
            let mut t = handle.lock().unwrap();
            t.pop();
            t.push(OpEvent::SubPlain);
        }
        Ok(out)
    }

    /// Ciphertext product under the context flags (relinearize + rescale).
    /// Scales multiply, so only level agreement is required.
    pub fn mul(&self, a: &BackendVector, b: &BackendVector) -> Result<BackendVector> {
        self.check_owned(a)?;
        self.check_owned(b)?;
        if a.level() != b.level() {
            return Err(Error::LevelMismatch {
                left: a.level(),
                right: b.level(),
            });
        }
        let level = a.level();
        if self.auto_rescale() && level < 2 {
            return Err(Error::LevelExhausted(format!(
                "multiplication at level {level} cannot rescale (two-prime floor)"
            )));
        }
        self.scale_budget(a.scale() * b.scale(), level)?;
        let out = match (&self.engine, &a.payload, &b.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(x), Payload::Real(y)) => {
                Payload::Real(ctx.run(|| eval.mul(x, y, ctx.relin_key()))?)
            }
            (Engine::Mock(m), Payload::Mock(x), Payload::Mock(y)) => {
                if !m.has_relin {
                    return Err(Error::MissingKey("relinearization key".into()));
                }
                let slots: Vec<f64> = x.slots.iter().zip(&y.slots).map(|(p, q)| p * q).collect();
                let mut out = MockCiphertext {
                    slots,
                    scale: x.scale * y.scale,
                    level: x.level,
                };
                if m.auto_rescale {
                    out.scale /= self.prime_f64(out.level);
                    out.level -= 1;
                }
                Payload::Mock(out)
            }
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::MulCt { level });
        Ok(self.own(out))
    }

    pub fn square(&self, a: &BackendVector) -> Result<BackendVector> {
        self.mul(a, a)
    }

    /// Flag-driven plain product (scale-preserving under auto-rescale).
    pub fn mul_plain(&self, a: &BackendVector, values: &[f64]) -> Result<BackendVector> {
        if self.auto_rescale() {
            let level = a.level();
            if level < 2 {
                return Err(Error::LevelExhausted(format!(
                    "multiplication at level {level} cannot rescale (two-prime floor)"
                )));
            }
            let prod = self.mul_plain_raw(a, values, self.prime_f64(level))?;
            let out = self.rescale(&prod)?;
            if let Some(handle) = self.trace.read().unwrap().as_ref() {
                let mut t = handle.lock().unwrap();
                t.pop(); // drop the inner Rescale
                t.pop(); // drop the inner MulPlain
                t.push(OpEvent::MulPlain { level });
                t.push(OpEvent::Rescale { level });
            }
            Ok(out)
        } else {
            self.mul_plain_raw(a, values, self.delta())
        }
    }

    /// Plain product at an explicit plaintext scale; never rescales.
    pub fn mul_plain_raw(
        &self,
        a: &BackendVector,
        values: &[f64],
        pt_scale: f64,
    ) -> Result<BackendVector> {
        self.check_owned(a)?;
        let level = a.level();
        self.scale_budget(a.scale() * pt_scale, level)?;
        let out = match (&self.engine, &a.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(x)) => {
                Payload::Real(ctx.run(|| eval.mul_plain_raw(x, values, pt_scale))?)
            }
            (Engine::Mock(_), Payload::Mock(x)) => {
                let padded = self.padded(values);
                Payload::Mock(MockCiphertext {
                    slots: x.slots.iter().zip(&padded).map(|(p, q)| p * q).collect(),
                    scale: x.scale * pt_scale,
                    level: x.level,
                })
            }
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::MulPlain { level });
        Ok(self.own(out))
    }

    pub fn rescale(&self, a: &BackendVector) -> Result<BackendVector> {
        self.check_owned(a)?;
        let level = a.level();
        if level < 2 {
            return Err(Error::LevelExhausted(format!(
                "rescale at level {level} would leave fewer than two active primes"
            )));
        }
        let out = match (&self.engine, &a.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(x)) => {
                Payload::Real(ctx.run(|| eval.rescale(x))?)
            }
            (Engine::Mock(_), Payload::Mock(x)) => Payload::Mock(MockCiphertext {
                slots: x.slots.clone(),
                scale: x.scale / self.prime_f64(level),
                level: level - 1,
            }),
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::Rescale { level });
        Ok(self.own(out))
    }

    /// Lossless level alignment: truncate primes without dividing.
    pub fn mod_drop(&self, a: &BackendVector, count: usize) -> Result<BackendVector> {
        self.check_owned(a)?;
        if count == 0 {
            return Ok(a.clone());
        }
        if count > a.level() {
            return Err(Error::LevelExhausted(format!(
                "cannot drop {count} levels from level {}",
                a.level()
            )));
        }
        let out = match (&self.engine, &a.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(x)) => {
                Payload::Real(ctx.run(|| eval.mod_drop(x, count))?)
            }
            (Engine::Mock(_), Payload::Mock(x)) => Payload::Mock(MockCiphertext {
                slots: x.slots.clone(),
                scale: x.scale,
                level: x.level - count,
            }),
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::ModDrop { count });
        Ok(self.own(out))
    }

    /// Cyclic left rotation by `step` slots (negative rotates right).
    pub fn rotate(&self, a: &BackendVector, step: i64) -> Result<BackendVector> {
        self.check_owned(a)?;
        let out = match (&self.engine, &a.payload) {
            (Engine::Real { ctx, eval }, Payload::Real(x)) => {
                Payload::Real(ctx.run(|| eval.rotate(x, step, ctx.galois_keys()))?)
            }
            (Engine::Mock(m), Payload::Mock(x)) => {
                let slots = m.params.slot_count();
                // same planning (and errors) as the real path
                let plan = plan_rotation(slots, |s| m.steps.contains(&s), step)?;
                let total: usize = plan.iter().sum::<usize>() % slots;
                let mut rotated = x.slots.clone();
                rotated.rotate_left(total);
                Payload::Mock(MockCiphertext {
                    slots: rotated,
                    scale: x.scale,
                    level: x.level,
                })
            }
            _ => return Err(Error::BackendMismatch),
        };
        self.record(OpEvent::Rotate { step });
        Ok(self.own(out))
    }
}
