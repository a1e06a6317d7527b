//! The central key/configuration object: owns parameters, generated keys,
//! evaluation flags and the parallelism setting. A context is an immutable
//! value; "set" operations return updated copies, so contexts can be
//! shared freely across server request handlers.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::scheme::{
    keygen, Encoder, Evaluator, GaloisKeys, PublicKey, RelinKey, SchemeParams, SecretKey,
};

struct ContextInner {
    params: Arc<SchemeParams>,
    encoder: Arc<Encoder>,
    secret: Option<Arc<SecretKey>>,
    public_key: Arc<PublicKey>,
    relin_key: Option<Arc<RelinKey>>,
    galois_keys: Arc<GaloisKeys>,
    auto_rescale: bool,
    auto_relin: bool,
    worker_count: usize,
    pool: rayon::ThreadPool,
}

/// Immutable, shareable handle over parameters, keys, flags and the
/// worker pool.
#[derive(Clone)]
pub struct Context {
    inner: Arc<ContextInner>,
}

fn build_pool(worker_count: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count)
        .build()
        .map_err(|e| Error::InvalidParams(format!("worker pool: {e}")))
}

impl Context {
    /// Generate a fully keyed private context. The Galois key set is the
    /// default power-of-two steps (±2^k) plus any `extra_steps`.
    /// Deterministic under a fixed seed.
    pub fn create(
        params: Arc<SchemeParams>,
        extra_steps: &[i64],
        seed: Option<u64>,
    ) -> Result<Context> {
        if params.chain_len() < 2 {
            return Err(Error::InvalidParams("chain length must be >= 2".into()));
        }
        let mut steps = Self::default_rotation_steps(&params);
        for &s in extra_steps {
            if !steps.contains(&s) {
                steps.push(s);
            }
        }
        let mut rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_os_rng(),
        };
        let (sk, pk, rlk, gks) = keygen(&params, &steps, &mut rng)?;
        let worker_count = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        let encoder = Arc::new(Encoder::new(params.degree()));
        Ok(Context {
            inner: Arc::new(ContextInner {
                params,
                encoder,
                secret: Some(Arc::new(sk)),
                public_key: Arc::new(pk),
                relin_key: Some(Arc::new(rlk)),
                galois_keys: Arc::new(gks),
                auto_rescale: true,
                auto_relin: true,
                worker_count,
                pool: build_pool(worker_count)?,
            }),
        })
    }

    /// Create by profile name ("mnist-8192" or "test-4096").
    pub fn create_named(name: &str, extra_steps: &[i64], seed: Option<u64>) -> Result<Context> {
        Self::create(SchemeParams::by_name(name)?, extra_steps, seed)
    }

    /// ±2^k for every k below log2(slot_count).
    pub fn default_rotation_steps(params: &SchemeParams) -> Vec<i64> {
        let log_slots = params.slot_count().trailing_zeros();
        let mut steps = Vec::with_capacity(2 * log_slots as usize);
        for k in 0..log_slots {
            steps.push(1i64 << k);
            steps.push(-(1i64 << k));
        }
        steps
    }

    /// Assemble a context from deserialized pieces (wire module).
    pub(crate) fn from_parts(
        params: Arc<SchemeParams>,
        secret: Option<SecretKey>,
        public_key: PublicKey,
        relin_key: Option<RelinKey>,
        galois_keys: GaloisKeys,
        auto_rescale: bool,
        auto_relin: bool,
        worker_count: usize,
    ) -> Result<Context> {
        let encoder = Arc::new(Encoder::new(params.degree()));
        Ok(Context {
            inner: Arc::new(ContextInner {
                params,
                encoder,
                secret: secret.map(Arc::new),
                public_key: Arc::new(public_key),
                relin_key: relin_key.map(Arc::new),
                galois_keys: Arc::new(galois_keys),
                auto_rescale,
                auto_relin,
                worker_count,
                pool: build_pool(worker_count)?,
            }),
        })
    }

    /// Secret-free copy: all evaluation keys retained, decryption raises
    /// MissingKey. Idempotent.
    pub fn make_public(&self) -> Context {
        if self.inner.secret.is_none() {
            return self.clone();
        }
        let i = &self.inner;
        Context {
            inner: Arc::new(ContextInner {
                params: i.params.clone(),
                encoder: i.encoder.clone(),
                secret: None,
                public_key: i.public_key.clone(),
                relin_key: i.relin_key.clone(),
                galois_keys: i.galois_keys.clone(),
                auto_rescale: i.auto_rescale,
                auto_relin: i.auto_relin,
                worker_count: i.worker_count,
                pool: build_pool(i.worker_count).expect("pool"),
            }),
        }
    }

    /// Updated copy with new evaluation flags and worker count.
    pub fn set_flags(
        &self,
        auto_rescale: bool,
        auto_relin: bool,
        worker_count: usize,
    ) -> Result<Context> {
        if worker_count == 0 {
            return Err(Error::InvalidWorkerCount(0));
        }
        let i = &self.inner;
        Ok(Context {
            inner: Arc::new(ContextInner {
                params: i.params.clone(),
                encoder: i.encoder.clone(),
                secret: i.secret.clone(),
                public_key: i.public_key.clone(),
                relin_key: i.relin_key.clone(),
                galois_keys: i.galois_keys.clone(),
                auto_rescale,
                auto_relin,
                worker_count,
                pool: build_pool(worker_count)?,
            }),
        })
    }

    /// Copy without the relinearization key (ciphertext products then fail
    /// with MissingKey).
    pub fn without_relin_key(&self) -> Context {
        let i = &self.inner;
        Context {
            inner: Arc::new(ContextInner {
                params: i.params.clone(),
                encoder: i.encoder.clone(),
                secret: i.secret.clone(),
                public_key: i.public_key.clone(),
                relin_key: None,
                galois_keys: i.galois_keys.clone(),
                auto_rescale: i.auto_rescale,
                auto_relin: i.auto_relin,
                worker_count: i.worker_count,
                pool: build_pool(i.worker_count).expect("pool"),
            }),
        }
    }

    pub fn params(&self) -> &Arc<SchemeParams> {
        &self.inner.params
    }

    pub fn encoder(&self) -> &Arc<Encoder> {
        &self.inner.encoder
    }

    pub fn slot_count(&self) -> usize {
        self.inner.params.slot_count()
    }

    pub fn is_public(&self) -> bool {
        self.inner.secret.is_none()
    }

    pub fn auto_rescale(&self) -> bool {
        self.inner.auto_rescale
    }

    pub fn auto_relin(&self) -> bool {
        self.inner.auto_relin
    }

    pub fn worker_count(&self) -> usize {
        self.inner.worker_count
    }

    pub fn secret_key(&self) -> Option<&SecretKey> {
        self.inner.secret.as_deref()
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.inner.public_key
    }

    pub fn relin_key(&self) -> Option<&RelinKey> {
        self.inner.relin_key.as_deref()
    }

    pub fn galois_keys(&self) -> &GaloisKeys {
        &self.inner.galois_keys
    }

    /// Evaluator configured with this context's flags.
    pub fn evaluator(&self) -> Evaluator {
        let mut ev = Evaluator::new(self.inner.params.clone());
        ev.encoder = self.inner.encoder.clone();
        ev.auto_rescale = self.inner.auto_rescale;
        ev.auto_relin = self.inner.auto_relin;
        ev
    }

    /// Run a closure inside this context's worker pool.
    pub fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.inner.pool.install(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_ctx() -> Context {
        Context::create_named("test-4096", &[], Some(99)).unwrap()
    }

    #[test]
    fn create_context_slot_counts() {
        let ctx = test_ctx();
        assert_eq!(ctx.slot_count(), 2048);
        assert!(!ctx.is_public());
        assert!(ctx.secret_key().is_some());
    }

    #[test]
    fn make_public_drops_only_secret() {
        let ctx = test_ctx();
        let public = ctx.make_public();
        assert!(public.is_public());
        assert!(public.secret_key().is_none());
        assert!(public.relin_key().is_some());
        assert!(!public.galois_keys().supported_steps().is_empty());
        // idempotent
        let again = public.make_public();
        assert!(again.is_public());
    }

    #[test]
    fn set_flags_returns_updated_copy() {
        let ctx = test_ctx();
        let off = ctx.set_flags(false, false, 2).unwrap();
        assert!(!off.auto_rescale());
        assert!(!off.auto_relin());
        assert_eq!(off.worker_count(), 2);
        // original unchanged
        assert!(ctx.auto_rescale());
    }

    #[test]
    fn zero_workers_rejected() {
        let ctx = test_ctx();
        assert!(matches!(
            ctx.set_flags(true, true, 0),
            Err(Error::InvalidWorkerCount(0))
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let a = Context::create_named("test-4096", &[], Some(7)).unwrap();
        let b = Context::create_named("test-4096", &[], Some(7)).unwrap();
        assert_eq!(a.public_key(), b.public_key());
        assert_eq!(
            a.galois_keys().supported_steps(),
            b.galois_keys().supported_steps()
        );
    }

    #[test]
    fn default_steps_cover_powers_of_two() {
        let params = SchemeParams::test_4096();
        let steps = Context::default_rotation_steps(&params);
        assert!(steps.contains(&1));
        assert!(steps.contains(&1024));
        assert!(steps.contains(&-1));
        assert_eq!(steps.len(), 22);
    }
}
