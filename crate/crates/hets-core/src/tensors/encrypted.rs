//! The encrypted flat vector: a single ciphertext plus packing metadata,
//! with the element-wise op catalog, depth-minimal power/polyval ladders
//! and the replication-based dot products.
//!
//! Replication accounting: `valid_span` counts the leading slots that hold
//! the n-periodic replication pattern. A left-rotation-based dot over
//! length n reads n-1 slots past every output slot, so the output's span
//! shrinks by n-1 — unless the pattern tiles the slots exactly, in which
//! case rotation is fully cyclic and no margin is ever spent.

use rand::Rng;

use super::plain::PlainTensor;
use crate::backend::{Backend, BackendVector};
use crate::error::{Error, Result};

/// Slot layout of an encrypted vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Logical vector in slots [0, n), replicas at offsets k·n.
    Flat,
    /// Convolution-window layout: tap j of window w at slot j·chunk + w.
    Windowed {
        windows: usize,
        taps: usize,
        chunk: usize,
    },
}

/// A ciphertext with packing metadata exposing the tensor op catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedVector {
    pub(crate) inner: BackendVector,
    /// Logical element count.
    pub length: usize,
    /// Leading slots holding the replication pattern (a multiple of length).
    pub valid_span: usize,
    pub layout: Layout,
}

impl EncryptedVector {
    pub fn replicas(&self) -> usize {
        self.valid_span / self.length.max(1)
    }

    pub fn level(&self) -> usize {
        self.inner.level()
    }

    pub fn scale(&self) -> f64 {
        self.inner.scale()
    }

    pub fn remaining_levels(&self) -> usize {
        self.inner.remaining_levels()
    }

    pub fn inner(&self) -> &BackendVector {
        &self.inner
    }

    /// Same packing metadata over a different ciphertext (for element-wise
    /// results and tests that manipulate the raw ciphertext).
    pub fn with_inner(&self, inner: BackendVector) -> Self {
        EncryptedVector {
            inner,
            length: self.length,
            valid_span: self.valid_span,
            layout: self.layout,
        }
    }

    fn require_flat(&self) -> Result<()> {
        if self.layout != Layout::Flat {
            return Err(Error::LayoutMismatch(
                "operation requires a flat vector, not a windowed one".into(),
            ));
        }
        Ok(())
    }
}

/// Encrypt a rank-1 tensor. With `replicate`, the vector is tiled
/// floor(slots / n) times before encryption.
pub fn encrypt_vector<R: Rng + Send + ?Sized>(
    backend: &Backend,
    v: &PlainTensor,
    replicate: bool,
    rng: &mut R,
) -> Result<EncryptedVector> {
    v.require_rank(1)?;
    let slots = backend.slots();
    let n = v.len();
    if n == 0 || n > slots {
        return Err(Error::TooLong { got: n, slots });
    }
    let copies = if replicate { slots / n } else { 1 };
    let mut tiled = Vec::with_capacity(copies * n);
    for _ in 0..copies {
        tiled.extend_from_slice(&v.data);
    }
    let inner = backend.encrypt(&tiled, rng)?;
    Ok(EncryptedVector {
        inner,
        length: n,
        valid_span: copies * n,
        layout: Layout::Flat,
    })
}

/// Decrypt the logical values: slots [0, length).
pub fn decrypt_vector(backend: &Backend, ev: &EncryptedVector) -> Result<PlainTensor> {
    let mut slots = backend.decrypt(&ev.inner)?;
    slots.truncate(ev.length);
    Ok(PlainTensor::vector(slots))
}

pub fn negate(backend: &Backend, ev: &EncryptedVector) -> Result<EncryptedVector> {
    Ok(ev.with_inner(backend.negate(&ev.inner)?))
}

/// Element-wise square; consumes exactly one level.
pub fn square(backend: &Backend, ev: &EncryptedVector) -> Result<EncryptedVector> {
    Ok(ev.with_inner(backend.square(&ev.inner)?))
}

/// Element-wise p-th power via a balanced product ladder; consumes exactly
/// ceil(log2 p) levels.
pub fn power(backend: &Backend, ev: &EncryptedVector, p: u32) -> Result<EncryptedVector> {
    if p == 0 {
        return Err(Error::ZeroExponent);
    }
    let depth = depth_of_power(p);
    if depth > ev.remaining_levels() {
        return Err(Error::LevelExhausted(format!(
            "power({p}) needs {depth} levels, {} remaining",
            ev.remaining_levels()
        )));
    }
    let mut memo: std::collections::BTreeMap<u32, BackendVector> = Default::default();
    memo.insert(1, ev.inner.clone());
    let out = build_power(backend, &mut memo, p)?;
    Ok(ev.with_inner(out))
}

/// ceil(log2 p) for p >= 1.
pub fn depth_of_power(p: u32) -> usize {
    if p <= 1 {
        0
    } else {
        (u32::BITS - (p - 1).leading_zeros()) as usize
    }
}

fn build_power(
    backend: &Backend,
    memo: &mut std::collections::BTreeMap<u32, BackendVector>,
    p: u32,
) -> Result<BackendVector> {
    if let Some(v) = memo.get(&p) {
        return Ok(v.clone());
    }
    // balanced split keeps the ladder depth at ceil(log2 p)
    let lo = build_power(backend, memo, p / 2)?;
    let hi = build_power(backend, memo, p.div_ceil(2))?;
    let (lo, hi) = align_levels(backend, &lo, &hi)?;
    let out = backend.mul(&lo, &hi)?;
    memo.insert(p, out.clone());
    Ok(out)
}

fn align_levels(
    backend: &Backend,
    a: &BackendVector,
    b: &BackendVector,
) -> Result<(BackendVector, BackendVector)> {
    let target = a.level().min(b.level());
    Ok((
        backend.mod_drop(a, a.level() - target)?,
        backend.mod_drop(b, b.level() - target)?,
    ))
}

enum Operand<'a> {
    Enc(&'a EncryptedVector),
    Plain(&'a PlainTensor),
}

/// Element-wise add/sub/mul with an encrypted or plain right operand.
pub fn add(backend: &Backend, a: &EncryptedVector, b: &EncryptedVector) -> Result<EncryptedVector> {
    elementwise(backend, a, Operand::Enc(b), ElemOp::Add)
}

pub fn sub(backend: &Backend, a: &EncryptedVector, b: &EncryptedVector) -> Result<EncryptedVector> {
    elementwise(backend, a, Operand::Enc(b), ElemOp::Sub)
}

pub fn mul(backend: &Backend, a: &EncryptedVector, b: &EncryptedVector) -> Result<EncryptedVector> {
    elementwise(backend, a, Operand::Enc(b), ElemOp::Mul)
}

pub fn add_plain(
    backend: &Backend,
    a: &EncryptedVector,
    b: &PlainTensor,
) -> Result<EncryptedVector> {
    elementwise(backend, a, Operand::Plain(b), ElemOp::Add)
}

pub fn sub_plain(
    backend: &Backend,
    a: &EncryptedVector,
    b: &PlainTensor,
) -> Result<EncryptedVector> {
    elementwise(backend, a, Operand::Plain(b), ElemOp::Sub)
}

pub fn mul_plain(
    backend: &Backend,
    a: &EncryptedVector,
    b: &PlainTensor,
) -> Result<EncryptedVector> {
    elementwise(backend, a, Operand::Plain(b), ElemOp::Mul)
}

enum ElemOp {
    Add,
    Sub,
    Mul,
}

fn elementwise(
    backend: &Backend,
    a: &EncryptedVector,
    b: Operand<'_>,
    op: ElemOp,
) -> Result<EncryptedVector> {
    a.require_flat()?;
    match b {
        Operand::Enc(b) => {
            b.require_flat()?;
            if a.length != b.length {
                return Err(Error::ShapeMismatch(format!(
                    "element-wise lengths differ: {} vs {}",
                    a.length, b.length
                )));
            }
            let inner = match op {
                ElemOp::Add => backend.add(&a.inner, &b.inner)?,
                ElemOp::Sub => backend.sub(&a.inner, &b.inner)?,
                ElemOp::Mul => backend.mul(&a.inner, &b.inner)?,
            };
            Ok(EncryptedVector {
                inner,
                length: a.length,
                valid_span: a.valid_span.min(b.valid_span),
                layout: Layout::Flat,
            })
        }
        Operand::Plain(t) => {
            t.require_rank(1)?;
            if a.length != t.len() {
                return Err(Error::ShapeMismatch(format!(
                    "element-wise lengths differ: {} vs {}",
                    a.length,
                    t.len()
                )));
            }
            // tile the plain operand across the replicas
            let mut tiled = Vec::with_capacity(a.valid_span);
            while tiled.len() < a.valid_span {
                tiled.extend_from_slice(&t.data);
            }
            tiled.truncate(a.valid_span);
            let inner = match op {
                ElemOp::Add => backend.add_plain(&a.inner, &tiled)?,
                ElemOp::Sub => backend.sub_plain(&a.inner, &tiled)?,
                ElemOp::Mul => backend.mul_plain(&a.inner, &tiled)?,
            };
            Ok(ev_like(a, inner))
        }
    }
}

fn ev_like(a: &EncryptedVector, inner: BackendVector) -> EncryptedVector {
    EncryptedVector {
        inner,
        length: a.length,
        valid_span: a.valid_span,
        layout: a.layout,
    }
}

/// Evaluate Σ coeffs[i] · v^i (ascending degree) with a depth-minimal
/// circuit: shared balanced power ladder plus one constant-multiply level.
pub fn polyval(backend: &Backend, ev: &EncryptedVector, coeffs: &[f64]) -> Result<EncryptedVector> {
    if coeffs.is_empty() {
        return Err(Error::EmptyCoeffs);
    }
    ev.require_flat()?;
    let degree = coeffs
        .iter()
        .rposition(|&c| c != 0.0)
        .unwrap_or(0);
    if degree == 0 {
        // constant polynomial: zero out the vector, add the constant
        let zero = backend.sub(&ev.inner, &ev.inner)?;
        let c = vec![coeffs[0]; backend.slots()];
        return Ok(ev_like(ev, backend.add_plain(&zero, &c)?));
    }
    let need = depth_of_power(degree as u32) + 1;
    if need > ev.remaining_levels() {
        return Err(Error::LevelExhausted(format!(
            "polyval of degree {degree} needs {need} levels, {} remaining",
            ev.remaining_levels()
        )));
    }

    let mut memo: std::collections::BTreeMap<u32, BackendVector> = Default::default();
    memo.insert(1, ev.inner.clone());
    let mut powers = Vec::new();
    for (i, &c) in coeffs.iter().enumerate().take(degree + 1).skip(1) {
        if c != 0.0 {
            powers.push((i, c, build_power(backend, &mut memo, i as u32)?));
        }
    }
    let floor_level = powers.iter().map(|(_, _, p)| p.level()).min().unwrap();
    // common product scale so the terms can be summed, then rescaled once
    let s_ref = powers
        .iter()
        .find(|(_, _, p)| p.level() == floor_level)
        .map(|(_, _, p)| p.scale())
        .unwrap();
    let prod_scale = backend.prime_f64(floor_level) * s_ref;

    let slots = backend.slots();
    let mut acc: Option<BackendVector> = None;
    for (_, c, p) in &powers {
        let aligned = backend.mod_drop(p, p.level() - floor_level)?;
        let term = backend.mul_plain_raw(&aligned, &vec![*c; slots], prod_scale / aligned.scale())?;
        acc = Some(match acc {
            None => term,
            Some(prev) => backend.add(&prev, &term)?,
        });
    }
    let mut out = backend.rescale(&acc.unwrap())?;
    if coeffs[0] != 0.0 {
        out = backend.add_plain(&out, &vec![coeffs[0]; slots])?;
    }
    Ok(ev_like(ev, out))
}

/// Dot product of two equal-length vectors (encrypted · encrypted):
/// element-wise product then a rotate-and-add fold; the total lands in
/// slot 0. Requires unreplicated operands so the fold sums only the
/// logical window.
pub fn dot_product(
    backend: &Backend,
    a: &EncryptedVector,
    b: &EncryptedVector,
) -> Result<EncryptedVector> {
    let prod = mul(backend, a, b)?;
    fold_sum(backend, prod)
}

/// Dot product against a plain vector.
pub fn dot_product_plain(
    backend: &Backend,
    a: &EncryptedVector,
    b: &PlainTensor,
) -> Result<EncryptedVector> {
    let prod = mul_plain(backend, a, b)?;
    fold_sum(backend, prod)
}

fn fold_sum(backend: &Backend, prod: EncryptedVector) -> Result<EncryptedVector> {
    if prod.replicas() != 1 {
        return Err(Error::LayoutMismatch(
            "dot product requires an unreplicated vector".into(),
        ));
    }
    let mut acc = prod.inner;
    let width = prod.length.next_power_of_two();
    let mut step = 1usize;
    while step < width {
        acc = backend.add(&acc, &backend.rotate(&acc, step as i64)?)?;
        step <<= 1;
    }
    Ok(EncryptedVector {
        inner: acc,
        length: 1,
        valid_span: 1,
        layout: Layout::Flat,
    })
}

/// Vector · plain-matrix product by the left-rotation diagonal method.
///
/// The rotated vector at step t contributes row (j+t) mod n to output
/// column j mod m, so n rotations by one slot cover every matrix row for
/// every output slot; the result is m-periodic across the span it fills.
pub fn dot_plain_matrix(
    backend: &Backend,
    ev: &EncryptedVector,
    m: &PlainTensor,
) -> Result<EncryptedVector> {
    dot_plain_matrix_scaled(backend, ev, m, None)
}

/// As `dot_plain_matrix`, with an explicit post-rescale target scale.
pub fn dot_plain_matrix_scaled(
    backend: &Backend,
    ev: &EncryptedVector,
    mat: &PlainTensor,
    target_scale: Option<f64>,
) -> Result<EncryptedVector> {
    ev.require_flat()?;
    mat.require_rank(2)?;
    let n = mat.shape[0];
    let m_cols = mat.shape[1];
    if ev.length != n {
        return Err(Error::ShapeMismatch(format!(
            "vector length {} does not match matrix rows {n}",
            ev.length
        )));
    }
    if ev.remaining_levels() < 1 {
        return Err(Error::LevelExhausted(
            "matrix product needs one remaining level".into(),
        ));
    }
    let slots = backend.slots();
    let cyclic = ev.valid_span == slots;
    let out_span = if cyclic {
        slots
    } else {
        let usable = ev.valid_span.saturating_sub(n - 1);
        if usable < m_cols {
            return Err(Error::ReplicationExhausted(format!(
                "span {} after {} rotations leaves {usable} slots, need {m_cols}",
                ev.valid_span,
                n - 1
            )));
        }
        usable
    };

    let level = ev.level();
    let s_in = ev.scale();
    let pt_scale = match target_scale {
        Some(t) => backend.prime_f64(level) * t / s_in,
        None => backend.prime_f64(level),
    };

    let mut acc: Option<BackendVector> = None;
    let mut rotated = ev.inner.clone();
    for t in 0..n {
        if t > 0 {
            rotated = backend.rotate(&rotated, 1)?;
        }
        let mut diag = vec![0.0; out_span];
        for (j, d) in diag.iter_mut().enumerate() {
            *d = mat.at2((j + t) % n, j % m_cols);
        }
        let term = backend.mul_plain_raw(&rotated, &diag, pt_scale)?;
        acc = Some(match acc {
            None => term,
            Some(prev) => backend.add(&prev, &term)?,
        });
    }
    let out = backend.rescale(&acc.unwrap())?;
    let replicas = out_span / m_cols;
    Ok(EncryptedVector {
        inner: out,
        length: m_cols,
        valid_span: replicas * m_cols,
        layout: Layout::Flat,
    })
}

/// Fill all slots with copies of the logical vector by rotate-and-add
/// doubling. Requires a power-of-two copy count and zeros outside the
/// logical vector (fresh unreplicated encryptions and masked convolution
/// outputs satisfy this).
pub fn replicate_to_fill(backend: &Backend, ev: &EncryptedVector) -> Result<EncryptedVector> {
    ev.require_flat()?;
    let slots = backend.slots();
    if ev.valid_span == slots {
        return Ok(ev.clone());
    }
    if ev.replicas() != 1 {
        return Err(Error::LayoutMismatch(
            "replication starts from a single copy".into(),
        ));
    }
    let n = ev.length;
    if slots % n != 0 || !(slots / n).is_power_of_two() {
        return Err(Error::LayoutMismatch(format!(
            "cannot tile {n} elements into {slots} slots by doubling"
        )));
    }
    let mut acc = ev.inner.clone();
    let mut span = n;
    while span < slots {
        acc = backend.add(&acc, &backend.rotate(&acc, -(span as i64))?)?;
        span *= 2;
    }
    Ok(EncryptedVector {
        inner: acc,
        length: n,
        valid_span: slots,
        layout: Layout::Flat,
    })
}
