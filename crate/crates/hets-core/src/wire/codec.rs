//! Bit-exact payload encoding for contexts, ciphertexts and encrypted
//! vectors. Residues are packed at exactly their prime's bit width, which
//! is what makes ciphertext size accounting meaningful.

use std::sync::Arc;

use crate::context::Context;
use crate::error::{Error, Result};
use crate::ring::{Domain, PrimeContext, RingPoly};
use crate::scheme::{
    Ciphertext, GaloisKeys, PublicKey, RelinKey, SchemeParams, SecretKey, SwitchKey,
};
use crate::tensors::{EncryptedVector, Layout};

// ---------------------------------------------------------------- bits --

struct BitWriter {
    out: Vec<u8>,
    acc: u128,
    nbits: u32,
}

impl BitWriter {
    fn new(capacity: usize) -> Self {
        BitWriter {
            out: Vec::with_capacity(capacity),
            acc: 0,
            nbits: 0,
        }
    }

    fn push(&mut self, v: u64, width: u32) {
        debug_assert!(width <= 64 && (width == 64 || v < (1u64 << width)));
        self.acc |= (v as u128) << self.nbits;
        self.nbits += width;
        while self.nbits >= 8 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.nbits -= 8;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.out.push(self.acc as u8);
        }
        self.out
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    acc: u128,
    nbits: u32,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader {
            bytes,
            pos: 0,
            acc: 0,
            nbits: 0,
        }
    }

    fn pull(&mut self, width: u32) -> Result<u64> {
        while self.nbits < width {
            let b = *self
                .bytes
                .get(self.pos)
                .ok_or_else(|| Error::Truncated("bit-packed block".into()))?;
            self.acc |= (b as u128) << self.nbits;
            self.pos += 1;
            self.nbits += 8;
        }
        let v = (self.acc & ((1u128 << width) - 1)) as u64;
        self.acc >>= width;
        self.nbits -= width;
        Ok(v)
    }
}

fn packed_len(count: usize, width: u32) -> usize {
    (count * width as usize).div_ceil(8)
}

// --------------------------------------------------------------- bytes --

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Truncated(format!(
                "need {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn str16(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| Error::ParseError(format!("utf8: {e}")))
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::ParseError(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn put_str16(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

// --------------------------------------------------------------- polys --

fn write_rows(out: &mut Vec<u8>, rows: &[Vec<u64>], ctxs: &[Arc<PrimeContext>]) {
    for (row, ctx) in rows.iter().zip(ctxs) {
        let mut bw = BitWriter::new(packed_len(row.len(), ctx.bits));
        for &v in row {
            bw.push(v, ctx.bits);
        }
        out.extend_from_slice(&bw.finish());
    }
}

fn read_rows(
    r: &mut Reader<'_>,
    ctxs: &[Arc<PrimeContext>],
    count: usize,
    degree: usize,
) -> Result<Vec<Vec<u64>>> {
    let mut rows = Vec::with_capacity(count);
    for ctx in ctxs.iter().take(count) {
        let block = r.take(packed_len(degree, ctx.bits))?;
        let mut br = BitReader::new(block);
        let mut row = Vec::with_capacity(degree);
        for _ in 0..degree {
            let v = br.pull(ctx.bits)?;
            if v >= ctx.p {
                return Err(Error::ParseError(format!(
                    "residue {v} out of range for prime {}",
                    ctx.p
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

// ---------------------------------------------------------- ciphertext --

/// Serialize a ciphertext: level, scale, part count, then per part per
/// active prime a bit-packed residue block.
pub fn serialize_ciphertext(ct: &Ciphertext) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(ct.level as u8);
    out.push(ct.parts.len() as u8);
    out.extend_from_slice(&ct.scale.to_bits().to_le_bytes());
    for part in &ct.parts {
        write_rows(&mut out, &part.rows, &part.params().primes);
    }
    out
}

pub(crate) fn read_ciphertext(r: &mut Reader<'_>, params: &SchemeParams) -> Result<Ciphertext> {
    let level = r.u8()? as usize;
    if level >= params.chain_len() {
        return Err(Error::ParseError(format!(
            "level {level} exceeds the {}-prime chain",
            params.chain_len()
        )));
    }
    let part_count = r.u8()? as usize;
    if !(1..=3).contains(&part_count) {
        return Err(Error::ParseError(format!("bad part count {part_count}")));
    }
    let scale = r.f64()?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::ParseError(format!("bad scale {scale}")));
    }
    let active = level + 1;
    let degree = params.degree();
    let mut parts = Vec::with_capacity(part_count);
    for _ in 0..part_count {
        let rows = read_rows(r, &params.ring.primes, active, degree)?;
        parts.push(RingPoly {
            params: params.ring.clone(),
            rows,
            domain: Domain::Evaluation,
        });
    }
    Ok(Ciphertext {
        parts,
        scale,
        level,
    })
}

pub fn deserialize_ciphertext(params: &SchemeParams, bytes: &[u8]) -> Result<Ciphertext> {
    let mut r = Reader::new(bytes);
    let ct = read_ciphertext(&mut r, params)?;
    r.done()?;
    Ok(ct)
}

// ----------------------------------------------------- encrypted vector --

/// Serialize an encrypted vector: packing metadata then the ciphertext.
/// Only real-backend vectors are serializable.
pub fn serialize_encrypted_vector(ev: &EncryptedVector) -> Result<Vec<u8>> {
    let ct = ev
        .inner()
        .as_real()
        .ok_or_else(|| Error::ParseError("mock vectors are not serializable".into()))?;
    let mut out = Vec::new();
    out.extend_from_slice(&(ev.length as u32).to_le_bytes());
    out.extend_from_slice(&(ev.valid_span as u32).to_le_bytes());
    match ev.layout {
        Layout::Flat => out.push(0),
        Layout::Windowed {
            windows,
            taps,
            chunk,
        } => {
            out.push(1);
            out.extend_from_slice(&(windows as u32).to_le_bytes());
            out.extend_from_slice(&(taps as u32).to_le_bytes());
            out.extend_from_slice(&(chunk as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(&serialize_ciphertext(ct));
    Ok(out)
}

/// Deserialize an encrypted vector, binding it to a (real) backend.
pub fn deserialize_encrypted_vector(
    backend: &crate::backend::Backend,
    bytes: &[u8],
) -> Result<EncryptedVector> {
    let mut r = Reader::new(bytes);
    let length = r.u32()? as usize;
    let valid_span = r.u32()? as usize;
    let layout = match r.u8()? {
        0 => Layout::Flat,
        1 => Layout::Windowed {
            windows: r.u32()? as usize,
            taps: r.u32()? as usize,
            chunk: r.u32()? as usize,
        },
        other => return Err(Error::ParseError(format!("unknown layout tag {other}"))),
    };
    let ct = read_ciphertext(&mut r, backend.params())?;
    r.done()?;
    if length == 0 || length > backend.slots() || valid_span > backend.slots() {
        return Err(Error::ParseError(format!(
            "metadata out of range: length {length}, span {valid_span}"
        )));
    }
    Ok(EncryptedVector {
        inner: backend.adopt(ct)?,
        length,
        valid_span,
        layout,
    })
}

// -------------------------------------------------------------- context --

fn write_switch_key(out: &mut Vec<u8>, key: &SwitchKey, key_ctxs: &[Arc<PrimeContext>]) {
    out.push(key.digits.len() as u8);
    for digit in &key.digits {
        write_rows(out, &digit.b, key_ctxs);
        write_rows(out, &digit.a, key_ctxs);
    }
}

fn read_switch_key(r: &mut Reader<'_>, params: &SchemeParams) -> Result<SwitchKey> {
    let digit_count = r.u8()? as usize;
    if digit_count != params.chain_len() {
        return Err(Error::ParseError(format!(
            "switch key has {digit_count} digits, chain has {}",
            params.chain_len()
        )));
    }
    let key_ctxs = &params.key_ring.primes;
    let rows = params.chain_len() + 1;
    let degree = params.degree();
    let mut digits = Vec::with_capacity(digit_count);
    for _ in 0..digit_count {
        let b = read_rows(r, key_ctxs, rows, degree)?;
        let a = read_rows(r, key_ctxs, rows, degree)?;
        digits.push(crate::scheme::SwitchKeyDigit { b, a });
    }
    Ok(SwitchKey { digits })
}

/// Serialize a context. The secret key travels only when present, so a
/// public context file never contains it.
pub fn serialize_context(ctx: &Context) -> Vec<u8> {
    let params = ctx.params();
    let mut out = Vec::new();
    out.extend_from_slice(&(params.degree() as u32).to_le_bytes());
    out.push(params.chain_len() as u8);
    for p in params.ring.prime_values() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out.extend_from_slice(&params.aux_prime().p.to_le_bytes());
    out.extend_from_slice(&params.scale.to_bits().to_le_bytes());
    put_str16(&mut out, &params.name);
    put_str16(&mut out, &params.security_note);
    out.push(ctx.auto_rescale() as u8);
    out.push(ctx.auto_relin() as u8);
    out.extend_from_slice(&(ctx.worker_count() as u32).to_le_bytes());

    match ctx.secret_key() {
        Some(sk) => {
            out.push(1);
            // ternary coefficients, 2 bits each (-1 stored as 2)
            let coeffs = sk.ternary_coeffs();
            let mut bw = BitWriter::new(coeffs.len() / 4 + 1);
            for &c in coeffs {
                bw.push(if c < 0 { 2 } else { c as u64 }, 2);
            }
            out.extend_from_slice(&bw.finish());
        }
        None => out.push(0),
    }

    let chain_ctxs = &params.ring.primes;
    let pk = ctx.public_key();
    write_rows(&mut out, &pk.b.rows, chain_ctxs);
    write_rows(&mut out, &pk.a.rows, chain_ctxs);

    match ctx.relin_key() {
        Some(rlk) => {
            out.push(1);
            write_switch_key(&mut out, &rlk.0, &params.key_ring.primes);
        }
        None => out.push(0),
    }

    let gks = ctx.galois_keys();
    let steps = gks.supported_steps();
    out.extend_from_slice(&(steps.len() as u32).to_le_bytes());
    for step in steps {
        out.extend_from_slice(&(step as u32).to_le_bytes());
        write_switch_key(&mut out, gks.key(step).unwrap(), &params.key_ring.primes);
    }
    out
}

pub fn deserialize_context(bytes: &[u8]) -> Result<Context> {
    let mut r = Reader::new(bytes);
    let degree = r.u32()? as usize;
    let chain_len = r.u8()? as usize;
    let mut chain = Vec::with_capacity(chain_len);
    for _ in 0..chain_len {
        chain.push(r.u64()?);
    }
    let aux = r.u64()?;
    let scale = r.f64()?;
    let name = r.str16()?;
    let security = r.str16()?;
    let params = SchemeParams::from_primes(&name, degree, &chain, aux, scale, &security)?;
    let auto_rescale = r.u8()? != 0;
    let auto_relin = r.u8()? != 0;
    let workers = (r.u32()? as usize).max(1);

    let secret = if r.u8()? != 0 {
        let block = r.take(packed_len(degree, 2))?;
        let mut br = BitReader::new(block);
        let mut coeffs = Vec::with_capacity(degree);
        for _ in 0..degree {
            coeffs.push(match br.pull(2)? {
                0 => 0i8,
                1 => 1,
                2 => -1,
                other => return Err(Error::ParseError(format!("bad ternary code {other}"))),
            });
        }
        Some(SecretKey::from_coeffs(&params, coeffs)?)
    } else {
        None
    };

    let chain_ctxs = &params.ring.primes;
    let wrap = |rows: Vec<Vec<u64>>| RingPoly {
        params: params.ring.clone(),
        rows,
        domain: Domain::Evaluation,
    };
    let b = wrap(read_rows(&mut r, chain_ctxs, chain_len, degree)?);
    let a = wrap(read_rows(&mut r, chain_ctxs, chain_len, degree)?);
    let pk = PublicKey { b, a };

    let relin = if r.u8()? != 0 {
        Some(RelinKey(read_switch_key(&mut r, &params)?))
    } else {
        None
    };

    let key_count = r.u32()? as usize;
    let mut keys = std::collections::BTreeMap::new();
    for _ in 0..key_count {
        let step = r.u32()? as usize;
        if step == 0 || step >= params.slot_count() {
            return Err(Error::ParseError(format!("bad rotation step {step}")));
        }
        keys.insert(step, read_switch_key(&mut r, &params)?);
    }
    r.done()?;
    let gks = GaloisKeys {
        slots: params.slot_count(),
        keys,
    };
    Context::from_parts(
        params,
        secret,
        pk,
        relin,
        gks,
        auto_rescale,
        auto_relin,
        workers,
    )
}
