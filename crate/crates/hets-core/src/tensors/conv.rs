//! Convolution on a single ciphertext via the image-block-to-columns
//! layout.
//!
//! The client reorganizes the image into a matrix of convolution windows
//! (one window per row), flattens it by a vertical scan with each column
//! zero-padded to a power-of-two chunk, and encrypts the result once. The
//! server then needs one plain product per kernel and ceil(log2 K)
//! rotate-and-add rounds to put every window's sum in chunk 0; when the
//! padded chunk grid exactly fills the slots, the fold is fully cyclic and
//! every chunk holds the complete sums, letting each output channel be
//! masked in place at its own chunk offset.

use rand::Rng;

use super::encrypted::{EncryptedVector, Layout};
use super::plain::PlainTensor;
use crate::backend::{Backend, BackendVector};
use crate::error::{Error, Result};

/// The window matrix of one image plus the chunked flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Im2col {
    /// windows × taps matrix; row w is the w-th window scanned row-major.
    pub matrix: PlainTensor,
    pub windows: usize,
    pub taps: usize,
    /// Column padding length: next power of two ≥ windows.
    pub chunk: usize,
}

/// Slice an image into convolution windows. Windows must tile the image
/// exactly: (H - kh) and (W - kw) divisible by the stride.
pub fn im2col_encode(
    image: &PlainTensor,
    kernel_h: usize,
    kernel_w: usize,
    stride: usize,
) -> Result<Im2col> {
    image.require_rank(2)?;
    let (h, w) = (image.shape[0], image.shape[1]);
    if kernel_h == 0 || kernel_w == 0 || kernel_h > h || kernel_w > w {
        return Err(Error::ShapeMismatch(format!(
            "kernel {kernel_h}x{kernel_w} does not fit image {h}x{w}"
        )));
    }
    if stride == 0 {
        return Err(Error::ShapeMismatch("stride must be positive".into()));
    }
    if (h - kernel_h) % stride != 0 || (w - kernel_w) % stride != 0 {
        return Err(Error::ShapeMismatch(format!(
            "windows do not tile: image {h}x{w}, kernel {kernel_h}x{kernel_w}, stride {stride}"
        )));
    }
    let out_h = (h - kernel_h) / stride + 1;
    let out_w = (w - kernel_w) / stride + 1;
    let windows = out_h * out_w;
    let taps = kernel_h * kernel_w;
    let mut data = Vec::with_capacity(windows * taps);
    for oy in 0..out_h {
        for ox in 0..out_w {
            for ky in 0..kernel_h {
                for kx in 0..kernel_w {
                    data.push(image.at2(oy * stride + ky, ox * stride + kx));
                }
            }
        }
    }
    Ok(Im2col {
        matrix: PlainTensor::matrix(windows, taps, data)?,
        windows,
        taps,
        chunk: windows.next_power_of_two(),
    })
}

impl Im2col {
    /// Vertical scan: tap j of window w lands at slot j·chunk + w, columns
    /// zero-padded to the chunk length.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.taps * self.chunk];
        for w in 0..self.windows {
            for j in 0..self.taps {
                out[j * self.chunk + w] = self.matrix.at2(w, j);
            }
        }
        out
    }
}

/// Encrypt an im2col layout into a single windowed ciphertext.
pub fn encrypt_windowed<R: Rng + Send + ?Sized>(
    backend: &Backend,
    im: &Im2col,
    rng: &mut R,
) -> Result<EncryptedVector> {
    let flat = im.flatten();
    if flat.len() > backend.slots() {
        return Err(Error::TooLong {
            got: flat.len(),
            slots: backend.slots(),
        });
    }
    let inner = backend.encrypt(&flat, rng)?;
    Ok(EncryptedVector {
        inner,
        length: flat.len(),
        valid_span: flat.len(),
        layout: Layout::Windowed {
            windows: im.windows,
            taps: im.taps,
            chunk: im.chunk,
        },
    })
}

/// Evaluate a multi-channel 2-D convolution on a windowed ciphertext: per
/// channel one plain product and ceil(log2 taps) rotate-add rounds, then a
/// 0/1 mask per channel and one more rescale. Consumes exactly two levels.
pub fn conv2d_im2col(
    backend: &Backend,
    ev: &EncryptedVector,
    kernels: &[PlainTensor],
    bias: Option<&[f64]>,
    mask_target_scale: Option<f64>,
) -> Result<EncryptedVector> {
    let (windows, taps, chunk) = match ev.layout {
        Layout::Windowed {
            windows,
            taps,
            chunk,
        } => (windows, taps, chunk),
        Layout::Flat => {
            return Err(Error::LayoutMismatch(
                "convolution requires a windowed vector (stacked convolutions are not supported)"
                    .into(),
            ))
        }
    };
    if kernels.is_empty() {
        return Err(Error::ShapeMismatch("no convolution kernels given".into()));
    }
    for k in kernels {
        if k.len() != taps {
            return Err(Error::ShapeMismatch(format!(
                "kernel has {} taps, layout expects {taps}",
                k.len()
            )));
        }
    }
    if let Some(b) = bias {
        if b.len() != kernels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} bias values for {} channels",
                b.len(),
                kernels.len()
            )));
        }
    }
    if ev.remaining_levels() < 2 {
        return Err(Error::LevelExhausted(
            "convolution needs two remaining levels (product + mask)".into(),
        ));
    }
    let slots = backend.slots();
    let rounds = super::encrypted::depth_of_power(taps as u32);
    let padded_chunks = 1usize << rounds;
    if chunk * padded_chunks > slots {
        return Err(Error::LayoutMismatch(format!(
            "fold over {padded_chunks} chunks of {chunk} exceeds {slots} slots"
        )));
    }
    // fully cyclic fold: every chunk ends up holding the complete sums
    let cyclic = chunk * padded_chunks == slots;
    let channels = kernels.len();
    if channels > 1 && windows != chunk {
        return Err(Error::LayoutMismatch(format!(
            "multi-channel convolution requires a power-of-two window count (got {windows})"
        )));
    }

    let level = ev.level();
    let prod_pt_scale = backend.prime_f64(level);

    let mut folded = Vec::with_capacity(channels);
    for kernel in kernels {
        // kernel tap j replicated across chunk j
        let mut kp = vec![0.0; taps * chunk];
        for (j, row) in kp.chunks_mut(chunk).enumerate() {
            row.fill(kernel.data[j]);
        }
        let mut acc = backend.mul_plain_raw(&ev.inner, &kp, prod_pt_scale)?;
        for t in 0..rounds {
            let rot = backend.rotate(&acc, (chunk << t) as i64)?;
            acc = backend.add(&acc, &rot)?;
        }
        folded.push(backend.rescale(&acc)?);
    }

    let s_mid = folded[0].scale();
    let mask_pt_scale = match mask_target_scale {
        Some(t) => backend.prime_f64(level - 1) * t / s_mid,
        None => backend.prime_f64(level - 1),
    };
    let mut acc: Option<BackendVector> = None;
    for (k, chan) in folded.iter().enumerate() {
        let offset = if cyclic { k * chunk } else { 0 };
        let mut mask = vec![0.0; offset + windows];
        mask[offset..].fill(1.0);
        let mut piece = backend.mul_plain_raw(chan, &mask, mask_pt_scale)?;
        if !cyclic && k > 0 {
            piece = backend.rotate(&piece, -((k * chunk) as i64))?;
        }
        acc = Some(match acc {
            None => piece,
            Some(prev) => backend.add(&prev, &piece)?,
        });
    }
    let mut out = backend.rescale(&acc.unwrap())?;

    let length = (channels - 1) * chunk + windows;
    if let Some(b) = bias {
        let mut tiled = vec![0.0; length];
        for (k, &bk) in b.iter().enumerate() {
            tiled[k * chunk..k * chunk + windows].fill(bk);
        }
        out = backend.add_plain(&out, &tiled)?;
    }
    Ok(EncryptedVector {
        inner: out,
        length,
        valid_span: length,
        layout: Layout::Flat,
    })
}

/// Direct sliding-window convolution, the plain reference for one channel.
pub fn conv2d_direct(
    image: &PlainTensor,
    kernel: &PlainTensor,
    stride: usize,
) -> Result<Vec<f64>> {
    image.require_rank(2)?;
    kernel.require_rank(2)?;
    let (h, w) = (image.shape[0], image.shape[1]);
    let (kh, kw) = (kernel.shape[0], kernel.shape[1]);
    let out_h = (h - kh) / stride + 1;
    let out_w = (w - kw) / stride + 1;
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let mut sum = 0.0;
            for ky in 0..kh {
                for kx in 0..kw {
                    sum += image.at2(oy * stride + ky, ox * stride + kx) * kernel.at2(ky, kx);
                }
            }
            out.push(sum);
        }
    }
    Ok(out)
}
