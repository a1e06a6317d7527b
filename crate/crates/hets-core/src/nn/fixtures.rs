//! Deterministic fixture generation: the MNIST-shaped architecture with
//! seeded random weights, scaled so every intermediate activation stays
//! inside [-10, 10] on the fixture images, plus the fixture images
//! themselves and a manifest tying the seeds together.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::model::{save_model, Layer, Model};
use crate::error::{Error, Result};
use crate::tensors::PlainTensor;

pub const MNIST_MODEL_SEED: u64 = 1036;
pub const MNIST_IMAGE_SEED: u64 = 2003;
pub const FIXTURE_IMAGE_COUNT: usize = 20;

// weight ranges keeping activations in roughly [-3, 9] on [0,1] inputs
const CONV_RANGE: f64 = 0.20;
const CONV_BIAS_RANGE: f64 = 0.10;
const FC1_RANGE: f64 = 0.20;
const FC2_RANGE: f64 = 0.16;
const FC_BIAS_RANGE: f64 = 0.25;

fn uniform(rng: &mut ChaCha20Rng, n: usize, range: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-range..range)).collect()
}

/// The benchmark architecture: conv 4×(7×7) stride 3, square, linear
/// 256→64, square, linear 64→10, with seeded random weights.
pub fn mnist_model(seed: u64) -> Model {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let kernels: Vec<PlainTensor> = (0..4)
        .map(|_| PlainTensor::matrix(7, 7, uniform(&mut rng, 49, CONV_RANGE)).unwrap())
        .collect();
    let conv_bias = uniform(&mut rng, 4, CONV_BIAS_RANGE);
    let w1 = PlainTensor::matrix(256, 64, uniform(&mut rng, 256 * 64, FC1_RANGE)).unwrap();
    let b1 = uniform(&mut rng, 64, FC_BIAS_RANGE);
    let w2 = PlainTensor::matrix(64, 10, uniform(&mut rng, 64 * 10, FC2_RANGE)).unwrap();
    let b2 = uniform(&mut rng, 10, FC_BIAS_RANGE);
    Model::new(
        vec![28, 28],
        vec![
            Layer::Conv2d {
                kernels,
                bias: conv_bias,
                stride: 3,
            },
            Layer::Square,
            Layer::Linear {
                weights: w1,
                bias: b1,
            },
            Layer::Square,
            Layer::Linear {
                weights: w2,
                bias: b2,
            },
        ],
    )
    .expect("fixture architecture must validate")
}

/// Seeded 28×28 images with values in [0, 1].
pub fn fixture_images(seed: u64, count: usize) -> Vec<PlainTensor> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let data = (0..28 * 28).map(|_| rng.random_range(0.0..1.0)).collect();
            PlainTensor::new(data, vec![28, 28]).unwrap()
        })
        .collect()
}

/// Records the seeds and shapes behind the shipped fixture files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub version: u32,
    pub model_seed: u64,
    pub image_seed: u64,
    pub image_count: usize,
    pub model_file: String,
    pub architecture: String,
}

impl Default for FixtureManifest {
    fn default() -> Self {
        FixtureManifest {
            version: 1,
            model_seed: MNIST_MODEL_SEED,
            image_seed: MNIST_IMAGE_SEED,
            image_count: FIXTURE_IMAGE_COUNT,
            model_file: "mnist_cnn.json".into(),
            architecture: "conv 4x7x7 s3, square, linear 256x64, square, linear 64x10".into(),
        }
    }
}

/// Write the manifest, model file and images under `dir`.
pub fn write_fixtures(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::IoError(format!("{}: {e}", dir.display())))?;
    let manifest = FixtureManifest::default();
    let manifest_text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::ParseError(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), manifest_text)
        .map_err(|e| Error::IoError(e.to_string()))?;
    save_model(&mnist_model(manifest.model_seed), &dir.join(&manifest.model_file))?;
    for (i, img) in fixture_images(manifest.image_seed, manifest.image_count)
        .iter()
        .enumerate()
    {
        let text = serde_json::to_string(img).map_err(|e| Error::ParseError(e.to_string()))?;
        std::fs::write(dir.join(format!("image_{i:02}.json")), text)
            .map_err(|e| Error::IoError(e.to_string()))?;
    }
    Ok(())
}

/// Load a fixture image written by `write_fixtures`.
pub fn load_image(path: &Path) -> Result<PlainTensor> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))
}
