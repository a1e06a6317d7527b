//! Layer and model descriptions, evaluable in plain and encrypted form,
//! stored as a versioned JSON document with row-major weight arrays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensors::PlainTensor;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// One network layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    /// 2-D convolution: one kernel per output channel, shared stride.
    Conv2d {
        kernels: Vec<PlainTensor>,
        bias: Vec<f64>,
        stride: usize,
    },
    /// Fully connected: weights are in × out, row-major.
    Linear { weights: PlainTensor, bias: Vec<f64> },
    /// Element-wise square activation.
    Square,
}

impl Layer {
    /// Rescale levels the layer consumes on the encrypted path.
    pub fn depth_cost(&self) -> usize {
        match self {
            Layer::Conv2d { .. } => 2, // product + output mask
            Layer::Linear { .. } => 1,
            Layer::Square => 1,
        }
    }
}

/// An ordered stack of layers with a fixed input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub version: u32,
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

/// Shape bookkeeping for the first (convolution) layer.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub windows: usize,
    pub taps: usize,
    pub chunk: usize,
}

impl Model {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let model = Model {
            version: MODEL_FORMAT_VERSION,
            input_shape,
            layers,
        };
        model.validate()?;
        Ok(model)
    }

    /// Total level budget: the sum of per-layer depth costs.
    pub fn depth_budget(&self) -> usize {
        self.layers.iter().map(Layer::depth_cost).sum()
    }

    /// Geometry of the leading convolution layer, if any.
    pub fn conv_geometry(&self) -> Option<ConvGeometry> {
        match self.layers.first() {
            Some(Layer::Conv2d { kernels, stride, .. }) => {
                let kernel_h = kernels[0].shape[0];
                let kernel_w = kernels[0].shape[1];
                let h = self.input_shape[0];
                let w = self.input_shape[1];
                let windows = ((h - kernel_h) / stride + 1) * ((w - kernel_w) / stride + 1);
                Some(ConvGeometry {
                    kernel_h,
                    kernel_w,
                    stride: *stride,
                    windows,
                    taps: kernel_h * kernel_w,
                    chunk: windows.next_power_of_two(),
                })
            }
            _ => None,
        }
    }

    /// Check that adjacent layer shapes compose; errors carry the layer
    /// index.
    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::ParseError(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::ParseError("model has no layers".into()));
        }
        let mut current = match &self.layers[0] {
            Layer::Conv2d { .. } => 0usize, // computed below
            _ => {
                if self.input_shape.len() != 1 {
                    return Err(Error::ShapeError {
                        layer: 0,
                        reason: format!(
                            "non-convolutional model needs a rank-1 input, got {:?}",
                            self.input_shape
                        ),
                    });
                }
                self.input_shape[0]
            }
        };
        for (idx, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv2d {
                    kernels,
                    bias,
                    stride,
                } => {
                    if idx != 0 {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: "convolution is only supported as the first layer \
                                     (slots cannot be re-windowed)"
                                .into(),
                        });
                    }
                    if self.input_shape.len() != 2 {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: format!("convolution needs a 2-D input, got {:?}", self.input_shape),
                        });
                    }
                    if kernels.is_empty() {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: "convolution needs at least one kernel".into(),
                        });
                    }
                    let (kh, kw) = (kernels[0].shape[0], kernels[0].shape[1]);
                    for k in kernels {
                        if k.rank() != 2 || k.shape != vec![kh, kw] {
                            return Err(Error::ShapeError {
                                layer: idx,
                                reason: "all kernels must share one 2-D shape".into(),
                            });
                        }
                    }
                    if bias.len() != kernels.len() {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: format!(
                                "{} bias values for {} channels",
                                bias.len(),
                                kernels.len()
                            ),
                        });
                    }
                    let (h, w) = (self.input_shape[0], self.input_shape[1]);
                    if *stride == 0 || kh > h || kw > w || (h - kh) % stride != 0 || (w - kw) % stride != 0
                    {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: format!(
                                "windows do not tile: input {h}x{w}, kernel {kh}x{kw}, stride {stride}"
                            ),
                        });
                    }
                    let geo = self.conv_geometry().unwrap();
                    if kernels.len() > 1 && geo.windows != geo.chunk {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: format!(
                                "multi-channel convolution needs a power-of-two window count, got {}",
                                geo.windows
                            ),
                        });
                    }
                    current = (kernels.len() - 1) * geo.chunk + geo.windows;
                }
                Layer::Linear { weights, bias } => {
                    if weights.rank() != 2 {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: "linear weights must be rank 2".into(),
                        });
                    }
                    if weights.shape[0] != current {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: format!(
                                "linear input {} does not match incoming {}",
                                weights.shape[0], current
                            ),
                        });
                    }
                    if bias.len() != weights.shape[1] {
                        return Err(Error::ShapeError {
                            layer: idx,
                            reason: format!(
                                "{} bias values for {} outputs",
                                bias.len(),
                                weights.shape[1]
                            ),
                        });
                    }
                    current = weights.shape[1];
                }
                Layer::Square => {}
            }
        }
        Ok(())
    }

    /// Output width of the final layer.
    pub fn output_len(&self) -> usize {
        let mut current = match &self.layers[0] {
            Layer::Conv2d { kernels, .. } => {
                let geo = self.conv_geometry().unwrap();
                (kernels.len() - 1) * geo.chunk + geo.windows
            }
            _ => self.input_shape[0],
        };
        for layer in &self.layers {
            if let Layer::Linear { weights, .. } = layer {
                current = weights.shape[1];
            }
        }
        current
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let text = serde_json::to_string(model)
        .map_err(|e| Error::ParseError(format!("serialize model: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::IoError(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))?;
    let model: Model = serde_json::from_str(&text)
        .map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> Model {
        Model::new(
            vec![4, 4],
            vec![
                Layer::Conv2d {
                    kernels: vec![PlainTensor::matrix(3, 3, vec![0.1; 9]).unwrap()],
                    bias: vec![0.0],
                    stride: 1,
                },
                Layer::Square,
                Layer::Linear {
                    weights: PlainTensor::matrix(4, 3, vec![0.5; 12]).unwrap(),
                    bias: vec![0.0; 3],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let model = tiny_model();
        let dir = std::env::temp_dir().join("hets_model_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tiny.json");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn depth_budget_sums_layer_costs() {
        assert_eq!(tiny_model().depth_budget(), 4); // conv 2 + square 1 + linear 1
    }

    #[test]
    fn mismatched_linear_input_names_layer() {
        let err = Model::new(
            vec![4, 4],
            vec![
                Layer::Conv2d {
                    kernels: vec![PlainTensor::matrix(3, 3, vec![0.1; 9]).unwrap()],
                    bias: vec![0.0],
                    stride: 1,
                },
                Layer::Linear {
                    weights: PlainTensor::matrix(5, 3, vec![0.5; 15]).unwrap(),
                    bias: vec![0.0; 3],
                },
            ],
        );
        match err {
            Err(Error::ShapeError { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("expected ShapeError, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_parse_error_with_path() {
        let err = load_model(Path::new("/nonexistent/mnist_cnn.json"));
        match err {
            Err(Error::ParseError(msg)) => assert!(msg.contains("/nonexistent/mnist_cnn.json")),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn conv_after_first_layer_rejected() {
        let conv = Layer::Conv2d {
            kernels: vec![PlainTensor::matrix(2, 2, vec![0.1; 4]).unwrap()],
            bias: vec![0.0],
            stride: 1,
        };
        let err = Model::new(vec![3, 3], vec![conv.clone(), Layer::Square, conv]);
        assert!(matches!(err, Err(Error::ShapeError { layer: 2, .. })));
    }
}
