//! Target network architectures and the deterministic flat-parameter layout.

use qt_diffcore::Padding;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: Padding,
        activation: Activation,
    },
    MaxPool2,
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputShape {
    Image {
        channels: usize,
        height: usize,
        width: usize,
    },
    Features(usize),
}

#[derive(Debug, Clone)]
pub struct ArchitectureSpec {
    pub id: String,
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
}

/// Running shape while walking the layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Chw(usize, usize, usize),
    Flat(usize),
}

impl ArchitectureSpec {
    /// Exact closed-form trainable parameter count.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    ..
                } => out_channels * (in_channels * kernel * kernel) + out_channels,
                LayerSpec::Dense {
                    inputs, outputs, ..
                } => outputs * inputs + outputs,
                LayerSpec::MaxPool2 | LayerSpec::Flatten => 0,
            })
            .sum()
    }

    /// Walks the stack checking shape compatibility; returns the logit width.
    pub fn validate(&self) -> Result<usize> {
        let mut shape = match self.input {
            InputShape::Image {
                channels,
                height,
                width,
            } => Shape::Chw(channels, height, width),
            InputShape::Features(n) => Shape::Flat(n),
        };
        for (idx, layer) in self.layers.iter().enumerate() {
            shape = match (layer, shape) {
                (
                    LayerSpec::Conv2d {
                        in_channels,
                        out_channels,
                        kernel,
                        padding,
                        ..
                    },
                    Shape::Chw(c, h, w),
                ) => {
                    if c != *in_channels {
                        return Err(Error::BadArchitecture {
                            detail: format!(
                                "{}: layer {idx} expects {in_channels} channels, gets {c}",
                                self.id
                            ),
                        });
                    }
                    let oh = qt_diffcore::ops::conv2d_out_side(h, *kernel, *padding)?;
                    let ow = qt_diffcore::ops::conv2d_out_side(w, *kernel, *padding)?;
                    Shape::Chw(*out_channels, oh, ow)
                }
                (LayerSpec::MaxPool2, Shape::Chw(c, h, w)) => {
                    if h < 2 || w < 2 {
                        return Err(Error::BadArchitecture {
                            detail: format!("{}: layer {idx} pools a {h}x{w} map", self.id),
                        });
                    }
                    Shape::Chw(c, h / 2, w / 2)
                }
                (LayerSpec::Flatten, Shape::Chw(c, h, w)) => Shape::Flat(c * h * w),
                (LayerSpec::Dense { inputs, outputs, .. }, Shape::Flat(n)) => {
                    if n != *inputs {
                        return Err(Error::BadArchitecture {
                            detail: format!(
                                "{}: layer {idx} expects {inputs} features, gets {n}",
                                self.id
                            ),
                        });
                    }
                    Shape::Flat(*outputs)
                }
                (layer, shape) => {
                    return Err(Error::BadArchitecture {
                        detail: format!("{}: layer {idx} {layer:?} cannot follow {shape:?}", self.id),
                    });
                }
            };
        }
        match shape {
            Shape::Flat(n) if n == self.num_classes => Ok(n),
            other => Err(Error::BadArchitecture {
                detail: format!(
                    "{}: network ends at {other:?}, expected {} classes",
                    self.id, self.num_classes
                ),
            }),
        }
    }

    /// Batch input shape expected by `forward`.
    pub fn input_dims(&self, batch: usize) -> Vec<usize> {
        match self.input {
            InputShape::Image {
                channels,
                height,
                width,
            } => vec![batch, channels, height, width],
            InputShape::Features(n) => vec![batch, n],
        }
    }
}

/// One contiguous slice of the flat θ vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutEntry {
    /// conv weights [out, in, k, k], dense weights [out, in], or bias [out]
    pub shape: Vec<usize>,
    pub offset: usize,
    pub name: String,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered, contiguous, non-overlapping slices covering [0, M): per
/// parameterized layer, weights first (conv kernels ordered out, in, row,
/// col; dense weights row-major out, in) then biases.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub entries: Vec<LayoutEntry>,
    pub total: usize,
}

pub fn layout(spec: &ArchitectureSpec) -> ParamLayout {
    let mut entries = Vec::new();
    let mut offset = 0;
    let mut push = |shape: Vec<usize>, name: String, offset: &mut usize| {
        let len: usize = shape.iter().product();
        entries.push(LayoutEntry {
            shape,
            offset: *offset,
            name,
        });
        *offset += len;
    };
    for (idx, layer) in spec.layers.iter().enumerate() {
        match layer {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                push(
                    vec![*out_channels, *in_channels, *kernel, *kernel],
                    format!("layer{idx}.conv.weight"),
                    &mut offset,
                );
                push(vec![*out_channels], format!("layer{idx}.conv.bias"), &mut offset);
            }
            LayerSpec::Dense { inputs, outputs, .. } => {
                push(
                    vec![*outputs, *inputs],
                    format!("layer{idx}.dense.weight"),
                    &mut offset,
                );
                push(vec![*outputs], format!("layer{idx}.dense.bias"), &mut offset);
            }
            LayerSpec::MaxPool2 | LayerSpec::Flatten => {}
        }
    }
    ParamLayout {
        entries,
        total: offset,
    }
}

/// The 28x28 single-channel classifier: two 5x5 valid conv/pool stages into
/// a 192-20-10 dense head. Totals 6690 parameters.
pub fn mnist_cnn_spec() -> ArchitectureSpec {
    ArchitectureSpec {
        id: "mnist_cnn".into(),
        input: InputShape::Image {
            channels: 1,
            height: 28,
            width: 28,
        },
        layers: vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 8,
                kernel: 5,
                padding: Padding::Valid,
                activation: Activation::Relu,
            },
            LayerSpec::MaxPool2,
            LayerSpec::Conv2d {
                in_channels: 8,
                out_channels: 12,
                kernel: 5,
                padding: Padding::Valid,
                activation: Activation::Relu,
            },
            LayerSpec::MaxPool2,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 192,
                outputs: 20,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                inputs: 20,
                outputs: 10,
                activation: Activation::Linear,
            },
        ],
        num_classes: 10,
    }
}

/// The 32x32 three-channel classifier: two 5x5 same conv/pool stages into a
/// 2048-128-64-10 dense head. Totals 285226 parameters.
pub fn cifar_cnn_spec() -> ArchitectureSpec {
    ArchitectureSpec {
        id: "cifar_cnn".into(),
        input: InputShape::Image {
            channels: 3,
            height: 32,
            width: 32,
        },
        layers: vec![
            LayerSpec::Conv2d {
                in_channels: 3,
                out_channels: 16,
                kernel: 5,
                padding: Padding::Same,
                activation: Activation::Relu,
            },
            LayerSpec::MaxPool2,
            LayerSpec::Conv2d {
                in_channels: 16,
                out_channels: 32,
                kernel: 5,
                padding: Padding::Same,
                activation: Activation::Relu,
            },
            LayerSpec::MaxPool2,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 2048,
                outputs: 128,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                inputs: 128,
                outputs: 64,
                activation: Activation::Relu,
            },
            LayerSpec::Dense {
                inputs: 64,
                outputs: 10,
                activation: Activation::Linear,
            },
        ],
        num_classes: 10,
    }
}

/// Small tanh MLP over flattened 8x8 synthetic images. Tanh keeps the tiny
/// two-unit bottleneck trainable where relu units would die.
pub fn synth_mlp_spec(classes: usize) -> ArchitectureSpec {
    ArchitectureSpec {
        id: if classes == 10 {
            "synth_mlp".into()
        } else {
            format!("synth_mlp{classes}")
        },
        input: InputShape::Image {
            channels: 1,
            height: 8,
            width: 8,
        },
        layers: vec![
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 64,
                outputs: 2,
                activation: Activation::Tanh,
            },
            LayerSpec::Dense {
                inputs: 2,
                outputs: classes,
                activation: Activation::Linear,
            },
        ],
        num_classes: classes,
    }
}

/// The 32-parameter toy: one dense layer over 15 raw features, 2 classes.
pub fn toy_mlp32_spec() -> ArchitectureSpec {
    ArchitectureSpec {
        id: "toy_mlp32".into(),
        input: InputShape::Features(15),
        layers: vec![LayerSpec::Dense {
            inputs: 15,
            outputs: 2,
            activation: Activation::Linear,
        }],
        num_classes: 2,
    }
}

/// Looks up a shipped architecture by its export identifier.
pub fn architecture_by_id(id: &str) -> Result<ArchitectureSpec> {
    match id {
        "mnist_cnn" => Ok(mnist_cnn_spec()),
        "cifar_cnn" => Ok(cifar_cnn_spec()),
        "synth_mlp" => Ok(synth_mlp_spec(10)),
        "synth_mlp4" => Ok(synth_mlp_spec(4)),
        "toy_mlp32" => Ok(toy_mlp32_spec()),
        other => Err(Error::UnknownArchitecture { id: other.into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_specs_hit_the_published_totals() {
        assert_eq!(mnist_cnn_spec().param_count(), 6690);
        assert_eq!(cifar_cnn_spec().param_count(), 285226);
        assert_eq!(toy_mlp32_spec().param_count(), 32);
    }

    #[test]
    fn lone_dense_layer_counts_weights_plus_bias() {
        let spec = ArchitectureSpec {
            id: "dense32".into(),
            input: InputShape::Features(3),
            layers: vec![LayerSpec::Dense {
                inputs: 3,
                outputs: 2,
                activation: Activation::Linear,
            }],
            num_classes: 2,
        };
        assert_eq!(spec.param_count(), 8);
        assert_eq!(spec.validate().unwrap(), 2);
    }

    #[test]
    fn shipped_specs_validate() {
        for spec in [
            mnist_cnn_spec(),
            cifar_cnn_spec(),
            synth_mlp_spec(10),
            synth_mlp_spec(4),
            toy_mlp32_spec(),
        ] {
            assert_eq!(spec.validate().unwrap(), spec.num_classes, "{}", spec.id);
        }
    }

    #[test]
    fn layout_covers_every_index_exactly_once() {
        for spec in [mnist_cnn_spec(), cifar_cnn_spec(), synth_mlp_spec(10)] {
            let l = layout(&spec);
            assert_eq!(l.total, spec.param_count(), "{}", spec.id);
            let mut next = 0;
            for e in &l.entries {
                assert_eq!(e.offset, next, "{} entry {}", spec.id, e.name);
                next += e.len();
            }
            assert_eq!(next, l.total);
        }
    }

    #[test]
    fn mismatched_dense_width_is_rejected() {
        let spec = ArchitectureSpec {
            id: "broken".into(),
            input: InputShape::Features(3),
            layers: vec![LayerSpec::Dense {
                inputs: 4,
                outputs: 2,
                activation: Activation::Linear,
            }],
            num_classes: 2,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn unknown_architecture_id_is_an_error() {
        assert!(architecture_by_id("mnist_cnn").is_ok());
        assert!(matches!(
            architecture_by_id("nope"),
            Err(Error::UnknownArchitecture { .. })
        ));
    }
}
