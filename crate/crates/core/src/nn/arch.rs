use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::NnError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    #[serde(rename = "BiLSTM")]
    Lstm,
    #[serde(rename = "BiGRU")]
    Gru,
}

impl CellKind {
    /// Gate blocks stacked in the recurrent weight matrices: LSTM `[i, f, g,
    /// o]`, GRU `[z, r, n]`.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "BiLSTM",
            CellKind::Gru => "BiGRU",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub cell: CellKind,
    pub input_channels: usize,
    pub recurrent_layers: usize,
    /// Hidden units per direction.
    pub hidden_size: usize,
    /// Dense layers including the single-unit output layer.
    pub dense_layers: usize,
    pub dense_width: usize,
    pub dropout: f64,
}

impl Architecture {
    /// Two BiLSTM layers of 56 units per direction followed by dense layers
    /// `112 → 32 → 1`.
    pub fn reference(input_channels: usize) -> Self {
        Self {
            cell: CellKind::Lstm,
            input_channels,
            recurrent_layers: 2,
            hidden_size: 56,
            dense_layers: 2,
            dense_width: 32,
            dropout: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |msg: String| Err(NnError::InvalidArchitecture(msg));
        if self.input_channels == 0 || self.hidden_size == 0 {
            return bad(format!(
                "input channels ({}) and hidden size ({}) must be positive",
                self.input_channels, self.hidden_size
            ));
        }
        if !(1..=4).contains(&self.recurrent_layers) {
            return bad(format!("recurrent layers must be 1..=4, got {}", self.recurrent_layers));
        }
        if !(1..=3).contains(&self.dense_layers) {
            return bad(format!("dense layers must be 1..=3, got {}", self.dense_layers));
        }
        if self.dense_layers > 1 && self.dense_width == 0 {
            return bad("dense width must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }

    /// Input width of recurrent layer `layer`.
    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_channels
        } else {
            2 * self.hidden_size
        }
    }

    /// `(in, out)` of every dense layer, ending with the output unit.
    pub fn dense_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.dense_layers);
        let mut width = 2 * self.hidden_size;
        for _ in 1..self.dense_layers {
            dims.push((width, self.dense_width));
            width = self.dense_width;
        }
        dims.push((width, 1));
        dims
    }
}

/// Trainable parameter count from the closed-form per-layer tallies.
pub fn count_params(arch: &Architecture) -> usize {
    let (g, h) = (arch.cell.gates(), arch.hidden_size);
    let recurrent: usize = (0..arch.recurrent_layers)
        .map(|l| 2 * g * (h * (arch.layer_input(l) + h) + h))
        .sum();
    let dense: usize = arch.dense_dims().iter().map(|&(i, o)| i * o + o).sum();
    recurrent + dense
}

/// Offsets of one direction of one recurrent layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecurrentBlock {
    /// `gates·h × input`, row-major.
    pub w_in: Range<usize>,
    /// `gates·h × h`, row-major.
    pub w_rec: Range<usize>,
    /// `gates·h`.
    pub bias: Range<usize>,
    pub input: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseBlock {
    /// `out × in`, row-major.
    pub w: Range<usize>,
    pub bias: Range<usize>,
    pub input: usize,
    pub output: usize,
}

/// Serialization order of the flat parameter vector: for each recurrent
/// layer, the forward then the backward direction, each as `W_in`, `W_rec`,
/// `b`; then each dense layer as `W`, `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    /// `recurrent[layer][direction]`, direction 0 = forward.
    pub recurrent: Vec<[RecurrentBlock; 2]>,
    pub dense: Vec<DenseBlock>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(arch: &Architecture) -> Self {
        let mut cursor = 0usize;
        let mut take = |n: usize| {
            let r = cursor..cursor + n;
            cursor += n;
            r
        };
        let gh = arch.cell.gates() * arch.hidden_size;
        let h = arch.hidden_size;
        let recurrent = (0..arch.recurrent_layers)
            .map(|l| {
                let d = arch.layer_input(l);
                let mut block = || RecurrentBlock {
                    w_in: take(gh * d),
                    w_rec: take(gh * h),
                    bias: take(gh),
                    input: d,
                };
                let fwd = block();
                let bwd = block();
                [fwd, bwd]
            })
            .collect();
        let dense = arch
            .dense_dims()
            .into_iter()
            .map(|(i, o)| DenseBlock {
                w: take(i * o),
                bias: take(o),
                input: i,
                output: o,
            })
            .collect();
        Self {
            recurrent,
            dense,
            total: cursor,
        }
    }

    /// Named tensors in serialization order with their shapes.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, Range<usize>)> {
        let mut out = Vec::new();
        for (l, dirs) in self.recurrent.iter().enumerate() {
            for (d, b) in dirs.iter().enumerate() {
                let dir = if d == 0 { "fwd" } else { "bwd" };
                let gh = b.bias.len();
                out.push((format!("rnn{l}.{dir}.w_in"), vec![gh, b.input], b.w_in.clone()));
                out.push((format!("rnn{l}.{dir}.w_rec"), vec![gh, hidden_of(b)], b.w_rec.clone()));
                out.push((format!("rnn{l}.{dir}.b"), vec![gh], b.bias.clone()));
            }
        }
        for (i, b) in self.dense.iter().enumerate() {
            out.push((format!("dense{i}.w"), vec![b.output, b.input], b.w.clone()));
            out.push((format!("dense{i}.b"), vec![b.output], b.bias.clone()));
        }
        out
    }
}

fn hidden_of(b: &RecurrentBlock) -> usize {
    b.w_rec.len() / b.bias.len()
}

/// Architecture plus the flat parameter vector in [`ParamLayout`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub arch: Architecture,
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn new(arch: Architecture, values: Vec<f64>) -> Result<Self, NnError> {
        arch.validate()?;
        let expected = count_params(&arch);
        if values.len() != expected {
            return Err(NnError::ParamCount {
                expected,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteParams);
        }
        Ok(Self { arch, values })
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(&self.arch)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// FNV-1a over the bit patterns of every value.
    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.values)
    }
}

pub(crate) fn fingerprint(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Glorot-uniform weights `U(±√(6/(fan_in+fan_out)))` from xoshiro256++
/// seeded with `seed`, drawn in serialization order. Recurrent matrices use
/// fan_in = h and fan_out = gates·h. Biases are zero except the LSTM
/// forget-gate slice, which is one.
pub fn init_params(arch: &Architecture, seed: u64) -> Result<ModelParams, NnError> {
    arch.validate()?;
    let layout = ParamLayout::new(arch);
    let mut values = vec![0.0; layout.total];
    let mut r = rng::seeded(seed);
    let mut fill = |range: Range<usize>, fan_in: usize, fan_out: usize, values: &mut [f64]| {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        for v in &mut values[range] {
            *v = rng::uniform(&mut r, -limit, limit);
        }
    };
    let h = arch.hidden_size;
    let gh = arch.cell.gates() * h;
    for dirs in &layout.recurrent {
        for b in dirs {
            fill(b.w_in.clone(), b.input, gh, &mut values);
            fill(b.w_rec.clone(), h, gh, &mut values);
            if arch.cell == CellKind::Lstm {
                let forget = b.bias.start + h..b.bias.start + 2 * h;
                values[forget].iter_mut().for_each(|v| *v = 1.0);
            }
        }
    }
    for b in &layout.dense {
        fill(b.w.clone(), b.input, b.output, &mut values);
    }
    ModelParams::new(arch.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    extern crate std;

    #[test]
    fn one_bilstm_layer() {
        let arch = Architecture {
            cell: CellKind::Lstm,
            input_channels: 9,
            recurrent_layers: 1,
            hidden_size: 8,
            dense_layers: 1,
            dense_width: 0,
            dropout: 0.0,
        };
        // 2·4·(8·17+8) recurrent + 16·1+1 dense
        assert_eq!(count_params(&arch), 1152 + 17);
    }

    #[test]
    fn reference_count() {
        let arch = Architecture::reference(9);
        assert_eq!(count_params(&arch), 108_929);
        let ratio = 108_929.0 / 123_000.0;
        assert!((0.8..=1.2).contains(&ratio));
        assert_eq!(arch.dense_dims(), vec![(112, 32), (32, 1)]);
    }

    #[test]
    fn init_is_deterministic() {
        let arch = Architecture::reference(5);
        let a = init_params(&arch, 7).unwrap();
        assert_eq!(a, init_params(&arch, 7).unwrap());
        assert_ne!(a.values, init_params(&arch, 8).unwrap().values);
        let layout = a.layout();
        for dirs in &layout.recurrent {
            for b in dirs {
                let forget = &a.values[b.bias.start + 56..b.bias.start + 112];
                assert!(forget.iter().all(|&v| v == 1.0));
                let others = a.values[b.bias.clone()].iter().filter(|&&v| v != 1.0);
                assert!(others.clone().all(|&v| v == 0.0));
                assert_eq!(others.count(), 3 * 56);
            }
        }
    }

    #[test]
    fn invalid_architectures() {
        let mut arch = Architecture::reference(9);
        arch.recurrent_layers = 5;
        assert!(init_params(&arch, 7).is_err());
        arch.recurrent_layers = 1;
        arch.dropout = 1.0;
        assert!(arch.validate().is_err());
    }

    fn arb_arch() -> impl Strategy<Value = Architecture> {
        (any::<bool>(), 1usize..15, 1usize..=4, 1usize..20, 1usize..=3, 1usize..40).prop_map(
            |(lstm, c, rl, h, dl, w)| Architecture {
                cell: if lstm { CellKind::Lstm } else { CellKind::Gru },
                input_channels: c,
                recurrent_layers: rl,
                hidden_size: h,
                dense_layers: dl,
                dense_width: w,
                dropout: 0.3,
            },
        )
    }

    proptest! {
        #[test]
        fn layout_tiles_the_vector(arch in arb_arch()) {
            let layout = ParamLayout::new(&arch);
            let mut cursor = 0;
            for (_, shape, range) in layout.tensors() {
                prop_assert_eq!(range.start, cursor);
                prop_assert_eq!(range.len(), shape.iter().product::<usize>());
                cursor = range.end;
            }
            prop_assert_eq!(cursor, count_params(&arch));
        }
    }
}
