use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geometry::combine_iou;

/// Fully connected layer; `weight` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `±sqrt(gain / fan_in)`, zero bias.
    fn uniform<R: Rng>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let bound = (gain / inputs as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| bound * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        Self {
            inputs,
            outputs,
            weight,
            bias: vec![0.0; outputs],
        }
    }

    #[inline]
    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weight.chunks_exact(self.inputs).zip(&self.bias)) {
            *o = b + dot(row, x);
        }
    }

    /// Accumulates parameter gradients for upstream gradient `dz` at input `x`, and writes the
    /// input gradient to `dx` when given.
    #[inline]
    fn backward_into(&self, x: &[f64], dz: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for ((g_row, gb), &d) in grad.weight.chunks_exact_mut(self.inputs).zip(grad.bias.iter_mut()).zip(dz) {
            if d == 0.0 {
                continue;
            }
            *gb += d;
            axpy(d, x, g_row);
        }
        if let Some(dx) = dx {
            dx.iter_mut().for_each(|v| *v = 0.0);
            for (row, &d) in self.weight.chunks_exact(self.inputs).zip(dz) {
                if d != 0.0 {
                    axpy(d, row, dx);
                }
            }
        }
    }

    fn tensors(&self) -> [&Vec<f64>; 2] {
        [&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Affine, ReLU, affine, ReLU, affine, logistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchParams {
    pub l1: Dense,
    pub l2: Dense,
    pub l3: Dense,
}

/// Intermediate activations of one branch for one input.
#[derive(Debug, Clone, Default)]
pub struct BranchCache {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub out: f64,
}

impl BranchParams {
    pub fn zeros(input: usize, h1: usize, h2: usize) -> Self {
        Self {
            l1: Dense::zeros(input, h1),
            l2: Dense::zeros(h1, h2),
            l3: Dense::zeros(h2, 1),
        }
    }

    fn init<R: Rng>(input: usize, h1: usize, h2: usize, rng: &mut R) -> Self {
        Self {
            l1: Dense::uniform(input, h1, 6.0, rng),
            l2: Dense::uniform(h1, h2, 6.0, rng),
            l3: Dense::uniform(h2, 1, 3.0, rng),
        }
    }

    pub fn forward(&self, x: &[f64], cache: &mut BranchCache) -> f64 {
        cache.a1.resize(self.l1.outputs, 0.0);
        cache.a2.resize(self.l2.outputs, 0.0);
        self.l1.forward_into(x, &mut cache.a1);
        cache.a1.iter_mut().for_each(|v| *v = v.max(0.0));
        self.l2.forward_into(&cache.a1, &mut cache.a2);
        cache.a2.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut z = [0.0];
        self.l3.forward_into(&cache.a2, &mut z);
        cache.out = sigmoid(z[0]);
        cache.out
    }

    /// Backpropagates `d_out` (gradient w.r.t. the logistic output) through the cached pass.
    pub fn backward(&self, x: &[f64], cache: &BranchCache, d_out: f64, grad: &mut BranchParams, scratch: &mut Scratch) {
        let dz3 = d_out * cache.out * (1.0 - cache.out);
        scratch.da2.resize(self.l2.outputs, 0.0);
        scratch.da1.resize(self.l1.outputs, 0.0);
        self.l3.backward_into(&cache.a2, &[dz3], &mut grad.l3, Some(&mut scratch.da2));
        relu_mask(&mut scratch.da2, &cache.a2);
        self.l2.backward_into(&cache.a1, &scratch.da2, &mut grad.l2, Some(&mut scratch.da1));
        relu_mask(&mut scratch.da1, &cache.a1);
        self.l1.backward_into(x, &scratch.da1, &mut grad.l1, None);
    }

    fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        [&self.l1, &self.l2, &self.l3].into_iter().flat_map(Dense::tensors)
    }

    fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        [&mut self.l1, &mut self.l2, &mut self.l3]
            .into_iter()
            .flat_map(Dense::tensors_mut)
    }
}

fn relu_mask(d: &mut [f64], activated: &[f64]) {
    for (g, &a) in d.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

#[derive(Debug, Default)]
pub struct Scratch {
    da1: Vec<f64>,
    da2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Separate purity and integrity branches recombined into IoU.
    Decoupled,
    /// A single branch regressing IoU.
    DirectIoU,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Decoupled => "decoupled",
            Variant::DirectIoU => "direct",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "decoupled" => Ok(Variant::Decoupled),
            "direct" => Ok(Variant::DirectIoU),
            other => Err(format!("unknown variant `{other}` (expected decoupled or direct)")),
        }
    }
}

/// Regressor parameters. `primary` predicts purity for [`Variant::Decoupled`] and IoU for
/// [`Variant::DirectIoU`]; `integrity` exists only for the decoupled variant.
///
/// The same type doubles as the gradient and velocity container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirModelParams {
    pub variant: Variant,
    pub input_dim: usize,
    pub h1: usize,
    pub h2: usize,
    pub seed: u64,
    pub primary: BranchParams,
    pub integrity: Option<BranchParams>,
}

/// Branch outputs for one feature vector.
#[derive(Debug, Clone, Default)]
pub struct ForwardPass {
    pub primary: BranchCache,
    pub integrity: Option<BranchCache>,
}

impl ForwardPass {
    /// Purity (decoupled) or IoU (direct) prediction.
    pub fn s(&self) -> f64 {
        self.primary.out
    }

    pub fn t(&self) -> Option<f64> {
        self.integrity.as_ref().map(|c| c.out)
    }
}

/// Predicted purity, integrity and combined localization confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub s: f64,
    pub t: Option<f64>,
    pub c: f64,
}

impl DirModelParams {
    pub fn init(input_dim: usize, h1: usize, h2: usize, variant: Variant, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let primary = BranchParams::init(input_dim, h1, h2, &mut rng);
        let integrity = match variant {
            Variant::Decoupled => Some(BranchParams::init(input_dim, h1, h2, &mut rng)),
            Variant::DirectIoU => None,
        };
        Self {
            variant,
            input_dim,
            h1,
            h2,
            seed,
            primary,
            integrity,
        }
    }

    /// All parameters zero; every output is exactly 0.5.
    pub fn zeros(input_dim: usize, h1: usize, h2: usize, variant: Variant) -> Self {
        Self {
            variant,
            input_dim,
            h1,
            h2,
            seed: 0,
            primary: BranchParams::zeros(input_dim, h1, h2),
            integrity: (variant == Variant::Decoupled).then(|| BranchParams::zeros(input_dim, h1, h2)),
        }
    }

    /// Same shapes, all zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            seed: self.seed,
            ..Self::zeros(self.input_dim, self.h1, self.h2, self.variant)
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.input_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass, ModelError> {
        let mut pass = ForwardPass::default();
        self.forward_into(x, &mut pass)?;
        Ok(pass)
    }

    pub fn forward_into(&self, x: &[f64], pass: &mut ForwardPass) -> Result<(), ModelError> {
        self.check_dim(x)?;
        self.primary.forward(x, &mut pass.primary);
        match &self.integrity {
            Some(branch) => {
                branch.forward(x, pass.integrity.get_or_insert_with(Default::default));
            }
            None => pass.integrity = None,
        }
        Ok(())
    }

    pub fn predict_confidence(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        let pass = self.forward(x)?;
        let s = pass.s();
        let t = pass.t();
        let c = match t {
            Some(t) => combine_iou(s, t),
            None => s,
        };
        Ok(Prediction { s, t, c })
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(Vec::len).sum()
    }

    /// Parameter tensors in checkpoint order: primary branch then integrity branch, each as
    /// `l1.weight, l1.bias, l2.weight, l2.bias, l3.weight, l3.bias`.
    pub fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.primary
            .tensors()
            .chain(self.integrity.iter().flat_map(BranchParams::tensors))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.primary
            .tensors_mut()
            .chain(self.integrity.iter_mut().flat_map(BranchParams::tensors_mut))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.variant == other.variant
            && self.tensors().map(Vec::len).eq(other.tensors().map(Vec::len))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().flatten().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.tensors().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}
