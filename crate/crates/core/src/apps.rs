//! Ready-made operator specs for layout, embedding, GCN and MLP-style GNN
//! steps, with single-step drivers.

use std::sync::Arc;

use crate::csr::CsrMatrix;
use crate::dense::DenseMatrix;
use crate::error::{ConfigError, KernelError};
use crate::kernel::{fused_mm, spmm_without_x};
use crate::ops::{Aop, Mop, OpSpec, Rop, Sop, Vop, VopFn};
use crate::scalar::{ColIndex, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AppKind {
    /// (ADD, NORM, SCAL, MUL, ASUM)
    FrLayout,
    /// (MUL, RSUM, SIGMOID, MUL, ASUM)
    NodeEmbedSigmoid,
    /// (SEL2ND, NOOP, NOOP, MUL, ASUM)
    GcnForward,
    /// (user MLP, NOOP, SIGMOID, MUL, AMAX)
    GnnMlp,
}

#[derive(Clone)]
pub struct AppParams<T> {
    /// SCAL factor of the layout step.
    pub alpha: T,
    /// Message function for [`AppKind::GnnMlp`].
    pub mlp: Option<VopFn<T>>,
}

impl<T: Scalar> Default for AppParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            mlp: None,
        }
    }
}

#[derive(Clone)]
pub struct AppConfig<T> {
    pub app: AppKind,
    pub spec: OpSpec<T>,
    pub params: AppParams<T>,
}

impl<T: Scalar> AppConfig<T> {
    pub fn new(app: AppKind, params: AppParams<T>) -> Result<Self, ConfigError> {
        Ok(Self {
            app,
            spec: make_spec(app, &params)?,
            params,
        })
    }
}

pub fn make_spec<T: Scalar>(app: AppKind, params: &AppParams<T>) -> Result<OpSpec<T>, ConfigError> {
    Ok(match app {
        AppKind::FrLayout => OpSpec::new(
            Vop::Add,
            Rop::Norm,
            Sop::Scal(params.alpha),
            Mop::Mul,
            Aop::Asum,
        ),
        AppKind::NodeEmbedSigmoid => {
            OpSpec::new(Vop::Mul, Rop::Rsum, Sop::Sigmoid, Mop::Mul, Aop::Asum)
        }
        AppKind::GcnForward => OpSpec::new(Vop::Sel2nd, Rop::Noop, Sop::Noop, Mop::Mul, Aop::Asum),
        AppKind::GnnMlp => {
            let Some(f) = params.mlp.clone() else {
                return Err(ConfigError::Invalid(
                    "GNN with MLP messages needs a user-provided MLP function".into(),
                ));
            };
            OpSpec::new(Vop::User(f), Rop::Noop, Sop::Sigmoid, Mop::Mul, Aop::Amax)
        }
    })
}

/// Layout variant on coordinate differences, `alpha * ||x_u - y_v||`.
/// Not one of the four standard configurations; runs on the generic path.
pub fn fr_difference_spec<T: Scalar>(alpha: T) -> OpSpec<T> {
    OpSpec::new(Vop::Sub, Rop::Norm, Sop::Scal(alpha), Mop::Mul, Aop::Asum)
}

/// `z_u = sum over v in N(u) of sigmoid(x_u . y_v) * y_v`.
pub fn embedding_step<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    t: usize,
) -> Result<DenseMatrix<T>, KernelError> {
    let spec = make_spec(AppKind::NodeEmbedSigmoid, &AppParams::default()).expect("no hook needed");
    fused_mm(a, x, y, &spec, t)
}

/// `z_u = sum over v in N(u) of alpha * ||x_u + y_v|| * y_v`.
pub fn fr_layout_step<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    alpha: T,
    t: usize,
) -> Result<DenseMatrix<T>, KernelError> {
    let params = AppParams { alpha, mlp: None };
    let spec = make_spec(AppKind::FrLayout, &params).expect("no hook needed");
    fused_mm(a, x, y, &spec, t)
}

/// `Z = A * Y`.
pub fn gcn_forward<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    y: &DenseMatrix<T>,
    t: usize,
) -> Result<DenseMatrix<T>, KernelError> {
    let spec = make_spec(AppKind::GcnForward, &AppParams::default()).expect("no hook needed");
    spmm_without_x(a, y, &spec, t)
}

pub fn gnn_mlp_step<T: Scalar, I: ColIndex>(
    a: &CsrMatrix<T, I>,
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    mlp: VopFn<T>,
    t: usize,
) -> Result<DenseMatrix<T>, KernelError> {
    let params = AppParams {
        alpha: T::one(),
        mlp: Some(mlp),
    };
    let spec = make_spec(AppKind::GnnMlp, &params).expect("hook supplied");
    fused_mm(a, x, y, &spec, t)
}

/// Single linear layer over the concatenation `[x_u; y_v]`: `W [x; y] + b`
/// with `W` of shape `d x 2d`.
#[derive(Debug, Clone)]
pub struct LinearMessage<T> {
    weights: DenseMatrix<T>,
    bias: Vec<T>,
}

impl<T: Scalar> LinearMessage<T> {
    pub fn new(weights: DenseMatrix<T>, bias: Vec<T>) -> Result<Self, ConfigError> {
        let d = weights.nrows();
        if weights.dim() != 2 * d || bias.len() != d {
            return Err(ConfigError::Invalid(format!(
                "linear message needs a {d}x{} weight matrix and {d} biases",
                2 * d
            )));
        }
        Ok(Self { weights, bias })
    }

    /// Deterministic small weights for tests and benchmarks.
    pub fn seeded(d: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (2.0 * d.max(1) as f64).sqrt();
        let w = (0..d * 2 * d)
            .map(|_| T::from_f64(rng.random_range(-scale..scale)))
            .collect();
        let bias = (0..d)
            .map(|_| T::from_f64(rng.random_range(-0.1..0.1)))
            .collect();
        Self {
            weights: DenseMatrix::new(d, 2 * d, w).expect("finite by construction"),
            bias,
        }
    }

    pub fn apply(&self, x: &[T], y: &[T], out: &mut [T]) {
        let d = self.bias.len();
        for (k, o) in out.iter_mut().enumerate().take(d) {
            let w = self.weights.row(k);
            let mut s = self.bias[k];
            for i in 0..d {
                s = s + w[i] * x[i];
            }
            for i in 0..d {
                s = s + w[d + i] * y[i];
            }
            *o = s;
        }
    }

    pub fn into_hook(self) -> VopFn<T> {
        Arc::new(move |x, y, out| self.apply(x, y, out))
    }
}
