#![allow(dead_code)]

use std::sync::Arc;

use fusedmm::ops::Message;
use fusedmm::{Aop, CsrMatrix, DenseMatrix, Mop, OpSpec, Rop, Scalar, Sop, Vop};
use rand::Rng;

/// Rows in ascending column order, values in `[-1, 1)`.
pub fn random_csr(rng: &mut impl Rng, m: usize, n: usize, density: f64) -> CsrMatrix<f64> {
    let mut entries = Vec::new();
    for u in 0..m {
        for v in 0..n {
            if rng.random_bool(density) {
                entries.push((u, v, rng.random_range(-1.0..1.0)));
            }
        }
    }
    CsrMatrix::from_coo(&entries, m, n).unwrap()
}

pub fn random_dense(rng: &mut impl Rng, rows: usize, d: usize) -> DenseMatrix<f64> {
    let data = (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, d, data).unwrap()
}

pub fn sigmoid_embed<T: Scalar>() -> OpSpec<T> {
    OpSpec::new(Vop::Mul, Rop::Rsum, Sop::Sigmoid, Mop::Mul, Aop::Asum)
}

pub fn spmm_gcn<T: Scalar>() -> OpSpec<T> {
    OpSpec::new(Vop::Sel2nd, Rop::Noop, Sop::Noop, Mop::Mul, Aop::Asum)
}

pub fn fr_layout<T: Scalar>(alpha: f64) -> OpSpec<T> {
    OpSpec::new(
        Vop::Add,
        Rop::Norm,
        Sop::Scal(T::from_f64(alpha)),
        Mop::Mul,
        Aop::Asum,
    )
}

fn user_vop<T: Scalar>() -> Vop<T> {
    let half = T::from_f64(0.5);
    Vop::User(Arc::new(move |x: &[T], y: &[T], out: &mut [T]| {
        for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
            *o = a * b - half * b;
        }
    }))
}

fn user_rop<T: Scalar>() -> Rop<T> {
    Rop::User(Arc::new(|t: &[T]| {
        t.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }))
}

fn user_sop<T: Scalar>() -> Sop<T> {
    Sop::User(Arc::new(|h: &mut [T], a_uv: T| {
        for v in h {
            *v = (*v * a_uv).tanh();
        }
    }))
}

fn user_mop<T: Scalar>() -> Mop<T> {
    Mop::User(Arc::new(
        |h: Message<'_, T>, y: &[T], a_uv: T, out: &mut [T]| match h {
            Message::Scalar(s) => {
                for (o, &yv) in out.iter_mut().zip(y) {
                    *o = s * yv + a_uv;
                }
            }
            Message::Vector(h) => {
                for ((o, &hv), &yv) in out.iter_mut().zip(h).zip(y) {
                    *o = hv - a_uv * yv;
                }
            }
        },
    ))
}

fn user_aop<T: Scalar>() -> Aop<T> {
    Aop::User {
        f: Arc::new(|z: &mut [T], w: &[T]| {
            for (zv, &wv) in z.iter_mut().zip(w) {
                *zv = zv.min(wv);
            }
        }),
        identity: T::infinity(),
    }
}

/// Per-slot choice of a spec, buildable in any precision. Index 0 of every
/// slot is the user closure.
#[derive(Debug, Clone, Copy)]
pub struct SpecRecipe {
    slots: [usize; 5],
    alpha: f64,
}

impl SpecRecipe {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut pick = |standard: usize| {
            if rng.random_bool(0.35) {
                0
            } else {
                rng.random_range(1..=standard)
            }
        };
        let slots = [pick(4), pick(4), pick(3), pick(2), pick(2)];
        Self {
            slots,
            alpha: rng.random_range(-2.0..2.0),
        }
    }

    pub fn build<T: Scalar>(&self) -> OpSpec<T> {
        let [v, r, s, m, a] = self.slots;
        let vop = match v {
            0 => user_vop(),
            1 => Vop::Add,
            2 => Vop::Mul,
            3 => Vop::Sel2nd,
            _ => Vop::Sub,
        };
        let rop = match r {
            0 => user_rop(),
            1 => Rop::Noop,
            2 => Rop::Rsum,
            3 => Rop::Rmul,
            _ => Rop::Norm,
        };
        let sop = match s {
            0 => user_sop(),
            1 => Sop::Noop,
            2 => Sop::Sigmoid,
            _ => Sop::Scal(T::from_f64(self.alpha)),
        };
        let mop = match m {
            0 => user_mop(),
            1 => Mop::Mul,
            _ => Mop::Sel2nd,
        };
        let aop = match a {
            0 => user_aop(),
            1 => Aop::Asum,
            _ => Aop::Amax,
        };
        OpSpec::new(vop, rop, sop, mop, aop)
    }
}

/// Cycles through the three known patterns and random recipes.
pub enum Case {
    Known(fn() -> OpSpec<f64>, fn() -> OpSpec<f32>),
    Fr(f64),
    Random(SpecRecipe),
}

impl Case {
    pub fn pick(i: usize, rng: &mut impl Rng) -> Self {
        match i % 4 {
            0 => Case::Known(sigmoid_embed, sigmoid_embed),
            1 => Case::Known(spmm_gcn, spmm_gcn),
            2 => Case::Fr(rng.random_range(-2.0..2.0)),
            _ => Case::Random(SpecRecipe::random(rng)),
        }
    }

    pub fn f64(&self) -> OpSpec<f64> {
        match self {
            Case::Known(f, _) => f(),
            Case::Fr(alpha) => fr_layout(*alpha),
            Case::Random(r) => r.build(),
        }
    }

    pub fn f32(&self) -> OpSpec<f32> {
        match self {
            Case::Known(_, f) => f(),
            Case::Fr(alpha) => fr_layout(*alpha),
            Case::Random(r) => r.build(),
        }
    }
}

pub struct Instance {
    pub a: CsrMatrix<f64>,
    pub x: DenseMatrix<f64>,
    pub y: DenseMatrix<f64>,
}

/// `m, n` in `[1, max_side]`, density in `(0, 0.3]`, `d` in `[1, max_d]`.
pub fn random_instance(rng: &mut impl Rng, max_side: usize, max_d: usize) -> Instance {
    let m = rng.random_range(1..=max_side);
    let n = rng.random_range(1..=max_side);
    let density = 0.3 * (1.0 - rng.random::<f64>());
    let d = rng.random_range(1..=max_d);
    Instance {
        a: random_csr(rng, m, n, density),
        x: random_dense(rng, m, d),
        y: random_dense(rng, n, d),
    }
}

/// Bitwise equality, treating any two NaNs as equal.
pub fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
}

pub fn same_bits_f32(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()))
}

/// How far an `f32` result is from the `f64` truth: `|a - b| / max(|b|, 1)`.
pub fn rel_err_f32(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&a, &b)| {
            let a = a as f64;
            if a == b || (a.is_nan() && b.is_nan()) {
                0.0
            } else {
                (a - b).abs() / b.abs().max(1.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `A * Y` by a dense triple loop, columns ascending.
pub fn dense_matmul(a: &CsrMatrix<f64>, y: &DenseMatrix<f64>) -> Vec<f64> {
    let (m, n, d) = (a.nrows(), a.ncols(), y.dim());
    let dense = a.to_dense();
    let mut z = vec![0.0; m * d];
    for u in 0..m {
        for v in 0..n {
            if let Some(a_uv) = dense[u * n + v] {
                for k in 0..d {
                    z[u * d + k] += a_uv * y.row(v)[k];
                }
            }
        }
    }
    z
}
