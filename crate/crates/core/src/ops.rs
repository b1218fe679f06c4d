//! The five operator slots of a fused message-passing step.
//!
//! Per stored edge `(u, v)` with value `a_uv`:
//!
//! ```text
//! t = VOP(x_u, y_v)          vector of length d
//! s = ROP(t)                 scalar, unless ROP is Noop
//! h = SOP(s or t, a_uv)      message: scalar iff ROP is not Noop
//! w = MOP(h, y_v, a_uv)      vector of length d
//! z_u = AOP(z_u, w)
//! ```
//!
//! Every slot takes either a standard operation or a user closure. User
//! closures are called concurrently from several workers and must be pure.

use std::fmt;
use std::sync::Arc;

use crate::error::ConfigError;
use crate::scalar::Scalar;

/// `(x_u, y_v, out)`; `out` has the same length as the inputs.
pub type VopFn<T> = Arc<dyn Fn(&[T], &[T], &mut [T]) + Send + Sync>;
pub type RopFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
/// In-place on the message (length 1 for a scalar message); second argument is `a_uv`.
pub type SopFn<T> = Arc<dyn Fn(&mut [T], T) + Send + Sync>;
/// `(h, y_v, a_uv, out)`.
pub type MopFn<T> = Arc<dyn Fn(Message<'_, T>, &[T], T, &mut [T]) + Send + Sync>;
/// `(z_u, w)`, accumulating into `z_u`.
pub type AopFn<T> = Arc<dyn Fn(&mut [T], &[T]) + Send + Sync>;

/// Borrowed edge message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Message<'a, T> {
    Scalar(T),
    Vector(&'a [T]),
}

/// Owned edge message, returned by [`apply_sop`].
#[derive(Debug, Clone, PartialEq)]
pub enum OwnedMessage<T> {
    Scalar(T),
    Vector(Vec<T>),
}

impl<T: Copy> OwnedMessage<T> {
    pub fn as_message(&self) -> Message<'_, T> {
        match self {
            OwnedMessage::Scalar(s) => Message::Scalar(*s),
            OwnedMessage::Vector(v) => Message::Vector(v),
        }
    }
}

#[derive(Clone)]
pub enum Vop<T> {
    Add,
    Mul,
    Sel2nd,
    Sub,
    User(VopFn<T>),
}

#[derive(Clone)]
pub enum Rop<T> {
    Noop,
    Rsum,
    Rmul,
    Norm,
    User(RopFn<T>),
}

#[derive(Clone)]
pub enum Sop<T> {
    Noop,
    Sigmoid,
    Scal(T),
    User(SopFn<T>),
}

#[derive(Clone)]
pub enum Mop<T> {
    /// Scalar message: `h * y_v`. Vector message: `a_uv * h`.
    Mul,
    Sel2nd,
    User(MopFn<T>),
}

#[derive(Clone)]
pub enum Aop<T> {
    Asum,
    Amax,
    User { f: AopFn<T>, identity: T },
}

#[inline(always)]
pub fn sigmoid<T: Scalar>(s: T) -> T {
    T::one() / (T::one() + (-s).exp())
}

impl<T: Scalar> Vop<T> {
    #[inline]
    pub fn apply(&self, x: &[T], y: &[T], out: &mut [T]) {
        assert!(
            x.len() == y.len() && y.len() == out.len(),
            "VOP length mismatch: {} vs {} (out {})",
            x.len(),
            y.len(),
            out.len()
        );
        match self {
            Vop::Add => {
                for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
                    *o = a + b;
                }
            }
            Vop::Mul => {
                for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
                    *o = a * b;
                }
            }
            Vop::Sub => {
                for ((o, &a), &b) in out.iter_mut().zip(x).zip(y) {
                    *o = a - b;
                }
            }
            Vop::Sel2nd => out.copy_from_slice(y),
            Vop::User(f) => f(x, y, out),
        }
    }
}

impl<T: Scalar> Rop<T> {
    /// `None` for Noop: the message stays a vector.
    #[inline]
    pub fn apply(&self, z: &[T]) -> Option<T> {
        match self {
            Rop::Noop => None,
            Rop::Rsum => {
                let mut s = T::zero();
                for &v in z {
                    s = s + v;
                }
                Some(s)
            }
            Rop::Rmul => {
                let mut p = T::one();
                for &v in z {
                    p = p * v;
                }
                Some(p)
            }
            Rop::Norm => {
                let mut s = T::zero();
                for &v in z {
                    s = s + v * v;
                }
                Some(s.sqrt())
            }
            Rop::User(f) => Some(f(z)),
        }
    }

    pub fn is_noop(&self) -> bool {
        matches!(self, Rop::Noop)
    }
}

impl<T: Scalar> Sop<T> {
    /// Scales a message in place. Standard operations ignore `a_uv`.
    #[inline]
    pub fn apply(&self, msg: &mut [T], a_uv: T) {
        match self {
            Sop::Noop => {}
            Sop::Sigmoid => msg.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Sop::Scal(alpha) => msg.iter_mut().for_each(|v| *v = *alpha * *v),
            Sop::User(f) => f(msg, a_uv),
        }
    }

    #[inline]
    pub fn apply_scalar(&self, s: T, a_uv: T) -> T {
        match self {
            Sop::Noop => s,
            Sop::Sigmoid => sigmoid(s),
            Sop::Scal(alpha) => *alpha * s,
            Sop::User(f) => {
                let mut m = [s];
                f(&mut m, a_uv);
                m[0]
            }
        }
    }
}

impl<T: Scalar> Mop<T> {
    #[inline]
    pub fn apply(&self, h: Message<'_, T>, y: &[T], a_uv: T, out: &mut [T]) {
        assert_eq!(y.len(), out.len(), "MOP length mismatch");
        match (self, h) {
            (Mop::Mul, Message::Scalar(h)) => {
                for (o, &b) in out.iter_mut().zip(y) {
                    *o = h * b;
                }
            }
            (Mop::Mul, Message::Vector(h)) => {
                assert_eq!(h.len(), y.len(), "MOP message length mismatch");
                for (o, &b) in out.iter_mut().zip(h) {
                    *o = a_uv * b;
                }
            }
            (Mop::Sel2nd, _) => out.copy_from_slice(y),
            (Mop::User(f), h) => f(h, y, a_uv, out),
        }
    }
}

impl<T: Scalar> Aop<T> {
    #[inline]
    pub fn apply(&self, z: &mut [T], w: &[T]) {
        assert_eq!(z.len(), w.len(), "AOP length mismatch");
        match self {
            Aop::Asum => {
                for (a, &b) in z.iter_mut().zip(w) {
                    *a = *a + b;
                }
            }
            Aop::Amax => {
                for (a, &b) in z.iter_mut().zip(w) {
                    *a = a.max(b);
                }
            }
            Aop::User { f, .. } => f(z, w),
        }
    }

    /// Starting value of every accumulator (and the output of an empty row).
    pub fn identity(&self) -> T {
        match self {
            Aop::Asum => T::zero(),
            Aop::Amax => T::neg_infinity(),
            Aop::User { identity, .. } => *identity,
        }
    }
}

pub fn apply_vop<T: Scalar>(op: &Vop<T>, x: &[T], y: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); y.len()];
    op.apply(x, y, &mut out);
    out
}

pub fn apply_rop<T: Scalar>(op: &Rop<T>, z: &[T]) -> Option<T> {
    op.apply(z)
}

pub fn apply_sop<T: Scalar>(op: &Sop<T>, msg: OwnedMessage<T>, a_uv: T) -> OwnedMessage<T> {
    match msg {
        OwnedMessage::Scalar(s) => OwnedMessage::Scalar(op.apply_scalar(s, a_uv)),
        OwnedMessage::Vector(mut v) => {
            op.apply(&mut v, a_uv);
            OwnedMessage::Vector(v)
        }
    }
}

pub fn apply_mop<T: Scalar>(op: &Mop<T>, h: Message<'_, T>, y: &[T], a_uv: T) -> Vec<T> {
    let mut out = vec![T::zero(); y.len()];
    op.apply(h, y, a_uv, &mut out);
    out
}

pub fn apply_aop<T: Scalar>(op: &Aop<T>, z: &[T], w: &[T]) -> Vec<T> {
    let mut out = z.to_vec();
    op.apply(&mut out, w);
    out
}

/// One complete five-slot configuration.
#[derive(Clone)]
pub struct OpSpec<T> {
    pub vop: Vop<T>,
    pub rop: Rop<T>,
    pub sop: Sop<T>,
    pub mop: Mop<T>,
    pub aop: Aop<T>,
}

impl<T: Scalar> OpSpec<T> {
    pub fn new(vop: Vop<T>, rop: Rop<T>, sop: Sop<T>, mop: Mop<T>, aop: Aop<T>) -> Self {
        Self {
            vop,
            rop,
            sop,
            mop,
            aop,
        }
    }

    /// Builds a spec from catalog operations, one per slot in
    /// VOP, ROP, SOP, MOP, AOP order.
    pub fn from_standard(ops: [StandardOp; 5]) -> Result<Self, ConfigError> {
        for (op, slot) in ops.iter().zip(Slot::ALL) {
            if !op.valid_in(slot) {
                return Err(ConfigError::Invalid(format!("{op} is not valid in {slot}")));
            }
        }
        let [v, r, s, m, a] = ops;
        let vop = match v {
            StandardOp::Add => Vop::Add,
            StandardOp::Mul => Vop::Mul,
            StandardOp::Sel2nd => Vop::Sel2nd,
            StandardOp::Sub => Vop::Sub,
            _ => unreachable!(),
        };
        let rop = match r {
            StandardOp::Noop => Rop::Noop,
            StandardOp::Rsum => Rop::Rsum,
            StandardOp::Rmul => Rop::Rmul,
            StandardOp::Norm => Rop::Norm,
            _ => unreachable!(),
        };
        let sop = match s {
            StandardOp::Noop => Sop::Noop,
            StandardOp::Sigmoid => Sop::Sigmoid,
            StandardOp::Scal(alpha) => Sop::Scal(T::from_f64(alpha)),
            _ => unreachable!(),
        };
        let mop = match m {
            StandardOp::Mul => Mop::Mul,
            StandardOp::Sel2nd => Mop::Sel2nd,
            _ => unreachable!(),
        };
        let aop = match a {
            StandardOp::Asum => Aop::Asum,
            StandardOp::Amax => Aop::Amax,
            _ => unreachable!(),
        };
        Ok(Self::new(vop, rop, sop, mop, aop))
    }

    /// Scalar messages iff ROP is active.
    pub fn message_is_scalar(&self) -> bool {
        !self.rop.is_noop()
    }

    pub fn has_user_fn(&self) -> bool {
        matches!(self.vop, Vop::User(_))
            || matches!(self.rop, Rop::User(_))
            || matches!(self.sop, Sop::User(_))
            || matches!(self.mop, Mop::User(_))
            || matches!(self.aop, Aop::User { .. })
    }

    pub fn pattern(&self) -> KnownPattern {
        pattern_of(self)
    }
}

impl<T: Scalar> fmt::Debug for OpSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vop = match &self.vop {
            Vop::Add => "ADD".to_string(),
            Vop::Mul => "MUL".into(),
            Vop::Sel2nd => "SEL2ND".into(),
            Vop::Sub => "SUB".into(),
            Vop::User(_) => "USER".into(),
        };
        let rop = match &self.rop {
            Rop::Noop => "NOOP".to_string(),
            Rop::Rsum => "RSUM".into(),
            Rop::Rmul => "RMUL".into(),
            Rop::Norm => "NORM".into(),
            Rop::User(_) => "USER".into(),
        };
        let sop = match &self.sop {
            Sop::Noop => "NOOP".to_string(),
            Sop::Sigmoid => "SIGMOID".into(),
            Sop::Scal(a) => format!("SCAL({a})"),
            Sop::User(_) => "USER".into(),
        };
        let mop = match &self.mop {
            Mop::Mul => "MUL",
            Mop::Sel2nd => "SEL2ND",
            Mop::User(_) => "USER",
        };
        let aop = match &self.aop {
            Aop::Asum => "ASUM",
            Aop::Amax => "AMAX",
            Aop::User { .. } => "USER",
        };
        write!(f, "({vop}, {rop}, {sop}, {mop}, {aop})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Vop,
    Rop,
    Sop,
    Mop,
    Aop,
}

impl Slot {
    pub const ALL: [Slot; 5] = [Slot::Vop, Slot::Rop, Slot::Sop, Slot::Mop, Slot::Aop];
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Slot::Vop => "VOP",
            Slot::Rop => "ROP",
            Slot::Sop => "SOP",
            Slot::Mop => "MOP",
            Slot::Aop => "AOP",
        };
        f.write_str(s)
    }
}

/// Catalog of predefined operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardOp {
    Add,
    Mul,
    Sel2nd,
    Sub,
    Sigmoid,
    Scal(f64),
    Norm,
    Rsum,
    Rmul,
    Asum,
    Amax,
    Noop,
}

impl StandardOp {
    pub fn valid_in(&self, slot: Slot) -> bool {
        use StandardOp::*;
        match slot {
            Slot::Vop => matches!(self, Add | Mul | Sel2nd | Sub),
            Slot::Rop => matches!(self, Rsum | Rmul | Norm | Noop),
            Slot::Sop => matches!(self, Sigmoid | Scal(_) | Noop),
            Slot::Mop => matches!(self, Mul | Sel2nd),
            Slot::Aop => matches!(self, Asum | Amax),
        }
    }
}

impl fmt::Display for StandardOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StandardOp::Add => f.write_str("ADD"),
            StandardOp::Mul => f.write_str("MUL"),
            StandardOp::Sel2nd => f.write_str("SEL2ND"),
            StandardOp::Sub => f.write_str("SUB"),
            StandardOp::Sigmoid => f.write_str("SIGMOID"),
            StandardOp::Scal(a) => write!(f, "SCAL({a})"),
            StandardOp::Norm => f.write_str("NORM"),
            StandardOp::Rsum => f.write_str("RSUM"),
            StandardOp::Rmul => f.write_str("RMUL"),
            StandardOp::Asum => f.write_str("ASUM"),
            StandardOp::Amax => f.write_str("AMAX"),
            StandardOp::Noop => f.write_str("NOOP"),
        }
    }
}

/// Slot combinations with a dedicated blocked kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KnownPattern {
    /// (MUL, RSUM, SIGMOID, MUL, ASUM)
    SigmoidEmbed,
    /// (SEL2ND, NOOP, NOOP, MUL, ASUM)
    SpmmGcn,
    /// (ADD, NORM, SCAL, MUL, ASUM)
    FrLayout,
    Generic,
}

pub fn pattern_of<T: Scalar>(spec: &OpSpec<T>) -> KnownPattern {
    match (&spec.vop, &spec.rop, &spec.sop, &spec.mop, &spec.aop) {
        (Vop::Mul, Rop::Rsum, Sop::Sigmoid, Mop::Mul, Aop::Asum) => KnownPattern::SigmoidEmbed,
        (Vop::Sel2nd, Rop::Noop, Sop::Noop, Mop::Mul, Aop::Asum) => KnownPattern::SpmmGcn,
        (Vop::Add, Rop::Norm, Sop::Scal(_), Mop::Mul, Aop::Asum) => KnownPattern::FrLayout,
        _ => KnownPattern::Generic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use StandardOp::*;

    fn spec(ops: [StandardOp; 5]) -> OpSpec<f64> {
        OpSpec::from_standard(ops).unwrap()
    }

    #[test]
    fn vop_examples() {
        assert_eq!(
            apply_vop(&Vop::Mul, &[1.0, 2.0], &[3.0, 4.0]),
            vec![3.0, 8.0]
        );
        assert_eq!(
            apply_vop(&Vop::Sel2nd, &[9.0, 9.0], &[3.0, 4.0]),
            vec![3.0, 4.0]
        );
        assert_eq!(
            apply_vop(&Vop::Add, &[1.0, -1.0], &[0.0, 0.0]),
            vec![1.0, -1.0]
        );
        assert_eq!(
            apply_vop(&Vop::Sub, &[1.0, 2.0], &[3.0, 5.0]),
            vec![-2.0, -3.0]
        );
    }

    #[test]
    #[should_panic(expected = "VOP length mismatch")]
    fn vop_length_mismatch() {
        apply_vop(&Vop::<f64>::Add, &[1.0], &[1.0, 2.0]);
    }

    #[test]
    fn rop_examples() {
        assert_eq!(apply_rop(&Rop::Rsum, &[1.0, 2.0, 3.0]), Some(6.0));
        assert_eq!(apply_rop(&Rop::Rmul, &[2.0, 3.0, 4.0]), Some(24.0));
        assert_eq!(apply_rop(&Rop::Norm, &[3.0, 4.0]), Some(5.0));
        assert_eq!(apply_rop(&Rop::<f64>::Noop, &[3.0, 4.0]), None);
    }

    #[test]
    fn sop_examples() {
        let s = |op: &Sop<f64>, m| apply_sop(op, m, 1.0);
        assert_eq!(
            s(&Sop::Sigmoid, OwnedMessage::Scalar(0.0)),
            OwnedMessage::Scalar(0.5)
        );
        assert_eq!(
            s(&Sop::Scal(2.0), OwnedMessage::Vector(vec![1.0, 2.0])),
            OwnedMessage::Vector(vec![2.0, 4.0])
        );
        match s(&Sop::Sigmoid, OwnedMessage::Scalar(100.0)) {
            OwnedMessage::Scalar(v) => assert!((v - 1.0).abs() <= f64::EPSILON),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            s(&Sop::Noop, OwnedMessage::Scalar(7.0)),
            OwnedMessage::Scalar(7.0)
        );
    }

    #[test]
    fn user_sop_sees_edge_value() {
        let op: Sop<f64> = Sop::User(Arc::new(|m: &mut [f64], a| m[0] *= a));
        assert_eq!(op.apply_scalar(2.0, 3.0), 6.0);
    }

    #[test]
    fn mop_examples() {
        assert_eq!(
            apply_mop(&Mop::Mul, Message::Scalar(0.5), &[2.0, 4.0], 1.0),
            vec![1.0, 2.0]
        );
        assert_eq!(
            apply_mop(&Mop::Mul, Message::Vector(&[1.0, 1.0]), &[1.0, 1.0], 3.0),
            vec![3.0, 3.0]
        );
        assert_eq!(
            apply_mop(&Mop::Mul, Message::Scalar(1.0), &[5.0, 6.0], 7.0),
            vec![5.0, 6.0]
        );
        assert_eq!(
            apply_mop(&Mop::Sel2nd, Message::Scalar(9.0), &[5.0, 6.0], 7.0),
            vec![5.0, 6.0]
        );
    }

    #[test]
    fn aop_examples() {
        assert_eq!(
            apply_aop(&Aop::Asum, &[1.0, 1.0], &[2.0, 3.0]),
            vec![3.0, 4.0]
        );
        assert_eq!(
            apply_aop(&Aop::Amax, &[1.0, 5.0], &[3.0, 2.0]),
            vec![3.0, 5.0]
        );
        assert_eq!(
            apply_aop(&Aop::Asum, &[0.0, 0.0], &[2.0, 3.0]),
            vec![2.0, 3.0]
        );
        assert_eq!(Aop::<f32>::Amax.identity(), f32::NEG_INFINITY);
        assert_eq!(Aop::<f32>::Asum.identity(), 0.0);
    }

    #[test]
    fn known_patterns() {
        assert_eq!(
            spec([Mul, Rsum, Sigmoid, Mul, Asum]).pattern(),
            KnownPattern::SigmoidEmbed
        );
        assert_eq!(
            spec([Sel2nd, Noop, Noop, Mul, Asum]).pattern(),
            KnownPattern::SpmmGcn
        );
        assert_eq!(
            spec([Add, Norm, Scal(0.5), Mul, Asum]).pattern(),
            KnownPattern::FrLayout
        );
        assert_eq!(
            spec([Sub, Norm, Scal(0.5), Mul, Asum]).pattern(),
            KnownPattern::Generic
        );
        assert_eq!(
            spec([Mul, Rsum, Sigmoid, Mul, Amax]).pattern(),
            KnownPattern::Generic
        );

        let user: OpSpec<f64> = OpSpec::new(
            Vop::User(Arc::new(|x, y, o| Vop::Mul.apply(x, y, o))),
            Rop::Noop,
            Sop::Sigmoid,
            Mop::Mul,
            Aop::Amax,
        );
        assert!(user.has_user_fn());
        assert_eq!(pattern_of(&user), KnownPattern::Generic);
    }

    #[test]
    fn user_fn_in_any_slot_forces_generic() {
        let base = spec([Mul, Rsum, Sigmoid, Mul, Asum]);
        let mut variants = Vec::new();
        let mut s = base.clone();
        s.rop = Rop::User(Arc::new(|z| Rop::Rsum.apply(z).unwrap()));
        variants.push(s);
        let mut s = base.clone();
        s.sop = Sop::User(Arc::new(|m, _| Sop::Sigmoid.apply(m, 0.0)));
        variants.push(s);
        let mut s = base.clone();
        s.mop = Mop::User(Arc::new(|h, y, a, o| Mop::Mul.apply(h, y, a, o)));
        variants.push(s);
        let mut s = base;
        s.aop = Aop::User {
            f: Arc::new(|z, w| Aop::Asum.apply(z, w)),
            identity: 0.0,
        };
        variants.push(s);
        for s in variants {
            assert_eq!(pattern_of(&s), KnownPattern::Generic, "{s:?}");
        }
    }

    #[test]
    fn slot_validity() {
        assert!(OpSpec::<f64>::from_standard([Rsum, Rsum, Sigmoid, Mul, Asum]).is_err());
        assert!(OpSpec::<f64>::from_standard([Mul, Rsum, Sigmoid, Mul, Rsum]).is_err());
        assert!(!Sigmoid.valid_in(Slot::Vop));
        assert!(Noop.valid_in(Slot::Sop));
        assert!(!Noop.valid_in(Slot::Aop));
    }

    proptest! {
        #[test]
        fn aop_identities(z in prop::collection::vec(-1e6f64..1e6, 1..32)) {
            let zero = vec![0.0; z.len()];
            prop_assert_eq!(apply_aop(&Aop::Asum, &z, &zero), z.clone());
            prop_assert_eq!(apply_aop(&Aop::Amax, &z, &z), z.clone());
        }

        #[test]
        fn sigmoid_bounded_and_monotone(a in -30.0f64..30.0, b in -30.0f64..30.0) {
            let (sa, sb) = (sigmoid(a), sigmoid(b));
            prop_assert!(sa > 0.0 && sa < 1.0);
            if a < b {
                prop_assert!(sa <= sb);
            }
        }

        #[test]
        fn sigmoid_in_closed_unit_interval(s in -1e300f64..1e300) {
            let v = sigmoid(s);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn standard_ops_deterministic(
            x in prop::collection::vec(-10.0f64..10.0, 8),
            y in prop::collection::vec(-10.0f64..10.0, 8),
        ) {
            for v in [Vop::Add, Vop::Mul, Vop::Sel2nd, Vop::Sub] {
                prop_assert_eq!(apply_vop(&v, &x, &y), apply_vop(&v, &x, &y));
            }
            for r in [Rop::Rsum, Rop::Rmul, Rop::Norm] {
                prop_assert_eq!(apply_rop(&r, &x), apply_rop(&r, &x));
            }
        }
    }
}
