//! Operator expression trees and their evaluation.
//!
//! An [`OperatorExpr`] is an immutable, reference-counted tree. Building a
//! node never simplifies it: `relax(N, 0)` stays a relaxation node even though
//! it evaluates to the identity. Simplifications belong to the modulus
//! calculus, which keeps the symbolic and sampled paths independent.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sets::ConvexSet;
use crate::vector::Vector;

/// Scalar functions applied coordinatewise by [`Node::Scalar1D`] leaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFn {
    /// `t -> factor * t`; nonexpansive iff `|factor| <= 1`.
    Scale {
        factor: f64,
    },
    Tanh,
    Sin,
    /// Proximal map of `lambda * |t|`.
    SoftThreshold {
        lambda: f64,
    },
}

impl ScalarFn {
    fn validate(&self) -> Result<()> {
        match *self {
            ScalarFn::Scale { factor } if !factor.is_finite() => Err(Error::InvalidParameter(
                "scale factor must be finite".into(),
            )),
            ScalarFn::SoftThreshold { lambda } if !(lambda.is_finite() && lambda >= 0.0) => Err(
                Error::InvalidParameter("soft threshold lambda must be >= 0".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ScalarFn::Scale { factor } => factor * t,
            ScalarFn::Tanh => t.tanh(),
            ScalarFn::Sin => t.sin(),
            ScalarFn::SoftThreshold { lambda } => t.signum() * (t.abs() - lambda).max(0.0),
        }
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Scale { factor } => write!(f, "scale({factor})"),
            ScalarFn::Tanh => write!(f, "tanh"),
            ScalarFn::Sin => write!(f, "sin"),
            ScalarFn::SoftThreshold { lambda } => write!(f, "soft_threshold({lambda})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Identity,
    /// `child + shift`
    Translate {
        child: OperatorExpr,
        shift: Vector,
    },
    /// `(1 - beta) Id + beta child`
    Relax {
        child: OperatorExpr,
        beta: f64,
    },
    /// `outer(inner(x))`
    Compose {
        outer: OperatorExpr,
        inner: OperatorExpr,
    },
    /// `2 P_C - Id`
    Reflect {
        set: ConvexSet,
    },
    Project {
        set: ConvexSet,
    },
    /// Proximal map of `alpha/2 * d_C^2`.
    ProxSqDist {
        set: ConvexSet,
        alpha: f64,
    },
    /// Proximal map of `-alpha ln t` on the real line.
    ProxNegLog {
        alpha: f64,
    },
    Scalar1D {
        function: ScalarFn,
    },
}

#[derive(Debug, PartialEq)]
struct Inner {
    dim: usize,
    node: Node,
}

/// Immutable expression for a map R^n -> R^n. Cloning is cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExprWire", into = "ExprWire")]
pub struct OperatorExpr(Arc<Inner>);

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl OperatorExpr {
    fn from_node(dim: usize, node: Node) -> Self {
        OperatorExpr(Arc::new(Inner { dim, node }))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self::from_node(dim, Node::Identity))
    }

    /// `T + v`.
    pub fn translate(child: &OperatorExpr, shift: Vector) -> Result<Self> {
        check_dims(child.dim(), shift.dim())?;
        Ok(Self::from_node(
            child.dim(),
            Node::Translate {
                child: child.clone(),
                shift,
            },
        ))
    }

    /// `(1 - beta) Id + beta N` for `beta` in `[0, 1]`.
    pub fn relax(child: &OperatorExpr, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "relaxation beta must lie in [0, 1], got {beta}"
            )));
        }
        Ok(Self::from_node(
            child.dim(),
            Node::Relax {
                child: child.clone(),
                beta,
            },
        ))
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &OperatorExpr, inner: &OperatorExpr) -> Result<Self> {
        check_dims(outer.dim(), inner.dim())?;
        Ok(Self::from_node(
            outer.dim(),
            Node::Compose {
                outer: outer.clone(),
                inner: inner.clone(),
            },
        ))
    }

    /// Folds `ops[0] ∘ ops[1] ∘ ... ∘ ops[k-1]` (rightmost applied first).
    pub fn compose_all(ops: &[OperatorExpr]) -> Result<Self> {
        let (last, rest) = ops
            .split_last()
            .ok_or_else(|| Error::InvalidParameter("empty composition".into()))?;
        rest.iter()
            .rev()
            .try_fold(last.clone(), |acc, op| OperatorExpr::compose(op, &acc))
    }

    pub fn project(set: ConvexSet) -> Self {
        Self::from_node(set.dim(), Node::Project { set })
    }

    pub fn reflect(set: ConvexSet) -> Self {
        Self::from_node(set.dim(), Node::Reflect { set })
    }

    /// Proximal map of `alpha/2 d_C^2`, which equals
    /// `relax(project(C), alpha / (1 + alpha))` pointwise.
    pub fn prox_sq_dist(set: ConvexSet, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        Ok(Self::from_node(set.dim(), Node::ProxSqDist { set, alpha }))
    }

    /// One-dimensional proximal map of the log barrier `-alpha ln t`:
    /// `y -> (y + sqrt(y^2 + 4 alpha)) / 2`.
    pub fn prox_neg_log(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and > 0, got {alpha}"
            )));
        }
        Ok(Self::from_node(1, Node::ProxNegLog { alpha }))
    }

    pub fn scalar1d(dim: usize, function: ScalarFn) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        function.validate()?;
        Ok(Self::from_node(dim, Node::Scalar1D { function }))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// JSON tag of the root node.
    pub fn tag(&self) -> &'static str {
        match self.node() {
            Node::Identity => "identity",
            Node::Translate { .. } => "translate",
            Node::Relax { .. } => "relax",
            Node::Compose { .. } => "compose",
            Node::Reflect { .. } => "reflect",
            Node::Project { .. } => "project",
            Node::ProxSqDist { .. } => "prox_sq_dist",
            Node::ProxNegLog { .. } => "prox_neg_log",
            Node::Scalar1D { .. } => "scalar1d",
        }
    }

    /// Evaluates the operator at `x`.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        x.ensure_dim(self.dim())?;
        self.eval(x)
    }

    fn eval(&self, x: &Vector) -> Result<Vector> {
        let out = match self.node() {
            Node::Identity => x.clone(),
            Node::Translate { child, shift } => &child.eval(x)? + shift,
            Node::Relax { child, beta } => relax_point(x, &child.eval(x)?, *beta),
            Node::Compose { outer, inner } => outer.eval(&inner.eval(x)?)?,
            Node::Reflect { set } => set.project(x)?.lin_comb(2.0, x, -1.0),
            Node::Project { set } => set.project(x)?,
            Node::ProxSqDist { set, alpha } => {
                relax_point(x, &set.project(x)?, alpha / (1.0 + alpha))
            }
            Node::ProxNegLog { alpha } => Vector::from_raw(vec![prox_neg_log_scalar(*alpha, x[0])]),
            Node::Scalar1D { function } => {
                Vector::from_raw(x.as_slice().iter().map(|&t| function.eval(t)).collect())
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::NonFinite(format!("{} node", self.tag())))
        }
    }
}

/// `(1 - beta) x + beta nx`, evaluated as `x + beta (nx - x)` so that
/// coordinates left in place by the child stay exact. `beta = 1` returns `nx`.
fn relax_point(x: &Vector, nx: &Vector, beta: f64) -> Vector {
    if beta == 1.0 {
        return nx.clone();
    }
    Vector::from_raw(
        x.as_slice()
            .iter()
            .zip(nx.as_slice())
            .map(|(xi, ni)| xi + beta * (ni - xi))
            .collect(),
    )
}

/// `(y + sqrt(y^2 + 4 alpha)) / 2`, using the conjugate form for negative `y`
/// to avoid cancellation.
pub(crate) fn prox_neg_log_scalar(alpha: f64, y: f64) -> f64 {
    let root = y.hypot(2.0 * alpha.sqrt());
    if y >= 0.0 {
        0.5 * (y + root)
    } else {
        2.0 * alpha / (root - y)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
enum ExprWire {
    Identity {
        dim: usize,
    },
    Translate {
        child: Box<ExprWire>,
        v: Vector,
    },
    Relax {
        beta: f64,
        child: Box<ExprWire>,
    },
    Compose {
        outer: Box<ExprWire>,
        inner: Box<ExprWire>,
    },
    Reflect {
        set: ConvexSet,
    },
    Project {
        set: ConvexSet,
    },
    ProxSqDist {
        set: ConvexSet,
        alpha: f64,
    },
    ProxNegLog {
        alpha: f64,
    },
    #[serde(rename = "scalar1d")]
    Scalar1D {
        dim: usize,
        function: ScalarFn,
    },
}

impl TryFrom<ExprWire> for OperatorExpr {
    type Error = Error;

    fn try_from(w: ExprWire) -> Result<Self> {
        match w {
            ExprWire::Identity { dim } => OperatorExpr::identity(dim),
            ExprWire::Translate { child, v } => OperatorExpr::translate(&(*child).try_into()?, v),
            ExprWire::Relax { beta, child } => OperatorExpr::relax(&(*child).try_into()?, beta),
            ExprWire::Compose { outer, inner } => {
                OperatorExpr::compose(&(*outer).try_into()?, &(*inner).try_into()?)
            }
            ExprWire::Reflect { set } => Ok(OperatorExpr::reflect(set)),
            ExprWire::Project { set } => Ok(OperatorExpr::project(set)),
            ExprWire::ProxSqDist { set, alpha } => OperatorExpr::prox_sq_dist(set, alpha),
            ExprWire::ProxNegLog { alpha } => OperatorExpr::prox_neg_log(alpha),
            ExprWire::Scalar1D { dim, function } => OperatorExpr::scalar1d(dim, function),
        }
    }
}

impl From<OperatorExpr> for ExprWire {
    fn from(e: OperatorExpr) -> Self {
        let boxed = |e: &OperatorExpr| Box::new(ExprWire::from(e.clone()));
        match e.node() {
            Node::Identity => ExprWire::Identity { dim: e.dim() },
            Node::Translate { child, shift } => ExprWire::Translate {
                child: boxed(child),
                v: shift.clone(),
            },
            Node::Relax { child, beta } => ExprWire::Relax {
                beta: *beta,
                child: boxed(child),
            },
            Node::Compose { outer, inner } => ExprWire::Compose {
                outer: boxed(outer),
                inner: boxed(inner),
            },
            Node::Reflect { set } => ExprWire::Reflect { set: set.clone() },
            Node::Project { set } => ExprWire::Project { set: set.clone() },
            Node::ProxSqDist { set, alpha } => ExprWire::ProxSqDist {
                set: set.clone(),
                alpha: *alpha,
            },
            Node::ProxNegLog { alpha } => ExprWire::ProxNegLog { alpha: *alpha },
            Node::Scalar1D { function } => ExprWire::Scalar1D {
                dim: e.dim(),
                function: *function,
            },
        }
    }
}

impl OperatorExpr {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("operator expressions always serialize")
    }
}
