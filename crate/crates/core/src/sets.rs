//! Convex sets with closed-form projections.
//!
//! Every variant is nonempty, closed and convex by construction, so the
//! projection is single-valued and computed exactly up to roundoff. The
//! `proper` flag (set is not the whole space) is decided from the structure of
//! the set alone, never by sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{dot, Vector};

/// Tolerance used to decide linear independence when orthonormalizing the
/// direction of an affine subspace.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum SetKind {
    /// `{x : <a, x> <= b}` with `a != 0`.
    Halfspace {
        a: Vector,
        b: f64,
    },
    /// Closed ball of radius `radius > 0`.
    Ball {
        center: Vector,
        radius: f64,
    },
    /// Coordinatewise `lo <= x <= hi`, with infinite bounds allowed.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `offset + span(basis)`; `basis` rows are orthonormal.
    Affine {
        basis: Vec<Vec<f64>>,
        offset: Vector,
    },
    Singleton {
        point: Vector,
    },
}

/// A nonempty closed convex subset of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetWire", into = "SetWire")]
pub struct ConvexSet {
    kind: SetKind,
    dim: usize,
}

impl ConvexSet {
    pub fn halfspace(a: Vector, b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::InvalidSet("halfspace offset must be finite".into()));
        }
        if a.norm_sq() == 0.0 {
            return Err(Error::InvalidSet("halfspace normal must be nonzero".into()));
        }
        let dim = a.dim();
        Ok(ConvexSet {
            kind: SetKind::Halfspace { a, b },
            dim,
        })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidSet(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let dim = center.dim();
        Ok(ConvexSet {
            kind: SetKind::Ball { center, radius },
            dim,
        })
    }

    /// Box with bounds `lo <= hi`. Use `f64::NEG_INFINITY` / `f64::INFINITY`
    /// for unbounded coordinates.
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidSet(
                "box bounds must be nonempty and of equal length".into(),
            ));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l == f64::INFINITY || h == f64::NEG_INFINITY || l > h {
                return Err(Error::InvalidSet(format!(
                    "box coordinate {i} has invalid bounds [{l}, {h}]"
                )));
            }
        }
        let dim = lo.len();
        Ok(ConvexSet {
            kind: SetKind::Box { lo, hi },
            dim,
        })
    }

    /// Affine subspace `offset + span(directions)`. The directions are
    /// orthonormalized with modified Gram-Schmidt; rank-deficient input is
    /// rejected.
    pub fn affine(directions: Vec<Vector>, offset: Vector) -> Result<Self> {
        let dim = offset.dim();
        if directions.len() > dim {
            return Err(Error::InvalidSet(format!(
                "{} directions cannot be independent in dimension {dim}",
                directions.len()
            )));
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(directions.len());
        for (k, d) in directions.into_iter().enumerate() {
            d.ensure_dim(dim)?;
            let mut v = d.into_inner();
            let scale = dot(&v, &v).sqrt();
            for u in &basis {
                let c = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
            }
            let n = dot(&v, &v).sqrt();
            if scale == 0.0 || n <= ORTHONORMAL_TOL * scale {
                return Err(Error::InvalidSet(format!(
                    "affine direction {k} is linearly dependent on the previous ones"
                )));
            }
            v.iter_mut().for_each(|vi| *vi /= n);
            basis.push(v);
        }
        Ok(ConvexSet {
            kind: SetKind::Affine { basis, offset },
            dim,
        })
    }

    pub fn singleton(point: Vector) -> Self {
        let dim = point.dim();
        ConvexSet {
            kind: SetKind::Singleton { point },
            dim,
        }
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Short lowercase name of the variant.
    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            SetKind::Halfspace { .. } => "halfspace",
            SetKind::Ball { .. } => "ball",
            SetKind::Box { .. } => "box",
            SetKind::Affine { .. } => "affine",
            SetKind::Singleton { .. } => "singleton",
        }
    }

    /// True unless the set is all of R^n.
    pub fn is_proper(&self) -> bool {
        match &self.kind {
            SetKind::Halfspace { .. } | SetKind::Ball { .. } | SetKind::Singleton { .. } => true,
            SetKind::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .any(|(l, h)| l.is_finite() || h.is_finite()),
            SetKind::Affine { basis, .. } => basis.len() < self.dim,
        }
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        x.ensure_dim(self.dim)?;
        let xs = x.as_slice();
        let out = match &self.kind {
            SetKind::Halfspace { a, b } => {
                let excess = a.inner(x) - b;
                if excess <= 0.0 {
                    xs.to_vec()
                } else {
                    let t = excess / a.norm_sq();
                    xs.iter()
                        .zip(a.as_slice())
                        .map(|(xi, ai)| xi - t * ai)
                        .collect()
                }
            }
            SetKind::Ball { center, radius } => {
                let diff = x - center;
                let dist = diff.norm();
                if dist <= *radius {
                    xs.to_vec()
                } else {
                    let t = radius / dist;
                    center
                        .as_slice()
                        .iter()
                        .zip(diff.as_slice())
                        .map(|(c, d)| c + t * d)
                        .collect()
                }
            }
            SetKind::Box { lo, hi } => xs
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(xi, (l, h))| xi.max(*l).min(*h))
                .collect(),
            SetKind::Affine { basis, offset } => {
                let rel = x - offset;
                let mut out = offset.as_slice().to_vec();
                for u in basis {
                    let c = dot(rel.as_slice(), u);
                    out.iter_mut().zip(u).for_each(|(o, ui)| *o += c * ui);
                }
                out
            }
            SetKind::Singleton { point } => point.as_slice().to_vec(),
        };
        let out = Vector::from_raw(out);
        if !out.is_finite() {
            return Err(Error::NonFinite(format!(
                "{} projection",
                self.variant_name()
            )));
        }
        Ok(out)
    }

    /// Whether `x` violates the defining constraints by at most `tol`
    /// (measured as a Euclidean distance).
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        if x.dim() != self.dim {
            return false;
        }
        match &self.kind {
            SetKind::Halfspace { a, b } => (a.inner(x) - b) / a.norm() <= tol,
            SetKind::Ball { center, radius } => (x - center).norm() - radius <= tol,
            SetKind::Box { lo, hi } => x
                .as_slice()
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(xi, (l, h))| *xi >= l - tol && *xi <= h + tol),
            SetKind::Affine { basis, offset } => {
                let rel = x - offset;
                let mut resid = rel.as_slice().to_vec();
                for u in basis {
                    let c = dot(rel.as_slice(), u);
                    resid.iter_mut().zip(u).for_each(|(r, ui)| *r -= c * ui);
                }
                dot(&resid, &resid).sqrt() <= tol
            }
            SetKind::Singleton { point } => (x - point).norm() <= tol,
        }
    }
}

/// JSON form of a set: `{"set": "halfspace", "a": [...], "b": 0.0}` and so on.
/// Infinite box bounds are written as `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "set", rename_all = "snake_case", deny_unknown_fields)]
enum SetWire {
    Halfspace {
        a: Vector,
        b: f64,
    },
    Ball {
        center: Vector,
        radius: f64,
    },
    Box {
        lo: Vec<Option<f64>>,
        hi: Vec<Option<f64>>,
    },
    Affine {
        basis: Vec<Vector>,
        offset: Vector,
    },
    Singleton {
        point: Vector,
    },
}

impl TryFrom<SetWire> for ConvexSet {
    type Error = Error;

    fn try_from(w: SetWire) -> Result<Self> {
        match w {
            SetWire::Halfspace { a, b } => ConvexSet::halfspace(a, b),
            SetWire::Ball { center, radius } => ConvexSet::ball(center, radius),
            SetWire::Box { lo, hi } => ConvexSet::boxed(
                lo.into_iter()
                    .map(|l| l.unwrap_or(f64::NEG_INFINITY))
                    .collect(),
                hi.into_iter().map(|h| h.unwrap_or(f64::INFINITY)).collect(),
            ),
            SetWire::Affine { basis, offset } => {
                // An already orthonormal basis is kept bit for bit so that
                // serialization round-trips exactly.
                let dim = offset.dim();
                let orthonormal = basis.iter().all(|u| u.dim() == dim)
                    && basis.iter().enumerate().all(|(i, u)| {
                        basis.iter().enumerate().all(|(j, v)| {
                            let target = if i == j { 1.0 } else { 0.0 };
                            (u.inner(v) - target).abs() <= 1e-12
                        })
                    });
                if orthonormal && basis.len() <= dim {
                    Ok(ConvexSet {
                        kind: SetKind::Affine {
                            basis: basis.into_iter().map(Vector::into_inner).collect(),
                            offset,
                        },
                        dim,
                    })
                } else {
                    ConvexSet::affine(basis, offset)
                }
            }
            SetWire::Singleton { point } => Ok(ConvexSet::singleton(point)),
        }
    }
}

impl From<ConvexSet> for SetWire {
    fn from(c: ConvexSet) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        match c.kind {
            SetKind::Halfspace { a, b } => SetWire::Halfspace { a, b },
            SetKind::Ball { center, radius } => SetWire::Ball { center, radius },
            SetKind::Box { lo, hi } => SetWire::Box {
                lo: lo.into_iter().map(finite).collect(),
                hi: hi.into_iter().map(finite).collect(),
            },
            SetKind::Affine { basis, offset } => SetWire::Affine {
                basis: basis.into_iter().map(Vector::from_raw).collect(),
                offset,
            },
            SetKind::Singleton { point } => SetWire::Singleton { point },
        }
    }
}
