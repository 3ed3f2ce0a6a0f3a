//! Structural modulus calculus.
//!
//! [`certify`] walks an expression tree bottom-up and attaches to every node an
//! interval known to contain its modulus of averagedness, together with a
//! conservative injectivity flag. Composition lower bounds rely on that flag:
//! a composition whose inner factor collapses two points is itself
//! non-injective, and non-injective nonexpansive maps have modulus at least ½.
//!
//! Rules:
//!
//! | id | node | result |
//! |----|------|--------|
//! | R1 | `Id`, `Id + v` | exactly 0, bijective |
//! | R2 | `T + v` | same as `T` |
//! | R3 | `P_C` | ½ for proper `C` (non-injective), else 0 |
//! | R4 | `(1-β)Id + βN` | `β·[lower, upper]` of `N` |
//! | R5 | `2P_C - Id` | 1 for proper `C`, else 0 |
//! | R6 | prox of `α/2 d_C²` | `α / (2(1+α))` |
//! | R7 | log-barrier prox | ½, injective |
//! | R8 | `T1 ∘ T2` | Ogura-Yamada upper bound, ½ lower bound on collisions |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Node, OperatorExpr};
use crate::sets::{ConvexSet, SetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injectivity {
    Injective,
    NotInjective,
    Unknown,
}

impl std::fmt::Display for Injectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Injectivity::Injective => "injective",
            Injectivity::NotInjective => "not_injective",
            Injectivity::Unknown => "unknown",
        })
    }
}

/// One rule application: which rule fired, the fact it relies on, and the
/// interval it produced at that node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTrace {
    pub rule: String,
    pub anchor: String,
    pub lower: f64,
    pub upper: f64,
}

/// Interval `[lower, upper]` containing the modulus of an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusCertificate {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    pub injectivity: Injectivity,
    pub provenance: Vec<RuleTrace>,
}

impl ModulusCertificate {
    /// `Some(value)` when the interval is a single point.
    pub fn exact_value(&self) -> Option<f64> {
        self.exact.then_some(self.lower)
    }
}

/// Certificate plus structural facts used while recursing.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub certificate: ModulusCertificate,
    /// Known to be a bijection of R^n. `false` means "not known".
    pub bijective: bool,
}

struct Builder {
    lower: f64,
    upper: f64,
    injectivity: Injectivity,
    bijective: bool,
    provenance: Vec<RuleTrace>,
}

impl Builder {
    fn new(lower: f64, upper: f64, injectivity: Injectivity) -> Self {
        Builder {
            lower,
            upper,
            injectivity,
            bijective: false,
            provenance: Vec::new(),
        }
    }

    fn exact(value: f64, injectivity: Injectivity) -> Self {
        Self::new(value, value, injectivity)
    }

    fn bijective(mut self, b: bool) -> Self {
        self.bijective = b;
        self
    }

    fn inherit(mut self, child: &Analysis) -> Self {
        self.provenance
            .extend(child.certificate.provenance.iter().cloned());
        self
    }

    fn trace(mut self, rule: &str, anchor: &str) -> Self {
        self.provenance.push(RuleTrace {
            rule: rule.to_string(),
            anchor: anchor.to_string(),
            lower: self.lower,
            upper: self.upper,
        });
        self
    }

    fn finish(mut self) -> Analysis {
        if self.injectivity == Injectivity::NotInjective && self.lower < 0.5 {
            self.lower = 0.5;
            self = self.trace(
                "R8",
                "non-injective nonexpansive maps have modulus at least 1/2",
            );
        }
        self.lower = self.lower.clamp(0.0, 1.0);
        self.upper = self.upper.clamp(self.lower, 1.0);
        Analysis {
            certificate: ModulusCertificate {
                lower: self.lower,
                upper: self.upper,
                exact: self.lower == self.upper,
                injectivity: self.injectivity,
                provenance: self.provenance,
            },
            bijective: self.bijective,
        }
    }
}

/// Computes a modulus certificate for `expr`.
pub fn certify(expr: &OperatorExpr) -> ModulusCertificate {
    analyze(expr).certificate
}

/// Certificate together with the bijectivity flag.
pub fn analyze(expr: &OperatorExpr) -> Analysis {
    match expr.node() {
        Node::Identity => Builder::exact(0.0, Injectivity::Injective)
            .bijective(true)
            .trace("R1", "identity has modulus zero")
            .finish(),

        Node::Translate { child, .. } => {
            if matches!(child.node(), Node::Identity) {
                return Builder::exact(0.0, Injectivity::Injective)
                    .bijective(true)
                    .trace("R1", "identity plus a constant vector has modulus zero")
                    .finish();
            }
            let c = analyze(child);
            Builder::new(
                c.certificate.lower,
                c.certificate.upper,
                c.certificate.injectivity,
            )
            .inherit(&c)
            .bijective(c.bijective)
            .trace(
                "R2",
                "adding a constant vector leaves the modulus unchanged",
            )
            .finish()
        }

        Node::Project { set } => certify_projection(set),

        Node::Relax { child, beta } => {
            let c = analyze(child);
            let beta = *beta;
            let upper = beta * c.certificate.upper;
            let (injectivity, bijective) = if beta == 0.0 {
                (Injectivity::Injective, true)
            } else if beta == 1.0 {
                (c.certificate.injectivity, c.bijective)
            } else if upper < 0.5 {
                (Injectivity::Injective, false)
            } else {
                (Injectivity::Unknown, false)
            };
            Builder::new(beta * c.certificate.lower, upper, injectivity)
                .inherit(&c)
                .bijective(bijective)
                .trace(
                    "R4",
                    "relaxation toward the identity scales the modulus by beta",
                )
                .finish()
        }

        Node::Reflect { set } => certify_reflector(set),

        Node::ProxSqDist { set, alpha } => {
            let value = if set.is_proper() {
                alpha / (2.0 * (1.0 + alpha))
            } else {
                0.0
            };
            Builder::exact(value, Injectivity::Injective)
                .bijective(value == 0.0)
                .trace(
                    "R6",
                    "prox of alpha/2 times squared distance has modulus alpha/(2(1+alpha))",
                )
                .finish()
        }

        Node::ProxNegLog { .. } => Builder::exact(0.5, Injectivity::Injective)
            .trace(
                "R7",
                "log-barrier prox: modulus 1/2, derivative positive everywhere",
            )
            .finish(),

        Node::Compose { outer, inner } => certify_composition(&analyze(outer), &analyze(inner)),

        Node::Scalar1D { .. } => Builder::new(0.0, 1.0, Injectivity::Unknown)
            .trace(
                "unknown",
                "no structural rule; every nonexpansive map is 1-averaged",
            )
            .finish(),
    }
}

fn certify_projection(set: &ConvexSet) -> Analysis {
    if !set.is_proper() {
        return Builder::exact(0.0, Injectivity::Injective)
            .bijective(true)
            .trace("R3", "projection onto the whole space is the identity")
            .finish();
    }
    let anchor = match set.kind() {
        SetKind::Affine { .. } => "projection onto a proper affine subspace has modulus 1/2",
        _ => "projection onto a proper closed convex set has modulus 1/2",
    };
    // x outside C and P_C x collide, so the projection is never injective.
    Builder::exact(0.5, Injectivity::NotInjective)
        .trace("R3", anchor)
        .finish()
}

fn certify_reflector(set: &ConvexSet) -> Analysis {
    if !set.is_proper() {
        return Builder::exact(0.0, Injectivity::Injective)
            .bijective(true)
            .trace("R5", "reflection through the whole space is the identity")
            .finish();
    }
    // A collision exists when some exterior point is mapped into the set,
    // where the reflector is the identity.
    let (injectivity, bijective) = match set.kind() {
        SetKind::Halfspace { .. } | SetKind::Ball { .. } => (Injectivity::NotInjective, false),
        SetKind::Box { lo, hi } => {
            let folds = lo
                .iter()
                .zip(hi)
                .any(|(l, h)| l < h && (l.is_finite() || h.is_finite()));
            if folds {
                (Injectivity::NotInjective, false)
            } else {
                // Degenerate coordinates reflect through a point, the others
                // are untouched.
                (Injectivity::Injective, true)
            }
        }
        // Affine reflections are isometric involutions.
        SetKind::Affine { .. } | SetKind::Singleton { .. } => (Injectivity::Injective, true),
    };
    Builder::exact(1.0, injectivity)
        .bijective(bijective)
        .trace(
            "R5",
            "reflector of a proper closed convex set has modulus 1",
        )
        .finish()
}

fn certify_composition(outer: &Analysis, inner: &Analysis) -> Analysis {
    let (co, ci) = (&outer.certificate, &inner.certificate);

    // A modulus-zero factor is a translation, so the composition inherits the
    // other factor's certificate.
    if co.exact_value() == Some(0.0) || ci.exact_value() == Some(0.0) {
        let (other, other_bij) = if co.exact_value() == Some(0.0) {
            (ci, inner.bijective)
        } else {
            (co, outer.bijective)
        };
        return Builder::new(other.lower, other.upper, other.injectivity)
            .inherit(outer)
            .inherit(inner)
            .bijective(other_bij)
            .trace(
                "R8",
                "composition with a modulus-zero factor is a translation of the other factor",
            )
            .finish();
    }

    let bound = oy_bound(&[co.upper, ci.upper]).expect("certificate bounds lie in [0, 1]");
    let collides = ci.injectivity == Injectivity::NotInjective
        || (inner.bijective && co.injectivity == Injectivity::NotInjective);
    let injectivity = if collides {
        Injectivity::NotInjective
    } else if (co.injectivity == Injectivity::Injective && ci.injectivity == Injectivity::Injective)
        || bound.value < 0.5
    {
        // a map with modulus below 1/2 is injective
        Injectivity::Injective
    } else {
        Injectivity::Unknown
    };
    let lower = if collides { 0.5 } else { 0.0 };

    let mut b = Builder::new(lower, bound.value, injectivity)
        .inherit(outer)
        .inherit(inner)
        .bijective(outer.bijective && inner.bijective)
        .trace(
            "R8",
            if bound.saturated {
                "composition upper bound saturated at 1"
            } else {
                "Ogura-Yamada upper bound for compositions"
            },
        );
    if collides {
        b = b.trace(
            "R8",
            "composition with a collision pair has modulus at least 1/2",
        );
    } else if co.injectivity == Injectivity::NotInjective {
        b = b.trace(
            "R8",
            "lower bound hypothesis unverified: inner factor not known to be bijective",
        );
    }
    b.finish()
}

/// Result of folding the Ogura-Yamada bound over a list of moduli.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OyBound {
    pub value: f64,
    /// The pairwise formula hit `ab = 1`; `value` is the trivial bound 1.
    pub saturated: bool,
}

/// Pairwise bound `(a + b - 2ab) / (1 - ab)`, `None` when `ab = 1`.
pub fn oy_pair(a: f64, b: f64) -> Option<f64> {
    let ab = a * b;
    (ab != 1.0).then(|| (a + b - 2.0 * ab) / (1.0 - ab))
}

/// Upper bound on the modulus of a composition of operators with moduli
/// `kappas`, in any order.
///
/// With `phi(k) = k / (1 - k)` the pairwise bound satisfies
/// `phi(OY(a, b)) = phi(a) + phi(b)`, so the left fold equals
/// `phi^-1(sum phi(k_i))` and does not depend on the order of the factors.
/// Zero entries are translations and drop out; a single entry of 1 forces the
/// value 1, two or more make the pairwise formula undefined (`saturated`).
pub fn oy_bound(kappas: &[f64]) -> Result<OyBound> {
    if kappas.is_empty() {
        return Err(Error::InvalidParameter(
            "oy_bound needs at least one modulus".into(),
        ));
    }
    if let Some(k) = kappas.iter().find(|k| !(0.0..=1.0).contains(*k)) {
        return Err(Error::InvalidParameter(format!(
            "modulus {k} outside [0, 1]"
        )));
    }
    let ones = kappas.iter().filter(|&&k| k == 1.0).count();
    if ones > 0 {
        return Ok(OyBound {
            value: 1.0,
            saturated: ones > 1,
        });
    }
    let nonzero: Vec<f64> = kappas.iter().copied().filter(|&k| k > 0.0).collect();
    let value = match nonzero.as_slice() {
        [] => 0.0,
        [k] => *k,
        ks => {
            let s: f64 = ks.iter().map(|k| k / (1.0 - k)).sum();
            s / (1.0 + s)
        }
    };
    Ok(OyBound {
        value,
        saturated: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    /// `T ∘ P_C`
    TAfterProjection,
    /// `P_C ∘ T`, valid when `T` is non-injective or bijective (caller asserts).
    ProjectionAfterT,
}

/// Closed-form interval for compositions of a nonexpansive `T` with modulus
/// `kappa_t` and a projection onto a proper convex set: `[1/2, 1/(2 - kappa_t)]`.
pub fn special_case_bounds(_kind: SpecialCase, kappa_t: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&kappa_t) {
        return Err(Error::InvalidParameter(format!(
            "modulus {kappa_t} outside [0, 1]"
        )));
    }
    Ok((0.5, 1.0 / (2.0 - kappa_t)))
}
