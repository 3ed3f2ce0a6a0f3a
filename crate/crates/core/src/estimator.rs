//! Sampling-based lower bounds on the modulus of averagedness.
//!
//! A map `T` is κ-averaged (κ > 0) iff for all pairs
//!
//! ```text
//! ‖Tx − Ty‖² ≤ ‖x − y‖² − (1 − κ)/κ · ‖(Id − T)x − (Id − T)y‖².
//! ```
//!
//! Write `a = ‖Tx − Ty‖²`, `b = ‖x − y‖²` and `q = ‖(Id − T)x − (Id − T)y‖²`.
//! Multiplying by κ and collecting terms gives `κ(q + b − a) ≥ q`, so the
//! least κ admitted by one pair is `q / (q + b − a)` (or 0 when `q = 0`).
//! The modulus is the supremum of this quantity over all pairs, hence every
//! sampled pair certifies a lower bound.
//!
//! `b − a` is evaluated as `⟨r, d + e⟩` with `d = x − y`, `e = Tx − Ty` and
//! `r = d − e`, which avoids cancelling two nearly equal squared norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{certify, ModulusCertificate};
use crate::error::{Error, Result};
use crate::expr::OperatorExpr;
use crate::vector::{dot, Vector};

/// Pairs with `q <= PAIR_EPS_Q * b` act as translations and score 0.
pub const PAIR_EPS_Q: f64 = 1e-12;
/// Pairs with `q + (b − a) <= ROUNDING_FLOOR * M * ‖x − y‖`, where `M` is the
/// largest of `‖x‖, ‖y‖, ‖Tx‖, ‖Ty‖`, score 0: below this the absolute
/// rounding error of `Tx − Ty` (about `eps * M`) can move κ by more than 1e-7.
pub const ROUNDING_FLOOR: f64 = 1e-8;
/// Lipschitz ratio above which estimation aborts.
pub const EXPANSIVE_ABORT_TOL: f64 = 1e-6;
/// Lipschitz ratio tolerated by the nonexpansiveness audit.
pub const NONEXPANSIVE_TOL: f64 = 1e-9;
/// Slack allowed above a certified upper bound.
pub const UPPER_TOL: f64 = 1e-6;
/// Slack allowed below an exact, attained modulus.
pub const ATTAINED_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform in `[-radius, radius]^n`.
    UniformBox,
    /// Centered isotropic Gaussian.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub n_pairs: usize,
    pub radius: f64,
    pub distribution: Distribution,
    pub seed: u64,
    pub refine_top_k: usize,
    pub refine_steps: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            n_pairs: 100_000,
            radius: 10.0,
            distribution: Distribution::UniformBox,
            seed: 42,
            refine_top_k: 32,
            refine_steps: 200,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::InvalidParameter("n_pairs must be positive".into()));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParameter("radius must be positive".into()));
        }
        if let Distribution::Gaussian { sigma } = self.distribution {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::InvalidParameter("sigma must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_pairs(mut self, n_pairs: usize) -> Self {
        self.n_pairs = n_pairs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Independent generator for stream `index`; the sample stream does not
    /// depend on how work is split across threads.
    fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    fn draw_point(&self, rng: &mut ChaCha8Rng, dim: usize) -> Vector {
        let coords = match self.distribution {
            Distribution::UniformBox => (0..dim)
                .map(|_| self.radius * (2.0 * rng.random::<f64>() - 1.0))
                .collect(),
            Distribution::Gaussian { sigma } => (0..dim)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        };
        Vector::from_raw(coords)
    }

    /// The `index`-th sampled pair.
    pub fn sample_pair(&self, index: u64, dim: usize) -> (Vector, Vector) {
        let mut rng = self.rng(index);
        let x = self.draw_point(&mut rng, dim);
        let y = self.draw_point(&mut rng, dim);
        (x, y)
    }

    fn clamp(&self, mut v: Vec<f64>) -> Vec<f64> {
        if let Distribution::UniformBox = self.distribution {
            v.iter_mut()
                .for_each(|c| *c = c.clamp(-self.radius, self.radius));
        }
        v
    }

    fn step_scale(&self) -> f64 {
        match self.distribution {
            Distribution::UniformBox => self.radius,
            Distribution::Gaussian { sigma } => sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PairStats {
    kappa: f64,
    ratio: f64,
}

fn pair_stats(t: &OperatorExpr, x: &Vector, y: &Vector) -> Result<PairStats> {
    let d = x - y;
    let b = d.norm_sq();
    if b == 0.0 {
        return Err(Error::Contract("pair_kappa needs x != y".into()));
    }
    let (tx, ty) = (t.apply(x)?, t.apply(y)?);
    let e = &tx - &ty;
    let a = e.norm_sq();
    let ratio = (a / b).sqrt();
    if ratio > 1.0 + EXPANSIVE_ABORT_TOL {
        return Err(Error::Expansive { ratio });
    }
    let r = &d - &e;
    let q = r.norm_sq();
    if q <= PAIR_EPS_Q * b {
        return Ok(PairStats { kappa: 0.0, ratio });
    }
    let slack = dot(r.as_slice(), (&d + &e).as_slice()).max(0.0);
    let magnitude = [x.norm(), y.norm(), tx.norm(), ty.norm()]
        .into_iter()
        .fold(0.0, f64::max);
    if q + slack <= ROUNDING_FLOOR * magnitude * b.sqrt() {
        return Ok(PairStats { kappa: 0.0, ratio });
    }
    Ok(PairStats {
        kappa: q / (q + slack),
        ratio,
    })
}

/// Least κ for which the pair `(x, y)` satisfies the averagedness inequality.
///
/// Fails on `x == y` and when the pair expands distances by more than
/// [`EXPANSIVE_ABORT_TOL`].
pub fn pair_kappa(t: &OperatorExpr, x: &Vector, y: &Vector) -> Result<f64> {
    x.ensure_dim(t.dim())?;
    y.ensure_dim(t.dim())?;
    pair_stats(t, x, y).map(|s| s.kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vector,
    pub y: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub best: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phases {
    pub sampling: PhaseSummary,
    pub refinement: PhaseSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub kappa_lower: f64,
    pub witness: Witness,
    pub nonexpansive_worst_ratio: f64,
    pub pairs_evaluated: usize,
    pub config: SampleConfig,
    pub phases: Phases,
}

struct Candidate {
    kappa: f64,
    x: Vector,
    y: Vector,
}

/// Lower bound on the modulus of `t` from seeded random pairs followed by a
/// local search around the best `refine_top_k` pairs.
pub fn estimate_lower(t: &OperatorExpr, cfg: &SampleConfig) -> Result<EstimationReport> {
    estimate_with_seeds(t, cfg, &[])
}

/// Like [`estimate_lower`], with extra starting pairs competing for
/// refinement alongside the sampled ones.
pub fn estimate_with_seeds(
    t: &OperatorExpr,
    cfg: &SampleConfig,
    seeds: &[(Vector, Vector)],
) -> Result<EstimationReport> {
    cfg.validate()?;
    let dim = t.dim();
    for (x, y) in seeds {
        x.ensure_dim(dim)?;
        y.ensure_dim(dim)?;
    }

    let sampled: Vec<Result<PairStats>> = (0..cfg.n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let (x, y) = cfg.sample_pair(i, dim);
            pair_stats(t, &x, &y)
        })
        .collect();
    let seeded: Vec<Result<PairStats>> = seeds.iter().map(|(x, y)| pair_stats(t, x, y)).collect();

    let mut worst_ratio: f64 = 0.0;
    let mut scores = Vec::with_capacity(sampled.len() + seeded.len());
    for (i, s) in sampled.into_iter().chain(seeded).enumerate() {
        let s = s?;
        worst_ratio = worst_ratio.max(s.ratio);
        scores.push((s.kappa, i));
    }
    let sampling_evals = scores.len();
    // descending score, ascending index
    scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let sampling_best = scores[0].0;

    let pair_at = |i: usize| -> (Vector, Vector) {
        if i < cfg.n_pairs {
            cfg.sample_pair(i as u64, dim)
        } else {
            seeds[i - cfg.n_pairs].clone()
        }
    };

    let top: Vec<(usize, usize)> = scores
        .iter()
        .take(cfg.refine_top_k.max(1))
        .enumerate()
        .map(|(rank, &(_, i))| (rank, i))
        .collect();
    let refined: Vec<Result<(Candidate, usize, f64)>> = top
        .par_iter()
        .map(|&(rank, i)| {
            let (x, y) = pair_at(i);
            refine(t, cfg, x, y, (cfg.n_pairs + seeds.len() + rank) as u64)
        })
        .collect();

    let mut best: Option<Candidate> = None;
    let mut refine_evals = 0;
    for r in refined {
        let (cand, evals, ratio) = r?;
        refine_evals += evals;
        worst_ratio = worst_ratio.max(ratio);
        if best.as_ref().is_none_or(|b| cand.kappa > b.kappa) {
            best = Some(cand);
        }
    }
    let best = best.expect("at least one candidate is refined");
    let kappa_lower = pair_stats(t, &best.x, &best.y)?.kappa;
    debug_assert_eq!(kappa_lower, best.kappa);

    Ok(EstimationReport {
        kappa_lower,
        witness: Witness {
            x: best.x,
            y: best.y,
        },
        nonexpansive_worst_ratio: worst_ratio,
        pairs_evaluated: sampling_evals + refine_evals,
        config: *cfg,
        phases: Phases {
            sampling: PhaseSummary {
                best: sampling_best,
                evaluations: sampling_evals,
            },
            refinement: PhaseSummary {
                best: kappa_lower,
                evaluations: refine_evals,
            },
        },
    })
}

/// Random-direction hill climb on the pair `(x, y)` viewed as a point of
/// R^{2n}. Each step tries `z ± step·u`; success doubles the step, failure
/// halves it.
fn refine(
    t: &OperatorExpr,
    cfg: &SampleConfig,
    x: Vector,
    y: Vector,
    stream: u64,
) -> Result<(Candidate, usize, f64)> {
    let dim = t.dim();
    let mut rng = cfg.rng(stream);
    let start = pair_stats(t, &x, &y)?;
    let mut cur = Candidate {
        kappa: start.kappa,
        x,
        y,
    };
    let mut worst = start.ratio;
    let mut evals = 1;
    let max_step = cfg.step_scale();
    let mut step = 0.1 * max_step;

    for _ in 0..cfg.refine_steps {
        let u: Vec<f64> = (0..2 * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = dot(&u, &u).sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut improved = false;
        for sign in [1.0, -1.0] {
            let s = sign * step / norm;
            let cx = cfg.clamp(
                cur.x
                    .as_slice()
                    .iter()
                    .zip(&u[..dim])
                    .map(|(c, d)| c + s * d)
                    .collect(),
            );
            let cy = cfg.clamp(
                cur.y
                    .as_slice()
                    .iter()
                    .zip(&u[dim..])
                    .map(|(c, d)| c + s * d)
                    .collect(),
            );
            if cx == cy {
                continue;
            }
            let (cx, cy) = (Vector::from_raw(cx), Vector::from_raw(cy));
            let st = pair_stats(t, &cx, &cy)?;
            evals += 1;
            worst = worst.max(st.ratio);
            if st.kappa > cur.kappa {
                cur = Candidate {
                    kappa: st.kappa,
                    x: cx,
                    y: cy,
                };
                improved = true;
                break;
            }
        }
        step = if improved {
            (2.0 * step).min(max_step)
        } else {
            0.5 * step
        };
    }
    Ok((cur, evals, worst))
}

/// Runs [`estimate_with_seeds`] over increasing radii, seeding each run with
/// the previous witness. Since the boxes are nested and refinement only
/// accepts improvements, the estimates are non-decreasing.
pub fn estimate_over_radii(
    t: &OperatorExpr,
    cfg: &SampleConfig,
    radii: &[f64],
) -> Result<Vec<EstimationReport>> {
    if radii.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "radii must be non-decreasing".into(),
        ));
    }
    let mut reports: Vec<EstimationReport> = Vec::with_capacity(radii.len());
    for &r in radii {
        let seeds: Vec<(Vector, Vector)> = reports
            .last()
            .map(|prev| vec![(prev.witness.x.clone(), prev.witness.y.clone())])
            .unwrap_or_default();
        reports.push(estimate_with_seeds(t, &cfg.with_radius(r), &seeds)?);
    }
    Ok(reports)
}

/// Largest observed `‖Tx − Ty‖ / ‖x − y‖` over the sampled pairs.
pub fn audit_nonexpansive(t: &OperatorExpr, cfg: &SampleConfig) -> Result<f64> {
    cfg.validate()?;
    let dim = t.dim();
    let ratios: Vec<Result<f64>> = (0..cfg.n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let (x, y) = cfg.sample_pair(i, dim);
            let d = (&x - &y).norm();
            if d == 0.0 {
                return Ok(0.0);
            }
            Ok((&t.apply(&x)? - &t.apply(&y)?).norm() / d)
        })
        .collect();
    ratios.into_iter().try_fold(0.0_f64, |m, r| Ok(m.max(r?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

/// Estimates `(1 − inf g′)/2` for a one-dimensional `g` from central
/// differences on a uniform grid, clamped to `[0, 1]`.
pub fn derivative_modulus_1d(g: &OperatorExpr, grid: &Grid) -> Result<f64> {
    if g.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: g.dim(),
        });
    }
    if grid.n_points < 2 || !(grid.lo.is_finite() && grid.hi.is_finite() && grid.lo < grid.hi) {
        return Err(Error::InvalidParameter(
            "grid needs lo < hi and at least 2 points".into(),
        ));
    }
    let eval = |t: f64| -> Result<f64> { Ok(g.apply(&Vector::new(vec![t])?)?[0]) };
    let mut min_slope = f64::INFINITY;
    for i in 0..grid.n_points {
        let y = grid.lo + (grid.hi - grid.lo) * i as f64 / (grid.n_points - 1) as f64;
        let h = 1e-6 * y.abs().max(1.0);
        let slope = (eval(y + h)? - eval(y - h)?) / (2.0 * h);
        if !slope.is_finite() {
            return Err(Error::NonFinite(format!("difference quotient at {y}")));
        }
        min_slope = min_slope.min(slope);
    }
    Ok(((1.0 - min_slope) / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    AuditFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub verdict: Verdict,
    pub certificate: ModulusCertificate,
    pub audit_ratio: f64,
    /// Whether the supremum is known to be attained, enabling the lower check.
    pub attained: bool,
    pub empirical: Option<f64>,
    /// `certificate.upper − empirical`.
    pub gap: Option<f64>,
    pub report: Option<EstimationReport>,
}

/// Cross-checks the structural certificate of `t` against the sampled lower
/// bound. With `attained`, an exact certificate must also be approached from
/// below within [`ATTAINED_TOL`].
pub fn verify_certificate(
    t: &OperatorExpr,
    cfg: &SampleConfig,
    attained: bool,
) -> Result<Verification> {
    let certificate = certify(t);
    let audit_ratio = audit_nonexpansive(t, cfg)?;
    let audit_failure = |certificate, audit_ratio| Verification {
        verdict: Verdict::AuditFailure,
        certificate,
        audit_ratio,
        attained,
        empirical: None,
        gap: None,
        report: None,
    };
    if audit_ratio > 1.0 + NONEXPANSIVE_TOL {
        return Ok(audit_failure(certificate, audit_ratio));
    }
    let report = match estimate_lower(t, cfg) {
        Ok(r) => r,
        Err(Error::Expansive { ratio }) => return Ok(audit_failure(certificate, ratio)),
        Err(e) => return Err(e),
    };
    let empirical = report.kappa_lower;
    let below_upper = empirical <= certificate.upper + UPPER_TOL;
    let reaches_exact = match certificate.exact_value() {
        Some(k) if attained => empirical >= k - ATTAINED_TOL,
        _ => true,
    };
    Ok(Verification {
        verdict: if below_upper && reaches_exact {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
        gap: Some(certificate.upper - empirical),
        empirical: Some(empirical),
        certificate,
        audit_ratio,
        attained,
        report: Some(report),
    })
}
