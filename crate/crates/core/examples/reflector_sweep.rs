//! Estimates for a reflector and the log-barrier prox as the sampling radius grows.
//!
//! Each radius is warm-started from the previous witness, so the sequence never decreases.

use averagedness::{estimate_over_radii, ConvexSet, OperatorExpr, SampleConfig, Vector};

fn main() -> averagedness::Result<()> {
    let radii = [1.0, 10.0, 100.0, 1000.0];
    let cfg = SampleConfig::default().with_pairs(20_000);
    let ops = [
        (
            "reflect(halfspace)",
            OperatorExpr::reflect(ConvexSet::halfspace(Vector::new(vec![1.0, 1.0])?, 0.5)?),
        ),
        ("prox -ln", OperatorExpr::prox_neg_log(1.0)?),
    ];
    for (name, t) in &ops {
        print!("{name:<20}");
        for r in estimate_over_radii(t, &cfg, &radii)? {
            print!("  R={:<6} {:.6}", r.config.radius, r.kappa_lower);
        }
        println!();
    }
    Ok(())
}
