//! Sampled lower bound for a projection, with the witness pair it found.

use averagedness::{certify, estimate_lower, ConvexSet, OperatorExpr, SampleConfig};

fn main() -> averagedness::Result<()> {
    let t = OperatorExpr::project(ConvexSet::boxed(vec![0.0; 4], vec![1.0; 4])?);
    let cfg = SampleConfig::default().with_pairs(50_000).with_seed(1);

    let r = estimate_lower(&t, &cfg)?;
    println!("certificate      {:?}", certify(&t).exact_value());
    println!("sampled kappa    {:.9}", r.kappa_lower);
    println!(
        "  after sampling {:.9} ({} pairs)",
        r.phases.sampling.best, r.phases.sampling.evaluations
    );
    println!(
        "  after refining {:.9} ({} evaluations)",
        r.phases.refinement.best, r.phases.refinement.evaluations
    );
    println!("worst |Tx-Ty|/|x-y| {:.9}", r.nonexpansive_worst_ratio);

    println!("witness x = {:?}", r.witness.x.as_slice());
    println!("witness y = {:?}", r.witness.y.as_slice());
    Ok(())
}
