//! Structural certificates for every catalog operator.

use averagedness::{analyze, ConvexSet, OperatorExpr, Vector};

fn main() -> averagedness::Result<()> {
    let n = 3;
    let halfspace = ConvexSet::halfspace(Vector::new(vec![1.0; n])?, 0.5)?;
    let line = ConvexSet::affine(vec![Vector::new(vec![1.0, 2.0, 0.0])?], Vector::zeros(n))?;
    let whole = ConvexSet::boxed(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])?;

    let catalog = [
        ("identity", OperatorExpr::identity(n)?),
        (
            "translate(identity)",
            OperatorExpr::translate(
                &OperatorExpr::identity(n)?,
                Vector::new(vec![1.0, -1.0, 2.0])?,
            )?,
        ),
        (
            "project(halfspace)",
            OperatorExpr::project(halfspace.clone()),
        ),
        ("project(line)", OperatorExpr::project(line.clone())),
        ("project(whole space)", OperatorExpr::project(whole)),
        (
            "relax(project, 0.6)",
            OperatorExpr::relax(&OperatorExpr::project(halfspace.clone()), 0.6)?,
        ),
        (
            "reflect(halfspace)",
            OperatorExpr::reflect(halfspace.clone()),
        ),
        ("reflect(line)", OperatorExpr::reflect(line)),
        (
            "prox alpha/2 d^2, alpha=2",
            OperatorExpr::prox_sq_dist(halfspace, 2.0)?,
        ),
        ("prox -ln, alpha=1", OperatorExpr::prox_neg_log(1.0)?),
    ];

    for (name, t) in &catalog {
        let a = analyze(t);
        let c = &a.certificate;
        let value = match c.exact_value() {
            Some(k) => format!("{k:.6}"),
            None => format!("[{:.6}, {:.6}]", c.lower, c.upper),
        };
        println!(
            "{name:<28} kappa {value:<20} {:?}{}",
            c.injectivity,
            if a.bijective { ", bijective" } else { "" }
        );
        for step in &c.provenance {
            println!("    {}: {}", step.rule, step.anchor);
        }
    }
    Ok(())
}
