//! Geometry kernel tour: distance, exp/log, parallel transport, curvature,
//! and the derivatives of the bivariate logarithm on the unit sphere.

use gfe::manifold::{ManifoldKind, ManifoldPoint, TangentVector};
use nalgebra::DVector;

fn main() {
    let s2 = ManifoldKind::Sphere2;
    let p = ManifoldPoint::from_slice(&[1.0, 0.0, 0.0]);
    let q = ManifoldPoint::from_slice(&[0.0, 1.0, 0.0]);

    println!(
        "d(p, q)           = {:.12} (quarter circle)",
        s2.dist(&p, &q)
    );

    let v = s2.log(&p, &q).unwrap();
    println!("log_p q           = {:?}", v.vec.as_slice());
    let back = s2.exp(&p, &v);
    println!("exp_p(log_p q)    = {:?}", back.coords.as_slice());

    let w = TangentVector::new(p.clone(), DVector::from_row_slice(&[0.0, 0.3, 0.7]));
    let t = s2.parallel_transport(&p, &q, &w).unwrap();
    println!(
        "transport keeps norms: |w| = {:.12}, |T w| = {:.12}",
        s2.norm(&w),
        s2.norm(&t)
    );

    // constant-curvature operator R(x, y) z
    let x = TangentVector::new(p.clone(), DVector::from_row_slice(&[0.0, 1.0, 0.0]));
    let y = TangentVector::new(p.clone(), DVector::from_row_slice(&[0.0, 0.0, 1.0]));
    let r = s2.curvature_op(&p, &x, &y, &y);
    println!("R(x, y) y         = {:?}", r.vec.as_slice());

    // the log differentials stay quadratically close to their flat limits
    let near = s2.exp(
        &p,
        &TangentVector::new(p.clone(), DVector::from_row_slice(&[0.0, 0.3, 0.0])),
    );
    let d = s2.dist(&p, &near);
    let db = s2.dlog_base(&p, &near).unwrap();
    let frame = s2.tangent_frame(&p);
    let mut max_dev: f64 = 0.0;
    for e in &frame {
        let col = &db * e + e;
        max_dev = max_dev.max(col.norm());
    }
    println!(
        "|dlog_base + I|   = {max_dev:.3e} <= d^2 = {:.3e} at distance {d:.2}",
        d * d
    );
}
