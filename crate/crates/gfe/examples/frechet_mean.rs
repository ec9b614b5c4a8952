//! Weighted Fréchet means on the sphere: the building block of geodesic
//! interpolation, with the first-order stationarity residual.

use gfe::interpolation::geodesic_interpolate;
use gfe::manifold::{ManifoldKind, ManifoldPoint, TangentVector};
use nalgebra::DVector;

fn main() {
    let s2 = ManifoldKind::Sphere2;

    // midpoint of a quarter great circle
    let a = ManifoldPoint::from_slice(&[1.0, 0.0, 0.0]);
    let b = ManifoldPoint::from_slice(&[0.0, 1.0, 0.0]);
    let mid = geodesic_interpolate(s2, &[a.clone(), b.clone()], &[0.5, 0.5]).unwrap();
    println!("midpoint          = {:?}", mid.coords.as_slice());

    // three clustered points with uneven weights
    let north = ManifoldPoint::from_slice(&[0.0, 0.0, 1.0]);
    let frame = s2.tangent_frame(&north);
    let mk = |a: f64, b: f64| {
        s2.exp(
            &north,
            &TangentVector::new(north.clone(), &frame[0] * a + &frame[1] * b),
        )
    };
    let values = vec![mk(0.30, 0.00), mk(0.00, 0.25), mk(-0.15, -0.15)];
    let weights = [0.2, 0.3, 0.5];
    let mean = geodesic_interpolate(s2, &values, &weights).unwrap();
    println!("weighted mean     = {:?}", mean.coords.as_slice());

    // the defining first-order condition: sum_i w_i log_mean(v_i) = 0
    let mut residual = DVector::zeros(3);
    for (v, w) in values.iter().zip(weights.iter()) {
        residual.axpy(*w, &s2.log(&mean, v).unwrap().vec, 1.0);
    }
    println!("residual |sum w_i log v_i| = {:.3e}", residual.norm());

    // negative weights appear for second-order interpolation and are
    // handled by the same solve
    let mean2 = geodesic_interpolate(s2, &values, &[0.8, 0.5, -0.3]).unwrap();
    println!("sign-indefinite weights    = {:?}", mean2.coords.as_slice());
}
