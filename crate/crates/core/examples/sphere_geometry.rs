//! Exponential and logarithmic maps on the sphere and the Jacobi-field
//! differential of exp.

use manifold_ridge::hurdat::latlon_to_point;
use manifold_ridge::manifold::{Manifold, Tangent};

fn main() -> manifold_ridge::error::Result<()> {
    let s = Manifold::Sphere;
    let miami = latlon_to_point(25.8, -80.2);
    let bermuda = latlon_to_point(32.3, -64.8);

    let v = s.log(&miami, &bermuda)?;
    println!("distance Miami-Bermuda: {:.1} mi", s.distance(&miami, &bermuda)? * 3958.8);
    println!("|log| = {:.6} rad", v.norm());

    let back = s.exp(&miami, &v)?;
    let err = back.coords().iter().zip(bermuda.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("exp(log) round trip error: {err:.1e}");

    // a unit vector perpendicular to v shrinks by sin|v|/|v| along the geodesic
    let w = s.project(&miami, &[0.0, 0.0, 1.0])?;
    let along = v.vec.iter().zip(&w.vec).map(|(a, b)| a * b).sum::<f64>() / v.norm().powi(2);
    let perp: Vec<f64> = w.vec.iter().zip(&v.vec).map(|(a, b)| a - along * b).collect();
    let norm = perp.iter().map(|c| c * c).sum::<f64>().sqrt();
    let w = Tangent::new(miami.clone(), perp.iter().map(|c| c / norm).collect());
    let dw = s.dexp(&miami, &v, &w)?;
    println!("|dexp(w)| = {:.9}, sin|v|/|v| = {:.9}", dw.norm(), v.norm().sin() / v.norm());
    Ok(())
}
