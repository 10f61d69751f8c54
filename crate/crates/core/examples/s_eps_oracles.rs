//! Membership, support, separation and projection for the planar set of
//! intervals `[x, y]` carrying at least `1 - eps` standard normal mass.

use twosided::seps::{self, ConePoint3, CutKind, Point2, RiskLevel};

fn main() -> twosided::Result<()> {
    let eps = RiskLevel::new(0.05)?;
    for p in [Point2::new(-2.0, 2.0), Point2::new(-1.0, 1.5), Point2::new(0.0, 0.0)] {
        println!("({}, {}) mass {:.6} member {}", p.x, p.y, seps::mass(p), seps::contains(p, eps));
    }

    let s = seps::support(1.0, -1.0, eps)?;
    println!("support in direction (1, -1): {:.12} attained at {:?}", s.value, s.maximizer);

    let p = Point2::new(-1.0, 1.5);
    let tangent = seps::separate_tangent(p, eps)?;
    let gradient = seps::separate_gradient(p, eps)?;
    println!("tangent cut  {:.6} x + {:.6} y <= {:.6}", tangent.a1, tangent.a2, tangent.rhs);
    println!("gradient cut {:.6} x + {:.6} y <= {:.6}", gradient.a1, gradient.a2, gradient.rhs);

    let proj = seps::project(p, eps)?;
    println!("projection {:?} at lambda {:.6}", proj.point, proj.lambda.get());

    // the conic hull: (x, y, z) with (x/z, y/z) in the set
    let q = ConePoint3::new(-1.0, 1.5, 0.8);
    println!("cone member {}", seps::cone_contains(q, eps));
    let cut = seps::cone_separate(ConePoint3::new(-1.0, 1.5, 1.2), eps, CutKind::Tangent)?;
    println!("lifted cut {:?}", cut.a);
    Ok(())
}
