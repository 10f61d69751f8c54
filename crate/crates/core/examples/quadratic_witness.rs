//! The quadratic chance constraint `P((x xi1)^2 + (y xi2)^2 <= 1) >= p` is
//! not convex in `(x, y)`: both endpoints of a segment pass while the
//! midpoint fails.

use twosided::quadcc;

fn main() -> twosided::Result<()> {
    let w = quadcc::nonconvexity_witness()?;
    println!("P at (0.6, 1.0) = {:.6}", w.left);
    println!("P at (1.0, 0.6) = {:.6}", w.right);
    println!("P at (0.8, 0.8) = {:.6}", w.mid);
    println!("level {} -> nonconvex: {}", w.level, w.proves_nonconvexity());
    print!("{}", quadcc::to_csv(&quadcc::witness_trace(13)?)?);
    Ok(())
}
