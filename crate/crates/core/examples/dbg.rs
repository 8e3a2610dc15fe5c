use stokes_core::laplace::*;
use stokes_core::num::*;
use stokes_core::system::*;
use stokes_core::matrix::Matrix;
use rug::Float;
use std::time::Instant;
fn main() {
    const P: u32 = 256;
    let blocks = vec![
        JordanBlockSpec { a: Complex::zero(P), lam: Complex::zero(P), size: 1 },
        JordanBlockSpec { a: Complex::one(P), lam: Complex::zero(P), size: 3 },
    ];
    let b1 = Matrix::zero(P, 4, 4);
    let mut b2 = Matrix::zero(P, 4, 4);
    for r in 1..4 { b2[(r, 0)] = Complex::one(P); }
    let sys = LevelOneSystem::new(blocks, vec![b1, b2]);
    let rhos: Vec<f64> = (0..10).map(|i| 0.05 + 0.01 * i as f64).collect();
    let t0 = Instant::now();
    let fit = stokes_from_jumps(&sys, &Float::new(P), 40, &rhos).unwrap();
    println!("elapsed {:?}", t0.elapsed());
    // boxed values
    let g = euler_gamma(P);
    let piv = pi(P);
    let c41 = Complex { re: Float::new(P), im: Float::with_val(P, 2 * &piv) };
    let c31 = Complex { re: Float::new(P), im: Float::with_val(P, 2 * Float::with_val(P, &piv * Float::with_val(P, 2 - &g))) };
    let c21 = {
        let mut v = Float::with_val(P, 6 * &piv);
        let mut pi3 = piv.clone().square(); pi3 *= &piv; pi3 /= 6;
        v -= &pi3;
        v -= Float::with_val(P, 4 * Float::with_val(P, &piv * &g));
        v += Float::with_val(P, &piv * &g.clone().square());
        Complex { re: Float::new(P), im: v }
    };
    for (idx, want, name) in [((1usize,0usize), &c21, "C21"), ((2,0), &c31, "C31"), ((3,0), &c41, "C41")] {
        let got = &fit.stokes.c[idx];
        let rel = (got.dist(want) / want.abs()).to_f64();
        println!("{name}: rel err = {:.3e}", rel);
    }
    println!("residual={:e} quad={:e}", fit.residual, fit.quad_error);
    // θ = π must give zero
    let t1 = Instant::now();
    let fitpi = stokes_from_jumps(&sys, &Float::with_val(P, -&pi(P)), 40, &rhos).unwrap();
    println!("theta=pi: |C|max = {:e} ({:?})", fitpi.stokes.c.max_abs(), t1.elapsed());
}
