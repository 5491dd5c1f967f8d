//! The rearranged K/I integrand against the Hankel-function form it was
//! derived from, evaluated at 50 digits (see `data/gen_hankel_reference.py`).

use hypercubic_green::integrand::{build_integrand, eval_integrand};
use num_complex::Complex64;

#[test]
fn matches_hankel_form() {
    let mut worst = (0.0f64, String::new());
    let mut rows = 0;
    for line in include_str!("data/hankel_reference.txt").lines().filter(|l| !l.starts_with('#')) {
        let v: Vec<&str> = line.split_whitespace().collect();
        let d: u32 = v[0].parse().unwrap();
        let (w, tau): (f64, f64) = (v[1].parse().unwrap(), v[2].parse().unwrap());
        let want = Complex64::new(v[3].parse().unwrap(), v[4].parse().unwrap());
        let got = eval_integrand(&build_integrand(d, w).unwrap(), tau);
        let rel = (got - want).norm() / want.norm();
        if rel > worst.0 {
            worst = (rel, format!("d={d} ω={w} τ={tau}: {got} vs {want}"));
        }
        rows += 1;
    }
    assert!(rows > 1000);
    assert!(worst.0 <= 1e-12, "worst {:.3e} at {}", worst.0, worst.1);
}
