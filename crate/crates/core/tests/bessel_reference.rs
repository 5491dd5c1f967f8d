//! Accuracy of the Bessel routines against 40-digit reference values
//! (see `data/gen_bessel_reference.py`).

use hypercubic_green::bessel::{
    bessel_i0, bessel_i0_scaled, bessel_k0, bessel_k0_scaled, bessel_scaled,
};
use std::f64::consts::FRAC_2_PI;

struct Row {
    tau: f64,
    k0: f64,
    i0: f64,
    k0e: f64,
    i0e: f64,
}

fn reference() -> Vec<Row> {
    include_str!("data/bessel_reference.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|s| s.parse().unwrap()).collect();
            Row { tau: v[0], k0: v[1], i0: v[2], k0e: v[3], i0e: v[4] }
        })
        .collect()
}

fn rel_eps(got: f64, want: f64) -> f64 {
    (got - want).abs() / (want.abs() * f64::EPSILON)
}

#[test]
fn k0_and_i0_within_four_epsilon() {
    let mut worst_k = (0.0_f64, 0.0_f64);
    let mut worst_i = (0.0_f64, 0.0_f64);
    for r in reference() {
        if r.k0 > f64::MIN_POSITIVE {
            let e = rel_eps(bessel_k0(r.tau).unwrap(), r.k0);
            if e > worst_k.0 {
                worst_k = (e, r.tau);
            }
        }
        let e = rel_eps(bessel_i0(r.tau).unwrap(), r.i0);
        if e > worst_i.0 {
            worst_i = (e, r.tau);
        }
    }
    println!("worst K0: {:.2} eps at {}; worst I0: {:.2} eps at {}", worst_k.0, worst_k.1, worst_i.0, worst_i.1);
    assert!(worst_k.0 <= 4.0);
    assert!(worst_i.0 <= 4.0);
}

#[test]
fn scaled_forms_within_eight_epsilon() {
    let mut worst = 0.0_f64;
    for r in reference() {
        let p = bessel_scaled(r.tau).unwrap();
        worst = worst
            .max(rel_eps(p.kbar, FRAC_2_PI * r.k0e))
            .max(rel_eps(p.ibar, 2.0 * r.i0e))
            .max(rel_eps(bessel_k0_scaled(r.tau).unwrap(), r.k0e))
            .max(rel_eps(bessel_i0_scaled(r.tau).unwrap(), r.i0e));
    }
    println!("worst scaled: {worst:.2} eps");
    assert!(worst <= 8.0);
}

#[test]
fn scaled_and_plain_agree_where_representable() {
    for r in reference() {
        let k0 = bessel_k0(r.tau).unwrap();
        if k0 < 1e-300 {
            continue;
        }
        let p = bessel_scaled(r.tau).unwrap();
        let from_scaled = p.kbar * (-r.tau).exp();
        assert!((from_scaled - FRAC_2_PI * k0).abs() <= 1e-13 * FRAC_2_PI * k0, "tau = {}", r.tau);
    }
}
