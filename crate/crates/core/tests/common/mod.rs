#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Composite Simpson rule with `intervals` (even) subintervals.
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, intervals: usize) -> Complex64 {
    assert!(intervals % 2 == 0);
    let h = (b - a) / intervals as f64;
    let mut odd = Complex64::new(0.0, 0.0);
    let mut even = Complex64::new(0.0, 0.0);
    for i in 1..intervals {
        let v = f(a + h * i as f64);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    (f(a) + f(b) + odd * 4.0 + even * 2.0) * (h / 3.0)
}

/// Random oscillatory test problem: polynomial phase of degree <= 4 and a
/// smooth complex amplitude.
#[derive(Clone, Debug)]
pub struct Problem {
    pub phase: Vec<f64>,
    pub amp: [Complex64; 3],
    pub decay: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

impl Problem {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let degree = rng.gen_range(1..=4);
        let phase = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let amp = [c(), c(), c()];
        let decay = rng.gen_range(0.0..2.0);
        let a = rng.gen_range(-1.0..0.0);
        let b = rng.gen_range(0.2..1.5);
        let lambda = rng.gen_range(0.0..200.0);
        Self { phase, amp, decay, a, b, lambda }
    }

    pub fn phase(&self, t: f64) -> f64 {
        self.phase.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn amplitude(&self, t: f64) -> Complex64 {
        (self.amp[0] + self.amp[1] * t + self.amp[2] * t * t) * (-self.decay * t * t).exp()
    }

    pub fn integrand(&self, t: f64) -> Complex64 {
        Complex64::cis(self.lambda * self.phase(t)) * self.amplitude(t)
    }
}
