//! Special functions: accurate binomial and Poisson point masses and tails,
//! Euler–Maclaurin zeta tails, the exponential integral, and the helpers
//! `phi` and `c_ls` used by the concentration bounds.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln n! - [(n + 1/2) ln n - n + ln(2π)/2]` for integers `1..=15`.
const STIRLERR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_26,
    0.041_340_695_955_409_3,
    0.027_677_925_684_998_34,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_77,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_87,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_53,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// Error of Stirling's approximation to `ln n!`.
pub fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 && n.fract() == 0.0 {
        return STIRLERR_SMALL[n as usize];
    }
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - 0.5 * LN_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/m) + m - x`, evaluated without cancellation.
pub fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `P{Bin(n, p) = x}` with relative accuracy close to machine precision.
pub fn dbinom(x: u64, n: u64, p: f64) -> f64 {
    if x > n {
        return 0.0;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x == 0 {
        return (nf * (-p).ln_1p()).exp();
    }
    if x == n {
        return (nf * p.ln()).exp();
    }
    let xf = x as f64;
    let lc = stirlerr(nf) - stirlerr(xf) - stirlerr(nf - xf) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = LN_2PI + xf.ln() + (-xf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `P{Pois(lambda) = x}` with relative accuracy close to machine precision.
pub fn dpois(x: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    if x == 0 {
        return (-lambda).exp();
    }
    let xf = x as f64;
    (-stirlerr(xf) - bd0(xf, lambda)).exp() / (2.0 * PI * xf).sqrt()
}

/// `P{Pois(lambda) >= r}`.
pub fn poisson_tail_ge(r: u64, lambda: f64) -> f64 {
    if r == 0 {
        return 1.0;
    }
    if lambda == 0.0 {
        return 0.0;
    }
    if r == 1 {
        return -(-lambda).exp_m1();
    }
    let rf = r as f64;
    if lambda < rf {
        let mut term = dpois(r, lambda);
        let mut sum = term;
        let mut k = rf;
        while term > sum * 1e-18 {
            k += 1.0;
            term *= lambda / k;
            sum += term;
        }
        sum
    } else {
        let mut term = dpois(r - 1, lambda);
        let mut sum = term;
        let mut k = rf - 1.0;
        while k > 0.0 && term > sum * 1e-18 {
            term *= k / lambda;
            k -= 1.0;
            sum += term;
        }
        (1.0 - sum).max(0.0)
    }
}

/// `P{Bin(n, p) >= r}`.
pub fn binomial_tail_ge(r: u64, n: u64, p: f64) -> f64 {
    if r == 0 {
        return 1.0;
    }
    if r > n || p == 0.0 {
        return 0.0;
    }
    if r == 1 {
        return -((n as f64) * (-p).ln_1p()).exp_m1();
    }
    let q = 1.0 - p;
    let odds = p / q;
    let rf = r as f64;
    let nf = n as f64;
    if nf * p < rf {
        let mut term = dbinom(r, n, p);
        let mut sum = term;
        let mut k = rf;
        while k < nf && term > sum * 1e-18 {
            term *= (nf - k) / (k + 1.0) * odds;
            k += 1.0;
            sum += term;
        }
        sum
    } else {
        let mut term = dbinom(r - 1, n, p);
        let mut sum = term;
        let mut k = rf - 1.0;
        while k > 0.0 && term > sum * 1e-18 {
            term *= k / (nf - k + 1.0) / odds;
            k -= 1.0;
            sum += term;
        }
        (1.0 - sum).max(0.0)
    }
}

/// Bernoulli numbers `B_2, B_4, ..., B_14`.
const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// `Σ_{k >= a} k^{-s}` for `s > 1`, `a >= 1`.
pub fn hurwitz_zeta_int(s: f64, a: u64) -> f64 {
    let start = 20 + 2 * (s.ceil() as u64);
    let mut head = 0.0;
    let mut k = a;
    while k < start {
        head += (k as f64).powf(-s);
        k += 1;
    }
    let nf = k as f64;
    let mut tail = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = nf.powf(-s - 1.0);
    for (i, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * power;
        tail += term;
        let m = 2 * i as u64 + 1;
        rising *= (s + m as f64) * (s + m as f64 + 1.0);
        fact *= ((m + 2) * (m + 3)) as f64;
        power /= nf * nf;
        if term.abs() < tail.abs() * 1e-18 {
            break;
        }
    }
    head + tail
}

/// Riemann zeta function for `s > 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_zeta_int(s, 1)
}

/// Exponential integral `E_1(x)` for `x > 0`.
pub fn expint_e1(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        -EULER - x.ln() + sum
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Generalized exponential integral `E_2(x) = e^{-x} - x E_1(x)` for `x > 0`.
pub fn expint_e2(x: f64) -> f64 {
    (-x).exp() - x * expint_e1(x)
}

/// `φ(λ) = e^λ - λ - 1`.
pub fn phi(lambda: f64) -> f64 {
    if lambda.abs() < 1e-2 {
        let mut term = lambda * lambda / 2.0;
        let mut sum = term;
        for k in 3..12 {
            term *= lambda / f64::from(k);
            sum += term;
        }
        sum
    } else {
        lambda.exp_m1() - lambda
    }
}

/// Optimal logarithmic Sobolev constant of a Bernoulli(`y`) variable,
/// `ln((1-y)/y) / (1-2y)`, given both `y` and `1 - y` to full precision.
pub fn c_ls(y: f64, one_minus_y: f64) -> f64 {
    let z = one_minus_y - y;
    if z.abs() < 1e-4 {
        let z2 = z * z;
        2.0 * (1.0 + z2 / 3.0 + z2 * z2 / 5.0 + z2 * z2 * z2 / 7.0)
    } else {
        (one_minus_y.ln() - y.ln()) / z
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
