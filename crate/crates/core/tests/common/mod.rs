#![allow(dead_code)]
//! Test-only helpers: a big-integer fixed-point oracle for the certificate
//! formulas and small builders shared by the integration tests.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

/// Fractional bits of the fixed-point representation.
const FRAC_BITS: u32 = 320;

/// A real number `n / 2^FRAC_BITS` with `n` an arbitrary-size integer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fixed(BigInt);

impl Fixed {
    /// Exact conversion of a finite `f64` (subnormal-scale inputs aside).
    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite());
        if v == 0.0 {
            return Fixed(BigInt::zero());
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let mantissa = if exp == 0 {
            (bits & 0xf_ffff_ffff_ffff) << 1
        } else {
            (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
        };
        // v = mantissa · 2^(exp − 1075)
        let shift = exp - 1075 + FRAC_BITS as i64;
        let m = BigInt::from(mantissa) * sign;
        if shift >= 0 {
            Fixed(m << shift as u32)
        } else {
            Fixed(m >> (-shift) as u32)
        }
    }

    pub fn int(v: i64) -> Self {
        Fixed(BigInt::from(v) << FRAC_BITS)
    }

    pub fn sqrt(&self) -> Self {
        assert!(!self.0.is_negative(), "sqrt of negative");
        Fixed((&self.0 << FRAC_BITS).sqrt())
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn to_f64(&self) -> f64 {
        // keep the 64 leading bits, then rescale by a power of two
        let shift = (self.0.bits() as i64 - 64).max(0);
        let top = &self.0 >> shift as u32;
        top.to_f64().expect("finite") * 2f64.powi((shift - FRAC_BITS as i64) as i32)
    }
}

impl Add for &Fixed {
    type Output = Fixed;
    fn add(self, r: &Fixed) -> Fixed {
        Fixed(&self.0 + &r.0)
    }
}

impl Sub for &Fixed {
    type Output = Fixed;
    fn sub(self, r: &Fixed) -> Fixed {
        Fixed(&self.0 - &r.0)
    }
}

impl Mul for &Fixed {
    type Output = Fixed;
    fn mul(self, r: &Fixed) -> Fixed {
        Fixed((&self.0 * &r.0) >> FRAC_BITS)
    }
}

impl Div for &Fixed {
    type Output = Fixed;
    fn div(self, r: &Fixed) -> Fixed {
        Fixed((&self.0 << FRAC_BITS) / &r.0)
    }
}

impl Neg for &Fixed {
    type Output = Fixed;
    fn neg(self) -> Fixed {
        Fixed(-&self.0)
    }
}

/// Certificate quantities evaluated with the textbook formulas in
/// high-precision fixed point.
#[derive(Debug, Clone)]
pub struct ExactCertificate {
    pub radicand: f64,
    pub theta: f64,
    pub mu: f64,
    pub lambda_rate: f64,
    pub rate_r: f64,
    pub noor: f64,
    pub nesterov: f64,
    /// `((1+θ)(1+λL) + 1)² < 4 − l² + 2l`, decided exactly.
    pub discrete_ok: bool,
    /// `(1+θ)²(1+λL)² < 2μ`, decided exactly.
    pub mu_form_ok: bool,
}

pub fn exact_certificate(lipschitz: f64, rho: f64, l: f64, lambda: f64) -> ExactCertificate {
    let one = Fixed::int(1);
    let two = Fixed::int(2);
    let half = &one / &two;
    let (lo, rh, ll, la) = (
        Fixed::from_f64(lipschitz),
        Fixed::from_f64(rho),
        Fixed::from_f64(l),
        Fixed::from_f64(lambda),
    );
    // 1 − 2λρ + λ²L²
    let rad = &(&one - &(&two * &(&la * &rh))) + &(&(&la * &la) * &(&lo * &lo));
    let theta = &ll + &rad.sqrt();
    let lam_l = &la * &lo;
    let product = &(&one + &theta) * &(&one + &lam_l);
    let mu = &(&(&(&(&half - &(&half * &(&ll * &ll))) - &theta) + &ll) - &lam_l) - &(&lam_l * &theta);
    let rate = &(&one - &(&two * &mu)) + &(&product * &product);
    let gamma = &lo / &rh;
    let noor = &one / &(&gamma * &(&gamma + &(&(&gamma * &gamma) - &one).sqrt()));
    let nesterov = &one / &gamma;
    let delta = &(&Fixed::int(4) - &(&ll * &ll)) + &(&two * &ll);
    let lhs = &(&product + &one) * &(&product + &one);
    ExactCertificate {
        radicand: rad.to_f64(),
        theta: theta.to_f64(),
        mu: mu.to_f64(),
        lambda_rate: (&product - &two).to_f64(),
        rate_r: rate.to_f64(),
        noor: noor.to_f64(),
        nesterov: nesterov.to_f64(),
        discrete_ok: lhs < delta,
        mu_form_ok: &product * &product < &two * &mu,
    }
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs()
    }
}

/// Seeded constant tuples `(L, ρ, l, λ)` with `ρ ≤ L`, `l ∈ [0, 3]` and
/// `λ ∈ (0, 3/L]`.
pub fn constant_tuples(seed: u64, count: usize) -> Vec<(f64, f64, f64, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let lipschitz = 10f64.powf(rng.random_range(-1.0..1.0));
            let rho = lipschitz * (1.0 - rng.random::<f64>());
            let l = 3.0 * rng.random::<f64>();
            let lambda = 3.0 / lipschitz * (1.0 - rng.random::<f64>());
            (lipschitz, rho, l, lambda)
        })
        .collect()
}
