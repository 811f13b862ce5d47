//! Scalar special functions used by the response and activation code.
//!
//! `erfcx` follows W. J. Cody's rational Chebyshev approximations
//! (ACM TOMS 1969 / SPECFUN `CALERF`), which evaluate `exp(x²)·erfc(x)`
//! directly for x > 0.46875 without forming `exp(x²)`.

const SQRT_PI: f64 = 1.772_453_850_905_516;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

const THRESHOLD: f64 = 0.46875;
/// Below this argument `erfcx` overflows f64.
const XNEG: f64 = -26.628_735_713_751_4;

const C: [f64; 9] = [
    5.641_884_969_886_701e-1,
    8.883_149_794_388_376,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822,
    1.872_952_849_923_460_4,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_8e-3,
];

fn cody_mid(y: f64) -> f64 {
    let mut num = C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + C[i]) * y;
        den = (den + D[i]) * y;
    }
    (num + C[7]) / (den + D[7])
}

fn cody_tail(y: f64) -> f64 {
    let z = 1.0 / (y * y);
    let mut num = P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + P[i]) * z;
        den = (den + Q[i]) * z;
    }
    let r = z * (num + P[4]) / (den + Q[4]);
    (FRAC_1_SQRT_PI - r) / y
}

/// `exp(x²)·erfc(x)` without overflow for large positive `x`.
///
/// Returns `+inf` for `x < -26.63`, where the true value exceeds `f64::MAX`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= THRESHOLD {
        return libm::exp(x * x) * libm::erfc(x);
    }
    if x < XNEG {
        return f64::INFINITY;
    }
    let scaled = if y <= 4.0 { cody_mid(y) } else { cody_tail(y) };
    if x > 0.0 {
        scaled
    } else {
        // erfcx(-y) = 2 exp(y²) - erfcx(y)
        2.0 * exp_square(y) - scaled
    }
}

/// `exp(x²)` split so the rounding error of `x²` is not amplified.
fn exp_square(x: f64) -> f64 {
    let head = libm::trunc(x * 16.0) / 16.0;
    libm::exp(head * head) * libm::exp((x - head) * (x + head))
}

/// Integrand of the Siegert first-passage integral, `√π·exp(u²)·(1 + erf u)`.
#[inline]
pub fn siegert_integrand(u: f64) -> f64 {
    SQRT_PI * erfcx(-u)
}

/// `ln(1 + e^z)` evaluated as `max(z, 0) + ln(1 + e^{-|z|})`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

/// Logistic function `1 / (1 + e^{-z})`, stable for either sign of `z`.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from mpmath at 50 digits: exp(x^2)*erfc(x).
    const ERFCX_REF: [(f64, f64); 10] = [
        (-3.0, 16205.988853999587),
        (-1.0, 5.0089800807622835),
        (-0.3, 1.4537492328427656),
        (0.0, 1.0),
        (0.2, 0.80901951990158073),
        (0.5, 0.61569034419292587),
        (2.0, 0.25539567631050574),
        (4.5, 0.12248480427384142),
        (10.0, 0.056140992743822586),
        (100.0, 0.0056416137829894329),
    ];

    #[test]
    fn erfcx_matches_reference() {
        for &(x, want) in ERFCX_REF.iter() {
            let got = erfcx(x);
            assert!(((got - want) / want).abs() < 1e-13, "erfcx({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn erfcx_overflow_is_infinite() {
        assert_eq!(erfcx(-30.0), f64::INFINITY);
        assert!(erfcx(1e300) > 0.0);
    }

    #[test]
    fn softplus_is_overflow_safe() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-16);
    }

    #[test]
    fn logistic_symmetry() {
        for z in [-40.0, -3.0, -0.1, 0.0, 0.7, 12.0] {
            assert!((logistic(z) + logistic(-z) - 1.0).abs() < 1e-15);
        }
    }
}
