//! Small float helpers shared across modules.
//!
//! Transcendentals go through `libm` unconditionally so that results are
//! identical with and without the `std` feature.

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + exp(-z))
}

/// log(sigmoid(z)) computed without overflow for large |z|.
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -ln(1.0 + exp(-z))
    } else {
        z - ln(1.0 + exp(z))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    sqrt(dot(v, v))
}

/// Scale `v` to unit L2 norm; zero vectors are left unchanged.
pub(crate) fn normalize(v: &mut [f64]) {
    let n = l2_norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Two-sided tail probability of the standard normal, 2(1 - Phi(|z|)).
pub(crate) fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / core::f64::consts::SQRT_2)
}
