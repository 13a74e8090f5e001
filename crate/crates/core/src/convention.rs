//! Fourier-convention constants, collected in one place.
//!
//! * Analog transform: `F[f](ω) = (1/2π) ∫ e^{-iωt} f(t) dt`. Ground-truth
//!   spectra and every closed-form kernel transform use this convention.
//! * Discrete coefficients: `X(ω_j) = Σ_k w[k] y[k] e^{-iω_j t_k}` with no
//!   prefactor. The taper `w` carries the normalization (unit energy).
//! * Frequencies are angular (rad per time unit) everywhere.
//!
//! For a sampled, tapered, stationary process with spectral density `S`
//! (analog convention) and sample step `δt`, the expected periodogram is
//! approximately `(2π/δt)·S(ω) + λ`, where `λ` is the white-noise variance.

use std::f64::consts::PI;

/// Prefactor of the analog forward transform.
pub const ANALOG_FORWARD: f64 = 1.0 / (2.0 * PI);

/// `(1/2π) ∫ e^{-iωt} e^{-(t-c)²/(2s²)} dt = GAUSSIAN_FT · s · e^{-s²ω²/2} e^{-iωc}`.
pub const GAUSSIAN_FT: f64 = 0.398_942_280_401_432_7; // 1/sqrt(2π)

/// `∫ e^{iξτ} e^{-(ξ-ξ₀)²/(2σ²)} dξ = INVERSE_SE · σ · e^{-σ²τ²/2} e^{iξ₀τ}`.
pub const INVERSE_SE: f64 = 2.506_628_274_631_000_2; // sqrt(2π)

/// Factor converting a periodogram-unit spectral density (unit-energy taper,
/// step `dt`) into a time-domain covariance amplitude:
/// `K(τ) = periodogram_to_covariance(dt) · σ e^{-σ²τ²/2} Σ_j e^{h_j} cos(ξ_j τ)`.
pub fn periodogram_to_covariance(dt: f64) -> f64 {
    dt / (2.0 * PI) * INVERSE_SE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_match_closed_forms() {
        assert!((GAUSSIAN_FT - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
        assert!((INVERSE_SE - (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((ANALOG_FORWARD * INVERSE_SE - GAUSSIAN_FT).abs() < 1e-16);
    }
}
