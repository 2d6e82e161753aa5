//! Linear weakly-compressible equation of state.

use crate::real::Real;

/// `p = c0² (ρ − ρ0)`.
#[inline(always)]
pub fn eos_pressure<R: Real>(rho: R, rho0: R, c0: R) -> R {
    c0 * c0 * (rho - rho0)
}

/// Inverse of [`eos_pressure`].
#[inline(always)]
pub fn eos_density<R: Real>(p: R, rho0: R, c0: R) -> R {
    rho0 + p / (c0 * c0)
}

/// Specific compressive energy `∫ p/ρ² dρ`, zero at the reference state.
pub fn compressive_energy(rho: f64, rho0: f64, c0: f64) -> f64 {
    c0 * c0 * ((rho / rho0).ln() + rho0 / rho - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_state_has_zero_pressure() {
        assert_eq!(eos_pressure(1000.0f64, 1000.0, 20.0), 0.0);
        assert_eq!(eos_pressure(1000.0f32, 1000.0, 20.0), 0.0);
    }

    #[test]
    fn linear_values() {
        assert_eq!(eos_pressure(1010.0f64, 1000.0, 20.0), 4000.0);
        assert_eq!(eos_density(4000.0f64, 1000.0, 20.0), 1010.0);
        assert_eq!(eos_density(0.0f64, 1000.0, 20.0), 1000.0);
    }

    #[test]
    fn monotone_in_density() {
        let mut last = f64::NEG_INFINITY;
        for k in 0..100 {
            let p = eos_pressure(950.0 + k as f64, 1000.0, 35.0);
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn energy_is_minimal_at_rest_density() {
        assert_eq!(compressive_energy(1000.0, 1000.0, 30.0), 0.0);
        assert!(compressive_energy(1001.0, 1000.0, 30.0) > 0.0);
        assert!(compressive_energy(999.0, 1000.0, 30.0) > 0.0);
        // dE/dρ = p/ρ²
        let (rho, eps) = (1003.0, 1e-4);
        let fd = (compressive_energy(rho + eps, 1000.0, 30.0) - compressive_energy(rho - eps, 1000.0, 30.0)) / (2.0 * eps);
        let p: f64 = eos_pressure(rho, 1000.0, 30.0);
        assert!((fd - p / (rho * rho)).abs() < 1e-6);
    }
}
