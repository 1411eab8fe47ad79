use crate::error::{Error, Result};

/// Scalings wrapping the raw network:
/// `D(x; sigma) = c_skip * x + c_out * F(c_in * x; c_noise)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub c_skip: f64,
    pub c_out: f64,
    pub c_in: f64,
    pub c_noise: f64,
}

/// Coefficients that keep the network's input and training target at unit
/// variance when the clean data has standard deviation `sigma_data`.
pub fn precondition_coefficients(sigma: f64, sigma_data: f64) -> Result<Coefficients> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be positive, got {sigma}")));
    }
    if !(sigma_data > 0.0) || !sigma_data.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma_data must be positive, got {sigma_data}"
        )));
    }
    let total = sigma * sigma + sigma_data * sigma_data;
    let root = total.sqrt();
    Ok(Coefficients {
        c_skip: sigma_data * sigma_data / total,
        c_out: sigma * sigma_data / root,
        c_in: 1.0 / root,
        c_noise: 0.25 * sigma.ln(),
    })
}

/// Noise embedding fed to the network, shared by both wrapper modes.
pub fn noise_embedding(sigma: f64) -> f64 {
    0.25 * sigma.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sigma_has_zero_embedding() {
        for sd in [0.1, 0.5, 3.0] {
            assert_eq!(precondition_coefficients(1.0, sd).unwrap().c_noise, 0.0);
        }
    }

    #[test]
    fn equal_sigma_halves_skip() {
        for s in [0.01, 0.5, 42.0] {
            assert!((precondition_coefficients(s, s).unwrap().c_skip - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    #[allow(clippy::approx_constant, clippy::excessive_precision)]
    fn reference_values_at_half() {
        // 50-digit mpmath evaluation of the four formulas at sigma = sigma_data = 0.5
        let c = precondition_coefficients(0.5, 0.5).unwrap();
        assert!((c.c_skip - 0.5).abs() < 1e-15);
        assert!((c.c_out - 0.353_553_390_593_273_76).abs() < 1e-15);
        assert!((c.c_in - 1.414_213_562_373_095_1).abs() < 1e-15);
        assert!((c.c_noise - -0.173_286_795_139_986_33).abs() < 1e-15);
    }

    #[test]
    fn small_sigma_limit_is_identity() {
        let c = precondition_coefficients(1e-9, 0.5).unwrap();
        assert!((c.c_skip - 1.0).abs() < 1e-15);
        assert!(c.c_out < 1e-8);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(precondition_coefficients(0.0, 0.5).is_err());
        assert!(precondition_coefficients(-1.0, 0.5).is_err());
        assert!(precondition_coefficients(1.0, 0.0).is_err());
        assert!(precondition_coefficients(f64::NAN, 0.5).is_err());
    }
}
