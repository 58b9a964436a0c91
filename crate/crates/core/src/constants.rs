//! Physical constants (2019 SI exact values).

/// Elementary charge [C].
pub const E_CHARGE: f64 = 1.602_176_634e-19;

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380_649e-23;
