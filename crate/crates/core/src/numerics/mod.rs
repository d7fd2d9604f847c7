pub mod bessel;
pub mod ode;
pub mod quad;
