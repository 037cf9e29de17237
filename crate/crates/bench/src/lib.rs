//! Fixtures shared by the criterion benchmarks.

use pointstab::closed_loop::{build_model, resolve_sign};
use pointstab::gramian::{assemble_gramian, block_inverse};
use pointstab::{AdjointMode, ClosedLoop, GramianSpec, SystemConfig};

/// Reference configuration with `n` modes per field.
pub fn reference(n: usize) -> SystemConfig {
    SystemConfig::reference(n)
}

pub fn weight(omega: f64) -> GramianSpec {
    GramianSpec::pure_exponential(omega).expect("positive omega")
}

/// Stabilized closed loop for the reference configuration.
pub fn closed_loop(n: usize, omega: f64) -> ClosedLoop {
    let cfg = reference(n);
    let g = assemble_gramian(&cfg, &weight(omega), AdjointMode::Coupled).expect("gramian");
    let model = build_model(&cfg);
    let (fb, _) = resolve_sign(&model, &block_inverse(&g).expect("invertible")).expect("spectrum");
    ClosedLoop::from_feedback(&model, &fb).expect("closed loop")
}
