//! Benchmark fixtures shared by the criterion targets in `benches/`.

use optomech::model::{self, DriveModulation, PhaseMode, SystemParams};

/// Reference parameters driven at `ratio` of the instability threshold.
pub fn reference_drive(ratio: f64) -> (SystemParams, f64) {
    let p = SystemParams::reference();
    let th = model::threshold_amplitude(&p).expect("reference parameters have a threshold");
    (p, ratio * th)
}

/// Cosine-modulated drive at `mod_ratio` times the parametric frequency.
pub fn modulated_drive(ratio: f64, alpha: f64, mod_ratio: f64) -> (SystemParams, DriveModulation) {
    let (p, amp0) = reference_drive(ratio);
    let wp = model::parametric_frequency(&p, amp0).expect("strong coupling below threshold");
    (p, DriveModulation::modulated(amp0, alpha, mod_ratio * wp, PhaseMode::Cos))
}
