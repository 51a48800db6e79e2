//! End-to-end gradient verification: every parameter tensor of a
//! miniature network against central finite differences of the
//! deep-supervision loss.

use std::time::{Duration, Instant};

use lgir_net::gradcheck::{check_model, GradCheckSettings};
use lgir_net::LgnetConfig;

#[test]
fn every_parameter_gradient_matches_finite_differences() {
    let config = LgnetConfig {
        in_channels: 1,
        stage_channels: [4, 4, 8, 8, 8],
        ublock_heights: [3, 3, 2, 2, 2],
        descriptor_dim: 8,
        input_size: (16, 16),
        seed: 7,
    };
    let settings = GradCheckSettings::default();

    let start = Instant::now();
    let report = check_model(&config, &settings).unwrap();
    let elapsed = start.elapsed();

    assert!(
        report.failures.is_empty(),
        "{} of {} probes off (worst {:.3e} at {}):\n{}",
        report.failures.len(),
        report.probes,
        report.worst,
        report.worst_at,
        report.failures.join("\n")
    );
    assert!(report.worst <= settings.tolerance);
    assert!(
        report.tensors > 200 && report.probes > 1000,
        "sweep unexpectedly small: {} tensors, {} probes",
        report.tensors,
        report.probes
    );
    assert!(
        elapsed < Duration::from_secs(120),
        "gradient sweep took {elapsed:?}, over the two-minute budget"
    );
    println!(
        "checked {} tensors / {} probes in {elapsed:?}; worst relative error {:.3e} at {}",
        report.tensors, report.probes, report.worst, report.worst_at
    );
}
