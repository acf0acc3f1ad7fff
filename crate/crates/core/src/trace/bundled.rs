use super::{SyntheticKind, SyntheticParams};

/// Recipe of one trace shipped in `crates/core/traces/`. All are generated
/// for the default geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct BundledTrace {
    /// File name under `traces/`.
    pub file: &'static str,
    pub kind: SyntheticKind,
    pub seed: u64,
    pub params: SyntheticParams,
}

impl BundledTrace {
    /// True when the trace deliberately forces collisions.
    pub fn forces_collisions(&self) -> bool {
        self.kind == SyntheticKind::CollisionStress
    }
}

/// The bundled traces. The collision-stress pair is the first pair the
/// default configuration classifies (victim bank 4, target bank 0).
pub fn bundled_traces() -> Vec<BundledTrace> {
    let base = SyntheticParams::default();
    vec![
        BundledTrace {
            file: "uniform.trace.gz",
            kind: SyntheticKind::Uniform,
            seed: 1,
            params: SyntheticParams {
                requests: 10_000,
                mean_gap_cycles: 200,
                ..base.clone()
            },
        },
        BundledTrace {
            file: "hotspot.trace.gz",
            kind: SyntheticKind::Hotspot,
            seed: 2,
            params: SyntheticParams {
                requests: 10_000,
                mean_gap_cycles: 200,
                hotspot_banks: 4,
                hotspot_rows: 64,
                ..base.clone()
            },
        },
        BundledTrace {
            file: "idle_heavy_a.trace.gz",
            kind: SyntheticKind::IdleHeavy,
            seed: 3,
            params: SyntheticParams {
                requests: 8_000,
                burst_length: 32,
                burst_gap_cycles: 8,
                idle_gap_cycles: 20_000,
                ..base.clone()
            },
        },
        BundledTrace {
            file: "idle_heavy_b.trace.gz",
            kind: SyntheticKind::IdleHeavy,
            seed: 4,
            params: SyntheticParams {
                requests: 4_000,
                burst_length: 16,
                burst_gap_cycles: 4,
                idle_gap_cycles: 50_000,
                write_fraction: 0.5,
                ..base.clone()
            },
        },
        BundledTrace {
            file: "collision_stress.trace.gz",
            kind: SyntheticKind::CollisionStress,
            seed: 5,
            params: SyntheticParams {
                requests: 2_000,
                mean_gap_cycles: 100,
                victim_bank: Some(4),
                target_bank: Some(0),
                overlap_fraction: 1.0,
                ..base
            },
        },
    ]
}
