use proptest::prelude::*;

use vardram::dram::{PowerState, Residency};
use vardram::energy::{accrue_background, accrue_event, bank_energy, energy_report, BankActivity, Component, DeviceEnergyProfile, EnergyEvent};

fn residency(ps: [u64; 4]) -> Residency {
    serde_json::from_value(serde_json::json!(ps)).unwrap()
}

fn activity(r: [u64; 4], n: [u64; 8]) -> BankActivity {
    BankActivity {
        residency: residency(r),
        acts: n[0],
        read_bursts: n[1],
        write_bursts: n[2],
        refreshes: n[3],
        copy_acts: n[4],
        copy_read_bursts: n[5],
        copy_write_bursts: n[6],
        transients: n[7],
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn background_matches_hand_computation() {
    let p = DeviceEnergyProfile::default();
    // 1 us precharged with 8 banks sharing 272 mA at 1.2 V: 1.2 * 0.034 W * 1e-6 s
    let (c, nj) = accrue_background(&p, 8, PowerState::ActiveIdle, 1_000_000);
    assert_eq!(c, Component::Background);
    assert!(close(nj, 1.2 * 0.034 * 1e-6 * 1e9));
    let (_, open) = accrue_background(&p, 8, PowerState::RowOpen, 1_000_000);
    assert!(close(open, 1.2 * 0.049 * 1e-6 * 1e9));
    let (_, pd) = accrue_background(&p, 8, PowerState::PoweredDownLp, 1_000_000);
    assert!(close(pd, 1.2 * 0.025 * 1e-6 * 1e9));
    // one second gated: 8.89 nW * 1 s
    let (c, leak) = accrue_background(&p, 8, PowerState::GatedOff, 1_000_000_000_000);
    assert_eq!(c, Component::Overhead);
    assert!(close(leak, 8.89));
}

#[test]
fn events_are_booked_per_component() {
    let p = DeviceEnergyProfile::default();
    assert_eq!(accrue_event(&p, 8, EnergyEvent::ActPre), (Component::ActPre, 5.93));
    assert_eq!(accrue_event(&p, 8, EnergyEvent::ReadBurst), (Component::Burst, 4.85));
    assert_eq!(accrue_event(&p, 8, EnergyEvent::Refresh), (Component::Refresh, 725.8 / 8.0));
    let (c, t) = accrue_event(&p, 8, EnergyEvent::GateTransient);
    assert_eq!(c, Component::Overhead);
    assert!(close(t * 1000.0, 1.2));
}

#[test]
fn controller_power_only_when_active() {
    let p = DeviceEnergyProfile::default();
    let a = vec![activity([1_000_000, 0, 0, 0], [0; 8]); 8];
    let on = energy_report(&p, 8, &a, 1_000_000, true);
    let off = energy_report(&p, 8, &a, 1_000_000, false);
    // 42.84 uW for 1 us
    assert!(close(on.controller_nj, 42.84e-6 * 1e-6 * 1e9));
    assert_eq!(off.controller_nj, 0.0);
    assert!(close(on.total_nj - off.total_nj, on.controller_nj));
}

fn arb_activity() -> impl Strategy<Value = BankActivity> {
    (proptest::array::uniform4(0u64..1 << 40), proptest::array::uniform8(0u64..1 << 20)).prop_map(|(r, n)| activity(r, n))
}

proptest! {
    #[test]
    fn energy_is_linear_in_activity(a in arb_activity(), b in arb_activity()) {
        let p = DeviceEnergyProfile::default();
        let ea = bank_energy(&p, 8, &a);
        let eb = bank_energy(&p, 8, &b);
        let sum = activity(
            std::array::from_fn(|i| a.residency.get(PowerState::ALL[i]) + b.residency.get(PowerState::ALL[i])),
            [
                a.acts + b.acts,
                a.read_bursts + b.read_bursts,
                a.write_bursts + b.write_bursts,
                a.refreshes + b.refreshes,
                a.copy_acts + b.copy_acts,
                a.copy_read_bursts + b.copy_read_bursts,
                a.copy_write_bursts + b.copy_write_bursts,
                a.transients + b.transients,
            ],
        );
        let es = bank_energy(&p, 8, &sum);
        for ((name, x), ((_, y), (_, z))) in es.components().iter().zip(ea.components().iter().zip(eb.components().iter())) {
            prop_assert!(close(*x, y + z), "{name}: {x} vs {y} + {z}");
            prop_assert!(*x >= 0.0);
        }
    }

    #[test]
    fn report_totals_reconcile(acts in proptest::collection::vec(arb_activity(), 1..16), span in 0u64..1 << 40, on in any::<bool>()) {
        let p = DeviceEnergyProfile::default();
        let r = energy_report(&p, 8, &acts, span, on);
        let per_bank: f64 = r.per_bank.iter().map(|e| e.total()).sum();
        prop_assert!(close(r.total_nj, per_bank + r.controller_nj));
        prop_assert!(close(r.components.total(), per_bank));
        let g: u64 = acts.iter().map(|a| a.transients).sum();
        prop_assert_eq!(r.gate_transient_events, g);
        prop_assert_eq!(r.gate_transient_pj, g as f64 * 1.2);
        let gated: u64 = acts.iter().map(|a| a.residency.get(PowerState::GatedOff)).sum();
        prop_assert!(close(r.gated_leakage_nj, 8.89 * gated as f64 * 1e-12));
    }
}
