use std::path::Path;

use proptest::prelude::*;

use mrc_core::cli::{load_scenario, save_scenario};
use mrc_core::sim::{run_episode, EpisodeTrace, Policy, Scenario, Termination};

fn table1() -> Scenario {
    load_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/table1.json")).unwrap()
}

fn check_invariants(t: &EpisodeTrace) {
    let k = t.realization.slaves.len();
    assert_eq!(t.rows.len(), t.tasks_completed * (k + 1));
    for robot in 0..=k {
        let mut last = if robot == 0 { t.realization.master.initial_energy } else { t.realization.slaves[robot - 1].initial_energy };
        let mut was_active = true;
        for r in t.robot_rows(robot) {
            assert!(r.e_remaining <= last, "robot {robot} reserve rose at task {}", r.task);
            assert!(r.e_total >= 0.0);
            if robot > 0 {
                // inactive robots are never scheduled, and stay off
                if !r.active {
                    assert_eq!(r.e_total, 0.0);
                    assert_eq!(r.bits, 0.0);
                }
                assert!(was_active || !r.active);
                was_active = r.active;
            }
            let parts = r.e_sensing + r.e_compute + r.e_transmit + r.e_circuit;
            assert!((parts - r.e_total).abs() <= 1e-12 * r.e_total.max(1.0));
            last = r.e_remaining;
        }
    }
    for task in 1..=t.tasks_completed {
        let bits: f64 = t.rows.iter().filter(|r| r.task == task && r.robot_id > 0).map(|r| r.bits).sum();
        assert!((bits - 5e6).abs() <= 1e-6, "task {task} collected {bits}");
    }
    for (k, spent) in t.slave_totals().iter().enumerate() {
        let drop = t.realization.slaves[k].initial_energy - t.final_state.reserves[k];
        assert!((drop - spent).abs() <= 1e-12);
    }
}

#[test]
fn bundled_scenario_round_trips_through_a_file() {
    let s = table1();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("copy.json");
    save_scenario(&s, &p).unwrap();
    assert_eq!(load_scenario(&p).unwrap(), s);
}

#[test]
fn min_max_policy_drains_the_small_battery_first() {
    let t = run_episode(&table1(), Policy::Op).unwrap();
    check_invariants(&t);
    let sr3 = t.first_deactivation[2].expect("SR3 runs out");
    assert!(t.first_deactivation[0].is_none_or(|d| d > sr3));
    // after SR3 leaves, the two remaining slaves carry every task
    let after: Vec<_> = t.rows.iter().filter(|r| r.task == sr3 + 1 && r.robot_id > 0).collect();
    assert!(!after.is_empty());
    assert!(!after[2].active);
    assert!(after[0].bits > 0.0 && after[1].bits > 0.0);
}

#[test]
fn faded_channel_costs_more_transmit_energy() {
    let mut s = table1();
    s.tasks = 3;
    let clear = run_episode(&s, Policy::Rp).unwrap();
    for robot in 1..=3 {
        s.channel_schedule.push(mrc_core::sim::ChannelOverride { task: 1, robot, gain: 1e-8 });
    }
    let faded = run_episode(&s, Policy::Rp).unwrap();
    let tx = |t: &EpisodeTrace| t.rows.iter().filter(|r| r.task == 1 && r.robot_id > 0).map(|r| r.e_transmit).sum::<f64>();
    assert!(tx(&faded) > 1e3 * tx(&clear));
}

#[test]
fn master_exhaustion_can_end_the_episode() {
    let mut s = table1();
    s.master_exhaustion = mrc_core::sim::MasterExhaustion::EndEpisode;
    let t = run_episode(&s, Policy::Op).unwrap();
    assert!(matches!(t.termination, Termination::MasterExhausted { task: 1, .. }), "{:?}", t.termination);
    assert!(t.rows.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episodes_keep_their_invariants(seed in 0u64..10_000, policy in 0usize..3, tasks in 0usize..40) {
        let mut s = table1();
        s.seed = Some(seed);
        s.tasks = tasks;
        let p = Policy::ALL[policy];
        let t = run_episode(&s, p).unwrap();
        check_invariants(&t);
        prop_assert!(t.tasks_completed <= tasks);
        prop_assert_eq!(&t, &run_episode(&s, p).unwrap());
    }
}
