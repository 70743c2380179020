use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::Duration;

use obdh::harness::{run_integration_scenario, NodeBench, Script, Step};
use obdh::node::{NodeOptions, PortTable};
use obdh::sim::{serve, ServeOptions, StsSim, WdeSim};

fn run(with_sts: bool) -> obdh::harness::ScenarioReport {
    let table = PortTable::default();
    let protocols = table.downlink_protocols();
    let mut bench = NodeBench::start(table, NodeOptions::default()).unwrap();
    let gs = bench.take_ground();
    let wde = bench.take("PortRxMainBoard3");
    let sts = bench.take("PortRxOsci4");
    let stop = AtomicBool::new(false);
    let mut script = Script::default_integration();
    for step in &mut script.steps {
        if let Step::ExpectDownlink(e) = step {
            e.timeout = Duration::from_millis(700);
        }
    }
    let report = thread::scope(|s| {
        let opts = || ServeOptions {
            rate_hz: None,
            stop: Some(&stop),
        };
        s.spawn(move || serve(&mut WdeSim::new(1), wde, opts()));
        if with_sts {
            s.spawn(move || serve(&mut StsSim::new(4, 5), sts, opts()));
        } else {
            drop(sts);
        }
        let report = run_integration_scenario(&script, gs, protocols);
        stop.store(true, Ordering::SeqCst);
        report
    });
    bench.shutdown();
    report
}

#[test]
fn default_script_passes_against_simulators() {
    let report = run(true);
    assert!(report.passed(), "{report}\n{:#?}", report.transcript);
    assert!(report.transcript.iter().any(|l| l.starts_with("<- 04 01")));
}

#[test]
fn missing_star_sensor_fails_only_its_step() {
    let report = run(false);
    assert!(!report.passed());
    let failed: Vec<_> = report.failures().collect();
    assert_eq!(failed.len(), 1, "{report}");
    assert!(failed[0].detail.contains("no downlink"), "{report}");
    assert!(matches!(&failed[0].step, Step::ExpectDownlink(e) if e.id == 0x04));
}
