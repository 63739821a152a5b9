//! The supervision protocol by hand, then the same run over both transports.

use neuroedge::cloud::{CloudNode, CloudPolicy};
use neuroedge::link::{encode_message, frame_message, EdgeLink, LinkMessage};
use neuroedge::runner::{build_plant, build_policy};
use neuroedge::{run_scenario, LinkSpec, ScenarioConfig, ScenarioKind};

fn main() -> neuroedge::Result<()> {
    let cfg = ScenarioConfig::defaults(ScenarioKind::Workbench);
    let plant = build_plant(&cfg)?;
    let policy: CloudPolicy = build_policy(&cfg, &plant)?;

    let msg = LinkMessage::StateReport { step: 0, x: plant.state().to_vec() };
    println!("wire:  {}", String::from_utf8_lossy(&encode_message(&msg)));
    println!("frame: {:?}...", &frame_message(&msg)[..8]);

    // Three supervised steps over loopback TCP.
    let node = CloudNode::new(policy, plant.clone());
    let mut link = EdgeLink::tcp("127.0.0.1:0", node, 3)?;
    for step in 0..3 {
        let x = [5.0 - step as f64, 2.0];
        let u = link.supervise(step, &x)?;
        println!("step {step}: x = {x:?} -> u = {u:?}");
    }
    let (_, stats) = link.finish()?;
    println!("{stats:?}");

    // Whole runs: the transport must not change a single byte.
    let mut cfg = cfg;
    cfg.horizon = 5.0;
    let inproc = run_scenario(&cfg)?;
    cfg.link = "tcp://127.0.0.1:0".parse::<LinkSpec>()?;
    let tcp = run_scenario(&cfg)?;
    println!(
        "inproc vs tcp: records identical = {}, payload bytes {} vs {}",
        inproc.records == tcp.records,
        inproc.summary.payload_bytes,
        tcp.summary.payload_bytes
    );
    Ok(())
}
