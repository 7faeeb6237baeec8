mod common;

use std::time::{Duration, Instant};

use attbus::bus::bag::parse_bag;
use attbus::bus::{Broker, Notify};
use attbus::config::parse_config;
use attbus::msg::MessageKind;
use attbus::runtime::{Pipeline, RunOptions, RuntimeError};

const CHAIN: &str = "\
node att attention_itti
end
node sel foa_selector
end
node ext region_extractor
end
node br bridge
end
node trk tracker_ncc
end
";

#[test]
fn threaded_smoke_run_selects_foci() {
    let cfg = parse_config(include_str!("../../../configs/smoke.cfg")).unwrap();
    let broker = Broker::new();
    let foa = broker
        .subscribe_with(
            broker.new_endpoint(),
            "/foa",
            Some(MessageKind::PointFoa),
            1024,
            Notify::new(),
        )
        .unwrap();
    let p = Pipeline::build(&cfg, &broker, 16).unwrap();
    let t = Instant::now();
    let summary = p
        .spawn(RunOptions {
            duration: Some(Duration::from_secs(2)),
            ..RunOptions::default()
        })
        .wait()
        .unwrap();
    assert!(t.elapsed() < Duration::from_secs(4));
    assert!(summary.ticks > 0);
    let mut n = 0;
    while foa.try_recv().is_some() {
        n += 1;
    }
    assert!(n >= 1, "no focus in 2 s");
}

#[test]
fn missing_directory_names_the_node() {
    let cfg = parse_config("node cam image_sequence\n  param dir /nonexistent/frames\nend\n").unwrap();
    let err = match Pipeline::build(&cfg, &Broker::new(), 16) {
        Err(e) => e,
        Ok(_) => panic!("built without frames"),
    };
    assert!(
        matches!(err, RuntimeError::NodeFailed { ref node, .. } if node == "cam"),
        "{err}"
    );
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn lockstep_recording_is_reproducible() {
    let cfg = parse_config(include_str!("../../../configs/canonical.cfg")).unwrap();
    let a = common::record_lockstep(&cfg);
    let b = common::record_lockstep(&cfg);
    assert!(a == b, "two lockstep recordings differ");
    let topics = common::by_topic(&parse_bag(&a).unwrap());
    assert_eq!(topics["/image"].len(), 150);
    for t in [
        "/saliency",
        "/foa",
        "/region_foa",
        "/object_foa",
        "/track_cmd",
        "/track_state",
    ] {
        assert!(topics.contains_key(t), "{t} not recorded");
    }
}

#[test]
fn replaying_images_reproduces_downstream_topics() {
    let cfg = parse_config(include_str!("../../../configs/canonical.cfg")).unwrap();
    let bytes = common::record_lockstep(&cfg);
    let original = common::by_topic(&parse_bag(&bytes).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let bag = dir.path().join("run.bag");
    std::fs::write(&bag, &bytes).unwrap();

    let text = format!(
        "node play bag_replay\n  param file {}\n  param topics /image\nend\n{CHAIN}",
        bag.display()
    );
    let replayed = common::by_topic(&parse_bag(&common::record_lockstep(&parse_config(&text).unwrap())).unwrap());
    assert!(!replayed.contains_key("/gt"));
    for (topic, msgs) in &replayed {
        assert!(original[topic] == *msgs, "{topic} differs after replay");
    }
    for t in [
        "/image",
        "/saliency",
        "/foa",
        "/region_foa",
        "/object_foa",
        "/track_cmd",
        "/track_state",
    ] {
        assert!(replayed.contains_key(t), "{t} missing from replay");
    }
}
