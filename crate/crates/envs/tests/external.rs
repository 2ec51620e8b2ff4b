use std::collections::BTreeMap;
use std::time::Duration;

use dsegym_core::{EnvError, Environment, ParamValue, ParameterSpace, ParameterSpec, RewardSpec, WorkloadSpec};
use dsegym_envs::{AdapterConfig, EnvOptions, ExternalEnv, SimulatorAdapter};

const HANDSHAKE: &str = r#"echo '{"protocol":1,"metrics":["latency"]}'"#;

// Replies to each request with the request's id and a fixed latency.
fn echo_body() -> String {
    r#"while read line; do
  id=$(echo "$line" | sed 's/^{"id":\([0-9]*\).*/\1/')
  echo "{\"id\":$id,\"metrics\":{\"latency\":1.0},\"valid\":true}"
done"#
        .to_string()
}

fn config(body: &str, timeout_ms: u64) -> AdapterConfig {
    AdapterConfig::new(
        vec!["sh".into(), "-c".into(), format!("{HANDSHAKE}\n{body}")],
        Duration::from_millis(timeout_ms),
    )
}

fn design() -> BTreeMap<String, ParamValue> {
    BTreeMap::from([("NumPEs".to_string(), ParamValue::Number(28.0))])
}

#[test]
fn echo_simulator_loops_back() {
    let mut sim = SimulatorAdapter::launch(config(&echo_body(), 5000)).unwrap();
    assert_eq!(sim.metrics(), ["latency"]);
    for _ in 0..3 {
        let obs = sim.evaluate(&design(), "w").unwrap();
        assert!(obs.valid);
        assert_eq!(obs.get("latency"), Some(1.0));
    }
}

#[test]
fn slow_child_times_out() {
    let mut sim = SimulatorAdapter::launch(config("read line; sleep 10", 200)).unwrap();
    let err = sim.evaluate(&design(), "w").unwrap_err();
    assert!(matches!(err, EnvError::SimulatorTimeout(_)), "{err}");
    assert!(err.to_string().contains("simulator timeout"));
    // no restarts allowed: the adapter stays down
    assert!(matches!(sim.evaluate(&design(), "w"), Err(EnvError::SimulatorCrashed(_))));
}

#[test]
fn timed_out_child_is_restarted() {
    let dir = tempfile::tempdir().unwrap();
    let mark = dir.path().join("slept");
    let body = format!(
        "if [ ! -f {m} ]; then touch {m}; read line; sleep 10; fi\n{}",
        echo_body(),
        m = mark.display()
    );
    let mut cfg = config(&body, 300);
    cfg.max_restarts = 1;
    let mut sim = SimulatorAdapter::launch(cfg).unwrap();
    assert!(matches!(sim.evaluate(&design(), "w"), Err(EnvError::SimulatorTimeout(_))));
    assert_eq!(sim.restarts(), 1);
    assert_eq!(sim.evaluate(&design(), "w").unwrap().get("latency"), Some(1.0));
}

#[test]
fn malformed_record_is_a_protocol_error() {
    let mut sim = SimulatorAdapter::launch(config("read line; echo 'latency=1.0'; sleep 5", 5000)).unwrap();
    match sim.evaluate(&design(), "w").unwrap_err() {
        EnvError::Protocol { message, raw } => {
            assert!(message.contains("malformed"));
            assert_eq!(raw, "latency=1.0");
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn mismatched_id_is_a_protocol_error() {
    let body = r#"read line; echo '{"id":99,"metrics":{"latency":1.0},"valid":true}'; sleep 5"#;
    let mut sim = SimulatorAdapter::launch(config(body, 5000)).unwrap();
    assert!(matches!(sim.evaluate(&design(), "w"), Err(EnvError::Protocol { .. })));
}

#[test]
fn exiting_child_is_reported_as_crash() {
    let mut sim = SimulatorAdapter::launch(config("read line; exit 3", 5000)).unwrap();
    let err = sim.evaluate(&design(), "w").unwrap_err();
    assert!(matches!(err, EnvError::SimulatorCrashed(_)), "{err}");
    assert!(err.to_string().contains("simulator crashed"));
}

#[test]
fn bad_handshake_fails_launch() {
    let cfg = AdapterConfig::new(
        vec!["sh".into(), "-c".into(), r#"echo '{"protocol":2,"metrics":[]}'"#.into()],
        Duration::from_secs(5),
    );
    assert!(matches!(SimulatorAdapter::launch(cfg), Err(EnvError::Protocol { .. })));
    let empty = AdapterConfig::new(vec![], Duration::from_secs(1));
    assert!(SimulatorAdapter::launch(empty).is_err());
}

#[test]
fn external_env_steps_through_the_adapter() {
    let space = ParameterSpace::new(vec![ParameterSpec::numeric("NumPEs", 14.0, 56.0, 14.0)]).unwrap();
    let mut env = ExternalEnv::new(
        "echo",
        config(&echo_body(), 5000),
        space.clone(),
        WorkloadSpec::new("w"),
        RewardSpec::target("latency", 2.0),
        EnvOptions::default(),
    )
    .unwrap();
    let p = space.from_map(&design()).unwrap();
    let r = env.step(&p).unwrap();
    assert_eq!(r.reward, 2.0);
    assert!(r.done);

    let unknown = ExternalEnv::new(
        "echo",
        config(&echo_body(), 5000),
        space,
        WorkloadSpec::new("w"),
        RewardSpec::target("power", 2.0),
        EnvOptions::default(),
    );
    assert!(unknown.is_err());
}
