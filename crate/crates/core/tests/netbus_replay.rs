use llmnet::netbus::{Bus, BusConfig, Envelope, EnvelopeKind, FaultInjection};
use proptest::prelude::*;

fn drive(config: BusConfig, sends: &[(u8, u8, u8)]) -> (String, u64) {
    let mut bus = Bus::new(config);
    for i in 0..4 {
        bus.register(format!("n{i}").as_str().into());
    }
    for (from, to, burst) in sends {
        for b in 0..*burst {
            let e = Envelope::new(
                format!("n{}", from % 4).as_str().into(),
                format!("n{}", to % 4).as_str().into(),
                EnvelopeKind::DebateMsg,
                vec![b],
            );
            bus.send(e).unwrap();
        }
        bus.step();
    }
    bus.run_until(|_| false);
    (bus.trace_ndjson(), bus.dropped())
}

proptest! {
    #[test]
    fn replays_are_identical(sends in prop::collection::vec((0u8..4, 0u8..4, 0u8..4), 0..30), seed in any::<u64>(), latency in 1u64..4) {
        let config = BusConfig { latency, faults: Some(FaultInjection { drop_probability: 0.3, seed }) };
        prop_assert_eq!(drive(config.clone(), &sends), drive(config, &sends));
    }

    #[test]
    fn without_faults_everything_arrives_in_send_order(sends in prop::collection::vec((0u8..4, 0u8..4, 1u8..4), 1..30)) {
        let (trace, dropped) = drive(BusConfig::default(), &sends);
        prop_assert_eq!(dropped, 0);
        let total: usize = sends.iter().map(|s| s.2 as usize).sum();
        prop_assert_eq!(trace.lines().count(), total);
        let ticks: Vec<u64> = trace
            .lines()
            .map(|l| serde_json::from_str::<Envelope>(l).unwrap().deliver_tick)
            .collect();
        prop_assert!(ticks.windows(2).all(|w| w[0] <= w[1]));
    }
}
