use hopsim::channel::McsTable;
use hopsim::mac::{on_tx_result, FrameClass, LinkState, MacConfig, TxResult};
use hopsim::routing::{
    BreakCause, Cost, Hello, Outbox, RouteEventKind, RouteReply, Router, RoutingConfig, RreqId,
};
use hopsim::sim::SimTime;
use hopsim::StaId;

/// Number of consecutive failed attempts that produce the link break.
fn attempts_until_break(class: FrameClass) -> u32 {
    let table = McsTable::default();
    let cfg = MacConfig::default();
    let mut link = LinkState::new(StaId(2), 12);
    for attempt in 1..=100 {
        if on_tx_result(&mut link, false, class, &table, &cfg) == TxResult::LinkBreak {
            return attempt;
        }
    }
    panic!("no link break");
}

#[test]
fn short_frames_break_on_seventh_failure() {
    assert_eq!(attempts_until_break(FrameClass::Short), 7);
}

#[test]
fn long_frames_break_on_fourth_failure() {
    assert_eq!(attempts_until_break(FrameClass::Long), 4);
}

#[test]
fn a_success_restarts_the_count() {
    let table = McsTable::default();
    let cfg = MacConfig::default();
    let mut link = LinkState::new(StaId(2), 12);
    for _ in 0..3 {
        assert_eq!(on_tx_result(&mut link, false, FrameClass::Long, &table, &cfg), TxResult::Retry);
    }
    assert_eq!(on_tx_result(&mut link, true, FrameClass::Long, &table, &cfg), TxResult::Ok);
    for _ in 0..3 {
        assert_eq!(on_tx_result(&mut link, false, FrameClass::Long, &table, &cfg), TxResult::Retry);
    }
    assert_eq!(
        on_tx_result(&mut link, false, FrameClass::Long, &table, &cfg),
        TxResult::LinkBreak
    );
}

fn ms(v: u64) -> SimTime {
    SimTime::from_millis(v)
}

fn hello_breaks(out: &Outbox, nb: u32) -> bool {
    out.events.iter().any(|k| {
        matches!(k, RouteEventKind::LinkBreak { neighbor, cause: BreakCause::HelloTimeout } if *neighbor == StaId(nb))
    })
}

#[test]
fn hello_break_after_exactly_three_missed_intervals() {
    let cfg = RoutingConfig::default();
    let mut r = Router::new(StaId(1), [StaId(2)], cfg);
    for k in 1..=2 {
        let mut out = Outbox::new();
        r.hello_tick(ms(100 * k), &mut out);
        assert!(!hello_breaks(&out, 2), "broke after {k} misses");
        assert!(r.neighbor(StaId(2)).unwrap().alive);
    }
    let mut out = Outbox::new();
    r.hello_tick(ms(300), &mut out);
    assert!(hello_breaks(&out, 2));
    assert!(!r.neighbor(StaId(2)).unwrap().alive);
}

#[test]
fn hearing_a_hello_resets_the_miss_count() {
    let cfg = RoutingConfig::default();
    let mut r = Router::new(StaId(1), [StaId(2)], cfg);
    let hello = Hello {
        sender: StaId(2),
        sequence: 1,
    };
    let mut out = Outbox::new();
    r.hello_tick(ms(100), &mut out);
    r.hello_tick(ms(200), &mut out);
    r.handle_hello(ms(250), &hello, StaId(2), Cost::new(1.0).unwrap(), &mut out);
    r.hello_tick(ms(300), &mut out);
    r.hello_tick(ms(400), &mut out);
    r.hello_tick(ms(500), &mut out);
    assert!(!hello_breaks(&out, 2));
    let mut out = Outbox::new();
    r.hello_tick(ms(600), &mut out);
    assert!(hello_breaks(&out, 2));
}

/// Source 1 with routes to 4 via 2 (primary) and 3 (backup).
fn source_router() -> Router {
    let mut r = Router::new(StaId(1), [StaId(2), StaId(3)], RoutingConfig::default());
    let mut out = Outbox::new();
    r.add_source(StaId(4));
    r.originate_discovery(SimTime::ZERO, StaId(4), &mut out);
    let id = RreqId {
        origin: StaId(1),
        seq: r.sequence(),
    };
    for (via, acc) in [(2, 1.0), (3, 2.0)] {
        let rrep = RouteReply {
            id,
            destination: StaId(4),
            accumulated_metric: Cost::new(acc).unwrap(),
            hop_count: 1,
        };
        r.handle_rrep(ms(1), &rrep, StaId(via), Cost::new(1.0).unwrap(), &mut out);
    }
    let e = r.entry(StaId(4)).unwrap();
    assert_eq!((e.next_hop, e.backup_next_hop), (StaId(2), Some(StaId(3))));
    r
}

#[test]
fn mcs_trigger_fires_below_floor_on_active_link() {
    let floor = RoutingConfig::default().mcs_floor;
    let mut r = source_router();
    let mut out = Outbox::new();
    assert!(!r.mcs_trigger(ms(10), StaId(2), floor, &mut out), "at the floor");
    assert!(r.mcs_trigger(ms(10), StaId(2), floor - 1, &mut out));
    assert!(out
        .events
        .iter()
        .any(|k| matches!(k, RouteEventKind::McsTrigger { neighbor: StaId(2), .. })));
    assert_eq!(r.entry(StaId(4)).unwrap().next_hop, StaId(3));
    assert_eq!(r.next_hop_for(StaId(4)), Some(StaId(3)));
}

#[test]
fn mcs_trigger_ignores_links_without_active_routes() {
    let mut r = Router::new(StaId(1), [StaId(2)], RoutingConfig::default());
    let mut out = Outbox::new();
    assert!(!r.mcs_trigger(ms(10), StaId(2), 0, &mut out));
    assert!(out.events.is_empty());
}

#[test]
fn mcs_trigger_respects_cooldown() {
    let cfg = RoutingConfig::default();
    let mut r = source_router();
    let mut out = Outbox::new();
    assert!(r.mcs_trigger(ms(10), StaId(2), 1, &mut out));
    // route now runs over 3; a second drop inside the cooldown is suppressed
    let inside = ms(10) + cfg.discovery_cooldown() - SimTime::from_nanos(1);
    let mut out = Outbox::new();
    assert!(!r.mcs_trigger(inside, StaId(3), 1, &mut out));
    assert!(out
        .events
        .iter()
        .any(|k| matches!(k, RouteEventKind::McsTriggerSuppressed { neighbor: StaId(3), .. })));
    let after = ms(10) + cfg.discovery_cooldown();
    let mut out = Outbox::new();
    assert!(r.mcs_trigger(after, StaId(3), 1, &mut out));
}

#[test]
fn recovering_mcs_restores_the_neighbor() {
    let floor = RoutingConfig::default().mcs_floor;
    let mut r = source_router();
    let mut out = Outbox::new();
    r.mcs_trigger(ms(10), StaId(2), 0, &mut out);
    assert!(!r.neighbor(StaId(2)).unwrap().useful);
    r.mcs_trigger(ms(20), StaId(2), floor, &mut out);
    assert!(r.neighbor(StaId(2)).unwrap().useful);
}
