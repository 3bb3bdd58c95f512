mod common;

use std::sync::Arc;

use commit_core::api::{ApiError, Feed, PushEvent, Service, VirtualClock};
use commit_core::notify::RuleId;
use commit_core::store::replay;
use commit_core::time::hours;
use commit_core::{
    BannerState, CommitVia, Condition, CycleIndex, Event, GroupConfig, GroupId, MessageKind,
    ReactionKind,
};
use common::epoch;
use tokio::sync::mpsc::UnboundedReceiver;

fn service(condition: Condition, auto_renew: bool) -> (Arc<VirtualClock>, Service, GroupId) {
    let clock = Arc::new(VirtualClock::new(epoch()));
    let svc = Service::new(clock.clone());
    let mut cfg = GroupConfig::new("g1", "Book Club", condition, epoch());
    cfg.auto_renew = auto_renew;
    svc.create_group(cfg).unwrap();
    (clock, svc, "g1".into())
}

fn drain(rx: &mut UnboundedReceiver<PushEvent>) -> Vec<PushEvent> {
    let mut out = Vec::new();
    while let Ok(e) = rx.try_recv() {
        out.push(e);
    }
    out
}

#[test]
fn uncommitted_members_get_the_obscured_view() {
    let (clock, svc, g) = service(Condition::Commit, false);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    let b = svc.join_group(&g, &"bob".into(), "Bob").unwrap();
    clock.advance(hours(1));
    svc.do_commit(&a.token, None, false).unwrap();
    svc.send_message(&a.token, MessageKind::Text, "hello").unwrap();

    match svc.get_feed(&b.token, 0).unwrap() {
        Feed::Obscured(v) => {
            assert_eq!(v.group_name, "Book Club");
            assert_eq!(v.committed_member_count, 1);
        }
        other => panic!("expected obscured view, got {other:?}"),
    }
    let feed = svc.get_feed(&a.token, 0).unwrap();
    assert_eq!(feed.messages().count(), 1);

    let err = svc.send_message(&b.token, MessageKind::Text, "hi").unwrap_err();
    assert_eq!(err.code(), "REJECT_NOT_COMMITTED");
}

#[test]
fn feed_access_is_decided_per_request() {
    let (clock, svc, g) = service(Condition::Commit, false);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    svc.do_commit(&a.token, None, false).unwrap();
    clock.advance(hours(47));
    assert!(!svc.get_feed(&a.token, 0).unwrap().is_obscured());
    clock.advance(hours(2));
    assert!(svc.get_feed(&a.token, 0).unwrap().is_obscured());
    svc.do_commit(&a.token, None, false).unwrap();
    assert!(!svc.get_feed(&a.token, 0).unwrap().is_obscured());
}

#[test]
fn control_groups_are_always_readable() {
    let (_, svc, g) = service(Condition::Control, false);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    assert!(!svc.get_feed(&a.token, 0).unwrap().is_obscured());
    assert_eq!(
        svc.do_commit(&a.token, None, false).unwrap_err().code(),
        "REJECT_WRONG_CONDITION"
    );
    svc.send_message(&a.token, MessageKind::Text, "hi").unwrap();
}

#[test]
fn push_stream_hides_content_from_uncommitted_members() {
    let (clock, svc, g) = service(Condition::Commit, false);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    let b = svc.join_group(&g, &"bob".into(), "Bob").unwrap();
    let c = svc.join_group(&g, &"carol".into(), "Carol").unwrap();
    svc.do_commit(&a.token, None, false).unwrap();
    svc.do_commit(&c.token, None, false).unwrap();
    let mut rb = svc.subscribe(&b.token).unwrap();
    let mut rc = svc.subscribe(&c.token).unwrap();
    drain(&mut rb);
    drain(&mut rc);

    clock.advance(hours(2));
    let msg = svc.send_message(&a.token, MessageKind::Text, "secret plans").unwrap();

    let bob = drain(&mut rb);
    assert!(bob.iter().any(|e| matches!(e, PushEvent::GatedMessage { message_id, .. } if *message_id == msg.message_id)));
    let bob_json = serde_json::to_string(&bob).unwrap();
    assert!(!bob_json.contains("secret plans"), "{bob_json}");
    let note = bob
        .iter()
        .find_map(|e| match e {
            PushEvent::Event { record } => match &record.event {
                Event::Notification { rule_id, rendered_text, content_visible, .. } => {
                    Some((*rule_id, rendered_text.clone(), *content_visible))
                }
                _ => None,
            },
            _ => None,
        })
        .expect("bob is notified");
    assert_eq!(note.0, RuleId::NewMessage);
    assert!(!note.2);
    assert_eq!(note.1, "Alice posted in Book Club. Commit to see what they said.");

    let carol = drain(&mut rc);
    assert!(carol.iter().any(|e| matches!(e, PushEvent::Event { record } if matches!(&record.event, Event::Message { body, .. } if body == "secret plans"))));
    assert!(carol.iter().all(|e| !matches!(e, PushEvent::GatedMessage { .. })));
}

#[test]
fn reactions_notify_the_author() {
    let (clock, svc, g) = service(Condition::Control, false);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    let b = svc.join_group(&g, &"bob".into(), "Bob").unwrap();
    let m = svc.send_message(&a.token, MessageKind::Text, "hi").unwrap();
    let mut ra = svc.subscribe(&a.token).unwrap();
    clock.advance(hours(1));
    svc.send_reaction(&b.token, m.message_id, ReactionKind::Emoji { tag: "+1".into() })
        .unwrap();
    let texts: Vec<String> = drain(&mut ra)
        .into_iter()
        .filter_map(|e| match e {
            PushEvent::Event { record } => match record.event {
                Event::Notification { rendered_text, .. } => Some(rendered_text),
                _ => None,
            },
            _ => None,
        })
        .collect();
    assert_eq!(texts, vec!["Bob reacted to your message in Book Club".to_string()]);
}

#[test]
fn commit_reaction_targets_the_next_open_cycle() {
    let (clock, svc, g) = service(Condition::Commit, false);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    svc.do_commit(&a.token, None, false).unwrap();
    let m = svc.send_message(&a.token, MessageKind::Text, "hi").unwrap();
    clock.advance(hours(3));
    let r = svc.send_reaction(&a.token, m.message_id, ReactionKind::CommitReaction).unwrap();
    assert_eq!(r.commit_cycle, Some(CycleIndex(1)));
    let entry = svc
        .inspect(&g, |log| log.state().ledger().get(&"alice".into(), CycleIndex(1)).cloned())
        .unwrap()
        .unwrap();
    assert_eq!(entry.via, CommitVia::Reaction);
    assert_eq!(
        svc.get_banner(&a.token).unwrap(),
        BannerState::CommittedFulfilledRenewed
    );
}

#[test]
fn cycle_boundaries_are_broadcast_and_auto_renewed() {
    let (clock, svc, g) = service(Condition::Commit, true);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    svc.do_commit(&a.token, None, false).unwrap();
    let mut rx = svc.subscribe(&a.token).unwrap();
    drain(&mut rx);
    clock.advance(hours(49));
    svc.tick().unwrap();
    let events = drain(&mut rx);
    assert!(events.iter().any(|e| matches!(e, PushEvent::CycleStarted { cycle, at } if *cycle == CycleIndex(1) && *at == epoch() + hours(48))));
    let renewed = svc
        .inspect(&g, |log| log.state().ledger().get(&"alice".into(), CycleIndex(1)).map(|e| e.via))
        .unwrap();
    assert_eq!(renewed, Some(CommitVia::AutoRenew));
    assert!(!svc.get_feed(&a.token, 0).unwrap().is_obscured());
}

#[test]
fn lapse_reminders_are_logged_and_pushed() {
    let (clock, svc, g) = service(Condition::Commit, false);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    svc.do_commit(&a.token, None, false).unwrap();
    let mut rx = svc.subscribe(&a.token).unwrap();
    clock.advance(hours(60));
    svc.tick().unwrap();
    let rules: Vec<RuleId> = drain(&mut rx)
        .into_iter()
        .filter_map(|e| match e {
            PushEvent::Event { record } => match record.event {
                Event::Notification { rule_id, .. } => Some(rule_id),
                _ => None,
            },
            _ => None,
        })
        .collect();
    assert!(rules.contains(&RuleId::CommitUnfulfilledEnding));
    assert!(rules.contains(&RuleId::CommitLapsed));
    assert_eq!(svc.get_banner(&a.token).unwrap(), BannerState::NotCommitted);
}

#[test]
fn live_state_equals_replayed_log() {
    let (clock, svc, g) = service(Condition::Commit, true);
    let a = svc.join_group(&g, &"alice".into(), "Alice").unwrap();
    let b = svc.join_group(&g, &"bob".into(), "Bob").unwrap();
    svc.do_commit(&a.token, None, false).unwrap();
    for h in 0..200 {
        clock.advance(hours(1));
        if h % 7 == 0 {
            let _ = svc.send_message(&a.token, MessageKind::Text, &format!("a{h}"));
        }
        if h % 31 == 0 {
            let _ = svc.do_commit(&b.token, None, false);
            let _ = svc.send_message(&b.token, MessageKind::Image, "pic");
        }
        let _ = svc.get_feed(&b.token, 0);
        svc.tick().unwrap();
    }
    svc.inspect(&g, |log| {
        let replayed = replay(log.config(), log.records(), None).unwrap();
        assert_eq!(&replayed, log.state());
        let times: Vec<_> = log.records().iter().map(|r| r.at).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    })
    .unwrap();
}

#[test]
fn unknown_tokens_and_groups() {
    let (_, svc, _) = service(Condition::Commit, false);
    assert!(matches!(svc.get_feed("nope", 0), Err(ApiError::Unauthorized)));
    let err = svc.join_group(&"missing".into(), &"a".into(), "A").unwrap_err();
    assert_eq!(err.code(), "UNKNOWN_GROUP");
}
