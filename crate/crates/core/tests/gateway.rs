mod common;

use slicegen::gateway::{transcript_key, ChatMessage, Gateway, GatewayError, Role, SamplingParams, TranscriptStore};

use common::{fixtures, FnTransport};

fn ask(text: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::new(Role::System, "sys"),
        ChatMessage::new(Role::User, text),
    ]
}

#[test]
fn record_then_replay_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let transport = FnTransport::new(|n| Ok(format!("reply {n}")));
    let greedy = SamplingParams::greedy(256);
    {
        let gw = Gateway::record("m", transport.clone(), TranscriptStore::open(&path).unwrap(), 1);
        assert_eq!(gw.complete(&ask("a"), &greedy).unwrap(), "reply 0");
        assert_eq!(gw.complete(&ask("b"), &greedy).unwrap(), "reply 1");
        // A repeated request is served from the store.
        assert_eq!(gw.complete(&ask("a"), &greedy).unwrap(), "reply 0");
    }
    assert_eq!(transport.count(), 2);
    let gw = Gateway::replay("m", TranscriptStore::open(&path).unwrap());
    assert_eq!(gw.complete(&ask("b"), &greedy).unwrap(), "reply 1");
    assert!(matches!(
        gw.complete(&ask("b"), &SamplingParams::top_p(0.2, 256)),
        Err(GatewayError::ReplayMiss(_))
    ));
    assert!(matches!(
        Gateway::replay("other", TranscriptStore::open(&path).unwrap()).complete(&ask("a"), &greedy),
        Err(GatewayError::ReplayMiss(_))
    ));
}

#[test]
fn fixture_transcripts_have_consistent_keys() {
    let text = std::fs::read_to_string(fixtures().join("proj-a/transcripts.jsonl")).unwrap();
    let mut n = 0;
    for line in text.lines() {
        let t: slicegen::gateway::Transcript = serde_json::from_str(line).unwrap();
        assert_eq!(t.key, transcript_key(&t.model, &t.request.messages, &t.request.params));
        n += 1;
    }
    assert_eq!(n, 13);
    assert_eq!(
        TranscriptStore::open(&fixtures().join("proj-a/transcripts.jsonl"))
            .unwrap()
            .len(),
        13
    );
}

#[test]
fn transport_errors_stop_escalation() {
    let transport = FnTransport::new(|_| Err(GatewayError::Provider("{\"error\":\"rate\"}".into())));
    let gw = Gateway::live("m", transport.clone(), 1);
    let r = gw.complete_with_escalation(&ask("x"), |s| s.parse::<u32>());
    assert_eq!(r.err(), Some(GatewayError::Provider("{\"error\":\"rate\"}".into())));
    assert_eq!(transport.count(), 1);
}

#[test]
fn escalation_stops_at_first_valid_reply() {
    let transport = FnTransport::new(|n| Ok(if n < 2 { "nope".into() } else { "7".into() }));
    let gw = Gateway::live("m", transport.clone(), 1);
    let r = gw.complete_with_escalation(&ask("x"), |s| s.parse::<u32>()).unwrap();
    assert_eq!((r.value, r.attempts), (7, 3));
    assert_eq!(r.params, SamplingParams::top_p(0.5, gw.max_output_tokens()));
}
