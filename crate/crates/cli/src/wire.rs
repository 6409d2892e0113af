//! Gateway wire schema. Every message is one JSON object with a `type`
//! discriminator, the `session` id and the body fields inline. Optional
//! server fields are always present and carry `null` when unknown.
//! `docs/wire-schema.md` is the normative description.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use trialogue_core::TurnTrigger;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<B> {
    /// Clients may leave this empty; the server always fills it in.
    #[serde(default)]
    pub session: String,
    #[serde(flatten)]
    pub body: B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechEdge {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientBody {
    Join {
        name: String,
        angle_deg: u16,
    },
    Utterance {
        participant: String,
        text: String,
        facing_robot: bool,
    },
    Speech {
        participant: String,
        state: SpeechEdge,
    },
    /// Partial noise settings; keys not given keep their current value.
    Config {
        noise: Map<String, Value>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerBody {
    Joined {
        participant: String,
        angle_deg: u16,
    },
    RobotSay {
        text: String,
        addressee: Option<String>,
        onset_ms: u64,
    },
    State {
        listening: bool,
        current_speaker: Option<String>,
        gaze_angle: Option<u16>,
    },
    Turn {
        trigger: TurnTrigger,
    },
    Transcript {
        participant: String,
        text: String,
    },
    Error {
        message: String,
    },
}

impl ServerBody {
    pub fn error(message: impl Into<String>) -> Self {
        ServerBody::Error {
            message: message.into(),
        }
    }

    /// State snapshots may be shed under back-pressure; nothing else may.
    pub fn droppable(&self) -> bool {
        matches!(self, ServerBody::State { .. })
    }
}

pub type ClientMessage = Envelope<ClientBody>;
pub type ServerMessage = Envelope<ServerBody>;

/// Parses one inbound frame. The error text is meant for an `error` reply.
pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    let kind = value
        .get("type")
        .and_then(Value::as_str)
        .ok_or("message has no string `type` field")?
        .to_owned();
    serde_json::from_value(value).map_err(|e| format!("invalid `{kind}` message: {e}"))
}

pub fn encode<B: Serialize>(msg: &Envelope<B>) -> String {
    serde_json::to_string(msg).expect("wire messages serialise")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn field_layout_is_flat() {
        let msg = ServerMessage {
            session: "s1".into(),
            body: ServerBody::RobotSay {
                text: "Hi.".into(),
                addressee: None,
                onset_ms: 760,
            },
        };
        assert_eq!(
            encode(&msg),
            r#"{"session":"s1","type":"robot_say","text":"Hi.","addressee":null,"onset_ms":760}"#
        );
        let turn = ServerMessage {
            session: "s1".into(),
            body: ServerBody::Turn {
                trigger: TurnTrigger::GazeHandoff,
            },
        };
        assert_eq!(
            encode(&turn),
            r#"{"session":"s1","type":"turn","trigger":"gaze_handoff"}"#
        );
    }

    #[test]
    fn client_messages_parse() {
        let m = parse_client(r#"{"type":"join","name":"alice","angle_deg":60}"#).unwrap();
        assert_eq!(m.session, "");
        assert_eq!(
            m.body,
            ClientBody::Join {
                name: "alice".into(),
                angle_deg: 60
            }
        );
        let m = parse_client(r#"{"type":"speech","session":"x","participant":"bob","state":"start"}"#).unwrap();
        assert_eq!(
            m.body,
            ClientBody::Speech {
                participant: "bob".into(),
                state: SpeechEdge::Start
            }
        );
    }

    #[test]
    fn rejections_explain_themselves() {
        assert!(parse_client(r#"{"type":"dance"}"#).unwrap_err().contains("dance"));
        assert!(parse_client("not json").unwrap_err().starts_with("malformed"));
        assert!(parse_client(r#"{"name":"x"}"#).unwrap_err().contains("type"));
        let e = parse_client(r#"{"type":"join","name":"x"}"#).unwrap_err();
        assert!(e.contains("angle_deg"), "{e}");
    }

    fn text() -> impl Strategy<Value = String> {
        "[ -~]{0,12}"
    }

    fn client_body() -> impl Strategy<Value = ClientBody> {
        prop_oneof![
            (text(), any::<u16>()).prop_map(|(name, angle_deg)| ClientBody::Join { name, angle_deg }),
            (text(), text(), any::<bool>()).prop_map(|(participant, text, facing_robot)| ClientBody::Utterance {
                participant,
                text,
                facing_robot
            }),
            (text(), any::<bool>()).prop_map(|(participant, start)| ClientBody::Speech {
                participant,
                state: if start { SpeechEdge::Start } else { SpeechEdge::End }
            }),
            (0.0f64..1.0, any::<u16>()).prop_map(|(p, j)| {
                let mut noise = Map::new();
                noise.insert("voice_id_blank_p".into(), p.into());
                noise.insert("doa_jitter_deg".into(), j.into());
                ClientBody::Config { noise }
            }),
        ]
    }

    fn server_body() -> impl Strategy<Value = ServerBody> {
        let trigger = prop_oneof![
            Just(TurnTrigger::GazeHandoff),
            Just(TurnTrigger::LongPause),
            Just(TurnTrigger::Opening),
            Just(TurnTrigger::None),
        ];
        prop_oneof![
            (text(), any::<u16>()).prop_map(|(participant, angle_deg)| ServerBody::Joined { participant, angle_deg }),
            (text(), proptest::option::of(text()), any::<u64>()).prop_map(|(text, addressee, onset_ms)| {
                ServerBody::RobotSay {
                    text,
                    addressee,
                    onset_ms,
                }
            }),
            (
                any::<bool>(),
                proptest::option::of(text()),
                proptest::option::of(any::<u16>())
            )
                .prop_map(|(listening, current_speaker, gaze_angle)| ServerBody::State {
                    listening,
                    current_speaker,
                    gaze_angle
                }),
            trigger.prop_map(|trigger| ServerBody::Turn { trigger }),
            (text(), text()).prop_map(|(participant, text)| ServerBody::Transcript { participant, text }),
            text().prop_map(|message| ServerBody::Error { message }),
        ]
    }

    proptest! {
        #[test]
        fn client_messages_round_trip(session in text(), body in client_body()) {
            let msg = ClientMessage { session, body };
            let text = encode(&msg);
            prop_assert_eq!(parse_client(&text).unwrap(), msg.clone());
            prop_assert_eq!(encode(&parse_client(&text).unwrap()), text);
        }

        #[test]
        fn server_messages_round_trip(session in text(), body in server_body()) {
            let msg = ServerMessage { session, body };
            let text = encode(&msg);
            let back: ServerMessage = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &msg);
            prop_assert_eq!(encode(&back), text);
        }
    }
}
