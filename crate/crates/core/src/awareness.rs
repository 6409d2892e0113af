//! Speaker awareness: turns direction-of-arrival polls into `user-angle`
//! and turn-switch events.

use crate::config::EngineConfig;
use crate::message::Message;
use crate::types::{DoaSample, SourceClass, SwitchKind, Timestamp, TurnSwitch};

#[derive(Debug, Clone)]
pub struct SpeakerAwareness {
    cfg: EngineConfig,
    prev_class: Option<SourceClass>,
    /// Last sample that classified as a user, across robot intervals.
    last_user_angle: Option<u16>,
}

impl SpeakerAwareness {
    pub fn new(cfg: EngineConfig) -> Self {
        Self {
            cfg,
            prev_class: None,
            last_user_angle: None,
        }
    }

    pub fn last_user_angle(&self) -> Option<u16> {
        self.last_user_angle
    }

    pub fn source_class(&self) -> Option<SourceClass> {
        self.prev_class
    }

    /// Handles one poll tick. Switches are emitted before `user-angle`.
    pub fn on_poll(&mut self, latest: Option<DoaSample>, now: Timestamp) -> Vec<Message> {
        let Some(sample) = latest else {
            return Vec::new();
        };
        let angle = sample.angle_deg;
        let Some(class) = self.cfg.classify(angle) else {
            tracing::warn!(angle, "direction of arrival outside known regions");
            return Vec::new();
        };
        let mut out = Vec::new();
        if let Some(prev) = self.prev_class {
            if prev != class {
                let sw = match class {
                    SourceClass::User => TurnSwitch {
                        kind: SwitchKind::RobotToUser,
                        ts: now,
                        new_angle_deg: Some(angle),
                    },
                    SourceClass::Robot => TurnSwitch {
                        kind: SwitchKind::UserToRobot,
                        ts: now,
                        new_angle_deg: None,
                    },
                };
                out.push(Message::RobotUserSwitch(sw));
            }
        }
        self.prev_class = Some(class);
        if class == SourceClass::User {
            if let Some(prev) = self.last_user_angle {
                if angle.abs_diff(prev) > self.cfg.user_switch_deg {
                    out.push(Message::UserUserSwitch(TurnSwitch {
                        kind: SwitchKind::UserUser,
                        ts: now,
                        new_angle_deg: Some(angle),
                    }));
                }
            }
            self.last_user_angle = Some(angle);
            out.push(Message::UserAngle { deg: angle });
        }
        out
    }
}
