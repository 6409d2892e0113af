//! Turn taking: the robot claims the floor when the last speaker looks at it,
//! or after a long silence.

use std::collections::BTreeMap;

use crate::config::EngineConfig;
use crate::effect::{Effect, Effects};
use crate::message::Message;
use crate::types::{SegmentId, SwitchKind, Timestamp, TranscriptSegment, TurnDecision, TurnSwitch, TurnTrigger};

#[derive(Debug, Clone)]
pub struct TurnTaking {
    cfg: EngineConfig,
    /// Latest head orientation per seat angle.
    facing: BTreeMap<u16, bool>,
    current_doa: Option<u16>,
    robot_speaking: bool,
    /// Armed long-pause timer: segment and token.
    pending: Option<(SegmentId, u64)>,
    next_token: u64,
}

impl TurnTaking {
    pub fn new(cfg: EngineConfig) -> Self {
        Self {
            cfg,
            facing: BTreeMap::new(),
            current_doa: None,
            robot_speaking: false,
            pending: None,
            next_token: 0,
        }
    }

    pub fn has_pending_timer(&self) -> bool {
        self.pending.is_some()
    }

    pub fn on_head_pose(&mut self, angle_deg: u16, facing_robot: bool) {
        self.facing.insert(angle_deg, facing_robot);
    }

    /// Head orientation of the seat nearest the current voice direction.
    pub fn current_facing(&self) -> bool {
        let Some(doa) = self.current_doa else {
            return false;
        };
        self.facing
            .iter()
            .min_by_key(|(angle, _)| (angle.abs_diff(doa), **angle))
            .is_some_and(|(_, facing)| *facing)
    }

    pub fn on_switch(&mut self, sw: &TurnSwitch) {
        match sw.kind {
            SwitchKind::UserToRobot => self.robot_speaking = true,
            SwitchKind::RobotToUser => self.robot_speaking = false,
            SwitchKind::UserUser => {}
        }
    }

    pub fn on_user_angle(&mut self, deg: u16, now: Timestamp, out: &mut Effects) {
        self.current_doa = Some(deg);
        if !self.robot_speaking {
            self.cancel(now, out);
        }
    }

    pub fn on_transcribed(&mut self, seg: &TranscriptSegment, now: Timestamp, out: &mut Effects) {
        self.cancel(now, out);
        if self.current_facing() {
            out.push(Effect::Emit(Message::Turn(TurnDecision::take(
                TurnTrigger::GazeHandoff,
                Some(seg.id.clone()),
                seg.end_ts,
            ))));
            return;
        }
        let token = self.next_token;
        self.next_token += 1;
        self.pending = Some((seg.id.clone(), token));
        out.push(Effect::Timer {
            at: (seg.end_ts + self.cfg.long_pause_ms).max(now),
            msg: Message::LongPauseDue {
                segment: seg.id.clone(),
                token,
            },
        });
    }

    pub fn on_long_pause(&mut self, token: u64, now: Timestamp, out: &mut Effects) {
        match &self.pending {
            Some((seg, t)) if *t == token => {
                let seg = seg.clone();
                self.pending = None;
                out.push(Effect::Emit(Message::Turn(TurnDecision::take(
                    TurnTrigger::LongPause,
                    Some(seg),
                    now,
                ))));
            }
            _ => {}
        }
    }

    fn cancel(&mut self, now: Timestamp, out: &mut Effects) {
        if let Some((seg, _)) = self.pending.take() {
            out.push(Effect::Emit(Message::Turn(TurnDecision::yield_turn(Some(seg), now))));
        }
    }
}
