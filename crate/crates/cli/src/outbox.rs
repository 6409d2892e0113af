//! Bounded outbound queue between a session's engine thread and its socket.
//!
//! Pushing never blocks. When the queue is full the oldest state snapshot is
//! shed to make room; other messages are never dropped, so the queue may
//! exceed its bound while it holds nothing sheddable.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use tokio::sync::Notify;

use crate::wire::ServerMessage;

#[derive(Debug)]
struct Inner {
    queue: VecDeque<ServerMessage>,
    closed: bool,
    dropped: u64,
}

#[derive(Debug, Clone)]
pub struct Outbox {
    inner: Arc<Mutex<Inner>>,
    notify: Arc<Notify>,
    capacity: usize,
}

impl Outbox {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: Arc::new(Mutex::new(Inner {
                queue: VecDeque::new(),
                closed: false,
                dropped: 0,
            })),
            notify: Arc::new(Notify::new()),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&self, msg: ServerMessage) {
        {
            let mut inner = self.inner.lock().expect("outbox lock");
            if inner.queue.len() >= self.capacity {
                if let Some(i) = inner.queue.iter().position(|m| m.body.droppable()) {
                    inner.queue.remove(i);
                    inner.dropped += 1;
                } else if msg.body.droppable() {
                    inner.dropped += 1;
                    return;
                }
            }
            inner.queue.push_back(msg);
        }
        self.notify.notify_one();
    }

    /// Takes everything queued so far.
    pub fn drain(&self) -> Vec<ServerMessage> {
        self.inner.lock().expect("outbox lock").queue.drain(..).collect()
    }

    /// Waits until something is queued or the outbox is closed; returns
    /// `None` once closed and empty.
    pub async fn next_batch(&self) -> Option<Vec<ServerMessage>> {
        loop {
            let notified = self.notify.notified();
            {
                let mut inner = self.inner.lock().expect("outbox lock");
                if !inner.queue.is_empty() {
                    return Some(inner.queue.drain(..).collect());
                }
                if inner.closed {
                    return None;
                }
            }
            notified.await;
        }
    }

    pub fn close(&self) {
        self.inner.lock().expect("outbox lock").closed = true;
        self.notify.notify_one();
    }

    pub fn dropped(&self) -> u64 {
        self.inner.lock().expect("outbox lock").dropped
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("outbox lock").queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
