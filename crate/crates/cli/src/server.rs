//! WebSocket gateway. Each connection gets its own session running on a
//! dedicated thread, since the engine is single-threaded by design. The
//! socket task only moves frames between the client and that thread.

use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use trialogue_core::ClockMode;

use crate::outbox::Outbox;
use crate::session::{Session, SessionOptions};
use crate::wire::{encode, parse_client, ClientBody, ServerBody, ServerMessage};

/// How often an idle session thread wakes to advance its engine.
const TICK: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub session: SessionOptions,
    pub outbox_capacity: usize,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            session: SessionOptions::default(),
            outbox_capacity: 256,
        }
    }
}

struct AppState {
    opts: ServeOptions,
    sessions: AtomicU64,
}

pub async fn bind(addr: SocketAddr) -> io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

pub fn router(opts: ServeOptions) -> Router {
    let state = Arc::new(AppState {
        opts,
        sessions: AtomicU64::new(0),
    });
    Router::new().route("/session", get(upgrade)).with_state(state)
}

pub async fn serve(listener: TcpListener, opts: ServeOptions) -> io::Result<()> {
    axum::serve(listener, router(opts)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(mut socket: WebSocket, state: Arc<AppState>) {
    let id = format!("s{}", state.sessions.fetch_add(1, Ordering::Relaxed) + 1);
    tracing::info!(session = %id, "session opened");
    let outbox = Outbox::new(state.opts.outbox_capacity);
    let (tx, rx) = mpsc::channel();
    let worker = {
        let (id, opts, outbox) = (id.clone(), state.opts.session.clone(), outbox.clone());
        thread::spawn(move || session_loop(id, opts, rx, outbox))
    };
    let reply = |body: ServerBody| ServerMessage {
        session: id.clone(),
        body,
    };

    'conn: loop {
        tokio::select! {
            frame = socket.recv() => match frame {
                Some(Ok(WsMessage::Text(text))) => match parse_client(text.as_str()) {
                    Ok(msg) => {
                        if tx.send(msg.body).is_err() {
                            break 'conn;
                        }
                    }
                    Err(e) => outbox.push(reply(ServerBody::error(e))),
                },
                Some(Ok(WsMessage::Binary(_))) => {
                    outbox.push(reply(ServerBody::error("binary frames are not supported")));
                }
                Some(Ok(WsMessage::Close(_))) | Some(Err(_)) | None => break 'conn,
                Some(Ok(_)) => {}
            },
            batch = outbox.next_batch() => match batch {
                Some(batch) => {
                    for msg in batch {
                        if socket.send(WsMessage::Text(encode(&msg).into())).await.is_err() {
                            break 'conn;
                        }
                    }
                }
                None => break 'conn,
            },
        }
    }

    // Closing the channel stops the worker on its next tick.
    drop(tx);
    let _ = tokio::task::spawn_blocking(move || worker.join()).await;
    tracing::info!(session = %id, dropped = outbox.dropped(), "session closed");
}

fn session_loop(id: String, opts: SessionOptions, rx: mpsc::Receiver<ClientBody>, outbox: Outbox) {
    let mut session = Session::new(id.clone(), ClockMode::Wall, opts);
    let send = |body| {
        outbox.push(ServerMessage {
            session: id.clone(),
            body,
        })
    };
    loop {
        match rx.recv_timeout(TICK) {
            Ok(body) => session.handle(body).into_iter().for_each(send),
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        session.pump();
        session.take_outbound().into_iter().for_each(send);
    }
    outbox.close();
}
