//! Extension-host side of the loopback bridge.
//!
//! The bridge listens on `127.0.0.1:port` and keeps at most one renderer
//! client. Further connections complete the handshake and are closed at once.
//! Requests go out one at a time: a second concurrent request fails with
//! [`BridgeError::Busy`], and a request that outlives the timeout frees the
//! slot. A late answer to a timed-out request is discarded.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::protocol::CloseFrame;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{accept_async, WebSocketStream};

use crate::error::BridgeError;
use crate::protocol::{BridgeRequest, BridgeResponse, Method};

type Reply = oneshot::Sender<Result<Value, BridgeError>>;

struct Outbound {
    request: BridgeRequest,
    reply: Reply,
}

struct Connection {
    generation: u64,
    outbound: mpsc::UnboundedSender<Outbound>,
}

/// Connection state as seen by waiters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClientState {
    /// Increments on every accepted client.
    pub generation: u64,
    pub connected: bool,
}

struct Inner {
    active: Mutex<Option<Connection>>,
    in_flight: tokio::sync::Mutex<()>,
    next_id: AtomicU64,
    clients: watch::Sender<ClientState>,
    rejected: AtomicUsize,
    timeout: Duration,
}

pub struct BridgeHandle {
    inner: Arc<Inner>,
    addr: SocketAddr,
    accept_task: JoinHandle<()>,
}

/// Binds the listener and starts accepting clients.
pub async fn serve_bridge(port: u16, request_timeout: Duration) -> Result<BridgeHandle, BridgeError> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| BridgeError::Bind { addr, source })?;
    let addr = listener
        .local_addr()
        .map_err(|source| BridgeError::Bind { addr, source })?;
    let (clients, _) = watch::channel(ClientState::default());
    let inner = Arc::new(Inner {
        active: Mutex::new(None),
        in_flight: tokio::sync::Mutex::new(()),
        next_id: AtomicU64::new(0),
        clients,
        rejected: AtomicUsize::new(0),
        timeout: request_timeout,
    });
    let accept_task = tokio::spawn(accept_loop(listener, inner.clone()));
    tracing::info!(%addr, "bridge listening");
    Ok(BridgeHandle { inner, addr, accept_task })
}

async fn accept_loop(listener: TcpListener, inner: Arc<Inner>) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                tokio::spawn(handle_client(stream, peer, inner.clone()));
            }
            Err(e) => {
                tracing::warn!(error = %e, "accept failed");
                tokio::time::sleep(Duration::from_millis(10)).await;
            }
        }
    }
}

async fn handle_client(stream: TcpStream, peer: SocketAddr, inner: Arc<Inner>) {
    let mut ws = match accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            tracing::warn!(%peer, error = %e, "websocket handshake failed");
            return;
        }
    };
    let (tx, rx) = mpsc::unbounded_channel();
    let generation = {
        let mut active = inner.active.lock().unwrap();
        if active.is_some() {
            None
        } else {
            let generation = inner.clients.borrow().generation + 1;
            *active = Some(Connection { generation, outbound: tx });
            Some(generation)
        }
    };
    let Some(generation) = generation else {
        inner.rejected.fetch_add(1, Ordering::SeqCst);
        tracing::warn!(%peer, "rejecting second client");
        let frame = CloseFrame { code: CloseCode::Policy, reason: "another client is active".into() };
        let _ = ws.close(Some(frame)).await;
        return;
    };
    inner.clients.send_replace(ClientState { generation, connected: true });
    tracing::info!(%peer, generation, "renderer connected");

    run_connection(ws, rx).await;

    {
        let mut active = inner.active.lock().unwrap();
        if active.as_ref().is_some_and(|c| c.generation == generation) {
            *active = None;
        }
    }
    inner.clients.send_replace(ClientState { generation, connected: false });
    tracing::info!(%peer, generation, "renderer disconnected");
}

async fn run_connection(ws: WebSocketStream<TcpStream>, mut rx: mpsc::UnboundedReceiver<Outbound>) {
    let (mut sink, mut stream) = ws.split();
    let mut pending: Option<(u64, Reply)> = None;
    loop {
        tokio::select! {
            out = rx.recv() => {
                let Some(Outbound { request, reply }) = out else { break };
                let text = match serde_json::to_string(&request) {
                    Ok(t) => t,
                    Err(e) => {
                        let _ = reply.send(Err(BridgeError::Protocol(e.to_string())));
                        continue;
                    }
                };
                if sink.send(Message::text(text)).await.is_err() {
                    let _ = reply.send(Err(BridgeError::Disconnected));
                    break;
                }
                // an earlier timed-out request is forgotten here
                pending = Some((request.id, reply));
            }
            frame = stream.next() => match frame {
                Some(Ok(Message::Text(text))) => match serde_json::from_str::<BridgeResponse>(text.as_str()) {
                    Ok(resp) => match pending.take() {
                        Some((id, reply)) if id == resp.id => {
                            let _ = reply.send(into_result(resp));
                        }
                        other => {
                            tracing::debug!(id = resp.id, "discarding stale response");
                            pending = other;
                        }
                    },
                    Err(e) => tracing::warn!(error = %e, "malformed frame from renderer"),
                },
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
        }
    }
    if let Some((_, reply)) = pending {
        let _ = reply.send(Err(BridgeError::Disconnected));
    }
}

fn into_result(resp: BridgeResponse) -> Result<Value, BridgeError> {
    match (resp.result, resp.error) {
        (_, Some(e)) => Err(BridgeError::Remote(e)),
        (Some(v), None) => Ok(v),
        (None, None) => Err(BridgeError::Protocol(format!("response {} has neither result nor error", resp.id))),
    }
}

impl BridgeHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    pub fn client_state(&self) -> ClientState {
        *self.inner.clients.borrow()
    }

    /// Connections turned away because a client was already active.
    pub fn rejected_clients(&self) -> usize {
        self.inner.rejected.load(Ordering::SeqCst)
    }

    /// Waits for a connected client whose generation is above `after`.
    pub async fn wait_for_client(&self, after: u64, timeout: Duration) -> Result<u64, BridgeError> {
        let mut rx = self.inner.clients.subscribe();
        let wait = async {
            rx.wait_for(|s| s.connected && s.generation > after)
                .await
                .map(|s| s.generation)
        };
        match tokio::time::timeout(timeout, wait).await {
            Ok(Ok(generation)) => Ok(generation),
            _ => Err(BridgeError::NoClient),
        }
    }

    /// Sends one request and waits for its answer.
    pub async fn request(&self, method: Method, payload: Value) -> Result<Value, BridgeError> {
        let _slot = self.inner.in_flight.try_lock().map_err(|_| BridgeError::Busy)?;
        let outbound = self
            .inner
            .active
            .lock()
            .unwrap()
            .as_ref()
            .map(|c| c.outbound.clone())
            .ok_or(BridgeError::NoClient)?;
        let id = self.inner.next_id.fetch_add(1, Ordering::SeqCst) + 1;
        let (reply, rx) = oneshot::channel();
        outbound
            .send(Outbound { request: BridgeRequest { id, method, payload }, reply })
            .map_err(|_| BridgeError::Disconnected)?;
        match tokio::time::timeout(self.inner.timeout, rx).await {
            Err(_) => {
                tracing::warn!(id, ?method, "request timed out");
                Err(BridgeError::Timeout { ms: self.inner.timeout.as_millis() as u64 })
            }
            Ok(Err(_)) => Err(BridgeError::Disconnected),
            Ok(Ok(result)) => result,
        }
    }

    /// Stops accepting clients. Open connections close when their peer does.
    pub fn shutdown(&self) {
        self.accept_task.abort();
        self.inner.active.lock().unwrap().take();
    }
}

impl Drop for BridgeHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}
