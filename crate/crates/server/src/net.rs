/*
Copyright 2026 The telebench Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! The WebSocket service. Each binary WebSocket message carries one
//! `teleop.v1` frame.
//!
//! A single simulation task owns the session and ticks it at 100 Hz.
//! Connection tasks only move bytes, talking to the simulation task through
//! channels.

use std::fs::OpenOptions;
use std::future::Future;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use telebench_core::record::TrialRecord;
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::time::{Instant, MissedTickBehavior};
use tokio_tungstenite::tungstenite::Message as WsMessage;

use crate::protocol::{decode, encode, Envelope, Message};
use crate::session::{Session, SessionConfig, TICK};

pub const DEFAULT_PORT: u16 = 8700;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("cannot write records to {path}: {source}")]
    Records {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub addr: SocketAddr,
    pub session: SessionConfig,
    /// Finished live trials are appended here as JSON lines.
    pub records: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            addr: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)),
            session: SessionConfig::default(),
            records: None,
        }
    }
}

enum Inbound {
    Open { conn: u64, tx: mpsc::UnboundedSender<Vec<u8>> },
    Frame { conn: u64, bytes: Vec<u8> },
    Closed { conn: u64 },
}

pub struct Server {
    listener: TcpListener,
    config: ServerConfig,
}

impl Server {
    pub async fn bind(config: ServerConfig) -> Result<Self, ServerError> {
        let listener = TcpListener::bind(config.addr)
            .await
            .map_err(|source| ServerError::Bind { addr: config.addr, source })?;
        Ok(Server { listener, config })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Serves until `shutdown` resolves or the simulation task fails.
    pub async fn run_until<F: Future<Output = ()>>(self, shutdown: F) -> Result<(), ServerError> {
        let (tx, rx) = mpsc::unbounded_channel();
        let sim = tokio::spawn(simulate(rx, self.config.session, self.config.records));
        let listener = self.listener;
        let accept = async {
            let mut next = 0u64;
            loop {
                match listener.accept().await {
                    Ok((stream, peer)) => {
                        next += 1;
                        log::info!("connection {next} from {peer}");
                        tokio::spawn(connection(stream, next, tx.clone()));
                    }
                    Err(e) => log::warn!("accept failed: {e}"),
                }
            }
        };
        tokio::select! {
            _ = shutdown => Ok(()),
            _ = accept => Ok(()),
            res = sim => res.unwrap_or(Ok(())),
        }
    }

    /// Serves until interrupted.
    pub async fn run(self) -> Result<(), ServerError> {
        self.run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    }
}

async fn connection(stream: TcpStream, conn: u64, sim: mpsc::UnboundedSender<Inbound>) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("connection {conn}: handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Vec<u8>>();
    if sim.send(Inbound::Open { conn, tx }).is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        while let Some(bytes) = rx.recv().await {
            if sink.send(WsMessage::Binary(bytes)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(msg) = source.next().await {
        let bytes = match msg {
            Ok(WsMessage::Binary(b)) => b,
            Ok(WsMessage::Text(t)) => t.into_bytes(),
            Ok(WsMessage::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        if sim.send(Inbound::Frame { conn, bytes }).is_err() {
            break;
        }
    }
    let _ = sim.send(Inbound::Closed { conn });
    writer.abort();
    log::info!("connection {conn} closed");
}

fn append(path: &PathBuf, records: &[TrialRecord]) -> Result<(), ServerError> {
    let err = |source| ServerError::Records { path: path.display().to_string(), source };
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
    for r in records {
        writeln!(f, "{}", r.to_json_line()).map_err(err)?;
    }
    Ok(())
}

fn send(tx: &mpsc::UnboundedSender<Vec<u8>>, out: Vec<Envelope>) {
    for env in out {
        match encode(&env) {
            Ok(bytes) => {
                let _ = tx.send(bytes);
            }
            Err(e) => log::error!("dropping {} message: {e}", env.msg.tag()),
        }
    }
}

async fn simulate(
    mut rx: mpsc::UnboundedReceiver<Inbound>,
    config: SessionConfig,
    records: Option<PathBuf>,
) -> Result<(), ServerError> {
    let mut session = Session::new(1, config);
    let mut client: Option<(u64, mpsc::UnboundedSender<Vec<u8>>)> = None;
    let start = Instant::now();
    let mut clock = tokio::time::interval(Duration::from_secs_f64(TICK));
    clock.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = clock.tick() => {
                let now = start.elapsed().as_secs_f64();
                let out = session.tick(now);
                if let Some((_, tx)) = &client {
                    send(tx, out);
                }
                let done = session.take_records();
                if let (Some(path), false) = (&records, done.is_empty()) {
                    append(path, &done)?;
                }
            }
            inbound = rx.recv() => {
                let Some(inbound) = inbound else { return Ok(()) };
                let now = start.elapsed().as_secs_f64();
                match inbound {
                    Inbound::Open { conn, tx } => {
                        if client.is_some() {
                            let busy = Envelope {
                                seq: 0,
                                msg: Message::Error { message: "another operator is connected".into() },
                            };
                            send(&tx, vec![busy]);
                            continue;
                        }
                        let out = session.connect();
                        send(&tx, out);
                        client = Some((conn, tx));
                    }
                    Inbound::Frame { conn, bytes } => {
                        let Some((id, tx)) = &client else { continue };
                        if *id != conn {
                            continue;
                        }
                        let out = match decode(&bytes) {
                            Ok(env) => session.receive(env, now),
                            Err(e) => session.reject(e.to_string()),
                        };
                        send(tx, out);
                    }
                    Inbound::Closed { conn } => {
                        if client.as_ref().is_some_and(|(id, _)| *id == conn) {
                            client = None;
                            session.disconnect();
                        }
                    }
                }
            }
        }
    }
}
