//! WebSocket transport for [`LiveSession`]. One task owns the session and
//! runs ticks; connection tasks talk to it only through queues.

use std::future::Future;
use std::time::Duration;

use anyhow::Result;
use futures_util::{SinkExt, StreamExt};
use stage_core::engine::{LiveSession, Outbound, SessionLog};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio_tungstenite::tungstenite::Message;

enum Command {
    Attach { reply: mpsc::UnboundedSender<String> },
    Inbound { text: String, reply: mpsc::UnboundedSender<String> },
    Reject { reason: &'static str, reply: mpsc::UnboundedSender<String> },
}

/// Serves until `shutdown` resolves or `max_ticks` ticks have run, then
/// returns the finished session log.
pub async fn serve(
    listener: TcpListener,
    mut session: LiveSession,
    max_ticks: Option<u64>,
    shutdown: impl Future<Output = ()>,
) -> Result<SessionLog> {
    let (cmd_tx, mut cmd_rx) = mpsc::unbounded_channel::<Command>();
    let (out_tx, _) = broadcast::channel::<String>(4096);

    let accept_out = out_tx.clone();
    let acceptor = tokio::spawn(async move {
        loop {
            match listener.accept().await {
                Ok((stream, peer)) => {
                    log::info!("connection from {peer}");
                    tokio::spawn(connection(stream, cmd_tx.clone(), accept_out.subscribe()));
                }
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
    });

    let period = Duration::from_secs_f64(1.0 / session.engine().config().tick_rate);
    let mut ticker = tokio::time::interval(period);
    tokio::pin!(shutdown);
    let result = loop {
        tokio::select! {
            _ = &mut shutdown => break Ok(()),
            _ = ticker.tick() => {
                if max_ticks.is_some_and(|m| session.next_tick() >= m) {
                    break Ok(());
                }
                match session.step() {
                    Ok(msgs) => {
                        for m in msgs {
                            let _ = out_tx.send(m.to_text());
                        }
                    }
                    Err(e) => break Err(e.into()),
                }
            }
            Some(cmd) = cmd_rx.recv() => handle(&mut session, cmd),
        }
    };
    acceptor.abort();
    result.map(|()| session.finish())
}

fn handle(session: &mut LiveSession, cmd: Command) {
    match cmd {
        Command::Attach { reply } => {
            for m in session.hello() {
                let _ = reply.send(m.to_text());
            }
        }
        Command::Inbound { text, reply } => {
            let m = session.ingest(&text).unwrap_or_else(|e| e);
            if let Outbound::Error { error, .. } = &m {
                log::debug!("rejected message: {error}");
            }
            let _ = reply.send(m.to_text());
        }
        Command::Reject { reason, reply } => {
            let m = Outbound::Error { tick: session.next_tick(), error: reason.to_string() };
            let _ = reply.send(m.to_text());
        }
    }
}

async fn connection(stream: TcpStream, commands: mpsc::UnboundedSender<Command>, mut out: broadcast::Receiver<String>) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    if commands.send(Command::Attach { reply: reply_tx.clone() }).is_err() {
        return;
    }
    loop {
        let outgoing = tokio::select! {
            incoming = source.next() => {
                let cmd = match incoming {
                    Some(Ok(Message::Text(text))) => Command::Inbound { text, reply: reply_tx.clone() },
                    Some(Ok(Message::Binary(_))) => {
                        Command::Reject { reason: "binary messages are not supported", reply: reply_tx.clone() }
                    }
                    Some(Ok(Message::Close(_))) | None => break,
                    Some(Ok(_)) => continue,
                    Some(Err(e)) => {
                        log::debug!("connection error: {e}");
                        break;
                    }
                };
                if commands.send(cmd).is_err() {
                    break;
                }
                continue;
            }
            Some(text) = reply_rx.recv() => text,
            msg = out.recv() => match msg {
                Ok(text) => text,
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("client fell behind by {n} messages");
                    continue;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
        };
        if sink.send(Message::Text(outgoing)).await.is_err() {
            break;
        }
    }
    log::info!("connection closed");
}
