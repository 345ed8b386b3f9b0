//! Minimal single-purpose HTTP server for exercising the service clients.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Reply {
    pub fn ok(body: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: body.into(),
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            body: "{}".into(),
        }
    }
}

pub struct MockServer {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
    pub bodies: Arc<Mutex<Vec<serde_json::Value>>>,
    pub auth: Arc<Mutex<Vec<Option<String>>>>,
}

/// Serves every request on a background thread; `handler` sees the request
/// number (from 0) and the parsed JSON body.
pub fn serve<F>(handler: F) -> MockServer
where
    F: Fn(usize, &serde_json::Value) -> Reply + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let auth = Arc::new(Mutex::new(Vec::new()));
    let handler = Arc::new(handler);
    let (h, b, a) = (hits.clone(), bodies.clone(), auth.clone());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let (h, b, a, handler) = (h.clone(), b.clone(), a.clone(), handler.clone());
            std::thread::spawn(move || {
                let _ = handle(stream, &*handler, &h, &b, &a);
            });
        }
    });
    MockServer {
        url,
        hits,
        bodies,
        auth,
    }
}

fn handle<F>(
    mut stream: TcpStream,
    handler: &F,
    hits: &AtomicUsize,
    bodies: &Mutex<Vec<serde_json::Value>>,
    auth: &Mutex<Vec<Option<String>>>,
) -> std::io::Result<()>
where
    F: Fn(usize, &serde_json::Value) -> Reply,
{
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut len = 0usize;
    let mut token = None;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    loop {
        line.clear();
        reader.read_line(&mut line)?;
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            match k.to_ascii_lowercase().as_str() {
                "content-length" => len = v.trim().parse().unwrap_or(0),
                "authorization" => token = Some(v.trim().to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    let json: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    let n = hits.fetch_add(1, Ordering::SeqCst);
    bodies.lock().unwrap().push(json.clone());
    auth.lock().unwrap().push(token);
    let reply = handler(n, &json);
    write!(
        stream,
        "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    )?;
    stream.flush()
}

/// An address nothing listens on.
pub fn dead_endpoint() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}/v1")
}
