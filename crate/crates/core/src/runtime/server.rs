use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use percent_encoding::percent_decode_str;
use thiserror::Error;

use super::dispatch::{handle_event, DispatchTable, Event, HttpRequest, Response};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot listen on {addr}: {message}")]
    Bind { addr: String, message: String },
    #[error("line {line}: malformed event: {message}")]
    MalformedEvent { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A running emulator. Dropping the handle without calling
/// [`ServerHandle::shutdown`] leaves the worker threads running.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        for w in self.workers {
            let _ = w.join();
        }
    }

    /// Blocks until every worker exits.
    pub fn wait(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

fn to_event(req: &mut tiny_http::Request) -> HttpRequest {
    let url = req.url().to_string();
    let (raw_path, raw_query) = url.split_once('?').unwrap_or((&url, ""));
    let path = percent_decode_str(raw_path).decode_utf8_lossy().into_owned();
    let query: BTreeMap<String, String> = form_urlencoded::parse(raw_query.as_bytes()).into_owned().collect();
    let headers = req
        .headers()
        .iter()
        .map(|h| (h.field.as_str().as_str().to_string(), h.value.as_str().to_string()))
        .collect();
    let mut body = String::new();
    let body = match req.as_reader().read_to_string(&mut body) {
        Ok(n) if n > 0 => Some(body),
        _ => None,
    };
    HttpRequest {
        method: req.method().as_str().to_uppercase(),
        path,
        query,
        headers,
        body,
    }
}

fn respond(req: tiny_http::Request, resp: Response) {
    let mut out = tiny_http::Response::from_data(resp.body).with_status_code(resp.status);
    for (k, v) in &resp.headers {
        if let Ok(h) = tiny_http::Header::from_bytes(k.as_bytes(), v.as_bytes()) {
            out.add_header(h);
        }
    }
    let _ = req.respond(out);
}

/// Serves `table` over HTTP/1.1 on `addr` with `workers` threads.
pub fn serve(table: Arc<DispatchTable>, addr: &str, workers: usize) -> Result<ServerHandle, ServerError> {
    let server = tiny_http::Server::http(addr).map_err(|e| ServerError::Bind {
        addr: addr.to_string(),
        message: e.to_string(),
    })?;
    let local = server.server_addr().to_ip().ok_or_else(|| ServerError::Bind {
        addr: addr.to_string(),
        message: "not an IP listener".into(),
    })?;
    let server = Arc::new(server);
    let stop = Arc::new(AtomicBool::new(false));
    let workers = (0..workers.max(1))
        .map(|_| {
            let (server, table, stop) = (server.clone(), table.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match server.recv_timeout(Duration::from_millis(50)) {
                        Ok(Some(mut req)) => {
                            let event = Event::Http(to_event(&mut req));
                            respond(req, handle_event(&event, &table));
                        }
                        Ok(None) => {}
                        Err(_) => std::thread::sleep(Duration::from_millis(10)),
                    }
                }
            })
        })
        .collect();
    Ok(ServerHandle {
        addr: local,
        stop,
        workers,
    })
}

/// Reads newline-delimited JSON events and writes one JSON response per line.
/// Blank lines are skipped.
pub fn run_batch(input: impl BufRead, mut output: impl Write, table: &DispatchTable) -> Result<usize, ServerError> {
    let mut handled = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| ServerError::MalformedEvent {
            line: i + 1,
            message: e.to_string(),
        })?;
        let resp = handle_event(&event, table);
        serde_json::to_writer(&mut output, &resp).map_err(std::io::Error::from)?;
        output.write_all(b"\n")?;
        handled += 1;
    }
    output.flush()?;
    Ok(handled)
}

#[cfg(test)]
mod tests {
    use std::io::{Read, Write};
    use std::net::TcpStream;

    use super::*;
    use crate::dsl::parse_file;
    use crate::runtime::{load_dispatch_table, HandlerRegistry, Value};
    use crate::schema::{build_schema, SchemaConfig, WarmingConfig};

    fn table() -> DispatchTable {
        let src = "@Get(\"/\")\nfun root(): String { return \"Hello world!\" }\n\
                   @Get(\"/echo/{word}\")\nfun echo(word: String, n: Int): String { return word }\n";
        let schema = build_schema(
            &[parse_file(src, "app.kls").unwrap()],
            &SchemaConfig {
                app_name: "t".into(),
                warming: WarmingConfig::default(),
            },
        )
        .unwrap();
        let registry = HandlerRegistry::new()
            .handler("root", |_| Ok(Value::Str("Hello world!".into())))
            .handler("echo", |args| {
                Ok(Value::Str(format!(
                    "{}x{}",
                    args[0].as_str().unwrap(),
                    args[1].as_i64().unwrap()
                )))
            });
        load_dispatch_table(&schema, &registry).unwrap()
    }

    fn http_get(addr: SocketAddr, target: &str) -> String {
        let mut stream = TcpStream::connect(addr).unwrap();
        write!(
            stream,
            "GET {target} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n"
        )
        .unwrap();
        let mut text = String::new();
        stream.read_to_string(&mut text).unwrap();
        text
    }

    #[test]
    fn batch_mode() {
        let input = "{\"type\":\"http\",\"method\":\"GET\",\"path\":\"/\",\"query\":{},\"headers\":{},\"body\":null}\n\
                     \n{\"type\":\"warming\",\"sequence\":0}\n";
        let mut out = Vec::new();
        assert_eq!(run_batch(input.as_bytes(), &mut out, &table()).unwrap(), 2);
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"status\":200,\"headers\":{\"Content-Type\":\"text/plain\"},\"body\":\"Hello world!\"}\n\
             {\"status\":200,\"headers\":{\"Content-Type\":\"text/plain\"},\"body\":\"warm\"}\n"
        );
        assert!(matches!(
            run_batch("{oops".as_bytes(), Vec::new(), &table()),
            Err(ServerError::MalformedEvent { line: 1, .. })
        ));
    }

    #[test]
    fn serves_concurrent_http() {
        let handle = serve(Arc::new(table()), "127.0.0.1:0", 4).unwrap();
        let addr = handle.local_addr();
        let clients: Vec<_> = (0..16)
            .map(|i| std::thread::spawn(move || http_get(addr, &format!("/echo/hi%20there?n={i}"))))
            .collect();
        for (i, c) in clients.into_iter().enumerate() {
            let text = c.join().unwrap();
            assert!(text.starts_with("HTTP/1.1 200"), "{text}");
            assert!(text.ends_with(&format!("hi therex{i}")), "{text}");
        }
        assert!(http_get(addr, "/").ends_with("Hello world!"));
        assert!(http_get(addr, "/nope").starts_with("HTTP/1.1 404"));
        handle.shutdown();
    }

    #[test]
    fn port_in_use() {
        let first = serve(Arc::new(table()), "127.0.0.1:0", 1).unwrap();
        let taken = first.local_addr().to_string();
        assert!(matches!(
            serve(Arc::new(table()), &taken, 1),
            Err(ServerError::Bind { .. })
        ));
        first.shutdown();
    }
}
