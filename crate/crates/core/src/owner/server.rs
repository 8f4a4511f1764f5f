//! HTTP front end for [`Owner::handle_wire`].

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Response, Server};

use super::Owner;
use crate::abe::PairingGroup;

/// Running server. Dropping it without calling [`ServerHandle::shutdown`]
/// leaves the workers running.
pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }

    /// Blocks until the workers exit.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

/// Binds `listen_addr` (port 0 picks a free port) and serves with `workers`
/// threads.
pub fn serve<G: PairingGroup>(
    owner: Arc<Owner<G>>,
    listen_addr: &str,
    workers: usize,
) -> std::io::Result<ServerHandle> {
    let server = Server::http(listen_addr).map_err(std::io::Error::other)?;
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| std::io::Error::other("server is not bound to an IP socket"))?;
    let server = Arc::new(server);
    let workers = (0..workers.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let owner = Arc::clone(&owner);
            std::thread::spawn(move || {
                while let Ok(mut req) = server.recv() {
                    let mut body = Vec::new();
                    let (code, reply) = if *req.method() != Method::Post {
                        (405, br#"{"error":"method"}"#.to_vec())
                    } else if req.as_reader().read_to_end(&mut body).is_err() {
                        (400, br#"{"error":"bad_request"}"#.to_vec())
                    } else {
                        owner.handle_wire(req.url(), &body)
                    };
                    let header = Header::from_bytes("Content-Type", "application/json")
                        .expect("static header");
                    let response = Response::from_data(reply)
                        .with_status_code(code)
                        .with_header(header);
                    if let Err(e) = req.respond(response) {
                        log::warn!("failed to write response: {e}");
                    }
                }
            })
        })
        .collect();
    log::info!("owner listening on {addr}");
    Ok(ServerHandle {
        addr,
        server,
        workers,
    })
}
