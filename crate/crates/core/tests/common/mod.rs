#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::TimeZone;
use clawxiv::figsafe::StubProvider;
use clawxiv::manifest::{AuthorKind, Responsibility};
use clawxiv::project::{import_seed, AuthorRef, Project, ProjectMetadata};
use clawxiv::signing::SignerIdentity;
use clawxiv::timefmt::Timestamp;
use sha2::{Digest as _, Sha256};

pub const HUMAN: &str = "Ada Lovelace";
pub const AI: &str = "Lab Assistant";

pub fn pinned() -> Timestamp {
    chrono::Utc.with_ymd_and_hms(2025, 3, 1, 12, 0, 0).unwrap()
}

pub fn write_png(path: &Path, w: u32, h: u32, seed: u32) {
    let img = image::RgbImage::from_fn(w, h, |x, y| {
        let v = x.wrapping_mul(2654435761).wrapping_add(y.wrapping_mul(40503)).wrapping_add(seed);
        image::Rgb([(v >> 3) as u8, (v >> 11) as u8, (v >> 19) as u8])
    });
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).unwrap();
    }
    img.save(path).unwrap();
}

pub fn write_seed(dir: &Path) {
    fs::create_dir_all(dir.join("fig")).unwrap();
    fs::write(dir.join("main.tex"), "\\documentclass{article}\n\\begin{document}Hi\\end{document}\n").unwrap();
    fs::write(dir.join("refs.bib"), "@misc{a, title={A}}\n").unwrap();
    fs::write(dir.join("fig/plot.svg"), "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n").unwrap();
    write_png(&dir.join("fig/icon.png"), 120, 80, 1);
}

pub fn authors() -> Vec<AuthorRef> {
    vec![
        AuthorRef::new(AuthorKind::Human, Responsibility::Corresponding, HUMAN),
        AuthorRef::new(AuthorKind::Ai, Responsibility::Contributor, AI),
    ]
}

pub fn signers() -> [SignerIdentity; 2] {
    [
        SignerIdentity::human(HUMAN),
        SignerIdentity::ai(AI, "example-model", "Example Labs", "2025-01"),
    ]
}

/// Fresh project imported from the standard seed, under `tmp/project`.
pub fn fixture_project(tmp: &Path) -> Project {
    let seed = tmp.join("seed");
    write_seed(&seed);
    let meta = ProjectMetadata {
        title: "Fixture Paper".into(),
        authors: authors(),
        ..Default::default()
    };
    import_seed(&seed, &tmp.join("project"), meta, &StubProvider).unwrap()
}

pub fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

pub fn all_files(dir: &Path) -> Vec<PathBuf> {
    let mut v = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                v.push(p);
            }
        }
    }
    v.sort();
    v
}

/// Localhost stand-in for a content-addressed gateway: `POST /` stores the
/// body and answers with its SHA-256, `GET /<id>` returns it.
pub struct TestGateway {
    pub url: String,
    pub store: Arc<Mutex<HashMap<String, Vec<u8>>>>,
}

impl TestGateway {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let store: Arc<Mutex<HashMap<String, Vec<u8>>>> = Arc::default();
        let shared = store.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let store = shared.clone();
                std::thread::spawn(move || serve(stream, &store));
            }
        });
        TestGateway { url, store }
    }
}

fn serve(stream: TcpStream, store: &Mutex<HashMap<String, Vec<u8>>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("/").to_string();
    let mut len = 0usize;
    let mut chunked = false;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        let lower = h.to_ascii_lowercase();
        if let Some(v) = lower.strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        if lower.starts_with("transfer-encoding:") && lower.contains("chunked") {
            chunked = true;
        }
    }
    let mut body = Vec::new();
    if chunked {
        loop {
            let mut size = String::new();
            reader.read_line(&mut size).unwrap();
            let n = usize::from_str_radix(size.trim(), 16).unwrap();
            let mut chunk = vec![0; n + 2];
            reader.read_exact(&mut chunk).unwrap();
            if n == 0 {
                break;
            }
            body.extend_from_slice(&chunk[..n]);
        }
    } else {
        body.resize(len, 0);
        reader.read_exact(&mut body).unwrap();
    }
    let (status, payload) = match method.as_str() {
        "POST" => {
            let id = hex::encode(Sha256::digest(&body));
            store.lock().unwrap().insert(id.clone(), body);
            ("200 OK", format!("{id}\nstored\n").into_bytes())
        }
        "GET" => match store.lock().unwrap().get(path.trim_start_matches('/')) {
            Some(b) => ("200 OK", b.clone()),
            None => ("404 Not Found", b"not found".to_vec()),
        },
        _ => ("405 Method Not Allowed", Vec::new()),
    };
    let mut w = stream;
    let _ = write!(w, "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", payload.len());
    let _ = w.write_all(&payload);
}
