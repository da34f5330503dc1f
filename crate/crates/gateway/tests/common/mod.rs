#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use srcpref_core::conflict::ConflictPair;
use srcpref_core::entity::{parse_seed_line, AttributeValue, ValueKind};
use srcpref_core::lexicon::{Lexicon, SAMPLE_ENTITIES};
use srcpref_core::prompt::{build_conflict_probe, AnswerTokens, ContextSpec, InstructionVariant, ProbeInstance, ProbeOrder};
use srcpref_core::sources::{SourceSpec, SourceType};

pub fn pair() -> (Lexicon, ConflictPair) {
    let lx = Lexicon::builtin();
    let e = parse_seed_line(SAMPLE_ENTITIES.lines().next().unwrap(), &lx.attributes).unwrap();
    let v = AttributeValue::new(ValueKind::ExactDate, "1987-08-14").unwrap();
    let p = ConflictPair::from_replacement("p0", &e, "date_of_birth", v).unwrap();
    (lx, p)
}

pub fn gov() -> SourceSpec {
    SourceSpec::verbatim(SourceType::Government, "Civil Registry of Silverbine Heights")
}

pub fn social() -> SourceSpec {
    SourceSpec::verbatim(SourceType::SocialMedia, "@AthleticStub3286")
}

pub fn probe(ctx: &ContextSpec, order: ProbeOrder) -> ProbeInstance {
    let (lx, p) = pair();
    build_conflict_probe(&p, ctx, &lx.questions, InstructionVariant::Default, order, AnswerTokens::AB).unwrap()
}

pub fn probes() -> Vec<ProbeInstance> {
    let (_, p) = pair();
    let mut out = Vec::new();
    for ctx in [
        ContextSpec::pair(&p, Some(&gov()), Some(&social())),
        ContextSpec::pair(&p, Some(&social()), Some(&gov())),
        ContextSpec::pair(&p, Some(&SourceSpec::none()), Some(&SourceSpec::none())),
        ContextSpec::repetition(&p, Some(&social()), Some(&gov())).unwrap(),
    ] {
        for order in ProbeOrder::all(ctx.layout) {
            out.push(probe(&ctx, order));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub path: String,
    pub headers: Vec<String>,
    pub body: String,
}

/// Serves scripted `(status, body)` responses in order, repeating the last
/// one, and records every request.
pub struct ScriptedServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
}

impl ScriptedServer {
    pub fn start(script: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        thread::spawn(move || {
            let mut i = 0;
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let path = line.split_whitespace().nth(1).unwrap_or_default().to_string();
                let mut headers = Vec::new();
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end().to_string();
                    if h.is_empty() {
                        break;
                    }
                    if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    headers.push(h);
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                log.lock().unwrap().push(Recorded { path, headers, body: String::from_utf8(body).unwrap() });
                let (status, resp) = script[i.min(script.len() - 1)].clone();
                i += 1;
                let msg = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{resp}",
                    resp.len()
                );
                stream.write_all(msg.as_bytes()).unwrap();
            }
        });
        Self { url, requests }
    }
}

pub fn chat_logprobs(entries: &[(&str, f64)]) -> String {
    let top: Vec<serde_json::Value> =
        entries.iter().map(|(t, p)| serde_json::json!({"token": t, "logprob": p.ln()})).collect();
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": entries[0].0},
                     "logprobs": {"content": [{"token": entries[0].0, "logprob": entries[0].1.ln(), "top_logprobs": top}]}}]
    })
    .to_string()
}
