use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use iem_core::agent::*;
use serde_json::Value;

struct Seen {
    auth: Option<String>,
    path: String,
    body: Value,
}

/// Serves one canned `(status, body)` per connection, reporting each request.
fn mock(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<Seen>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let (mut len, mut auth) = (0usize, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => auth = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            tx.send(Seen { auth, path, body: serde_json::from_slice(&buf).unwrap() }).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn client(url: &str, retries: u32) -> HttpChatClient {
    let cfg = ChatClientConfig {
        base_url: url.into(),
        model: "tiny".into(),
        max_retries: retries,
        backoff: Duration::from_millis(1),
        timeout: Duration::from_secs(5),
        ..Default::default()
    };
    HttpChatClient::new(cfg).unwrap().with_token(Some("secret".into()))
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"Final Answer: hi"}}]}"#;

#[test]
fn posts_openai_shape_with_bearer() {
    let (url, rx) = mock(vec![(200, OK.into())]);
    let reply = client(&url, 0).complete(&[ChatMessage::system("s"), ChatMessage::user("u")]).unwrap();
    assert_eq!(reply, "Final Answer: hi");
    let seen = rx.recv().unwrap();
    assert_eq!(seen.path, "/v1/chat/completions");
    assert_eq!(seen.auth.as_deref(), Some("Bearer secret"));
    assert_eq!(seen.body["model"], "tiny");
    assert_eq!(seen.body["temperature"], 0.0);
    assert_eq!(seen.body["messages"][1], serde_json::json!({"role": "user", "content": "u"}));
}

#[test]
fn retries_server_errors() {
    let (url, rx) = mock(vec![(503, "busy".into()), (500, "oops".into()), (200, OK.into())]);
    assert_eq!(client(&url, 2).complete(&[ChatMessage::user("u")]).unwrap(), "Final Answer: hi");
    assert_eq!(rx.iter().take(3).count(), 3);
}

#[test]
fn gives_up_after_retries() {
    let (url, _rx) = mock(vec![(500, "a".into()), (500, "b".into())]);
    let err = client(&url, 1).complete(&[ChatMessage::user("u")]).unwrap_err();
    assert!(matches!(err, ClientError::Transport { attempts: 2, .. }), "{err}");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, _rx) = mock(vec![(401, "denied".into())]);
    let err = client(&url, 3).complete(&[ChatMessage::user("u")]).unwrap_err();
    assert!(matches!(err, ClientError::Status { status: 401, .. }), "{err}");
    let (url, _rx) = mock(vec![(200, "{}".into())]);
    assert!(matches!(client(&url, 3).complete(&[]).unwrap_err(), ClientError::BadResponse(_)));
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(&format!("http://127.0.0.1:{port}/v1"), 1).complete(&[]).unwrap_err();
    assert!(matches!(err, ClientError::Transport { attempts: 2, .. }), "{err}");
}
