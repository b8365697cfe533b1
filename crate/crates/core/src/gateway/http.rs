//! OpenAI-style chat-completions over HTTP(S).

use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatMessage, GatewayError, SamplingParams, Transport};

pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base: String,
    api_key: String,
}

impl HttpTransport {
    pub fn new(base: &str, api_key: &str, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self {
            client,
            base: base.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
        })
    }

    /// Reads `SLICEGEN_API_KEY` (required) and `SLICEGEN_API_BASE`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let key = std::env::var("SLICEGEN_API_KEY")
            .map_err(|_| GatewayError::Transport("SLICEGEN_API_KEY is not set".into()))?;
        let base = std::env::var("SLICEGEN_API_BASE").unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        Self::new(&base, &key, Duration::from_secs(300))
    }
}

impl Transport for HttpTransport {
    fn send(&self, model: &str, messages: &[ChatMessage], params: &SamplingParams) -> Result<String, GatewayError> {
        let body = json!({
            "model": model,
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_output_tokens,
        });
        let resp = self
            .client
            .post(format!("{}/chat/completions", self.base))
            .bearer_auth(&self.api_key)
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(GatewayError::Provider(text));
        }
        let v: Value = serde_json::from_str(&text).map_err(|_| GatewayError::Provider(text.clone()))?;
        if v.get("error").is_some() {
            return Err(GatewayError::Provider(text));
        }
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or(GatewayError::Provider(text))
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread::JoinHandle;

    use super::*;
    use crate::gateway::Role;

    /// Serves one request with `status` and `body`, returning the raw request.
    fn serve_once(status: &'static str, body: &'static str) -> (String, JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}/v1", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            let reply = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            reader.get_mut().write_all(reply.as_bytes()).unwrap();
            head + &String::from_utf8(buf).unwrap()
        });
        (base, handle)
    }

    fn msgs() -> Vec<ChatMessage> {
        vec![ChatMessage::new(Role::System, "s"), ChatMessage::new(Role::User, "hi")]
    }

    #[test]
    fn posts_chat_completion() {
        let (base, server) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#,
        );
        let t = HttpTransport::new(&base, "sk-test", Duration::from_secs(5)).unwrap();
        let out = t.send("gpt-x", &msgs(), &SamplingParams::top_p(0.5, 64)).unwrap();
        assert_eq!(out, "hello");
        let req = server.join().unwrap();
        assert!(req.starts_with("POST /v1/chat/completions HTTP/1.1"));
        assert!(req.to_ascii_lowercase().contains("authorization: bearer sk-test"));
        let body: Value = serde_json::from_str(req.split("\r\n\r\n").nth(1).unwrap()).unwrap();
        assert_eq!(body["model"], "gpt-x");
        assert_eq!(body["top_p"], 0.5);
        assert_eq!(body["max_tokens"], 64);
        assert_eq!(body["messages"][1]["content"], "hi");
    }

    #[test]
    fn provider_error_is_verbatim() {
        let payload = r#"{"error":{"message":"quota exceeded","type":"insufficient_quota"}}"#;
        let (base, server) = serve_once("429 Too Many Requests", payload);
        let t = HttpTransport::new(&base, "k", Duration::from_secs(5)).unwrap();
        let err = t.send("m", &msgs(), &SamplingParams::greedy(8)).unwrap_err();
        assert_eq!(err, GatewayError::Provider(payload.to_string()));
        server.join().unwrap();
    }

    #[test]
    fn refused_connection_is_a_transport_error() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let t = HttpTransport::new(&format!("http://127.0.0.1:{port}"), "k", Duration::from_secs(2)).unwrap();
        assert!(matches!(
            t.send("m", &msgs(), &SamplingParams::greedy(8)),
            Err(GatewayError::Transport(_))
        ));
    }
}
