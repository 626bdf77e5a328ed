//! Model backends: a scripted replay backend for deterministic runs and a
//! blocking HTTP chat-completions client for live models.
//!
//! # Script files
//!
//! A script is a sequence of entries, each introduced by a header line that
//! starts with `@`. The reply is every following line up to the next header
//! or end of file, with surrounding blank lines trimmed.
//!
//! ```text
//! @manager
//! 1. [browser] Search the population of India | deps: - | output: yes
//!
//! @decision
//! Thought: The address bar is empty.
//! Action: Type (400, 44) [population of india 2024]
//! ```
//!
//! A `when` header followed immediately by an `else` header for the same role
//! forms one conditional entry. It consumes a single call and picks the first
//! reply when the needle occurs in the latest user message, the second
//! otherwise:
//!
//! ```text
//! @decision when NO_CHANGE
//! Action: Shortcut (ctrl+t)
//! @decision else
//! Action: Click (120, 44)
//! ```
//!
//! Roles: `manager`, `progress`, `decision`, `reflection`, `intention`.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Manager,
    Progress,
    Decision,
    Reflection,
    Intention,
}

impl AgentRole {
    pub const ALL: [AgentRole; 5] = [
        AgentRole::Manager,
        AgentRole::Progress,
        AgentRole::Decision,
        AgentRole::Reflection,
        AgentRole::Intention,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Manager => "manager",
            AgentRole::Progress => "progress",
            AgentRole::Decision => "decision",
            AgentRole::Reflection => "reflection",
            AgentRole::Intention => "intention",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown agent role `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

/// Reserved for image-capable backends; nothing in the pipeline emits one yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub media_type: String,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<Attachment>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self::new(MessageRole::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(MessageRole::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(MessageRole::Assistant, content)
    }

    fn new(role: MessageRole, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            attachments: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum BackendError {
    #[error("script exhausted for role {0}")]
    ScriptExhausted(AgentRole),
    #[error("request timed out")]
    Timeout,
    #[error("http status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("empty message list")]
    EmptyRequest,
}

/// Anything that can answer a chat request on behalf of an agent role.
pub trait Backend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], role: AgentRole) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, messages: &[ChatMessage], role: AgentRole) -> Result<String, BackendError> {
        (**self).complete(messages, role)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, messages: &[ChatMessage], role: AgentRole) -> Result<String, BackendError> {
        (**self).complete(messages, role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScriptReply {
    Plain(String),
    Conditional {
        needle: String,
        then: String,
        otherwise: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub role: AgentRole,
    pub reply: ScriptReply,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("reading script: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> ScriptError {
    ScriptError::Parse {
        line,
        message: message.into(),
    }
}

/// Ordered replies, consumed per role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendScript {
    pub entries: Vec<ScriptEntry>,
}

enum Header {
    Plain(AgentRole),
    When(AgentRole, String),
    Else(AgentRole),
}

fn parse_header(line_no: usize, line: &str) -> Result<Header, ScriptError> {
    let body = line[1..].trim();
    let (role_token, rest) = match body.split_once(char::is_whitespace) {
        Some((r, rest)) => (r, rest.trim()),
        None => (body, ""),
    };
    let role: AgentRole = role_token
        .parse()
        .map_err(|e: String| parse_err(line_no, e))?;
    if rest.is_empty() {
        return Ok(Header::Plain(role));
    }
    if rest == "else" {
        return Ok(Header::Else(role));
    }
    match rest.strip_prefix("when") {
        Some(needle) if needle.starts_with(char::is_whitespace) && !needle.trim().is_empty() => {
            Ok(Header::When(role, needle.trim().to_string()))
        }
        _ => Err(parse_err(line_no, format!("unexpected header suffix `{rest}`"))),
    }
}

impl BackendScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        // (header line number, header, body lines)
        let mut blocks: Vec<(usize, Header, Vec<&str>)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.starts_with('@') {
                blocks.push((line_no, parse_header(line_no, line)?, Vec::new()));
            } else if let Some(block) = blocks.last_mut() {
                block.2.push(line);
            } else if !line.trim().is_empty() {
                return Err(parse_err(line_no, "reply text before the first @role header"));
            }
        }

        let mut entries = Vec::new();
        let mut iter = blocks.into_iter().peekable();
        while let Some((line_no, header, body)) = iter.next() {
            let reply = join_reply(&body);
            match header {
                Header::Plain(role) => entries.push(ScriptEntry {
                    role,
                    reply: ScriptReply::Plain(reply),
                }),
                Header::When(role, needle) => match iter.next() {
                    Some((_, Header::Else(else_role), else_body)) if else_role == role => {
                        entries.push(ScriptEntry {
                            role,
                            reply: ScriptReply::Conditional {
                                needle,
                                then: reply,
                                otherwise: join_reply(&else_body),
                            },
                        })
                    }
                    _ => {
                        return Err(parse_err(
                            line_no,
                            format!("`@{role} when` must be followed by `@{role} else`"),
                        ))
                    }
                },
                Header::Else(_) => {
                    return Err(parse_err(line_no, "`else` without a preceding `when`"))
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            match &entry.reply {
                ScriptReply::Plain(text) => {
                    out.push_str(&format!("@{}\n{}\n\n", entry.role, text));
                }
                ScriptReply::Conditional {
                    needle,
                    then,
                    otherwise,
                } => {
                    out.push_str(&format!("@{} when {}\n{}\n\n", entry.role, needle, then));
                    out.push_str(&format!("@{} else\n{}\n\n", entry.role, otherwise));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, role: AgentRole, reply: impl Into<String>) -> &mut Self {
        self.entries.push(ScriptEntry {
            role,
            reply: ScriptReply::Plain(reply.into()),
        });
        self
    }
}

fn join_reply(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty());
    let end = lines.iter().rposition(|l| !l.trim().is_empty());
    match (start, end) {
        (Some(s), Some(e)) => lines[s..=e].join("\n"),
        _ => String::new(),
    }
}

pub fn load_script(path: impl AsRef<Path>) -> Result<BackendScript, ScriptError> {
    BackendScript::parse(&std::fs::read_to_string(path)?)
}

/// A call observed by a [`ScriptedBackend`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedCall {
    pub role: AgentRole,
    pub messages: Vec<ChatMessage>,
}

/// Replays a [`BackendScript`]. Each role has an independent cursor.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queues: Mutex<HashMap<AgentRole, VecDeque<ScriptReply>>>,
    calls: Mutex<Vec<RecordedCall>>,
}

impl ScriptedBackend {
    pub fn new(script: BackendScript) -> Self {
        let mut queues: HashMap<AgentRole, VecDeque<ScriptReply>> = HashMap::new();
        for entry in script.entries {
            queues.entry(entry.role).or_default().push_back(entry.reply);
        }
        Self {
            queues: Mutex::new(queues),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        Ok(Self::new(load_script(path)?))
    }

    pub fn remaining(&self, role: AgentRole) -> usize {
        self.queues
            .lock()
            .unwrap()
            .get(&role)
            .map_or(0, VecDeque::len)
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self, role: AgentRole) -> usize {
        self.calls.lock().unwrap().iter().filter(|c| c.role == role).count()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage], role: AgentRole) -> Result<String, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::EmptyRequest);
        }
        self.calls.lock().unwrap().push(RecordedCall {
            role,
            messages: messages.to_vec(),
        });
        let next = self
            .queues
            .lock()
            .unwrap()
            .get_mut(&role)
            .and_then(VecDeque::pop_front)
            .ok_or(BackendError::ScriptExhausted(role))?;
        Ok(match next {
            ScriptReply::Plain(text) => text,
            ScriptReply::Conditional {
                needle,
                then,
                otherwise,
            } => {
                let latest_user = messages
                    .iter()
                    .rev()
                    .find(|m| m.role == MessageRole::User)
                    .map_or("", |m| m.content.as_str());
                if latest_user.contains(&needle) {
                    then
                } else {
                    otherwise
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            url: "http://localhost:8000/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: 0.0,
            timeout_secs: 120,
        }
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: MessageRole,
    content: &'a str,
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<WireMessage<'a>>,
}

pub const API_KEY_ENV: &str = "AGENT_API_KEY";

/// Chat-completions client. Stateless per call.
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(config: HttpConfig, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    /// Serialized request body. Identical inputs give identical bytes.
    pub fn request_body(&self, messages: &[ChatMessage]) -> Vec<u8> {
        let body = RequestBody {
            model: &self.config.model,
            temperature: self.config.temperature,
            messages: messages
                .iter()
                .map(|m| WireMessage {
                    role: m.role,
                    content: &m.content,
                })
                .collect(),
        };
        serde_json::to_vec(&body).expect("request body serializes")
    }
}

/// Extracts `choices[0].message.content` from a chat-completions response.
pub fn extract_reply(body: &str) -> Result<String, BackendError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| BackendError::MalformedReply(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(serde_json::Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedReply("missing choices[0].message.content".into()))
}

impl Backend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage], role: AgentRole) -> Result<String, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::EmptyRequest);
        }
        tracing::debug!(%role, url = %self.config.url, "chat request");
        let mut request = self
            .client
            .post(&self.config.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(self.request_body(messages));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        let text = response.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            return Err(BackendError::HttpStatus {
                status: status.as_u16(),
                body: text,
            });
        }
        extract_reply(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msgs() -> Vec<ChatMessage> {
        vec![ChatMessage::user("hi")]
    }

    #[test]
    fn scripted_returns_reply_then_exhausts() {
        let mut script = BackendScript::default();
        script.push(AgentRole::Decision, "Action: Stop");
        let backend = ScriptedBackend::new(script);
        assert_eq!(
            backend.complete(&msgs(), AgentRole::Decision).unwrap(),
            "Action: Stop"
        );
        assert_eq!(
            backend.complete(&msgs(), AgentRole::Decision),
            Err(BackendError::ScriptExhausted(AgentRole::Decision))
        );
        assert_eq!(
            backend.complete(&[], AgentRole::Decision),
            Err(BackendError::EmptyRequest)
        );
    }

    #[test]
    fn interleaved_roles_match_per_role_queue_oracle() {
        let roles = [
            AgentRole::Decision,
            AgentRole::Reflection,
            AgentRole::Decision,
            AgentRole::Progress,
            AgentRole::Reflection,
            AgentRole::Decision,
        ];
        let mut script = BackendScript::default();
        let mut oracle: HashMap<AgentRole, VecDeque<String>> = HashMap::new();
        for (i, role) in roles.iter().enumerate() {
            let reply = format!("{role}-{i}");
            script.push(*role, reply.clone());
            oracle.entry(*role).or_default().push_back(reply);
        }
        let backend = ScriptedBackend::new(script);
        let call_order = [
            AgentRole::Reflection,
            AgentRole::Decision,
            AgentRole::Progress,
            AgentRole::Decision,
            AgentRole::Reflection,
            AgentRole::Decision,
        ];
        for role in call_order {
            let expected = oracle.get_mut(&role).unwrap().pop_front().unwrap();
            assert_eq!(backend.complete(&msgs(), role).unwrap(), expected);
        }
        assert_eq!(backend.call_count(AgentRole::Decision), 3);
    }

    #[test]
    fn conditional_entry_checks_latest_user_message() {
        let text = "@decision when NO_CHANGE\nAction: Shortcut (ctrl+t)\n@decision else\nAction: Click (1, 2)\n";
        let script = BackendScript::parse(text).unwrap();
        assert_eq!(script.len(), 1);
        let a = ScriptedBackend::new(script.clone());
        let hit = vec![
            ChatMessage::user("Reflection: NO_CHANGE"),
            ChatMessage::assistant("x"),
        ];
        // assistant messages are not consulted
        assert_eq!(a.complete(&hit, AgentRole::Decision).unwrap(), "Action: Shortcut (ctrl+t)");
        let b = ScriptedBackend::new(script);
        assert_eq!(
            b.complete(&[ChatMessage::user("CORRECT")], AgentRole::Decision).unwrap(),
            "Action: Click (1, 2)"
        );
    }

    #[test]
    fn parses_two_entry_file() {
        let text = "@decision\nThought: go\nAction: Click (1, 2)\n\n@reflection\nCORRECT\n";
        let script = BackendScript::parse(text).unwrap();
        assert_eq!(script.len(), 2);
        assert_eq!(
            script.entries[0].reply,
            ScriptReply::Plain("Thought: go\nAction: Click (1, 2)".into())
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = BackendScript::parse("@decision\nok\n@planner\nx").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 3, .. }), "{err}");
        let err = BackendScript::parse("stray\n@decision\nx").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 1, .. }));
        let err = BackendScript::parse("@decision when X\na\n@progress else\nb").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 1, .. }));
        let err = BackendScript::parse("@decision else\nb").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 1, .. }));
    }

    #[test]
    fn dump_reproduces_file_modulo_whitespace() {
        let text = "@manager\n1. [clock] Set alarm | deps: - | output: no\n\n\n@decision   when NO_CHANGE\nA\n@decision else\n  B\n@progress\nSUMMARY: s\nDONE: yes\n";
        let script = BackendScript::parse(text).unwrap();
        let dumped = script.dump();
        let squash = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
        assert_eq!(squash(&dumped), squash(text));
        assert_eq!(BackendScript::parse(&dumped).unwrap(), script);
    }

    #[test]
    fn request_body_is_reproducible() {
        let backend = HttpBackend::with_api_key(HttpConfig::default(), None).unwrap();
        let messages = vec![ChatMessage::system("sys"), ChatMessage::user("hello \"x\"")];
        let a = backend.request_body(&messages);
        let b = backend.request_body(&messages.clone());
        assert_eq!(a, b);
        assert_eq!(
            String::from_utf8(a).unwrap(),
            r#"{"model":"gpt-4o","temperature":0.0,"messages":[{"role":"system","content":"sys"},{"role":"user","content":"hello \"x\""}]}"#
        );
    }

    #[test]
    fn extracts_first_choice() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"CORRECT"}},{"message":{"content":"no"}}]}"#;
        assert_eq!(extract_reply(body).unwrap(), "CORRECT");
        assert!(matches!(extract_reply("{}"), Err(BackendError::MalformedReply(_))));
        assert!(matches!(extract_reply("nope"), Err(BackendError::MalformedReply(_))));
    }
}
