//! Messages of the line-delimited subprocess protocol.
//!
//! Each message is one line of UTF-8 JSON tagged by `msg`; key order is
//! irrelevant, unknown message kinds and unknown keys are rejected.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "msg", rename_all = "lowercase", deny_unknown_fields)]
pub enum Message {
    Hello {
        protocol: u32,
        component: String,
        version: String,
    },
    Invoke {
        params: Map<String, Json>,
        inputs: Map<String, Json>,
    },
    Result {
        outputs: Map<String, Json>,
    },
    Error {
        code: String,
        detail: String,
    },
    Close {},
}

impl Message {
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("messages always serialize");
        line.push('\n');
        line
    }

    pub fn parse(line: &str) -> Result<Message, serde_json::Error> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n']))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Invoke { .. } => "invoke",
            Message::Result { .. } => "result",
            Message::Error { .. } => "error",
            Message::Close {} => "close",
        }
    }
}
