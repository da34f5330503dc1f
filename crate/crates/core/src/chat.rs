use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// One role-tagged prompt segment. Model-specific chat templates are applied
/// downstream by the gateway.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

/// Local chat templates for completion-style endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatTemplate {
    ChatMl,
    Llama3,
    Gemma3,
    Olmo2,
}

impl ChatTemplate {
    /// Renders the conversation followed by the assistant generation prompt.
    pub fn render(&self, messages: &[ChatMessage]) -> String {
        let mut out = String::new();
        match self {
            ChatTemplate::ChatMl => {
                for m in messages {
                    out.push_str(&format!("<|im_start|>{}\n{}<|im_end|>\n", m.role.as_str(), m.content));
                }
                out.push_str("<|im_start|>assistant\n");
            }
            ChatTemplate::Llama3 => {
                out.push_str("<|begin_of_text|>");
                for m in messages {
                    out.push_str(&format!(
                        "<|start_header_id|>{}<|end_header_id|>\n\n{}<|eot_id|>",
                        m.role.as_str(),
                        m.content
                    ));
                }
                out.push_str("<|start_header_id|>assistant<|end_header_id|>\n\n");
            }
            ChatTemplate::Gemma3 => {
                // No system role: the system text opens the first user turn.
                out.push_str("<bos>");
                let mut pending_system: Option<&str> = None;
                for m in messages {
                    match m.role {
                        Role::System => pending_system = Some(&m.content),
                        Role::User => {
                            let body = match pending_system.take() {
                                Some(s) => format!("{s}\n\n{}", m.content),
                                None => m.content.clone(),
                            };
                            out.push_str(&format!("<start_of_turn>user\n{body}<end_of_turn>\n"));
                        }
                        Role::Assistant => {
                            out.push_str(&format!("<start_of_turn>model\n{}<end_of_turn>\n", m.content))
                        }
                    }
                }
                out.push_str("<start_of_turn>model\n");
            }
            ChatTemplate::Olmo2 => {
                out.push_str("<|endoftext|>");
                for m in messages {
                    out.push_str(&format!("<|{}|>\n{}\n", m.role.as_str(), m.content));
                }
                out.push_str("<|assistant|>\n");
            }
        }
        out
    }
}

impl std::str::FromStr for ChatTemplate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "chatml" | "qwen" => Ok(ChatTemplate::ChatMl),
            "llama3" => Ok(ChatTemplate::Llama3),
            "gemma3" => Ok(ChatTemplate::Gemma3),
            "olmo2" => Ok(ChatTemplate::Olmo2),
            other => Err(format!("unknown chat template `{other}`")),
        }
    }
}
