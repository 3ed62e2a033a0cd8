//! HTTP gateway for chat-completions-compatible backends: a blocking
//! client with bounded retries, the shipped prompt templates, and a live
//! judge that plugs into the selection pipeline in place of the simulated
//! one.

pub mod client;
pub mod live;
pub mod templates;

pub use client::{GatewayClient, GatewayConfig, GatewayError};
pub use live::{try_parse_dual_ratings, LiveJudge, PARSE_RETRIES_DEFAULT};
pub use templates::{
    render_prompt, template_overhead_tokens, TemplateError, TemplateId, TemplateSet,
};
