//! shellrig — a desk-scale runtime and evaluation harness for terminal-based
//! enterprise automation agents.
//!
//! The crate wires together six subsystems:
//!
//! - [`provider`] — pluggable model backends: a deterministic scripted
//!   provider for reproducible runs, a generic HTTP chat-completions client,
//!   and exact token/cost accounting.
//! - [`sandbox`] — shell execution in an isolated working directory with
//!   timeouts, output truncation, env injection, and a read-only HTTP policy.
//! - [`skills`] — persistent, file-backed procedural memory with a
//!   verified/unverified lifecycle and growth statistics.
//! - [`platform`] — an embedded mock enterprise platform: HTTP table CRUD,
//!   a ServiceNow-style query grammar, schema introspection, auth gating,
//!   and snapshot/reset.
//! - [`agent`] — the episode engine: prompt assembly, the
//!   reason–execute–observe loop, a curated tool registry, and
//!   planner–executor orchestration.
//! - [`harness`] — the benchmark runner: task suites with declarative state
//!   validators, an eleven-label tool-call outcome taxonomy, success-rate
//!   statistics, and deterministic reports.
//!
//! The `shellrig` binary exposes all of it as a CLI (`platform serve`,
//! `bench run`, `trace show`, `analyze`).

pub mod agent;
pub mod cli;
pub mod harness;
pub mod platform;
pub mod provider;
pub mod sandbox;
pub mod skills;

pub use provider::{
    compute_cost, ChatMessage, Cost, ModelTurn, PricingTable, Provider, Role, ScriptedProvider,
    TokenUsage, ToolInvocation, ToolSchema, TurnScript,
};
