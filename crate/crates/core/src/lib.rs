//! Tool-retrieval-augmented agent engine: tool registry, sparse and dense
//! tool retrieval, model gateway, iterative agent loop, tool execution
//! against drug-label APIs, and the benchmark harness.

pub mod agent;
pub mod clock;
pub mod eval;
pub mod executor;
pub mod fingerprint;
pub mod http;
pub mod llm;
pub mod registry;
pub mod retrieval;
