use crate::config::RunConfig;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

pub const TOOL_VERSION: &str = concat!("sisde ", env!("CARGO_PKG_VERSION"));

/// What produced an output file: tool version, subcommand and the fully
/// resolved configuration. The hash covers everything except the timestamp.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub tool: &'static str,
    pub command: String,
    pub resolved: String,
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        RunManifest {
            tool: TOOL_VERSION,
            command: command.to_string(),
            resolved: config.render(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    fn body(&self) -> String {
        format!("# tool = {}\n# command = {}\n{}", self.tool, self.command, self.resolved)
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.body().as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// The manifest file: the resolved config as comments-plus-config, so
    /// it can be fed back to `--config`.
    pub fn render(&self) -> String {
        format!("# sha256 = {}\n# timestamp = {}\n{}", self.hash(), self.timestamp, self.body())
    }
}
