//! Message counts per (channel, client), used to prove one-shot behavior.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Channel shared by FedOL and the one-shot knowledge baselines.
pub const KNOWLEDGE_CHANNEL: &str = "knowledge";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageCounts {
    /// Client → server messages.
    pub uploads: usize,
    /// Server → client messages.
    pub downloads: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MessageLedger {
    counts: BTreeMap<(String, usize), MessageCounts>,
}

impl MessageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_upload(&mut self, channel: &str, client: usize) {
        self.entry(channel, client).uploads += 1;
    }

    pub fn record_download(&mut self, channel: &str, client: usize) {
        self.entry(channel, client).downloads += 1;
    }

    fn entry(&mut self, channel: &str, client: usize) -> &mut MessageCounts {
        self.counts.entry((channel.to_string(), client)).or_default()
    }

    pub fn counts(&self, channel: &str, client: usize) -> MessageCounts {
        self.counts
            .get(&(channel.to_string(), client))
            .copied()
            .unwrap_or_default()
    }

    pub fn channels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.counts.keys().map(|(c, _)| c.as_str()).collect();
        out.dedup();
        out
    }
}

/// Every client in `clients` sent exactly one message on `channel` and
/// received none. The first offending client is reported.
pub fn one_shot_ledger_check(ledger: &MessageLedger, channel: &str, clients: &[usize]) -> Result<()> {
    for &client in clients {
        let c = ledger.counts(channel, client);
        if c.uploads != 1 || c.downloads != 0 {
            return Err(Error::Ledger {
                channel: channel.to_string(),
                client,
                uploads: c.uploads,
                downloads: c.downloads,
            });
        }
    }
    Ok(())
}
