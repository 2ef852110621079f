//! Deployment files: one `<pid> <host:port>` line per process.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::net::{SocketAddr, ToSocketAddrs};

use crate::error::{Error, Result};
use crate::types::ProcessId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    addrs: Vec<SocketAddr>,
}

impl Registry {
    pub fn new(addrs: Vec<SocketAddr>) -> Result<Self> {
        let distinct: BTreeSet<_> = addrs.iter().collect();
        if distinct.len() != addrs.len() {
            return Err(Error::invalid("deployment repeats an address"));
        }
        Ok(Registry { addrs })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::invalid(format!("deployment line {}: {msg}", i + 1));
            let mut toks = line.split_whitespace();
            let pid: ProcessId = toks.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad process id"))?;
            let addr = toks.next().ok_or_else(|| bad("missing address"))?;
            if toks.next().is_some() {
                return Err(bad("trailing text"));
            }
            let addr = addr
                .to_socket_addrs()
                .ok()
                .and_then(|mut a| a.next())
                .ok_or_else(|| bad("unresolvable address"))?;
            if entries.insert(pid, addr).is_some() {
                return Err(bad("duplicate process id"));
            }
        }
        if entries.keys().copied().ne(0..entries.len()) {
            return Err(Error::invalid("deployment must list processes 0..n-1"));
        }
        Registry::new(entries.into_values().collect())
    }

    pub fn render(&self) -> String {
        self.addrs.iter().enumerate().map(|(p, a)| format!("{p} {a}\n")).collect()
    }

    pub fn addr(&self, p: ProcessId) -> SocketAddr {
        self.addrs[p]
    }

    pub fn len(&self) -> usize {
        self.addrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.addrs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_renders() {
        let r = Registry::parse("# two\n1 127.0.0.1:9001\n0 127.0.0.1:9000\n").unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.addr(0).port(), 9000);
        assert_eq!(Registry::parse(&r.render()).unwrap(), r);
    }

    #[test]
    fn rejects_gaps_and_duplicates() {
        assert!(Registry::parse("0 127.0.0.1:9000\n2 127.0.0.1:9002\n").is_err());
        assert!(Registry::parse("0 127.0.0.1:9000\n1 127.0.0.1:9000\n").is_err());
        assert!(Registry::parse("0 127.0.0.1:9000\n0 127.0.0.1:9001\n").is_err());
        assert!(Registry::parse("0 nowhere\n").is_err());
    }
}
