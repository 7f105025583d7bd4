use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// `#`-prefixed metadata lines, one `key: json` pair each, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new() -> Self {
        let mut h = Header::default();
        h.entries.push(("code_version".into(), format!("\"blochkit {}\"", env!("CARGO_PKG_VERSION"))));
        h
    }

    pub fn add<T: Serialize + ?Sized>(&mut self, key: &str, value: &T) -> Result<&mut Self> {
        self.entries.push((key.into(), serde_json::to_string(value)?));
        Ok(self)
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

pub fn write_header<W: Write>(mut w: W, header: &Header) -> Result<()> {
    for (k, v) in &header.entries {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}
