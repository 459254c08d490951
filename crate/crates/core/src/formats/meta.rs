use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Sorted string key/value pairs.
pub type Metadata = BTreeMap<String, String>;

/// `FILE` → `FILE.meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// `key=value` lines; blank lines and `#` comments are skipped. Values keep
/// everything after the first `=`.
pub fn parse_key_values(text: &str, what: &'static str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(what, format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::format(what, format!("line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Newlines inside values are flattened to spaces.
pub fn write_key_values<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    entries.into_iter().map(|(k, v)| format!("{k}={}\n", v.replace(['\n', '\r'], " "))).collect()
}

/// Writes the sidecar of the motion file `path`.
pub fn write_meta(path: &Path, meta: &Metadata) -> Result<()> {
    std::fs::write(meta_path(path), write_key_values(meta.iter().map(|(k, v)| (k.as_str(), v.as_str()))))?;
    Ok(())
}

/// Reads the sidecar of the motion file `path`. Duplicate keys are rejected.
pub fn read_meta(path: &Path) -> Result<Metadata> {
    let text = std::fs::read_to_string(meta_path(path))?;
    let mut meta = Metadata::new();
    for (k, v) in parse_key_values(&text, "metadata")? {
        if meta.insert(k.clone(), v).is_some() {
            return Err(Error::format("metadata", format!("duplicate key {k}")));
        }
    }
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_equals_in_values() {
        let kv = parse_key_values("# c\n\na = 1\nb=x=y\n", "test").unwrap();
        assert_eq!(kv, vec![("a".into(), "1".into()), ("b".into(), "x=y".into())]);
        assert!(parse_key_values("novalue\n", "test").is_err());
        assert!(parse_key_values("=3\n", "test").is_err());
    }

    #[test]
    fn meta_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("m.kmot");
        let meta: Metadata = [("level".to_string(), "gji".to_string()), ("text".to_string(), "a\nb".to_string())].into();
        write_meta(&file, &meta).unwrap();
        assert!(dir.path().join("m.kmot.meta").exists());
        let back = read_meta(&file).unwrap();
        assert_eq!(back["level"], "gji");
        assert_eq!(back["text"], "a b");
    }
}
