//! Text and binary file formats: cipher specs, key pools, pool manifests,
//! blobs and bytecode dumps.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use armoury_core::cipher::SpecError;
use armoury_core::mutation::{MutationError, PoolSet};
use armoury_core::packer::PackError;
use armoury_core::{Chunk, CipherKey, CipherSpec, KeyPool, ProtectedBlob};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error(transparent)]
    Pools(#[from] MutationError),
}

fn line_err(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Line { line, reason: reason.into() }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    fs::read(path).map_err(|source| FormatError::Io { path: path.into(), source })
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.into(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    fs::write(path, bytes).map_err(|source| FormatError::Io { path: path.into(), source })
}

/// Accepts `0x`-prefixed hex or plain decimal.
pub fn parse_u64(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16).ok(),
        None => s.replace('_', "").parse().ok(),
    }
}

/// A built-in spec id, or the contents of a spec file when `file` is set.
pub fn load_spec(id: &str, file: Option<&Path>) -> Result<CipherSpec, FormatError> {
    match file {
        Some(path) => Ok(CipherSpec::parse_text(&read_text(path)?)?),
        None => Ok(CipherSpec::from_id(id)?),
    }
}

/// Header line, then one `y1 y2 y3` line of register states per key.
pub fn write_pool<W: Write>(mut out: W, pool: &KeyPool, spec: &CipherSpec) -> io::Result<()> {
    writeln!(out, "# spec={} target=0x{:015X}", pool.spec_id, pool.target.0)?;
    for key in pool.keys() {
        let [y1, y2, y3] = key.parts(spec);
        writeln!(out, "{y1} {y2} {y3}")?;
    }
    out.flush()
}

pub fn pool_to_string(pool: &KeyPool, spec: &CipherSpec) -> String {
    let mut buf = Vec::new();
    write_pool(&mut buf, pool, spec).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Parses a pool file written for `spec`. Every key is re-encoded and
/// checked against the header's target when `verify` is set.
pub fn read_pool<R: BufRead>(input: R, spec: &CipherSpec, verify: bool) -> Result<KeyPool, FormatError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| line_err(1, "empty pool file"))?;
    let header = header.map_err(|e| line_err(1, e.to_string()))?;
    let (id, target) = parse_pool_header(&header).ok_or_else(|| line_err(1, "bad header"))?;
    if id != spec.id() {
        return Err(line_err(1, format!("pool is for spec {id}, not {}", spec.id())));
    }
    let degrees = spec.degrees();
    let mut keys = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| line_err(i + 1, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<u64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| line_err(i + 1, format!("bad number {t:?}"))))
            .collect::<Result<_, _>>()?;
        let parts: [u64; 3] =
            parts.try_into().map_err(|_| line_err(i + 1, "expected three register states"))?;
        if parts.iter().zip(degrees).any(|(&y, d)| y >> d != 0) {
            return Err(line_err(i + 1, "register state wider than its register"));
        }
        let key = CipherKey::from_parts(parts, spec);
        if verify && armoury_core::sco(key, spec) != target {
            return Err(line_err(i + 1, format!("key {key} does not reach the target")));
        }
        keys.push(key);
    }
    Ok(KeyPool::new(target, id, keys))
}

fn parse_pool_header(line: &str) -> Option<(String, Chunk)> {
    let rest = line.strip_prefix('#')?;
    let mut id = None;
    let mut target = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix("spec=") {
            id = Some(v.to_string());
        } else if let Some(v) = field.strip_prefix("target=") {
            target = parse_u64(v).map(Chunk);
        }
    }
    Some((id?, target?))
}

pub fn load_pool(path: &Path, spec: &CipherSpec, verify: bool) -> Result<KeyPool, FormatError> {
    let file = fs::File::open(path).map_err(|source| FormatError::Io { path: path.into(), source })?;
    read_pool(BufReader::new(file), spec, verify)
}

/// `position <pool path>` lines; relative paths are taken from the
/// manifest's directory. Positions must cover `0..n` exactly once.
pub fn load_manifest(path: &Path, spec: &CipherSpec, verify: bool) -> Result<PoolSet, FormatError> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries: Vec<(usize, PathBuf)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (pos, file) = line.split_once(char::is_whitespace).ok_or_else(|| line_err(i + 1, "expected `position path`"))?;
        let pos: usize = pos.parse().map_err(|_| line_err(i + 1, format!("bad position {pos:?}")))?;
        entries.push((pos, base.join(file.trim())));
    }
    entries.sort();
    for (expected, (pos, _)) in entries.iter().enumerate() {
        if *pos != expected {
            return Err(line_err(0, format!("manifest has no pool for position {expected}")));
        }
    }
    let pools = entries
        .iter()
        .map(|(_, p)| load_pool(p, spec, verify))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PoolSet::new(pools)?)
}

/// Writes one pool file per position plus `manifest.txt` into `dir`.
pub fn write_pool_dir(dir: &Path, pools: &[KeyPool], spec: &CipherSpec) -> Result<PathBuf, FormatError> {
    let io = |source| FormatError::Io { path: dir.into(), source };
    fs::create_dir_all(dir).map_err(io)?;
    let mut manifest = String::new();
    for (i, pool) in pools.iter().enumerate() {
        let name = format!("pool-{i:04}.txt");
        write_file(&dir.join(&name), pool_to_string(pool, spec).as_bytes())?;
        manifest.push_str(&format!("{i} {name}\n"));
    }
    let path = dir.join("manifest.txt");
    write_file(&path, manifest.as_bytes())?;
    Ok(path)
}

pub fn load_blob(path: &Path) -> Result<ProtectedBlob, FormatError> {
    Ok(ProtectedBlob::from_bytes(&read_file(path)?)?)
}

/// Five 8-digit hex words per line, one instruction each.
pub fn dump_words(words: &[u32]) -> String {
    let mut out = String::new();
    for ins in words.chunks(5) {
        let line: Vec<String> = ins.iter().map(|w| format!("0x{w:08X}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Inverse of [`dump_words`]; `#` starts a comment and the `0x` prefix is
/// optional.
pub fn parse_dump(text: &str) -> Result<Vec<u32>, FormatError> {
    let mut words = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(line_err(i + 1, format!("expected 5 words, found {}", fields.len())));
        }
        for f in fields {
            let hex = f.strip_prefix("0x").or_else(|| f.strip_prefix("0X")).unwrap_or(f);
            if hex.len() != 8 {
                return Err(line_err(i + 1, format!("word {f:?} is not 8 hex digits")));
            }
            words.push(u32::from_str_radix(hex, 16).map_err(|_| line_err(i + 1, format!("bad word {f:?}")))?);
        }
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_text_round_trip() {
        let spec = CipherSpec::scaled_579();
        let target = armoury_core::sco(CipherKey(0x1_2345), &spec);
        let pool = armoury_core::brute_force_keys(target, &spec).unwrap();
        let text = pool_to_string(&pool, &spec);
        assert!(text.starts_with(&format!("# spec=scaled-579 target=0x{:015X}\n", target.0)));
        assert_eq!(read_pool(text.as_bytes(), &spec, true).unwrap(), pool);
    }

    #[test]
    fn pool_rejects_bad_lines() {
        let spec = CipherSpec::scaled_579();
        let bad = "# spec=scaled-579 target=0x0\n1 2\n";
        assert!(matches!(read_pool(bad.as_bytes(), &spec, false), Err(FormatError::Line { line: 2, .. })));
        let wide = "# spec=scaled-579 target=0x0\n32 0 0\n";
        assert!(read_pool(wide.as_bytes(), &spec, false).is_err());
        let other = "# spec=default-59 target=0x0\n";
        assert!(read_pool(other.as_bytes(), &spec, false).is_err());
        // 1 in R1 alone maps to zero, so it verifies against target 0
        let ok = "# spec=scaled-579 target=0x0\n1 0 0\n";
        assert_eq!(read_pool(ok.as_bytes(), &spec, true).unwrap().len(), 1);
        let wrong = "# spec=scaled-579 target=0x1\n1 0 0\n";
        assert!(read_pool(wrong.as_bytes(), &spec, true).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let words = [0x2F01_0000, 0x0004_0004, 3, 0, 0x89];
        let text = dump_words(&words);
        assert_eq!(text, "0x2F010000 0x00040004 0x00000003 0x00000000 0x00000089\n");
        assert_eq!(parse_dump(&text).unwrap(), words);
        assert_eq!(parse_dump("# c\n2F010000 00040004 00000003 00000000 00000089 # x").unwrap(), words);
        assert!(parse_dump("0x1 0x2 0x3 0x4 0x5").is_err());
        assert!(parse_dump("0x00000001").is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_u64("0x0BC04000000"), Some(0x0BC0_4000_000));
        assert_eq!(parse_u64("42"), Some(42));
        assert_eq!(parse_u64("0xZZ"), None);
    }
}
