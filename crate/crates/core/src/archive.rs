//! Result archives: one directory per run, named by a hash of the exact
//! configuration, written atomically (populate a temp directory, then
//! rename). Contents carry no timestamps or machine state, so identical
//! configs produce byte-identical archives.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Run id: first 16 hex characters of the SHA-256 of the canonical config
/// JSON. Any field change changes the id.
pub fn run_id(canonical_config_json: &str) -> String {
    let digest = Sha256::digest(canonical_config_json.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// A file to be placed in the archive, path relative to the run directory.
#[derive(Clone, Debug)]
pub struct ArchiveFile {
    pub rel_path: String,
    pub bytes: Vec<u8>,
}

impl ArchiveFile {
    pub fn new(rel_path: &str, bytes: Vec<u8>) -> Self {
        ArchiveFile { rel_path: rel_path.to_string(), bytes }
    }
}

#[derive(Clone, Debug)]
pub struct ResultArchive {
    pub run_id: String,
    pub dir: PathBuf,
}

/// Write all files under `<out_root>/<run_id>/`, atomically: everything goes
/// into a hidden temp directory first and the final rename publishes it.
/// An existing archive with the same id is replaced (same config, same
/// bytes).
pub fn write_archive(
    out_root: &Path,
    id: &str,
    files: &[ArchiveFile],
) -> io::Result<ResultArchive> {
    fs::create_dir_all(out_root)?;
    let tmp = out_root.join(format!(".tmp-{id}"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    for f in files {
        let dest = tmp.join(&f.rel_path);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&dest, &f.bytes)?;
    }
    let final_dir = out_root.join(id);
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir)?;
    }
    fs::rename(&tmp, &final_dir)?;
    Ok(ResultArchive { run_id: id.to_string(), dir: final_dir })
}

/// Assemble a CSV body from a header and stringified rows. Values are
/// written verbatim (numeric or kebab-case tokens, never containing commas).
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// Shortest-roundtrip decimal for CSV cells (std float formatting).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_id_is_stable_and_sensitive() {
        let a = run_id("{\"x\":1}");
        let b = run_id("{\"x\":1}");
        let c = run_id("{\"x\":2}");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
        assert!(a.chars().all(|ch| ch.is_ascii_hexdigit()));
    }

    #[test]
    fn archive_roundtrip_and_replace() {
        let root = std::env::temp_dir().join(format!("rwre-archive-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&root);
        let files = vec![
            ArchiveFile::new("config.json", b"{}".to_vec()),
            ArchiveFile::new("tables/rows.csv", b"a,b\n1,2\n".to_vec()),
        ];
        let arch = write_archive(&root, "deadbeef00000000", &files).unwrap();
        assert!(arch.dir.join("config.json").exists());
        assert_eq!(fs::read(arch.dir.join("tables/rows.csv")).unwrap(), b"a,b\n1,2\n");
        // Re-writing the same id replaces the directory.
        let files2 = vec![ArchiveFile::new("config.json", b"{ }".to_vec())];
        let arch2 = write_archive(&root, "deadbeef00000000", &files2).unwrap();
        assert_eq!(fs::read(arch2.dir.join("config.json")).unwrap(), b"{ }");
        assert!(!arch2.dir.join("tables/rows.csv").exists());
        fs::remove_dir_all(&root).unwrap();
    }

    #[test]
    fn csv_formatting() {
        let rows = vec![vec!["1".to_string(), fmt_f64(0.5)], vec!["2".to_string(), fmt_f64(f64::INFINITY)]];
        let text = String::from_utf8(csv_bytes(&["idx", "val"], &rows)).unwrap();
        assert_eq!(text, "idx,val\n1,0.5\n2,inf\n");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(1e-12), "0.000000000001");
    }
}
