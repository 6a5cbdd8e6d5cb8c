//! UniProtKB download of the distillation corpus.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seqdata::fasta::{parse_fasta_lenient, write_fasta};

pub const UNIPROT_STREAM_ENDPOINT: &str = "https://rest.uniprot.org/uniprotkb/stream";

/// Environment variable naming a directory for cached downloads.
pub const CACHE_ENV: &str = "SILKFORGE_CACHE";

/// Taxonomy id of Araneae.
pub const ARANEAE_TAXONOMY: u32 = 6893;

/// The human-readable query, e.g.
/// `(taxonomy_id:6893) AND (annotation_score:2 OR annotation_score:3 ...)`.
pub fn uniprot_query(taxonomy_id: u32, annotation_scores: &[u8]) -> String {
    let scores = annotation_scores
        .iter()
        .map(|s| format!("annotation_score:{s}"))
        .collect::<Vec<_>>()
        .join(" OR ");
    if scores.is_empty() {
        format!("(taxonomy_id:{taxonomy_id})")
    } else {
        format!("(taxonomy_id:{taxonomy_id}) AND ({scores})")
    }
}

/// Stream URL with the query left unescaped, as it is usually written down.
pub fn uniprot_url(taxonomy_id: u32, annotation_scores: &[u8]) -> String {
    format!(
        "{UNIPROT_STREAM_ENDPOINT}?compressed=true&format=fasta&query={}",
        uniprot_query(taxonomy_id, annotation_scores)
    )
}

/// Same URL with the query percent-encoded for the wire.
fn request_url(endpoint: &str, taxonomy_id: u32, annotation_scores: &[u8]) -> String {
    let query: String = uniprot_query(taxonomy_id, annotation_scores)
        .bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' | b':' | b'(' | b')' => {
                (b as char).to_string()
            }
            _ => format!("%{b:02X}"),
        })
        .collect();
    format!("{endpoint}?compressed=true&format=fasta&query={query}")
}

/// Outcome of an ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchSummary {
    pub written: usize,
    /// Records dropped for non-standard residues.
    pub skipped: usize,
    pub from_cache: bool,
}

/// Decompress (if gzipped), validate and atomically write a FASTA payload.
pub fn ingest_payload(payload: &[u8], dest: &Path) -> Result<FetchSummary> {
    let text = if payload.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(payload)
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("gzip payload: {e}")))?;
        out
    } else {
        payload.to_vec()
    };
    let (records, rejected) = parse_fasta_lenient(&text)?;
    if records.is_empty() && !rejected.is_empty() {
        return Err(Error::Format("payload contains no valid records".into()));
    }
    let mut buf = Vec::new();
    write_fasta(&mut buf, &records)?;
    write_atomic(dest, &buf)?;
    Ok(FetchSummary { written: records.len(), skipped: rejected.len(), from_cache: false })
}

/// Write `bytes` to a sibling temp file and rename it over `dest`.
pub fn write_atomic(dest: &Path, bytes: &[u8]) -> Result<()> {
    let dir = dest.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = dest
        .file_name()
        .ok_or_else(|| Error::Config(format!("destination '{}' has no file name", dest.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, dest)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn cache_file_for_url(dir: &Path, url: &str) -> PathBuf {
    let digest = Sha256::digest(url.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("uniprot-{}.fasta.gz", &hex[..16]))
}

/// File inside cache directory `dir` that a default-endpoint fetch reads and fills.
pub fn cache_file(dir: &Path, taxonomy_id: u32, annotation_scores: &[u8]) -> PathBuf {
    cache_file_for_url(dir, &request_url(UNIPROT_STREAM_ENDPOINT, taxonomy_id, annotation_scores))
}

fn cache_path(url: &str) -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(|dir| cache_file_for_url(Path::new(&dir), url))
}

fn download(url: &str) -> Result<Vec<u8>> {
    let mut response = ureq::get(url).call().map_err(|e| match e {
        ureq::Error::StatusCode(code) => Error::Network { status: Some(code), message: format!("GET {url}") },
        other => Error::Network { status: None, message: other.to_string() },
    })?;
    response
        .body_mut()
        .with_config()
        .limit(u64::MAX)
        .read_to_vec()
        .map_err(|e| Error::Network { status: None, message: e.to_string() })
}

/// Download from `endpoint` (normally [`UNIPROT_STREAM_ENDPOINT`]), honouring
/// the download cache, and write canonical FASTA to `dest`.
pub fn fetch_uniprot_from(
    endpoint: &str,
    taxonomy_id: u32,
    annotation_scores: &[u8],
    dest: &Path,
) -> Result<FetchSummary> {
    let url = request_url(endpoint, taxonomy_id, annotation_scores);
    let cached = cache_path(&url);
    if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
        let payload = std::fs::read(path)?;
        let mut summary = ingest_payload(&payload, dest)?;
        summary.from_cache = true;
        return Ok(summary);
    }
    let payload = download(&url)?;
    let summary = ingest_payload(&payload, dest)?;
    if let Some(path) = cached {
        write_atomic(&path, &payload)?;
    }
    Ok(summary)
}

pub fn fetch_uniprot(taxonomy_id: u32, annotation_scores: &[u8], dest: &Path) -> Result<FetchSummary> {
    fetch_uniprot_from(UNIPROT_STREAM_ENDPOINT, taxonomy_id, annotation_scores, dest)
}
