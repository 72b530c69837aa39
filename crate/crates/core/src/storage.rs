//! Single-file binary serialization for [`Index`].
//!
//! Layout: magic `BFIX1`, a u32 format version, the embedded analyzer config
//! (as JSON bytes), the corpus snapshot id, the doc-id table, then per-field
//! lengths and postings. All integers are little-endian; strings are
//! u32-length-prefixed UTF-8. Field, term, and doc ordering is canonical, so
//! serialization is byte-stable.

use std::io::Write;
use std::path::Path;

use crate::analyzer::AnalyzerConfig;
use crate::error::{Error, Result};
use crate::index::{FieldData, Index};

pub const MAGIC: &[u8; 5] = b"BFIX1";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_index(index: &Index, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    write_u32(&mut buf, FORMAT_VERSION);

    let analyzer_json = serde_json::to_vec(index.analyzer())
        .map_err(|e| Error::Index(format!("serialize analyzer: {e}")))?;
    write_bytes(&mut buf, &analyzer_json);
    write_str(&mut buf, index.snapshot_id());

    write_u32(&mut buf, index.doc_ids().len() as u32);
    for id in index.doc_ids() {
        write_str(&mut buf, id);
    }

    write_u32(&mut buf, index.fields.len() as u32);
    for (name, data) in &index.fields {
        write_str(&mut buf, name);
        write_u32(&mut buf, data.lengths.len() as u32);
        for (doc_idx, len) in &data.lengths {
            write_u32(&mut buf, *doc_idx);
            write_u32(&mut buf, *len);
        }
        write_u32(&mut buf, data.postings.len() as u32);
        for (term, postings) in &data.postings {
            write_str(&mut buf, term);
            write_u32(&mut buf, postings.len() as u32);
            for (doc_idx, tf) in postings {
                write_u32(&mut buf, *doc_idx);
                write_u32(&mut buf, *tf);
            }
        }
    }

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<Index> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };

    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Index(format!(
            "{}: not an index file (bad magic)",
            path.display()
        )));
    }
    let version = r.read_u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Index(format!(
            "{}: unsupported index format version {version}",
            path.display()
        )));
    }

    let analyzer_json = r.read_bytes()?;
    let analyzer: AnalyzerConfig = serde_json::from_slice(&analyzer_json)
        .map_err(|e| Error::Index(format!("{}: embedded analyzer: {e}", path.display())))?;
    let snapshot_id = r.read_string()?;

    let doc_count = r.read_u32()? as usize;
    let mut doc_ids = Vec::with_capacity(doc_count);
    for _ in 0..doc_count {
        doc_ids.push(r.read_string()?);
    }

    let field_count = r.read_u32()? as usize;
    let mut fields = std::collections::BTreeMap::new();
    for _ in 0..field_count {
        let name = r.read_string()?;
        let mut data = FieldData::default();
        let length_count = r.read_u32()? as usize;
        for _ in 0..length_count {
            let doc_idx = r.read_u32()?;
            let len = r.read_u32()?;
            data.lengths.insert(doc_idx, len);
            data.total_tokens += len as u64;
        }
        let term_count = r.read_u32()? as usize;
        for _ in 0..term_count {
            let term = r.read_string()?;
            let posting_count = r.read_u32()? as usize;
            let mut postings = Vec::with_capacity(posting_count);
            for _ in 0..posting_count {
                postings.push((r.read_u32()?, r.read_u32()?));
            }
            data.postings.insert(term, postings);
        }
        fields.insert(name, data);
    }
    if r.pos != bytes.len() {
        return Err(Error::Index(format!(
            "{}: trailing bytes after index payload",
            path.display()
        )));
    }

    Index::from_parts(doc_ids, fields, snapshot_id, analyzer)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn read_exact(&mut self, out: &mut [u8]) -> Result<()> {
        let end = self.pos + out.len();
        if end > self.bytes.len() {
            return Err(Error::Index(format!(
                "{}: truncated index file",
                self.path.display()
            )));
        }
        out.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(())
    }

    fn read_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_bytes(&mut self) -> Result<Vec<u8>> {
        let len = self.read_u32()? as usize;
        let mut b = vec![0u8; len];
        self.read_exact(&mut b)?;
        Ok(b)
    }

    fn read_string(&mut self) -> Result<String> {
        let b = self.read_bytes()?;
        String::from_utf8(b).map_err(|_| {
            Error::Index(format!(
                "{}: invalid UTF-8 in index file",
                self.path.display()
            ))
        })
    }
}

fn write_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn write_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    write_u32(buf, b.len() as u32);
    buf.extend_from_slice(b);
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    write_bytes(buf, s.as_bytes());
}
