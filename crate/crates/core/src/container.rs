//! KSEC embedding container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     4 bytes  "KSEC"
//! version   u16      1
//! dtype     u8       1 (f32)
//! dimension u32
//! count     u32
//! ids       count × (u32 byte length, UTF-8 bytes)
//! payload   count × dimension × f32, row-major
//! ```

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"KSEC";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 15;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}, expected \"KSEC\"")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("file truncated: need {needed} bytes, have {actual}")]
    TruncatedFile { needed: usize, actual: usize },
    #[error("{0} unexpected trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("vector {index} has dimension {found}, expected {expected}")]
    RaggedVectors {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{ids} ids for {vectors} vectors")]
    CountMismatch { ids: usize, vectors: usize },
    #[error("id {0} is not valid UTF-8")]
    InvalidId(usize),
    #[error("value too large for the container header: {0}")]
    Overflow(&'static str),
}

pub type Result<T, E = ContainerError> = std::result::Result<T, E>;

/// Ids and row vectors of one container file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingContainer {
    pub dimension: usize,
    pub ids: Vec<String>,
    pub vectors: Vec<Vec<f32>>,
}

impl EmbeddingContainer {
    pub fn new(dimension: usize, ids: Vec<String>, vectors: Vec<Vec<f32>>) -> Result<Self> {
        if ids.len() != vectors.len() {
            return Err(ContainerError::CountMismatch {
                ids: ids.len(),
                vectors: vectors.len(),
            });
        }
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dimension {
                return Err(ContainerError::RaggedVectors {
                    index,
                    expected: dimension,
                    found: v.len(),
                });
            }
        }
        check_unique(&ids)?;
        Ok(Self {
            dimension,
            ids,
            vectors,
        })
    }

    /// Dimension is taken from the first vector (0 when empty).
    pub fn from_rows(ids: Vec<String>, vectors: Vec<Vec<f32>>) -> Result<Self> {
        let dim = vectors.first().map_or(0, Vec::len);
        Self::new(dim, ids, vectors)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim =
            u32::try_from(self.dimension).map_err(|_| ContainerError::Overflow("dimension"))?;
        let count = u32::try_from(self.ids.len()).map_err(|_| ContainerError::Overflow("count"))?;
        let id_bytes: usize = self.ids.iter().map(|s| 4 + s.len()).sum();
        let mut out =
            Vec::with_capacity(HEADER_LEN + id_bytes + 4 * self.dimension * self.ids.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(DTYPE_F32);
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        for id in &self.ids {
            let len = u32::try_from(id.len()).map_err(|_| ContainerError::Overflow("id length"))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        for v in &self.vectors {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(ContainerError::BadMagic(magic));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let dtype = r.take(1)?[0];
        if dtype != DTYPE_F32 {
            return Err(ContainerError::UnsupportedDtype(dtype));
        }
        let dimension = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut ids = Vec::with_capacity(count.min(1 << 20));
        for i in 0..count {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            ids.push(String::from_utf8(raw.to_vec()).map_err(|_| ContainerError::InvalidId(i))?);
        }
        let payload = dimension
            .checked_mul(count)
            .and_then(|n| n.checked_mul(4))
            .ok_or(ContainerError::Overflow("payload size"))?;
        let data = r.take(payload)?;
        if r.pos != bytes.len() {
            return Err(ContainerError::TrailingBytes(bytes.len() - r.pos));
        }
        check_unique(&ids)?;
        let vectors = data
            .chunks_exact(4 * dimension.max(1))
            .take(count)
            .map(|row| {
                row.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                    .collect()
            })
            .collect::<Vec<Vec<f32>>>();
        let vectors = if dimension == 0 {
            vec![Vec::new(); count]
        } else {
            vectors
        };
        Ok(Self {
            dimension,
            ids,
            vectors,
        })
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(ContainerError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .ok_or(ContainerError::Overflow("offset"))?;
        if end > self.bytes.len() {
            return Err(ContainerError::TruncatedFile {
                needed: end,
                actual: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

/// Writes `bytes` to a sibling temp file, fsyncs it and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

pub fn write_container(path: &Path, container: &EmbeddingContainer) -> Result<()> {
    write_atomic(path, &container.to_bytes()?)?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<EmbeddingContainer> {
    EmbeddingContainer::from_bytes(&fs::read(path)?)
}
