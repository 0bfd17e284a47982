//! The VWT1 array container: a minimal, language-neutral binary format for
//! every artifact the pipeline persists.
//!
//! Layout, all little-endian: magic `VWT1`, format version u16, payload
//! kind u16, axis count u32, one u64 per axis, dtype tag u16, the row-major
//! payload, and a trailing CRC32 of the payload bytes. Complex data is
//! interleaved re/im pairs.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: [u8; 4] = *b"VWT1";
const VERSION: u16 = 1;

/// What the payload holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum PayloadKind {
    /// Non-negative feature tensor.
    Tensor = 1,
    /// Decomposition fingerprint vector.
    Fingerprint = 2,
    /// Pure-component dictionary matrix.
    Dictionary = 3,
    /// Model checkpoint stream.
    Model = 4,
    /// Raw complex capture cube.
    RawCapture = 5,
}

impl PayloadKind {
    fn from_tag(tag: u16) -> Option<Self> {
        match tag {
            1 => Some(PayloadKind::Tensor),
            2 => Some(PayloadKind::Fingerprint),
            3 => Some(PayloadKind::Dictionary),
            4 => Some(PayloadKind::Model),
            5 => Some(PayloadKind::RawCapture),
            _ => None,
        }
    }
}

/// Element encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Dtype {
    /// One f64 per element.
    F64 = 1,
    /// Interleaved re/im f64 pair per element.
    C64 = 2,
}

impl Dtype {
    fn from_tag(tag: u16) -> Option<Self> {
        match tag {
            1 => Some(Dtype::F64),
            2 => Some(Dtype::C64),
            _ => None,
        }
    }

    /// Stored f64 words per element.
    pub fn words(self) -> u64 {
        match self {
            Dtype::F64 => 1,
            Dtype::C64 => 2,
        }
    }
}

/// Container errors.
#[derive(Debug, thiserror::Error)]
pub enum Vwt1Error {
    /// Filesystem failure, with the path that caused it.
    #[error("{}: {source}", path.display())]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// Leading magic bytes are not `VWT1`.
    #[error("not a VWT1 container")]
    BadMagic,
    /// Unknown format version.
    #[error("unsupported container version {0}")]
    BadVersion(u16),
    /// Unknown payload kind tag.
    #[error("unknown payload kind tag {0}")]
    BadKind(u16),
    /// Unknown dtype tag.
    #[error("unknown dtype tag {0}")]
    BadDtype(u16),
    /// Byte stream ended before the declared content.
    #[error("truncated container: {0}")]
    Truncated(&'static str),
    /// Declared element count disagrees with the payload length.
    #[error("payload holds {actual} f64 words, header declares {declared}")]
    CountMismatch {
        /// Word count implied by the dims and dtype.
        declared: u64,
        /// Word count actually present.
        actual: u64,
    },
    /// Payload checksum failed.
    #[error("payload CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch {
        /// CRC value stored in the file.
        stored: u32,
        /// CRC computed over the payload read.
        computed: u32,
    },
    /// Dims overflow or disagree with the provided values.
    #[error("invalid dims: {0}")]
    BadDims(&'static str),
}

/// One decoded (or to-be-encoded) array artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    /// Payload kind.
    pub kind: PayloadKind,
    /// Axis lengths, row-major.
    pub dims: Vec<u64>,
    /// Element encoding.
    pub dtype: Dtype,
    /// Stored f64 words (re/im interleaved when complex).
    pub values: Vec<f64>,
}

impl Container {
    /// Real-valued container over the given axes.
    pub fn real(kind: PayloadKind, dims: Vec<u64>, values: Vec<f64>) -> Result<Self, Vwt1Error> {
        Self::checked(kind, dims, Dtype::F64, values)
    }

    /// Complex container; `values` interleaves re/im.
    pub fn complex(
        kind: PayloadKind,
        dims: Vec<u64>,
        values: Vec<f64>,
    ) -> Result<Self, Vwt1Error> {
        Self::checked(kind, dims, Dtype::C64, values)
    }

    fn checked(
        kind: PayloadKind,
        dims: Vec<u64>,
        dtype: Dtype,
        values: Vec<f64>,
    ) -> Result<Self, Vwt1Error> {
        let count = element_count(&dims)?;
        let words = count
            .checked_mul(dtype.words())
            .ok_or(Vwt1Error::BadDims("word count overflows"))?;
        if words != values.len() as u64 {
            return Err(Vwt1Error::CountMismatch { declared: words, actual: values.len() as u64 });
        }
        Ok(Container { kind, dims, dtype, values })
    }

    /// Number of logical elements (complex pairs count once).
    pub fn element_count(&self) -> u64 {
        element_count(&self.dims).expect("validated at construction")
    }

    /// Serializes the container.
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload_len = self.values.len() * 8;
        let mut out = Vec::with_capacity(4 + 2 + 2 + 4 + self.dims.len() * 8 + 2 + payload_len + 4);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind as u16).to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(self.dtype as u16).to_le_bytes());
        let payload_start = out.len();
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[payload_start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses and verifies a serialized container.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Vwt1Error> {
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize, what: &'static str| -> Result<&[u8], Vwt1Error> {
            let end = at.checked_add(n).ok_or(Vwt1Error::Truncated(what))?;
            if end > bytes.len() {
                return Err(Vwt1Error::Truncated(what));
            }
            let slice = &bytes[*at..end];
            *at = end;
            Ok(slice)
        };

        if take(&mut at, 4, "magic")? != MAGIC {
            return Err(Vwt1Error::BadMagic);
        }
        let version = u16::from_le_bytes(take(&mut at, 2, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(Vwt1Error::BadVersion(version));
        }
        let kind_tag = u16::from_le_bytes(take(&mut at, 2, "kind")?.try_into().unwrap());
        let kind = PayloadKind::from_tag(kind_tag).ok_or(Vwt1Error::BadKind(kind_tag))?;
        let axes = u32::from_le_bytes(take(&mut at, 4, "axis count")?.try_into().unwrap());
        let mut dims = Vec::with_capacity(axes as usize);
        for _ in 0..axes {
            dims.push(u64::from_le_bytes(take(&mut at, 8, "axis length")?.try_into().unwrap()));
        }
        let dtype_tag = u16::from_le_bytes(take(&mut at, 2, "dtype")?.try_into().unwrap());
        let dtype = Dtype::from_tag(dtype_tag).ok_or(Vwt1Error::BadDtype(dtype_tag))?;

        let count = element_count(&dims)?;
        let words = count
            .checked_mul(dtype.words())
            .ok_or(Vwt1Error::BadDims("word count overflows"))?;
        let payload_bytes = words
            .checked_mul(8)
            .and_then(|n| usize::try_from(n).ok())
            .ok_or(Vwt1Error::BadDims("payload too large for this platform"))?;
        let payload = take(&mut at, payload_bytes, "payload")?;
        let computed = crc32fast::hash(payload);
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let stored = u32::from_le_bytes(take(&mut at, 4, "checksum")?.try_into().unwrap());
        if stored != computed {
            return Err(Vwt1Error::CrcMismatch { stored, computed });
        }
        if at != bytes.len() {
            return Err(Vwt1Error::Truncated("trailing bytes after checksum"));
        }
        Ok(Container { kind, dims, dtype, values })
    }

    /// Writes the container to a file.
    pub fn write(&self, path: &Path) -> Result<(), Vwt1Error> {
        let wrap = |source| Vwt1Error::Io { path: path.to_path_buf(), source };
        let mut file = std::fs::File::create(path).map_err(wrap)?;
        file.write_all(&self.to_bytes()).map_err(wrap)
    }

    /// Reads and verifies a container file.
    pub fn read(path: &Path) -> Result<Self, Vwt1Error> {
        let wrap = |source| Vwt1Error::Io { path: path.to_path_buf(), source };
        let mut bytes = Vec::new();
        std::fs::File::open(path).map_err(wrap)?.read_to_end(&mut bytes).map_err(wrap)?;
        Self::from_bytes(&bytes)
    }
}

fn element_count(dims: &[u64]) -> Result<u64, Vwt1Error> {
    dims.iter().try_fold(1u64, |acc, &d| {
        acc.checked_mul(d).ok_or(Vwt1Error::BadDims("element count overflows"))
    })
}
