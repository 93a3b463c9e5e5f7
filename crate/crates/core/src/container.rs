//! Versioned binary container for models and standalone embeddings, plus
//! the plain-text vocabulary file format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "SWCN"  u32 version  u8 kind (0 = model, 1 = embedding)
//! u32 vocabulary count, per vocabulary:
//!     u8 kind  u64 size  size × (u32 byte length, UTF-8 bytes, u64 frequency)
//! model:
//!     embedding header (base)  u32 tv count  tv count × embedding header
//!     u64 pooling k  u64 class count  f64 dropout
//!     tensors: base W, base b, per tv (W, b, fusion), top W, top b
//! embedding:
//!     embedding header, tensors W, b
//! embedding header: u8 representation  u64 region size  u64 vocab size
//!                   u32 vocabulary index  u64 dim
//! tensor: u64 rows  u64 cols  rows·cols f64, row-major
//! ```
//!
//! Embedding weights are written as their logical `d × n` matrix.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernels::{ColMatrix, DenseMatrix};
use crate::model::{RegionEmbedding, ShallowModel, TvEmbedding};
use crate::text::{RegionSpec, Representation, VocabKind, Vocabulary};

pub const MAGIC: &[u8; 4] = b"SWCN";
pub const VERSION: u32 = 1;

const KIND_MODEL: u8 = 0;
const KIND_EMBEDDING: u8 = 1;

/// A region embedding stored on its own, together with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredEmbedding {
    pub vocab: Vocabulary,
    pub embedding: RegionEmbedding,
}

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.out.write_all(&[v])?)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }

    fn vocab(&mut self, v: &Vocabulary) -> Result<()> {
        self.u8(vocab_kind_tag(v.kind()))?;
        self.u64(v.len() as u64)?;
        for (item, freq) in v.entries() {
            self.u32(item.len() as u32)?;
            self.out.write_all(item.as_bytes())?;
            self.u64(*freq)?;
        }
        Ok(())
    }

    fn header(&mut self, e: &RegionEmbedding) -> Result<()> {
        self.u8(repr_tag(e.spec.representation))?;
        self.u64(e.spec.region_size as u64)?;
        self.u64(e.spec.vocab_size as u64)?;
        self.u32(e.vocab as u32)?;
        self.u64(e.dim() as u64)
    }

    fn tensor(&mut self, rows: usize, cols: usize, values: impl IntoIterator<Item = f64>) -> Result<()> {
        self.u64(rows as u64)?;
        self.u64(cols as u64)?;
        for v in values {
            self.f64(v)?;
        }
        Ok(())
    }

    fn col_matrix(&mut self, m: &ColMatrix) -> Result<()> {
        let (rows, cols) = (m.rows(), m.cols());
        self.tensor(rows, cols, (0..rows).flat_map(|r| (0..cols).map(move |c| m.get(r, c))))
    }

    fn dense(&mut self, m: &DenseMatrix) -> Result<()> {
        self.tensor(m.rows(), m.cols(), m.as_slice().iter().copied())
    }

    fn vector(&mut self, v: &[f64]) -> Result<()> {
        self.tensor(v.len(), 1, v.iter().copied())
    }

    fn embedding_tensors(&mut self, e: &RegionEmbedding) -> Result<()> {
        self.col_matrix(&e.weight)?;
        self.vector(&e.bias)
    }
}

struct Reader<R: Read> {
    input: R,
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Data("truncated container".into())
    } else {
        Error::Io(e)
    }
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.input.read_exact(&mut buf).map_err(truncated)?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Data("size field overflows".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn vocab(&mut self) -> Result<Vocabulary> {
        let kind = match self.u8()? {
            0 => VocabKind::Word,
            1 => VocabKind::Ngram123,
            t => return Err(Error::Data(format!("unknown vocabulary kind {t}"))),
        };
        let n = self.usize()?;
        let mut entries = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = self.u32()? as usize;
            let mut buf = vec![0u8; len];
            self.input.read_exact(&mut buf).map_err(truncated)?;
            let item = String::from_utf8(buf).map_err(|_| Error::Data("vocabulary item is not UTF-8".into()))?;
            entries.push((item, self.u64()?));
        }
        Vocabulary::from_entries(kind, entries)
    }

    fn header(&mut self) -> Result<(RegionSpec, usize, usize)> {
        let repr = match self.u8()? {
            0 => Representation::ConcatOneHot,
            1 => Representation::BowWord,
            2 => Representation::BowNgram123,
            t => return Err(Error::Data(format!("unknown representation {t}"))),
        };
        let p = self.usize()?;
        let v = self.usize()?;
        let vocab = self.u32()? as usize;
        let dim = self.usize()?;
        let spec = RegionSpec::new(repr, p, v).map_err(|e| Error::Data(e.to_string()))?;
        Ok((spec, vocab, dim))
    }

    fn tensor(&mut self, rows: usize, cols: usize) -> Result<Vec<f64>> {
        let (r, c) = (self.usize()?, self.usize()?);
        if (r, c) != (rows, cols) {
            return Err(Error::Data(format!("tensor is {r}x{c}, expected {rows}x{cols}")));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            values.push(self.f64()?);
        }
        Ok(values)
    }

    fn embedding(&mut self, spec: RegionSpec, vocab: usize, dim: usize) -> Result<RegionEmbedding> {
        let w = self.tensor(dim, spec.input_dim())?;
        let weight = ColMatrix::from_row_major(dim, spec.input_dim(), &w)?;
        let bias = self.tensor(dim, 1)?;
        Ok(RegionEmbedding {
            spec,
            vocab,
            weight,
            bias,
        })
    }

    fn dense(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        DenseMatrix::from_vec(rows, cols, self.tensor(rows, cols)?)
    }

    /// Magic, version and kind.
    fn preamble(&mut self) -> Result<u8> {
        let magic = self.bytes::<4>()?;
        if &magic != MAGIC {
            return Err(Error::Data("not a model container (bad magic)".into()));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        self.u8()
    }

    fn vocabs(&mut self) -> Result<Vec<Vocabulary>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.vocab()).collect()
    }
}

fn vocab_kind_tag(k: VocabKind) -> u8 {
    match k {
        VocabKind::Word => 0,
        VocabKind::Ngram123 => 1,
    }
}

fn repr_tag(r: Representation) -> u8 {
    match r {
        Representation::ConcatOneHot => 0,
        Representation::BowWord => 1,
        Representation::BowNgram123 => 2,
    }
}

pub fn write_model<W: Write>(out: W, model: &ShallowModel) -> Result<()> {
    let mut w = Writer { out };
    w.out.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u8(KIND_MODEL)?;
    w.u32(model.vocabs.len() as u32)?;
    for v in &model.vocabs {
        w.vocab(v)?;
    }
    w.header(&model.base)?;
    w.u32(model.tvs.len() as u32)?;
    for tv in &model.tvs {
        w.header(&tv.embedding)?;
    }
    w.u64(model.pooling_k as u64)?;
    w.u64(model.num_classes() as u64)?;
    w.f64(model.dropout)?;
    w.embedding_tensors(&model.base)?;
    for tv in &model.tvs {
        w.embedding_tensors(&tv.embedding)?;
        w.dense(&tv.fusion)?;
    }
    w.dense(&model.top_w)?;
    w.vector(&model.top_b)?;
    w.out.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(input: R) -> Result<ShallowModel> {
    let mut r = Reader { input };
    if r.preamble()? != KIND_MODEL {
        return Err(Error::Data("container holds an embedding, not a model".into()));
    }
    let vocabs = r.vocabs()?;
    let base_header = r.header()?;
    let n_tv = r.u32()? as usize;
    let tv_headers = (0..n_tv).map(|_| r.header()).collect::<Result<Vec<_>>>()?;
    let pooling_k = r.usize()?;
    let classes = r.usize()?;
    let dropout = r.f64()?;
    let (spec, vocab, dim) = base_header;
    let base = r.embedding(spec, vocab, dim)?;
    let mut tvs = Vec::with_capacity(n_tv);
    for (spec, vocab, d_tv) in tv_headers {
        let embedding = r.embedding(spec, vocab, d_tv)?;
        let fusion = r.dense(dim, d_tv)?;
        tvs.push(TvEmbedding { embedding, fusion });
    }
    let top_w = r.dense(classes, dim * pooling_k)?;
    let top_b = r.tensor(classes, 1)?;
    let model = ShallowModel {
        vocabs,
        base,
        tvs,
        pooling_k,
        top_w,
        top_b,
        dropout,
    };
    model.validate().map_err(|e| Error::Data(e.to_string()))?;
    Ok(model)
}

pub fn write_embedding<W: Write>(out: W, stored: &StoredEmbedding) -> Result<()> {
    let mut w = Writer { out };
    w.out.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u8(KIND_EMBEDDING)?;
    w.u32(1)?;
    w.vocab(&stored.vocab)?;
    let mut e = stored.embedding.clone();
    e.vocab = 0;
    w.header(&e)?;
    w.embedding_tensors(&e)?;
    w.out.flush()?;
    Ok(())
}

pub fn read_embedding<R: Read>(input: R) -> Result<StoredEmbedding> {
    let mut r = Reader { input };
    if r.preamble()? != KIND_EMBEDDING {
        return Err(Error::Data("container holds a model, not an embedding".into()));
    }
    let mut vocabs = r.vocabs()?;
    if vocabs.len() != 1 {
        return Err(Error::Data("embedding container must hold exactly one vocabulary".into()));
    }
    let (spec, _, dim) = r.header()?;
    let embedding = r.embedding(spec, 0, dim)?;
    let vocab = vocabs.pop().expect("one vocabulary");
    if vocab.len() != spec.vocab_size || vocab.kind() != spec.representation.vocab_kind() {
        return Err(Error::Data("embedding spec does not match its vocabulary".into()));
    }
    Ok(StoredEmbedding { vocab, embedding })
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .ok_or_else(|| Error::Data(format!("{} is not a file path", path.display())))?;
    tmp.set_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut out = BufWriter::new(File::create(&tmp)?);
        write(&mut out)?;
        out.flush()?;
        out.get_ref().sync_all()?;
        Ok(())
    })();
    match result {
        Ok(()) => Ok(fs::rename(&tmp, path)?),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn save_model(path: &Path, model: &ShallowModel) -> Result<()> {
    write_atomic(path, |w| write_model(w, model))
}

pub fn load_model(path: &Path) -> Result<ShallowModel> {
    read_model(BufReader::new(File::open(path)?))
}

pub fn save_embedding(path: &Path, stored: &StoredEmbedding) -> Result<()> {
    write_atomic(path, |w| write_embedding(w, stored))
}

pub fn load_embedding(path: &Path) -> Result<StoredEmbedding> {
    read_embedding(BufReader::new(File::open(path)?))
}

/// Vocabulary as text: a `kind=<kind>` line, then `item<TAB>frequency` in id order.
pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "kind={}", vocab.kind())?;
        for (item, freq) in vocab.entries() {
            writeln!(w, "{item}\t{freq}")?;
        }
        Ok(())
    })
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let kind = header
        .strip_prefix("kind=")
        .and_then(VocabKind::parse)
        .ok_or(Error::Malformed {
            line: 1,
            message: "expected kind=word or kind=ngram123".into(),
        })?;
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let malformed = |m: &str| Error::Malformed {
            line: i + 2,
            message: m.into(),
        };
        let (item, freq) = line.rsplit_once('\t').ok_or_else(|| malformed("expected item<TAB>frequency"))?;
        let freq = freq.parse().map_err(|_| malformed("bad frequency"))?;
        entries.push((item.to_string(), freq));
    }
    Vocabulary::from_entries(kind, entries)
}
