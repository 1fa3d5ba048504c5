//! Little-endian binary encoding shared by the library file formats.

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::param::{Extent, Param, ParamBox};
use crate::problem::ProblemKind;
use crate::rb::ReducedModel;

pub(crate) const CHECKSUM_LEN: usize = 32;

#[derive(Default)]
pub(crate) struct Writer(pub Vec<u8>);

impl Writer {
    pub fn bytes(&mut self, v: &[u8]) {
        self.0.extend_from_slice(v);
    }
    pub fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    pub fn u32(&mut self, v: usize) {
        self.0
            .extend_from_slice(&u32::try_from(v).expect("count fits in u32").to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for &v in vs {
            self.f64(v);
        }
    }
    pub fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    pub fn bits(&mut self, bits: &[bool]) {
        self.u32(bits.len());
        self.0.extend(bits.iter().map(|&b| b as u8));
    }

    pub fn root_box(&mut self, b: &ParamBox) {
        self.u32(b.dim());
        for e in b.axes() {
            let (tag, lower, upper) = match *e {
                Extent::Free { lower, upper } => (0, lower, upper),
                Extent::Frozen(v) => (1, v, v),
            };
            self.u8(tag);
            self.f64(lower);
            self.f64(upper);
        }
    }

    /// `n`, selected parameters, `Zᵀ A_q Z` and `Zᵀ F_q` row-major, then
    /// the residual factor columns.
    pub fn model(&mut self, model: &ReducedModel, selected: &[Param]) {
        self.u32(model.dim());
        for mu in selected {
            self.f64s(mu);
        }
        for a in &model.reduced_a {
            self.f64s(a.transpose().iter());
        }
        for f in &model.reduced_f {
            self.f64s(f.iter());
        }
        for col in &model.factor {
            self.u32(col.len());
            self.f64s(col);
        }
    }

    /// Appends the SHA-256 of everything written so far.
    pub fn finish(mut self) -> Vec<u8> {
        let digest = Sha256::digest(&self.0);
        self.0.extend_from_slice(&digest);
        self.0
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn at(data: &'a [u8], pos: usize) -> Self {
        Self { data, pos }
    }
    pub fn is_done(&self) -> bool {
        self.pos == self.data.len()
    }
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let out = self.data.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(out)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    /// `count` reals; counts beyond the remaining input fail before any
    /// allocation.
    pub fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or(Error::Truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Format("descriptor is not UTF-8".into()))
    }
    pub fn bits(&mut self) -> Result<Vec<bool>> {
        let n = self.u32()?;
        Ok(self.take(n)?.iter().map(|&b| b != 0).collect())
    }

    /// Reads a root box and checks it against the problem's domain.
    pub fn root_box(&mut self, kind: &ProblemKind) -> Result<ParamBox> {
        let d = self.u32()?;
        let mut axes = Vec::new();
        for _ in 0..d {
            let tag = self.u8()?;
            let (a, b) = (self.f64()?, self.f64()?);
            axes.push(match tag {
                0 => Extent::Free { lower: a, upper: b },
                1 => Extent::Frozen(a),
                t => return Err(Error::Format(format!("unknown axis tag {t}"))),
            });
        }
        let root = ParamBox::new(axes)?;
        if root != kind.domain() {
            return Err(Error::Format(
                "root box does not match the problem's parameter domain".into(),
            ));
        }
        Ok(root)
    }

    pub fn model(&mut self, q_a: usize, q_f: usize, d: usize) -> Result<(ReducedModel, Vec<Param>)> {
        let n = self.u32()?;
        let selected = self
            .f64s(n.checked_mul(d).ok_or(Error::Truncated)?)?
            .chunks(d.max(1))
            .map(<[f64]>::to_vec)
            .collect();
        let mut reduced_a = Vec::with_capacity(q_a);
        for _ in 0..q_a {
            reduced_a.push(DMatrix::from_row_slice(n, n, &self.f64s(n * n)?));
        }
        let mut reduced_f = Vec::with_capacity(q_f);
        for _ in 0..q_f {
            reduced_f.push(DVector::from_vec(self.f64s(n)?));
        }
        let mut factor = Vec::new();
        for _ in 0..q_f + n * q_a {
            let len = self.u32()?;
            factor.push(self.f64s(len)?);
        }
        let gram = ReducedModel::gram_from_factor(&factor);
        let model = ReducedModel {
            q_a,
            q_f,
            reduced_a,
            reduced_f,
            factor,
            gram,
        };
        Ok((model, selected))
    }
}

/// Checks magic and version, then parses the body and verifies the
/// trailing checksum.
pub(crate) fn decode<T>(
    data: &[u8],
    magic: &[u8; 4],
    version: u32,
    parse: impl FnOnce(Reader<'_>) -> Result<T>,
) -> Result<T> {
    if data.len() < 8 {
        return Err(Error::Truncated);
    }
    if &data[..4] != magic {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let found = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if found != version {
        return Err(Error::VersionMismatch {
            found,
            expected: version,
        });
    }
    let body_len = data.len().checked_sub(CHECKSUM_LEN).ok_or(Error::Truncated)?;
    let (body, checksum) = data.split_at(body_len.max(8));
    let parsed = parse(Reader::at(body, 8));
    if Sha256::digest(body).as_slice() != checksum {
        // a short file fails the checksum as well; report the truncation
        return Err(match parsed {
            Err(Error::Truncated) => Error::Truncated,
            _ => Error::ChecksumMismatch,
        });
    }
    parsed
}

/// Writes magic and version.
pub(crate) fn header(magic: &[u8; 4], version: u32) -> Writer {
    let mut w = Writer::default();
    w.bytes(magic);
    w.bytes(&version.to_le_bytes());
    w
}
