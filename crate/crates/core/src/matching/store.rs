use std::io::{Read, Write};
use std::path::Path;

use crate::imaging::Template;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SQSM";
const VERSION: u32 = 1;

/// Append-only store of learned templates sharing one geometry.
///
/// Template `i` always carries source index `i`. Values are held at
/// single precision (the on-disk width), so a store survives a save/load
/// cycle bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateStore {
    rx: usize,
    ry: usize,
    n_p: usize,
    templates: Vec<Template>,
}

impl TemplateStore {
    pub fn new(rx: usize, ry: usize, n_p: usize) -> Result<Self> {
        if rx == 0 || ry == 0 || n_p == 0 || !rx.is_multiple_of(n_p) || !ry.is_multiple_of(n_p) {
            return Err(Error::invalid(format!(
                "template geometry {rx}x{ry} with patch side {n_p}"
            )));
        }
        Ok(Self {
            rx,
            ry,
            n_p,
            templates: Vec::new(),
        })
    }

    pub fn rx(&self) -> usize {
        self.rx
    }

    pub fn ry(&self) -> usize {
        self.ry
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn get(&self, index: usize) -> Option<&Template> {
        self.templates.get(index)
    }

    pub fn matches_geometry(&self, t: &Template) -> bool {
        t.rx() == self.rx && t.ry() == self.ry
    }

    /// Learns `template` as the next entry and returns its index.
    pub fn push(&mut self, template: Template) -> Result<usize> {
        if !self.matches_geometry(&template) {
            return Err(Error::invalid(format!(
                "template is {}x{}, store holds {}x{}",
                template.rx(),
                template.ry(),
                self.rx,
                self.ry
            )));
        }
        let index = self.templates.len();
        let values = template
            .values()
            .iter()
            .map(|&v| f64::from(v as f32))
            .collect();
        self.templates
            .push(Template::new(self.rx, self.ry, values, index)?);
        Ok(index)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for field in [
            VERSION,
            dim_u32(self.rx)?,
            dim_u32(self.ry)?,
            dim_u32(self.n_p)?,
            dim_u32(self.templates.len())?,
        ] {
            w.write_all(&field.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.rx * self.ry * 4);
        for t in &self.templates {
            buf.clear();
            for &v in t.values() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut header = [0u32; 5];
        for field in header.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)
                .map_err(|_| Error::Format("truncated header".into()))?;
            *field = u32::from_le_bytes(b);
        }
        let [version, rx, ry, n_p, count] = header.map(|v| v as usize);
        if version != VERSION as usize {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut store =
            Self::new(rx, ry, n_p).map_err(|e| Error::Format(format!("header: {e}")))?;
        let mut buf = vec![0u8; rx * ry * 4];
        for _ in 0..count {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format("truncated template data".into()))?;
            let values = buf
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
                .collect();
            let index = store.templates.len();
            store.templates.push(Template::new(rx, ry, values, index)?);
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Format("trailing bytes after templates".into()));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn dim_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{v} does not fit the store header")))
}
