use crate::instance::Instance;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

/// Instances held back during one split attempt, up to a fixed capacity.
///
/// On disk the buffer is a sequence of records, each a little-endian `u32`
/// length followed by the CBOR-encoded instance, written and read strictly
/// in order.
#[derive(Debug)]
pub struct InstanceBuffer {
    capacity: usize,
    len: usize,
    store: Store,
}

#[derive(Debug)]
enum Store {
    Memory(Vec<Instance>),
    Disk { path: PathBuf, out: BufWriter<File> },
}

impl InstanceBuffer {
    pub fn in_memory(capacity: usize) -> Self {
        Self {
            capacity,
            len: 0,
            store: Store::Memory(Vec::new()),
        }
    }

    /// A buffer backed by a new file `name` in `dir`.
    pub fn on_disk(capacity: usize, dir: &Path, name: &str) -> io::Result<Self> {
        let path = dir.join(name);
        let out = BufWriter::new(File::create(&path)?);
        Ok(Self {
            capacity,
            len: 0,
            store: Store::Disk { path, out },
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `instance` if there is room. Returns whether it was kept.
    pub fn offer(&mut self, instance: &Instance) -> io::Result<bool> {
        if self.len >= self.capacity {
            return Ok(false);
        }
        match &mut self.store {
            Store::Memory(v) => v.push(instance.clone()),
            Store::Disk { out, .. } => {
                let mut record = Vec::new();
                ciborium::into_writer(instance, &mut record).map_err(io::Error::other)?;
                let len = u32::try_from(record.len()).map_err(io::Error::other)?;
                out.write_all(&len.to_le_bytes())?;
                out.write_all(&record)?;
            }
        }
        self.len += 1;
        Ok(true)
    }

    /// Returns the buffered instances in arrival order and releases the
    /// storage.
    pub fn drain(self) -> io::Result<Vec<Instance>> {
        match self.store {
            Store::Memory(v) => Ok(v),
            Store::Disk { path, out } => {
                drop(out.into_inner().map_err(|e| e.into_error())?);
                let mut input = BufReader::new(File::open(&path)?);
                let mut instances = Vec::with_capacity(self.len);
                let mut len = [0u8; 4];
                let mut record = Vec::new();
                for _ in 0..self.len {
                    input.read_exact(&mut len)?;
                    record.resize(u32::from_le_bytes(len) as usize, 0);
                    input.read_exact(&mut record)?;
                    instances.push(ciborium::from_reader(record.as_slice()).map_err(io::Error::other)?);
                }
                drop(input);
                std::fs::remove_file(&path)?;
                Ok(instances)
            }
        }
    }

    /// Throws the contents away.
    pub fn discard(self) -> io::Result<()> {
        if let Store::Disk { path, out } = self.store {
            drop(out);
            std::fs::remove_file(path)?;
        }
        Ok(())
    }
}
