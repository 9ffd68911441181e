//! Versioned binary checkpoint format for trees: an 8-byte magic, a
//! little-endian `u16` format version, then the tree as CBOR.

use super::node::Tree;
use super::TreeError;
use std::io::{Read, Write};

pub const MAGIC: &[u8; 8] = b"VHTTREE\0";
pub const VERSION: u16 = 1;

pub fn encode<W: Write>(tree: &Tree, mut out: W) -> Result<(), TreeError> {
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    ciborium::into_writer(tree, out).map_err(|e| TreeError::Codec(e.to_string()))
}

pub fn decode<R: Read>(mut input: R) -> Result<Tree, TreeError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(TreeError::Codec("not a tree checkpoint".into()));
    }
    let mut version = [0u8; 2];
    input.read_exact(&mut version).map_err(io)?;
    let version = u16::from_le_bytes(version);
    if version != VERSION {
        return Err(TreeError::Codec(format!("unsupported format version {version}")));
    }
    let mut tree: Tree = ciborium::from_reader(input).map_err(|e| TreeError::Codec(e.to_string()))?;
    tree.rebuild_index();
    Ok(tree)
}

pub fn to_bytes(tree: &Tree) -> Vec<u8> {
    let mut out = Vec::new();
    encode(tree, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Tree, TreeError> {
    decode(bytes)
}

fn io(e: std::io::Error) -> TreeError {
    TreeError::Codec(e.to_string())
}
