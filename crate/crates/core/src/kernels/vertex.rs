use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// Address of a vertex of a regular tree: the sequence of child indices on
/// the path from the origin. The origin is the empty address.
///
/// The first digit ranges over `0..d`, every later digit over `0..d-1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreeAddr(SmallVec<[u16; 8]>);

impl TreeAddr {
    pub fn root() -> Self {
        Self(SmallVec::new())
    }

    pub fn from_digits(digits: &[u16]) -> Self {
        Self(SmallVec::from_slice(digits))
    }

    pub fn digits(&self) -> &[u16] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<Self> {
        if self.is_root() {
            None
        } else {
            Some(Self(SmallVec::from_slice(&self.0[..self.0.len() - 1])))
        }
    }

    pub fn child(&self, digit: u16) -> Self {
        let mut digits = self.0.clone();
        digits.push(digit);
        Self(digits)
    }

    /// Whether every digit is in range for the tree of degree `d`.
    pub fn is_valid(&self, d: u32) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, &digit)| u32::from(digit) < if i == 0 { d } else { d - 1 })
    }

    /// Graph distance in the tree.
    pub fn distance(&self, other: &Self) -> u64 {
        let common = self
            .0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count();
        (self.depth() + other.depth() - 2 * common) as u64
    }
}

/// A vertex of one of the supported countable spaces.
///
/// JSON form: an integer for line vertices, an array of child indices for
/// tree vertices (`[]` is the origin).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Vertex {
    Line(i64),
    Tree(TreeAddr),
}

impl Vertex {
    pub fn tree(digits: &[u16]) -> Self {
        Vertex::Tree(TreeAddr::from_digits(digits))
    }

    pub fn tree_root() -> Self {
        Vertex::Tree(TreeAddr::root())
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Line(x) => write!(f, "{x}"),
            Vertex::Tree(addr) => {
                f.write_str("[")?;
                for (i, digit) in addr.digits().iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{digit}")?;
                }
                f.write_str("]")
            }
        }
    }
}
