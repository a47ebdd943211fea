use std::fmt;

use serde::{Deserialize, Serialize};

/// A finite word over `{1, …, N}`; the empty word addresses the whole tile.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Letters are 1-based.
    pub fn new(letters: Vec<u8>) -> Self {
        assert!(letters.iter().all(|&l| l >= 1), "word letters are 1-based");
        Word(letters)
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn push(&self, letter: u8) -> Word {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    /// Position of the word among all words of its length, lexicographic
    /// order, base-`n` digits.
    pub fn index(&self, n: usize) -> usize {
        self.0.iter().fold(0, |acc, &l| acc * n + (l as usize - 1))
    }

    pub fn from_index(mut index: usize, len: usize, n: usize) -> Word {
        let mut v = vec![0u8; len];
        for slot in v.iter_mut().rev() {
            *slot = (index % n) as u8 + 1;
            index /= n;
        }
        Word(v)
    }

    /// All words of length `len`, lexicographic.
    pub fn all(len: usize, n: usize) -> impl Iterator<Item = Word> {
        (0..n.pow(len as u32)).map(move |i| Word::from_index(i, len, n))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}
