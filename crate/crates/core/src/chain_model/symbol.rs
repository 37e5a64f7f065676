//! Particle letters, subscripted symbols and the alphabets built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A particle state with its subscript erased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    F,
    N,
    L,
    TR,
    TL,
    S,
    Q,
    B,
    R,
    G,
}

impl Letter {
    pub const ALL: [Letter; 10] = [
        Letter::F,
        Letter::N,
        Letter::L,
        Letter::TR,
        Letter::TL,
        Letter::S,
        Letter::Q,
        Letter::B,
        Letter::R,
        Letter::G,
    ];

    /// Letters that carry a qubit in their subscript.
    pub fn has_bit(self) -> bool {
        matches!(self, Letter::Q | Letter::B | Letter::R | Letter::G)
    }

    /// Letters counted by `m`. `S` stands in for an unwritten input qubit.
    pub fn is_computation(self) -> bool {
        self.has_bit() || self == Letter::S
    }

    pub fn name(self) -> &'static str {
        match self {
            Letter::F => "F",
            Letter::N => "N",
            Letter::L => "L",
            Letter::TR => "T_R",
            Letter::TL => "T_L",
            Letter::S => "S",
            Letter::Q => "Q",
            Letter::B => "B",
            Letter::R => "R",
            Letter::G => "G",
        }
    }

    /// Image under the 14-to-10 identification.
    pub fn identify(self) -> Letter {
        match self {
            Letter::N => Letter::F,
            Letter::TL => Letter::TR,
            Letter::B => Letter::Q,
            other => other,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Letter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "F" => Letter::F,
            "N" => Letter::N,
            "L" => Letter::L,
            "T_R" | "TR" => Letter::TR,
            "T_L" | "TL" => Letter::TL,
            "S" => Letter::S,
            "Q" => Letter::Q,
            "B" => Letter::B,
            "R" => Letter::R,
            "G" => Letter::G,
            _ => return Err(Error::Input(format!("unknown letter `{s}`"))),
        })
    }
}

/// A full particle state: a letter plus its bit when the letter carries one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub letter: Letter,
    pub bit: Option<u8>,
}

impl Symbol {
    pub fn plain(letter: Letter) -> Self {
        debug_assert!(!letter.has_bit());
        Symbol { letter, bit: None }
    }

    pub fn with_bit(letter: Letter, bit: u8) -> Self {
        debug_assert!(letter.has_bit() && bit < 2);
        Symbol {
            letter,
            bit: Some(bit),
        }
    }

    /// All 14 symbols in canonical order.
    pub fn all() -> Vec<Symbol> {
        let mut out = Vec::with_capacity(14);
        for l in Letter::ALL {
            if l.has_bit() {
                out.push(Symbol::with_bit(l, 0));
                out.push(Symbol::with_bit(l, 1));
            } else {
                out.push(Symbol::plain(l));
            }
        }
        out
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bit {
            Some(b) => write!(f, "{}{}", self.letter, b),
            None => write!(f, "{}", self.letter),
        }
    }
}

impl FromStr for Symbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(last) = s.chars().last() {
            if last == '0' || last == '1' {
                let letter: Letter = s[..s.len() - 1].parse()?;
                if !letter.has_bit() {
                    return Err(Error::Input(format!("letter {letter} takes no subscript")));
                }
                return Ok(Symbol::with_bit(letter, (last == '1') as u8));
            }
        }
        let letter: Letter = s.parse()?;
        if letter.has_bit() {
            return Err(Error::Input(format!("symbol `{s}` needs a 0/1 subscript")));
        }
        Ok(Symbol::plain(letter))
    }
}

/// Maps N→F, T_L→T_R and B_b→Q_b; other symbols are fixed.
pub fn identify_10(s: Symbol) -> Symbol {
    Symbol {
        letter: s.letter.identify(),
        bit: s.bit,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlphabetKind {
    /// All 14 states, used by the adiabatic construction.
    Full14,
    /// The 13 states without `S`, used by the QMA reduction.
    Qma13,
    /// The 14-state alphabet after identification.
    Identified10,
    /// The 13-state alphabet after identification.
    Identified9,
}

/// An ordered list of symbols; the index of a symbol is its basis label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    kind: AlphabetKind,
    symbols: Vec<Symbol>,
    index: [[Option<u8>; 3]; 10],
}

impl Alphabet {
    pub fn new(kind: AlphabetKind) -> Self {
        let base: Vec<Symbol> = match kind {
            AlphabetKind::Full14 | AlphabetKind::Identified10 => Symbol::all(),
            AlphabetKind::Qma13 | AlphabetKind::Identified9 => {
                Symbol::all().into_iter().filter(|s| s.letter != Letter::S).collect()
            }
        };
        let identified = matches!(kind, AlphabetKind::Identified10 | AlphabetKind::Identified9);
        let mut symbols: Vec<Symbol> = Vec::new();
        for s in base {
            let s = if identified { identify_10(s) } else { s };
            if !symbols.contains(&s) {
                symbols.push(s);
            }
        }
        let mut index = [[None; 3]; 10];
        for (k, s) in symbols.iter().enumerate() {
            index[s.letter as usize][slot(s.bit)] = Some(k as u8);
        }
        Alphabet {
            kind,
            symbols,
            index,
        }
    }

    pub fn kind(&self) -> AlphabetKind {
        self.kind
    }

    pub fn is_identified(&self) -> bool {
        matches!(self.kind, AlphabetKind::Identified10 | AlphabetKind::Identified9)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, idx: usize) -> Symbol {
        self.symbols[idx]
    }

    pub fn index_of(&self, s: Symbol) -> Option<usize> {
        self.index[s.letter as usize][slot(s.bit)].map(usize::from)
    }

    pub fn require(&self, s: Symbol) -> Result<usize> {
        self.index_of(s)
            .ok_or_else(|| Error::Input(format!("symbol {s} is not in the {:?} alphabet", self.kind)))
    }

    pub fn contains_letter(&self, l: Letter) -> bool {
        self.index[l as usize].iter().any(Option::is_some)
    }

    /// Maps a letter into this alphabet (identity unless identified).
    pub fn map_letter(&self, l: Letter) -> Letter {
        if self.is_identified() {
            l.identify()
        } else {
            l
        }
    }

    /// Indices of every symbol whose letter is `l`.
    pub fn indices_of_letter(&self, l: Letter) -> Vec<usize> {
        self.index[l as usize].iter().flatten().map(|&k| k as usize).collect()
    }
}

fn slot(bit: Option<u8>) -> usize {
    match bit {
        None => 2,
        Some(b) => b as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourteen_symbols() {
        assert_eq!(Symbol::all().len(), 14);
        assert_eq!(Alphabet::new(AlphabetKind::Full14).len(), 14);
        assert_eq!(Alphabet::new(AlphabetKind::Qma13).len(), 13);
    }

    #[test]
    fn identification_examples() {
        assert_eq!(identify_10(Symbol::plain(Letter::N)), Symbol::plain(Letter::F));
        assert_eq!(identify_10(Symbol::with_bit(Letter::G, 1)), Symbol::with_bit(Letter::G, 1));
        assert_eq!(identify_10(Symbol::with_bit(Letter::B, 0)), Symbol::with_bit(Letter::Q, 0));
        let image: std::collections::BTreeSet<_> = Symbol::all().into_iter().map(identify_10).collect();
        assert_eq!(image.len(), 10);
        assert_eq!(Alphabet::new(AlphabetKind::Identified10).len(), 10);
    }

    #[test]
    fn symbol_text_roundtrip() {
        for s in Symbol::all() {
            assert_eq!(s.to_string().parse::<Symbol>().unwrap(), s);
        }
        assert!("Q".parse::<Symbol>().is_err());
        assert!("F1".parse::<Symbol>().is_err());
    }

    #[test]
    fn alphabet_indices_are_dense() {
        for kind in [
            AlphabetKind::Full14,
            AlphabetKind::Qma13,
            AlphabetKind::Identified10,
            AlphabetKind::Identified9,
        ] {
            let a = Alphabet::new(kind);
            for (k, &s) in a.symbols().iter().enumerate() {
                assert_eq!(a.index_of(s), Some(k));
            }
        }
    }
}
