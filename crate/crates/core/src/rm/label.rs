use std::collections::HashMap;
use std::fmt;

use super::RmError;

/// Maximum vocabulary width; label sets are stored as `u64` bitmasks.
pub const MAX_SYMBOLS: usize = 64;

/// Ordered set of propositional symbols.
///
/// The order is fixed for the lifetime of an experiment: feature vectors and
/// serialized weights are laid out in vocabulary order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<S: AsRef<str>>(symbols: &[S]) -> Result<Self, RmError> {
        let mut vocab = Vocabulary {
            symbols: Vec::with_capacity(symbols.len()),
            index: HashMap::new(),
        };
        for s in symbols {
            vocab.push(s.as_ref())?;
        }
        Ok(vocab)
    }

    /// The office-gridworld vocabulary: `A B C D o c m *`.
    pub fn office() -> Self {
        Self::new(&["A", "B", "C", "D", "o", "c", "m", "*"]).expect("static vocabulary")
    }

    /// Appends a symbol, returning its index.
    pub fn push(&mut self, symbol: &str) -> Result<usize, RmError> {
        if symbol.is_empty()
            || symbol
                .chars()
                .any(|c| c.is_whitespace() || c == ',' || c == '{' || c == '}')
        {
            return Err(RmError::InvalidSymbol(symbol.to_string()));
        }
        if self.index.contains_key(symbol) {
            return Err(RmError::DuplicateSymbol(symbol.to_string()));
        }
        if self.symbols.len() == MAX_SYMBOLS {
            return Err(RmError::VocabularyFull);
        }
        let i = self.symbols.len();
        self.symbols.push(symbol.to_string());
        self.index.insert(symbol.to_string(), i);
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Label set holding exactly the named symbols.
    pub fn label_set<S: AsRef<str>>(&self, symbols: &[S]) -> Result<LabelSet, RmError> {
        let mut l = LabelSet::EMPTY;
        for s in symbols {
            let i = self
                .index_of(s.as_ref())
                .ok_or_else(|| RmError::UnknownSymbol(s.as_ref().to_string()))?;
            l = l.with(i);
        }
        Ok(l)
    }

    /// Parses the brace form used by the text format, e.g. `{A,c}` or `{}`.
    pub fn parse_label_set(&self, text: &str) -> Result<LabelSet, RmError> {
        let inner = text
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(|| RmError::Syntax(format!("expected {{...}}, found `{text}`")))?;
        let symbols: Vec<&str> = inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        self.label_set(&symbols)
    }

    pub fn names(&self, l: LabelSet) -> Vec<&str> {
        l.iter().map(|i| self.symbol(i)).collect()
    }

    pub fn format(&self, l: LabelSet) -> String {
        format!("{{{}}}", self.names(l).join(","))
    }
}

/// Truth assignment over a [`Vocabulary`], one bit per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LabelSet(u64);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn from_bits(bits: u64) -> Self {
        LabelSet(bits)
    }

    pub fn singleton(i: usize) -> Self {
        LabelSet(1 << i)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn with(self, i: usize) -> Self {
        LabelSet(self.0 | (1 << i))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..MAX_SYMBOLS).filter(move |i| bits >> i & 1 == 1)
    }

    /// True if every set bit indexes a symbol of a vocabulary of width `width`.
    pub fn fits(self, width: usize) -> bool {
        width >= MAX_SYMBOLS || self.0 >> width == 0
    }

    /// 0/1 feature vector of length `width`, in vocabulary order.
    pub fn features(self, width: usize) -> Vec<f64> {
        (0..width)
            .map(|i| if self.contains(i) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Dot product of `weights` with the 0/1 feature vector.
    pub fn dot(self, weights: &[f64]) -> f64 {
        self.iter()
            .filter(|&i| i < weights.len())
            .map(|i| weights[i])
            .sum()
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn office_vocabulary_order() {
        let v = Vocabulary::office();
        assert_eq!(v.len(), 8);
        assert_eq!(v.index_of("o"), Some(4));
        assert_eq!(v.index_of("*"), Some(7));
    }

    #[test]
    fn parse_and_format_label_sets() {
        let v = Vocabulary::office();
        let l = v.parse_label_set("{A,c}").unwrap();
        assert!(l.contains(0) && l.contains(5));
        assert_eq!(v.format(l), "{A,c}");
        assert_eq!(v.parse_label_set("{}").unwrap(), LabelSet::EMPTY);
        assert!(v.parse_label_set("{z}").is_err());
        assert!(v.parse_label_set("A").is_err());
    }

    #[test]
    fn features_follow_vocabulary_order() {
        let v = Vocabulary::office();
        let l = v.label_set(&["c", "o"]).unwrap();
        assert_eq!(l.features(8), vec![0., 0., 0., 0., 1., 1., 0., 0.]);
        assert!(l.fits(8));
        assert!(!LabelSet::singleton(9).fits(8));
    }

    #[test]
    fn rejects_duplicate_symbols() {
        assert!(Vocabulary::new(&["a", "a"]).is_err());
        assert!(Vocabulary::new(&["a b"]).is_err());
    }
}
