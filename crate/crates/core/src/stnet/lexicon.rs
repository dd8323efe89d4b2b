use std::collections::HashMap;

use log::warn;

use crate::{Error, Result};

/// The `size` most frequent words, most frequent first; ties go to the
/// lexicographically smaller word.
pub fn build_lexicon<I, S>(words: I, size: usize) -> Result<Vec<String>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    for w in words {
        *counts.entry(w.as_ref().to_string()).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(Error::invalid("transcripts contain no words"));
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if ranked.len() < size {
        warn!("only {} distinct words, lexicon of {size} requested", ranked.len());
    }
    Ok(ranked.into_iter().take(size).map(|(w, _)| w).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_then_lexicographic() {
        let words = "a a a a a b b b c".split(' ');
        assert_eq!(build_lexicon(words, 2).unwrap(), ["a", "b"]);
        assert_eq!(build_lexicon(["b", "a", "b", "a"], 1).unwrap(), ["a"]);
        assert_eq!(build_lexicon(["x", "y"], 5).unwrap(), ["x", "y"]);
        assert!(build_lexicon(Vec::<String>::new(), 3).is_err());
    }
}
