use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use super::{HeadlineBundle, NewsTextError};

/// A pretrained token → vector table with a fixed dimension.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// An empty table of the given dimension (≥ 1).
    pub fn new(dimension: usize) -> Result<Self, NewsTextError> {
        if dimension == 0 {
            return Err(NewsTextError::BadConfig(
                "embedding dimension must be at least 1".into(),
            ));
        }
        Ok(EmbeddingTable {
            dimension,
            entries: HashMap::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Inserts a vector, validating its length. An existing entry for the
    /// token is kept untouched (first occurrence wins).
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<(), NewsTextError> {
        if vector.len() != self.dimension {
            return Err(NewsTextError::BadConfig(format!(
                "vector for `{token}` has {} values, table dimension is {}",
                vector.len(),
                self.dimension
            )));
        }
        self.entries.entry(token.to_string()).or_insert(vector);
        Ok(())
    }
}

/// Parses a plain-text embedding file: one token followed by exactly `m`
/// space-separated decimals per line, no header. Blank lines are skipped;
/// when a token appears twice, the first line wins.
pub fn parse_embedding_file<R: Read>(
    reader: R,
    m: usize,
) -> Result<EmbeddingTable, NewsTextError> {
    let mut table = EmbeddingTable::new(m)?;
    let mut saw_data = false;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else {
            continue; // blank line
        };
        saw_data = true;
        let mut vector = Vec::with_capacity(m);
        for part in parts {
            let v: f64 = part.parse().map_err(|_| NewsTextError::Line {
                line: line_no,
                detail: format!("bad number `{part}`"),
            })?;
            vector.push(v);
        }
        if vector.len() != m {
            return Err(NewsTextError::Line {
                line: line_no,
                detail: format!(
                    "token `{token}` has {} values, expected {m}",
                    vector.len()
                ),
            });
        }
        table.insert(token, vector)?;
    }
    if !saw_data {
        return Err(NewsTextError::Empty);
    }
    Ok(table)
}

/// The corpus-wide maximum headline token count, used to size the
/// per-day tensor. Compute it on the training corpus only; longer
/// headlines seen later are truncated by [`embed_day`].
pub fn corpus_max_length(bundles: &[HeadlineBundle]) -> Result<usize, NewsTextError> {
    let l = bundles
        .iter()
        .flat_map(|b| b.headlines.iter())
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    if l == 0 {
        return Err(NewsTextError::EmptyCorpus);
    }
    Ok(l)
}

/// One day's headlines as a dense `k × l × m` tensor, zero-padded.
///
/// Layout is row-major: component `d` of token `i` in headline slot `j`
/// lives at `data[(j*l + i)*m + d]`. Unused token rows and headline slots
/// are exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedDay {
    k: usize,
    l: usize,
    m: usize,
    data: Vec<f64>,
}

impl EmbeddedDay {
    /// An all-zero tensor (the representation of a day with no news).
    ///
    /// # Panics
    /// If any axis is zero.
    pub fn zeros(k: usize, l: usize, m: usize) -> Self {
        assert!(k >= 1 && l >= 1 && m >= 1, "tensor axes must be positive");
        EmbeddedDay {
            k,
            l,
            m,
            data: vec![0.0; k * l * m],
        }
    }

    /// (headline slots, max tokens, embedding dimension).
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.k, self.l, self.m)
    }

    pub fn get(&self, headline: usize, token: usize, component: usize) -> f64 {
        assert!(headline < self.k && token < self.l && component < self.m);
        self.data[(headline * self.l + token) * self.m + component]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn set_token(&mut self, headline: usize, token: usize, vector: &[f64]) {
        let start = (headline * self.l + token) * self.m;
        self.data[start..start + self.m].copy_from_slice(vector);
    }

    /// Mean over the token axis, flattened headline-major to a `k·m`
    /// vector — the reduction the downstream dense blocks consume. The
    /// divisor is the fixed axis length `l`, so padding rows dilute short
    /// headlines rather than being skipped.
    pub fn mean_pooled(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.k * self.m];
        for j in 0..self.k {
            for i in 0..self.l {
                for d in 0..self.m {
                    out[j * self.m + d] += self.data[(j * self.l + i) * self.m + d];
                }
            }
        }
        for v in &mut out {
            *v /= self.l as f64;
        }
        out
    }
}

/// Embeds one day's headlines: token `i` of headline `j` fills
/// `tensor[j][i]`, out-of-vocabulary tokens stay zero, and anything past
/// `k` headline slots or `l` tokens is truncated.
///
/// # Panics
/// If `l` or `k` is zero.
pub fn embed_day(
    bundle: &HeadlineBundle,
    table: &EmbeddingTable,
    l: usize,
    k: usize,
) -> EmbeddedDay {
    let mut day = EmbeddedDay::zeros(k, l, table.dimension());
    for (j, headline) in bundle.headlines.iter().take(k).enumerate() {
        for (i, token) in headline.iter().take(l).enumerate() {
            if let Some(vector) = table.get(token) {
                day.set_token(j, i, vector);
            }
        }
    }
    day
}
