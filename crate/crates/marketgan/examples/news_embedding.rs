//! From raw headline dumps to the dense news tensor the model consumes.
//!
//! Walks the whole text path on a miniature corpus: parse a ranked
//! headline CSV (complete with the quote wrappers and byte-literal
//! prefixes scraped dumps accumulate), clean each headline to lowercase
//! letter-only tokens with stop words removed, align the news calendar
//! to the trading calendar, look tokens up in a pretrained embedding
//! table, and mean-pool each day into the fixed-width vector that joins
//! the market features.
//!
//! Run with: `cargo run --example news_embedding`

use std::error::Error;

use chrono::NaiveDate;
use marketgan::newstext::{
    align_to_trading_days, clean_headline, corpus_max_length, embed_day, parse_embedding_file,
    parse_news_csv,
};

// Two headline slots per day keeps the printout small; real dumps carry
// Top1..Top25 and the parser takes however many columns are present.
const NEWS_CSV: &str = "\
Date,Top1,Top2
2016-01-04,\"b'Oil prices fall to an 11-year low'\",Central bank holds the line on rates
2016-01-05,b\"Markets rally after the statement\",
2016-01-07,'Chip maker beats the street',\"b'Storm closes ports on the coast'\"
";

// token followed by exactly m numbers, one line each — the word2vec
// text layout. Four dimensions here; pretrained tables use 50+.
const EMBEDDINGS: &str = "\
oil 0.9 0.1 -0.2 0.0
prices 0.4 0.4 0.0 0.1
fall -0.6 0.2 0.1 -0.3
low -0.5 0.0 0.2 -0.1
central 0.0 0.7 0.3 0.2
bank 0.1 0.8 0.2 0.3
rates 0.0 0.6 -0.1 0.4
markets 0.3 0.3 0.5 0.2
rally 0.7 -0.1 0.4 0.5
statement 0.0 0.2 0.1 0.6
chip 0.2 -0.4 0.8 0.0
maker 0.1 -0.3 0.7 0.1
beats 0.6 0.0 0.6 0.2
street 0.2 0.1 0.4 -0.2
storm -0.8 0.1 -0.3 -0.5
closes -0.4 -0.2 -0.2 -0.4
ports -0.3 0.0 -0.1 -0.6
coast -0.2 0.1 0.0 -0.7
";

fn main() -> Result<(), Box<dyn Error>> {
    // Cleaning is aggressive on purpose: punctuation, digits, and stop
    // words carry no signal the embeddings can use. (The b'...' byte
    // wrappers are the CSV parser's job, not the cleaner's.)
    let sample = "Oil prices fall to an 11-year low";
    println!("raw headline:    {sample}");
    println!("cleaned tokens:  {:?}", clean_headline(sample));

    let bundles = parse_news_csv(NEWS_CSV.as_bytes())?;
    println!("\nparsed {} news days:", bundles.len());
    for b in &bundles {
        let tokens: usize = b.headlines.iter().map(Vec::len).sum();
        println!(
            "  {}: {} headlines, {} tokens",
            b.date,
            b.headlines.len(),
            tokens
        );
    }

    // The trading calendar includes 2016-01-06, which has no news; the
    // aligned corpus represents it as an empty bundle (an all-zero
    // tensor downstream), so features and news stay index-aligned.
    let trading_days: Vec<NaiveDate> = [4, 5, 6, 7]
        .into_iter()
        .map(|d| NaiveDate::from_ymd_opt(2016, 1, d).expect("valid calendar date"))
        .collect();
    let aligned = align_to_trading_days(&bundles, &trading_days);
    println!("\naligned to {} trading days:", aligned.len());
    for b in &aligned {
        println!("  {}: {} headlines", b.date, b.headlines.len());
    }

    // Token-axis length is fixed corpus-wide at the longest headline so
    // every day embeds to the same shape.
    let l = corpus_max_length(&aligned)?;
    let table = parse_embedding_file(EMBEDDINGS.as_bytes(), 4)?;
    println!(
        "\nembedding table: {} tokens, dimension {}; corpus max length l = {l}",
        table.len(),
        table.dimension()
    );

    let k = 2; // headline slots
    for bundle in &aligned {
        let day = embed_day(bundle, &table, l, k);
        let pooled = day.mean_pooled();
        let head: Vec<String> = pooled.iter().take(4).map(|v| format!("{v:+.3}")).collect();
        println!(
            "  {}: tensor {k}x{l}x{} -> pooled {} values, slot 1 starts [{}]",
            bundle.date,
            table.dimension(),
            pooled.len(),
            head.join(", ")
        );
    }
    Ok(())
}
