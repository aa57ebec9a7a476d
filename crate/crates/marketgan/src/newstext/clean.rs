/// Bundled English stop-word list, sorted and lowercase.
///
/// Tokens are compared *after* cleaning, so contraction forms appear
/// with their apostrophes already removed ("dont", "isnt"). Collapsed
/// forms that collide with ordinary words ("ill", "well", "shed") are
/// deliberately absent.
pub const STOP_WORDS: [&str; 156] = [
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "arent", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "cannot", "cant", "could", "couldnt", "did", "didnt", "do", "does", "doesnt",
    "doing", "dont", "down", "during", "each", "few", "for", "from", "further", "had", "hadnt",
    "has", "hasnt", "have", "havent", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "if", "in", "into", "is", "isnt", "it", "its", "itself", "just",
    "lets", "me", "more", "most", "mustnt", "my", "myself", "no", "nor", "not", "now", "of", "off",
    "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same",
    "shant", "she", "should", "shouldnt", "so", "some", "such", "than", "that", "thats", "the",
    "their", "theirs", "them", "themselves", "then", "there", "theres", "these", "they", "theyd",
    "theyll", "theyre", "theyve", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "wasnt", "we", "were", "werent", "weve", "what", "when", "where", "which",
    "while", "who", "whom", "whos", "why", "will", "with", "wont", "would", "wouldnt", "you",
    "youd", "youll", "your", "youre", "yours", "yourself", "yourselves", "youve",
];

/// Whether a cleaned token is on the bundled stop list.
pub fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.binary_search(&token).is_ok()
}

/// Normalizes one raw headline into tokens: lowercase, drop every
/// character that is neither alphabetic nor whitespace (punctuation and
/// digits vanish, so "don't" becomes "dont"), split on whitespace, and
/// remove stop words. Token order is preserved; the result may be empty.
///
/// The function is idempotent: cleaning a rejoined output changes nothing.
pub fn clean_headline(raw: &str) -> Vec<String> {
    let lowered: String = raw
        .chars()
        .flat_map(|c| c.to_lowercase())
        .filter(|c| c.is_alphabetic() || c.is_whitespace())
        .collect();
    lowered
        .split_whitespace()
        .filter(|t| !is_stop_word(t))
        .map(|t| t.to_string())
        .collect()
}
