use super::TokenSeq;

/// Lowercase, strip punctuation to whitespace, split on whitespace runs.
///
/// Total function: any input, including the empty string, yields a valid
/// (possibly empty) `TokenSeq`. Alphanumerics survive, everything else acts
/// as a separator, so "isn't" becomes `["isn", "t"]`.
pub fn normalize_and_tokenize(raw_text: &str) -> TokenSeq {
    let lowered = raw_text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in lowered.chars() {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenSeq(tokens)
}
