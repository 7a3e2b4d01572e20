//! Class labels carried by COD10K file names, e.g.
//! `COD10K-CAM-3-Flying-53-Bird-3024`.

pub const OTHER: &str = "other";

/// `(super-class, sub-class)` for a COD10K camouflaged-image stem.
pub fn parse_cod10k(stem: &str) -> Option<(String, String)> {
    let tokens: Vec<&str> = stem.split('-').collect();
    if tokens.len() < 7 || !tokens[0].starts_with("COD10K") || tokens[1] != "CAM" {
        return None;
    }
    let numeric = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    if !numeric(tokens[2]) || !numeric(tokens[4]) || !numeric(tokens[tokens.len() - 1]) {
        return None;
    }
    let sub = tokens[5..tokens.len() - 1].join("-");
    if tokens[3].is_empty() || sub.is_empty() {
        return None;
    }
    Some((tokens[3].to_string(), sub))
}

/// Falls back to [`OTHER`] for both labels.
pub fn classes_of(stem: &str) -> (String, String) {
    parse_cod10k(stem).unwrap_or_else(|| (OTHER.to_string(), OTHER.to_string()))
}
