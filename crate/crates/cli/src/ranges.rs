//! Integer lists on the command line: `4-8`, `2-60:2`, `3,5,9`.

pub fn parse_list(text: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (span, step) = match part.split_once(':') {
            Some((s, k)) => (s, parse_one(k)?),
            None => (part, 1),
        };
        if step == 0 {
            return Err(format!("`{part}`: step must be positive"));
        }
        match span.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi) = (parse_one(lo)?, parse_one(hi)?);
                if lo > hi {
                    return Err(format!("`{part}`: empty range"));
                }
                out.extend((lo..=hi).step_by(step));
            }
            None => out.push(parse_one(span)?),
        }
    }
    if out.is_empty() {
        return Err(format!("`{text}`: no values"));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn parse_one(s: &str) -> Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}
