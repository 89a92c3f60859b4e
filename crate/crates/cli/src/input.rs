use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use luria::Sample;

use crate::error::CliError;

/// Reads counts from `path`, or from stdin when `path` is `-`.
pub fn read_sample(path: &Path) -> Result<Sample, CliError> {
    if path.as_os_str() == "-" {
        parse_counts(io::stdin().lock())
    } else {
        let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        parse_counts(BufReader::new(file)).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// One non-negative integer per line. Blank lines and lines starting with
/// `#` are skipped; the first data line may be the header `count`.
pub fn parse_counts(reader: impl BufRead) -> Result<Sample, CliError> {
    let mut counts = Vec::new();
    let mut header_allowed = true;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CliError::Input(format!("line {lineno}: {e}")))?;
        let field = line.trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        if header_allowed && field.eq_ignore_ascii_case("count") {
            header_allowed = false;
            continue;
        }
        header_allowed = false;
        let value = field
            .parse::<u64>()
            .map_err(|_| CliError::Input(format!("line {lineno}: expected a non-negative integer, found '{field}'")))?;
        counts.push(value);
    }
    if counts.is_empty() {
        return Err(CliError::Input("no counts found".into()));
    }
    Sample::new(counts).map_err(|e| CliError::Input(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Sample, CliError> {
        parse_counts(text.as_bytes())
    }

    #[test]
    fn comments_blank_lines_and_header() {
        let s = parse("# assay 3\ncount\n0\n\n 12 \n# trailing\n5\n").unwrap();
        assert_eq!(s.counts(), &[0, 12, 5]);
    }

    #[test]
    fn header_only_first() {
        let err = parse("1\ncount\n").unwrap_err();
        assert_eq!(err.to_string(), "line 2: expected a non-negative integer, found 'count'");
    }

    #[test]
    fn bad_lines_are_numbered() {
        for (text, line) in [("1\n2\n-3\n", 3), ("x\n", 1), ("1\n\n2.5\n", 3)] {
            let msg = parse(text).unwrap_err().to_string();
            assert!(msg.starts_with(&format!("line {line}:")), "{msg}");
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert!(parse("# nothing\n\n").is_err());
    }
}
