use std::fs;
use std::path::Path;

use super::{Triplet, Vocab};
use crate::error::{Error, Result};

/// Reads a `head<TAB>relation<TAB>tail` file.
///
/// New names extend `entities` / `relations` in first-appearance order unless the
/// vocabulary is frozen, in which case an unseen name is a lookup error.
pub fn load_tsv(path: &Path, entities: &mut Vocab, relations: &mut Vocab) -> Result<Vec<Triplet>> {
    let text = fs::read_to_string(path)?;
    parse_tsv(&text, path, entities, relations)
}

pub fn parse_tsv(
    text: &str,
    path: &Path,
    entities: &mut Vocab,
    relations: &mut Vocab,
) -> Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let lookup = |vocab: &mut Vocab, kind: &'static str, name: &str| {
            if vocab.is_frozen() {
                vocab.get(name).ok_or_else(|| Error::UnknownSymbol {
                    path: path.to_owned(),
                    line: lineno + 1,
                    kind,
                    name: name.to_owned(),
                })
            } else {
                Ok(vocab.intern(name))
            }
        };
        let head = lookup(entities, "entity", cols[0])?;
        let relation = lookup(relations, "relation", cols[1])?;
        let tail = lookup(entities, "entity", cols[2])?;
        out.push(Triplet::new(head, relation, tail));
    }
    Ok(out)
}
