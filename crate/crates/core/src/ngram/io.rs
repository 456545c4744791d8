//! Model files. Only the word list and top-order counts are stored; every
//! other statistic is rebuilt on load.
//!
//! Text form (sorted, diff-able):
//! ```text
//! #ngram v1 order <n> words <w> records <r>
//! word <string>            (w lines, sorted)
//! <count> <tok_1> ... <tok_n>   (r lines, sorted by token ids)
//! ```
//! Binary form: `BPNG`, version, order, word table, then `(count, ids...)`
//! records, all little-endian.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{CountMap, NgramModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BPNG";
const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

impl NgramModel {
    fn sorted_records(&self) -> Vec<(&[u32], u64)> {
        let mut recs: Vec<(&[u32], u64)> = self
            .top_counts()
            .iter()
            .map(|(g, &c)| (g.as_ref(), c))
            .collect();
        recs.sort_unstable();
        recs
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let words = self.word_list();
        let recs = self.sorted_records();
        writeln!(
            out,
            "#ngram v1 order {} words {} records {}",
            self.order(),
            words.len(),
            recs.len()
        )?;
        for w in words {
            writeln!(out, "word {w}")?;
        }
        let mut line = String::new();
        for (g, c) in recs {
            line.clear();
            line.push_str(&c.to_string());
            for &id in g {
                line.push(' ');
                line.push_str(&self.words[id as usize]);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<NgramModel> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file"))?
            .map_err(|e| bad(e.to_string()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 8 || h[0] != "#ngram" || h[1] != "v1" {
            return Err(bad("bad header"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number {s:?}")));
        let (order, nwords, nrecs) = (num(h[3])?, num(h[5])?, num(h[7])?);
        if order == 0 {
            return Err(Error::ZeroOrder);
        }
        let mut words = Vec::with_capacity(nwords);
        for _ in 0..nwords {
            let l = lines.next().ok_or_else(|| bad("truncated word table"))?.map_err(|e| bad(e.to_string()))?;
            let w = l.strip_prefix("word ").ok_or_else(|| bad("expected word line"))?;
            words.push(w.to_string());
        }
        check_words(&words)?;
        let index = word_index(&words);
        let mut top = CountMap::default();
        for _ in 0..nrecs {
            let l = lines.next().ok_or_else(|| bad("truncated records"))?.map_err(|e| bad(e.to_string()))?;
            let mut f = l.split(' ');
            let c: u64 = f
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad count"))?;
            let g: Vec<u32> = f
                .map(|t| index.get(t).copied().ok_or_else(|| bad(format!("unknown token {t:?}"))))
                .collect::<Result<_>>()?;
            if g.len() != order || c == 0 {
                return Err(bad("bad record"));
            }
            top.insert(g.into(), c);
        }
        Ok(NgramModel::from_parts(order, words, top))
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(VERSION)?;
        out.write_u32::<LittleEndian>(self.order() as u32)?;
        let words = self.word_list();
        out.write_u32::<LittleEndian>(words.len() as u32)?;
        for w in words {
            out.write_u32::<LittleEndian>(w.len() as u32)?;
            out.write_all(w.as_bytes())?;
        }
        let recs = self.sorted_records();
        out.write_u64::<LittleEndian>(recs.len() as u64)?;
        for (g, c) in recs {
            out.write_u64::<LittleEndian>(c)?;
            for &id in g {
                out.write_u32::<LittleEndian>(id)?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<NgramModel> {
        let io = |e: std::io::Error| bad(e.to_string());
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        if input.read_u32::<LittleEndian>().map_err(io)? != VERSION {
            return Err(bad("unsupported version"));
        }
        let order = input.read_u32::<LittleEndian>().map_err(io)? as usize;
        if order == 0 {
            return Err(Error::ZeroOrder);
        }
        let nwords = input.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut words = Vec::with_capacity(nwords);
        for _ in 0..nwords {
            let len = input.read_u32::<LittleEndian>().map_err(io)? as usize;
            let mut buf = vec![0u8; len];
            input.read_exact(&mut buf).map_err(io)?;
            words.push(String::from_utf8(buf).map_err(|_| bad("word is not UTF-8"))?);
        }
        check_words(&words)?;
        let max_id = (words.len() + 3) as u32;
        let nrecs = input.read_u64::<LittleEndian>().map_err(io)?;
        let mut top = CountMap::default();
        for _ in 0..nrecs {
            let c = input.read_u64::<LittleEndian>().map_err(io)?;
            let mut g = Vec::with_capacity(order);
            for _ in 0..order {
                let id = input.read_u32::<LittleEndian>().map_err(io)?;
                if id >= max_id {
                    return Err(bad("token id out of range"));
                }
                g.push(id);
            }
            top.insert(g.into(), c);
        }
        Ok(NgramModel::from_parts(order, words, top))
    }

    /// Saves as binary when the extension is `.bin`, text otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        let r = if is_binary(path) {
            self.write_binary(&mut w)
        } else {
            self.write_text(&mut w)
        };
        r.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<NgramModel> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let r = BufReader::new(f);
        if is_binary(path) {
            NgramModel::read_binary(r)
        } else {
            NgramModel::read_text(r)
        }
    }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

fn check_words(words: &[String]) -> Result<()> {
    if words.windows(2).any(|p| p[0] >= p[1]) {
        return Err(bad("word table must be sorted and unique"));
    }
    if words.iter().any(|w| w.is_empty() || w.contains(char::is_whitespace)) {
        return Err(bad("invalid word"));
    }
    Ok(())
}

fn word_index(words: &[String]) -> rustc_hash::FxHashMap<&str, u32> {
    let mut m: rustc_hash::FxHashMap<&str, u32> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i as u32 + 3))
        .collect();
    m.insert(super::BOS, super::BOS_ID);
    m.insert(super::EOS, super::EOS_ID);
    m.insert(super::UNK, super::UNK_ID);
    m
}
