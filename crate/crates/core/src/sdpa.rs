//! Sparse SDPA (`.dat-s`) reading and writing.
//!
//! The file states `max F0 • Y  s.t.  Fi • Y = ci, Y ⪰ 0`. A leading `* minimize`
//! comment marks a problem that was `min C • X`, stored with `F0 = −C`.
//! Inequalities live in one diagonal (LP) block whose entries are the slacks.

use std::fmt::Write as _;
use std::path::Path;

use crate::linalg::SparseSymmetric;
use crate::problem::{ObjectiveSense, SdpProblem, Sense};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdpaError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported block structure: {0}")]
    UnsupportedBlockStructure(String),
    #[error("{0}")]
    Io(String),
}

const MIN_MARKER: &str = "* minimize";

fn parse_err(line: usize, message: impl Into<String>) -> SdpaError {
    SdpaError::Parse {
        line,
        message: message.into(),
    }
}

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
        .filter(|t| !t.is_empty())
        .collect()
}

fn number<N: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<N, SdpaError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("expected {what}, found `{tok}`")))
}

pub fn read_sdpa<T: Real>(text: &str) -> Result<SdpProblem<T>, SdpaError> {
    let mut minimize = false;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    while let Some(&(_, l)) = lines.peek() {
        let t = l.trim_start();
        if t.starts_with('*') || t.starts_with('"') || t.is_empty() {
            if t.trim_end() == MIN_MARKER {
                minimize = true;
            }
            lines.next();
        } else {
            break;
        }
    }
    let mut header = |what: &str| -> Result<(usize, Vec<String>), SdpaError> {
        for (no, l) in lines.by_ref() {
            let toks = tokens(l);
            if !toks.is_empty() {
                return Ok((no, toks.into_iter().map(String::from).collect()));
            }
        }
        Err(parse_err(text.lines().count(), format!("missing {what}")))
    };
    let (no, t) = header("constraint count")?;
    let m: usize = number(&t[0], no, "constraint count")?;
    let (no, t) = header("block count")?;
    let nblocks: usize = number(&t[0], no, "block count")?;
    let (no, t) = header("block sizes")?;
    if t.len() < nblocks {
        return Err(parse_err(no, format!("expected {nblocks} block sizes, found {}", t.len())));
    }
    let sizes: Vec<i64> = t[..nblocks]
        .iter()
        .map(|s| number(s, no, "block size"))
        .collect::<Result<_, _>>()?;
    let psd: Vec<usize> = (0..nblocks).filter(|&k| sizes[k] > 0).collect();
    let lp: Vec<usize> = (0..nblocks).filter(|&k| sizes[k] < 0).collect();
    if psd.len() != 1 || lp.len() > 1 || sizes.contains(&0) {
        return Err(SdpaError::UnsupportedBlockStructure(format!(
            "need one PSD block and at most one diagonal block, found sizes {sizes:?}"
        )));
    }
    let (psd_blk, n) = (psd[0] + 1, sizes[psd[0]] as usize);
    let lp_blk = lp.first().map(|&k| (k + 1, (-sizes[k]) as usize));
    let mut b: Vec<T> = Vec::with_capacity(m);
    let mut rhs_line = 0;
    while b.len() < m {
        let (no, t) = header("right-hand side")?;
        rhs_line = no;
        for tok in t {
            b.push(T::lit(number(&tok, no, "right-hand side value")?));
        }
    }
    if b.len() != m {
        return Err(parse_err(rhs_line, format!("expected {m} right-hand side values, found {}", b.len())));
    }
    let mut mats: Vec<Vec<(usize, usize, T)>> = vec![Vec::new(); m + 1];
    // (constraint, diagonal index, value) of slack entries
    let mut slack_entries: Vec<(usize, usize, f64, usize)> = Vec::new();
    for (no, l) in lines {
        let t = tokens(l);
        if t.is_empty() {
            continue;
        }
        if t.len() != 5 {
            return Err(parse_err(no, format!("expected 5 fields, found {}", t.len())));
        }
        let mat: usize = number(t[0], no, "matrix number")?;
        let blk: usize = number(t[1], no, "block number")?;
        let i: usize = number(t[2], no, "row index")?;
        let j: usize = number(t[3], no, "column index")?;
        let v: f64 = number(t[4], no, "value")?;
        if mat > m {
            return Err(parse_err(no, format!("matrix number {mat} exceeds {m}")));
        }
        if blk == psd_blk {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(parse_err(no, format!("index ({i}, {j}) outside a block of order {n}")));
            }
            let (r, c) = (i.max(j) - 1, i.min(j) - 1);
            let v = if mat == 0 && minimize { -v } else { v };
            mats[mat].push((r, c, T::lit(v)));
        } else if let Some((lb, q)) = lp_blk.filter(|&(lb, _)| lb == blk) {
            if i != j || i == 0 || i > q {
                return Err(parse_err(no, format!("diagonal block entry ({i}, {j}) out of place")));
            }
            debug_assert_eq!(lb, blk);
            slack_entries.push((mat, i - 1, v, no));
        } else {
            return Err(parse_err(no, format!("block {blk} does not exist")));
        }
    }
    let mut senses = vec![Sense::Eq; m];
    let mut used = vec![false; lp_blk.map_or(0, |(_, q)| q)];
    for (mat, k, v, no) in slack_entries {
        if mat == 0 {
            return Err(SdpaError::UnsupportedBlockStructure(format!(
                "line {no}: objective entry in the diagonal block"
            )));
        }
        let s = if v == -1.0 {
            Sense::Ge
        } else if v == 1.0 {
            Sense::Le
        } else {
            return Err(SdpaError::UnsupportedBlockStructure(format!(
                "line {no}: diagonal block entries must be ±1"
            )));
        };
        if used[k] || senses[mat - 1] != Sense::Eq {
            return Err(SdpaError::UnsupportedBlockStructure(format!(
                "line {no}: each slack must belong to exactly one constraint"
            )));
        }
        used[k] = true;
        senses[mat - 1] = s;
    }
    let mut it = mats.into_iter().map(|t| SparseSymmetric::from_triplets(n, t).expect("indices checked"));
    let c = it.next().expect("objective");
    let a: Vec<_> = it.collect();
    let sense = if minimize {
        ObjectiveSense::Minimize
    } else {
        ObjectiveSense::Maximize
    };
    SdpProblem::new(sense, c, a, senses, b).map_err(|e| parse_err(0, e.to_string()))
}

fn push_entries<T: Real>(out: &mut String, mat: usize, m: &SparseSymmetric<T>, flip: bool) {
    let mut t: Vec<_> = m.triplets().to_vec();
    t.sort_by_key(|&(r, c, _)| (c, r));
    for (r, c, v) in t {
        let v = v.to_f64_lossy();
        if v == 0.0 {
            continue;
        }
        let v = if flip { -v } else { v };
        let _ = writeln!(out, "{} 1 {} {} {}", mat, c + 1, r + 1, v);
    }
}

pub fn write_sdpa<T: Real>(p: &SdpProblem<T>) -> String {
    let mut out = String::new();
    let minimize = p.objective() == ObjectiveSense::Minimize;
    if minimize {
        out.push_str(MIN_MARKER);
        out.push('\n');
    }
    let q = p.senses().iter().filter(|&&s| s != Sense::Eq).count();
    let _ = writeln!(out, "{}", p.m());
    if q > 0 {
        let _ = writeln!(out, "2\n{} -{}", p.n(), q);
    } else {
        let _ = writeln!(out, "1\n{}", p.n());
    }
    let b: Vec<String> = p.b().iter().map(|v| v.to_f64_lossy().to_string()).collect();
    let _ = writeln!(out, "{}", b.join(" "));
    push_entries(&mut out, 0, p.c(), minimize);
    let mut k = 0;
    for (i, (a, s)) in p.constraints().iter().zip(p.senses()).enumerate() {
        push_entries(&mut out, i + 1, a, false);
        if *s != Sense::Eq {
            k += 1;
            let v = if *s == Sense::Ge { -1 } else { 1 };
            let _ = writeln!(out, "{} 2 {} {} {}", i + 1, k, k, v);
        }
    }
    out
}

pub fn read_sdpa_file<T: Real>(path: impl AsRef<Path>) -> Result<SdpProblem<T>, SdpaError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| SdpaError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_sdpa(&text)
}

pub fn write_sdpa_file<T: Real>(path: impl AsRef<Path>, p: &SdpProblem<T>) -> Result<(), SdpaError> {
    std::fs::write(path.as_ref(), write_sdpa(p))
        .map_err(|e| SdpaError::Io(format!("{}: {e}", path.as_ref().display())))
}
