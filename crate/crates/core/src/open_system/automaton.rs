//! Multi-pattern (Aho–Corasick) automaton over a finite alphabet.

use std::collections::VecDeque;

use crate::symbolic::{Symbol, Word};

/// Deterministic automaton recognising occurrences of a set of words.
///
/// `out_len[node]` is the length of the longest pattern that is a suffix of the
/// string spelled by `node`, or 0. Since occurrences ending at the same position
/// are nested, the longest one is the one that starts first.
#[derive(Clone, Debug)]
pub struct PatternAutomaton {
    alphabet_size: usize,
    goto: Vec<Vec<u32>>,
    out_len: Vec<u16>,
    depth: usize,
}

impl PatternAutomaton {
    pub fn new(words: &[Word], alphabet_size: usize) -> Self {
        let mut goto: Vec<Vec<Option<u32>>> = vec![vec![None; alphabet_size]];
        let mut out_len: Vec<u16> = vec![0];
        let mut depth = 0;
        for w in words {
            depth = depth.max(w.len());
            let mut node = 0usize;
            for &s in w.symbols() {
                node = match goto[node][s as usize] {
                    Some(next) => next as usize,
                    None => {
                        goto.push(vec![None; alphabet_size]);
                        out_len.push(0);
                        let id = goto.len() - 1;
                        goto[node][s as usize] = Some(id as u32);
                        id
                    }
                };
            }
            out_len[node] = out_len[node].max(w.len() as u16);
        }

        let mut fail = vec![0usize; goto.len()];
        let mut full: Vec<Vec<u32>> = vec![vec![0; alphabet_size]; goto.len()];
        let mut queue = VecDeque::new();
        for s in 0..alphabet_size {
            if let Some(child) = goto[0][s] {
                full[0][s] = child;
                queue.push_back(child as usize);
            }
        }
        while let Some(node) = queue.pop_front() {
            out_len[node] = out_len[node].max(out_len[fail[node]]);
            for s in 0..alphabet_size {
                match goto[node][s] {
                    Some(child) => {
                        fail[child as usize] = full[fail[node]][s] as usize;
                        full[node][s] = child;
                        queue.push_back(child as usize);
                    }
                    None => full[node][s] = full[fail[node]][s],
                }
            }
        }
        Self {
            alphabet_size,
            goto: full,
            out_len,
            depth,
        }
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn num_nodes(&self) -> usize {
        self.goto.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Length of the longest pattern.
    pub fn depth(&self) -> usize {
        self.depth
    }

    #[inline]
    pub fn step(&self, node: u32, symbol: Symbol) -> u32 {
        self.goto[node as usize][symbol as usize]
    }

    #[inline]
    pub fn out_len(&self, node: u32) -> usize {
        self.out_len[node as usize] as usize
    }

    /// Earliest 0-based start of an occurrence in `seq`, considering only starts
    /// `<= last_start`.
    pub fn first_occurrence(&self, seq: &[Symbol], last_start: usize) -> Option<usize> {
        let mut node = self.root();
        let mut best: Option<usize> = None;
        for (i, &s) in seq.iter().enumerate() {
            if let Some(b) = best {
                if i >= b + self.depth {
                    break;
                }
            }
            node = self.step(node, s);
            let len = self.out_len(node);
            if len > 0 {
                let start = i + 1 - len;
                if start <= last_start && best.is_none_or(|b| start < b) {
                    best = Some(start);
                }
            }
        }
        best
    }
}
