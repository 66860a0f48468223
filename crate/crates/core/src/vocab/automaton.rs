//! Byte-level Aho-Corasick automaton reporting every (overlapping) match.
//!
//! The trie is compiled into a dense DFA: one 256-entry row per state, with
//! failure transitions already resolved, so the search loop is a single table
//! lookup per input byte.

use std::collections::VecDeque;

const ROOT: u32 = 0;

#[derive(Debug, Clone)]
pub(crate) struct Automaton {
    delta: Vec<u32>,
    // pattern ids ending at each state, including those reached via failure links
    outputs: Vec<Vec<u32>>,
    pattern_lens: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RawMatch {
    pub pattern: u32,
    pub start: usize,
    pub end: usize,
}

impl Automaton {
    pub fn new<P: AsRef<[u8]>>(patterns: &[P]) -> Automaton {
        // trie with sparse children, then densified
        let mut children: Vec<Vec<(u8, u32)>> = vec![Vec::new()];
        let mut outputs: Vec<Vec<u32>> = vec![Vec::new()];
        for (id, pattern) in patterns.iter().enumerate() {
            let mut state = ROOT;
            for &byte in pattern.as_ref() {
                let next = children[state as usize].iter().find(|(b, _)| *b == byte).map(|&(_, s)| s);
                state = match next {
                    Some(s) => s,
                    None => {
                        let s = children.len() as u32;
                        children.push(Vec::new());
                        outputs.push(Vec::new());
                        children[state as usize].push((byte, s));
                        s
                    }
                };
            }
            outputs[state as usize].push(id as u32);
        }

        let n = children.len();
        let mut delta = vec![ROOT; n * 256];
        let mut fail = vec![ROOT; n];
        let mut queue = VecDeque::new();
        for &(byte, s) in &children[ROOT as usize] {
            delta[byte as usize] = s;
            queue.push_back(s);
        }
        while let Some(state) = queue.pop_front() {
            let s = state as usize;
            let f = fail[s] as usize;
            let inherited = outputs[f].clone();
            outputs[s].extend(inherited);
            // unresolved bytes follow the failure state's row
            let (row, fail_row) = (s * 256, f * 256);
            for byte in 0..256 {
                delta[row + byte] = delta[fail_row + byte];
            }
            for &(byte, child) in &children[s] {
                fail[child as usize] = delta[fail_row + byte as usize];
                delta[row + byte as usize] = child;
                queue.push_back(child);
            }
        }
        for out in &mut outputs {
            out.sort_unstable();
            out.dedup();
        }

        Automaton {
            delta,
            outputs,
            pattern_lens: patterns.iter().map(|p| p.as_ref().len()).collect(),
        }
    }

    #[cfg(test)]
    pub fn state_count(&self) -> usize {
        self.outputs.len()
    }

    /// All occurrences of all patterns, ordered by end position then
    /// pattern id.
    pub fn find_overlapping(&self, haystack: &[u8]) -> Vec<RawMatch> {
        let mut found = Vec::new();
        let mut state = ROOT as usize;
        for (i, &byte) in haystack.iter().enumerate() {
            state = self.delta[state * 256 + byte as usize] as usize;
            for &pattern in &self.outputs[state] {
                let end = i + 1;
                let len = self.pattern_lens[pattern as usize];
                if len == 0 {
                    continue;
                }
                found.push(RawMatch {
                    pattern,
                    start: end - len,
                    end,
                });
            }
        }
        found
    }
}
