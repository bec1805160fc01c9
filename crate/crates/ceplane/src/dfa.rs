//! Subset construction producing the match-action transition table.
//!
//! States are numbered by BFS discovery order from the initial state,
//! with outgoing symbols explored in ascending predicate-id order, so
//! equal patterns always compile to identical tables. Unreachable
//! subsets are never materialized.
//!
//! Every accepting subset collapses into one terminal accepting state
//! with no outgoing rows: a match fires the accept action and the
//! machine resets, so nothing ever runs on from an accept. No further
//! state minimization is applied.
//!
//! The table is partial. A missing (state, symbol) row is a miss,
//! handled by the machine's strategy default.

use crate::nfa::Nfa;
use std::collections::{BTreeSet, HashMap, VecDeque};

/// One match-action table row: in `state`, on predicate `symbol`, go to
/// `next`; `accepting` marks rows that fire the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitionRow {
    pub state: u32,
    pub symbol: u32,
    pub next: u32,
    pub accepting: bool,
}

/// Deterministic transition table. State 0 is initial; `accept` is the
/// single terminal accepting state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    pub state_count: u32,
    pub accept: u32,
    pub rows: Vec<TransitionRow>,
}

impl Dfa {
    /// Row lookup by (state, symbol). Linear; the engine builds a map
    /// for its hot path.
    pub fn lookup(&self, state: u32, symbol: u32) -> Option<&TransitionRow> {
        self.rows
            .iter()
            .find(|r| r.state == state && r.symbol == symbol)
    }

    pub fn transition_map(&self) -> HashMap<(u32, u32), (u32, bool)> {
        self.rows
            .iter()
            .map(|r| ((r.state, r.symbol), (r.next, r.accepting)))
            .collect()
    }
}

fn epsilon_closure(nfa: &Nfa, set: &mut BTreeSet<usize>) {
    let mut stack: Vec<usize> = set.iter().copied().collect();
    while let Some(s) = stack.pop() {
        for &(sym, to) in &nfa.edges[s] {
            if sym.is_none() && set.insert(to) {
                stack.push(to);
            }
        }
    }
}

/// Determinize over symbols `0..alphabet`.
///
/// Patterns cannot accept the empty word, so the initial subset is never
/// accepting.
pub fn determinize(nfa: &Nfa, alphabet: u32) -> Dfa {
    let mut start: BTreeSet<usize> = [nfa.start].into();
    epsilon_closure(nfa, &mut start);
    assert!(
        !start.contains(&nfa.accept),
        "pattern accepts the empty word"
    );

    let mut ids: HashMap<BTreeSet<usize>, u32> = HashMap::new();
    let mut queue: VecDeque<BTreeSet<usize>> = VecDeque::new();
    let mut next_id: u32 = 0;
    let mut accept_id: Option<u32> = None;
    let mut rows = Vec::new();

    ids.insert(start.clone(), next_id);
    next_id += 1;
    queue.push_back(start);

    while let Some(subset) = queue.pop_front() {
        let from = ids[&subset];
        for symbol in 0..alphabet {
            let mut target = BTreeSet::new();
            for &s in &subset {
                for &(sym, to) in &nfa.edges[s] {
                    if sym == Some(symbol) {
                        target.insert(to);
                    }
                }
            }
            if target.is_empty() {
                continue;
            }
            epsilon_closure(nfa, &mut target);
            if target.contains(&nfa.accept) {
                let acc = *accept_id.get_or_insert_with(|| {
                    let id = next_id;
                    next_id += 1;
                    id
                });
                rows.push(TransitionRow { state: from, symbol, next: acc, accepting: true });
            } else {
                let to = *ids.entry(target.clone()).or_insert_with(|| {
                    let id = next_id;
                    next_id += 1;
                    queue.push_back(target);
                    id
                });
                rows.push(TransitionRow { state: from, symbol, next: to, accepting: false });
            }
        }
    }

    let accept = accept_id.expect("pattern language is empty");
    Dfa { state_count: next_id, accept, rows }
}
