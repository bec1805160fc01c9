//! Pattern to NFA translation.
//!
//! Patterns are finite: every operator combines the finite languages of
//! its operands (no repetition), so every machine built here recognizes
//! words no longer than the pattern's leaf count.
//!
//! Leaves carry predicate ids, already assigned by the compiler. `;`
//! concatenates, `||` unions, and `&&` builds the shuffle product, which
//! accepts every interleaving of its operands' words. Epsilon edges carry
//! `None`.

/// Pattern over resolved predicate ids.
#[derive(Debug, Clone, PartialEq)]
pub enum SymPattern {
    Sym(u32),
    Seq(Box<SymPattern>, Box<SymPattern>),
    And(Box<SymPattern>, Box<SymPattern>),
    Or(Box<SymPattern>, Box<SymPattern>),
}

/// One start state, one accept state, edges labelled with predicate ids
/// or `None` for epsilon.
#[derive(Debug, Clone)]
pub struct Nfa {
    pub edges: Vec<Vec<(Option<u32>, usize)>>,
    pub start: usize,
    pub accept: usize,
}

impl Nfa {
    pub fn state_count(&self) -> usize {
        self.edges.len()
    }
}

fn leaf(sym: u32) -> Nfa {
    Nfa {
        edges: vec![vec![(Some(sym), 1)], vec![]],
        start: 0,
        accept: 1,
    }
}

fn append_offset(dst: &mut Vec<Vec<(Option<u32>, usize)>>, src: &Nfa, offset: usize) {
    for state_edges in &src.edges {
        dst.push(
            state_edges
                .iter()
                .map(|&(sym, to)| (sym, to + offset))
                .collect(),
        );
    }
}

fn seq(l: Nfa, r: Nfa) -> Nfa {
    let off = l.state_count();
    let mut edges = l.edges;
    append_offset(&mut edges, &r, off);
    edges[l.accept].push((None, r.start + off));
    Nfa {
        edges,
        start: l.start,
        accept: r.accept + off,
    }
}

fn alt(l: Nfa, r: Nfa) -> Nfa {
    let l_off = 0;
    let r_off = l.state_count();
    let start = r_off + r.state_count();
    let accept = start + 1;
    let mut edges = l.edges;
    append_offset(&mut edges, &r, r_off);
    edges.push(vec![(None, l.start + l_off), (None, r.start + r_off)]);
    edges.push(vec![]);
    edges[l.accept + l_off].push((None, accept));
    edges[r.accept + r_off].push((None, accept));
    Nfa { edges, start, accept }
}

/// Pairwise state product; each side's edges are lifted to the product
/// with the other side's component held fixed. Accepts exactly the
/// interleavings of the two operand languages.
fn shuffle(l: Nfa, r: Nfa) -> Nfa {
    let rn = r.state_count();
    let id = |a: usize, b: usize| a * rn + b;
    let mut edges: Vec<Vec<(Option<u32>, usize)>> = vec![Vec::new(); l.state_count() * rn];
    for (a, a_edges) in l.edges.iter().enumerate() {
        for &(sym, a2) in a_edges {
            for b in 0..rn {
                edges[id(a, b)].push((sym, id(a2, b)));
            }
        }
    }
    for (b, b_edges) in r.edges.iter().enumerate() {
        for &(sym, b2) in b_edges {
            for a in 0..l.state_count() {
                edges[id(a, b)].push((sym, id(a, b2)));
            }
        }
    }
    Nfa {
        edges,
        start: id(l.start, r.start),
        accept: id(l.accept, r.accept),
    }
}

/// Translate a pattern into an NFA over its predicate ids.
pub fn build_nfa(pattern: &SymPattern) -> Nfa {
    match pattern {
        SymPattern::Sym(s) => leaf(*s),
        SymPattern::Seq(l, r) => seq(build_nfa(l), build_nfa(r)),
        SymPattern::Or(l, r) => alt(build_nfa(l), build_nfa(r)),
        SymPattern::And(l, r) => shuffle(build_nfa(l), build_nfa(r)),
    }
}
