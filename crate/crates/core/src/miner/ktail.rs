//! Deterministic call-sequence automata: prefix-tree acceptors and k-tail
//! state merging.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub type State = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Automaton {
    num_states: usize,
    init: State,
    accepting: BTreeSet<State>,
    transitions: BTreeMap<(State, String), State>,
}

/// Where a sequence stops being accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// No transition for the symbol at this index.
    Symbol(usize),
    /// Every symbol was consumed but the final state is not accepting.
    End,
}

impl Automaton {
    /// Builds an automaton from its parts. Fails when a referenced state is
    /// out of range.
    pub fn from_parts(
        num_states: usize,
        init: State,
        accepting: BTreeSet<State>,
        transitions: BTreeMap<(State, String), State>,
    ) -> Result<Self, String> {
        let in_range = |s: State| s < num_states;
        if !in_range(init) {
            return Err(format!("initial state {init} out of range"));
        }
        if let Some(s) = accepting.iter().find(|s| !in_range(**s)) {
            return Err(format!("accepting state {s} out of range"));
        }
        if let Some(((s, _), t)) = transitions.iter().find(|((s, _), t)| !in_range(*s) || !in_range(**t)) {
            return Err(format!("transition {s} -> {t} out of range"));
        }
        Ok(Self {
            num_states,
            init,
            accepting,
            transitions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn init(&self) -> State {
        self.init
    }

    pub fn accepting(&self) -> &BTreeSet<State> {
        &self.accepting
    }

    pub fn is_accepting(&self, s: State) -> bool {
        self.accepting.contains(&s)
    }

    pub fn transitions(&self) -> &BTreeMap<(State, String), State> {
        &self.transitions
    }

    pub fn step(&self, s: State, symbol: &str) -> Option<State> {
        self.transitions.get(&(s, symbol.to_string())).copied()
    }

    pub fn alphabet(&self) -> BTreeSet<&str> {
        self.transitions.keys().map(|(_, a)| a.as_str()).collect()
    }

    fn outgoing(&self, s: State) -> impl Iterator<Item = (&str, State)> {
        self.transitions
            .range((s, String::new())..)
            .take_while(move |((from, _), _)| *from == s)
            .map(|((_, a), t)| (a.as_str(), *t))
    }

    pub fn run<S: AsRef<str>>(&self, seq: &[S]) -> Result<State, Rejection> {
        let mut s = self.init;
        for (i, sym) in seq.iter().enumerate() {
            s = self.step(s, sym.as_ref()).ok_or(Rejection::Symbol(i))?;
        }
        if self.is_accepting(s) {
            Ok(s)
        } else {
            Err(Rejection::End)
        }
    }

    pub fn accepts<S: AsRef<str>>(&self, seq: &[S]) -> bool {
        self.run(seq).is_ok()
    }

    /// Every accepted sequence of length at most `max_len`.
    pub fn language(&self, max_len: usize) -> BTreeSet<Vec<String>> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![(self.init, Vec::<String>::new())];
        for depth in 0..=max_len {
            let mut next = Vec::new();
            for (s, word) in frontier {
                if self.is_accepting(s) {
                    out.insert(word.clone());
                }
                if depth < max_len {
                    for (a, t) in self.outgoing(s) {
                        let mut w = word.clone();
                        w.push(a.to_string());
                        next.push((t, w));
                    }
                }
            }
            frontier = next;
        }
        out
    }

    /// Renumbers states breadth-first from the initial state, visiting
    /// successors in lexicographic symbol order. Unreachable states are
    /// dropped.
    pub fn canonical(&self) -> Automaton {
        let mut order: BTreeMap<State, State> = BTreeMap::new();
        let mut queue = VecDeque::from([self.init]);
        order.insert(self.init, 0);
        while let Some(s) = queue.pop_front() {
            for (_, t) in self.outgoing(s) {
                if !order.contains_key(&t) {
                    order.insert(t, order.len());
                    queue.push_back(t);
                }
            }
        }
        let transitions = self
            .transitions
            .iter()
            .filter(|((s, _), _)| order.contains_key(s))
            .map(|((s, a), t)| ((order[s], a.clone()), order[t]))
            .collect();
        Automaton {
            num_states: order.len(),
            init: 0,
            accepting: self
                .accepting
                .iter()
                .filter_map(|s| order.get(s).copied())
                .collect(),
            transitions,
        }
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonical()
    }
}

/// Prefix-tree acceptor: accepts exactly the given sequences.
pub fn build_pta<S: AsRef<str>>(sequences: &[Vec<S>]) -> Automaton {
    let mut num_states = 1;
    let mut accepting = BTreeSet::new();
    let mut transitions: BTreeMap<(State, String), State> = BTreeMap::new();
    for seq in sequences {
        let mut s = 0;
        for sym in seq {
            let key = (s, sym.as_ref().to_string());
            s = *transitions.entry(key).or_insert_with(|| {
                num_states += 1;
                num_states - 1
            });
        }
        accepting.insert(s);
    }
    Automaton {
        num_states,
        init: 0,
        accepting,
        transitions,
    }
    .canonical()
}

/// k-tail of a state: every path of length at most `k` leaving it, each
/// marked with whether it ends in an accepting state.
type Tail = BTreeSet<(Vec<usize>, bool)>;

/// Merges states with equal k-tails, determinizes by merging the targets of
/// clashing transitions, and repeats until nothing merges.
pub fn ktail_merge(pta: &Automaton, k: usize) -> Automaton {
    let mut current = pta.canonical();
    loop {
        let merged = merge_once(&current, k);
        if merged.num_states == current.num_states {
            return merged;
        }
        current = merged;
    }
}

fn merge_once(a: &Automaton, k: usize) -> Automaton {
    let symbols: Vec<&str> = a.alphabet().into_iter().collect();
    let sym_id: BTreeMap<&str, usize> = symbols.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut succ: Vec<Vec<(usize, State)>> = vec![Vec::new(); a.num_states];
    for ((s, sym), t) in &a.transitions {
        succ[*s].push((sym_id[sym.as_str()], *t));
    }

    let mut memo: BTreeMap<(State, usize), Tail> = BTreeMap::new();
    let mut classes: BTreeMap<Tail, Vec<State>> = BTreeMap::new();
    for s in 0..a.num_states {
        classes.entry(tail(a, &succ, s, k, &mut memo)).or_default().push(s);
    }

    let mut uf = UnionFind::new(a.num_states);
    for members in classes.values() {
        for pair in members.windows(2) {
            uf.union(pair[0], pair[1]);
        }
    }

    // determinize: one successor per (block, symbol)
    loop {
        let mut changed = false;
        let mut seen: BTreeMap<(State, usize), State> = BTreeMap::new();
        for (s, outs) in succ.iter().enumerate() {
            for &(sym, t) in outs {
                let key = (uf.find(s), sym);
                match seen.get(&key) {
                    Some(&other) if uf.find(other) != uf.find(t) => {
                        uf.union(other, t);
                        changed = true;
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(key, t);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut transitions = BTreeMap::new();
    for (s, outs) in succ.iter().enumerate() {
        for &(sym, t) in outs {
            transitions.insert((uf.find(s), symbols[sym].to_string()), uf.find(t));
        }
    }
    Automaton {
        num_states: a.num_states,
        init: uf.find(a.init),
        accepting: a.accepting.iter().map(|&s| uf.find(s)).collect(),
        transitions,
    }
    .canonical()
}

fn tail(
    a: &Automaton,
    succ: &[Vec<(usize, State)>],
    s: State,
    k: usize,
    memo: &mut BTreeMap<(State, usize), Tail>,
) -> Tail {
    if let Some(t) = memo.get(&(s, k)) {
        return t.clone();
    }
    let mut out = Tail::new();
    out.insert((Vec::new(), a.is_accepting(s)));
    if k > 0 {
        for &(sym, t) in &succ[s] {
            for (mut path, acc) in tail(a, succ, t, k - 1, memo) {
                path.insert(0, sym);
                out.insert((path, acc));
            }
        }
    }
    memo.insert((s, k), out.clone());
    out
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Smaller index wins so the representative is deterministic.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}
