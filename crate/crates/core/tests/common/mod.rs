//! Shared helpers for integration tests: fixture loading, dense linear
//! algebra oracles and a hand-coded enumerator for the duplex patterns.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use archdep::errlib::{load_error_library, ErrorLibrary};
use archdep::model::DeclarationSet;
use archdep::pipeline::{analyze, parse_sources, Analysis};
use archdep::statespace::{state_labels, Ctmc, ExpandConfig};

pub fn fixture_path(name: &str) -> PathBuf {
    // shared by both crates of the workspace
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn parse_fixtures(names: &[&str]) -> DeclarationSet {
    let texts: Vec<(String, String)> = names.iter().map(|n| (n.to_string(), fixture(n))).collect();
    parse_sources(texts.iter().map(|(n, t)| (n.as_str(), t.as_str()))).expect("fixtures parse")
}

pub fn library(name: &str) -> ErrorLibrary {
    load_error_library(&fixture(name), name).expect("library loads")
}

pub fn analyze_text(text: &str, root: &str, lib: &ErrorLibrary) -> Analysis {
    let decls = parse_sources([("<test>", text)]).expect("parses");
    analyze(&decls, root, lib, &Default::default(), &ExpandConfig::default()).expect("analyzes")
}

/// Solves πQ = 0, Σπ = 1 by Gaussian elimination with partial pivoting.
pub fn dense_steady_state(q: &[Vec<f64>]) -> Vec<f64> {
    let n = q.len();
    // rows of the system are columns of Q; the last equation is replaced
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| q[j][i]).collect()).collect();
    let mut b = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    b[n - 1] = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] != 0.0 {
                for j in 0..n {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
    }
    c
}

/// exp(Q t) by scaling and squaring of a Taylor series.
pub fn dense_expm(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let norm = q.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let h = t / 2f64.powi(s);
    let a: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|x| x * h).collect()).collect();
    let mut result: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = matmul(&term, &a);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}

/// State key made of sorted display labels, comparable across models.
pub type Key = Vec<String>;
pub type RateMap = BTreeMap<Key, BTreeMap<Key, f64>>;

pub fn ctmc_rate_map(a: &Analysis) -> RateMap {
    rate_map_of(&a.ctmc, |k| {
        let mut l = state_labels(&a.bound, &a.ctmc.states[k]);
        l.sort();
        l
    })
}

fn rate_map_of(ctmc: &Ctmc, key: impl Fn(usize) -> Key) -> RateMap {
    let keys: Vec<Key> = (0..ctmc.len()).map(key).collect();
    let mut out = RateMap::new();
    for (i, row) in ctmc.rows.iter().enumerate() {
        let entry = out.entry(keys[i].clone()).or_default();
        for &(j, r) in row {
            *entry.entry(keys[j].clone()).or_insert(0.0) += r;
        }
    }
    out
}

/// Checks that two chains have the same states and rates within `rel`.
pub fn assert_isomorphic(a: &RateMap, b: &RateMap, rel: f64) {
    let ka: Vec<&Key> = a.keys().collect();
    let kb: Vec<&Key> = b.keys().collect();
    assert_eq!(ka, kb, "state sets differ");
    for (k, row) in a {
        let other = &b[k];
        let ta: Vec<&Key> = row.keys().collect();
        let tb: Vec<&Key> = other.keys().collect();
        assert_eq!(ta, tb, "successors of {k:?} differ");
        for (t, r) in row {
            let s = other[t];
            assert!((r - s).abs() <= rel * r.abs().max(s.abs()), "{k:?} -> {t:?}: {r} vs {s}");
        }
    }
}

pub const EF: u8 = 0;
pub const FV: u8 = 1;
pub const FI: u8 = 2;
const STATE_NAMES: [&str; 3] = ["Error_Free", "FailedVisible", "FailedInvisible"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct St {
    pub e: Vec<u8>,
    pub m: Vec<u8>,
}

/// Per-component failure behaviour of the two-failure-mode automaton.
#[derive(Debug, Clone, Copy)]
pub struct Comp {
    pub lambda: f64,
    pub mu: f64,
    pub visible: f64,
}

/// A duplex pattern written out by hand.
pub trait Rules {
    fn components(&self) -> Vec<(&'static str, Comp)>;
    /// (owner label, mode names, initial mode).
    fn owners(&self) -> Vec<(&'static str, Vec<&'static str>, u8)>;
    fn guards(&self, s: &St) -> Vec<bool>;
    /// Applies the mode switches caused by `fired`; reports a change.
    fn react(&self, s: &mut St, fired: &[bool]) -> bool;
}

fn settle(r: &dyn Rules, pre: Option<&St>, mut cur: St) -> St {
    let mut last = match pre {
        Some(p) => r.guards(p),
        None => vec![false; r.guards(&cur).len()],
    };
    for _ in 0..100 {
        let g = r.guards(&cur);
        let fired: Vec<bool> = g.iter().zip(&last).map(|(a, b)| *a && !*b).collect();
        last = g;
        if !r.react(&mut cur, &fired) {
            return cur;
        }
    }
    panic!("oracle livelock");
}

pub fn oracle_key(r: &dyn Rules, s: &St) -> Key {
    let mut out: Key = r
        .components()
        .iter()
        .zip(&s.e)
        .map(|((n, _), e)| format!("{n}={}", STATE_NAMES[*e as usize]))
        .collect();
    for ((n, modes, _), m) in r.owners().iter().zip(&s.m) {
        out.push(format!("{n}@{}", modes[*m as usize]));
    }
    out.sort();
    out
}

/// Enumerates the reachable chain of `r` directly.
pub fn oracle_chain(r: &dyn Rules) -> (RateMap, Key) {
    let comps = r.components();
    let init = St { e: vec![EF; comps.len()], m: r.owners().iter().map(|o| o.2).collect() };
    let init = settle(r, None, init);
    let mut seen: BTreeMap<St, BTreeMap<St, f64>> = BTreeMap::new();
    let mut stack = vec![init.clone()];
    while let Some(s) = stack.pop() {
        if seen.contains_key(&s) {
            continue;
        }
        let mut out: BTreeMap<St, f64> = BTreeMap::new();
        for (i, (_, c)) in comps.iter().enumerate() {
            let moves: Vec<(u8, f64)> = match s.e[i] {
                EF => vec![(FV, c.lambda * c.visible), (FI, c.lambda * (1.0 - c.visible))],
                _ => vec![(EF, c.mu)],
            };
            for (to, rate) in moves {
                if rate == 0.0 {
                    continue;
                }
                let mut raw = s.clone();
                raw.e[i] = to;
                let t = settle(r, Some(&s), raw);
                if t != s {
                    *out.entry(t.clone()).or_insert(0.0) += rate;
                    stack.push(t);
                }
            }
        }
        seen.insert(s, out);
    }
    let map = seen
        .iter()
        .map(|(s, row)| (oracle_key(r, s), row.iter().map(|(t, x)| (oracle_key(r, t), *x)).collect()))
        .collect();
    (map, oracle_key(r, &init))
}

/// Dense generator of a rate map, states in key order.
pub fn dense_of(map: &RateMap) -> (Vec<Key>, Vec<Vec<f64>>) {
    let keys: Vec<Key> = map.keys().cloned().collect();
    let idx: BTreeMap<&Key, usize> = keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let n = keys.len();
    let mut q = vec![vec![0.0; n]; n];
    for (k, row) in map {
        let i = idx[k];
        for (t, r) in row {
            q[i][idx[t]] += r;
            q[i][i] -= r;
        }
    }
    (keys, q)
}

pub fn has(key: &Key, label: &str) -> bool {
    key.iter().any(|l| l.eq_ignore_ascii_case(label))
}

pub struct Checkpoints {
    pub comp: Comp,
}

impl Rules for Checkpoints {
    fn components(&self) -> Vec<(&'static str, Comp)> {
        vec![("Comp1", self.comp), ("Comp2", self.comp)]
    }
    fn owners(&self) -> Vec<(&'static str, Vec<&'static str>, u8)> {
        vec![("HotStandBy", vec!["Comp1Primary", "Comp2Primary"], 0)]
    }
    fn guards(&self, s: &St) -> Vec<bool> {
        let (e1, e2, m) = (s.e[0], s.e[1], s.m[0]);
        // Comp_i's Receive only sees the other replica while it is primary
        vec![m == 1 && e2 == FV && e1 == EF, m == 0 && e1 == FV && e2 == EF]
    }
    fn react(&self, s: &mut St, fired: &[bool]) -> bool {
        if fired[1] && s.m[0] == 0 {
            s.m[0] = 1;
            true
        } else if fired[0] && s.m[0] == 1 {
            s.m[0] = 0;
            true
        } else {
            false
        }
    }
}

pub struct Controller {
    pub comp: Comp,
    pub controller: Comp,
}

impl Rules for Controller {
    fn components(&self) -> Vec<(&'static str, Comp)> {
        vec![("Comp1", self.comp), ("Comp2", self.comp), ("Controller", self.controller)]
    }
    fn owners(&self) -> Vec<(&'static str, Vec<&'static str>, u8)> {
        vec![("Comp1", vec!["primary", "standby"], 0), ("Comp2", vec!["primary", "standby"], 1)]
    }
    fn guards(&self, s: &St) -> Vec<bool> {
        let (e1, e2, ec) = (s.e[0], s.e[1], s.e[2]);
        // Prim1, Prim2
        vec![e2 == FV && e1 == EF && ec == EF, e1 == FV && e2 == EF && ec == EF]
    }
    fn react(&self, s: &mut St, fired: &[bool]) -> bool {
        let mut changed = false;
        for (prim, other) in [(0, 1), (1, 0)] {
            if fired[prim] {
                // BePrim on `prim`, InStandby on the other replica
                if s.m[prim] == 1 {
                    s.m[prim] = 0;
                    changed = true;
                }
                if s.m[other] == 0 {
                    s.m[other] = 1;
                    changed = true;
                }
            }
        }
        changed
    }
}

pub struct Mutual {
    pub comp: Comp,
}

const PRIMARY: u8 = 0;
const STANDBY: u8 = 1;
const REBOOT: u8 = 2;

impl Rules for Mutual {
    fn components(&self) -> Vec<(&'static str, Comp)> {
        vec![("Comp1", self.comp), ("Comp2", self.comp)]
    }
    fn owners(&self) -> Vec<(&'static str, Vec<&'static str>, u8)> {
        let modes = vec!["primary", "standby", "reboot"];
        vec![("Comp1", modes.clone(), PRIMARY), ("Comp2", modes, STANDBY)]
    }
    fn guards(&self, s: &St) -> Vec<bool> {
        let mut g = Vec::new();
        for (me, other) in [(0, 1), (1, 0)] {
            let (a, b) = (s.e[me], s.e[other]);
            // IFailed, IPrim, IStandby
            g.extend([a != EF, b == FV && a == EF, b == EF && a == EF]);
        }
        g
    }
    fn react(&self, s: &mut St, fired: &[bool]) -> bool {
        let mut changed = false;
        for i in 0..2 {
            let (failed, prim, standby) = (fired[3 * i], fired[3 * i + 1], fired[3 * i + 2]);
            let next = match s.m[i] {
                PRIMARY if failed => Some(REBOOT),
                STANDBY if failed => Some(REBOOT),
                STANDBY if prim => Some(PRIMARY),
                REBOOT if prim => Some(PRIMARY),
                REBOOT if standby => Some(STANDBY),
                _ => None,
            };
            if let Some(m) = next {
                s.m[i] = m;
                changed = true;
            }
        }
        changed
    }
}

/// Default parameters of the generated patterns.
pub fn default_replica() -> Comp {
    Comp { lambda: 1e-3, mu: 1.0, visible: 0.9 }
}

pub fn default_controller() -> Comp {
    Comp { lambda: 1e-6, mu: 1.0, visible: 0.9 }
}
