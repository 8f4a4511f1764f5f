//! Test-side policy model, kept independent of the library's parser and
//! evaluator so it can serve as an oracle.
#![allow(dead_code)]

use iotacap::abe::AttributeSet;
use iotacap::tangle::Transaction;
use proptest::prelude::*;

pub const UNIVERSE: [&str; 6] = [
    "Division:IS",
    "Division:CS",
    "Role:Student",
    "Role:Staff",
    "Level:Senior",
    "Campus:Main",
];

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Leaf(usize),
    Gate(usize, Vec<Expr>),
}

impl Expr {
    pub fn render(&self) -> String {
        match self {
            Expr::Leaf(i) => UNIVERSE[*i].to_owned(),
            Expr::Gate(k, kids) => {
                let parts: Vec<String> = kids.iter().map(Expr::render).collect();
                if *k == kids.len() && kids.len() > 1 {
                    format!("({})", parts.join(" AND "))
                } else if *k == 1 && kids.len() > 1 {
                    format!("({})", parts.join(" OR "))
                } else {
                    format!("{k} of ({})", parts.join(", "))
                }
            }
        }
    }

    /// `mask` bit i set means UNIVERSE[i] is held.
    pub fn eval(&self, mask: u32) -> bool {
        match self {
            Expr::Leaf(i) => mask & (1 << i) != 0,
            Expr::Gate(k, kids) => kids.iter().filter(|c| c.eval(mask)).count() >= *k,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Leaf(_) => 1,
            Expr::Gate(_, kids) => 1 + kids.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }
}

pub fn attrs_of(mask: u32) -> AttributeSet {
    let list: Vec<&str> = (0..6)
        .filter(|i| mask & (1 << i) != 0)
        .map(|i| UNIVERSE[i])
        .collect();
    AttributeSet::parse_list(&list.join(", ")).unwrap()
}

/// Depth ≤ 2: the six leaves, binary AND/OR over distinct leaf pairs, and
/// 2-of-3 over distinct leaf triples.
fn up_to_depth_two() -> Vec<Expr> {
    let mut out: Vec<Expr> = (0..6).map(Expr::Leaf).collect();
    for a in 0..6 {
        for b in a + 1..6 {
            for k in [1, 2] {
                out.push(Expr::Gate(k, vec![Expr::Leaf(a), Expr::Leaf(b)]));
            }
            for c in b + 1..6 {
                out.push(Expr::Gate(
                    2,
                    vec![Expr::Leaf(a), Expr::Leaf(b), Expr::Leaf(c)],
                ));
            }
        }
    }
    out
}

/// Every depth ≤ 2 tree above plus every binary AND/OR over an unordered
/// pair of distinct depth ≤ 2 trees.
pub fn depth_three_corpus() -> Vec<Expr> {
    let base = up_to_depth_two();
    let mut out = base.clone();
    for i in 0..base.len() {
        for j in i + 1..base.len() {
            for k in [1, 2] {
                out.push(Expr::Gate(k, vec![base[i].clone(), base[j].clone()]));
            }
        }
    }
    out
}

pub fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = (0usize..6).prop_map(Expr::Leaf);
    leaf.prop_recursive(2, 12, 4, |inner| {
        prop::collection::vec(inner, 2..=4).prop_flat_map(|kids| {
            let n = kids.len();
            (1..=n).prop_map(move |k| Expr::Gate(k, kids.clone()))
        })
    })
}

// Bit `bit` of the field concatenation id|address|payload|indices|trunk|branch|nonce|timestamp.
pub fn flip_bit(tx: &mut Transaction, bit: usize) {
    let mut byte = bit / 8;
    let mask = 1u8 << (bit % 8);
    let mut fixed: Vec<&mut [u8]> = vec![&mut tx.id.0, &mut tx.address.0, &mut tx.payload];
    for f in fixed.iter_mut() {
        if byte < f.len() {
            f[byte] ^= mask;
            return;
        }
        byte -= f.len();
    }
    let mut idx = tx.fragment_index.to_be_bytes();
    let mut tot = tx.fragment_total.to_be_bytes();
    let mut ts = tx.timestamp.to_be_bytes();
    let mut rest: Vec<&mut [u8]> = vec![
        &mut idx,
        &mut tot,
        &mut tx.trunk.0,
        &mut tx.branch.0,
        &mut tx.nonce,
        &mut ts,
    ];
    for f in rest.iter_mut() {
        if byte < f.len() {
            f[byte] ^= mask;
            break;
        }
        byte -= f.len();
    }
    tx.fragment_index = u32::from_be_bytes(idx);
    tx.fragment_total = u32::from_be_bytes(tot);
    tx.timestamp = u64::from_be_bytes(ts);
}

pub fn field_bits(tx: &Transaction) -> usize {
    (32 + 32 + tx.payload.len() + 4 + 4 + 32 + 32 + 8 + 8) * 8
}
