//! Monotone access-tree policies over `Name:Value` attributes.
//!
//! Grammar (AND binds tighter than OR):
//!
//! ```text
//! expr   := term ("OR" term)*
//! term   := factor ("AND" factor)*
//! factor := attribute | "(" expr ")" | INT "of" "(" expr ("," expr)+ ")"
//! ```
//!
//! Keywords are accepted in upper or lower case. Whitespace around the colon
//! of an attribute is tolerated, so `Division: IS` and `Division:IS` parse to
//! the same leaf.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("policy parse error at byte {offset}: expected {}", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttributeError {
    #[error("attribute {0:?} is not of the form Name:Value")]
    MissingColon(String),
    #[error("attribute {0:?} has an empty name or value")]
    Empty(String),
    #[error("attribute {0:?} contains more than one colon")]
    ExtraColon(String),
    #[error("attribute {0:?} contains a reserved character")]
    Reserved(String),
}

/// A `Name:Value` credential.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Attribute {
    name: String,
    value: String,
}

fn is_reserved(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | ',' | ':')
}

impl Attribute {
    pub fn new(name: &str, value: &str) -> Result<Self, AttributeError> {
        let (name, value) = (name.trim(), value.trim());
        let shown = || format!("{name}:{value}");
        if name.is_empty() || value.is_empty() {
            return Err(AttributeError::Empty(shown()));
        }
        if name.contains(':') || value.contains(':') {
            return Err(AttributeError::ExtraColon(shown()));
        }
        if name.chars().chain(value.chars()).any(is_reserved) {
            return Err(AttributeError::Reserved(shown()));
        }
        if [name, value]
            .iter()
            .any(|w| is_keyword(w, "AND") || is_keyword(w, "OR"))
        {
            return Err(AttributeError::Reserved(shown()));
        }
        Ok(Self {
            name: name.to_owned(),
            value: value.to_owned(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn canonical(&self) -> String {
        format!("{}:{}", self.name, self.value)
    }
}

impl FromStr for Attribute {
    type Err = AttributeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, value) = s
            .split_once(':')
            .ok_or_else(|| AttributeError::MissingColon(s.to_owned()))?;
        Attribute::new(name, value)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.value)
    }
}

impl fmt::Debug for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Set of attributes held by a key. Iteration order is canonical.
#[derive(Clone, PartialEq, Eq, Default, Debug)]
pub struct AttributeSet(BTreeSet<Attribute>);

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a comma-separated list such as `Division:IS, Role:Student`.
    pub fn parse_list(list: &str) -> Result<Self, AttributeError> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }

    pub fn insert(&mut self, attr: Attribute) -> bool {
        self.0.insert(attr)
    }

    pub fn contains(&self, attr: &Attribute) -> bool {
        self.0.contains(attr)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.0.iter()
    }

    pub fn union(&self, other: &AttributeSet) -> AttributeSet {
        AttributeSet(self.0.union(&other.0).cloned().collect())
    }
}

impl FromIterator<Attribute> for AttributeSet {
    fn from_iter<I: IntoIterator<Item = Attribute>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a AttributeSet {
    type Item = &'a Attribute;
    type IntoIter = std::collections::btree_set::Iter<'a, Attribute>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// An access tree. `Gate { threshold: n, .. }` over n children is AND,
/// `threshold: 1` is OR.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Policy {
    Leaf(Attribute),
    Gate {
        threshold: usize,
        children: Vec<Policy>,
    },
}

impl Policy {
    pub fn leaf(attr: Attribute) -> Self {
        Policy::Leaf(attr)
    }

    pub fn and(children: Vec<Policy>) -> Self {
        Policy::Gate {
            threshold: children.len(),
            children,
        }
    }

    pub fn or(children: Vec<Policy>) -> Self {
        Policy::Gate {
            threshold: 1,
            children,
        }
    }

    pub fn threshold(k: usize, children: Vec<Policy>) -> Self {
        Policy::Gate {
            threshold: k,
            children,
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            Policy::Leaf(_) => 1,
            Policy::Gate { children, .. } => children.iter().map(Policy::num_leaves).sum(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Policy::Leaf(_) => 1,
            Policy::Gate { children, .. } => {
                1 + children.iter().map(Policy::depth).max().unwrap_or(0)
            }
        }
    }

    /// Leaves in left-to-right order; this is the order of ciphertext
    /// components.
    pub fn leaves(&self) -> Vec<&Attribute> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Attribute>) {
        match self {
            Policy::Leaf(a) => out.push(a),
            Policy::Gate { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn attributes(&self) -> AttributeSet {
        self.leaves().into_iter().cloned().collect()
    }

    /// Checks `1 <= k <= n` at every gate.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Policy::Leaf(_) => true,
            Policy::Gate {
                threshold,
                children,
            } => {
                *threshold >= 1
                    && *threshold <= children.len()
                    && children.iter().all(Policy::is_well_formed)
            }
        }
    }

    pub fn satisfies(&self, attrs: &AttributeSet) -> bool {
        satisfies(self, attrs)
    }

    /// Canonical text form; parsing it yields an identical tree.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out);
        out
    }

    fn render_into(&self, out: &mut String) {
        match self {
            Policy::Leaf(a) => out.push_str(&a.canonical()),
            Policy::Gate {
                threshold,
                children,
            } => {
                let n = children.len();
                let sep = if *threshold == n && n > 1 {
                    Some(" AND ")
                } else if *threshold == 1 && n > 1 {
                    Some(" OR ")
                } else {
                    None
                };
                match sep {
                    Some(sep) => {
                        for (i, child) in children.iter().enumerate() {
                            if i > 0 {
                                out.push_str(sep);
                            }
                            child.render_operand(out);
                        }
                    }
                    None => {
                        out.push_str(&format!("{threshold} of ("));
                        for (i, child) in children.iter().enumerate() {
                            if i > 0 {
                                out.push_str(", ");
                            }
                            child.render_into(out);
                        }
                        out.push(')');
                    }
                }
            }
        }
    }

    // Nested AND/OR gates are parenthesised so that re-parsing does not
    // merge them into their parent.
    fn render_operand(&self, out: &mut String) {
        match self {
            Policy::Gate {
                threshold,
                children,
            } if children.len() > 1 && (*threshold == 1 || *threshold == children.len()) => {
                out.push('(');
                self.render_into(out);
                out.push(')');
            }
            _ => self.render_into(out),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for Policy {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_policy(s)
    }
}

/// Leaf true iff the attribute is held; gate true iff at least `threshold`
/// children are true.
pub fn satisfies(policy: &Policy, attrs: &AttributeSet) -> bool {
    match policy {
        Policy::Leaf(a) => attrs.contains(a),
        Policy::Gate {
            threshold,
            children,
        } => {
            children
                .iter()
                .filter(|c| satisfies(c, attrs))
                .take(*threshold)
                .count()
                >= *threshold
        }
    }
}

/// Parses and re-renders, yielding the canonical text of a policy.
pub fn canonicalize(text: &str) -> Result<String, ParseError> {
    Ok(parse_policy(text)?.render())
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok<'a> {
    Word(&'a str),
    Colon,
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<(usize, Tok<'a>)> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let c = rest.chars().next()?;
        let tok = match c {
            ':' => Tok::Colon,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                let end = rest.find(is_reserved).unwrap_or(rest.len());
                Tok::Word(&rest[..end])
            }
        };
        Some((self.pos, tok))
    }

    fn bump(&mut self, tok: &Tok<'a>) {
        self.pos += match tok {
            Tok::Word(w) => w.len(),
            _ => 1,
        };
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
}

fn is_keyword(word: &str, kw: &str) -> bool {
    word == kw || word.eq_ignore_ascii_case(kw) && word.chars().all(|c| c.is_ascii_lowercase())
}

impl<'a> Parser<'a> {
    fn err(&self, offset: usize, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset,
            expected: expected.to_vec(),
        }
    }

    fn eof_offset(&self) -> usize {
        self.lex.src.len()
    }

    fn expect(&mut self, want: Tok<'static>, name: &'static str) -> Result<(), ParseError> {
        match self.lex.peek() {
            Some((_, tok)) if tok == want => {
                self.lex.bump(&tok);
                Ok(())
            }
            Some((at, _)) => Err(self.err(at, &[name])),
            None => Err(self.err(self.eof_offset(), &[name])),
        }
    }

    fn peek_keyword(&mut self, kw: &str) -> bool {
        matches!(self.lex.peek(), Some((_, Tok::Word(w))) if is_keyword(w, kw))
    }

    fn expr(&mut self) -> Result<Policy, ParseError> {
        let mut terms = vec![self.term()?];
        while self.peek_keyword("OR") {
            let tok = self.lex.peek().expect("peeked").1;
            self.lex.bump(&tok);
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().expect("one term")
        } else {
            Policy::or(terms)
        })
    }

    fn term(&mut self) -> Result<Policy, ParseError> {
        let mut factors = vec![self.factor()?];
        while self.peek_keyword("AND") {
            let tok = self.lex.peek().expect("peeked").1;
            self.lex.bump(&tok);
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().expect("one factor")
        } else {
            Policy::and(factors)
        })
    }

    fn factor(&mut self) -> Result<Policy, ParseError> {
        const FACTOR: &[&str] = &["attribute", "'('", "threshold"];
        let Some((at, tok)) = self.lex.peek() else {
            return Err(self.err(self.eof_offset(), FACTOR));
        };
        match tok {
            Tok::LParen => {
                self.lex.bump(&tok);
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Word(word)
                if word.bytes().all(|b| b.is_ascii_digit()) && self.is_threshold_ahead(word) =>
            {
                self.lex.bump(&tok);
                self.threshold_gate(at, word)
            }
            Tok::Word(word) => {
                self.lex.bump(&tok);
                self.attribute_rest(at, word)
            }
            _ => Err(self.err(at, FACTOR)),
        }
    }

    fn is_threshold_ahead(&mut self, word: &'a str) -> bool {
        let saved = self.lex.pos;
        self.lex.bump(&Tok::Word(word));
        let ahead = self.peek_keyword("of");
        self.lex.pos = saved;
        ahead
    }

    fn threshold_gate(&mut self, at: usize, digits: &str) -> Result<Policy, ParseError> {
        let (_, of_tok) = self.lex.peek().expect("checked by is_threshold_ahead");
        self.lex.bump(&of_tok);
        self.expect(Tok::LParen, "'('")?;
        let mut children = vec![self.expr()?];
        loop {
            match self.lex.peek() {
                Some((_, Tok::Comma)) => {
                    self.lex.bump(&Tok::Comma);
                    children.push(self.expr()?);
                }
                Some((close_at, Tok::RParen)) => {
                    if children.len() < 2 {
                        return Err(self.err(close_at, &["','"]));
                    }
                    self.lex.bump(&Tok::RParen);
                    break;
                }
                Some((other, _)) => return Err(self.err(other, &["','", "')'"])),
                None => return Err(self.err(self.eof_offset(), &["','", "')'"])),
            }
        }
        let k: usize = digits
            .parse()
            .map_err(|_| self.err(at, &["threshold between 1 and child count"]))?;
        if k == 0 || k > children.len() {
            return Err(self.err(at, &["threshold between 1 and child count"]));
        }
        Ok(Policy::threshold(k, children))
    }

    fn attribute_rest(&mut self, at: usize, name: &str) -> Result<Policy, ParseError> {
        if is_keyword(name, "AND") || is_keyword(name, "OR") {
            return Err(self.err(at, &["attribute", "'('", "threshold"]));
        }
        self.expect(Tok::Colon, "':'")?;
        let value = match self.lex.peek() {
            Some((other, Tok::Word(v))) if is_keyword(v, "AND") || is_keyword(v, "OR") => {
                return Err(self.err(other, &["attribute value"]))
            }
            Some((_, tok @ Tok::Word(v))) => {
                self.lex.bump(&tok);
                v
            }
            Some((other, _)) => return Err(self.err(other, &["attribute value"])),
            None => return Err(self.err(self.eof_offset(), &["attribute value"])),
        };
        Attribute::new(name, value)
            .map(Policy::Leaf)
            .map_err(|_| self.err(at, &["attribute"]))
    }
}

pub fn parse_policy(text: &str) -> Result<Policy, ParseError> {
    let mut p = Parser {
        lex: Lexer { src: text, pos: 0 },
    };
    let policy = p.expr()?;
    match p.lex.peek() {
        None => Ok(policy),
        Some((at, _)) => Err(ParseError {
            offset: at,
            expected: vec!["AND", "OR", "end of input"],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attr(s: &str) -> Attribute {
        s.parse().unwrap()
    }

    fn set(list: &str) -> AttributeSet {
        AttributeSet::parse_list(list).unwrap()
    }

    #[test]
    fn student_policy_is_two_leaf_and() {
        let p = parse_policy("Division:IS AND Role:Student").unwrap();
        assert_eq!(
            p,
            Policy::and(vec![
                Policy::Leaf(attr("Division:IS")),
                Policy::Leaf(attr("Role:Student"))
            ])
        );
        assert_eq!(p.render(), "Division:IS AND Role:Student");
    }

    #[test]
    fn single_attribute_is_leaf() {
        assert_eq!(
            parse_policy("Role:Owner").unwrap(),
            Policy::Leaf(attr("Role:Owner"))
        );
    }

    #[test]
    fn spaced_colon_matches_compact_form() {
        assert_eq!(
            parse_policy("Division: IS AND Role: Staff").unwrap(),
            parse_policy("Division:IS AND Role:Staff").unwrap()
        );
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let p = parse_policy("A:1 OR B:2 AND C:3").unwrap();
        assert_eq!(
            p,
            Policy::or(vec![
                Policy::Leaf(attr("A:1")),
                Policy::and(vec![Policy::Leaf(attr("B:2")), Policy::Leaf(attr("C:3"))]),
            ])
        );
        // truth table oracle: true iff A, or both B and C
        let universe = [attr("A:1"), attr("B:2"), attr("C:3")];
        for mask in 0u8..8 {
            let held: AttributeSet = (0..3)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| universe[i].clone())
                .collect();
            let (a, b, c) = (mask & 1 != 0, mask & 2 != 0, mask & 4 != 0);
            assert_eq!(p.satisfies(&held), a || (b && c), "mask {mask:03b}");
        }
    }

    #[test]
    fn threshold_gate_parses_and_renders() {
        let p = parse_policy("2 of (A:1, B:2, C:3 AND D:4)").unwrap();
        assert!(matches!(&p, Policy::Gate { threshold: 2, children } if children.len() == 3));
        assert_eq!(p.render(), "2 of (A:1, B:2, C:3 AND D:4)");
        assert_eq!(parse_policy(&p.render()).unwrap(), p);
        assert!(p.satisfies(&set("A:1,B:2")));
        assert!(!p.satisfies(&set("A:1,C:3")));
        assert!(p.satisfies(&set("A:1,C:3,D:4")));
    }

    #[test]
    fn nested_gates_keep_their_shape() {
        let p = parse_policy("(A:1 AND B:2) AND C:3").unwrap();
        assert_eq!(p.render(), "(A:1 AND B:2) AND C:3");
        assert_eq!(parse_policy(&p.render()).unwrap(), p);
        assert_ne!(p, parse_policy("A:1 AND B:2 AND C:3").unwrap());
    }

    #[test]
    fn lowercase_keywords_accepted() {
        assert_eq!(
            parse_policy("a:1 and b:2 or c:3").unwrap(),
            parse_policy("a:1 AND b:2 OR c:3").unwrap()
        );
    }

    #[test]
    fn satisfies_paper_staff_example() {
        let p = parse_policy("Division:IS AND Role:Staff").unwrap();
        assert!(p.satisfies(&set("Division:IS, Role:Staff")));
        assert!(!p.satisfies(&set("Division:IS, Role:Student")));
    }

    #[test]
    fn errors_carry_offsets() {
        let e = parse_policy("A:1 AND").unwrap_err();
        assert_eq!(e.offset, 7);
        let e = parse_policy("A:1 B:2").unwrap_err();
        assert_eq!(e.offset, 4);
        assert!(e.expected.contains(&"AND"));
        let e = parse_policy("(A:1").unwrap_err();
        assert_eq!(e.expected, vec!["')'"]);
        assert_eq!(parse_policy("Role").unwrap_err().expected, vec!["':'"]);
        assert!(parse_policy("").is_err());
        assert!(parse_policy("3 of (A:1, B:2)").is_err());
        assert!(parse_policy("0 of (A:1, B:2)").is_err());
        assert!(parse_policy("1 of (A:1)").is_err());
        assert!(parse_policy("A:1:2").is_err());
        assert!(parse_policy("AND:x").is_err());
    }

    #[test]
    fn attribute_validation() {
        assert!("Division:IS".parse::<Attribute>().is_ok());
        assert_eq!(
            " Role : Staff ".parse::<Attribute>().unwrap().canonical(),
            "Role:Staff"
        );
        assert!("NoColon".parse::<Attribute>().is_err());
        assert!(":x".parse::<Attribute>().is_err());
        assert!("a:".parse::<Attribute>().is_err());
        assert!("a:b:c".parse::<Attribute>().is_err());
        assert!("a b:c".parse::<Attribute>().is_err());
    }

    #[test]
    fn leaf_count_and_depth() {
        let p = parse_policy("A:1 OR (B:2 AND 2 of (C:3, D:4, E:5))").unwrap();
        assert_eq!(p.num_leaves(), 5);
        assert_eq!(p.depth(), 4);
        assert!(p.is_well_formed());
    }
}
