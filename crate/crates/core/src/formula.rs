//! Modal formula AST, concrete syntax and uniform substitution.
//!
//! Concrete syntax (ASCII, Unicode aliases accepted on input):
//!
//! | construct | ASCII        | alias |
//! |-----------|--------------|-------|
//! | box       | `[]f`        | `□f`  |
//! | diamond   | `<>f`        | `◇f`  |
//! | negation  | `!f`         | `¬f`  |
//! | and / or  | `f & g`, `f \| g` | `∧`, `∨` |
//! | implies   | `f -> g`     | `→`   |
//! | iff       | `f <-> g`    | `↔`   |
//! | constants | `true`, `false` | `⊤`, `⊥` |
//!
//! Unary operators bind tightest, then `&`, `|`, `->` (right associative) and
//! finally `<->`. `&`, `|` and `<->` associate to the left.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "FormulaTree", into = "FormulaTree")]
pub enum Formula {
    Atom(String),
    Top,
    Bot,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Box(Box<Formula>),
    Diamond(Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn nec(f: Formula) -> Self {
        Formula::Box(Box::new(f))
    }

    pub fn poss(f: Formula) -> Self {
        Formula::Diamond(Box::new(f))
    }

    /// Left-nested conjunction; the empty conjunction is `Top`.
    pub fn conj<I: IntoIterator<Item = Formula>>(items: I) -> Self {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::Top)
    }

    /// Left-nested disjunction; the empty disjunction is `Bot`.
    pub fn disj<I: IntoIterator<Item = Formula>>(items: I) -> Self {
        items.into_iter().reduce(Formula::or).unwrap_or(Formula::Bot)
    }

    /// Maximum nesting of `Box`/`Diamond`.
    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::Top | Formula::Bot => 0,
            Formula::Not(f) => f.modal_depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.modal_depth().max(b.modal_depth())
            }
            Formula::Box(f) | Formula::Diamond(f) => 1 + f.modal_depth(),
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::Top | Formula::Bot => 1,
            Formula::Not(f) | Formula::Box(f) | Formula::Diamond(f) => 1 + f.size(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(name) => {
                out.insert(name.clone());
            }
            Formula::Top | Formula::Bot => {}
            Formula::Not(f) | Formula::Box(f) | Formula::Diamond(f) => f.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Uniform substitution: every atom occurrence is replaced simultaneously.
    pub fn substitute(&self, sub: &Substitution) -> Formula {
        match self {
            Formula::Atom(name) => sub
                .bindings
                .get(name)
                .cloned()
                .unwrap_or_else(|| self.clone()),
            Formula::Top | Formula::Bot => self.clone(),
            Formula::Not(f) => Formula::not(f.substitute(sub)),
            Formula::And(a, b) => Formula::and(a.substitute(sub), b.substitute(sub)),
            Formula::Or(a, b) => Formula::or(a.substitute(sub), b.substitute(sub)),
            Formula::Implies(a, b) => Formula::implies(a.substitute(sub), b.substitute(sub)),
            Formula::Iff(a, b) => Formula::iff(a.substitute(sub), b.substitute(sub)),
            Formula::Box(f) => Formula::nec(f.substitute(sub)),
            Formula::Diamond(f) => Formula::poss(f.substitute(sub)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Iff(..) => 1,
            Formula::Implies(..) => 2,
            Formula::Or(..) => 3,
            Formula::And(..) => 4,
            Formula::Not(_) | Formula::Box(_) | Formula::Diamond(_) => 5,
            Formula::Atom(_) | Formula::Top | Formula::Bot => 6,
        }
    }

    fn write_operand(&self, out: &mut String, parens: bool) {
        if parens {
            out.push('(');
            self.write_to(out);
            out.push(')');
        } else {
            self.write_to(out);
        }
    }

    fn write_to(&self, out: &mut String) {
        match self {
            Formula::Atom(name) => out.push_str(name),
            Formula::Top => out.push_str("true"),
            Formula::Bot => out.push_str("false"),
            Formula::Not(f) => {
                out.push('!');
                f.write_operand(out, f.precedence() < 6);
            }
            Formula::Box(f) => {
                out.push_str("[]");
                f.write_operand(out, f.precedence() < 5);
            }
            Formula::Diamond(f) => {
                out.push_str("<>");
                f.write_operand(out, f.precedence() < 5);
            }
            Formula::And(a, b) => self.write_binary(out, a, b, " & ", false),
            Formula::Or(a, b) => self.write_binary(out, a, b, " | ", false),
            Formula::Implies(a, b) => self.write_binary(out, a, b, " -> ", true),
            Formula::Iff(a, b) => self.write_binary(out, a, b, " <-> ", false),
        }
    }

    fn write_binary(&self, out: &mut String, a: &Formula, b: &Formula, op: &str, right_assoc: bool) {
        let p = self.precedence();
        let (left_parens, right_parens) = if right_assoc {
            (a.precedence() <= p, b.precedence() < p)
        } else {
            (a.precedence() < p, b.precedence() <= p)
        };
        a.write_operand(out, left_parens);
        out.push_str(op);
        b.write_operand(out, right_parens);
    }

    /// Renders in the ASCII grammar with the minimal parentheses that
    /// `parse` needs to rebuild the same tree.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write_to(&mut out);
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Finite map from atom names to formulas; unmapped atoms are fixed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub bindings: BTreeMap<String, Formula>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(mut self, atom: impl Into<String>, f: Formula) -> Self {
        self.bindings.insert(atom.into(), f);
        self
    }

    /// `self ; then`: substituting with the result equals substituting with
    /// `self` first and `then` afterwards.
    pub fn compose(&self, then: &Substitution) -> Substitution {
        let mut bindings: BTreeMap<String, Formula> = self
            .bindings
            .iter()
            .map(|(k, v)| (k.clone(), v.substitute(then)))
            .collect();
        for (k, v) in &then.bindings {
            bindings.entry(k.clone()).or_insert_with(|| v.clone());
        }
        Substitution { bindings }
    }
}

impl FromIterator<(String, Formula)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Formula)>>(iter: I) -> Self {
        Substitution {
            bindings: iter.into_iter().collect(),
        }
    }
}

pub fn substitute(f: &Formula, sub: &Substitution) -> Formula {
    f.substitute(sub)
}

pub fn modal_depth(f: &Formula) -> usize {
    f.modal_depth()
}

pub fn render(f: &Formula) -> String {
    f.render()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {position}: {message}")]
pub struct ParseError {
    /// Character offset into the input.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    True,
    False,
    Not,
    Nec,
    Poss,
    And,
    Or,
    Implies,
    Iff,
    LParen,
    RParen,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '.' | '\'')
}

/// Whether `name` can be used as an atom in the concrete syntax.
pub fn is_valid_atom(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if is_ident_start(c) => {}
        _ => return false,
    }
    chars.all(is_ident_continue) && name != "true" && name != "false"
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let err = |position: usize, message: String| ParseError { position, message };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let rest = |s: &str| chars[i..].iter().take(s.chars().count()).copied().eq(s.chars());
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => {
                i += 1;
                Token::LParen
            }
            ')' => {
                i += 1;
                Token::RParen
            }
            '!' | '¬' | '~' => {
                i += 1;
                Token::Not
            }
            '&' | '∧' => {
                i += 1;
                Token::And
            }
            '|' | '∨' => {
                i += 1;
                Token::Or
            }
            '□' => {
                i += 1;
                Token::Nec
            }
            '◇' => {
                i += 1;
                Token::Poss
            }
            '→' => {
                i += 1;
                Token::Implies
            }
            '↔' => {
                i += 1;
                Token::Iff
            }
            '⊤' => {
                i += 1;
                Token::True
            }
            '⊥' => {
                i += 1;
                Token::False
            }
            '[' if rest("[]") => {
                i += 2;
                Token::Nec
            }
            '<' if rest("<->") => {
                i += 3;
                Token::Iff
            }
            '<' if rest("<>") => {
                i += 2;
                Token::Poss
            }
            '-' if rest("->") => {
                i += 2;
                Token::Implies
            }
            c if is_ident_start(c) => {
                while i < chars.len() && is_ident_continue(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                match word.as_str() {
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Ident(word),
                }
            }
            other => return Err(err(start, format!("unexpected character {other:?}"))),
        };
        tokens.push((start, tok));
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn eat(&mut self, tok: &Token) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn iff(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.implies()?;
        while self.eat(&Token::Iff) {
            let rhs = self.implies()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if self.eat(&Token::Implies) {
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.eat(&Token::Or) {
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Token::And) {
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("unexpected end of input");
        };
        self.pos += 1;
        match tok {
            Token::Not => Ok(Formula::not(self.unary()?)),
            Token::Nec => Ok(Formula::nec(self.unary()?)),
            Token::Poss => Ok(Formula::poss(self.unary()?)),
            Token::True => Ok(Formula::Top),
            Token::False => Ok(Formula::Bot),
            Token::Ident(name) => Ok(Formula::Atom(name)),
            Token::LParen => {
                let inner = self.iff()?;
                if !self.eat(&Token::RParen) {
                    return self.error("expected ')'");
                }
                Ok(inner)
            }
            other => {
                self.pos -= 1;
                self.error(format!("unexpected token {other:?}"))
            }
        }
    }
}

/// Parses the ASCII grammar described in the module docs.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.chars().count(),
    };
    let f = parser.iff()?;
    if parser.pos != parser.tokens.len() {
        return parser.error("trailing input");
    }
    Ok(f)
}

/// JSON tree form: `{"op": "and", "args": [...]}`, atoms as
/// `{"op": "atom", "name": "p"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormulaTree {
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<FormulaTree>,
}

impl From<Formula> for FormulaTree {
    fn from(f: Formula) -> Self {
        let node = |op: &str, args: Vec<Formula>| FormulaTree {
            op: op.to_string(),
            name: None,
            args: args.into_iter().map(FormulaTree::from).collect(),
        };
        match f {
            Formula::Atom(name) => FormulaTree {
                op: "atom".into(),
                name: Some(name),
                args: vec![],
            },
            Formula::Top => node("top", vec![]),
            Formula::Bot => node("bot", vec![]),
            Formula::Not(a) => node("not", vec![*a]),
            Formula::And(a, b) => node("and", vec![*a, *b]),
            Formula::Or(a, b) => node("or", vec![*a, *b]),
            Formula::Implies(a, b) => node("implies", vec![*a, *b]),
            Formula::Iff(a, b) => node("iff", vec![*a, *b]),
            Formula::Box(a) => node("box", vec![*a]),
            Formula::Diamond(a) => node("diamond", vec![*a]),
        }
    }
}

impl TryFrom<FormulaTree> for Formula {
    type Error = String;

    fn try_from(tree: FormulaTree) -> Result<Self, Self::Error> {
        let arity = tree.args.len();
        let mut args = tree
            .args
            .into_iter()
            .map(Formula::try_from)
            .collect::<Result<Vec<_>, _>>()?
            .into_iter();
        let expect = |n: usize| {
            if arity == n {
                Ok(())
            } else {
                Err(format!("operator {:?} takes {n} argument(s), got {arity}", tree.op))
            }
        };
        let f = match tree.op.as_str() {
            "atom" => {
                expect(0)?;
                let name = tree.name.ok_or("atom without name")?;
                if !is_valid_atom(&name) {
                    return Err(format!("invalid atom name {name:?}"));
                }
                Formula::Atom(name)
            }
            "top" => {
                expect(0)?;
                Formula::Top
            }
            "bot" => {
                expect(0)?;
                Formula::Bot
            }
            "not" | "box" | "diamond" => {
                expect(1)?;
                let a = args.next().unwrap();
                match tree.op.as_str() {
                    "not" => Formula::not(a),
                    "box" => Formula::nec(a),
                    _ => Formula::poss(a),
                }
            }
            "and" | "or" | "implies" | "iff" => {
                expect(2)?;
                let (a, b) = (args.next().unwrap(), args.next().unwrap());
                match tree.op.as_str() {
                    "and" => Formula::and(a, b),
                    "or" => Formula::or(a, b),
                    "implies" => Formula::implies(a, b),
                    _ => Formula::iff(a, b),
                }
            }
            other => return Err(format!("unknown operator {other:?}")),
        };
        Ok(f)
    }
}
