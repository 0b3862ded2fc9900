//! Tolerant syntax profiling for candidate source code.
//!
//! A purpose-built tokenizer over the common subset of Python-style
//! candidate code classifies tokens into a fixed 15-construct taxonomy and
//! counts branch points for cyclomatic complexity. It is deliberately not a
//! full parser: strings, comments, and brackets are tracked exactly; the
//! rest is token-level classification, which keeps profiling deterministic
//! and crash-free on the long tail of generated code. Sources that fail the
//! hard lexical checks (unterminated string, unbalanced brackets, empty
//! input) are reported as unprofiled rather than crashing a report.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The fixed construct taxonomy for syntax histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construct {
    /// `def`, `lambda`.
    FunctionDef,
    /// `if`, `elif` (ternary `if` included).
    Conditional,
    /// `for` and `while` loop heads outside brackets.
    Loop,
    /// Name followed by a call parenthesis.
    Call,
    /// Plain, augmented, and walrus assignments.
    Assignment,
    /// `return`, `yield`.
    Return,
    /// `==`, `!=`, `<`, `>`, `<=`, `>=`, `is`, and non-loop `in`.
    Comparison,
    /// `and`, `or`, `not`.
    BooleanOp,
    /// Arithmetic and bitwise binary operators.
    ArithmeticOp,
    /// Numbers, strings, `True`, `False`, `None`.
    Literal,
    /// Identifier occurrences.
    Identifier,
    /// `except` clauses.
    ExceptionHandler,
    /// Comprehension `for`s and collection initializers.
    Initializer,
    /// `import` statements.
    Import,
    /// Everything recognized but not classified above.
    Other,
}

/// All 15 constructs in histogram order.
pub const ALL_CONSTRUCTS: [Construct; 15] = [
    Construct::FunctionDef,
    Construct::Conditional,
    Construct::Loop,
    Construct::Call,
    Construct::Assignment,
    Construct::Return,
    Construct::Comparison,
    Construct::BooleanOp,
    Construct::ArithmeticOp,
    Construct::Literal,
    Construct::Identifier,
    Construct::ExceptionHandler,
    Construct::Initializer,
    Construct::Import,
    Construct::Other,
];

/// Histogram over the construct taxonomy plus control-flow metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxProfile {
    pub node_histogram: BTreeMap<Construct, u32>,
    /// 1 + branch points: conditionals, loop heads (including comprehension
    /// `for`s), `and`/`or` connectives, and exception handlers.
    pub cyclomatic: u32,
    /// Non-blank source lines.
    pub lines: u32,
}

impl SyntaxProfile {
    /// Total categorized nodes.
    pub fn node_total(&self) -> u64 {
        self.node_histogram.values().map(|c| *c as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("source is empty")]
    EmptySource,
    #[error("unterminated string literal starting at line {0}")]
    UnterminatedString(u32),
    #[error("unbalanced brackets")]
    UnbalancedBrackets,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Number,
    Str,
    Op(&'static str),
    OpenParen,
    OpenBracket,
    OpenBrace,
    CloseDelim,
    /// End of a logical (depth-zero) line.
    Newline,
}

const PYTHON_KEYWORDS: &[&str] = &[
    "def", "lambda", "if", "elif", "else", "for", "while", "and", "or", "not", "return",
    "yield", "except", "import", "from", "try", "finally", "raise", "in", "is", "as", "pass",
    "break", "continue", "global", "nonlocal", "del", "assert", "with", "class", "await",
    "async", "True", "False", "None",
];

fn is_keyword(word: &str) -> bool {
    PYTHON_KEYWORDS.contains(&word)
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    depth: i32,
    source: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(source: &'a str) -> Self {
        Self {
            chars: source.chars().collect(),
            pos: 0,
            line: 1,
            depth: 0,
            source,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn eat_string(&mut self, quote: char) -> Result<(), ParseFailure> {
        let start_line = self.line;
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
            loop {
                match self.peek() {
                    None => return Err(ParseFailure::UnterminatedString(start_line)),
                    Some(c)
                        if c == quote
                            && self.peek_at(1) == Some(quote)
                            && self.peek_at(2) == Some(quote) =>
                    {
                        self.bump();
                        self.bump();
                        self.bump();
                        return Ok(());
                    }
                    Some('\\') => {
                        self.bump();
                        self.bump();
                    }
                    Some(_) => {
                        self.bump();
                    }
                }
            }
        }
        loop {
            match self.bump() {
                None => return Err(ParseFailure::UnterminatedString(start_line)),
                Some(c) if c == quote => return Ok(()),
                Some('\\') => {
                    self.bump();
                }
                Some('\n') => return Err(ParseFailure::UnterminatedString(start_line)),
                Some(_) => {}
            }
        }
    }

    fn tokenize(mut self) -> Result<Vec<Tok>, ParseFailure> {
        let mut toks = Vec::new();
        while let Some(c) = self.peek() {
            match c {
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        toks.push(Tok::Newline);
                    }
                }
                c if c.is_whitespace() => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '"' | '\'' => {
                    self.bump();
                    self.eat_string(c)?;
                    toks.push(Tok::Str);
                }
                c if c.is_ascii_digit() => {
                    while let Some(c) = self.peek() {
                        if c.is_ascii_alphanumeric() || c == '.' || c == '_' {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    toks.push(Tok::Number);
                }
                c if c.is_alphanumeric() || c == '_' => {
                    let mut word = String::new();
                    while let Some(c) = self.peek() {
                        if c.is_alphanumeric() || c == '_' {
                            word.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    // String prefixes like r"...", f'...', rb"..." lex as a
                    // word glued to a quote.
                    if matches!(self.peek(), Some('"') | Some('\''))
                        && word.len() <= 2
                        && word.chars().all(|c| "rbfuRBFU".contains(c))
                    {
                        let quote = self.bump().expect("peeked");
                        self.eat_string(quote)?;
                        toks.push(Tok::Str);
                    } else {
                        toks.push(Tok::Word(word));
                    }
                }
                '(' => {
                    self.bump();
                    self.depth += 1;
                    toks.push(Tok::OpenParen);
                }
                '[' => {
                    self.bump();
                    self.depth += 1;
                    toks.push(Tok::OpenBracket);
                }
                '{' => {
                    self.bump();
                    self.depth += 1;
                    toks.push(Tok::OpenBrace);
                }
                ')' | ']' | '}' => {
                    self.bump();
                    self.depth -= 1;
                    if self.depth < 0 {
                        return Err(ParseFailure::UnbalancedBrackets);
                    }
                    toks.push(Tok::CloseDelim);
                }
                _ => {
                    let op = self.lex_operator();
                    toks.push(op);
                }
            }
        }
        if self.depth != 0 {
            return Err(ParseFailure::UnbalancedBrackets);
        }
        if self.source.trim().is_empty() {
            return Err(ParseFailure::EmptySource);
        }
        Ok(toks)
    }

    fn lex_operator(&mut self) -> Tok {
        // Longest-match over the operator table; unknown punctuation falls
        // through as a one-character glyph.
        const OPS: &[&str] = &[
            "**=", "//=", ">>=", "<<=", "==", "!=", "<=", ">=", "->", ":=", "+=", "-=", "*=",
            "/=", "%=", "&=", "|=", "^=", "**", "//", "<<", ">>", "=", "<", ">", "+", "-", "*",
            "/", "%", "&", "|", "^", "~", "@", ".", ",", ":", ";", "\\",
        ];
        for op in OPS {
            let pattern: Vec<char> = op.chars().collect();
            if self.chars[self.pos..].starts_with(pattern.as_slice()) {
                for _ in 0..pattern.len() {
                    self.bump();
                }
                return Tok::Op(op);
            }
        }
        self.bump();
        Tok::Op("?")
    }
}

fn classify(toks: &[Tok]) -> (BTreeMap<Construct, u32>, u32) {
    let mut histogram: BTreeMap<Construct, u32> = BTreeMap::new();
    let mut branch_points = 0u32;
    let mut depth = 0i32;
    // Set after a `for`, cleared by its structural `in` or line end.
    let mut awaiting_for_in = false;
    // Names right after `def`/`class` are definitions, not calls.
    let mut after_def = false;

    fn count(hist: &mut BTreeMap<Construct, u32>, c: Construct) {
        *hist.entry(c).or_insert(0) += 1;
    }

    for (i, tok) in toks.iter().enumerate() {
        match tok {
            Tok::Newline => {
                awaiting_for_in = false;
                after_def = false;
            }
            Tok::Word(word) if is_keyword(word) => {
                let was_def = word == "def" || word == "class";
                match word.as_str() {
                    "def" | "lambda" => count(&mut histogram, Construct::FunctionDef),
                    "class" => count(&mut histogram, Construct::Other),
                    "if" | "elif" => {
                        count(&mut histogram, Construct::Conditional);
                        branch_points += 1;
                    }
                    "while" => {
                        count(&mut histogram, Construct::Loop);
                        branch_points += 1;
                    }
                    "for" => {
                        // A `for` inside brackets is a comprehension clause.
                        let construct = if depth > 0 {
                            Construct::Initializer
                        } else {
                            Construct::Loop
                        };
                        count(&mut histogram, construct);
                        branch_points += 1;
                        awaiting_for_in = true;
                    }
                    "and" | "or" => {
                        count(&mut histogram, Construct::BooleanOp);
                        branch_points += 1;
                    }
                    "not" => count(&mut histogram, Construct::BooleanOp),
                    "return" | "yield" => count(&mut histogram, Construct::Return),
                    "except" => {
                        count(&mut histogram, Construct::ExceptionHandler);
                        branch_points += 1;
                    }
                    "import" => count(&mut histogram, Construct::Import),
                    "True" | "False" | "None" => count(&mut histogram, Construct::Literal),
                    "is" => count(&mut histogram, Construct::Comparison),
                    "in" => {
                        if awaiting_for_in {
                            awaiting_for_in = false;
                        } else {
                            count(&mut histogram, Construct::Comparison);
                        }
                    }
                    // Structural glue around imports and aliases.
                    "from" | "as" => {}
                    _ => count(&mut histogram, Construct::Other),
                }
                after_def = was_def;
            }
            Tok::Word(_) => {
                count(&mut histogram, Construct::Identifier);
                if matches!(toks.get(i + 1), Some(Tok::OpenParen)) && !after_def {
                    count(&mut histogram, Construct::Call);
                }
                after_def = false;
            }
            Tok::Number | Tok::Str => {
                count(&mut histogram, Construct::Literal);
                after_def = false;
            }
            Tok::OpenParen => depth += 1,
            Tok::OpenBracket => {
                depth += 1;
                // `[` directly after a value is indexing; anywhere else it
                // starts a list literal.
                let indexes = i > 0
                    && matches!(
                        &toks[i - 1],
                        Tok::Word(w) if !is_keyword(w)
                    )
                    || i > 0 && matches!(&toks[i - 1], Tok::CloseDelim | Tok::Str);
                if !indexes {
                    count(&mut histogram, Construct::Initializer);
                }
            }
            Tok::OpenBrace => {
                depth += 1;
                count(&mut histogram, Construct::Initializer);
            }
            Tok::CloseDelim => depth -= 1,
            Tok::Op(op) => match *op {
                "==" | "!=" | "<" | ">" | "<=" | ">=" => {
                    count(&mut histogram, Construct::Comparison)
                }
                "=" | "+=" | "-=" | "*=" | "/=" | "//=" | "**=" | "%=" | "&=" | "|=" | "^="
                | ">>=" | "<<=" | ":=" => count(&mut histogram, Construct::Assignment),
                "+" | "-" | "*" | "/" | "%" | "**" | "//" | "&" | "|" | "^" | "~" | "<<"
                | ">>" => count(&mut histogram, Construct::ArithmeticOp),
                "." | "," | ":" | ";" | "->" | "\\" => {}
                _ => count(&mut histogram, Construct::Other),
            },
        }
    }
    (histogram, branch_points)
}

/// Profile one source text: construct histogram, cyclomatic complexity, and
/// non-blank line count.
pub fn syntax_profile(source: &str) -> Result<SyntaxProfile, ParseFailure> {
    if source.trim().is_empty() {
        return Err(ParseFailure::EmptySource);
    }
    let toks = Lexer::new(source).tokenize()?;
    let (node_histogram, branch_points) = classify(&toks);
    let lines = source.lines().filter(|l| !l.trim().is_empty()).count() as u32;
    Ok(SyntaxProfile {
        node_histogram,
        cyclomatic: 1 + branch_points,
        lines,
    })
}
