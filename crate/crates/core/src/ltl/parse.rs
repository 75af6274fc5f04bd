//! Recursive-descent parser for the ASCII formula syntax.
//!
//! ```text
//! implies := or ( "->" implies )?
//! or      := and ( "|" and )*
//! and     := until ( "&" until )*
//! until   := unary ( "U" until )?
//! unary   := ("!" | "X" | "F" | "G") unary | primary
//! primary := "true" | "false" | atom | "(" implies ")"
//! ```

use super::formula::{Atom, Formula};
use super::{Alphabet, LtlError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    Next,
    Eventually,
    Always,
    Until,
    And,
    Or,
    Implies,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("atom `{s}`"),
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Not => "`!`".into(),
            Tok::Next => "`X`".into(),
            Tok::Eventually => "`F`".into(),
            Tok::Always => "`G`".into(),
            Tok::Until => "`U`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Implies => "`->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

const OPERAND: &[&str] = &["atom", "true", "false", "!", "X", "F", "G", "("];

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, LtlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '!' => Tok::Not,
            '&' => Tok::And,
            '|' => Tok::Or,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            'X' => Tok::Next,
            'F' => Tok::Eventually,
            'G' => Tok::Always,
            'U' => Tok::Until,
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Implies
            }
            c if c.is_ascii_lowercase() => {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].is_ascii_lowercase()
                        || bytes[j].is_ascii_digit()
                        || bytes[j] == b'_')
                {
                    j += 1;
                }
                let word = &text[i..j];
                i = j - 1;
                match word {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word.to_string()),
                }
            }
            _ => {
                return Err(LtlError::Syntax {
                    position: start,
                    expected: vec!["operator", "atom", "parenthesis"],
                    found: format!("character `{c}`"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    alphabet: &'a Alphabet,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&'static str]) -> LtlError {
        LtlError::Syntax {
            position: self.offset(),
            expected: expected.to_vec(),
            found: self.peek().describe(),
        }
    }

    fn implies(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.unary()?;
        if *self.peek() == Tok::Until {
            self.bump();
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        let ctor: fn(Formula) -> Formula = match self.peek() {
            Tok::Not => Formula::not,
            Tok::Next => Formula::next,
            Tok::Eventually => Formula::eventually,
            Tok::Always => Formula::always,
            _ => return self.primary(),
        };
        self.bump();
        Ok(ctor(self.unary()?))
    }

    fn primary(&mut self) -> Result<Formula, LtlError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(name) => {
                if self.alphabet.index_of(&name).is_none() {
                    return Err(LtlError::UnknownAtom { atom: name, position: at });
                }
                self.bump();
                Ok(Formula::Atom(Atom::new(name)?))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.implies()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&[")", "&", "|", "->", "U"]));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.error(OPERAND)),
        }
    }
}

/// Parses `text`, requiring every atom to be declared in `alphabet`.
pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Formula, LtlError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        alphabet,
    };
    let f = p.implies()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["&", "|", "->", "U", "end of input"]));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab(names: &[&str]) -> Alphabet {
        Alphabet::new(names.iter().copied()).unwrap()
    }

    #[test]
    fn eventually_atom() {
        assert_eq!(
            parse("F t", &ab(&["t"])).unwrap(),
            Formula::eventually(Formula::atom("t"))
        );
    }

    #[test]
    fn intersection_safety_formula() {
        let f = parse("G(!g -> !i) & G(!n & !v)", &ab(&["t", "v", "g", "i", "n"])).unwrap();
        let g = Formula::atom;
        let expected = Formula::and(
            Formula::always(Formula::implies(Formula::not(g("g")), Formula::not(g("i")))),
            Formula::always(Formula::and(Formula::not(g("n")), Formula::not(g("v")))),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn dangling_until_reports_end_of_input() {
        match parse("a U", &ab(&["a"])) {
            Err(LtlError::Syntax { position, found, .. }) => {
                assert_eq!(position, 3);
                assert_eq!(found, "end of input");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_atom() {
        assert!(matches!(
            parse("F q", &ab(&["t"])),
            Err(LtlError::UnknownAtom { ref atom, position: 2 }) if atom == "q"
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        let a = ab(&["a", "b", "c"]);
        let at = Formula::atom;
        // U binds tighter than &, which binds tighter than |, then ->.
        assert_eq!(
            parse("a U b & c", &a).unwrap(),
            Formula::and(Formula::until(at("a"), at("b")), at("c"))
        );
        assert_eq!(
            parse("a U b U c", &a).unwrap(),
            Formula::until(at("a"), Formula::until(at("b"), at("c")))
        );
        assert_eq!(
            parse("a | b & c -> a", &a).unwrap(),
            Formula::implies(Formula::or(at("a"), Formula::and(at("b"), at("c"))), at("a"))
        );
        assert_eq!(
            parse("F a U b", &a).unwrap(),
            Formula::until(Formula::eventually(at("a")), at("b"))
        );
        assert_eq!(
            parse("a -> b -> c", &a).unwrap(),
            Formula::implies(at("a"), Formula::implies(at("b"), at("c")))
        );
    }

    #[test]
    fn display_round_trips() {
        let a = ab(&["a", "b"]);
        for text in ["G(!a -> X b)", "a U (b | !a)", "F(a & true) | false"] {
            let f = parse(text, &a).unwrap();
            assert_eq!(parse(&f.to_string(), &a).unwrap(), f);
        }
    }

    #[test]
    fn rejects_stray_tokens() {
        let a = ab(&["a"]);
        assert!(matches!(parse("a a", &a), Err(LtlError::Syntax { position: 2, .. })));
        assert!(matches!(parse("(a", &a), Err(LtlError::Syntax { .. })));
        assert!(matches!(parse("a $ a", &a), Err(LtlError::Syntax { position: 2, .. })));
        assert!(matches!(parse("", &a), Err(LtlError::Syntax { position: 0, .. })));
    }
}
