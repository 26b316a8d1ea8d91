//! Recursive-descent parser over the token stream.

use crate::error::ParseError;
use crate::expr::{CmpOp, KeyAttr, StorageAttr, UnaryOp};

use super::ast::*;
use super::lexer::{lex, Spanned, Tok};

pub struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    pub fn new(text: &str) -> Result<Parser, ParseError> {
        Ok(Parser { toks: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|s| &s.tok)
    }

    fn here(&self) -> (u32, u32) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "<eof>".into(),
            Some(t) => format!("{:?}", t),
        }
    }

    fn err(&self, expected: &str) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax { line, col, expected: expected.to_string(), found: self.found() }
    }


    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if let Some(Tok::Ident(s)) = self.peek() {
            if s == kw {
                self.pos += 1;
                return true;
            }
        }
        false
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(kw))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(what)),
        }
    }

    fn binder_name(&mut self) -> Result<String, ParseError> {
        if self.eat(&Tok::Underscore) {
            Ok("_".into())
        } else {
            self.ident("binder name")
        }
    }

    /// Parse a whole program: `;`-terminated statements, optionally followed
    /// by a final query expression.
    pub fn program(&mut self) -> Result<Vec<Statement>, ParseError> {
        let mut out = Vec::new();
        while self.peek().is_some() {
            if self.eat_kw("CREATE") {
                out.extend(self.create_stmt()?);
                self.expect(&Tok::Semi, ";")?;
            } else {
                let e = self.expr()?;
                let is_final = self.peek().is_none();
                if !is_final {
                    self.expect(&Tok::Semi, ";")?;
                }
                out.push(Statement::Query(e));
            }
        }
        Ok(out)
    }

    fn elem_ty(&mut self) -> ElemTy {
        if self.eat_kw("int") {
            ElemTy::Int
        } else if self.eat_kw("real") {
            ElemTy::Real
        } else {
            ElemTy::Real
        }
    }

    fn create_stmt(&mut self) -> Result<Vec<Statement>, ParseError> {
        if self.eat_kw("TENSOR") {
            let name = self.ident("tensor name")?;
            self.expect_kw("AS")?;
            let def = self.expr()?;
            return Ok(vec![Statement::CreateTensor { name, def }]);
        }
        let elem = self.elem_ty();
        if self.eat_kw("SCALAR") {
            let mut names = vec![self.ident("scalar name")?];
            while self.eat(&Tok::Comma) {
                names.push(self.ident("scalar name")?);
            }
            return Ok(names.into_iter().map(|name| Statement::CreateScalar { name, elem }).collect());
        }
        if self.eat_kw("ARRAY") {
            let mut stmts = Vec::new();
            loop {
                let name = self.ident("array name")?;
                self.expect(&Tok::LParen, "(")?;
                let size = self.expr()?;
                self.expect(&Tok::RParen, ")")?;
                stmts.push(Statement::CreateArray { name, elem, size });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            return Ok(stmts);
        }
        if self.eat_kw("HASHMAP") {
            let name = self.ident("hashmap name")?;
            self.expect(&Tok::LParen, "(")?;
            let mut dims = vec![self.expr()?];
            while self.eat(&Tok::Comma) {
                dims.push(self.expr()?);
            }
            self.expect(&Tok::RParen, ")")?;
            return Ok(vec![Statement::CreateHashmap { name, elem, dims }]);
        }
        if self.eat_kw("TRIE") {
            let name = self.ident("trie name")?;
            let mut dims = Vec::new();
            while self.eat(&Tok::LParen) {
                dims.push(self.expr()?);
                self.expect(&Tok::RParen, ")")?;
            }
            if dims.is_empty() {
                return Err(self.err("trie dimension list"));
            }
            return Ok(vec![Statement::CreateTrie { name, elem, dims }]);
        }
        Err(self.err("SCALAR, ARRAY, HASHMAP, TRIE or TENSOR"))
    }

    pub fn expr(&mut self) -> Result<SurfExpr, ParseError> {
        if self.eat_kw("let") {
            let mut binds = Vec::new();
            loop {
                let name = self.binder_name()?;
                self.expect(&Tok::Eq, "=")?;
                let e = self.expr()?;
                binds.push((name, e));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect_kw("in")?;
            let body = self.expr()?;
            return Ok(SurfExpr::Let(binds, body.boxed()));
        }
        if self.eat_kw("sum") {
            self.expect(&Tok::LParen, "(")?;
            let mut binds = Vec::new();
            loop {
                self.expect(&Tok::Lt, "<")?;
                let key = if self.eat(&Tok::LParen) {
                    let mut names = vec![self.binder_name()?];
                    while self.eat(&Tok::Comma) {
                        names.push(self.binder_name()?);
                    }
                    self.expect(&Tok::RParen, ")")?;
                    BinderKey::Tuple(names)
                } else {
                    BinderKey::Single(self.binder_name()?)
                };
                self.expect(&Tok::Comma, ",")?;
                let val = self.binder_name()?;
                self.expect(&Tok::Gt, ">")?;
                self.expect_kw("in")?;
                let coll = self.expr()?;
                binds.push(SumBinding { key, val, coll });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::RParen, ")")?;
            let body = self.expr()?;
            return Ok(SurfExpr::Sum(binds, body.boxed()));
        }
        if self.eat_kw("merge") {
            self.expect(&Tok::LParen, "(")?;
            self.expect(&Tok::Lt, "<")?;
            let k1 = self.binder_name()?;
            self.expect(&Tok::Comma, ",")?;
            let k2 = self.binder_name()?;
            self.expect(&Tok::Comma, ",")?;
            let v = self.binder_name()?;
            self.expect(&Tok::Gt, ">")?;
            self.expect_kw("in")?;
            self.expect(&Tok::Lt, "<")?;
            // comparison-free level so `>` closes the collection pair
            let c1 = self.range_expr()?;
            self.expect(&Tok::Comma, ",")?;
            let c2 = self.range_expr()?;
            self.expect(&Tok::Gt, ">")?;
            self.expect(&Tok::RParen, ")")?;
            let body = self.expr()?;
            return Ok(SurfExpr::Merge { k1, k2, v, c1: c1.boxed(), c2: c2.boxed(), body: body.boxed() });
        }
        if self.eat_kw("if") {
            self.expect(&Tok::LParen, "(")?;
            let cond = self.expr()?;
            self.expect(&Tok::RParen, ")")?;
            // `then` is optional when the branch is a dictionary literal
            self.eat_kw("then");
            let body = self.expr()?;
            return Ok(SurfExpr::If(cond.boxed(), body.boxed()));
        }
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<SurfExpr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.and_expr()?;
            lhs = SurfExpr::Cmp(CmpOp::Or, lhs.boxed(), rhs.boxed());
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<SurfExpr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.cmp_expr()?;
            lhs = SurfExpr::Cmp(CmpOp::And, lhs.boxed(), rhs.boxed());
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<SurfExpr, ParseError> {
        let lhs = self.range_expr()?;
        let op = match self.peek() {
            Some(Tok::EqEq) => Some(CmpOp::Eq),
            Some(Tok::Lt) => Some(CmpOp::Lt),
            Some(Tok::Le) => Some(CmpOp::Le),
            Some(Tok::Gt) => Some(CmpOp::Gt),
            Some(Tok::Ge) => Some(CmpOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let rhs = self.range_expr()?;
            Ok(SurfExpr::Cmp(op, lhs.boxed(), rhs.boxed()))
        } else {
            Ok(lhs)
        }
    }

    fn range_expr(&mut self) -> Result<SurfExpr, ParseError> {
        let lhs = self.add_expr()?;
        if self.eat(&Tok::Colon) {
            let rhs = self.add_expr()?;
            Ok(SurfExpr::Range(lhs.boxed(), rhs.boxed()))
        } else {
            Ok(lhs)
        }
    }

    fn add_expr(&mut self) -> Result<SurfExpr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.mul_expr()?;
                lhs = SurfExpr::Bin(BinOp::Add, lhs.boxed(), rhs.boxed());
            } else if self.eat(&Tok::Minus) {
                let rhs = self.mul_expr()?;
                lhs = SurfExpr::Bin(BinOp::Sub, lhs.boxed(), rhs.boxed());
            } else {
                return Ok(lhs);
            }
        }
    }

    fn mul_expr(&mut self) -> Result<SurfExpr, ParseError> {
        let mut lhs = self.unary_expr()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.unary_expr()?;
                lhs = SurfExpr::Bin(BinOp::Mul, lhs.boxed(), rhs.boxed());
            } else if self.eat(&Tok::Slash) {
                let rhs = self.unary_expr()?;
                lhs = SurfExpr::Bin(BinOp::Div, lhs.boxed(), rhs.boxed());
            } else if self.eat(&Tok::Percent) {
                let rhs = self.unary_expr()?;
                lhs = SurfExpr::Bin(BinOp::Mod, lhs.boxed(), rhs.boxed());
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary_expr(&mut self) -> Result<SurfExpr, ParseError> {
        // prefix forms may appear as a right operand and extend maximally,
        // e.g. `{ ... } + if (c) then { ... }`
        if let Some(Tok::Ident(s)) = self.peek() {
            if matches!(s.as_str(), "if" | "let" | "sum" | "merge") {
                return self.expr();
            }
        }
        if self.eat(&Tok::Minus) {
            let e = self.unary_expr()?;
            return Ok(SurfExpr::Unary(UnaryOp::Neg, e.boxed()));
        }
        self.postfix_expr()
    }

    fn postfix_expr(&mut self) -> Result<SurfExpr, ParseError> {
        let mut e = self.atom()?;
        while self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(&Tok::Comma) {
                args.push(self.expr()?);
            }
            self.expect(&Tok::RParen, ")")?;
            e = SurfExpr::Call(e.boxed(), args);
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<SurfExpr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(i)) => {
                self.pos += 1;
                Ok(SurfExpr::Int(i))
            }
            Some(Tok::Real(x)) => {
                self.pos += 1;
                Ok(SurfExpr::Real(x))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(&Tok::RParen, ")")?;
                Ok(e)
            }
            Some(Tok::LBrace) => self.dict_literal(),
            Some(Tok::Ident(name)) => {
                match name.as_str() {
                    "true" => {
                        self.pos += 1;
                        return Ok(SurfExpr::Bool(true));
                    }
                    "false" => {
                        self.pos += 1;
                        return Ok(SurfExpr::Bool(false));
                    }
                    "exp" | "even_bits" | "odd_bits" if self.peek2() == Some(&Tok::LParen) => {
                        self.pos += 2;
                        let arg = self.expr()?;
                        self.expect(&Tok::RParen, ")")?;
                        let op = match name.as_str() {
                            "exp" => UnaryOp::Exp,
                            "even_bits" => UnaryOp::EvenBits,
                            _ => UnaryOp::OddBits,
                        };
                        return Ok(SurfExpr::Unary(op, arg.boxed()));
                    }
                    _ => {}
                }
                self.pos += 1;
                Ok(SurfExpr::Name(name))
            }
            _ => Err(self.err("expression")),
        }
    }

    fn dict_literal(&mut self) -> Result<SurfExpr, ParseError> {
        self.expect(&Tok::LBrace, "{")?;
        let mut entries = Vec::new();
        loop {
            let mut key_attr = KeyAttr::None;
            let mut storage_attr = StorageAttr::Logical;
            while self.eat(&Tok::At) {
                let attr = self.ident("annotation")?;
                match attr.as_str() {
                    "unique" => key_attr = KeyAttr::Unique,
                    "dense" => storage_attr = StorageAttr::Dense,
                    "hash" => storage_attr = StorageAttr::Hash,
                    other => {
                        let (line, col) = self.here();
                        return Err(ParseError::Invalid { line, col, msg: format!("unknown annotation @{}", other) });
                    }
                }
            }
            let key = if self.peek() == Some(&Tok::LParen) {
                self.pos += 1;
                if self.eat(&Tok::RParen) {
                    DictKey::Unit
                } else {
                    let first = self.expr()?;
                    if self.eat(&Tok::Comma) {
                        let mut parts = vec![first];
                        loop {
                            parts.push(self.expr()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(&Tok::RParen, ")")?;
                        DictKey::Tuple(parts)
                    } else {
                        self.expect(&Tok::RParen, ")")?;
                        // a parenthesized single expression may still be
                        // applied: `{ (a)(i) -> v }` is a lookup key
                        let mut e = first;
                        while self.peek() == Some(&Tok::LParen) {
                            self.pos += 1;
                            let mut args = vec![self.expr()?];
                            while self.eat(&Tok::Comma) {
                                args.push(self.expr()?);
                            }
                            self.expect(&Tok::RParen, ")")?;
                            e = SurfExpr::Call(e.boxed(), args);
                        }
                        DictKey::Single(e)
                    }
                }
            } else {
                DictKey::Single(self.expr()?)
            };
            self.expect(&Tok::Arrow, "->")?;
            let val = self.expr()?;
            entries.push(DictEntry { key_attr, storage_attr, key, val });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RBrace, "}")?;
        Ok(SurfExpr::Dict(entries))
    }
}

/// Parse a program text into statements.
pub fn parse(text: &str) -> Result<Vec<Statement>, ParseError> {
    let mut p = Parser::new(text)?;
    let stmts = p.program()?;
    validate(&stmts)?;
    Ok(stmts)
}

/// Parse a single expression.
pub fn parse_expr(text: &str) -> Result<SurfExpr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("<eof>"));
    }
    validate_expr(&e)?;
    Ok(e)
}

/// Reject repeated value binders within one sum; repeated keys are sugar,
/// repeated values have no defined reading.
fn validate(stmts: &[Statement]) -> Result<(), ParseError> {
    for s in stmts {
        match s {
            Statement::CreateTensor { def, .. } | Statement::Query(def) => validate_expr(def)?,
            Statement::CreateArray { size, .. } => validate_expr(size)?,
            Statement::CreateHashmap { dims, .. } | Statement::CreateTrie { dims, .. } => {
                for d in dims {
                    validate_expr(d)?;
                }
            }
            Statement::CreateScalar { .. } => {}
        }
    }
    Ok(())
}

fn validate_expr(e: &SurfExpr) -> Result<(), ParseError> {
    if let SurfExpr::Sum(binds, _) = e {
        let mut seen = std::collections::HashSet::new();
        for b in binds {
            if b.val != "_" && !seen.insert(b.val.clone()) {
                return Err(ParseError::Invalid {
                    line: 0,
                    col: 0,
                    msg: format!("repeated value binder `{}` in sum", b.val),
                });
            }
        }
    }
    let mut err = None;
    e.map_children(&mut |c| {
        if err.is_none() {
            if let Err(e) = validate_expr(c) {
                err = Some(e);
            }
        }
        c.clone()
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
