//! Recursive-descent parser for models, queries and abstraction specs.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use std::collections::HashSet;

const KEYWORDS: &[&str] = &[
    "const", "typedef", "struct", "enum", "int", "bool", "void", "chan", "process", "state", "commit",
    "init", "initially", "trans", "select", "guard", "sync", "assign", "system", "partition", "if", "else",
    "for", "switch", "case", "default", "break", "return", "true", "false", "forall", "exists", "sum",
    "and", "or", "not", "imply", "abstraction",
];

pub(crate) struct Parser<'t> {
    text: &'t str,
    toks: Vec<Token>,
    pos: usize,
    /// Operators do not continue across a line break outside brackets.
    line_mode: bool,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'t> Parser<'t> {
    pub fn new(text: &'t str) -> PResult<Self> {
        Ok(Parser {
            text,
            toks: tokenize(text)?,
            pos: 0,
            line_mode: false,
            depth: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> crate::textlang::ast::Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: &str) -> PResult<T> {
        let found = match self.peek() {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(v) => format!("'{v}'"),
            Tok::Punct(p) => format!("'{p}'"),
            Tok::Eof => "end of input".to_string(),
        };
        Err(ParseError::at(
            self.text,
            self.span().start,
            &format!("{msg}, found {found}"),
        ))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Span> {
        if self.is_punct(p) {
            Ok(self.bump().span)
        } else {
            self.error(&format!("expected '{p}'"))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            self.error(&format!("expected '{kw}'"))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let span = self.bump().span;
                Ok(Ident { name: s, span })
            }
            _ => self.error("expected identifier"),
        }
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    // ---- declarations ----------------------------------------------------

    pub fn model(&mut self) -> PResult<ModelDocument> {
        let mut doc = ModelDocument::default();
        while !self.at_eof() {
            if self.is_kw("abstraction") {
                let start = self.bump().span;
                if doc.abstraction.is_some() {
                    return Err(ParseError::at(self.text, start.start, "duplicate abstraction section"));
                }
                self.expect_punct("{")?;
                let mut abs = AbsDocument::default();
                while !self.is_punct("}") {
                    if self.at_eof() {
                        return self.error("expected '}'");
                    }
                    abs.items.push(self.abs_item()?);
                }
                self.bump();
                doc.abstraction = Some(abs);
                continue;
            }
            self.decl(&mut doc.decls, true)?;
        }
        check_duplicates(self.text, &doc.decls)?;
        Ok(doc)
    }

    fn starts_type(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "int" | "bool" | "struct" | "enum" | "const" => true,
                _ if KEYWORDS.contains(&s.as_str()) => false,
                _ => matches!(self.peek_at(1), Tok::Ident(n) if !KEYWORDS.contains(&n.as_str()))
                    || matches!(self.peek_at(1), Tok::Punct("&")),
            },
            _ => false,
        }
    }

    fn decl(&mut self, out: &mut Vec<Decl>, top: bool) -> PResult<()> {
        let start = self.span();
        if self.eat_kw("typedef") {
            let ty = self.type_expr()?;
            let name = self.ident()?;
            let dims = self.dims()?;
            self.expect_punct(";")?;
            out.push(Decl::Typedef {
                ty,
                name,
                dims,
                span: start.to(self.prev_span()),
            });
            return Ok(());
        }
        if self.eat_kw("chan") {
            loop {
                let name = self.ident()?;
                let dims = self.dims()?;
                out.push(Decl::Chan {
                    name,
                    dims,
                    span: start.to(self.prev_span()),
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
            return Ok(());
        }
        if top && self.is_kw("process") {
            let p = self.process()?;
            out.push(Decl::Process(p));
            return Ok(());
        }
        if top && self.eat_kw("system") {
            let mut entries = Vec::new();
            loop {
                let name = self.ident()?;
                let args = if self.eat_punct("(") {
                    let a = self.args_until_close()?;
                    Some(a)
                } else {
                    None
                };
                entries.push(SystemEntry { name, args });
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
            out.push(Decl::System {
                entries,
                span: start.to(self.prev_span()),
            });
            return Ok(());
        }
        if top && self.eat_kw("partition") {
            let whole = self.ident()?;
            self.expect_punct("=")?;
            let mut parts = vec![self.ident()?];
            while self.eat_punct("|") {
                parts.push(self.ident()?);
            }
            self.expect_punct(";")?;
            out.push(Decl::Partition {
                whole,
                parts,
                span: start.to(self.prev_span()),
            });
            return Ok(());
        }
        if self.eat_kw("void") {
            let name = self.ident()?;
            let f = self.function_rest(None, name, start)?;
            out.push(Decl::Function(f));
            return Ok(());
        }
        if self.eat_kw("const") {
            let ty = self.type_expr()?;
            loop {
                let name = self.ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                out.push(Decl::Const {
                    ty: ty.clone(),
                    name,
                    value,
                    span: start.to(self.prev_span()),
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
            return Ok(());
        }
        if !self.starts_type() {
            return self.error("expected declaration");
        }
        let ty = self.type_expr()?;
        let name = self.ident()?;
        if self.is_punct("(") {
            let f = self.function_rest(Some(ty), name, start)?;
            out.push(Decl::Function(f));
            return Ok(());
        }
        for v in self.var_rest(ty, name, start)? {
            out.push(Decl::Var(v));
        }
        Ok(())
    }

    /// Declarators after the first name: `x[dims] = init, y, ...;`
    fn var_rest(&mut self, ty: TypeExpr, first: Ident, start: Span) -> PResult<Vec<VarDeclAst>> {
        let mut out = Vec::new();
        let mut name = first;
        loop {
            let dims = self.dims()?;
            let init = if self.eat_punct("=") {
                Some(self.init()?)
            } else {
                None
            };
            out.push(VarDeclAst {
                ty: ty.clone(),
                name,
                dims,
                init,
                span: start.to(self.prev_span()),
            });
            if !self.eat_punct(",") {
                break;
            }
            name = self.ident()?;
        }
        self.expect_punct(";")?;
        Ok(out)
    }

    fn init(&mut self) -> PResult<Init> {
        if self.is_punct("{") {
            let start = self.bump().span;
            let mut items = Vec::new();
            if !self.is_punct("}") {
                loop {
                    items.push(self.init()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            let end = self.expect_punct("}")?;
            Ok(Init::List(items, start.to(end)))
        } else {
            Ok(Init::Expr(self.expr()?))
        }
    }

    fn dims(&mut self) -> PResult<Vec<ArrayDim>> {
        let mut dims = Vec::new();
        while self.is_punct("[") {
            self.bump();
            self.depth += 1;
            if self.is_kw("int") || self.is_kw("bool") {
                dims.push(ArrayDim::Type(self.type_expr()?));
            } else {
                dims.push(ArrayDim::Expr(self.expr()?));
            }
            self.depth -= 1;
            self.expect_punct("]")?;
        }
        Ok(dims)
    }

    pub fn type_expr(&mut self) -> PResult<TypeExpr> {
        let start = self.span();
        if self.eat_kw("bool") {
            return Ok(TypeExpr::Bool(start));
        }
        if self.eat_kw("int") {
            if self.is_punct("[") {
                self.bump();
                self.depth += 1;
                let lo = self.expr()?;
                self.expect_punct(",")?;
                let hi = self.expr()?;
                self.depth -= 1;
                let end = self.expect_punct("]")?;
                return Ok(TypeExpr::Int {
                    range: Some(Box::new((lo, hi))),
                    span: start.to(end),
                });
            }
            return Ok(TypeExpr::Int { range: None, span: start });
        }
        if self.eat_kw("struct") {
            self.expect_punct("{")?;
            let mut fields = Vec::new();
            while !self.is_punct("}") {
                let fstart = self.span();
                let ty = self.type_expr()?;
                loop {
                    let name = self.ident()?;
                    let dims = self.dims()?;
                    fields.push(FieldDecl {
                        ty: ty.clone(),
                        name,
                        dims,
                        span: fstart.to(self.prev_span()),
                    });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            let end = self.expect_punct("}")?;
            return Ok(TypeExpr::Struct {
                fields,
                span: start.to(end),
            });
        }
        if self.eat_kw("enum") {
            self.expect_punct("{")?;
            let mut variants = vec![self.ident()?];
            while self.eat_punct(",") {
                variants.push(self.ident()?);
            }
            let end = self.expect_punct("}")?;
            return Ok(TypeExpr::Enum {
                variants,
                span: start.to(end),
            });
        }
        Ok(TypeExpr::Named(self.ident()?))
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let start = self.span();
                let is_const = self.eat_kw("const");
                let ty = self.type_expr()?;
                let by_ref = self.eat_punct("&");
                let name = self.ident()?;
                let dims = self.dims()?;
                params.push(Param {
                    is_const,
                    ty,
                    by_ref,
                    name,
                    dims,
                    span: start.to(self.prev_span()),
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(params)
    }

    fn function_rest(&mut self, ret: Option<TypeExpr>, name: Ident, start: Span) -> PResult<FunctionDecl> {
        let params = self.params()?;
        let body = self.block()?;
        Ok(FunctionDecl {
            ret,
            name,
            params,
            body,
            span: start.to(self.prev_span()),
        })
    }

    fn process(&mut self) -> PResult<ProcessDecl> {
        let start = self.expect_kw("process")?;
        let name = self.ident()?;
        let params = if self.is_punct("(") {
            self.params()?
        } else {
            vec![]
        };
        self.expect_punct("{")?;
        let mut decls = Vec::new();
        while !self.is_kw("state") {
            if self.at_eof() || self.is_punct("}") {
                return self.error("expected 'state'");
            }
            self.decl(&mut decls, false)?;
        }
        self.bump();
        let states = self.ident_list()?;
        let committed = if self.eat_kw("commit") {
            self.ident_list()?
        } else {
            vec![]
        };
        self.expect_kw("init")?;
        let init = self.ident()?;
        self.expect_punct(";")?;
        let initially = if self.eat_kw("initially") {
            let e = self.expr()?;
            self.expect_punct(";")?;
            Some(e)
        } else {
            None
        };
        let mut transitions = Vec::new();
        if self.eat_kw("trans") {
            loop {
                transitions.push(self.transition()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
        }
        let end = self.expect_punct("}")?;
        let p = ProcessDecl {
            name,
            params,
            decls,
            states,
            committed,
            init,
            initially,
            transitions,
            span: start.to(end),
        };
        let mut names: Vec<&Ident> = p.params.iter().map(|x| &x.name).collect();
        names.extend(p.decls.iter().filter_map(Decl::name));
        dup_check(self.text, names)?;
        dup_check(self.text, p.states.iter().collect())?;
        Ok(p)
    }

    fn ident_list(&mut self) -> PResult<Vec<Ident>> {
        let mut v = vec![self.ident()?];
        while self.eat_punct(",") {
            v.push(self.ident()?);
        }
        self.expect_punct(";")?;
        Ok(v)
    }

    fn transition(&mut self) -> PResult<Transition> {
        let start = self.span();
        let from = self.ident()?;
        self.expect_punct("->")?;
        let to = self.ident()?;
        self.expect_punct("{")?;
        let mut t = Transition {
            from,
            to,
            selects: vec![],
            guard: None,
            sync: None,
            assign: vec![],
            span: start,
        };
        while !self.is_punct("}") {
            if self.eat_kw("select") {
                loop {
                    let var = self.ident()?;
                    self.expect_punct(":")?;
                    let ty = self.type_expr()?;
                    t.selects.push(Select { var, ty });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            } else if self.eat_kw("guard") {
                t.guard = Some(self.expr()?);
            } else if self.eat_kw("sync") {
                let chan = self.postfix_expr()?;
                let kind = if self.eat_punct("!") {
                    SyncKind::Send
                } else if self.eat_punct("?") {
                    SyncKind::Receive
                } else {
                    return self.error("expected '!' or '?'");
                };
                t.sync = Some(SyncAst { chan, kind });
            } else if self.eat_kw("assign") {
                loop {
                    t.assign.push(self.expr()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            } else {
                return self.error("expected 'select', 'guard', 'sync' or 'assign'");
            }
            self.expect_punct(";")?;
        }
        let end = self.expect_punct("}")?;
        t.span = start.to(end);
        Ok(t)
    }

    // ---- statements ------------------------------------------------------

    fn block(&mut self) -> PResult<Block> {
        let start = self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if self.at_eof() {
                return self.error("expected '}'");
            }
            self.stmt_into(&mut stmts)?;
        }
        let end = self.bump().span;
        Ok(Block {
            stmts,
            span: start.to(end),
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let mut v = Vec::new();
        self.stmt_into(&mut v)?;
        if v.len() == 1 {
            Ok(v.pop().unwrap())
        } else {
            let span = v.first().map(stmt_span).unwrap_or_default();
            Ok(Stmt::Block(Block { stmts: v, span }))
        }
    }

    fn stmt_into(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        let start = self.span();
        if self.is_punct("{") {
            out.push(Stmt::Block(self.block()?));
            return Ok(());
        }
        if self.eat_punct(";") {
            out.push(Stmt::Empty(start));
            return Ok(());
        }
        if self.eat_kw("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then = Box::new(self.stmt()?);
            let els = if self.eat_kw("else") {
                Some(Box::new(self.stmt()?))
            } else {
                None
            };
            out.push(Stmt::If {
                cond,
                then,
                els,
                span: start.to(self.prev_span()),
            });
            return Ok(());
        }
        if self.eat_kw("for") {
            self.expect_punct("(")?;
            let var = self.ident()?;
            self.expect_punct(":")?;
            let ty = self.type_expr()?;
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            out.push(Stmt::For {
                var,
                ty,
                body,
                span: start.to(self.prev_span()),
            });
            return Ok(());
        }
        if self.eat_kw("switch") {
            self.expect_punct("(")?;
            let scrut = self.expr()?;
            self.expect_punct(")")?;
            self.expect_punct("{")?;
            let mut cases = Vec::new();
            while !self.is_punct("}") {
                let cstart = self.span();
                let label = if self.eat_kw("case") {
                    Some(self.expr()?)
                } else if self.eat_kw("default") {
                    None
                } else {
                    return self.error("expected 'case' or 'default'");
                };
                self.expect_punct(":")?;
                let mut body = Vec::new();
                while !self.is_kw("case") && !self.is_kw("default") && !self.is_punct("}") {
                    if self.at_eof() {
                        return self.error("expected '}'");
                    }
                    self.stmt_into(&mut body)?;
                }
                cases.push(Case {
                    label,
                    body,
                    span: cstart.to(self.prev_span()),
                });
            }
            self.bump();
            out.push(Stmt::Switch {
                scrut,
                cases,
                span: start.to(self.prev_span()),
            });
            return Ok(());
        }
        if self.eat_kw("break") {
            self.expect_punct(";")?;
            out.push(Stmt::Break(start));
            return Ok(());
        }
        if self.eat_kw("return") {
            let e = if self.is_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect_punct(";")?;
            out.push(Stmt::Return(e, start.to(self.prev_span())));
            return Ok(());
        }
        if self.starts_type() && !self.is_kw("const") {
            let ty = self.type_expr()?;
            let name = self.ident()?;
            for v in self.var_rest(ty, name, start)? {
                out.push(Stmt::Var(v));
            }
            return Ok(());
        }
        let e = self.expr()?;
        self.expect_punct(";")?;
        out.push(Stmt::Expr(e));
        Ok(())
    }

    // ---- expressions -----------------------------------------------------

    fn stop_here(&self) -> bool {
        self.line_mode && self.depth == 0 && self.toks[self.pos].newline_before
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.ternary()?;
        let op = match self.peek() {
            Tok::Punct("=") => AssignOp::Set,
            Tok::Punct("+=") => AssignOp::Add,
            Tok::Punct("-=") => AssignOp::Sub,
            Tok::Punct("*=") => AssignOp::Mul,
            Tok::Punct("/=") => AssignOp::Div,
            Tok::Punct("%=") => AssignOp::Mod,
            _ => return Ok(lhs),
        };
        if self.stop_here() {
            return Ok(lhs);
        }
        self.bump();
        let rhs = self.expr()?;
        let span = lhs.span.to(rhs.span);
        Ok(Expr::new(ExprKind::Assign(op, Box::new(lhs), Box::new(rhs)), span))
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let c = self.binary(0)?;
        if self.is_punct("?") && !self.stop_here() {
            self.bump();
            self.depth += 1;
            let a = self.expr()?;
            self.expect_punct(":")?;
            self.depth -= 1;
            let b = self.ternary()?;
            let span = c.span.to(b.span);
            return Ok(Expr::new(ExprKind::Ternary(Box::new(c), Box::new(a), Box::new(b)), span));
        }
        Ok(c)
    }

    fn binop_at(&self, level: usize) -> Option<BinaryOp> {
        let t = self.peek();
        let op = match (level, t) {
            (0, Tok::Ident(s)) if s == "imply" => BinaryOp::Imply,
            (1, Tok::Punct("||")) => BinaryOp::Or,
            (1, Tok::Ident(s)) if s == "or" => BinaryOp::Or,
            (2, Tok::Punct("&&")) => BinaryOp::And,
            (2, Tok::Ident(s)) if s == "and" => BinaryOp::And,
            (3, Tok::Punct("==")) => BinaryOp::Eq,
            (3, Tok::Punct("!=")) => BinaryOp::Ne,
            (4, Tok::Punct("<")) => BinaryOp::Lt,
            (4, Tok::Punct("<=")) => BinaryOp::Le,
            (4, Tok::Punct(">")) => BinaryOp::Gt,
            (4, Tok::Punct(">=")) => BinaryOp::Ge,
            (5, Tok::Punct("+")) => BinaryOp::Add,
            (5, Tok::Punct("-")) => BinaryOp::Sub,
            (6, Tok::Punct("*")) => BinaryOp::Mul,
            (6, Tok::Punct("/")) => BinaryOp::Div,
            (6, Tok::Punct("%")) => BinaryOp::Mod,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, level: usize) -> PResult<Expr> {
        if level > 6 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop_at(level) {
            if self.stop_here() {
                break;
            }
            self.bump();
            let rhs = self.binary(level + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let op = if self.is_punct("!") || self.is_kw("not") {
            Some(UnaryOp::Not)
        } else if self.is_punct("-") {
            Some(UnaryOp::Neg)
        } else {
            None
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            let span = start.to(e.span);
            return Ok(Expr::new(ExprKind::Unary(op, Box::new(e)), span));
        }
        if self.is_punct("++") || self.is_punct("--") {
            let inc = self.is_punct("++");
            self.bump();
            let e = self.unary()?;
            let span = start.to(e.span);
            let k = if inc { IncDec::PreInc } else { IncDec::PreDec };
            return Ok(Expr::new(ExprKind::IncDec(k, Box::new(e)), span));
        }
        for (kw, q) in [
            ("forall", Quantifier::Forall),
            ("exists", Quantifier::Exists),
            ("sum", Quantifier::Sum),
        ] {
            if self.is_kw(kw) {
                self.bump();
                self.expect_punct("(")?;
                self.depth += 1;
                let var = self.ident()?;
                self.expect_punct(":")?;
                let ty = self.type_expr()?;
                self.depth -= 1;
                self.expect_punct(")")?;
                let body = self.unary()?;
                let span = start.to(body.span);
                return Ok(Expr::new(
                    ExprKind::Quant {
                        q,
                        var,
                        ty,
                        body: Box::new(body),
                    },
                    span,
                ));
            }
        }
        self.postfix_expr()
    }

    fn args_until_close(&mut self) -> PResult<Vec<Expr>> {
        self.depth += 1;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.depth -= 1;
        self.expect_punct(")")?;
        Ok(args)
    }

    fn postfix_expr(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.stop_here() {
                break;
            }
            if self.is_punct("[") {
                self.bump();
                self.depth += 1;
                let i = self.expr()?;
                self.depth -= 1;
                let end = self.expect_punct("]")?;
                let span = e.span.to(end);
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(i)), span);
            } else if self.is_punct(".") {
                self.bump();
                let f = self.field_name()?;
                let span = e.span.to(f.span);
                e = Expr::new(ExprKind::Field(Box::new(e), f), span);
            } else if self.is_punct("++") || self.is_punct("--") {
                let k = if self.is_punct("++") {
                    IncDec::PostInc
                } else {
                    IncDec::PostDec
                };
                let end = self.bump().span;
                let span = e.span.to(end);
                e = Expr::new(ExprKind::IncDec(k, Box::new(e)), span);
            } else {
                break;
            }
        }
        Ok(e)
    }

    /// Field or location names may coincide with keywords such as `init`.
    fn field_name(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok(Ident { name: s, span })
            }
            _ => self.error("expected field name"),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::new(ExprKind::Int(v), start))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::new(ExprKind::Bool(s == "true"), start))
            }
            Tok::Punct("(") => {
                self.bump();
                self.depth += 1;
                let e = self.expr()?;
                self.depth -= 1;
                let end = self.expect_punct(")")?;
                Ok(Expr::new(e.kind, start.to(end)))
            }
            Tok::Ident(_) => {
                let id = self.ident()?;
                if self.is_punct("(") && !self.stop_here() {
                    self.bump();
                    let args = self.args_until_close()?;
                    let span = start.to(self.prev_span());
                    return Ok(Expr::new(ExprKind::Call(id, args), span));
                }
                Ok(Expr::new(ExprKind::Ident(id.name), id.span))
            }
            _ => self.error("expected expression"),
        }
    }

    // ---- queries ---------------------------------------------------------

    pub fn queries(&mut self) -> PResult<QueryDocument> {
        let mut doc = QueryDocument::default();
        while !self.at_eof() {
            if self.eat_punct(";") {
                continue;
            }
            let q = self.query()?;
            doc.queries.push(q);
            if !(self.at_eof() || self.is_punct(";") || self.toks[self.pos].newline_before) {
                return self.error("expected end of query");
            }
        }
        Ok(doc)
    }

    pub fn query(&mut self) -> PResult<NamedQuery> {
        let saved = self.line_mode;
        self.line_mode = true;
        let start = self.span();
        let name = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Ident(_), Tok::Punct(":")) => {
                let n = self.ident()?;
                self.bump();
                Some(n)
            }
            _ => None,
        };
        let formula = self.formula()?;
        self.line_mode = saved;
        Ok(NamedQuery {
            name,
            formula,
            span: start.to(self.prev_span()),
        })
    }

    fn formula(&mut self) -> PResult<FormulaAst> {
        let quant = match (self.peek(), self.peek_at(1), self.peek_at(2)) {
            (Tok::Ident(a), Tok::Punct("["), Tok::Punct("]")) if a == "A" => Some(PathQuant::AlwaysGlobally),
            (Tok::Ident(a), Tok::Punct("["), Tok::Punct("]")) if a == "E" => Some(PathQuant::ExistsGlobally),
            (Tok::Ident(a), Tok::Punct("<"), Tok::Punct(">")) if a == "A" => Some(PathQuant::AlwaysFinally),
            (Tok::Ident(a), Tok::Punct("<"), Tok::Punct(">")) if a == "E" => Some(PathQuant::ExistsFinally),
            _ => None,
        };
        if let Some(q) = quant {
            self.bump();
            self.bump();
            self.bump();
            return Ok(FormulaAst::Path(q, self.expr()?));
        }
        let p = self.expr()?;
        self.expect_punct("-->")?;
        let q = self.expr()?;
        Ok(FormulaAst::LeadsTo(p, q))
    }

    // ---- abstraction specs -----------------------------------------------

    pub fn abstraction(&mut self) -> PResult<AbsDocument> {
        let mut doc = AbsDocument::default();
        while !self.at_eof() {
            doc.items.push(self.abs_item()?);
        }
        Ok(doc)
    }

    fn abs_item(&mut self) -> PResult<AbsItem> {
        let start = self.span();
        let item = if self.eat_kw("remove") {
            AbsItem::Remove {
                targets: self.expr_list()?,
                span: start,
            }
        } else if self.eat_kw("scope") {
            AbsItem::Scope {
                locations: self.expr_list()?,
                span: start,
            }
        } else if self.eat_kw("merge") {
            let target = self.postfix_expr()?;
            self.expect_punct(":")?;
            let ty = self.type_expr()?;
            self.expect_punct("=")?;
            let def = self.expr()?;
            AbsItem::Merge {
                target,
                ty,
                def,
                span: start,
            }
        } else if self.eat_kw("direction") {
            let d = if self.eat_kw("under") {
                DirectionAst::Under
            } else if self.eat_kw("over") {
                DirectionAst::Over
            } else {
                return self.error("expected 'under' or 'over'");
            };
            AbsItem::Direction(d, start)
        } else if self.eat_kw("query") {
            AbsItem::Query(self.query()?)
        } else {
            return self.error("expected 'remove', 'scope', 'merge', 'direction' or 'query'");
        };
        self.expect_punct(";")?;
        Ok(match item {
            AbsItem::Remove { targets, .. } => AbsItem::Remove {
                targets,
                span: start.to(self.prev_span()),
            },
            AbsItem::Scope { locations, .. } => AbsItem::Scope {
                locations,
                span: start.to(self.prev_span()),
            },
            AbsItem::Merge { target, ty, def, .. } => AbsItem::Merge {
                target,
                ty,
                def,
                span: start.to(self.prev_span()),
            },
            other => other,
        })
    }

    fn expr_list(&mut self) -> PResult<Vec<Expr>> {
        let mut v = vec![self.expr()?];
        while self.eat_punct(",") {
            v.push(self.expr()?);
        }
        Ok(v)
    }

    pub fn finish(&self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error("unexpected trailing input")
        }
    }
}

pub(crate) fn stmt_span(s: &Stmt) -> Span {
    match s {
        Stmt::Var(v) => v.span,
        Stmt::Expr(e) => e.span,
        Stmt::If { span, .. } | Stmt::For { span, .. } | Stmt::Switch { span, .. } => *span,
        Stmt::Break(s) | Stmt::Return(_, s) | Stmt::Empty(s) => *s,
        Stmt::Block(b) => b.span,
    }
}

fn dup_check(text: &str, names: Vec<&Ident>) -> Result<(), ParseError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.name.as_str()) {
            return Err(ParseError::at(
                text,
                n.span.start,
                &format!("duplicate declaration of '{}'", n.name),
            ));
        }
    }
    Ok(())
}

fn check_duplicates(text: &str, decls: &[Decl]) -> Result<(), ParseError> {
    let mut names: Vec<&Ident> = decls.iter().filter_map(Decl::name).collect();
    for d in decls {
        if let Decl::Typedef {
            ty: TypeExpr::Enum { variants, .. },
            ..
        } = d
        {
            names.extend(variants.iter());
        }
    }
    dup_check(text, names)
}
