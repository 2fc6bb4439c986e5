//! Pretty-printer producing text that parses back to the same tree.

use super::ast::*;
use std::fmt::Write;

const P_ASSIGN: u8 = 0;
const P_TERNARY: u8 = 1;
const P_UNARY: u8 = 9;
const P_POSTFIX: u8 = 10;

fn bin_prec(op: BinaryOp) -> u8 {
    use BinaryOp::*;
    match op {
        Imply => 2,
        Or => 3,
        And => 4,
        Eq | Ne => 5,
        Lt | Le | Gt | Ge => 6,
        Add | Sub => 7,
        Mul | Div | Mod => 8,
    }
}

fn bin_text(op: BinaryOp) -> &'static str {
    use BinaryOp::*;
    match op {
        Add => "+",
        Sub => "-",
        Mul => "*",
        Div => "/",
        Mod => "%",
        Lt => "<",
        Le => "<=",
        Gt => ">",
        Ge => ">=",
        Eq => "==",
        Ne => "!=",
        And => "and",
        Or => "or",
        Imply => "imply",
    }
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Assign(..) => P_ASSIGN,
        ExprKind::Ternary(..) => P_TERNARY,
        ExprKind::Binary(op, ..) => bin_prec(*op),
        ExprKind::Unary(..) | ExprKind::Quant { .. } => P_UNARY,
        ExprKind::IncDec(IncDec::PreInc | IncDec::PreDec, _) => P_UNARY,
        _ => P_POSTFIX,
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e, P_ASSIGN);
    s
}

fn expr(out: &mut String, e: &Expr, min: u8) {
    if prec(e) < min {
        out.push('(');
        expr(out, e, P_ASSIGN);
        out.push(')');
        return;
    }
    match &e.kind {
        ExprKind::Int(v) => write!(out, "{v}").unwrap(),
        ExprKind::Bool(b) => write!(out, "{b}").unwrap(),
        ExprKind::Ident(n) => out.push_str(n),
        ExprKind::Field(b, f) => {
            expr(out, b, P_POSTFIX);
            out.push('.');
            out.push_str(&f.name);
        }
        ExprKind::Index(b, i) => {
            expr(out, b, P_POSTFIX);
            out.push('[');
            expr(out, i, P_ASSIGN);
            out.push(']');
        }
        ExprKind::Call(f, args) => {
            out.push_str(&f.name);
            out.push('(');
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                expr(out, a, P_ASSIGN);
            }
            out.push(')');
        }
        ExprKind::Unary(op, a) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
            });
            // Avoid `--` and `-(-x)` lexing as a decrement.
            let nested = matches!(a.kind, ExprKind::Unary(..) | ExprKind::IncDec(..));
            if nested {
                out.push('(');
                expr(out, a, P_ASSIGN);
                out.push(')');
            } else {
                expr(out, a, P_UNARY);
            }
        }
        ExprKind::Binary(op, a, b) => {
            let p = bin_prec(*op);
            expr(out, a, p);
            write!(out, " {} ", bin_text(*op)).unwrap();
            expr(out, b, p + 1);
        }
        ExprKind::Ternary(c, a, b) => {
            expr(out, c, 2);
            out.push_str(" ? ");
            expr(out, a, P_ASSIGN);
            out.push_str(" : ");
            expr(out, b, P_TERNARY);
        }
        ExprKind::Assign(op, l, r) => {
            expr(out, l, P_TERNARY);
            out.push_str(match op {
                AssignOp::Set => " = ",
                AssignOp::Add => " += ",
                AssignOp::Sub => " -= ",
                AssignOp::Mul => " *= ",
                AssignOp::Div => " /= ",
                AssignOp::Mod => " %= ",
            });
            expr(out, r, P_ASSIGN);
        }
        ExprKind::IncDec(k, a) => match k {
            IncDec::PreInc | IncDec::PreDec => {
                out.push_str(if *k == IncDec::PreInc { "++" } else { "--" });
                if matches!(a.kind, ExprKind::Unary(..) | ExprKind::IncDec(..)) {
                    out.push('(');
                    expr(out, a, P_ASSIGN);
                    out.push(')');
                } else {
                    expr(out, a, P_UNARY);
                }
            }
            IncDec::PostInc | IncDec::PostDec => {
                expr(out, a, P_POSTFIX);
                out.push_str(if *k == IncDec::PostInc { "++" } else { "--" });
            }
        },
        ExprKind::Quant { q, var, ty, body } => {
            let kw = match q {
                Quantifier::Forall => "forall",
                Quantifier::Exists => "exists",
                Quantifier::Sum => "sum",
            };
            write!(out, "{kw} ({} : {}) (", var.name, print_type(ty)).unwrap();
            expr(out, body, P_ASSIGN);
            out.push(')');
        }
    }
}

pub fn print_type(t: &TypeExpr) -> String {
    match t {
        TypeExpr::Bool(_) => "bool".into(),
        TypeExpr::Int { range: None, .. } => "int".into(),
        TypeExpr::Int { range: Some(r), .. } => format!("int[{},{}]", print_expr(&r.0), print_expr(&r.1)),
        TypeExpr::Named(i) => i.name.clone(),
        TypeExpr::Struct { fields, .. } => {
            let mut s = "struct {".to_string();
            for f in fields {
                write!(s, " {} {}{};", print_type(&f.ty), f.name.name, dims(&f.dims)).unwrap();
            }
            s.push_str(" }");
            s
        }
        TypeExpr::Enum { variants, .. } => format!(
            "enum {{ {} }}",
            variants.iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn dims(ds: &[ArrayDim]) -> String {
    ds.iter()
        .map(|d| match d {
            ArrayDim::Expr(e) => format!("[{}]", print_expr(e)),
            ArrayDim::Type(t) => format!("[{}]", print_type(t)),
        })
        .collect()
}

fn init(i: &Init) -> String {
    match i {
        Init::Expr(e) => print_expr(e),
        Init::List(items, _) => format!("{{ {} }}", items.iter().map(init).collect::<Vec<_>>().join(", ")),
    }
}

fn var(v: &VarDeclAst) -> String {
    let mut s = format!("{} {}{}", print_type(&v.ty), v.name.name, dims(&v.dims));
    if let Some(i) = &v.init {
        write!(s, " = {}", init(i)).unwrap();
    }
    s.push(';');
    s
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| {
            format!(
                "{}{} {}{}{}",
                if p.is_const { "const " } else { "" },
                print_type(&p.ty),
                if p.by_ref { "&" } else { "" },
                p.name.name,
                dims(&p.dims)
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn indent(out: &mut String, n: usize) {
    for _ in 0..n {
        out.push_str("    ");
    }
}

fn stmt(out: &mut String, s: &Stmt, ind: usize) {
    match s {
        Stmt::Var(v) => {
            indent(out, ind);
            out.push_str(&var(v));
            out.push('\n');
        }
        Stmt::Expr(e) => {
            indent(out, ind);
            writeln!(out, "{};", print_expr(e)).unwrap();
        }
        Stmt::If { cond, then, els, .. } => {
            indent(out, ind);
            writeln!(out, "if ({})", print_expr(cond)).unwrap();
            stmt(out, then, ind + 1);
            if let Some(e) = els {
                indent(out, ind);
                out.push_str("else\n");
                stmt(out, e, ind + 1);
            }
        }
        Stmt::For { var, ty, body, .. } => {
            indent(out, ind);
            writeln!(out, "for ({} : {})", var.name, print_type(ty)).unwrap();
            stmt(out, body, ind + 1);
        }
        Stmt::Switch { scrut, cases, .. } => {
            indent(out, ind);
            writeln!(out, "switch ({}) {{", print_expr(scrut)).unwrap();
            for c in cases {
                indent(out, ind);
                match &c.label {
                    Some(l) => writeln!(out, "case {}:", print_expr(l)).unwrap(),
                    None => out.push_str("default:\n"),
                }
                for s in &c.body {
                    stmt(out, s, ind + 1);
                }
            }
            indent(out, ind);
            out.push_str("}\n");
        }
        Stmt::Break(_) => {
            indent(out, ind);
            out.push_str("break;\n");
        }
        Stmt::Return(e, _) => {
            indent(out, ind);
            match e {
                Some(e) => writeln!(out, "return {};", print_expr(e)).unwrap(),
                None => out.push_str("return;\n"),
            }
        }
        Stmt::Block(b) => block(out, b, ind),
        Stmt::Empty(_) => {
            indent(out, ind);
            out.push_str(";\n");
        }
    }
}

fn block(out: &mut String, b: &Block, ind: usize) {
    indent(out, ind);
    out.push_str("{\n");
    for s in &b.stmts {
        stmt(out, s, ind + 1);
    }
    indent(out, ind);
    out.push_str("}\n");
}

fn names(ids: &[Ident]) -> String {
    ids.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", ")
}

fn decl(out: &mut String, d: &Decl, ind: usize) {
    indent(out, ind);
    match d {
        Decl::Const { ty, name, value, .. } => {
            writeln!(out, "const {} {} = {};", print_type(ty), name.name, print_expr(value)).unwrap()
        }
        Decl::Typedef { ty, name, dims: ds, .. } => {
            writeln!(out, "typedef {} {}{};", print_type(ty), name.name, dims(ds)).unwrap()
        }
        Decl::Var(v) => {
            out.push_str(&var(v));
            out.push('\n');
        }
        Decl::Chan { name, dims: ds, .. } => writeln!(out, "chan {}{};", name.name, dims(ds)).unwrap(),
        Decl::Function(f) => {
            let ret = f.ret.as_ref().map(print_type).unwrap_or_else(|| "void".into());
            writeln!(out, "{ret} {}({})", f.name.name, params(&f.params)).unwrap();
            block(out, &f.body, ind);
        }
        Decl::Process(p) => process(out, p),
        Decl::System { entries, .. } => {
            let items: Vec<String> = entries
                .iter()
                .map(|e| match &e.args {
                    None => e.name.name.clone(),
                    Some(a) => format!(
                        "{}({})",
                        e.name.name,
                        a.iter().map(print_expr).collect::<Vec<_>>().join(", ")
                    ),
                })
                .collect();
            writeln!(out, "system {};", items.join(", ")).unwrap();
        }
        Decl::Partition { whole, parts, .. } => writeln!(
            out,
            "partition {} = {};",
            whole.name,
            parts.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(" | ")
        )
        .unwrap(),
    }
}

fn process(out: &mut String, p: &ProcessDecl) {
    write!(out, "process {}", p.name.name).unwrap();
    if !p.params.is_empty() {
        write!(out, "({})", params(&p.params)).unwrap();
    }
    out.push_str(" {\n");
    for d in &p.decls {
        decl(out, d, 1);
    }
    writeln!(out, "    state {};", names(&p.states)).unwrap();
    if !p.committed.is_empty() {
        writeln!(out, "    commit {};", names(&p.committed)).unwrap();
    }
    writeln!(out, "    init {};", p.init.name).unwrap();
    if let Some(e) = &p.initially {
        writeln!(out, "    initially {};", print_expr(e)).unwrap();
    }
    if !p.transitions.is_empty() {
        out.push_str("    trans\n");
        for (k, t) in p.transitions.iter().enumerate() {
            write!(out, "        {} -> {} {{", t.from.name, t.to.name).unwrap();
            if !t.selects.is_empty() {
                let sel: Vec<String> = t
                    .selects
                    .iter()
                    .map(|s| format!("{} : {}", s.var.name, print_type(&s.ty)))
                    .collect();
                write!(out, " select {};", sel.join(", ")).unwrap();
            }
            if let Some(g) = &t.guard {
                write!(out, " guard {};", print_expr(g)).unwrap();
            }
            if let Some(s) = &t.sync {
                let mut c = String::new();
                expr(&mut c, &s.chan, P_POSTFIX);
                write!(out, " sync {c}{};", if s.kind == SyncKind::Send { "!" } else { "?" }).unwrap();
            }
            if !t.assign.is_empty() {
                write!(
                    out,
                    " assign {};",
                    t.assign.iter().map(print_expr).collect::<Vec<_>>().join(", ")
                )
                .unwrap();
            }
            out.push_str(" }");
            out.push_str(if k + 1 == p.transitions.len() { ";\n" } else { ",\n" });
        }
    }
    out.push_str("}\n");
}

pub fn print_query(q: &NamedQuery) -> String {
    let body = match &q.formula {
        FormulaAst::Path(k, e) => {
            let op = match k {
                PathQuant::AlwaysGlobally => "A[]",
                PathQuant::ExistsFinally => "E<>",
                PathQuant::AlwaysFinally => "A<>",
                PathQuant::ExistsGlobally => "E[]",
            };
            format!("{op} {}", print_expr(e))
        }
        FormulaAst::LeadsTo(p, q) => format!("{} --> {}", print_expr(p), print_expr(q)),
    };
    match &q.name {
        Some(n) => format!("{}: {body}", n.name),
        None => body,
    }
}

pub fn print_abstraction(doc: &AbsDocument) -> String {
    let mut out = String::new();
    for item in &doc.items {
        abs_item(&mut out, item);
    }
    out
}

fn abs_item(out: &mut String, item: &AbsItem) {
    let list = |es: &[Expr]| es.iter().map(print_expr).collect::<Vec<_>>().join(", ");
    match item {
        AbsItem::Remove { targets, .. } => writeln!(out, "remove {};", list(targets)).unwrap(),
        AbsItem::Scope { locations, .. } => writeln!(out, "scope {};", list(locations)).unwrap(),
        AbsItem::Merge { target, ty, def, .. } => {
            let mut t = String::new();
            expr(&mut t, target, P_POSTFIX);
            writeln!(out, "merge {t} : {} = {};", print_type(ty), print_expr(def)).unwrap()
        }
        AbsItem::Direction(d, _) => writeln!(
            out,
            "direction {};",
            match d {
                DirectionAst::Under => "under",
                DirectionAst::Over => "over",
            }
        )
        .unwrap(),
        AbsItem::Query(q) => writeln!(out, "query {};", print_query(q)).unwrap(),
    }
}

pub(crate) fn print_model(doc: &ModelDocument) -> String {
    let mut out = String::new();
    for d in &doc.decls {
        decl(&mut out, d, 0);
    }
    if let Some(a) = &doc.abstraction {
        out.push_str("abstraction {\n");
        for item in &a.items {
            out.push_str("    ");
            abs_item(&mut out, item);
        }
        out.push_str("}\n");
    }
    out
}
