//! Syntax trees. Every node carries a span into its source text; spans
//! never take part in equality so printed and reparsed trees compare equal.

#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TypeExpr {
    Bool(Span),
    Int {
        range: Option<Box<(Expr, Expr)>>,
        span: Span,
    },
    Named(Ident),
    Struct {
        fields: Vec<FieldDecl>,
        span: Span,
    },
    Enum {
        variants: Vec<Ident>,
        span: Span,
    },
}

impl TypeExpr {
    pub fn span(&self) -> Span {
        match self {
            TypeExpr::Bool(s) => *s,
            TypeExpr::Int { span, .. } | TypeExpr::Struct { span, .. } | TypeExpr::Enum { span, .. } => *span,
            TypeExpr::Named(i) => i.span,
        }
    }
}

/// `[N]` (size or index type name) or `[int[lo,hi]]`.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrayDim {
    Expr(Expr),
    Type(TypeExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDecl {
    pub ty: TypeExpr,
    pub name: Ident,
    pub dims: Vec<ArrayDim>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Expr(Expr),
    List(Vec<Init>, Span),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarDeclAst {
    pub ty: TypeExpr,
    pub name: Ident,
    pub dims: Vec<ArrayDim>,
    pub init: Option<Init>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub is_const: bool,
    pub ty: TypeExpr,
    pub by_ref: bool,
    pub name: Ident,
    pub dims: Vec<ArrayDim>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDecl {
    /// `None` for `void`.
    pub ret: Option<TypeExpr>,
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Block,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    /// `None` for `default`.
    pub label: Option<Expr>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Var(VarDeclAst),
    Expr(Expr),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
        span: Span,
    },
    For {
        var: Ident,
        ty: TypeExpr,
        body: Box<Stmt>,
        span: Span,
    },
    Switch {
        scrut: Expr,
        cases: Vec<Case>,
        span: Span,
    },
    Break(Span),
    Return(Option<Expr>, Span),
    Block(Block),
    Empty(Span),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Imply,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncDec {
    PreInc,
    PreDec,
    PostInc,
    PostDec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantifier {
    Forall,
    Exists,
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Ident(String),
    Field(Box<Expr>, Ident),
    Index(Box<Expr>, Box<Expr>),
    Call(Ident, Vec<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Assign(AssignOp, Box<Expr>, Box<Expr>),
    IncDec(IncDec, Box<Expr>),
    Quant {
        q: Quantifier,
        var: Ident,
        ty: TypeExpr,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyncKind {
    Send,
    Receive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyncAst {
    pub chan: Expr,
    pub kind: SyncKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Select {
    pub var: Ident,
    pub ty: TypeExpr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub from: Ident,
    pub to: Ident,
    pub selects: Vec<Select>,
    pub guard: Option<Expr>,
    pub sync: Option<SyncAst>,
    pub assign: Vec<Expr>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessDecl {
    pub name: Ident,
    pub params: Vec<Param>,
    /// Local constants, typedefs, variables and functions.
    pub decls: Vec<Decl>,
    pub states: Vec<Ident>,
    pub committed: Vec<Ident>,
    pub init: Ident,
    pub initially: Option<Expr>,
    pub transitions: Vec<Transition>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemEntry {
    pub name: Ident,
    /// Explicit actuals; `None` instantiates every parameter combination.
    pub args: Option<Vec<Expr>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decl {
    Const {
        ty: TypeExpr,
        name: Ident,
        value: Expr,
        span: Span,
    },
    Typedef {
        ty: TypeExpr,
        name: Ident,
        dims: Vec<ArrayDim>,
        span: Span,
    },
    Var(VarDeclAst),
    Chan {
        name: Ident,
        dims: Vec<ArrayDim>,
        span: Span,
    },
    Function(FunctionDecl),
    Process(ProcessDecl),
    System {
        entries: Vec<SystemEntry>,
        span: Span,
    },
    /// `partition T = A | B | C;` asserts the listed types tile `T` without overlap.
    Partition {
        whole: Ident,
        parts: Vec<Ident>,
        span: Span,
    },
}

impl Decl {
    pub fn name(&self) -> Option<&Ident> {
        match self {
            Decl::Const { name, .. } | Decl::Typedef { name, .. } | Decl::Chan { name, .. } => Some(name),
            Decl::Var(v) => Some(&v.name),
            Decl::Function(f) => Some(&f.name),
            Decl::Process(p) => Some(&p.name),
            Decl::System { .. } | Decl::Partition { .. } => None,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Decl::Const { span, .. }
            | Decl::Typedef { span, .. }
            | Decl::Chan { span, .. }
            | Decl::System { span, .. }
            | Decl::Partition { span, .. } => *span,
            Decl::Var(v) => v.span,
            Decl::Function(f) => f.span,
            Decl::Process(p) => p.span,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathQuant {
    /// `A[] p`
    AlwaysGlobally,
    /// `E<> p`
    ExistsFinally,
    /// `A<> p`
    AlwaysFinally,
    /// `E[] p`
    ExistsGlobally,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FormulaAst {
    Path(PathQuant, Expr),
    LeadsTo(Expr, Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedQuery {
    pub name: Option<Ident>,
    pub formula: FormulaAst,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct QueryDocument {
    pub queries: Vec<NamedQuery>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionAst {
    Under,
    Over,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AbsItem {
    Remove {
        targets: Vec<Expr>,
        span: Span,
    },
    /// Restricts the preceding `remove` to these `Agent.location` pairs.
    Scope {
        locations: Vec<Expr>,
        span: Span,
    },
    Merge {
        /// Plain name or `Type.field` for a per-record merge.
        target: Expr,
        ty: TypeExpr,
        def: Expr,
        span: Span,
    },
    Direction(DirectionAst, Span),
    Query(NamedQuery),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct AbsDocument {
    pub items: Vec<AbsItem>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelDocument {
    pub decls: Vec<Decl>,
    /// Inline abstraction section turning the document into an abstract model.
    pub abstraction: Option<AbsDocument>,
}
