use super::validate::{resolve, Spans};
use super::*;
use crate::error::{IrError, Pos};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
}

const PUNCTS: [&str; 21] = [
    "->", "==", "!=", "<=", ">=", "{", "}", "(", ")", "[", "]", ",", ";", ":", "=", "+", "*",
    "<", ">", "!", "-",
];

fn lex(src: &str) -> Result<Vec<Token>, IrError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            out.push(Token {
                tok: Tok::Ident(s),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            let v = s.parse::<i64>().map_err(|_| IrError::Syntax {
                pos,
                msg: format!("integer literal `{s}` out of range"),
            })?;
            out.push(Token {
                tok: Tok::Int(v),
                pos,
            });
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(IrError::Syntax {
                        pos,
                        msg: "unterminated string literal".into(),
                    });
                };
                advance(&mut i, &mut line, &mut col, ch);
                match ch {
                    '"' => break,
                    '\\' => {
                        let Some(&esc) = chars.get(i) else { continue };
                        advance(&mut i, &mut line, &mut col, esc);
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                    }
                    other => s.push(other),
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                pos,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) else {
            return Err(IrError::Syntax {
                pos,
                msg: format!("unexpected character `{c}`"),
            });
        };
        for _ in 0..p.len() {
            let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
        }
        out.push(Token {
            tok: Tok::Punct(p),
            pos,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    next_id: StmtId,
    spans: Spans,
}

type PResult<T> = Result<T, IrError>;

/// Parses and validates `.mapp` source text.
pub fn parse_app(source: &str) -> Result<MiniApp, IrError> {
    let mut p = Parser {
        toks: lex(source)?,
        at: 0,
        next_id: 1,
        spans: Spans::default(),
    };
    let mut app = p.app()?;
    renumber(&mut app, &mut p.spans);
    resolve(&mut app, &p.spans)?;
    Ok(app)
}

/// Statement ids follow component, handler and function order regardless of
/// where items appear in the source, so printing and reparsing keeps them.
fn renumber(app: &mut MiniApp, spans: &mut Spans) {
    fn walk(body: &mut [Stmt], next: &mut StmtId, map: &mut Vec<(StmtId, StmtId)>) {
        for s in body {
            map.push((s.id, *next));
            s.id = *next;
            *next += 1;
            if let StmtKind::If {
                then_body,
                else_body,
                ..
            } = &mut s.kind
            {
                walk(then_body, next, map);
                walk(else_body, next, map);
            }
        }
    }
    let mut next = 1;
    let mut map = Vec::new();
    for c in &mut app.components {
        for h in &mut c.handlers {
            walk(&mut h.body, &mut next, &mut map);
        }
    }
    for f in &mut app.functions {
        walk(&mut f.body, &mut next, &mut map);
    }
    let old = std::mem::take(&mut spans.stmts);
    for (from, to) in map {
        if let Some(p) = old.get(&from) {
            spans.stmts.insert(to, *p);
        }
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(IrError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Int(v) => format!("integer {v}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn skip_semis(&mut self) {
        while self.eat_punct(";") {}
    }

    fn app(&mut self) -> PResult<MiniApp> {
        self.expect_kw("app")?;
        let name = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => return self.err("expected app name string"),
        };
        self.expect_punct("{")?;
        let mut app = MiniApp {
            name,
            tables: Vec::new(),
            components: Vec::new(),
            functions: Vec::new(),
        };
        loop {
            self.skip_semis();
            if self.eat_punct("}") {
                break;
            }
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Ident(kw) if kw == "table" => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect_punct("(")?;
                    let mut columns = vec![self.ident()?];
                    while self.eat_punct(",") {
                        columns.push(self.ident()?);
                    }
                    self.expect_punct(")")?;
                    self.spans.tables.push(pos);
                    app.tables.push(TableSchema { name, columns });
                }
                Tok::Ident(kw) if kw == "activity" => {
                    self.bump();
                    let c = self.activity()?;
                    self.spans.components.push(pos);
                    app.components.push(c);
                }
                Tok::Ident(kw) if kw == "provider" => {
                    self.bump();
                    let c = self.provider()?;
                    self.spans.components.push(pos);
                    app.components.push(c);
                }
                Tok::Ident(kw) if kw == "fn" => {
                    self.bump();
                    let f = self.function()?;
                    self.spans.functions.push(pos);
                    app.functions.push(f);
                }
                _ => {
                    return self.err(format!(
                        "expected `table`, `activity`, `provider`, `fn` or `}}`, found {}",
                        self.describe()
                    ))
                }
            }
        }
        if !matches!(self.peek(), Tok::Eof) {
            return self.err(format!("trailing input: {}", self.describe()));
        }
        Ok(app)
    }

    fn activity(&mut self) -> PResult<Component> {
        let name = self.ident()?;
        self.expect_punct("{")?;
        let mut c = Component {
            name,
            kind: ComponentKind::Activity,
            widgets: Vec::new(),
            handlers: Vec::new(),
        };
        loop {
            self.skip_semis();
            if self.eat_punct("}") {
                break;
            }
            let pos = self.pos();
            let kw = self.ident()?;
            match kw.as_str() {
                "widget" => {
                    let kind = match self.ident()?.as_str() {
                        "edit" => WidgetKind::EditBox,
                        "button" => WidgetKind::Button,
                        "text" => WidgetKind::TextBox,
                        other => {
                            return Err(IrError::Syntax {
                                pos,
                                msg: format!(
                                    "unknown widget kind `{other}` (expected edit, button or text)"
                                ),
                            })
                        }
                    };
                    loop {
                        let wpos = self.pos();
                        let id = self.ident()?;
                        self.spans.widgets.push((id.clone(), wpos));
                        c.widgets.push(Widget { id, kind });
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                "oncreate" | "onstart" | "onresume" => {
                    let slot = match kw.as_str() {
                        "oncreate" => LifecycleSlot::OnCreate,
                        "onstart" => LifecycleSlot::OnStart,
                        _ => LifecycleSlot::OnResume,
                    };
                    let body = self.block()?;
                    self.spans.handlers.push(pos);
                    c.handlers.push(Handler {
                        trigger: Trigger::Lifecycle(slot),
                        body,
                    });
                }
                "onclick" => {
                    self.expect_punct("(")?;
                    let w = self.ident()?;
                    self.expect_punct(")")?;
                    let body = self.block()?;
                    self.spans.handlers.push(pos);
                    c.handlers.push(Handler {
                        trigger: Trigger::Click(w),
                        body,
                    });
                }
                other => {
                    return Err(IrError::Syntax {
                        pos,
                        msg: format!("unexpected `{other}` in activity body"),
                    })
                }
            }
        }
        Ok(c)
    }

    fn provider(&mut self) -> PResult<Component> {
        let name = self.ident()?;
        self.expect_punct("{")?;
        self.skip_semis();
        let pos = self.pos();
        self.expect_kw("query")?;
        self.expect_punct("(")?;
        let param = self.ident()?;
        self.expect_punct(")")?;
        let body = self.block()?;
        self.spans.handlers.push(pos);
        self.skip_semis();
        if !self.is_punct("}") {
            return self.err("a provider declares exactly one `query` handler");
        }
        self.bump();
        Ok(Component {
            name,
            kind: ComponentKind::Provider,
            widgets: Vec::new(),
            handlers: vec![Handler {
                trigger: Trigger::Query { param },
                body,
            }],
        })
    }

    fn ty(&mut self) -> PResult<Type> {
        match self.ident()?.as_str() {
            "int" => Ok(Type::Int),
            "str" => Ok(Type::Str),
            other => self.err(format!("unknown type `{other}`")),
        }
    }

    fn function(&mut self) -> PResult<Function> {
        let name = self.ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let pname = self.ident()?;
                self.expect_punct(":")?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let ret = if self.eat_punct("->") {
            Some(self.ty()?)
        } else {
            None
        };
        let body = self.block()?;
        Ok(Function {
            name,
            params,
            ret,
            body,
        })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut body = Vec::new();
        loop {
            self.skip_semis();
            if self.eat_punct("}") {
                return Ok(body);
            }
            body.push(self.stmt()?);
        }
    }

    fn fresh_id(&mut self, pos: Pos) -> StmtId {
        let id = self.next_id;
        self.next_id += 1;
        self.spans.stmts.insert(id, pos);
        id
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let head = match self.peek().clone() {
            Tok::Ident(s) => s,
            _ => return self.err(format!("expected statement, found {}", self.describe())),
        };
        if head == "if" {
            return self.if_stmt();
        }
        if head == "return" {
            self.bump();
            let id = self.fresh_id(pos);
            let e = self.expr()?;
            return Ok(Stmt {
                id,
                kind: StmtKind::Return(e),
            });
        }
        if head == "setText" && self.peek_at(1) == &Tok::Punct("(") {
            self.bump();
            let id = self.fresh_id(pos);
            self.expect_punct("(")?;
            let widget = self.ident()?;
            self.expect_punct(",")?;
            let value = self.expr()?;
            self.expect_punct(")")?;
            return Ok(Stmt {
                id,
                kind: StmtKind::Leak { widget, value },
            });
        }
        if head == "call" && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let id = self.fresh_id(pos);
            let (function, args) = self.call_tail()?;
            return Ok(Stmt {
                id,
                kind: StmtKind::Call {
                    result: None,
                    function,
                    args,
                },
            });
        }
        if self.peek_at(1) == &Tok::Punct("(") {
            self.bump();
            let id = self.fresh_id(pos);
            let (query, params) = self.sink_args(&head, pos)?;
            return Ok(Stmt {
                id,
                kind: StmtKind::Sink {
                    result: None,
                    sink: head,
                    query,
                    params,
                },
            });
        }
        if self.peek_at(1) == &Tok::Punct("=") {
            self.bump();
            self.bump();
            let id = self.fresh_id(pos);
            let rhs_pos = self.pos();
            if let (Tok::Ident(callee), Tok::Punct("(")) =
                (self.peek().clone(), self.peek_at(1).clone())
            {
                if callee == "providerQuery" {
                    self.bump();
                    self.expect_punct("(")?;
                    let provider = self.ident()?;
                    self.expect_punct(",")?;
                    let arg = self.expr()?;
                    self.expect_punct(")")?;
                    return Ok(Stmt {
                        id,
                        kind: StmtKind::ProviderQuery {
                            result: head,
                            provider,
                            arg,
                        },
                    });
                }
                if callee != "input" && callee != "int" && callee != "contains" {
                    self.bump();
                    let (query, params) = self.sink_args(&callee, rhs_pos)?;
                    return Ok(Stmt {
                        id,
                        kind: StmtKind::Sink {
                            result: Some(head),
                            sink: callee,
                            query,
                            params,
                        },
                    });
                }
            }
            if self.is_kw("call") && matches!(self.peek_at(1), Tok::Ident(_)) {
                self.bump();
                let (function, args) = self.call_tail()?;
                return Ok(Stmt {
                    id,
                    kind: StmtKind::Call {
                        result: Some(head),
                        function,
                        args,
                    },
                });
            }
            let expr = self.expr()?;
            return Ok(Stmt {
                id,
                kind: StmtKind::Assign { var: head, expr },
            });
        }
        self.err(format!("expected statement, found {}", self.describe()))
    }

    fn call_tail(&mut self) -> PResult<(String, Vec<Expr>)> {
        let function = self.ident()?;
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok((function, args))
    }

    /// `NAME(query [, [p, ...]])` after NAME has been consumed.
    fn sink_args(&mut self, name: &str, pos: Pos) -> PResult<(Expr, Vec<Expr>)> {
        if !is_vulnerable_function(name) {
            return Err(IrError::UnknownSink {
                pos,
                name: name.to_string(),
            });
        }
        self.expect_punct("(")?;
        let query = self.expr()?;
        let mut params = Vec::new();
        if self.eat_punct(",") {
            self.expect_punct("[")?;
            if !self.is_punct("]") {
                loop {
                    params.push(self.expr()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct("]")?;
        }
        self.expect_punct(")")?;
        Ok((query, params))
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        self.expect_kw("if")?;
        let id = self.fresh_id(pos);
        self.expect_punct("(")?;
        let cond = self.cond()?;
        self.expect_punct(")")?;
        let then_body = self.block()?;
        let else_body = if self.is_kw("else") {
            self.bump();
            if self.is_kw("if") {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt {
            id,
            kind: StmtKind::If {
                cond,
                then_body,
                else_body,
            },
        })
    }

    fn cond(&mut self) -> PResult<Cond> {
        if self.eat_punct("!") {
            return Ok(Cond::Not(Box::new(self.cond()?)));
        }
        if self.is_kw("contains") && self.peek_at(1) == &Tok::Punct("(") {
            self.bump();
            self.bump();
            let hay = self.expr()?;
            self.expect_punct(",")?;
            let needle = self.expr()?;
            self.expect_punct(")")?;
            return Ok(Cond::Contains(hay, needle));
        }
        if self.is_punct("(") {
            // Either a parenthesised condition or an expression operand.
            let save = self.at;
            self.bump();
            if let Ok(c) = self.cond() {
                if self.eat_punct(")") && !self.at_cmp_op() {
                    return Ok(c);
                }
            }
            self.at = save;
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct("<=") => CmpOp::Le,
            Tok::Punct(">") => CmpOp::Gt,
            Tok::Punct(">=") => CmpOp::Ge,
            Tok::Punct("==") => CmpOp::Eq,
            Tok::Punct("!=") => CmpOp::Ne,
            _ => return self.err(format!("expected comparison, found {}", self.describe())),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Cond::Cmp(op, lhs, rhs))
    }

    fn at_cmp_op(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Punct("<" | "<=" | ">" | ">=" | "==" | "!=" | "+" | "*")
        )
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        while self.eat_punct("+") {
            let rhs = self.term()?;
            lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.primary()?;
        while self.eat_punct("*") {
            let rhs = self.primary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Punct("-") => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(v) => {
                        self.bump();
                        Ok(Expr::Int(-v))
                    }
                    _ => self.err("`-` is only allowed before an integer literal"),
                }
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.is_punct("(") && (name == "input" || name == "int") {
                    self.bump();
                    let e = if name == "input" {
                        Expr::Input(self.ident()?)
                    } else {
                        Expr::ToInt(Box::new(self.expr()?))
                    };
                    self.expect_punct(")")?;
                    return Ok(e);
                }
                Ok(Expr::Var(name))
            }
            _ => self.err(format!("expected expression, found {}", self.describe())),
        }
    }
}
