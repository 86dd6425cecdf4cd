use std::fmt::Write;

use super::*;

/// Renders an app back to `.mapp` source. Parsing the output yields an app
/// equal to the input.
pub fn print_app(app: &MiniApp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "app {} {{", quote(&app.name));
    for t in &app.tables {
        let _ = writeln!(out, "  table {}({})", t.name, t.columns.join(", "));
    }
    for c in &app.components {
        match c.kind {
            ComponentKind::Activity => {
                let _ = writeln!(out, "  activity {} {{", c.name);
                for w in &c.widgets {
                    let kind = match w.kind {
                        WidgetKind::EditBox => "edit",
                        WidgetKind::Button => "button",
                        WidgetKind::TextBox => "text",
                    };
                    let _ = writeln!(out, "    widget {kind} {}", w.id);
                }
                for h in &c.handlers {
                    let head = match &h.trigger {
                        Trigger::Lifecycle(slot) => slot.keyword().to_string(),
                        Trigger::Click(w) => format!("onclick({w})"),
                        Trigger::Query { param } => format!("query({param})"),
                    };
                    let _ = writeln!(out, "    {head} {{");
                    block(&mut out, &h.body, 3);
                    let _ = writeln!(out, "    }}");
                }
                let _ = writeln!(out, "  }}");
            }
            ComponentKind::Provider => {
                let _ = writeln!(out, "  provider {} {{", c.name);
                for h in &c.handlers {
                    if let Trigger::Query { param } = &h.trigger {
                        let _ = writeln!(out, "    query({param}) {{");
                        block(&mut out, &h.body, 3);
                        let _ = writeln!(out, "    }}");
                    }
                }
                let _ = writeln!(out, "  }}");
            }
        }
    }
    for f in &app.functions {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{}: {}", p.name, p.ty.keyword()))
            .collect();
        let ret = f
            .ret
            .map(|t| format!(" -> {}", t.keyword()))
            .unwrap_or_default();
        let _ = writeln!(out, "  fn {}({}){ret} {{", f.name, params.join(", "));
        block(&mut out, &f.body, 2);
        let _ = writeln!(out, "  }}");
    }
    out.push_str("}\n");
    out
}

fn block(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    match &s.kind {
        StmtKind::Assign { var, expr: e } => {
            let _ = writeln!(out, "{pad}{var} = {}", expr(e));
        }
        StmtKind::If {
            cond: c,
            then_body,
            else_body,
        } => {
            let _ = writeln!(out, "{pad}if ({}) {{", cond(c));
            block(out, then_body, depth + 1);
            if else_body.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                block(out, else_body, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        StmtKind::Sink {
            result,
            sink,
            query,
            params,
        } => {
            let lhs = result
                .as_ref()
                .map(|r| format!("{r} = "))
                .unwrap_or_default();
            let tail = if params.is_empty() {
                String::new()
            } else {
                let ps: Vec<String> = params.iter().map(expr).collect();
                format!(", [{}]", ps.join(", "))
            };
            let _ = writeln!(out, "{pad}{lhs}{sink}({}{tail})", expr(query));
        }
        StmtKind::Leak { widget, value } => {
            let _ = writeln!(out, "{pad}setText({widget}, {})", expr(value));
        }
        StmtKind::ProviderQuery {
            result,
            provider,
            arg,
        } => {
            let _ = writeln!(out, "{pad}{result} = providerQuery({provider}, {})", expr(arg));
        }
        StmtKind::Call {
            result,
            function,
            args,
        } => {
            let lhs = result
                .as_ref()
                .map(|r| format!("{r} = "))
                .unwrap_or_default();
            let a: Vec<String> = args.iter().map(expr).collect();
            let _ = writeln!(out, "{pad}{lhs}call {function}({})", a.join(", "));
        }
        StmtKind::Return(e) => {
            let _ = writeln!(out, "{pad}return {}", expr(e));
        }
    }
}

fn quote(s: &str) -> String {
    let mut q = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

pub(crate) fn expr(e: &Expr) -> String {
    prec_expr(e, 0)
}

// 1: `+`, 2: `*`; operators are left associative.
fn prec_expr(e: &Expr, min: u8) -> String {
    let (text, prec) = match e {
        Expr::Int(v) => (v.to_string(), 3),
        Expr::Str(s) => (quote(s), 3),
        Expr::Var(v) => (v.clone(), 3),
        Expr::Input(w) => (format!("input({w})"), 3),
        Expr::ToInt(inner) => (format!("int({})", expr(inner)), 3),
        Expr::Concat(a, b) | Expr::Add(a, b) => (
            format!("{} + {}", prec_expr(a, 1), prec_expr(b, 2)),
            1,
        ),
        Expr::Mul(a, b) => (format!("{} * {}", prec_expr(a, 2), prec_expr(b, 3)), 2),
    };
    if prec < min {
        format!("({text})")
    } else {
        text
    }
}

pub(crate) fn cond(c: &Cond) -> String {
    match c {
        Cond::Cmp(op, a, b) => format!("{} {} {}", expr(a), op.symbol(), expr(b)),
        Cond::StrEq(a, b) => format!("{} == {}", expr(a), expr(b)),
        Cond::Contains(a, b) => format!("contains({}, {})", expr(a), expr(b)),
        Cond::Not(inner) => format!("!({})", cond(inner)),
    }
}
