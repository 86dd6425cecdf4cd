//! The mini-SQL fragment: `SELECT * FROM t [WHERE ...]` and
//! `DELETE FROM t [WHERE ...]` with equality atoms joined by AND and OR.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("query parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("no table `{0}`")]
    MissingTable(String),
    #[error("no column `{column}` in table `{table}`")]
    MissingColumn { table: String, column: String },
    #[error("placeholder {0} has no bound parameter")]
    MissingParam(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Select,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Column(String),
    Literal(String),
    /// The `n`-th `?` placeholder, from 0.
    Param(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhereExpr {
    Eq(Operand, Operand),
    And(Box<WhereExpr>, Box<WhereExpr>),
    Or(Box<WhereExpr>, Box<WhereExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryAst {
    pub verb: Verb,
    pub table: String,
    pub filter: Option<WhereExpr>,
}

impl QueryAst {
    /// The tree with literal values erased; equal shapes mean the input only
    /// supplied data.
    pub fn shape(&self) -> String {
        fn op(o: &Operand) -> String {
            match o {
                Operand::Column(c) => format!("col({c})"),
                Operand::Literal(_) => "lit".into(),
                Operand::Param(i) => format!("param({i})"),
            }
        }
        fn walk(e: &WhereExpr) -> String {
            match e {
                WhereExpr::Eq(a, b) => format!("eq({},{})", op(a), op(b)),
                WhereExpr::And(a, b) => format!("and({},{})", walk(a), walk(b)),
                WhereExpr::Or(a, b) => format!("or({},{})", walk(a), walk(b)),
            }
        }
        let filter = self.filter.as_ref().map(walk).unwrap_or_default();
        format!("{:?}:{}:{filter}", self.verb, self.table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Lit(String),
    Star,
    Eq,
    Param,
}

fn lex(q: &str) -> Result<Vec<(usize, Tok)>, SqlError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = q.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '*' => {
                out.push((pos, Tok::Star));
                i += 1;
            }
            '=' => {
                out.push((pos, Tok::Eq));
                i += 1;
            }
            '?' => {
                out.push((pos, Tok::Param));
                i += 1;
            }
            '\'' => {
                let mut j = i + 1;
                let mut lit = String::new();
                while j < chars.len() && chars[j].1 != '\'' {
                    lit.push(chars[j].1);
                    j += 1;
                }
                if j == chars.len() {
                    return Err(SqlError::Parse {
                        pos,
                        msg: "unterminated literal".into(),
                    });
                }
                out.push((pos, Tok::Lit(lit)));
                i = j + 1;
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut j = i;
                let mut w = String::new();
                while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
                    w.push(chars[j].1);
                    j += 1;
                }
                out.push((pos, Tok::Word(w)));
                i = j;
            }
            other => {
                return Err(SqlError::Parse {
                    pos,
                    msg: format!("unexpected `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
    params: usize,
}

impl Parser {
    fn err<T>(&self, msg: &str) -> Result<T, SqlError> {
        let pos = self.toks.get(self.i).map(|t| t.0).unwrap_or(self.end);
        Err(SqlError::Parse {
            pos,
            msg: msg.to_string(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.1)
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if let Some(Tok::Word(w)) = self.peek() {
            if w.eq_ignore_ascii_case(kw) {
                self.i += 1;
                return true;
            }
        }
        false
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.keyword(kw) {
            Ok(())
        } else {
            self.err(&format!("expected {kw}"))
        }
    }

    fn ident(&mut self) -> Result<String, SqlError> {
        match self.peek() {
            Some(Tok::Word(w)) if !is_keyword(w) => {
                let w = w.clone();
                self.i += 1;
                Ok(w)
            }
            _ => self.err("expected a name"),
        }
    }

    fn or_expr(&mut self) -> Result<WhereExpr, SqlError> {
        let mut e = self.and_expr()?;
        while self.keyword("or") {
            e = WhereExpr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<WhereExpr, SqlError> {
        let mut e = self.atom()?;
        while self.keyword("and") {
            e = WhereExpr::And(Box::new(e), Box::new(self.atom()?));
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<WhereExpr, SqlError> {
        let a = self.operand()?;
        if self.peek() != Some(&Tok::Eq) {
            return self.err("expected `=`");
        }
        self.i += 1;
        let b = self.operand()?;
        Ok(WhereExpr::Eq(a, b))
    }

    fn operand(&mut self) -> Result<Operand, SqlError> {
        match self.peek().cloned() {
            Some(Tok::Lit(s)) => {
                self.i += 1;
                Ok(Operand::Literal(s))
            }
            Some(Tok::Param) => {
                self.i += 1;
                self.params += 1;
                Ok(Operand::Param(self.params - 1))
            }
            Some(Tok::Word(_)) => Ok(Operand::Column(self.ident()?)),
            _ => self.err("expected a column, literal or `?`"),
        }
    }
}

fn is_keyword(w: &str) -> bool {
    ["select", "delete", "from", "where", "and", "or"]
        .iter()
        .any(|k| w.eq_ignore_ascii_case(k))
}

pub fn parse_query(q: &str) -> Result<QueryAst, SqlError> {
    let mut p = Parser {
        toks: lex(q)?,
        i: 0,
        end: q.len(),
        params: 0,
    };
    let verb = if p.keyword("select") {
        if p.peek() != Some(&Tok::Star) {
            return p.err("expected `*`");
        }
        p.i += 1;
        Verb::Select
    } else if p.keyword("delete") {
        Verb::Delete
    } else {
        return p.err("expected SELECT or DELETE");
    };
    p.expect_keyword("from")?;
    let table = p.ident()?;
    let filter = if p.keyword("where") {
        Some(p.or_expr()?)
    } else {
        None
    };
    if p.i != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(QueryAst {
        verb,
        table,
        filter,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// In-memory tables of text values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniDb {
    pub tables: Vec<Table>,
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("invalid database fixture: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row} of table `{table}` has {got} values for {want} columns")]
    Arity {
        table: String,
        row: usize,
        got: usize,
        want: usize,
    },
}

impl MiniDb {
    pub fn from_json(text: &str) -> Result<MiniDb, DbError> {
        let db: MiniDb = serde_json::from_str(text)?;
        for t in &db.tables {
            for (i, r) in t.rows.iter().enumerate() {
                if r.len() != t.columns.len() {
                    return Err(DbError::Arity {
                        table: t.name.clone(),
                        row: i,
                        got: r.len(),
                        want: t.columns.len(),
                    });
                }
            }
        }
        Ok(db)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Rows selected by `ast`, with `?` placeholders bound to `params` as data.
    pub fn execute(&self, ast: &QueryAst, params: &[String]) -> Result<Vec<Vec<String>>, SqlError> {
        let t = self
            .table(&ast.table)
            .ok_or_else(|| SqlError::MissingTable(ast.table.clone()))?;
        let index: BTreeMap<&str, usize> = t.columns.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut out = Vec::new();
        for row in &t.rows {
            let keep = match &ast.filter {
                None => true,
                Some(f) => matches(f, row, t, &index, params)?,
            };
            if keep {
                out.push(row.clone());
            }
        }
        Ok(out)
    }
}

fn matches(
    e: &WhereExpr,
    row: &[String],
    t: &Table,
    index: &BTreeMap<&str, usize>,
    params: &[String],
) -> Result<bool, SqlError> {
    let value = |o: &Operand| -> Result<String, SqlError> {
        match o {
            Operand::Literal(s) => Ok(s.clone()),
            Operand::Column(c) => index
                .get(c.as_str())
                .map(|&i| row[i].clone())
                .ok_or_else(|| SqlError::MissingColumn {
                    table: t.name.clone(),
                    column: c.clone(),
                }),
            Operand::Param(i) => params.get(*i).cloned().ok_or(SqlError::MissingParam(*i)),
        }
    };
    Ok(match e {
        WhereExpr::Eq(a, b) => value(a)? == value(b)?,
        WhereExpr::And(a, b) => matches(a, row, t, index, params)? && matches(b, row, t, index, params)?,
        WhereExpr::Or(a, b) => matches(a, row, t, index, params)? || matches(b, row, t, index, params)?,
    })
}

/// Rows as the text a sink returns: values joined by `|`, one row per line.
pub fn rows_text(rows: &[Vec<String>]) -> String {
    rows.iter().map(|r| r.join("|")).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(s: &str) -> Operand {
        Operand::Literal(s.into())
    }

    #[test]
    fn tautology_parses_as_or() {
        let ast = parse_query("SELECT * FROM student WHERE stdno='a' or '1'='1'").unwrap();
        assert_eq!(
            ast.filter,
            Some(WhereExpr::Or(
                Box::new(WhereExpr::Eq(Operand::Column("stdno".into()), lit("a"))),
                Box::new(WhereExpr::Eq(lit("1"), lit("1"))),
            ))
        );
    }

    #[test]
    fn single_atom() {
        let ast = parse_query("SELECT * FROM student WHERE stdno='7'").unwrap();
        assert_eq!(ast.filter, Some(WhereExpr::Eq(Operand::Column("stdno".into()), lit("7"))));
    }

    #[test]
    fn dangling_where_is_an_error() {
        assert!(matches!(parse_query("SELECT * FROM x WHERE "), Err(SqlError::Parse { .. })));
        assert!(matches!(parse_query("SELECT * FROM x WHERE a='b''"), Err(SqlError::Parse { .. })));
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let ast = parse_query("select * from t where a='1' OR b='2' and c='3'").unwrap();
        let Some(WhereExpr::Or(_, rhs)) = ast.filter else { panic!() };
        assert!(matches!(*rhs, WhereExpr::And(..)));
    }

    #[test]
    fn execution_and_placeholders() {
        let db = MiniDb::from_json(
            r#"{"tables":[{"name":"student","columns":["stdno","name"],"rows":[["1","alice"],["2","bob"]]}]}"#,
        )
        .unwrap();
        let all = parse_query("SELECT * FROM student WHERE stdno='a' or '1'='1'").unwrap();
        assert_eq!(db.execute(&all, &[]).unwrap().len(), 2);
        let bound = parse_query("SELECT * FROM student WHERE stdno=?").unwrap();
        assert!(db.execute(&bound, &["a' or '1'='1".into()]).unwrap().is_empty());
        assert_eq!(db.execute(&bound, &["2".into()]).unwrap(), vec![vec!["2".to_string(), "bob".into()]]);
        let missing = parse_query("SELECT * FROM nope").unwrap();
        assert_eq!(db.execute(&missing, &[]), Err(SqlError::MissingTable("nope".into())));
    }

    #[test]
    fn arity_is_checked() {
        let err = MiniDb::from_json(r#"{"tables":[{"name":"t","columns":["a"],"rows":[["1","2"]]}]}"#);
        assert!(matches!(err, Err(DbError::Arity { .. })));
    }

    #[test]
    fn shapes_ignore_literal_values() {
        let a = parse_query("SELECT * FROM t WHERE a='x'").unwrap();
        let b = parse_query("SELECT * FROM t WHERE a='y'").unwrap();
        let c = parse_query("SELECT * FROM t WHERE a='x' or '1'='1'").unwrap();
        assert_eq!(a.shape(), b.shape());
        assert_ne!(a.shape(), c.shape());
    }
}
