//! Canonical single-line rendering of parse trees.
//!
//! Keywords are uppercase, identifiers are quoted only when needed, and
//! parentheses appear exactly where the tree has a `Nested` node or a
//! subquery. Reparsing the output yields the same tree.

use std::fmt::{self, Display, Formatter, Write as _};

use crate::ast::*;
use crate::parser::RESERVED;

fn is_bare(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && !RESERVED.contains(&word)
}

impl Display for Ident {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if is_bare(&self.value) {
            f.write_str(&self.value)
        } else {
            write!(f, "\"{}\"", self.value)
        }
    }
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn comma<T: Display>(f: &mut Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

impl Display for Script {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for (i, s) in self.statements.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl Display for Statement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Query(q) => write!(f, "{q}"),
            Statement::Unsupported { keyword, .. } => f.write_str(keyword),
        }
    }
}

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.body)?;
        if !self.order_by.is_empty() {
            f.write_str(" ORDER BY ")?;
            comma(f, &self.order_by)?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

impl Display for OrderItem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.expr, if self.desc { " DESC" } else { "" })
    }
}

impl Display for SetExpr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            SetExpr::Select(s) => write!(f, "{s}"),
            SetExpr::Query(q) => write!(f, "({q})"),
            SetExpr::Union { all, left, right } => {
                let op = if *all { "UNION ALL" } else { "UNION" };
                // The grammar is left-associative, so a union on the right needs parentheses.
                match right.as_ref() {
                    SetExpr::Union { .. } => write!(f, "{left} {op} ({right})"),
                    _ => write!(f, "{left} {op} {right}"),
                }
            }
        }
    }
}

impl Display for Select {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        comma(f, &self.items)?;
        if !self.from.is_empty() {
            f.write_str(" FROM ")?;
            comma(f, &self.from)?;
        }
        if let Some(w) = &self.selection {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            f.write_str(" GROUP BY ")?;
            comma(f, &self.group_by)?;
        }
        Ok(())
    }
}

impl Display for SelectItem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Wildcard(_) => f.write_str("*"),
            SelectItem::QualifiedWildcard(q) => write!(f, "{q}.*"),
            SelectItem::Expr { expr, alias: Some(a) } => write!(f, "{expr} AS {a}"),
            SelectItem::Expr { expr, alias: None } => write!(f, "{expr}"),
        }
    }
}

impl Display for TableRef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.factor)?;
        for j in &self.joins {
            let kw = match j.kind {
                JoinKind::Inner => "JOIN",
                JoinKind::Left => "LEFT JOIN",
                JoinKind::Cross => "CROSS JOIN",
            };
            write!(f, " {kw} {}", j.factor)?;
            if let Some(on) = &j.on {
                write!(f, " ON {on}")?;
            }
        }
        Ok(())
    }
}

impl Display for TableFactor {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            TableFactor::Table { name, alias: Some(a) } => write!(f, "{name} AS {a}"),
            TableFactor::Table { name, alias: None } => write!(f, "{name}"),
            TableFactor::Derived { subquery, alias } => write!(f, "({subquery}) AS {alias}"),
        }
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => f.write_str(n),
            Literal::String(s) => f.write_str(&quote(s)),
            Literal::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
            Literal::Null => f.write_str("NULL"),
            Literal::Typed { ty, value } => write!(f, "{} {}", ty.as_str(), quote(value)),
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let not = |negated: bool| if negated { "NOT " } else { "" };
        match self {
            Expr::Column { qualifier: Some(q), name } => write!(f, "{q}.{name}"),
            Expr::Column { qualifier: None, name } => write!(f, "{name}"),
            Expr::Literal(l) => write!(f, "{l}"),
            Expr::Param(p) => write!(f, "${}", p.value),
            Expr::Unary { op: UnaryOp::Not, expr } => write!(f, "NOT {expr}"),
            Expr::Unary { op, expr } => {
                let sym = if *op == UnaryOp::Minus { '-' } else { '+' };
                // `--` would start a comment.
                let gap = if matches!(expr.as_ref(), Expr::Unary { .. }) { " " } else { "" };
                write!(f, "{sym}{gap}{expr}")
            }
            Expr::Binary { op, left, right, .. } => write!(f, "{left} {} {right}", op.as_str()),
            Expr::Nested(e) => write!(f, "({e})"),
            Expr::Function { name, distinct, star, args } => {
                if is_bare(&name.value) {
                    f.write_str(&name.value.to_uppercase())?;
                } else {
                    write!(f, "{name}")?;
                }
                f.write_char('(')?;
                if *star {
                    f.write_char('*')?;
                } else {
                    if *distinct {
                        f.write_str("DISTINCT ")?;
                    }
                    comma(f, args)?;
                }
                f.write_char(')')
            }
            Expr::Extract { field, expr } => write!(f, "EXTRACT({} FROM {expr})", field.as_str()),
            Expr::Cast { expr, ty } => write!(f, "CAST({expr} AS {})", ty.as_str()),
            Expr::Exists { subquery, negated, .. } => write!(f, "{}EXISTS ({subquery})", not(*negated)),
            Expr::Subquery(q) => write!(f, "({q})"),
            Expr::InList { expr, list, negated } => {
                write!(f, "{expr} {}IN (", not(*negated))?;
                comma(f, list)?;
                f.write_char(')')
            }
            Expr::InSubquery { expr, subquery, negated } => write!(f, "{expr} {}IN ({subquery})", not(*negated)),
            Expr::Between { expr, low, high, negated } => {
                write!(f, "{expr} {}BETWEEN {low} AND {high}", not(*negated))
            }
            Expr::Like { expr, pattern, negated, case_insensitive } => {
                let kw = if *case_insensitive { "ILIKE" } else { "LIKE" };
                write!(f, "{expr} {}{kw} {pattern}", not(*negated))
            }
            Expr::IsNull { expr, negated } => write!(f, "{expr} IS {}NULL", not(*negated)),
            Expr::Case { operand, branches, else_result } => {
                f.write_str("CASE")?;
                if let Some(o) = operand {
                    write!(f, " {o}")?;
                }
                for (w, t) in branches {
                    write!(f, " WHEN {w} THEN {t}")?;
                }
                if let Some(e) = else_result {
                    write!(f, " ELSE {e}")?;
                }
                f.write_str(" END")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::parser::parse_sql;

    #[test]
    fn canonical_form() {
        let q = parse_sql("select count(*) from delivery d where extract(year from d.delivery_date) = 2024;").unwrap();
        assert_eq!(
            q.to_string(),
            "SELECT COUNT(*) FROM delivery AS d WHERE EXTRACT(YEAR FROM d.delivery_date) = 2024"
        );
    }

    #[test]
    fn reserved_and_mixed_case_identifiers_are_quoted() {
        let q = parse_sql(r#"SELECT "Order", "select" FROM t"#).unwrap();
        assert_eq!(q.to_string(), r#"SELECT "Order", "select" FROM t"#);
        assert_eq!(parse_sql(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn double_negation_does_not_become_a_comment() {
        let q = parse_sql("SELECT - -1").unwrap();
        assert_eq!(parse_sql(&q.to_string()).unwrap(), q);
    }
}
