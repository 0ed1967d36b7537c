//! Recursive-descent parser for the SELECT subset.

use crate::ast::*;
use crate::lexer::{error_at, tokenize, Spanned, SyntaxError, Token};

/// Words that cannot be used as bare identifiers or implicit aliases.
pub(crate) const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "by", "order", "union", "all", "distinct", "join", "inner", "left", "outer",
    "cross", "on", "as", "and", "or", "not", "exists", "in", "between", "like", "ilike", "is", "null", "true", "false",
    "case", "when", "then", "else", "end", "limit", "asc", "desc", "having", "offset", "intersect", "except", "right",
    "full", "using", "with",
];

const UNSUPPORTED_STATEMENTS: &[&str] = &[
    "insert", "update", "delete", "drop", "create", "alter", "truncate", "grant", "revoke", "merge", "copy", "call",
    "do", "set", "reset", "begin", "commit", "rollback", "vacuum", "analyze", "comment", "lock", "execute", "prepare",
    "explain", "refresh", "reindex", "cluster", "listen", "notify", "discard",
];

pub(crate) struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Spanned>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'a> Parser<'a> {
    pub(crate) fn new(text: &'a str) -> PResult<Self> {
        Ok(Parser { text, tokens: tokenize(text)?, pos: 0 })
    }

    pub(crate) fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn peek_at(&self, n: usize) -> &Token {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].token
    }

    pub(crate) fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.tokens[self.pos - 1].span.end
        }
    }

    pub(crate) fn advance(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error<T>(&self, message: impl Into<String>, expected: &[&str]) -> PResult<T> {
        let found = self.peek().describe();
        Err(error_at(
            self.text,
            self.span(),
            message.into(),
            expected.iter().map(|s| s.to_string()).collect(),
            found,
        ))
    }

    fn unexpected<T>(&self, expected: &[&str]) -> PResult<T> {
        let msg = format!("unexpected {}", self.peek().describe());
        self.error(msg, expected)
    }

    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Token::Word { value, quoted: false } if value == kw)
    }

    fn is_keyword_at(&self, n: usize, kw: &str) -> bool {
        matches!(self.peek_at(n), Token::Word { value, quoted: false } if value == kw)
    }

    pub(crate) fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.is_keyword(kw) {
            Ok(self.advance().span)
        } else {
            self.unexpected(&[&kw.to_uppercase()])
        }
    }

    pub(crate) fn is_symbol(&self, s: &str) -> bool {
        matches!(self.peek(), Token::Symbol(x) if *x == s)
    }

    pub(crate) fn eat_symbol(&mut self, s: &str) -> bool {
        if self.is_symbol(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_symbol(&mut self, s: &str) -> PResult<Span> {
        if self.is_symbol(s) {
            Ok(self.advance().span)
        } else {
            self.unexpected(&[s])
        }
    }

    /// Identifier that may be a reserved word only when quoted.
    pub(crate) fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Token::Word { value, quoted } if quoted || !RESERVED.contains(&value.as_str()) => {
                let span = self.advance().span;
                Ok(Ident { value, span })
            }
            _ => self.unexpected(&["identifier"]),
        }
    }

    fn at_ident(&self) -> bool {
        matches!(self.peek(), Token::Word { value, quoted } if *quoted || !RESERVED.contains(&value.as_str()))
    }

    pub(crate) fn number(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Token::Number(n) => {
                self.advance();
                Ok(n)
            }
            _ => self.unexpected(&["number"]),
        }
    }

    pub(crate) fn string(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Token::String(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.unexpected(&["string literal"]),
        }
    }

    // ---- statements -------------------------------------------------------

    fn script(&mut self) -> PResult<Script> {
        let mut statements = Vec::new();
        loop {
            while self.eat_symbol(";") {}
            if *self.peek() == Token::Eof {
                break;
            }
            statements.push(self.statement()?);
            if !self.is_symbol(";") && *self.peek() != Token::Eof {
                return self.unexpected(&[";", "end of input"]);
            }
        }
        Ok(Script { statements })
    }

    fn statement(&mut self) -> PResult<Statement> {
        if self.is_keyword("select") || self.is_symbol("(") {
            return Ok(Statement::Query(self.query()?));
        }
        if self.is_keyword("with") {
            return self.error("WITH clauses are not supported", &["SELECT"]);
        }
        if let Token::Word { value, quoted: false } = self.peek().clone() {
            if UNSUPPORTED_STATEMENTS.contains(&value.as_str()) {
                let start = self.span();
                let mut end = start;
                while !self.is_symbol(";") && *self.peek() != Token::Eof {
                    end = self.advance().span;
                }
                return Ok(Statement::Unsupported { keyword: value.to_uppercase(), span: start.to(end) });
            }
        }
        self.unexpected(&["SELECT"])
    }

    pub(crate) fn query(&mut self) -> PResult<Query> {
        let body = self.set_expr()?;
        let mut order_by = Vec::new();
        if self.eat_keyword("order") {
            self.expect_keyword("by")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_keyword("desc") {
                    true
                } else {
                    self.eat_keyword("asc");
                    false
                };
                order_by.push(OrderItem { expr, desc });
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_keyword("limit") {
            let n = self.number()?;
            match n.parse::<u64>() {
                Ok(v) => Some(v),
                Err(_) => return self.error(format!("LIMIT expects a non-negative integer, got {n}"), &["integer"]),
            }
        } else {
            None
        };
        if self.is_keyword("having") {
            return self.error("HAVING is not supported", &[]);
        }
        Ok(Query { body, order_by, limit })
    }

    fn set_expr(&mut self) -> PResult<SetExpr> {
        let mut left = self.set_operand()?;
        loop {
            if self.eat_keyword("union") {
                let all = self.eat_keyword("all");
                if !all {
                    self.eat_keyword("distinct");
                }
                let right = self.set_operand()?;
                left = SetExpr::Union { all, left: Box::new(left), right: Box::new(right) };
            } else if self.is_keyword("intersect") || self.is_keyword("except") {
                return self.error("only UNION and UNION ALL are supported", &["UNION"]);
            } else {
                return Ok(left);
            }
        }
    }

    fn set_operand(&mut self) -> PResult<SetExpr> {
        if self.eat_symbol("(") {
            let q = self.query()?;
            self.expect_symbol(")")?;
            return Ok(SetExpr::Query(Box::new(q)));
        }
        Ok(SetExpr::Select(Box::new(self.select()?)))
    }

    fn select(&mut self) -> PResult<Select> {
        let start = self.expect_keyword("select")?;
        let distinct = if self.eat_keyword("distinct") {
            true
        } else {
            self.eat_keyword("all");
            false
        };
        let mut items = Vec::new();
        loop {
            items.push(self.select_item()?);
            if !self.eat_symbol(",") {
                break;
            }
        }
        let mut from = Vec::new();
        if self.eat_keyword("from") {
            loop {
                from.push(self.table_ref()?);
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        let selection = if self.eat_keyword("where") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_keyword("group") {
            self.expect_keyword("by")?;
            loop {
                group_by.push(self.expr()?);
                if !self.eat_symbol(",") {
                    break;
                }
            }
        }
        if self.is_keyword("having") {
            return self.error("HAVING is not supported", &[]);
        }
        let span = Span::new(start.start, self.prev_end());
        Ok(Select { distinct, items, from, selection, group_by, span })
    }

    fn select_item(&mut self) -> PResult<SelectItem> {
        if self.is_symbol("*") {
            return Ok(SelectItem::Wildcard(self.advance().span));
        }
        if self.at_ident()
            && matches!(self.peek_at(1), Token::Symbol("."))
            && matches!(self.peek_at(2), Token::Symbol("*"))
        {
            let q = self.ident()?;
            self.advance();
            self.advance();
            return Ok(SelectItem::QualifiedWildcard(q));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn alias(&mut self) -> PResult<Option<Ident>> {
        if self.eat_keyword("as") {
            return Ok(Some(self.ident()?));
        }
        if self.at_ident() {
            return Ok(Some(self.ident()?));
        }
        Ok(None)
    }

    fn table_ref(&mut self) -> PResult<TableRef> {
        let factor = self.table_factor()?;
        let mut joins = Vec::new();
        loop {
            let kind = if self.is_keyword("join") {
                self.advance();
                JoinKind::Inner
            } else if self.is_keyword("inner") && self.is_keyword_at(1, "join") {
                self.advance();
                self.advance();
                JoinKind::Inner
            } else if self.is_keyword("left") {
                self.advance();
                self.eat_keyword("outer");
                self.expect_keyword("join")?;
                JoinKind::Left
            } else if self.is_keyword("cross") {
                self.advance();
                self.expect_keyword("join")?;
                JoinKind::Cross
            } else if self.is_keyword("right") || self.is_keyword("full") {
                return self.error("only INNER, LEFT and CROSS joins are supported", &["JOIN", "LEFT JOIN"]);
            } else {
                break;
            };
            let factor = self.table_factor()?;
            let on = if kind == JoinKind::Cross {
                None
            } else {
                self.expect_keyword("on")?;
                Some(self.expr()?)
            };
            joins.push(Join { kind, factor, on });
        }
        Ok(TableRef { factor, joins })
    }

    fn table_factor(&mut self) -> PResult<TableFactor> {
        if self.eat_symbol("(") {
            let subquery = Box::new(self.query()?);
            self.expect_symbol(")")?;
            let alias = match self.alias()? {
                Some(a) => a,
                None => return self.error("a subquery in FROM needs an alias", &["AS"]),
            };
            return Ok(TableFactor::Derived { subquery, alias });
        }
        let name = self.ident()?;
        let alias = self.alias()?;
        Ok(TableFactor::Table { name, alias })
    }

    // ---- expressions ------------------------------------------------------

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn binary(&self, op: BinaryOp, left: Expr, right: Expr, start: usize) -> Expr {
        Expr::Binary { op, left: Box::new(left), right: Box::new(right), span: Span::new(start, self.prev_end()) }
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let start = self.span().start;
        let mut left = self.and_expr()?;
        while self.eat_keyword("or") {
            let right = self.and_expr()?;
            left = self.binary(BinaryOp::Or, left, right, start);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let start = self.span().start;
        let mut left = self.not_expr()?;
        while self.eat_keyword("and") {
            let right = self.not_expr()?;
            left = self.binary(BinaryOp::And, left, right, start);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.is_keyword("not") && !self.is_keyword_at(1, "exists") {
            self.advance();
            let expr = self.not_expr()?;
            return Ok(Expr::Unary { op: UnaryOp::Not, expr: Box::new(expr) });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let start = self.span().start;
        let left = self.additive()?;
        let op = match self.peek() {
            Token::Symbol("=") => Some(BinaryOp::Eq),
            Token::Symbol("<>") | Token::Symbol("!=") => Some(BinaryOp::NotEq),
            Token::Symbol("<") => Some(BinaryOp::Lt),
            Token::Symbol("<=") => Some(BinaryOp::LtEq),
            Token::Symbol(">") => Some(BinaryOp::Gt),
            Token::Symbol(">=") => Some(BinaryOp::GtEq),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let right = self.additive()?;
            return Ok(self.binary(op, left, right, start));
        }
        if self.eat_keyword("is") {
            let negated = self.eat_keyword("not");
            self.expect_keyword("null")?;
            return Ok(Expr::IsNull { expr: Box::new(left), negated });
        }
        let negated = if self.is_keyword("not")
            && ["like", "ilike", "between", "in"].iter().any(|k| self.is_keyword_at(1, k))
        {
            self.advance();
            true
        } else {
            false
        };
        if self.is_keyword("like") || self.is_keyword("ilike") {
            let case_insensitive = self.is_keyword("ilike");
            self.advance();
            let pattern = self.additive()?;
            return Ok(Expr::Like { expr: Box::new(left), pattern: Box::new(pattern), negated, case_insensitive });
        }
        if self.eat_keyword("between") {
            let low = self.additive()?;
            self.expect_keyword("and")?;
            let high = self.additive()?;
            return Ok(Expr::Between { expr: Box::new(left), low: Box::new(low), high: Box::new(high), negated });
        }
        if self.eat_keyword("in") {
            self.expect_symbol("(")?;
            if self.is_keyword("select") {
                let subquery = Box::new(self.query()?);
                self.expect_symbol(")")?;
                return Ok(Expr::InSubquery { expr: Box::new(left), subquery, negated });
            }
            let mut list = Vec::new();
            loop {
                list.push(self.expr()?);
                if !self.eat_symbol(",") {
                    break;
                }
            }
            self.expect_symbol(")")?;
            return Ok(Expr::InList { expr: Box::new(left), list, negated });
        }
        if negated {
            return self.unexpected(&["LIKE", "ILIKE", "BETWEEN", "IN"]);
        }
        Ok(left)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let start = self.span().start;
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Token::Symbol("+") => BinaryOp::Plus,
                Token::Symbol("-") => BinaryOp::Minus,
                Token::Symbol("||") => BinaryOp::Concat,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.multiplicative()?;
            left = self.binary(op, left, right, start);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let start = self.span().start;
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Symbol("*") => BinaryOp::Multiply,
                Token::Symbol("/") => BinaryOp::Divide,
                Token::Symbol("%") => BinaryOp::Modulo,
                _ => return Ok(left),
            };
            self.advance();
            let right = self.unary()?;
            left = self.binary(op, left, right, start);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_symbol("-") {
            let expr = self.unary()?;
            return Ok(Expr::Unary { op: UnaryOp::Minus, expr: Box::new(expr) });
        }
        if self.eat_symbol("+") {
            let expr = self.unary()?;
            return Ok(Expr::Unary { op: UnaryOp::Plus, expr: Box::new(expr) });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut expr = self.primary()?;
        while self.eat_symbol("::") {
            let ty = self.cast_type()?;
            expr = Expr::Cast { expr: Box::new(expr), ty };
        }
        Ok(expr)
    }

    fn cast_type(&mut self) -> PResult<CastType> {
        let Token::Word { value, quoted: false } = self.peek().clone() else {
            return self.unexpected(&["type name"]);
        };
        let ty = match value.as_str() {
            "date" => CastType::Date,
            "timestamp" => CastType::Timestamp,
            "interval" => CastType::Interval,
            "integer" | "int" | "bigint" => CastType::Integer,
            "numeric" | "decimal" | "float" | "double" | "real" => CastType::Numeric,
            "text" | "varchar" => CastType::Text,
            _ => return self.unexpected(&["DATE", "TIMESTAMP", "INTERVAL", "INTEGER", "NUMERIC", "TEXT"]),
        };
        self.advance();
        if ty == CastType::Numeric && value == "double" {
            self.eat_keyword("precision");
        }
        Ok(ty)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let tok = self.peek().clone();
        match tok {
            Token::Number(n) => {
                self.advance();
                Ok(Expr::Literal(Literal::Number(n)))
            }
            Token::String(s) => {
                self.advance();
                Ok(Expr::Literal(Literal::String(s)))
            }
            Token::Param(p) => {
                let span = self.advance().span;
                Ok(Expr::Param(Ident { value: p, span }))
            }
            Token::Symbol("(") => {
                self.advance();
                if self.is_keyword("select") {
                    let q = self.query()?;
                    self.expect_symbol(")")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect_symbol(")")?;
                Ok(Expr::Nested(Box::new(e)))
            }
            Token::Word { value, quoted: false } => match value.as_str() {
                "null" => {
                    self.advance();
                    Ok(Expr::Literal(Literal::Null))
                }
                "true" | "false" => {
                    self.advance();
                    Ok(Expr::Literal(Literal::Bool(value == "true")))
                }
                "exists" | "not" => {
                    let start = self.span().start;
                    let negated = self.eat_keyword("not");
                    self.expect_keyword("exists")?;
                    self.expect_symbol("(")?;
                    let q = self.query()?;
                    self.expect_symbol(")")?;
                    Ok(Expr::Exists { subquery: Box::new(q), negated, span: Span::new(start, self.prev_end()) })
                }
                "case" => self.case_expr(),
                "extract" if matches!(self.peek_at(1), Token::Symbol("(")) => {
                    self.advance();
                    self.advance();
                    let field = self.date_field()?;
                    self.expect_keyword("from")?;
                    let expr = self.expr()?;
                    self.expect_symbol(")")?;
                    Ok(Expr::Extract { field, expr: Box::new(expr) })
                }
                "cast" if matches!(self.peek_at(1), Token::Symbol("(")) => {
                    self.advance();
                    self.advance();
                    let expr = self.expr()?;
                    self.expect_keyword("as")?;
                    let ty = self.cast_type()?;
                    self.expect_symbol(")")?;
                    Ok(Expr::Cast { expr: Box::new(expr), ty })
                }
                "date" | "timestamp" | "interval" if matches!(self.peek_at(1), Token::String(_)) => {
                    let ty = self.cast_type()?;
                    let value = self.string()?;
                    Ok(Expr::Literal(Literal::Typed { ty, value }))
                }
                _ => self.name_expr(),
            },
            Token::Word { .. } => self.name_expr(),
            _ => self.unexpected(&["expression"]),
        }
    }

    fn date_field(&mut self) -> PResult<DateField> {
        let Token::Word { value, .. } = self.peek().clone() else {
            return self.unexpected(&["YEAR", "MONTH", "DAY", "HOUR", "MINUTE", "SECOND", "EPOCH"]);
        };
        match DateField::ALL.into_iter().find(|f| f.as_str().eq_ignore_ascii_case(&value)) {
            Some(f) => {
                self.advance();
                Ok(f)
            }
            None => self.unexpected(&["YEAR", "MONTH", "DAY", "HOUR", "MINUTE", "SECOND", "EPOCH"]),
        }
    }

    fn case_expr(&mut self) -> PResult<Expr> {
        self.expect_keyword("case")?;
        let operand = if self.is_keyword("when") { None } else { Some(Box::new(self.expr()?)) };
        let mut branches = Vec::new();
        while self.eat_keyword("when") {
            let w = self.expr()?;
            self.expect_keyword("then")?;
            let t = self.expr()?;
            branches.push((w, t));
        }
        if branches.is_empty() {
            return self.unexpected(&["WHEN"]);
        }
        let else_result = if self.eat_keyword("else") { Some(Box::new(self.expr()?)) } else { None };
        self.expect_keyword("end")?;
        Ok(Expr::Case { operand, branches, else_result })
    }

    fn name_expr(&mut self) -> PResult<Expr> {
        let first = self.ident()?;
        if self.is_symbol("(") {
            self.advance();
            let mut distinct = false;
            let mut star = false;
            let mut args = Vec::new();
            if self.eat_symbol("*") {
                star = true;
            } else if !self.is_symbol(")") {
                distinct = self.eat_keyword("distinct");
                loop {
                    args.push(self.expr()?);
                    if !self.eat_symbol(",") {
                        break;
                    }
                }
            }
            self.expect_symbol(")")?;
            let name = Ident { value: first.value, span: first.span.to(Span::new(first.span.start, self.prev_end())) };
            return Ok(Expr::Function { name, distinct, star, args });
        }
        if self.eat_symbol(".") {
            let name = self.ident()?;
            return Ok(Expr::Column { qualifier: Some(first), name });
        }
        Ok(Expr::Column { qualifier: None, name: first })
    }
}

/// Parses a script of `;`-separated statements. Unsupported statement kinds
/// are kept as [`Statement::Unsupported`] for the guardrail to reject.
pub fn parse_statements(text: &str) -> Result<Script, SyntaxError> {
    let mut p = Parser::new(text)?;
    p.script()
}

/// Parses exactly one SELECT query (a trailing `;` is allowed).
pub fn parse_sql(text: &str) -> Result<Query, SyntaxError> {
    let script = parse_statements(text)?;
    let fail = |message: String| {
        let (line, column) = crate::lexer::line_col(text, 0);
        SyntaxError { message, line, column, expected: vec!["SELECT".into()], found: String::new(), span: Span::new(0, 0) }
    };
    let mut statements = script.statements.into_iter();
    match (statements.next(), statements.next()) {
        (None, _) => Err(fail("empty query".into())),
        (Some(Statement::Unsupported { keyword, span }), _) => {
            let (line, column) = crate::lexer::line_col(text, span.start);
            Err(SyntaxError {
                message: format!("unsupported statement kind {keyword}; only SELECT queries are accepted"),
                line,
                column,
                expected: vec!["SELECT".into()],
                found: keyword,
                span,
            })
        }
        (Some(Statement::Query(q)), None) => Ok(q),
        (Some(_), Some(_)) => Err(fail("expected a single statement".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_select() {
        let q = parse_sql("SELECT 1").unwrap();
        let s = &q.body.selects()[0];
        assert!(s.from.is_empty());
        assert!(matches!(&s.items[0], SelectItem::Expr { expr: Expr::Literal(Literal::Number(n)), alias: None } if n == "1"));
    }

    #[test]
    fn drop_is_a_syntax_error_for_single_queries() {
        let e = parse_sql("DROP TABLE patient").unwrap_err();
        assert!(e.message.contains("DROP"), "{e}");
        assert_eq!(e.expected, ["SELECT"]);
    }

    #[test]
    fn scripts_keep_unsupported_statements() {
        let s = parse_statements("SELECT 1; DELETE FROM patient;").unwrap();
        assert_eq!(s.statements.len(), 2);
        assert!(matches!(&s.statements[1], Statement::Unsupported { keyword, .. } if keyword == "DELETE"));
    }

    #[test]
    fn syntax_errors_report_expected_tokens() {
        let e = parse_sql("SELECT a FROM").unwrap_err();
        assert_eq!(e.expected, ["identifier"]);
        assert_eq!((e.line, e.column), (1, 14));
        let e = parse_sql("SELECT (a FROM t").unwrap_err();
        assert_eq!(e.expected, [")"]);
    }

    #[test]
    fn precedence() {
        let q = parse_sql("SELECT a + b * c = d OR NOT e AND f").unwrap();
        let SelectItem::Expr { expr, .. } = &q.body.selects()[0].items[0] else { panic!() };
        let Expr::Binary { op: BinaryOp::Or, left, right, .. } = expr else { panic!("{expr:?}") };
        assert!(matches!(left.as_ref(), Expr::Binary { op: BinaryOp::Eq, .. }));
        assert!(matches!(right.as_ref(), Expr::Binary { op: BinaryOp::And, .. }));
    }

    #[test]
    fn spans_point_into_text() {
        let text = "SELECT x FROM t WHERE t.a = 1";
        let q = parse_sql(text).unwrap();
        let sel = q.body.selects()[0].selection.clone().unwrap();
        let span = sel.span().unwrap();
        assert_eq!(&text[span.start..span.end], "t.a = 1");
    }
}
