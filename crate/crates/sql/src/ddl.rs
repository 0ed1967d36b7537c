//! Reader for the DDL dialect the catalog emits, so emitted DDL can be
//! checked to describe exactly the catalog it came from.

use std::collections::BTreeMap;

use peripartum_core::catalog::{Catalog, Column, ColumnCheck, ForeignKey, KeyFamily, LogicalType, Relation};

use crate::lexer::{SyntaxError, Token};
use crate::parser::Parser;

#[derive(Debug, thiserror::Error)]
pub enum DdlError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Invalid(String),
}

/// Parses `CREATE TABLE` blocks and key-family `COMMENT ON COLUMN` lines
/// back into a [`Catalog`]. Unannotated key families are derived the same way
/// the emitter assumes.
pub fn parse_ddl(text: &str) -> Result<Catalog, DdlError> {
    let mut p = Parser::new(text)?;
    let mut relations = Vec::new();
    let mut families: BTreeMap<(String, String), KeyFamily> = BTreeMap::new();
    while *p.peek() != Token::Eof {
        if p.eat_symbol(";") {
            continue;
        }
        if p.eat_keyword("create") {
            relations.push(create_table(&mut p)?);
        } else if p.eat_keyword("comment") {
            let (rel, col, family) = comment(&mut p)?;
            families.insert((rel, col), family);
        } else {
            return p.error("expected CREATE TABLE or COMMENT ON COLUMN", &["CREATE", "COMMENT"]).map_err(Into::into);
        }
        p.expect_symbol(";")?;
    }

    for (rel, col) in families.keys() {
        if !relations.iter().any(|r: &Relation| r.name == *rel && r.column(col).is_some()) {
            return Err(DdlError::Invalid(format!("comment on unknown column {rel}.{col}")));
        }
    }
    // Families flow along foreign keys, so fill them in target-first order.
    let mut catalog = Catalog { relations };
    let order: Vec<String> = catalog
        .dependency_order()
        .map_err(|e| DdlError::Invalid(e.to_string()))?
        .into_iter()
        .map(|r| r.name.clone())
        .collect();
    for name in order {
        let i = catalog.relations.iter().position(|r| r.name == name).expect("relation listed");
        for c in 0..catalog.relations[i].columns.len() {
            let relation = &catalog.relations[i];
            let column = &relation.columns[c];
            let family = match families.get(&(relation.name.clone(), column.name.clone())) {
                Some(f) => *f,
                None => catalog.derived_key_family(relation, column),
            };
            catalog.relations[i].columns[c].key_family = family;
        }
    }
    Ok(catalog)
}

fn name_list(p: &mut Parser<'_>) -> Result<Vec<String>, SyntaxError> {
    p.expect_symbol("(")?;
    let mut out = vec![p.ident()?.value];
    while p.eat_symbol(",") {
        out.push(p.ident()?.value);
    }
    p.expect_symbol(")")?;
    Ok(out)
}

fn create_table(p: &mut Parser<'_>) -> Result<Relation, DdlError> {
    p.expect_keyword("table")?;
    let name = p.ident()?.value;
    p.expect_symbol("(")?;
    let mut relation =
        Relation { name, columns: Vec::new(), primary_key: Vec::new(), foreign_keys: Vec::new(), unique: Vec::new() };
    loop {
        if p.eat_keyword("primary") {
            p.expect_keyword("key")?;
            relation.primary_key = name_list(p)?;
        } else if p.eat_keyword("unique") {
            relation.unique.push(name_list(p)?);
        } else if p.eat_keyword("foreign") {
            p.expect_keyword("key")?;
            let columns = name_list(p)?;
            p.expect_keyword("references")?;
            let references = p.ident()?.value;
            let referenced_columns = name_list(p)?;
            if columns.len() != referenced_columns.len() {
                return Err(DdlError::Invalid(format!(
                    "foreign key on {} lists {} columns but references {}",
                    relation.name,
                    columns.len(),
                    referenced_columns.len()
                )));
            }
            relation.foreign_keys.push(ForeignKey { columns, references, referenced_columns });
        } else {
            let column = column_def(p)?;
            relation.columns.push(column);
        }
        if !p.eat_symbol(",") {
            break;
        }
    }
    p.expect_symbol(")")?;
    Ok(relation)
}

fn column_def(p: &mut Parser<'_>) -> Result<Column, DdlError> {
    let name = p.ident()?.value;
    let ty = logical_type(p)?;
    let mut column =
        Column { name, ty, nullable: true, identity: false, key_family: KeyFamily::Plain, check: None };
    loop {
        if p.eat_keyword("generated") {
            for kw in ["by", "default", "as", "identity"] {
                p.expect_keyword(kw)?;
            }
            column.identity = true;
        } else if p.eat_keyword("not") {
            p.expect_keyword("null")?;
            column.nullable = false;
        } else if p.eat_keyword("check") {
            column.check = Some(check(p, &column.name)?);
        } else {
            return Ok(column);
        }
    }
}

fn logical_type(p: &mut Parser<'_>) -> Result<LogicalType, DdlError> {
    let Token::Word { value, quoted: false } = p.peek().clone() else {
        return p.error("expected a column type", &["type name"]).map_err(Into::into);
    };
    p.advance();
    let ty = match value.as_str() {
        "integer" => LogicalType::Integer,
        "numeric" => LogicalType::Numeric,
        "boolean" => LogicalType::Boolean,
        "text" => LogicalType::Text,
        "date" => LogicalType::Date,
        "jsonb" => LogicalType::Jsonb,
        "char" => {
            p.expect_symbol("(")?;
            let n = p.number()?;
            p.expect_symbol(")")?;
            LogicalType::Char(n.parse().map_err(|_| DdlError::Invalid(format!("bad CHAR length {n}")))?)
        }
        "timestamp" => {
            if p.eat_symbol("(") {
                let n = p.number()?;
                p.expect_symbol(")")?;
                if n != "3" {
                    return Err(DdlError::Invalid(format!("only TIMESTAMP(3) is supported, got TIMESTAMP({n})")));
                }
            }
            LogicalType::Timestamp
        }
        "varchar" => {
            if p.eat_symbol("[") {
                p.expect_symbol("]")?;
                LogicalType::VarcharArray
            } else {
                LogicalType::Varchar
            }
        }
        other => return Err(DdlError::Invalid(format!("unsupported column type {}", other.to_uppercase()))),
    };
    Ok(ty)
}

fn signed_number(p: &mut Parser<'_>) -> Result<f64, DdlError> {
    let neg = p.eat_symbol("-");
    let n = p.number()?;
    let v: f64 = n.parse().map_err(|_| DdlError::Invalid(format!("bad number {n}")))?;
    Ok(if neg { -v } else { v })
}

fn check(p: &mut Parser<'_>, column: &str) -> Result<ColumnCheck, DdlError> {
    p.expect_symbol("(")?;
    let target = p.ident()?.value;
    if target != column {
        return Err(DdlError::Invalid(format!("CHECK on column {column} refers to {target}")));
    }
    let check = if p.eat_keyword("in") {
        p.expect_symbol("(")?;
        let mut values = vec![p.string()?];
        while p.eat_symbol(",") {
            values.push(p.string()?);
        }
        p.expect_symbol(")")?;
        ColumnCheck::OneOf { values }
    } else if p.eat_keyword("between") {
        let lo = signed_number(p)?;
        p.expect_keyword("and")?;
        let hi = signed_number(p)?;
        ColumnCheck::Range { min: Some(lo), max: Some(hi) }
    } else if p.eat_symbol(">=") {
        ColumnCheck::Range { min: Some(signed_number(p)?), max: None }
    } else if p.eat_symbol("<=") {
        ColumnCheck::Range { min: None, max: Some(signed_number(p)?) }
    } else if p.eat_symbol("~") {
        ColumnCheck::Pattern { regex: p.string()? }
    } else {
        return p.error("unsupported CHECK form", &["IN", "BETWEEN", ">=", "<=", "~"]).map_err(Into::into);
    };
    p.expect_symbol(")")?;
    Ok(check)
}

fn comment(p: &mut Parser<'_>) -> Result<(String, String, KeyFamily), DdlError> {
    p.expect_keyword("on")?;
    p.expect_keyword("column")?;
    let rel = p.ident()?.value;
    p.expect_symbol(".")?;
    let col = p.ident()?.value;
    p.expect_keyword("is")?;
    let text = p.string()?;
    let family = text
        .strip_prefix("key_family=")
        .and_then(|f| KeyFamily::ALL.into_iter().find(|k| k.as_str() == f))
        .ok_or_else(|| DdlError::Invalid(format!("unrecognised column comment '{text}'")))?;
    Ok((rel, col, family))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_a_small_table() {
        let ddl = "CREATE TABLE t (\n    id INTEGER GENERATED BY DEFAULT AS IDENTITY NOT NULL,\n    \
                   x NUMERIC CHECK (x BETWEEN -1 AND 2.5),\n    tags VARCHAR[] NOT NULL,\n    PRIMARY KEY (id)\n);\n";
        let c = parse_ddl(ddl).unwrap();
        let t = c.relation("t").unwrap();
        assert_eq!(t.columns[0].key_family, KeyFamily::SyntheticId);
        assert!(t.columns[1].nullable);
        assert_eq!(t.columns[1].check, Some(ColumnCheck::Range { min: Some(-1.0), max: Some(2.5) }));
        assert_eq!(t.columns[2].ty, LogicalType::VarcharArray);
    }

    #[test]
    fn unknown_comment_target_is_rejected() {
        let ddl = "CREATE TABLE t (a TEXT, PRIMARY KEY (a)); COMMENT ON COLUMN t.b IS 'key_family=tax_code';";
        assert!(matches!(parse_ddl(ddl), Err(DdlError::Invalid(_))));
    }
}
