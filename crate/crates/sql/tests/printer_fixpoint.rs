//! Printing a parsed query and parsing the output gives the same tree, and
//! printing is idempotent.

use peripartum_sql::parse_sql;
use proptest::prelude::*;

fn column() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("a".to_string()),
        Just("t.b".to_string()),
        Just("\"Select\"".to_string()),
        Just("x1".to_string()),
    ]
}

fn literal() -> impl Strategy<Value = String> {
    prop_oneof![
        (0i64..1000).prop_map(|n| n.to_string()),
        (0u32..1000, 0u32..100).prop_map(|(a, b)| format!("{a}.{b}")),
        "[a-z' %_]{0,6}".prop_map(|s| format!("'{}'", s.replace('\'', "''"))),
        Just("NULL".to_string()),
        Just("TRUE".to_string()),
        Just("DATE '2024-01-02'".to_string()),
        Just("INTERVAL '2 hours'".to_string()),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![column(), literal()];
    leaf.prop_recursive(4, 32, 3, |inner| {
        let op = prop_oneof![
            Just("+"), Just("-"), Just("*"), Just("/"), Just("%"), Just("||"),
            Just("="), Just("<>"), Just("<"), Just(">="), Just("AND"), Just("OR"),
        ];
        prop_oneof![
            // Bare chains exercise precedence; parenthesised ones always parse.
            (inner.clone(), op.clone(), inner.clone()).prop_map(|(l, o, r)| format!("{l} {o} {r}")),
            (inner.clone(), op, inner.clone()).prop_map(|(l, o, r)| format!("({l}) {o} ({r})")),
            inner.clone().prop_map(|e| format!("({e})")),
            inner.clone().prop_map(|e| format!("NOT ({e})")),
            inner.clone().prop_map(|e| format!("-({e})")),
            inner.clone().prop_map(|e| format!("({e}) IS NOT NULL")),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(a, b, c)| format!("({a}) BETWEEN ({b}) AND ({c})")),
            (inner.clone(), prop::collection::vec(inner.clone(), 1..3))
                .prop_map(|(a, l)| format!("({a}) NOT IN ({})", l.join(", "))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) ILIKE ({b})")),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(a, b, c)| format!("CASE WHEN {a} THEN {b} ELSE {c} END")),
            inner.clone().prop_map(|e| format!("CAST({e} AS NUMERIC)")),
            inner.clone().prop_map(|e| format!("({e})::text")),
            inner.clone().prop_map(|e| format!("EXTRACT(YEAR FROM {e})")),
            prop::collection::vec(inner.clone(), 1..3).prop_map(|a| format!("coalesce({})", a.join(", "))),
            inner.clone().prop_map(|e| format!("EXISTS (SELECT 1 FROM t WHERE {e})")),
            inner.prop_map(|e| format!("(SELECT MAX(a) FROM t AS u WHERE {e})")),
        ]
    })
}

fn query() -> impl Strategy<Value = String> {
    (
        prop::collection::vec(expr(), 1..3),
        any::<bool>(),
        prop::option::of(expr()),
        prop::option::of(column()),
        any::<bool>(),
        prop::option::of(0u64..50),
    )
        .prop_map(|(items, left, filter, order, union, limit)| {
            let join = if left { "LEFT JOIN" } else { "JOIN" };
            let mut q = format!(
                "SELECT {} FROM t {join} u ON t.id = u.id, (SELECT a FROM v) AS w",
                items.iter().enumerate().map(|(i, e)| format!("{e} AS c{i}")).collect::<Vec<_>>().join(", ")
            );
            if let Some(f) = filter {
                q.push_str(&format!(" WHERE {f}"));
            }
            if union {
                q.push_str(" UNION ALL SELECT DISTINCT a FROM t GROUP BY a");
            }
            if let Some(o) = order {
                q.push_str(&format!(" ORDER BY {o} DESC"));
            }
            if let Some(n) = limit {
                q.push_str(&format!(" LIMIT {n}"));
            }
            q
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_fixpoint(text in query()) {
        // Bare operator chains can be ungrammatical (`a BETWEEN NOT b`).
        let parsed = parse_sql(&text);
        prop_assume!(parsed.is_ok());
        let first = parsed.unwrap();
        let printed = first.to_string();
        let second = parse_sql(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
        prop_assert_eq!(&first, &second, "{}", printed);
        prop_assert_eq!(second.to_string(), printed);
    }
}
