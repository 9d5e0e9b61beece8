use std::collections::HashSet;

use num_traits::ToPrimitive;

use crate::control::{ArcKind, ControlLayer, Location, Place, Transition};
use crate::datalogic::{Action, DataLogicLayer, FactTemplate};
use crate::persistence::{Constraint, DatabaseInstance, DatabaseSchema, Fact, PersistenceLayer, RelationSchema, Tuple};
use crate::query::{Guard, NamedQuery, Query};
use crate::semantics::{InputDomains, Marking};
use crate::types::{DataType, Name, Predicate, Term, TypeDomain, Value, Variable};

use super::diagnostics::{Diagnostic, SourceMap, Span};
use super::lexer::{tokenize, Tok, Token};
use super::{Config, Init, NetDocument};

type PResult<T> = Result<T, Diagnostic>;

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pub(crate) map: SourceMap,
}

const COMPARISONS: &[&str] = &["=", "!=", "<", ">", "<=", ">="];

const RESERVED: &[&str] = &["and", "or", "not", "exists", "forall", "true", "false", "succ"];

fn check_not_reserved(name: &str, span: Span, clause: &str) -> PResult<()> {
    if RESERVED.contains(&name) {
        return Err(Diagnostic::error(span, clause, format!("`{name}` is a reserved word")));
    }
    Ok(())
}

impl Parser {
    pub(crate) fn new(src: &str) -> PResult<Self> {
        let toks = tokenize(src)?;
        Ok(Parser { toks, pos: 0, map: SourceMap::default() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, clause: &str, expected: &str) -> Diagnostic {
        Diagnostic::error(self.span(), clause, format!("expected {expected}, found {}", self.peek().describe()))
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str, clause: &str) -> PResult<Span> {
        if self.at_sym(s) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(clause, &format!("`{s}`")))
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn expect_kw(&mut self, kw: &str, clause: &str) -> PResult<Span> {
        if self.at_kw(kw) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(clause, &format!("`{kw}`")))
        }
    }

    fn ident(&mut self, clause: &str, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.advance().span;
                Ok((s, span))
            }
            _ => Err(self.unexpected(clause, what)),
        }
    }

    fn data_type(&mut self, clause: &str) -> PResult<DataType> {
        let (name, span) = self.ident(clause, "a type name")?;
        DataType::from_name(&name).ok_or_else(|| {
            Diagnostic::error(span, clause, format!("unknown type `{name}` (expected string, int, real or bool)"))
        })
    }

    fn typed_var(&mut self, clause: &str, fresh: bool) -> PResult<(Variable, Span)> {
        let (name, span) = self.ident(clause, "a variable name")?;
        check_not_reserved(&name, span, clause)?;
        self.expect_sym(":", clause)?;
        let ty = self.data_type(clause)?;
        let v = if fresh { Variable::fresh(&name, ty) } else { Variable::new(&name, ty) };
        Ok((v, span))
    }

    /// `x:T, y:T` with no repeated names.
    fn typed_vars(&mut self, clause: &str, fresh: bool, close: &str) -> PResult<Vec<Variable>> {
        let mut out: Vec<Variable> = Vec::new();
        if self.at_sym(close) {
            return Ok(out);
        }
        loop {
            let (v, span) = self.typed_var(clause, fresh)?;
            if out.iter().any(|o| o.name == v.name) {
                return Err(Diagnostic::error(span, clause, format!("variable `{}` declared twice", v.name)));
            }
            out.push(v);
            if !self.eat_sym(",") {
                return Ok(out);
            }
        }
    }

    fn literal(&mut self, clause: &str) -> PResult<(Value, Span)> {
        let value = match self.peek().clone() {
            Tok::Str(s) => Value::Str(s.as_str().into()),
            Tok::Int(i) => Value::Int(i),
            Tok::Real(d) => Value::Real(d),
            Tok::Ident(s) if s == "true" => Value::Bool(true),
            Tok::Ident(s) if s == "false" => Value::Bool(false),
            _ => return Err(self.unexpected(clause, "a literal")),
        };
        Ok((value, self.advance().span))
    }

    fn term(&mut self, scope: &[Variable], clause: &str) -> PResult<(Term, Span)> {
        match self.peek().clone() {
            Tok::Ident(name) if name != "true" && name != "false" => {
                let span = self.advance().span;
                match scope.iter().rev().find(|v| *v.name == *name) {
                    Some(v) => Ok((Term::Var(v.clone()), span)),
                    None => Err(Diagnostic::error(span, clause, format!("undeclared variable `{name}`"))),
                }
            }
            Tok::Ident(_) | Tok::Str(_) | Tok::Int(_) | Tok::Real(_) => {
                let (v, span) = self.literal(clause)?;
                Ok((Term::Val(v), span))
            }
            _ => Err(self.unexpected(clause, "a variable or literal")),
        }
    }

    fn terms(&mut self, scope: &[Variable], clause: &str, close: &str) -> PResult<Vec<Term>> {
        let mut out = Vec::new();
        if self.at_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(self.term(scope, clause)?.0);
            if !self.eat_sym(",") {
                return Ok(out);
            }
        }
    }

    // ---- formulas

    fn formula(&mut self, scope: &mut Vec<Variable>) -> PResult<Query> {
        let left = self.disjunction(scope)?;
        if self.eat_sym("->") {
            let right = self.formula(scope)?;
            return Ok(Query::implies(left, right));
        }
        Ok(left)
    }

    fn disjunction(&mut self, scope: &mut Vec<Variable>) -> PResult<Query> {
        let mut left = self.conjunction(scope)?;
        while self.at_kw("or") {
            self.advance();
            let right = self.conjunction(scope)?;
            left = Query::or(left, right);
        }
        Ok(left)
    }

    fn conjunction(&mut self, scope: &mut Vec<Variable>) -> PResult<Query> {
        let mut left = self.unary(scope)?;
        while self.at_kw("and") {
            self.advance();
            let right = self.unary(scope)?;
            left = Query::and(left, right);
        }
        Ok(left)
    }

    fn unary(&mut self, scope: &mut Vec<Variable>) -> PResult<Query> {
        if self.at_kw("not") {
            self.advance();
            return Ok(Query::not(self.unary(scope)?));
        }
        if self.at_kw("exists") || self.at_kw("forall") {
            let universal = self.at_kw("forall");
            self.advance();
            let vars = self.typed_vars("quantifier", false, ".")?;
            if vars.is_empty() {
                return Err(self.unexpected("quantifier", "a variable binder"));
            }
            self.expect_sym(".", "quantifier")?;
            let depth = scope.len();
            scope.extend(vars.iter().cloned());
            let body = self.formula(scope);
            scope.truncate(depth);
            let body = body?;
            return Ok(if universal { Query::forall(vars, body) } else { Query::exists(vars, body) });
        }
        self.primary(scope)
    }

    fn primary(&mut self, scope: &mut Vec<Variable>) -> PResult<Query> {
        if self.eat_sym("(") {
            let q = self.formula(scope)?;
            self.expect_sym(")", "formula")?;
            return Ok(q);
        }
        let next_is_cmp = matches!(self.peek_at(1), Tok::Sym(s) if COMPARISONS.contains(s));
        if let Tok::Ident(name) = self.peek().clone() {
            if !next_is_cmp && name == "true" {
                self.advance();
                return Ok(Query::True);
            }
            if !next_is_cmp && name == "false" {
                self.advance();
                return Ok(Query::not(Query::True));
            }
            if matches!(self.peek_at(1), Tok::Sym("(")) {
                let span = self.advance().span;
                self.advance();
                let args = self.terms(scope, "atom", ")")?;
                self.expect_sym(")", "atom")?;
                if name == "succ" {
                    if args.len() != 2 || args.iter().any(|a| a.data_type() != DataType::Int) {
                        return Err(Diagnostic::error(span.to(self.prev_span()), "atom", "succ takes two int arguments"));
                    }
                    return Ok(Query::pred(Predicate::Succ, args));
                }
                return Ok(Query::rel(&name, args));
            }
        }
        self.comparison(scope)
    }

    fn comparison(&mut self, scope: &[Variable]) -> PResult<Query> {
        let (left, lspan) = self.term(scope, "comparison")?;
        let op = match self.peek() {
            Tok::Sym(s) if COMPARISONS.contains(s) => *s,
            _ => return Err(self.unexpected("comparison", "a comparison operator")),
        };
        let op_span = self.advance().span;
        let (right, rspan) = self.term(scope, "comparison")?;
        let (lt, rt) = (left.data_type(), right.data_type());
        if lt != rt {
            return Err(Diagnostic::error(
                lspan.to(rspan),
                "comparison",
                format!("cannot compare {lt} with {rt}; the operands of a built-in predicate share one type"),
            ));
        }
        if op == "=" || op == "!=" {
            let eq = Query::pred(lt.equality(), [left, right]);
            return Ok(if op == "=" { eq } else { Query::not(eq) });
        }
        let Some(less) = lt.less_than() else {
            return Err(Diagnostic::error(op_span, "comparison", format!("type {lt} has no order")));
        };
        Ok(match op {
            "<" => Query::pred(less, [left, right]),
            ">" => Query::pred(less, [right, left]),
            "<=" => Query::not(Query::pred(less, [right, left])),
            _ => Query::not(Query::pred(less, [left, right])),
        })
    }

    // ---- sections

    pub(crate) fn document(&mut self) -> PResult<NetDocument> {
        let mut seen = HashSet::new();
        let mut types = None;
        let mut schema = None;
        let mut constraints = Vec::new();
        let mut logic = DataLogicLayer::new();
        let mut control = ControlLayer::new();
        let mut init = Init::default();
        let mut domains = InputDomains::new();
        let mut config = Config::default();

        while *self.peek() != Tok::Eof {
            let (name, span) = self.ident("document", "a section name")?;
            if !seen.insert(name.clone()) {
                return Err(Diagnostic::error(span, "document", format!("section `{name}` appears twice")));
            }
            self.expect_sym("{", "document")?;
            match name.as_str() {
                "types" => types = Some(self.types_section()?),
                "schema" => schema = Some(self.schema_section()?),
                "constraints" => constraints = self.constraints_section()?,
                "queries" => self.queries_section(&mut logic)?,
                "actions" => self.actions_section(&mut logic)?,
                "net" => {
                    self.map.record(Location::Net, span);
                    control = self.net_section()?;
                }
                "init" => {
                    self.map.record(Location::Init, span);
                    init = self.init_section()?;
                }
                "domains" => domains = self.domains_section()?,
                "config" => config = self.config_section()?,
                _ => {
                    return Err(Diagnostic::error(
                        span,
                        "document",
                        format!("unknown section `{name}` (expected types, schema, constraints, queries, actions, net, init, domains or config)"),
                    ))
                }
            }
            self.expect_sym("}", "document")?;
        }
        self.map.end = self.span();
        let Some(schema) = schema else {
            return Err(Diagnostic::error(self.span(), "document", "missing schema section"));
        };
        let mut persistence = PersistenceLayer::new(schema);
        persistence.constraints = constraints;
        let net = crate::control::DbNet { types: types.unwrap_or_default(), persistence, logic, control };
        Ok(NetDocument { net, init, domains, config })
    }

    fn types_section(&mut self) -> PResult<TypeDomain> {
        let mut out = Vec::new();
        while !self.at_sym("}") {
            let span = self.span();
            let ty = self.data_type("types")?;
            if out.contains(&ty) {
                return Err(Diagnostic::error(span, "types", format!("type {ty} listed twice")));
            }
            out.push(ty);
            self.expect_sym(";", "types")?;
        }
        Ok(TypeDomain::new(out))
    }

    fn schema_section(&mut self) -> PResult<DatabaseSchema> {
        let mut schema = DatabaseSchema::new();
        while !self.at_sym("}") {
            self.expect_kw("relation", "schema")?;
            let (name, span) = self.ident("schema", "a relation name")?;
            check_not_reserved(&name, span, "schema")?;
            self.expect_sym("(", "schema")?;
            let mut cols = Vec::new();
            if !self.at_sym(")") {
                loop {
                    cols.push(self.data_type("schema")?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(")", "schema")?;
            self.expect_sym(";", "schema")?;
            schema
                .add(RelationSchema::new(&name, cols))
                .map_err(|e| Diagnostic::error(span, "schema", e.to_string()))?;
            self.map.record(Location::Relation(name.as_str().into()), span);
        }
        Ok(schema)
    }

    fn constraints_section(&mut self) -> PResult<Vec<Constraint>> {
        let mut out: Vec<Constraint> = Vec::new();
        while !self.at_sym("}") {
            self.expect_kw("constraint", "constraints")?;
            let (name, span) = self.ident("constraints", "a constraint name")?;
            if out.iter().any(|c| *c.name == *name) {
                return Err(Diagnostic::error(span, "constraints", format!("constraint `{name}` declared twice")));
            }
            self.expect_sym(":=", "constraints")?;
            let query = self.formula(&mut Vec::new())?;
            self.expect_sym(";", "constraints")?;
            self.map.record(Location::Constraint(name.as_str().into()), span);
            out.push(Constraint { name: name.as_str().into(), query });
        }
        Ok(out)
    }

    fn queries_section(&mut self, logic: &mut DataLogicLayer) -> PResult<()> {
        while !self.at_sym("}") {
            self.expect_kw("query", "queries")?;
            let (name, span) = self.ident("queries", "a query name")?;
            if logic.query(&name).is_some() {
                return Err(Diagnostic::error(span, "queries", format!("query `{name}` declared twice")));
            }
            self.expect_sym("(", "queries")?;
            let params = self.typed_vars("queries", false, ")")?;
            self.expect_sym(")", "queries")?;
            self.expect_sym(":=", "queries")?;
            let mut scope = params.clone();
            let body = self.formula(&mut scope)?;
            self.expect_sym(";", "queries")?;
            self.map.record(Location::Query(name.as_str().into()), span);
            logic.queries.insert(name.as_str().into(), NamedQuery { name: name.as_str().into(), params, body });
        }
        Ok(())
    }

    fn templates(&mut self, scope: &[Variable]) -> PResult<Vec<FactTemplate>> {
        self.expect_sym("{", "actions")?;
        let mut out = Vec::new();
        while !self.at_sym("}") {
            let (rel, _) = self.ident("actions", "a relation name")?;
            self.expect_sym("(", "actions")?;
            let args = self.terms(scope, "actions", ")")?;
            self.expect_sym(")", "actions")?;
            out.push(FactTemplate::new(&rel, args));
            if !self.eat_sym(",") && !self.eat_sym(";") {
                break;
            }
        }
        self.expect_sym("}", "actions")?;
        Ok(out)
    }

    fn actions_section(&mut self, logic: &mut DataLogicLayer) -> PResult<()> {
        while !self.at_sym("}") {
            self.expect_kw("action", "actions")?;
            let (name, span) = self.ident("actions", "an action name")?;
            if logic.action(&name).is_some() {
                return Err(Diagnostic::error(span, "actions", format!("action `{name}` declared twice")));
            }
            self.expect_sym("(", "actions")?;
            let params = self.typed_vars("actions", false, ")")?;
            self.expect_sym(")", "actions")?;
            self.expect_sym("{", "actions")?;
            let mut action = Action::new(&name, params.clone());
            let (mut has_del, mut has_add) = (false, false);
            while !self.at_sym("}") {
                let (part, pspan) = self.ident("actions", "`del` or `add`")?;
                match part.as_str() {
                    "del" if !has_del => {
                        has_del = true;
                        action.dels = self.templates(&params)?;
                    }
                    "add" if !has_add => {
                        has_add = true;
                        action.adds = self.templates(&params)?;
                    }
                    "del" | "add" => {
                        return Err(Diagnostic::error(pspan, "actions", format!("`{part}` block appears twice")))
                    }
                    _ => return Err(Diagnostic::error(pspan, "actions", format!("expected `del` or `add`, found `{part}`"))),
                }
            }
            self.expect_sym("}", "actions")?;
            self.map.record(Location::Action(name.as_str().into()), span);
            logic.actions.insert(name.as_str().into(), action.into());
        }
        Ok(())
    }

    fn color(&mut self) -> PResult<Vec<DataType>> {
        self.expect_sym("(", "color")?;
        let mut out = Vec::new();
        if !self.at_sym(")") {
            loop {
                out.push(self.data_type("color")?);
                if !self.eat_sym("><") {
                    break;
                }
            }
        }
        self.expect_sym(")", "color")?;
        Ok(out)
    }

    fn net_section(&mut self) -> PResult<ControlLayer> {
        let mut control = ControlLayer::new();
        let mut names: HashSet<String> = HashSet::new();
        while !self.at_sym("}") {
            let (kw, kspan) = self.ident("net", "`place`, `view` or `transition`")?;
            let (name, span) = self.ident("net", "a name")?;
            if !names.insert(name.clone()) {
                return Err(Diagnostic::error(span, "net", format!("`{name}` declared twice")));
            }
            match kw.as_str() {
                "place" | "view" => {
                    self.expect_sym(":", "net")?;
                    let color = self.color()?;
                    let place = if kw == "view" {
                        self.expect_sym("<-", "net")?;
                        let (q, _) = self.ident("net", "a query name")?;
                        Place::view(&name, color, &q)
                    } else {
                        Place::control(&name, color)
                    };
                    self.expect_sym(";", "net")?;
                    self.map.record(Location::Place(name.as_str().into()), span);
                    control.places.insert(place.name.clone(), place);
                }
                "transition" => {
                    self.map.record(Location::Transition(name.as_str().into()), span);
                    let t = self.transition(&name)?;
                    control.transitions.insert(t.name.clone(), t);
                }
                _ => {
                    return Err(Diagnostic::error(kspan, "net", format!("expected `place`, `view` or `transition`, found `{kw}`")))
                }
            }
        }
        Ok(control)
    }

    fn inscription(&mut self, scope: &[Variable], clause: &str) -> PResult<Vec<(Vec<Term>, u64)>> {
        let mut out = Vec::new();
        loop {
            let mut n = 1u64;
            if let Tok::Int(i) = self.peek().clone() {
                let span = self.advance().span;
                n = i.to_u64().filter(|n| *n > 0).ok_or_else(|| {
                    Diagnostic::error(span, clause, "multiplicity must be a positive integer")
                })?;
                self.expect_sym("*", clause)?;
            }
            self.expect_sym("<", clause)?;
            let terms = self.terms(scope, clause, ">")?;
            self.expect_sym(">", clause)?;
            out.push((terms, n));
            if !self.eat_sym("+") {
                return Ok(out);
            }
        }
    }

    fn transition(&mut self, name: &str) -> PResult<Transition> {
        let mut t = Transition::new(name);
        let tname: Name = name.into();
        let mut scope: Vec<Variable> = Vec::new();
        let (mut has_guard, mut has_action) = (false, false);
        self.expect_sym("{", "transition")?;
        while !self.at_sym("}") {
            let (kw, kspan) = self.ident("transition", "a transition statement")?;
            match kw.as_str() {
                "vars" | "fresh" => {
                    let vars = self.typed_vars("transition", kw == "fresh", ";")?;
                    for v in vars {
                        if scope.iter().any(|o| o.name == v.name) {
                            return Err(Diagnostic::error(kspan, "transition", format!("variable `{}` declared twice", v.name)));
                        }
                        scope.push(v);
                    }
                }
                "in" | "out" | "rollback" => {
                    let kind = match kw.as_str() {
                        "in" => ArcKind::Input,
                        "out" => ArcKind::Output,
                        _ => ArcKind::Rollback,
                    };
                    let (place, pspan) = self.ident("transition", "a place name")?;
                    self.expect_sym(":", "transition")?;
                    let items = self.inscription(&scope, "inscription")?;
                    self.map.record(Location::Arc { transition: tname.clone(), place: place.as_str().into(), kind }, pspan);
                    for (terms, n) in items {
                        t = match kind {
                            ArcKind::Input => t.input(&place, terms, n),
                            ArcKind::Output => t.output(&place, terms, n),
                            ArcKind::Rollback => t.rollback(&place, terms, n),
                        };
                    }
                }
                "guard" => {
                    if has_guard {
                        return Err(Diagnostic::error(kspan, "transition", "guard given twice"));
                    }
                    has_guard = true;
                    let start = self.span();
                    let q = self.formula(&mut scope.clone())?;
                    let span = start.to(self.prev_span());
                    t.guard = Guard::new(q).map_err(|e| Diagnostic::error(span, "guard", e.to_string()))?;
                    self.map.record(Location::Guard(tname.clone()), span);
                }
                "action" => {
                    if has_action {
                        return Err(Diagnostic::error(kspan, "transition", "action given twice"));
                    }
                    has_action = true;
                    let (a, aspan) = self.ident("transition", "an action name")?;
                    self.expect_sym("(", "transition")?;
                    let args = self.terms(&scope, "transition", ")")?;
                    self.expect_sym(")", "transition")?;
                    self.map.record(Location::ActionBinding(tname.clone()), aspan);
                    t = t.invoking(&a, args);
                }
                _ => {
                    return Err(Diagnostic::error(
                        kspan,
                        "transition",
                        format!("expected `vars`, `fresh`, `in`, `out`, `rollback`, `guard` or `action`, found `{kw}`"),
                    ))
                }
            }
            self.expect_sym(";", "transition")?;
        }
        self.expect_sym("}", "transition")?;
        Ok(t)
    }

    fn literal_tuple(&mut self, clause: &str) -> PResult<Tuple> {
        self.expect_sym("<", clause)?;
        let mut out = Vec::new();
        if !self.at_sym(">") {
            loop {
                out.push(self.literal(clause)?.0);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(">", clause)?;
        Ok(out)
    }

    pub(crate) fn fact(&mut self) -> PResult<(Fact, Span)> {
        let (rel, span) = self.ident("fact", "a relation name")?;
        self.expect_sym("(", "fact")?;
        let mut tuple = Vec::new();
        if !self.at_sym(")") {
            loop {
                tuple.push(self.literal("fact")?.0);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")", "fact")?;
        Ok((Fact::new(&rel, tuple), span.to(self.prev_span())))
    }

    /// Facts, optionally separated by `;` or `,`, up to `}` or end of input.
    pub(crate) fn facts(&mut self) -> PResult<Vec<(Fact, Span)>> {
        let mut out = Vec::new();
        while !self.at_sym("}") && *self.peek() != Tok::Eof {
            out.push(self.fact()?);
            let _ = self.eat_sym(";") || self.eat_sym(",");
        }
        Ok(out)
    }

    pub(crate) fn expect_eof(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("document", "end of input"))
        }
    }

    fn init_section(&mut self) -> PResult<Init> {
        let mut init = Init::default();
        let (mut has_facts, mut has_marking) = (false, false);
        while !self.at_sym("}") {
            let (kw, kspan) = self.ident("init", "`facts` or `marking`")?;
            match kw.as_str() {
                "facts" if !has_facts => {
                    has_facts = true;
                    self.expect_sym("{", "init")?;
                    let mut instance = DatabaseInstance::new();
                    for (f, span) in self.facts()? {
                        self.map.facts.push((f.clone(), span));
                        instance.insert(f);
                    }
                    self.expect_sym("}", "init")?;
                    init.facts = instance;
                }
                "marking" if !has_marking => {
                    has_marking = true;
                    self.expect_sym("{", "init")?;
                    let mut marking = Marking::new();
                    while !self.at_sym("}") {
                        let (place, pspan) = self.ident("marking", "a place name")?;
                        self.expect_sym(":", "marking")?;
                        loop {
                            let mut n = 1u64;
                            if let Tok::Int(i) = self.peek().clone() {
                                let span = self.advance().span;
                                n = i.to_u64().filter(|n| *n > 0).ok_or_else(|| {
                                    Diagnostic::error(span, "marking", "multiplicity must be a positive integer")
                                })?;
                                self.expect_sym("*", "marking")?;
                            }
                            let tuple = self.literal_tuple("marking")?;
                            marking.add(&place, tuple, n);
                            if !self.eat_sym("+") {
                                break;
                            }
                        }
                        self.expect_sym(";", "marking")?;
                        self.map.marking.entry(place).or_insert(pspan);
                    }
                    self.expect_sym("}", "init")?;
                    init.marking = marking;
                }
                "facts" | "marking" => return Err(Diagnostic::error(kspan, "init", format!("`{kw}` block appears twice"))),
                _ => return Err(Diagnostic::error(kspan, "init", format!("expected `facts` or `marking`, found `{kw}`"))),
            }
        }
        Ok(init)
    }

    fn domains_section(&mut self) -> PResult<InputDomains> {
        let mut domains = InputDomains::new();
        while !self.at_sym("}") {
            let ty = self.data_type("domains")?;
            self.expect_sym(":", "domains")?;
            let mut values = Vec::new();
            loop {
                let (v, span) = self.literal("domains")?;
                if !v.has_type(ty) {
                    return Err(Diagnostic::error(span, "domains", format!("{v} is not a {ty} value")));
                }
                values.push(v);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(";", "domains")?;
            domains.insert(ty, values);
        }
        Ok(domains)
    }

    fn config_section(&mut self) -> PResult<Config> {
        let mut config = Config::default();
        while !self.at_sym("}") {
            let (key, kspan) = self.ident("config", "a setting name")?;
            self.expect_sym("=", "config")?;
            let value = match self.peek().clone() {
                Tok::Int(i) => {
                    let span = self.advance().span;
                    i.to_u64().ok_or_else(|| Diagnostic::error(span, "config", "expected a non-negative integer"))?
                }
                _ => return Err(self.unexpected("config", "a non-negative integer")),
            };
            self.expect_sym(";", "config")?;
            let slot = match key.as_str() {
                "seed" => &mut config.seed,
                "steps" => &mut config.steps,
                "max_states" => &mut config.max_states,
                "max_depth" => &mut config.max_depth,
                "workers" => &mut config.workers,
                _ => {
                    return Err(Diagnostic::error(
                        kspan,
                        "config",
                        format!("unknown setting `{key}` (expected seed, steps, max_states, max_depth or workers)"),
                    ))
                }
            };
            if slot.replace(value).is_some() {
                return Err(Diagnostic::error(kspan, "config", format!("setting `{key}` given twice")));
            }
        }
        Ok(config)
    }
}

/// Parses a standalone formula over the given variables.
pub(crate) fn parse_formula(src: &str, scope: &[Variable]) -> PResult<Query> {
    let mut p = Parser::new(src)?;
    let q = p.formula(&mut scope.to_vec())?;
    p.expect_eof()?;
    Ok(q)
}
