//! Reading and writing models in LP file format.
//!
//! The writer emits the common `Minimize / Subject To / Bounds / Binaries /
//! End` dialect accepted by mainstream solvers. Output is byte-deterministic:
//! variables and constraints appear in model order and floats use Rust's
//! shortest round-trip formatting. Names are sanitized to `[A-Za-z0-9_]`
//! with collision suffixes; the emitted name list maps solver output back to
//! model variables.
//!
//! The parser accepts the writer's dialect (plus minor whitespace freedom)
//! so the bundled adapter binary and round-trip tests can consume the files.

use super::{MilpModel, MilpError, ObjSense, Sense, VarKind};

/// An emitted LP file plus the sanitized variable names, index-aligned with
/// the model's variables.
#[derive(Debug, Clone)]
pub struct EmittedLp {
    pub text: String,
    pub var_names: Vec<String>,
}

fn sanitize(name: &str, index: usize, taken: &mut std::collections::HashSet<String>) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if out.is_empty() || out.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        out.insert(0, 'x');
    }
    if !taken.insert(out.clone()) {
        out = format!("{out}_{index}");
        assert!(taken.insert(out.clone()), "sanitized name still collides");
    }
    out
}

fn fmt_coef(first: bool, coef: f64, name: &str, line: &mut String) {
    if coef >= 0.0 {
        if !first {
            line.push_str(" + ");
        }
    } else {
        line.push_str(if first { "- " } else { " - " });
    }
    let mag = coef.abs();
    if mag == 1.0 {
        line.push_str(name);
    } else {
        line.push_str(&format!("{mag} {name}"));
    }
}

fn fmt_bound(v: f64) -> String {
    format!("{v}")
}

/// Write the model's active rows as LP text.
pub fn emit_lp(model: &MilpModel) -> EmittedLp {
    let mut taken = std::collections::HashSet::new();
    let var_names: Vec<String> = model
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| sanitize(&v.name, i, &mut taken))
        .collect();

    let mut text = String::new();
    text.push_str(&format!("\\ {}\n", model.name));
    text.push_str(match model.sense {
        ObjSense::Minimize => "Minimize\n",
        ObjSense::Maximize => "Maximize\n",
    });
    let mut line = String::from(" obj:");
    let mut first = true;
    for (j, v) in model.vars.iter().enumerate() {
        if v.obj != 0.0 {
            line.push(' ');
            fmt_coef(first, v.obj, &var_names[j], &mut line);
            first = false;
        }
    }
    if model.obj_constant != 0.0 {
        let c = model.obj_constant;
        if c >= 0.0 {
            line.push_str(if first { " " } else { " + " });
        } else {
            line.push_str(if first { " - " } else { " - " });
        }
        line.push_str(&format!("{}", c.abs()));
        first = false;
    }
    if first {
        line.push_str(" 0 ");
        line.push_str(var_names.first().map(String::as_str).unwrap_or("x0"));
    }
    text.push_str(&line);
    text.push('\n');

    text.push_str("Subject To\n");
    let mut taken_cons = std::collections::HashSet::new();
    for (i, con) in model.cons.iter().enumerate() {
        if !con.active {
            continue;
        }
        let cname = sanitize(&con.name, i, &mut taken_cons);
        let mut line = format!(" {cname}:");
        let mut first = true;
        for (j, c) in &con.terms {
            line.push(' ');
            fmt_coef(first, *c, &var_names[*j], &mut line);
            first = false;
        }
        if first {
            // A constraint with no terms still needs a valid lhs.
            line.push_str(&format!(" 0 {}", var_names.first().map(String::as_str).unwrap_or("x0")));
        }
        line.push_str(&format!(" {} {}", con.sense.symbol(), fmt_bound(con.rhs)));
        text.push_str(&line);
        text.push('\n');
    }

    text.push_str("Bounds\n");
    for (j, v) in model.vars.iter().enumerate() {
        let name = &var_names[j];
        let line = match (v.lb.is_finite(), v.ub.is_finite()) {
            (true, true) if v.lb == v.ub => format!(" {name} = {}\n", fmt_bound(v.lb)),
            (true, true) => format!(
                " {} <= {name} <= {}\n",
                fmt_bound(v.lb),
                fmt_bound(v.ub)
            ),
            (true, false) => format!(" {name} >= {}\n", fmt_bound(v.lb)),
            (false, true) => format!(" -inf <= {name} <= {}\n", fmt_bound(v.ub)),
            (false, false) => format!(" {name} free\n"),
        };
        text.push_str(&line);
    }

    let binaries: Vec<&str> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| var_names[j].as_str())
        .collect();
    if !binaries.is_empty() {
        text.push_str("Binaries\n");
        for chunk in binaries.chunks(16) {
            text.push(' ');
            text.push_str(&chunk.join(" "));
            text.push('\n');
        }
    }
    text.push_str("End\n");
    EmittedLp { text, var_names }
}

#[derive(Debug, PartialEq)]
enum Section {
    Objective(ObjSense),
    Constraints,
    Bounds,
    Binaries,
    End,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Plus,
    Minus,
    Le,
    Ge,
    Eq,
    Colon,
}

fn tokenize(line: &str) -> Result<Vec<Tok>, MilpError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            break; // comment to end of line
        } else if c == '+' {
            toks.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            toks.push(Tok::Minus);
            i += 1;
        } else if c == ':' {
            toks.push(Tok::Colon);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let two = i + 1 < chars.len() && chars[i + 1] == '=';
            toks.push(match c {
                '<' => Tok::Le,
                '>' => Tok::Ge,
                _ => Tok::Eq,
            });
            i += if two && c != '=' { 2 } else { 1 };
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || chars[i] == 'e'
                    || chars[i] == 'E'
                    || ((chars[i] == '+' || chars[i] == '-')
                        && i > start
                        && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
            {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let val = text.parse::<f64>().map_err(|_| {
                MilpError::BadModel(format!("bad number '{text}' in LP line: {line}"))
            })?;
            toks.push(Tok::Num(val));
        } else if is_name_start(c) {
            let start = i;
            while i < chars.len() && is_name_char(chars[i]) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            if text == "inf" || text == "infinity" {
                toks.push(Tok::Num(f64::INFINITY));
            } else {
                toks.push(Tok::Name(text));
            }
        } else {
            return Err(MilpError::BadModel(format!(
                "unexpected character '{c}' in LP line: {line}"
            )));
        }
    }
    Ok(toks)
}

/// Terms parsed from a run of `[+-] [coef] name` groups. Returns the terms
/// and the index where parsing stopped (at a relational operator or end).
fn parse_terms(toks: &[Tok]) -> Result<(Vec<(String, f64)>, f64, usize), MilpError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut i = 0;
    while i < toks.len() {
        match &toks[i] {
            Tok::Le | Tok::Ge | Tok::Eq => break,
            _ => {}
        }
        let mut sign = 1.0;
        loop {
            match toks.get(i) {
                Some(Tok::Plus) => i += 1,
                Some(Tok::Minus) => {
                    sign = -sign;
                    i += 1;
                }
                _ => break,
            }
        }
        match toks.get(i) {
            Some(Tok::Num(v)) => {
                i += 1;
                match toks.get(i) {
                    Some(Tok::Name(n)) => {
                        terms.push((n.clone(), sign * v));
                        i += 1;
                    }
                    _ => constant += sign * v,
                }
            }
            Some(Tok::Name(n)) => {
                terms.push((n.clone(), sign));
                i += 1;
            }
            None => break,
            Some(t) => {
                return Err(MilpError::BadModel(format!(
                    "unexpected token {t:?} in expression"
                )))
            }
        }
    }
    Ok((terms, constant, i))
}

/// Parse LP text into a model. Covers the dialect `emit_lp` produces.
pub fn parse_lp(text: &str) -> Result<MilpModel, MilpError> {
    use std::collections::HashMap;

    let mut model = MilpModel::new("parsed-lp");
    let mut section: Option<Section> = None;
    let mut var_ids: HashMap<String, super::VarId> = HashMap::new();
    let mut bounds_set: HashMap<String, (f64, f64)> = HashMap::new();
    let mut binaries: Vec<String> = Vec::new();
    // Pending objective/constraint tokens accumulate until the row is
    // complete (constraints end at `sense rhs`, the objective at a section).
    let mut pending: Vec<Tok> = Vec::new();
    let mut pending_is_obj = false;

    let intern =
        |model: &mut MilpModel, name: &str, var_ids: &mut HashMap<String, super::VarId>| {
            *var_ids.entry(name.to_string()).or_insert_with(|| {
                model.add_continuous(name, 0.0, f64::INFINITY, 0.0)
            })
        };

    let flush_obj = |model: &mut MilpModel,
                     pending: &mut Vec<Tok>,
                     var_ids: &mut HashMap<String, super::VarId>|
     -> Result<(), MilpError> {
        if pending.is_empty() {
            return Ok(());
        }
        let mut toks = std::mem::take(pending);
        // Strip a leading `name :` label.
        if toks.len() >= 2 && matches!(toks[1], Tok::Colon) {
            toks.drain(0..2);
        }
        let (terms, constant, used) = parse_terms(&toks)?;
        if used != toks.len() {
            return Err(MilpError::BadModel("trailing tokens in objective".into()));
        }
        for (name, coef) in terms {
            let id = *var_ids.entry(name.clone()).or_insert_with(|| {
                model.add_continuous(&name, 0.0, f64::INFINITY, 0.0)
            });
            model.vars[id.0].obj += coef;
        }
        model.obj_constant += constant;
        Ok(())
    };

    let flush_con = |model: &mut MilpModel,
                         toks: Vec<Tok>,
                         var_ids: &mut HashMap<String, super::VarId>|
     -> Result<(), MilpError> {
        let mut toks = toks;
        let mut name = String::new();
        if toks.len() >= 2 && matches!(toks[1], Tok::Colon) {
            if let Tok::Name(n) = &toks[0] {
                name = n.clone();
            }
            toks.drain(0..2);
        }
        let (terms, constant, used) = parse_terms(&toks)?;
        let sense = match toks.get(used) {
            Some(Tok::Le) => Sense::Le,
            Some(Tok::Ge) => Sense::Ge,
            Some(Tok::Eq) => Sense::Eq,
            other => {
                return Err(MilpError::BadModel(format!(
                    "constraint '{name}' missing relational operator, got {other:?}"
                )))
            }
        };
        let rhs = match (toks.get(used + 1), toks.get(used + 2)) {
            (Some(Tok::Num(v)), None) => *v,
            (Some(Tok::Minus), Some(Tok::Num(v))) => -*v,
            other => {
                return Err(MilpError::BadModel(format!(
                    "constraint '{name}' has malformed right-hand side: {other:?}"
                )))
            }
        };
        if name.is_empty() {
            name = format!("c{}", model.cons.len());
        }
        let expr: Vec<(super::VarId, f64)> = terms
            .into_iter()
            .map(|(n, c)| {
                let id = *var_ids.entry(n.clone()).or_insert_with(|| {
                    model.add_continuous(&n, 0.0, f64::INFINITY, 0.0)
                });
                (id, c)
            })
            .collect();
        model.add_con(name, expr, sense, rhs - constant);
        Ok(())
    };

    for raw_line in text.lines() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        let lowered = line.to_ascii_lowercase();
        let new_section = match lowered.as_str() {
            "minimize" | "min" => Some(Section::Objective(ObjSense::Minimize)),
            "maximize" | "max" => Some(Section::Objective(ObjSense::Maximize)),
            "subject to" | "st" | "s.t." | "such that" => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "binary" | "binaries" => Some(Section::Binaries),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(s) = new_section {
            if pending_is_obj {
                flush_obj(&mut model, &mut pending, &mut var_ids)?;
                pending_is_obj = false;
            }
            if let Section::Objective(sense) = &s {
                model.sense = *sense;
                pending_is_obj = true;
            }
            section = Some(s);
            continue;
        }
        let toks = tokenize(line)?;
        if toks.is_empty() {
            continue;
        }
        match &section {
            Some(Section::Objective(_)) => pending.extend(toks),
            Some(Section::Constraints) => {
                // One constraint per line in our dialect.
                flush_con(&mut model, toks, &mut var_ids)?;
            }
            Some(Section::Bounds) => {
                parse_bound_line(&toks, &mut bounds_set)?;
            }
            Some(Section::Binaries) => {
                for t in toks {
                    match t {
                        Tok::Name(n) => binaries.push(n),
                        other => {
                            return Err(MilpError::BadModel(format!(
                                "unexpected token {other:?} in binaries section"
                            )))
                        }
                    }
                }
            }
            Some(Section::End) | None => {
                return Err(MilpError::BadModel(format!(
                    "content outside any LP section: {line}"
                )))
            }
        }
    }
    if pending_is_obj {
        flush_obj(&mut model, &mut pending, &mut var_ids)?;
    }

    for (name, (lb, ub)) in &bounds_set {
        let id = intern(&mut model, name, &mut var_ids);
        model.set_bounds(id, *lb, *ub);
    }
    for name in binaries {
        let id = intern(&mut model, &name, &mut var_ids);
        let v = &mut model.vars[id.0];
        v.kind = VarKind::Binary;
        // LP files leave binary bounds implicit unless tightened in Bounds.
        if !bounds_set.contains_key(&name) {
            v.lb = 0.0;
            v.ub = 1.0;
        } else {
            v.lb = v.lb.max(0.0);
            v.ub = v.ub.min(1.0);
        }
    }
    Ok(model)
}

fn parse_bound_line(
    toks: &[Tok],
    bounds: &mut std::collections::HashMap<String, (f64, f64)>,
) -> Result<(), MilpError> {
    // Forms: `l <= x <= u`, `x <= u`, `x >= l`, `x = v`, `x free`,
    // `-inf <= x <= u`. Numbers may carry a leading minus token.
    let read_num = |i: &mut usize| -> Option<f64> {
        let neg = matches!(toks.get(*i), Some(Tok::Minus));
        if neg {
            *i += 1;
        }
        if let Some(Tok::Num(v)) = toks.get(*i) {
            *i += 1;
            Some(if neg { -*v } else { *v })
        } else {
            None
        }
    };
    let mut i = 0;
    if let Some(lo) = read_num(&mut i) {
        // l <= x <= u
        if !matches!(toks.get(i), Some(Tok::Le)) {
            return Err(MilpError::BadModel("malformed bounds line".into()));
        }
        i += 1;
        let name = match toks.get(i) {
            Some(Tok::Name(n)) => n.clone(),
            _ => return Err(MilpError::BadModel("malformed bounds line".into())),
        };
        i += 1;
        if !matches!(toks.get(i), Some(Tok::Le)) {
            return Err(MilpError::BadModel("malformed bounds line".into()));
        }
        i += 1;
        let hi = read_num(&mut i)
            .ok_or_else(|| MilpError::BadModel("malformed bounds line".into()))?;
        let entry = bounds.entry(name).or_insert((f64::NEG_INFINITY, f64::INFINITY));
        entry.0 = lo;
        entry.1 = hi;
        return Ok(());
    }
    let name = match toks.get(i) {
        Some(Tok::Name(n)) => n.clone(),
        _ => return Err(MilpError::BadModel("malformed bounds line".into())),
    };
    i += 1;
    match toks.get(i) {
        Some(Tok::Name(kw)) if kw == "free" => {
            bounds.insert(name, (f64::NEG_INFINITY, f64::INFINITY));
            Ok(())
        }
        Some(Tok::Le) => {
            i += 1;
            let hi = read_num(&mut i)
                .ok_or_else(|| MilpError::BadModel("malformed bounds line".into()))?;
            let entry = bounds.entry(name).or_insert((0.0, f64::INFINITY));
            entry.1 = hi;
            Ok(())
        }
        Some(Tok::Ge) => {
            i += 1;
            let lo = read_num(&mut i)
                .ok_or_else(|| MilpError::BadModel("malformed bounds line".into()))?;
            let entry = bounds.entry(name).or_insert((0.0, f64::INFINITY));
            entry.0 = lo;
            Ok(())
        }
        Some(Tok::Eq) => {
            i += 1;
            let v = read_num(&mut i)
                .ok_or_else(|| MilpError::BadModel("malformed bounds line".into()))?;
            bounds.insert(name, (v, v));
            Ok(())
        }
        other => Err(MilpError::BadModel(format!(
            "malformed bounds line near {other:?}"
        ))),
    }
}
