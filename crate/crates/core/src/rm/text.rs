//! Plain-text and DOT serialization.
//!
//! ```text
//! # comments start with '#'
//! vocab A B C D o c m *
//! states 3
//! init u0
//! terminal u2
//! u0 {c} u1
//! u1 {o} u2
//! weights u1 0 0 0 0 1 0 0 0
//! ```
//!
//! State tokens may be written `u3` or `3`. The `vocab` line is optional; a
//! caller-supplied vocabulary is used without it. Weight rows for states that
//! are not listed default to zero once any `weights` line is present.

use std::fmt::Write as _;

use super::{RewardMachine, RmError, Vocabulary};

fn parse_err(line: usize, message: impl Into<String>) -> RmError {
    RmError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_state(tok: &str, line: usize) -> Result<usize, RmError> {
    let digits = tok.strip_prefix('u').unwrap_or(tok);
    digits
        .parse()
        .map_err(|_| parse_err(line, format!("expected a state, found `{tok}`")))
}

pub(super) fn parse(input: &str, fallback: &Vocabulary) -> Result<RewardMachine, RmError> {
    let mut vocab: Option<Vocabulary> = None;
    let mut num_states: Option<usize> = None;
    let mut init = 0usize;
    let mut terminal = Vec::new();
    let mut edges: Vec<(usize, usize, String, usize)> = Vec::new();
    let mut weights: Vec<(usize, usize, Vec<f64>)> = Vec::new();

    for (i, raw) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match head {
            "vocab" => {
                let symbols: Vec<&str> = rest.split_whitespace().collect();
                vocab = Some(
                    Vocabulary::new(&symbols).map_err(|e| parse_err(lineno, e.to_string()))?,
                );
            }
            "states" => {
                let n = rest
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad state count `{rest}`")))?;
                num_states = Some(n);
            }
            "init" => init = parse_state(rest, lineno)?,
            "terminal" => {
                for tok in rest.split_whitespace() {
                    terminal.push(parse_state(tok, lineno)?);
                }
            }
            "weights" => {
                let mut toks = rest.split_whitespace();
                let u = parse_state(
                    toks.next()
                        .ok_or_else(|| parse_err(lineno, "weights line without a state"))?,
                    lineno,
                )?;
                let row = toks
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| parse_err(lineno, format!("bad weight `{t}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                weights.push((lineno, u, row));
            }
            _ => {
                let from = parse_state(head, lineno)?;
                let open = rest
                    .find('{')
                    .ok_or_else(|| parse_err(lineno, "expected a label set `{...}`"))?;
                let close = rest
                    .find('}')
                    .ok_or_else(|| parse_err(lineno, "unterminated label set"))?;
                if open != 0 || close < open {
                    return Err(parse_err(lineno, "malformed transition line"));
                }
                let label = rest[..=close].to_string();
                let to = parse_state(rest[close + 1..].trim(), lineno)?;
                edges.push((lineno, from, label, to));
            }
        }
    }

    let vocab = vocab.unwrap_or_else(|| fallback.clone());
    let n = num_states.ok_or_else(|| parse_err(0, "missing `states` line"))?;
    let mut rm = RewardMachine::new(vocab, n)?
        .with_initial(init)
        .map_err(|e| parse_err(0, e.to_string()))?;
    for u in terminal {
        rm = rm.with_terminal(u).map_err(|e| parse_err(0, e.to_string()))?;
    }
    for (lineno, from, label, to) in edges {
        let l = rm
            .vocab()
            .parse_label_set(&label)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        rm.set_transition(from, l, to)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
    }
    if !weights.is_empty() {
        let width = rm.vocab().len();
        let mut table = vec![vec![0.0; width]; n];
        for (lineno, u, row) in weights {
            if u >= n {
                return Err(parse_err(lineno, format!("weights for unknown state {u}")));
            }
            if row.len() != width {
                return Err(parse_err(
                    lineno,
                    format!("expected {width} weights, found {}", row.len()),
                ));
            }
            table[u] = row;
        }
        rm.set_weights(Some(table))?;
    }
    Ok(rm)
}

pub(super) fn write(rm: &RewardMachine) -> String {
    let mut out = String::new();
    let v = rm.vocab();
    let _ = writeln!(out, "vocab {}", v.symbols().join(" "));
    let _ = writeln!(out, "states {}", rm.num_states());
    let _ = writeln!(out, "init u{}", rm.initial_state());
    if !rm.terminal_states().is_empty() {
        let t: Vec<String> = rm.terminal_states().iter().map(|u| format!("u{u}")).collect();
        let _ = writeln!(out, "terminal {}", t.join(" "));
    }
    for (u, l, to) in rm.transitions() {
        let _ = writeln!(out, "u{u} {} u{to}", v.format(l));
    }
    if let Some(w) = rm.weights() {
        for (u, row) in w.iter().enumerate() {
            // `{:?}` on f64 prints the shortest representation that round-trips
            let vals: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "weights u{u} {}", vals.join(" "));
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub(super) fn dot(rm: &RewardMachine) -> String {
    let v = rm.vocab();
    let mut out = String::from("digraph rm {\n  rankdir=LR;\n  node [shape=circle];\n");
    out.push_str("  start [shape=point];\n");
    for u in 0..rm.num_states() {
        let shape = if rm.is_terminal(u) { "doublecircle" } else { "circle" };
        let mut label = format!("u{u}");
        if let Some(w) = rm.weights() {
            let terms: Vec<String> = w[u]
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, x)| format!("{}:{x:.3}", v.symbol(i)))
                .collect();
            if !terms.is_empty() {
                label.push_str("\\n");
                label.push_str(&terms.join(" "));
            }
        }
        let _ = writeln!(out, "  u{u} [shape={shape}, label=\"{}\"];", escape(&label).replace("\\\\n", "\\n"));
    }
    let _ = writeln!(out, "  start -> u{};", rm.initial_state());
    for (u, l, to) in rm.transitions() {
        let _ = writeln!(out, "  u{u} -> u{to} [label=\"{}\"];", escape(&v.format(l)));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TASK1: &str = "\
# fetch coffee then deliver
states 3
init u0
terminal u2
u0 {c} u1
u1 {o} u2
";

    #[test]
    fn parses_without_vocab_line() {
        let v = Vocabulary::office();
        let rm = parse(TASK1, &v).unwrap();
        assert_eq!(rm.num_states(), 3);
        assert!(rm.is_terminal(2));
        let c = v.label_set(&["c"]).unwrap();
        let o = v.label_set(&["o"]).unwrap();
        assert_eq!(rm.replay(&[o, c, o]), vec![0, 0, 1, 0]);
    }

    #[test]
    fn round_trips_with_weights() {
        let v = Vocabulary::office();
        let mut w = vec![vec![0.0; 8]; 3];
        w[1][4] = 0.1 + 0.2;
        w[0][5] = -1.5e-7;
        let rm = parse(TASK1, &v).unwrap().with_weights(w).unwrap();
        let back = parse(&write(&rm), &Vocabulary::new(&["x"]).unwrap()).unwrap();
        assert_eq!(rm, back);
    }

    #[test]
    fn reports_line_numbers() {
        let v = Vocabulary::office();
        let bad = "states 2\nu0 {z} u1\n";
        match parse(bad, &v) {
            Err(RmError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("u0 {c} u1\n", &v).is_err());
        assert!(parse("states 2\nu0 {c} u5\n", &v).is_err());
        assert!(parse("states 2\nweights u0 1 2\n", &v).is_err());
    }

    #[test]
    fn dot_lists_every_edge() {
        let v = Vocabulary::office();
        let rm = parse(TASK1, &v).unwrap();
        let d = dot(&rm);
        assert!(d.starts_with("digraph"));
        assert!(d.contains("u0 -> u1 [label=\"{c}\"]"));
        assert!(d.contains("u2 [shape=doublecircle"));
        assert!(d.trim_end().ends_with('}'));
    }
}
