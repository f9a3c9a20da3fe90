//! Line-oriented net format for hand-written fixtures.
//!
//! ```text
//! # comment
//! place p0
//! transition t1 A          # label A
//! transition t2            # label defaults to the id
//! transition t3 tau        # silent through the silent-label set
//! transition t4 X silent   # explicitly silent
//! arc p0 t1
//! ```

use super::{ModelError, NetBuilder, SilentLabels, WorkflowNet};

pub fn parse_simple_net(text: &str) -> Result<WorkflowNet, ModelError> {
    parse_simple_net_with(text, &SilentLabels::default())
}

pub fn parse_simple_net_with(text: &str, silent: &SilentLabels) -> Result<WorkflowNet, ModelError> {
    let mut builder = NetBuilder::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u32 + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let located = |e: ModelError| e.at(line_no, 1);
        match fields.as_slice() {
            ["place", id] => {
                builder.place(*id).map_err(located)?;
            }
            ["transition", id, rest @ ..] => {
                let (label, explicit_silent) = match rest {
                    [] => (*id, false),
                    ["silent"] => ("", true),
                    [label] => (*label, false),
                    [label, "silent"] => (*label, true),
                    _ => {
                        return Err(located(ModelError::Syntax(format!(
                            "expected `transition <id> [label] [silent]`, got {line:?}"
                        ))))
                    }
                };
                let is_silent = explicit_silent || silent.is_silent(label);
                builder.transition(*id, label, is_silent).map_err(located)?;
            }
            ["arc", from, to] => {
                builder.arc(from, to).map_err(located)?;
            }
            [directive, ..] if matches!(*directive, "place" | "transition" | "arc") => {
                return Err(located(ModelError::Syntax(format!(
                    "wrong number of fields for `{directive}`"
                ))))
            }
            [directive, ..] => return Err(located(ModelError::UnknownDirective(directive.to_string()))),
            [] => unreachable!(),
        }
    }
    builder.build()
}
