//! PNML subset reader: `<net>`, `<place id>`, `<transition id>` with an
//! optional `<name><text>` label, and `<arc source target>`. Pages are
//! flattened.
//!
//! A transition is silent when its label is missing or empty, when the label
//! is in the silent-label set, or when it carries a tool-specific invisible
//! marker (ProM's `activity="$invisible$"`, `invisible="true"`, or a nested
//! `<property key="invisible">true</property>`).

use roxmltree::{Document, Node};

use super::{ModelError, NetBuilder, SilentLabels, WorkflowNet};

pub fn parse_pnml(text: &str) -> Result<WorkflowNet, ModelError> {
    parse_pnml_with(text, &SilentLabels::default())
}

pub fn parse_pnml_with(text: &str, silent: &SilentLabels) -> Result<WorkflowNet, ModelError> {
    let doc = Document::parse(text).map_err(|e| ModelError::Xml(e.to_string()))?;
    let position = |node: Node| {
        let pos = doc.text_pos_at(node.range().start);
        (pos.row, pos.col)
    };

    let mut nets = doc.descendants().filter(|n| n.has_tag_name_local("net"));
    let net = nets.next().ok_or(ModelError::NoNet)?;
    if let Some(extra) = nets.next() {
        let (line, column) = position(extra);
        return Err(ModelError::Syntax("document contains more than one <net>".into()).at(line, column));
    }

    let mut builder = NetBuilder::new();
    let mut arcs = Vec::new();
    for node in net.descendants().filter(Node::is_element) {
        let (line, column) = position(node);
        let located = |e: ModelError| e.at(line, column);
        match node.tag_name().name() {
            "place" => {
                let id = required(node, "place", "id").map_err(located)?;
                builder.place(id).map_err(located)?;
            }
            "transition" => {
                let id = required(node, "transition", "id").map_err(located)?;
                let label = name_text(node).unwrap_or_default();
                let is_silent = silent.is_silent(&label) || has_invisible_marker(node);
                builder.transition(id, label, is_silent).map_err(located)?;
            }
            "arc" => {
                let source = required(node, "arc", "source").map_err(located)?;
                let target = required(node, "arc", "target").map_err(located)?;
                arcs.push((source, target, line, column));
            }
            _ => {}
        }
    }
    // Arcs may precede the nodes they reference in document order.
    for (source, target, line, column) in arcs {
        builder.arc(source, target).map_err(|e| e.at(line, column))?;
    }
    builder.build()
}

trait LocalName {
    fn has_tag_name_local(&self, name: &str) -> bool;
}

impl LocalName for Node<'_, '_> {
    fn has_tag_name_local(&self, name: &str) -> bool {
        self.is_element() && self.tag_name().name() == name
    }
}

fn required<'a>(node: Node<'a, '_>, element: &'static str, attribute: &'static str) -> Result<&'a str, ModelError> {
    node.attribute(attribute)
        .ok_or(ModelError::MissingAttribute { element, attribute })
}

fn name_text(node: Node) -> Option<String> {
    let name = node.children().find(|c| c.has_tag_name_local("name"))?;
    let text = name.children().find(|c| c.has_tag_name_local("text"))?;
    Some(text.text().unwrap_or("").trim().to_string())
}

fn has_invisible_marker(node: Node) -> bool {
    node.children()
        .filter(|c| c.has_tag_name_local("toolspecific"))
        .any(|tool| {
            tool.attribute("activity") == Some("$invisible$")
                || tool.attribute("invisible") == Some("true")
                || tool.descendants().any(|p| {
                    p.has_tag_name_local("property")
                        && p.attribute("key") == Some("invisible")
                        && p.text().map(str::trim) == Some("true")
                })
        })
}
