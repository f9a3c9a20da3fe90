//! Random sound workflow nets built from process trees.

use rand::Rng;

#[derive(Debug, Clone)]
pub enum Tree {
    Leaf(String),
    Seq(Vec<Tree>),
    Xor(Vec<Tree>),
    And(Vec<Tree>),
    /// `Loop(body, redo)`: body, then either exit or redo and body again.
    Loop(Box<Tree>, Box<Tree>),
}

fn gen_tree<R: Rng>(rng: &mut R, depth: u32, next: &mut u32) -> Tree {
    if depth == 0 || rng.random_bool(0.35) {
        *next += 1;
        return Tree::Leaf(format!("a{}", *next - 1));
    }
    let mut child = |rng: &mut R| gen_tree(rng, depth - 1, next);
    match rng.random_range(0..4) {
        0 => Tree::Seq(vec![child(rng), child(rng)]),
        1 => Tree::Xor(vec![child(rng), child(rng)]),
        2 => Tree::And(vec![child(rng), child(rng)]),
        _ => {
            let body = child(rng);
            let redo = child(rng);
            Tree::Loop(Box::new(body), Box::new(redo))
        }
    }
}

/// A workflow net in the simple text format, plus the same net as PNML.
#[derive(Debug, Clone)]
pub struct GeneratedNet {
    pub simple: String,
    pub pnml: String,
    pub places: Vec<String>,
    /// `(id, label, silent)`.
    pub transitions: Vec<(String, String, bool)>,
    pub arcs: Vec<(String, String)>,
}

impl GeneratedNet {
    pub fn node_count(&self) -> usize {
        self.places.len() + self.transitions.len()
    }
}

#[derive(Default)]
struct Emitter {
    places: Vec<String>,
    transitions: Vec<(String, String, bool)>,
    arcs: Vec<(String, String)>,
    taus: u32,
}

impl Emitter {
    fn place(&mut self) -> String {
        let id = format!("p{}", self.places.len());
        self.places.push(id.clone());
        id
    }

    fn tau(&mut self) -> String {
        let id = format!("t{}", self.taus);
        self.taus += 1;
        self.transitions.push((id.clone(), "tau".into(), true));
        id
    }

    fn arc(&mut self, a: &str, b: &str) {
        self.arcs.push((a.to_string(), b.to_string()));
    }

    fn emit(&mut self, tree: &Tree, input: &str, output: &str) {
        match tree {
            Tree::Leaf(a) => {
                self.transitions.push((a.clone(), a.clone(), false));
                self.arc(input, a);
                self.arc(a, output);
            }
            Tree::Seq(children) => {
                let mut from = input.to_string();
                for (i, c) in children.iter().enumerate() {
                    let to = if i + 1 == children.len() {
                        output.to_string()
                    } else {
                        self.place()
                    };
                    self.emit(c, &from, &to);
                    from = to;
                }
            }
            Tree::Xor(children) => {
                for c in children {
                    self.emit(c, input, output);
                }
            }
            Tree::And(children) => {
                let split = self.tau();
                let join = self.tau();
                self.arc(input, &split);
                self.arc(&join, output);
                for c in children {
                    let (p, q) = (self.place(), self.place());
                    self.arc(&split, &p);
                    self.arc(&q, &join);
                    self.emit(c, &p, &q);
                }
            }
            Tree::Loop(body, redo) => {
                let mid = self.place();
                self.emit(body, input, &mid);
                self.emit(redo, &mid, input);
                let exit = self.tau();
                self.arc(&mid, &exit);
                self.arc(&exit, output);
            }
        }
    }
}

fn render(e: &Emitter) -> (String, String) {
    let mut simple = String::new();
    for p in &e.places {
        simple.push_str(&format!("place {p}\n"));
    }
    for (id, label, silent) in &e.transitions {
        if *silent {
            simple.push_str(&format!("transition {id} tau\n"));
        } else {
            simple.push_str(&format!("transition {id} {label}\n"));
        }
    }
    for (a, b) in &e.arcs {
        simple.push_str(&format!("arc {a} {b}\n"));
    }

    // PNML lists nodes in reverse order and prefixes transition ids so the
    // two encodings differ in everything except structure and labels.
    let mut pnml = String::from("<?xml version=\"1.0\"?>\n<pnml><net id=\"g\" type=\"ptnet\"><page id=\"pg\">\n");
    for p in e.places.iter().rev() {
        pnml.push_str(&format!("<place id=\"{p}\"/>\n"));
    }
    for (id, label, silent) in e.transitions.iter().rev() {
        if *silent {
            pnml.push_str(&format!(
                "<transition id=\"x_{id}\"><name><text>{id}</text></name><toolspecific tool=\"ProM\" version=\"6.4\" activity=\"$invisible$\"/></transition>\n"
            ));
        } else {
            pnml.push_str(&format!(
                "<transition id=\"x_{id}\"><name><text>{label}</text></name></transition>\n"
            ));
        }
    }
    let tid = |n: &str| {
        if e.places.iter().any(|p| p == n) {
            n.to_string()
        } else {
            format!("x_{n}")
        }
    };
    for (i, (a, b)) in e.arcs.iter().enumerate() {
        pnml.push_str(&format!(
            "<arc id=\"a{i}\" source=\"{}\" target=\"{}\"/>\n",
            tid(a),
            tid(b)
        ));
    }
    pnml.push_str("</page></net></pnml>\n");
    (simple, pnml)
}

/// A net `S ; tree` with at most `max_nodes` nodes. `S` is the unique start
/// activity.
pub fn random_net<R: Rng>(rng: &mut R, max_nodes: usize) -> GeneratedNet {
    loop {
        let mut next = 0;
        let depth = rng.random_range(1..=3);
        let tree = Tree::Seq(vec![Tree::Leaf("S".into()), gen_tree(rng, depth, &mut next)]);
        let mut e = Emitter::default();
        let (i, o) = ("i".to_string(), "o".to_string());
        e.places.push(i.clone());
        e.places.push(o.clone());
        e.emit(&tree, &i, &o);
        if e.places.len() + e.transitions.len() > max_nodes {
            continue;
        }
        let (simple, pnml) = render(&e);
        return GeneratedNet {
            simple,
            pnml,
            places: e.places,
            transitions: e.transitions,
            arcs: e.arcs,
        };
    }
}
