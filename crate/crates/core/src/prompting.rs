//! Prompt rendering and the inverse parser for knowledge text.
//!
//! Knowledge is rendered per concept as
//! `look relations are: 0. RelatedTo see. 1. RelatedTo glance.` and
//! concept blocks are joined by single spaces. Characters that the template
//! uses as delimiters (plus `\`) are backslash-escaped inside concept and tail
//! text, so parsing stays unambiguous for any term. Interior underscores are
//! rendered as spaces and turned back into underscores on parse.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::PromptError;
use crate::model::{Concept, ConceptSet, KnowledgeBundle, Relation, RelationType, MAX_RANK};

const DEFAULT_TEMPLATE: &str = include_str!("default_template.toml");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub task_prefix: String,
    pub concept_join: String,
    pub knowledge_header: String,
    pub relation_line: String,
    #[serde(default = "default_separator")]
    pub knowledge_separator: String,
}

fn default_separator() -> String {
    "\n".to_string()
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TEMPLATE).expect("embedded template is valid")
    }
}

impl PromptTemplate {
    pub fn from_toml_str(text: &str) -> Result<Self, PromptError> {
        let template: PromptTemplate =
            toml::from_str(text).map_err(|e| PromptError::InvalidTemplate(e.to_string()))?;
        template.layout()?;
        Ok(template)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::InvalidTemplate(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Template fields as decode parameters, so a generated sentence records
    /// the exact prompt layout it came from.
    pub fn describe(&self) -> BTreeMap<String, String> {
        [
            ("template.task_prefix", &self.task_prefix),
            ("template.concept_join", &self.concept_join),
            ("template.knowledge_header", &self.knowledge_header),
            ("template.relation_line", &self.relation_line),
            ("template.knowledge_separator", &self.knowledge_separator),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
    }

    fn layout(&self) -> Result<Layout, PromptError> {
        let header = split_placeholders(&self.knowledge_header, &["{concept}"])?;
        let line = split_placeholders(&self.relation_line, &["{rank}", "{relation}", "{tail}"])?;
        if header[1].trim().is_empty() {
            return Err(PromptError::InvalidTemplate(
                "knowledge_header needs text after {concept}".into(),
            ));
        }
        if line[2].is_empty() {
            return Err(PromptError::InvalidTemplate(
                "relation_line needs a separator between {relation} and {tail}".into(),
            ));
        }
        if line[3].trim().is_empty() {
            return Err(PromptError::InvalidTemplate(
                "relation_line needs text after {tail}".into(),
            ));
        }
        let mut specials: Vec<char> = header
            .iter()
            .chain(line.iter())
            .flat_map(|lit| lit.chars())
            .filter(|c| !c.is_alphanumeric() && !c.is_whitespace())
            .collect();
        specials.push('\\');
        specials.sort_unstable();
        specials.dedup();
        Ok(Layout {
            header,
            line,
            specials,
        })
    }
}

/// Splits a format string around placeholders that must each occur once, in order.
fn split_placeholders(format: &str, names: &[&str]) -> Result<Vec<String>, PromptError> {
    let mut pieces = Vec::with_capacity(names.len() + 1);
    let mut rest = format;
    for name in names {
        if format.matches(name).count() != 1 {
            return Err(PromptError::InvalidTemplate(format!(
                "{format:?} must contain {name} exactly once"
            )));
        }
        let (before, after) = rest.split_once(name).ok_or_else(|| {
            PromptError::InvalidTemplate(format!("{format:?}: placeholders out of order"))
        })?;
        pieces.push(before.to_string());
        rest = after;
    }
    pieces.push(rest.to_string());
    Ok(pieces)
}

struct Layout {
    header: Vec<String>,
    line: Vec<String>,
    specials: Vec<char>,
}

impl Layout {
    fn escape(&self, term: &str) -> String {
        let last = term.chars().count().saturating_sub(1);
        let mut out = String::with_capacity(term.len());
        for (i, c) in term.chars().enumerate() {
            if self.specials.contains(&c) || (c == '_' && (i == 0 || i == last)) {
                out.push('\\');
                out.push(c);
            } else if c == '_' {
                out.push(' ');
            } else {
                out.push(c);
            }
        }
        out
    }

    fn header_regex(&self) -> Regex {
        let pattern = format!(
            r"^{}(?P<concept>{}){}",
            literal_pattern(&self.header[0]),
            self.term_pattern(),
            literal_pattern(&self.header[1])
        );
        Regex::new(&pattern).expect("generated header pattern")
    }

    fn entry_regex(&self) -> Regex {
        let pattern = format!(
            r"^{}(?P<rank>\d+){}(?P<rel>[^\s\\]+?){}(?P<tail>{}){}",
            literal_pattern(&self.line[0]),
            literal_pattern(&self.line[1]),
            literal_pattern(&self.line[2]),
            self.term_pattern(),
            literal_pattern(&self.line[3])
        );
        Regex::new(&pattern).expect("generated entry pattern")
    }

    fn term_pattern(&self) -> String {
        let class: String = self
            .specials
            .iter()
            .map(|c| regex::escape(&c.to_string()))
            .collect();
        format!(r"(?:\\.|[^{class}])+?")
    }
}

/// Whitespace runs in a literal match any whitespace run.
fn literal_pattern(literal: &str) -> String {
    let mut out = String::new();
    let mut in_space = false;
    for c in literal.chars() {
        if c.is_whitespace() {
            if !in_space {
                out.push_str(r"\s+");
            }
            in_space = true;
        } else {
            out.push_str(&regex::escape(&c.to_string()));
            in_space = false;
        }
    }
    out
}

fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.trim().chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => out.extend(chars.next()),
            c if c.is_whitespace() => out.push('_'),
            c => out.push(c),
        }
    }
    out
}

fn default_layout() -> &'static Layout {
    static LAYOUT: OnceLock<Layout> = OnceLock::new();
    LAYOUT.get_or_init(|| {
        PromptTemplate::default()
            .layout()
            .expect("embedded template is valid")
    })
}

/// Renders with the default template.
pub fn render_knowledge(bundle: &KnowledgeBundle) -> String {
    render_with(bundle, default_layout())
}

pub fn render_knowledge_with(
    bundle: &KnowledgeBundle,
    template: &PromptTemplate,
) -> Result<String, PromptError> {
    Ok(render_with(bundle, &template.layout()?))
}

fn render_with(bundle: &KnowledgeBundle, layout: &Layout) -> String {
    let mut items = Vec::new();
    for (concept, relations) in bundle.iter() {
        items.push(format!(
            "{}{}{}",
            layout.header[0],
            layout.escape(concept.surface()),
            layout.header[1]
        ));
        for r in relations {
            items.push(format!(
                "{}{}{}{}{}{}{}",
                layout.line[0],
                r.rank,
                layout.line[1],
                r.rel,
                layout.line[2],
                layout.escape(&r.tail),
                layout.line[3]
            ));
        }
    }
    items.join(" ")
}

/// Task prefix, the concept list and, when given, the rendered knowledge in
/// concept-set order.
pub fn build_prompt(
    set: &ConceptSet,
    bundle: Option<&KnowledgeBundle>,
    template: &PromptTemplate,
) -> Result<String, PromptError> {
    let layout = template.layout()?;
    let concepts = set
        .iter()
        .map(Concept::spaced)
        .collect::<Vec<_>>()
        .join(&template.concept_join);
    let mut prompt = if template.task_prefix.is_empty() {
        concepts
    } else {
        format!("{} {}", template.task_prefix, concepts)
    };
    if let Some(bundle) = bundle {
        if let Some(foreign) = bundle.concepts().find(|c| !set.contains(c)) {
            return Err(PromptError::ForeignConcept(foreign.to_string()));
        }
        let ordered: KnowledgeBundle = set
            .iter()
            .filter_map(|c| bundle.get(c).map(|r| (c.clone(), r.to_vec())))
            .collect();
        let knowledge = render_with(&ordered, &layout);
        if !knowledge.is_empty() {
            prompt.push_str(&template.knowledge_separator);
            prompt.push_str(&knowledge);
        }
    }
    Ok(prompt.trim_end().to_string())
}

/// Parses knowledge text written with the default template.
///
/// Parsed relations carry no weight; ranks come from the numbering.
pub fn parse_relations(text: &str) -> Result<KnowledgeBundle, PromptError> {
    static REGEXES: OnceLock<(Regex, Regex)> = OnceLock::new();
    let (header, entry) = REGEXES.get_or_init(|| {
        let layout = default_layout();
        (layout.header_regex(), layout.entry_regex())
    });
    parse_with(text, header, entry)
}

pub fn parse_relations_with(
    text: &str,
    template: &PromptTemplate,
) -> Result<KnowledgeBundle, PromptError> {
    let layout = template.layout()?;
    parse_with(text, &layout.header_regex(), &layout.entry_regex())
}

fn parse_with(text: &str, header: &Regex, entry: &Regex) -> Result<KnowledgeBundle, PromptError> {
    let mut blocks: Vec<(Concept, Vec<Relation>)> = Vec::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        let snippet = || rest.chars().take(40).collect::<String>();
        if let (Some(caps), Some((concept, relations))) = (entry.captures(rest), blocks.last_mut())
        {
            let rank: u8 = caps["rank"]
                .parse()
                .ok()
                .filter(|r| *r <= MAX_RANK)
                .ok_or_else(|| PromptError::RankOutOfRange(caps["rank"].to_string()))?;
            let tail = unescape(&caps["tail"]);
            relations.push(Relation::new(
                concept.clone(),
                RelationType::parse(&caps["rel"]),
                tail,
                None,
                rank,
            ));
            rest = rest[caps[0].len()..].trim_start();
        } else if let Some(caps) = header.captures(rest) {
            let concept = Concept::new(unescape(&caps["concept"]))
                .map_err(|_| PromptError::MalformedKnowledgeText(snippet()))?;
            blocks.push((concept, Vec::new()));
            rest = rest[caps[0].len()..].trim_start();
        } else {
            return Err(PromptError::MalformedKnowledgeText(snippet()));
        }
    }
    Ok(blocks.into_iter().collect())
}
