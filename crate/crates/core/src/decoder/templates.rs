use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Slot marker inside a template line.
pub const SLOT: &str = "OBJ";
/// Maximum number of object slots per template.
pub const MAX_SLOTS: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TemplateToken {
    Word(String),
    Slot,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    tokens: Vec<TemplateToken>,
}

impl Template {
    pub fn parse(line: &str) -> Result<Self> {
        let tokens: Vec<TemplateToken> = line
            .split_whitespace()
            .map(|w| {
                if w == SLOT {
                    TemplateToken::Slot
                } else {
                    TemplateToken::Word(w.to_lowercase())
                }
            })
            .collect();
        if tokens.is_empty() {
            return Err(Error::Template(line.to_string()));
        }
        let t = Self { tokens };
        if t.slot_count() > MAX_SLOTS {
            return Err(Error::Template(line.to_string()));
        }
        Ok(t)
    }

    pub fn tokens(&self) -> &[TemplateToken] {
        &self.tokens
    }

    pub fn slot_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| matches!(t, TemplateToken::Slot))
            .count()
    }

    /// Fixed words, in order, with slots dropped.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            TemplateToken::Word(w) => Some(w.as_str()),
            TemplateToken::Slot => None,
        })
    }

    /// Fills slots left to right and joins with single spaces.
    pub fn render<S: AsRef<str>>(&self, objects: &[S]) -> Result<String> {
        if objects.len() != self.slot_count() {
            return Err(Error::SlotCount {
                template: self.to_string(),
                slots: self.slot_count(),
                given: objects.len(),
            });
        }
        let mut next = objects.iter();
        let parts: Vec<&str> = self
            .tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Word(w) => w.as_str(),
                TemplateToken::Slot => next.next().map(|o| o.as_ref()).unwrap_or_default(),
            })
            .collect();
        Ok(parts.join(" "))
    }

    /// Single-word slot fillers if `words` fits this template.
    pub fn match_words(&self, words: &[&str]) -> Option<Vec<String>> {
        if words.len() != self.tokens.len() {
            return None;
        }
        let mut objects = Vec::new();
        for (t, w) in self.tokens.iter().zip(words) {
            match t {
                TemplateToken::Word(expected) if expected == w => {}
                TemplateToken::Word(_) => return None,
                TemplateToken::Slot => objects.push((*w).to_string()),
            }
        }
        Some(objects)
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Word(w) => w.as_str(),
                TemplateToken::Slot => SLOT,
            })
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Ordered, duplicate-free list of action templates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<Template>,
}

impl TemplateSet {
    pub fn new(templates: Vec<Template>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for t in &templates {
            if !seen.insert(t.to_string()) {
                return Err(Error::Template(format!("duplicate template `{t}`")));
            }
        }
        if templates.is_empty() {
            return Err(Error::Template("empty template set".into()));
        }
        Ok(Self { templates })
    }

    /// One template per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let templates = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(Template::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(templates)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for t in &self.templates {
            s.push_str(&t.to_string());
            s.push('\n');
        }
        s
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Template> {
        self.templates.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Template> {
        self.templates.iter()
    }

    pub fn max_slots(&self) -> usize {
        self.templates.iter().map(Template::slot_count).max().unwrap_or(0)
    }

    /// First template matching `action`, with its slot fillers.
    pub fn parse_action(&self, action: &str) -> Option<(usize, Vec<String>)> {
        let lowered = action.to_lowercase();
        let words: Vec<&str> = lowered.split_whitespace().collect();
        self.templates
            .iter()
            .enumerate()
            .find_map(|(i, t)| t.match_words(&words).map(|objs| (i, objs)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_examples() {
        let take = Template::parse("take OBJ").unwrap();
        assert_eq!(take.render(&["egg"]).unwrap(), "take egg");
        let look = Template::parse("look").unwrap();
        assert_eq!(look.render::<&str>(&[]).unwrap(), "look");
        let put = Template::parse("put OBJ in OBJ").unwrap();
        assert_eq!(put.render(&["egg", "box"]).unwrap(), "put egg in box");
    }

    #[test]
    fn render_count_mismatch_is_error() {
        let put = Template::parse("put OBJ in OBJ").unwrap();
        assert!(matches!(
            put.render(&["egg"]),
            Err(Error::SlotCount { slots: 2, given: 1, .. })
        ));
    }

    #[test]
    fn rejects_three_slots_and_duplicates() {
        assert!(Template::parse("give OBJ OBJ OBJ").is_err());
        assert!(TemplateSet::parse("look\nlook\n").is_err());
    }

    #[test]
    fn parse_action_recovers_template_and_objects() {
        let set = TemplateSet::parse("look\ntake OBJ\nunlock OBJ\nunlock OBJ with OBJ\n").unwrap();
        assert_eq!(set.parse_action("take egg"), Some((1, vec!["egg".into()])));
        assert_eq!(
            set.parse_action("Unlock chest with key"),
            Some((3, vec!["chest".into(), "key".into()]))
        );
        assert_eq!(set.parse_action("dance wildly"), None);
    }

    #[test]
    fn file_round_trip() {
        let set = TemplateSet::parse("# comment\nlook\n\nput OBJ in OBJ\n").unwrap();
        assert_eq!(TemplateSet::parse(&set.to_file_string()).unwrap(), set);
    }
}
