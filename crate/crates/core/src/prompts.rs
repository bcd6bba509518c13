//! Versioned prompt templates with `{{placeholder}}` substitution.
//!
//! Templates are plain UTF-8 files with a front-matter header:
//!
//! ```text
//! ---
//! id: RESUME_PARSE@1
//! placeholders: resume_text
//! ---
//! === system ===
//! ...
//! === user ===
//! ...
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use thiserror::Error;

pub const RESUME_PARSE: &str = "RESUME_PARSE@1";
pub const JOB_EXTRACT: &str = "JOB_EXTRACT@1";
pub const SECTION_TAILOR: &str = "SECTION_TAILOR@1";
pub const COVER_LETTER: &str = "COVER_LETTER@1";

const BUILTIN: [(&str, &str); 4] = [
    ("resume_parse.prompt", include_str!("../prompts/resume_parse.prompt")),
    ("job_extract.prompt", include_str!("../prompts/job_extract.prompt")),
    ("section_tailor.prompt", include_str!("../prompts/section_tailor.prompt")),
    ("cover_letter.prompt", include_str!("../prompts/cover_letter.prompt")),
];

const SYSTEM_MARKER: &str = "=== system ===";
const USER_MARKER: &str = "=== user ===";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("missing binding for placeholder `{0}`")]
    MissingBinding(String),
    #[error("malformed template {source_name}: {reason}")]
    Malformed { source_name: String, reason: String },
    #[error("could not read templates: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub system_template: String,
    pub user_template: String,
    pub placeholders: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub template_id: String,
    pub system: String,
    pub user: String,
}

/// Placeholder names in order of appearance. `Err` on an unclosed `{{`.
fn placeholders_in(text: &str) -> Result<Vec<&str>, String> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| "unclosed `{{`".to_owned())?;
        names.push(after[..close].trim());
        rest = &after[close + 2..];
    }
    Ok(names)
}

/// Single-pass substitution; bound values are inserted verbatim and never rescanned.
fn substitute(text: &str, bindings: &HashMap<&str, &str>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        // templates are checked for unclosed braces at load time
        let close = after.find("}}").expect("validated template");
        let name = after[..close].trim();
        let value = bindings
            .get(name)
            .ok_or_else(|| PromptError::MissingBinding(name.to_owned()))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

impl PromptTemplate {
    /// Parses a template file.
    pub fn parse(source_name: &str, text: &str) -> Result<Self, PromptError> {
        let malformed = |reason: &str| PromptError::Malformed {
            source_name: source_name.to_owned(),
            reason: reason.to_owned(),
        };
        let text = text.replace("\r\n", "\n");
        let body = text
            .strip_prefix("---\n")
            .ok_or_else(|| malformed("missing front matter"))?;
        let (header, body) = body
            .split_once("\n---\n")
            .ok_or_else(|| malformed("unterminated front matter"))?;

        let mut id = None;
        let mut placeholders = Vec::new();
        for line in header.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| malformed("front matter lines must be `key: value`"))?;
            match key.trim() {
                "id" => id = Some(value.trim().to_owned()),
                "placeholders" => {
                    placeholders = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_owned)
                        .collect()
                }
                other => return Err(malformed(&format!("unknown front matter key `{other}`"))),
            }
        }
        let id = id.filter(|s| !s.is_empty()).ok_or_else(|| malformed("missing id"))?;

        let body = body
            .trim_start_matches('\n')
            .strip_prefix(SYSTEM_MARKER)
            .ok_or_else(|| malformed("body must start with the system marker"))?;
        let (system, user) = body
            .split_once(&format!("\n{USER_MARKER}\n"))
            .ok_or_else(|| malformed("missing user marker"))?;

        let template = PromptTemplate {
            id,
            system_template: system.trim().to_owned(),
            user_template: user.trim().to_owned(),
            placeholders,
        };
        template.check().map_err(|r| malformed(&r))?;
        Ok(template)
    }

    fn check(&self) -> Result<(), String> {
        let declared: BTreeSet<&str> = self.placeholders.iter().map(String::as_str).collect();
        for text in [&self.system_template, &self.user_template] {
            for name in placeholders_in(text)? {
                if !declared.contains(name) {
                    return Err(format!("placeholder `{name}` is not declared"));
                }
            }
        }
        if self.user_template.is_empty() {
            return Err("user template is empty".into());
        }
        Ok(())
    }

    pub fn render(&self, bindings: &HashMap<&str, &str>) -> Result<RenderedPrompt, PromptError> {
        for name in &self.placeholders {
            if !bindings.contains_key(name.as_str()) {
                return Err(PromptError::MissingBinding(name.clone()));
            }
        }
        Ok(RenderedPrompt {
            template_id: self.id.clone(),
            system: substitute(&self.system_template, bindings)?,
            user: substitute(&self.user_template, bindings)?,
        })
    }
}

/// Read-only registry of templates keyed by id.
#[derive(Debug, Clone)]
pub struct PromptRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptRegistry {
    /// The templates shipped with the crate.
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        for (name, text) in BUILTIN {
            let t = PromptTemplate::parse(name, text).expect("builtin templates are valid");
            templates.insert(t.id.clone(), t);
        }
        PromptRegistry { templates }
    }

    /// Builtins overridden by every `*.prompt` file in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut registry = PromptRegistry::builtin();
        let entries = std::fs::read_dir(dir).map_err(|e| PromptError::Io(e.to_string()))?;
        let mut paths: Vec<_> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "prompt"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io(e.to_string()))?;
            let t = PromptTemplate::parse(&path.display().to_string(), &text)?;
            registry.templates.insert(t.id.clone(), t);
        }
        Ok(registry)
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_owned()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(&self, template_id: &str, bindings: &HashMap<&str, &str>) -> Result<RenderedPrompt, PromptError> {
        self.get(template_id)?.render(bindings)
    }
}

impl Default for PromptRegistry {
    fn default() -> Self {
        PromptRegistry::builtin()
    }
}

/// Returns the text between `<tag>` and `</tag>` lines in a rendered prompt.
pub fn extract_block<'a>(prompt: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>\n");
    let close = format!("\n</{tag}>");
    let start = prompt.find(&open)? + open.len();
    let end = prompt[start..].rfind(&close)? + start;
    Some(&prompt[start..end])
}
