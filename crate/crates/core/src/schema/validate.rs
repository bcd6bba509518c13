//! Validation of untyped JSON (typically model output) into schema types.
//!
//! Validation is lenient about noise and strict about structure: unknown keys
//! are dropped with a warning, strings are trimmed, blank list items are
//! dropped, numbers in text positions are stringified. Missing required
//! fields and wrong container types are errors.

use std::collections::HashSet;

use serde_json::{Map, Value};
use thiserror::Error;

use super::types::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("type mismatch at `{path}`: expected {expected}")]
    TypeMismatch { path: String, expected: &'static str },
    #[error("invalid value at `{path}`: {reason}")]
    InvalidField { path: String, reason: String },
    #[error("document has no sections and no summary")]
    EmptyDocument,
}

/// A validated value plus the warnings raised while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

type Result<T> = std::result::Result<T, SchemaError>;

#[derive(Default)]
struct Ctx {
    warnings: Vec<String>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

fn as_object<'a>(value: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    value.as_object().ok_or_else(|| SchemaError::TypeMismatch {
        path: if path.is_empty() { "$".into() } else { path.into() },
        expected: "object",
    })
}

/// Scalar text; `None` for null, absent or blank.
fn scalar_text(value: &Value, path: &str) -> Result<Option<String>> {
    match value {
        Value::Null => Ok(None),
        Value::String(s) => {
            let t = s.trim();
            Ok((!t.is_empty()).then(|| t.to_owned()))
        }
        Value::Number(n) => Ok(Some(n.to_string())),
        Value::Bool(b) => Ok(Some(b.to_string())),
        _ => Err(SchemaError::TypeMismatch {
            path: path.into(),
            expected: "string",
        }),
    }
}

/// Reads fields of one JSON object and tracks which keys were consumed.
struct Fields<'a> {
    map: &'a Map<String, Value>,
    path: String,
    known: Vec<&'static str>,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value, path: &str) -> Result<Self> {
        Ok(Fields {
            map: as_object(value, path)?,
            path: path.to_owned(),
            known: Vec::new(),
        })
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.known.push(key);
        self.map.get(key)
    }

    fn opt_str(&mut self, key: &'static str) -> Result<Option<String>> {
        let path = join(&self.path, key);
        match self.raw(key) {
            None => Ok(None),
            Some(v) => scalar_text(v, &path),
        }
    }

    fn req_str(&mut self, key: &'static str) -> Result<String> {
        let path = join(&self.path, key);
        self.opt_str(key)?.ok_or(SchemaError::MissingField(path))
    }

    /// Text that is expected but may legitimately be empty.
    fn str_or_empty(&mut self, key: &'static str) -> Result<String> {
        Ok(self.opt_str(key)?.unwrap_or_default())
    }

    fn list<T>(
        &mut self,
        key: &'static str,
        ctx: &mut Ctx,
        mut item: impl FnMut(&Value, &str, &mut Ctx) -> Result<Option<T>>,
    ) -> Result<Vec<T>> {
        let path = join(&self.path, key);
        match self.raw(key) {
            None | Some(Value::Null) => Ok(Vec::new()),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, v) in items.iter().enumerate() {
                    let item_path = format!("{path}[{i}]");
                    if let Some(t) = item(v, &item_path, ctx)? {
                        out.push(t);
                    }
                }
                Ok(out)
            }
            Some(_) => Err(SchemaError::TypeMismatch {
                path,
                expected: "array",
            }),
        }
    }

    fn str_list(&mut self, key: &'static str, ctx: &mut Ctx) -> Result<Vec<String>> {
        self.list(key, ctx, |v, p, ctx| {
            let s = scalar_text(v, p)?;
            if s.is_none() {
                ctx.warnings.push(format!("dropped blank item at `{p}`"));
            }
            Ok(s)
        })
    }

    fn finish(self, ctx: &mut Ctx) {
        for key in self.map.keys() {
            if !self.known.contains(&key.as_str()) {
                ctx.warnings
                    .push(format!("dropped unknown key `{}`", join(&self.path, key)));
            }
        }
    }
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> SchemaError {
    SchemaError::InvalidField {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Case-insensitive dedup keeping the first spelling.
pub(crate) fn dedup_case_insensitive(items: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items
        .into_iter()
        .filter(|s| seen.insert(s.to_lowercase()))
        .collect()
}

fn personal(value: &Value, path: &str, ctx: &mut Ctx) -> Result<PersonalDetails> {
    let mut f = Fields::new(value, path)?;
    let full_name = f.req_str("full_name")?;
    let email = f.opt_str("email")?;
    if let Some(e) = &email {
        if e.matches('@').count() != 1 {
            return Err(invalid(join(path, "email"), "must contain exactly one '@'"));
        }
    }
    let phone = f.opt_str("phone")?;
    let location = f.opt_str("location")?;
    let links = f.list("links", ctx, |v, p, ctx| {
        let mut lf = Fields::new(v, p)?;
        let label = lf.req_str("label")?;
        let url = lf.req_str("url")?;
        lf.finish(ctx);
        Ok(Some(Link { label, url }))
    })?;
    let mut labels = HashSet::new();
    for l in &links {
        if !labels.insert(l.label.as_str()) {
            return Err(invalid(
                join(path, "links"),
                format!("duplicate link label `{}`", l.label),
            ));
        }
    }
    f.finish(ctx);
    Ok(PersonalDetails {
        full_name,
        email,
        phone,
        location,
        links,
    })
}

fn education_entry(v: &Value, p: &str, ctx: &mut Ctx) -> Result<Option<EducationEntry>> {
    let mut f = Fields::new(v, p)?;
    let entry = EducationEntry {
        institution: f.req_str("institution")?,
        degree: f.req_str("degree")?,
        field_of_study: f.opt_str("field_of_study")?,
        start_date: f.str_or_empty("start_date")?,
        end_date: f.opt_str("end_date")?,
        gpa: f.opt_str("gpa")?,
        coursework: f.str_list("coursework", ctx)?,
    };
    f.finish(ctx);
    Ok(Some(entry))
}

fn experience_entry(v: &Value, p: &str, ctx: &mut Ctx) -> Result<Option<ExperienceEntry>> {
    let mut f = Fields::new(v, p)?;
    let entry = ExperienceEntry {
        employer: f.req_str("employer")?,
        role: f.req_str("role")?,
        location: f.opt_str("location")?,
        start_date: f.str_or_empty("start_date")?,
        end_date: f.opt_str("end_date")?,
        bullets: f.str_list("bullets", ctx)?,
    };
    if entry.bullets.is_empty() {
        return Err(invalid(join(p, "bullets"), "must not be empty"));
    }
    f.finish(ctx);
    Ok(Some(entry))
}

fn project_entry(v: &Value, p: &str, ctx: &mut Ctx) -> Result<Option<ProjectEntry>> {
    let mut f = Fields::new(v, p)?;
    let entry = ProjectEntry {
        name: f.req_str("name")?,
        link: f.opt_str("link")?,
        technologies: f.str_list("technologies", ctx)?,
        date_range: f.opt_str("date_range")?,
        bullets: f.str_list("bullets", ctx)?,
    };
    f.finish(ctx);
    Ok(Some(entry))
}

fn skill_group(v: &Value, p: &str, ctx: &mut Ctx) -> Result<Option<SkillGroup>> {
    let mut f = Fields::new(v, p)?;
    let category = f.req_str("category")?;
    let raw = f.str_list("skills", ctx)?;
    let before = raw.len();
    let skills = dedup_case_insensitive(raw);
    if skills.len() < before {
        ctx.warnings
            .push(format!("removed duplicate skills at `{}`", join(p, "skills")));
    }
    if skills.is_empty() {
        return Err(invalid(join(p, "skills"), "must not be empty"));
    }
    f.finish(ctx);
    Ok(Some(SkillGroup { category, skills }))
}

fn certification(v: &Value, p: &str, ctx: &mut Ctx) -> Result<Option<Certification>> {
    let mut f = Fields::new(v, p)?;
    let entry = Certification {
        name: f.req_str("name")?,
        issuer: f.opt_str("issuer")?,
        date: f.opt_str("date")?,
    };
    f.finish(ctx);
    Ok(Some(entry))
}

fn extra_section(v: &Value, p: &str, ctx: &mut Ctx) -> Result<Option<ExtraSection>> {
    let mut f = Fields::new(v, p)?;
    let entry = ExtraSection {
        title: f.req_str("title")?,
        bullets: f.str_list("bullets", ctx)?,
    };
    f.finish(ctx);
    Ok(Some(entry))
}

fn read_section(f: &mut Fields<'_>, kind: SectionKind, ctx: &mut Ctx) -> Result<SectionValue> {
    Ok(match kind {
        SectionKind::Summary => SectionValue::Summary(f.opt_str("summary")?),
        SectionKind::Education => {
            SectionValue::Education(f.list("education", ctx, education_entry)?)
        }
        SectionKind::WorkExperience => {
            SectionValue::WorkExperience(f.list("work_experience", ctx, experience_entry)?)
        }
        SectionKind::Projects => SectionValue::Projects(f.list("projects", ctx, project_entry)?),
        SectionKind::SkillGroups => {
            SectionValue::SkillGroups(f.list("skill_groups", ctx, skill_group)?)
        }
        SectionKind::Achievements => SectionValue::Achievements(f.str_list("achievements", ctx)?),
        SectionKind::Certifications => {
            SectionValue::Certifications(f.list("certifications", ctx, certification)?)
        }
        SectionKind::ExtraSections => {
            SectionValue::ExtraSections(f.list("extra_sections", ctx, extra_section)?)
        }
    })
}

/// Validates an untyped value into a [`ResumeDocument`].
pub fn validate_resume(candidate: &Value) -> Result<Validated<ResumeDocument>> {
    let mut ctx = Ctx::default();
    let mut f = Fields::new(candidate, "")?;
    let personal = match f.raw("personal") {
        None | Some(Value::Null) => return Err(SchemaError::MissingField("personal.full_name".into())),
        Some(v) => personal(v, "personal", &mut ctx)?,
    };
    let mut doc = ResumeDocument::new(personal);
    for kind in SectionKind::ALL {
        let section = read_section(&mut f, kind, &mut ctx)?;
        doc.set_section(section);
    }
    f.finish(&mut ctx);
    if SectionKind::ALL.iter().all(|k| doc.is_section_empty(*k)) {
        return Err(SchemaError::EmptyDocument);
    }
    Ok(Validated {
        value: doc,
        warnings: ctx.warnings,
    })
}

/// Validates a tailored section returned as `{"<section key>": ...}`.
///
/// The wrapper object must contain the expected key; other keys are dropped
/// with a warning.
pub fn validate_section(kind: SectionKind, candidate: &Value) -> Result<Validated<SectionValue>> {
    let mut ctx = Ctx::default();
    let mut f = Fields::new(candidate, "")?;
    if !f.map.contains_key(kind.key()) {
        return Err(SchemaError::MissingField(kind.key().into()));
    }
    let value = read_section(&mut f, kind, &mut ctx)?;
    f.finish(&mut ctx);
    Ok(Validated {
        value,
        warnings: ctx.warnings,
    })
}

/// Validates an untyped value into [`JobDetails`].
pub fn validate_job_details(candidate: &Value) -> Result<Validated<JobDetails>> {
    let mut ctx = Ctx::default();
    let mut f = Fields::new(candidate, "")?;
    let title = f.req_str("title")?;
    let raw_keywords = f.str_list("keywords", &mut ctx)?;
    let before = raw_keywords.len();
    let keywords = dedup_case_insensitive(raw_keywords);
    if keywords.len() < before {
        ctx.warnings.push("removed duplicate keywords".into());
    }
    let details = JobDetails {
        title,
        keywords,
        purpose: f.str_or_empty("purpose")?,
        responsibilities: f.str_list("responsibilities", &mut ctx)?,
        required_qualifications: f.str_list("required_qualifications", &mut ctx)?,
        preferred_qualifications: f.str_list("preferred_qualifications", &mut ctx)?,
        company_name: f.str_or_empty("company_name")?,
        company_info: f.str_or_empty("company_info")?,
    };
    f.finish(&mut ctx);
    Ok(Validated {
        value: details,
        warnings: ctx.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn materializes_empty_lists() {
        let v = json!({
            "personal": {"full_name": "A B", "email": "a@b.co"},
            "work_experience": [{"employer": "ACME", "role": "Dev", "start_date": "2020", "bullets": ["Built it"]}]
        });
        let doc = validate_resume(&v).unwrap().value;
        assert_eq!(doc.personal.full_name, "A B");
        assert!(doc.projects.is_empty());
        assert!(doc.achievements.is_empty());
        assert_eq!(doc.work_experience[0].end_date, None);
        let out = serde_json::to_value(&doc).unwrap();
        assert_eq!(out["projects"], json!([]));
        assert_eq!(out["achievements"], json!([]));
    }

    #[test]
    fn missing_full_name() {
        let v = json!({"personal": {"email": "a@b.co"}});
        assert_eq!(
            validate_resume(&v).unwrap_err(),
            SchemaError::MissingField("personal.full_name".into())
        );
        assert_eq!(
            validate_resume(&json!({})).unwrap_err(),
            SchemaError::MissingField("personal.full_name".into())
        );
    }

    #[test]
    fn empty_document() {
        let v = json!({"personal": {"full_name": "A B"}, "projects": []});
        assert_eq!(validate_resume(&v).unwrap_err(), SchemaError::EmptyDocument);
    }

    #[test]
    fn type_mismatch_paths() {
        let v = json!({"personal": {"full_name": "A"}, "projects": {"name": "x"}});
        assert_eq!(
            validate_resume(&v).unwrap_err(),
            SchemaError::TypeMismatch { path: "projects".into(), expected: "array" }
        );
        let v = json!({"personal": {"full_name": "A"}, "achievements": [["nested"]]});
        assert_eq!(
            validate_resume(&v).unwrap_err(),
            SchemaError::TypeMismatch { path: "achievements[0]".into(), expected: "string" }
        );
        assert!(matches!(
            validate_resume(&json!([1, 2])).unwrap_err(),
            SchemaError::TypeMismatch { .. }
        ));
    }

    #[test]
    fn unknown_keys_warned_and_dropped() {
        let v = json!({
            "personal": {"full_name": " A B ", "twitter": "@ab"},
            "achievements": ["  Won X  ", "   "],
            "hobbies": ["chess"]
        });
        let out = validate_resume(&v).unwrap();
        assert_eq!(out.value.personal.full_name, "A B");
        assert_eq!(out.value.achievements, vec!["Won X"]);
        assert_eq!(out.warnings.len(), 3, "{:?}", out.warnings);
        assert!(out.warnings.iter().any(|w| w.contains("personal.twitter")));
        assert!(out.warnings.iter().any(|w| w.contains("hobbies")));
    }

    #[test]
    fn personal_invariants() {
        let v = json!({"personal": {"full_name": "A", "email": "a@@b"}, "achievements": ["x"]});
        assert!(matches!(validate_resume(&v), Err(SchemaError::InvalidField { .. })));
        let v = json!({"personal": {"full_name": "A", "links": [
            {"label": "GitHub", "url": "u1"}, {"label": "GitHub", "url": "u2"}
        ]}, "achievements": ["x"]});
        assert!(matches!(validate_resume(&v), Err(SchemaError::InvalidField { .. })));
    }

    #[test]
    fn experience_needs_bullets_and_skills_dedup() {
        let v = json!({"personal": {"full_name": "A"},
            "work_experience": [{"employer": "E", "role": "R", "bullets": [" "]}]});
        assert!(matches!(validate_resume(&v), Err(SchemaError::InvalidField { .. })));
        let v = json!({"personal": {"full_name": "A"},
            "skill_groups": [{"category": "Lang", "skills": ["Rust", "rust", "Go", 3]}]});
        let doc = validate_resume(&v).unwrap().value;
        assert_eq!(doc.skill_groups[0].skills, vec!["Rust", "Go", "3"]);
    }

    #[test]
    fn job_details_dedup_and_defaults() {
        let v = json!({"title": "SWE", "keywords": ["Rust", "rust", "Go"]});
        let job = validate_job_details(&v).unwrap().value;
        assert_eq!(job.keywords, vec!["Rust", "Go"]);
        assert_eq!(job.purpose, "");
        assert!(job.responsibilities.is_empty());
        let out = serde_json::to_value(&job).unwrap();
        assert_eq!(out.as_object().unwrap().len(), 8);
        assert_eq!(
            validate_job_details(&json!({})).unwrap_err(),
            SchemaError::MissingField("title".into())
        );
    }

    #[test]
    fn section_wrapper_validation() {
        let v = json!({"achievements": ["A", "B"], "note": "x"});
        let out = validate_section(SectionKind::Achievements, &v).unwrap();
        assert_eq!(out.value, SectionValue::Achievements(vec!["A".into(), "B".into()]));
        assert_eq!(out.warnings.len(), 1);
        assert!(validate_section(SectionKind::Achievements, &json!({"x": []})).is_err());
        assert!(validate_section(SectionKind::WorkExperience, &json!({"work_experience": [["x"]]})).is_err());
        assert!(validate_section(SectionKind::WorkExperience, &json!([{"employer": "x"}])).is_err());
    }
}
