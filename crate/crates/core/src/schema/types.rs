use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub label: String,
    pub url: String,
}

/// Identity block of a resume. Never sent to a tailoring model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonalDetails {
    pub full_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phone: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default)]
    pub links: Vec<Link>,
}

impl PersonalDetails {
    pub fn named(full_name: impl Into<String>) -> Self {
        PersonalDetails {
            full_name: full_name.into(),
            email: None,
            phone: None,
            location: None,
            links: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EducationEntry {
    pub institution: String,
    pub degree: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_of_study: Option<String>,
    /// Free-form, preserved verbatim ("Fall 2021", "2019").
    #[serde(default)]
    pub start_date: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpa: Option<String>,
    #[serde(default)]
    pub coursework: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperienceEntry {
    pub employer: String,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default)]
    pub start_date: String,
    /// `None` means the position is current.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_date: Option<String>,
    pub bullets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
    #[serde(default)]
    pub technologies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_range: Option<String>,
    #[serde(default)]
    pub bullets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillGroup {
    pub category: String,
    pub skills: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certification {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraSection {
    pub title: String,
    #[serde(default)]
    pub bullets: Vec<String>,
}

/// Structured resume. Field order is the canonical section order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeDocument {
    pub personal: PersonalDetails,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default)]
    pub education: Vec<EducationEntry>,
    #[serde(default)]
    pub work_experience: Vec<ExperienceEntry>,
    #[serde(default)]
    pub projects: Vec<ProjectEntry>,
    #[serde(default)]
    pub skill_groups: Vec<SkillGroup>,
    #[serde(default)]
    pub achievements: Vec<String>,
    #[serde(default)]
    pub certifications: Vec<Certification>,
    #[serde(default)]
    pub extra_sections: Vec<ExtraSection>,
}

impl ResumeDocument {
    pub fn new(personal: PersonalDetails) -> Self {
        ResumeDocument {
            personal,
            summary: None,
            education: Vec::new(),
            work_experience: Vec::new(),
            projects: Vec::new(),
            skill_groups: Vec::new(),
            achievements: Vec::new(),
            certifications: Vec::new(),
            extra_sections: Vec::new(),
        }
    }

    pub fn is_section_empty(&self, kind: SectionKind) -> bool {
        match kind {
            SectionKind::Summary => self.summary.is_none(),
            SectionKind::Education => self.education.is_empty(),
            SectionKind::WorkExperience => self.work_experience.is_empty(),
            SectionKind::Projects => self.projects.is_empty(),
            SectionKind::SkillGroups => self.skill_groups.is_empty(),
            SectionKind::Achievements => self.achievements.is_empty(),
            SectionKind::Certifications => self.certifications.is_empty(),
            SectionKind::ExtraSections => self.extra_sections.is_empty(),
        }
    }

    /// Clones one section out of the document.
    pub fn section(&self, kind: SectionKind) -> SectionValue {
        match kind {
            SectionKind::Summary => SectionValue::Summary(self.summary.clone()),
            SectionKind::Education => SectionValue::Education(self.education.clone()),
            SectionKind::WorkExperience => SectionValue::WorkExperience(self.work_experience.clone()),
            SectionKind::Projects => SectionValue::Projects(self.projects.clone()),
            SectionKind::SkillGroups => SectionValue::SkillGroups(self.skill_groups.clone()),
            SectionKind::Achievements => SectionValue::Achievements(self.achievements.clone()),
            SectionKind::Certifications => SectionValue::Certifications(self.certifications.clone()),
            SectionKind::ExtraSections => SectionValue::ExtraSections(self.extra_sections.clone()),
        }
    }

    pub fn set_section(&mut self, value: SectionValue) {
        match value {
            SectionValue::Summary(v) => self.summary = v,
            SectionValue::Education(v) => self.education = v,
            SectionValue::WorkExperience(v) => self.work_experience = v,
            SectionValue::Projects(v) => self.projects = v,
            SectionValue::SkillGroups(v) => self.skill_groups = v,
            SectionValue::Achievements(v) => self.achievements = v,
            SectionValue::Certifications(v) => self.certifications = v,
            SectionValue::ExtraSections(v) => self.extra_sections = v,
        }
    }
}

/// The non-personal resume sections, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Summary,
    Education,
    WorkExperience,
    Projects,
    SkillGroups,
    Achievements,
    Certifications,
    ExtraSections,
}

impl SectionKind {
    pub const ALL: [SectionKind; 8] = [
        SectionKind::Summary,
        SectionKind::Education,
        SectionKind::WorkExperience,
        SectionKind::Projects,
        SectionKind::SkillGroups,
        SectionKind::Achievements,
        SectionKind::Certifications,
        SectionKind::ExtraSections,
    ];

    /// JSON field name of the section.
    pub fn key(self) -> &'static str {
        match self {
            SectionKind::Summary => "summary",
            SectionKind::Education => "education",
            SectionKind::WorkExperience => "work_experience",
            SectionKind::Projects => "projects",
            SectionKind::SkillGroups => "skill_groups",
            SectionKind::Achievements => "achievements",
            SectionKind::Certifications => "certifications",
            SectionKind::ExtraSections => "extra_sections",
        }
    }

    /// Human heading used by renderers.
    pub fn title(self) -> &'static str {
        match self {
            SectionKind::Summary => "Summary",
            SectionKind::Education => "Education",
            SectionKind::WorkExperience => "Work Experience",
            SectionKind::Projects => "Projects",
            SectionKind::SkillGroups => "Skills",
            SectionKind::Achievements => "Achievements",
            SectionKind::Certifications => "Certifications",
            SectionKind::ExtraSections => "Additional",
        }
    }

    pub fn from_key(key: &str) -> Option<SectionKind> {
        SectionKind::ALL.into_iter().find(|k| k.key() == key)
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One section's content, detached from its document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SectionValue {
    Summary(Option<String>),
    Education(Vec<EducationEntry>),
    WorkExperience(Vec<ExperienceEntry>),
    Projects(Vec<ProjectEntry>),
    SkillGroups(Vec<SkillGroup>),
    Achievements(Vec<String>),
    Certifications(Vec<Certification>),
    ExtraSections(Vec<ExtraSection>),
}

impl SectionValue {
    pub fn kind(&self) -> SectionKind {
        match self {
            SectionValue::Summary(_) => SectionKind::Summary,
            SectionValue::Education(_) => SectionKind::Education,
            SectionValue::WorkExperience(_) => SectionKind::WorkExperience,
            SectionValue::Projects(_) => SectionKind::Projects,
            SectionValue::SkillGroups(_) => SectionKind::SkillGroups,
            SectionValue::Achievements(_) => SectionKind::Achievements,
            SectionValue::Certifications(_) => SectionKind::Certifications,
            SectionValue::ExtraSections(_) => SectionKind::ExtraSections,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SectionValue::Summary(v) => v.is_none(),
            SectionValue::Education(v) => v.is_empty(),
            SectionValue::WorkExperience(v) => v.is_empty(),
            SectionValue::Projects(v) => v.is_empty(),
            SectionValue::SkillGroups(v) => v.is_empty(),
            SectionValue::Achievements(v) => v.is_empty(),
            SectionValue::Certifications(v) => v.is_empty(),
            SectionValue::ExtraSections(v) => v.is_empty(),
        }
    }

    /// The bare JSON value of the section (string, or array of entries).
    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            SectionValue::Summary(v) => serde_json::to_value(v),
            SectionValue::Education(v) => serde_json::to_value(v),
            SectionValue::WorkExperience(v) => serde_json::to_value(v),
            SectionValue::Projects(v) => serde_json::to_value(v),
            SectionValue::SkillGroups(v) => serde_json::to_value(v),
            SectionValue::Achievements(v) => serde_json::to_value(v),
            SectionValue::Certifications(v) => serde_json::to_value(v),
            SectionValue::ExtraSections(v) => serde_json::to_value(v),
        };
        v.expect("section types always serialize")
    }

    /// `{"<section key>": <section json>}`, the shape exchanged with the tailoring model.
    pub fn to_wrapped_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert(self.kind().key().to_owned(), self.to_json());
        serde_json::Value::Object(map)
    }
}

/// Structured extract of a job posting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobDetails {
    pub title: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub purpose: String,
    #[serde(default)]
    pub responsibilities: Vec<String>,
    #[serde(default)]
    pub required_qualifications: Vec<String>,
    #[serde(default)]
    pub preferred_qualifications: Vec<String>,
    #[serde(default)]
    pub company_name: String,
    #[serde(default)]
    pub company_info: String,
}

impl JobDetails {
    pub fn titled(title: impl Into<String>) -> Self {
        JobDetails {
            title: title.into(),
            keywords: Vec::new(),
            purpose: String::new(),
            responsibilities: Vec::new(),
            required_qualifications: Vec::new(),
            preferred_qualifications: Vec::new(),
            company_name: String::new(),
            company_info: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionOutcome {
    Tailored,
    /// Tailoring failed; the original section content was kept.
    FallbackToOriginal,
}

/// How one section of a tailored resume was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionProvenance {
    pub section: SectionKind,
    pub model_id: String,
    pub prompt_id: String,
    pub timestamp: DateTime<Utc>,
    pub outcome: SectionOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedEntry {
    pub section: SectionKind,
    pub entry_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailoredResume {
    pub resume: ResumeDocument,
    pub provenance: Vec<SectionProvenance>,
    #[serde(default)]
    pub flagged_entries: Vec<FlaggedEntry>,
}

impl TailoredResume {
    /// Wraps an untailored resume, e.g. for rendering a parsed document as is.
    pub fn untouched(resume: ResumeDocument) -> Self {
        TailoredResume {
            resume,
            provenance: Vec::new(),
            flagged_entries: Vec::new(),
        }
    }

    pub fn provenance_for(&self, kind: SectionKind) -> Option<&SectionProvenance> {
        self.provenance.iter().find(|p| p.section == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub job_alignment_token: f64,
    pub content_preservation_token: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job_alignment_latent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_preservation_latent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder_id: Option<String>,
    pub tokenizer_version: String,
    pub hallucination_risk: bool,
    #[serde(default)]
    pub flagged_entries: Vec<FlaggedEntry>,
}
