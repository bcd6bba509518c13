//! Generators for valid schema values.
#![allow(dead_code)]

use std::collections::HashSet;

use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;
use resumeflow_core::schema::*;

/// Trimmed, non-empty text including LaTeX-special and non-ASCII characters.
pub fn text() -> impl Strategy<Value = String> {
    "[A-Za-zé0-9][A-Za-z0-9 éüß.,'&%$#_{}~^\\\\()-]{0,24}".prop_map(|s| s.trim().to_owned())
}

fn texts(max: usize) -> impl Strategy<Value = Vec<String>> {
    vec(text(), 0..max)
}

fn nonempty_texts(max: usize) -> impl Strategy<Value = Vec<String>> {
    vec(text(), 1..max)
}

fn dedup_ci(items: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|s| seen.insert(s.to_lowercase())).collect()
}

pub fn personal() -> impl Strategy<Value = PersonalDetails> {
    (
        text(),
        option::of("[a-z]{1,8}(\\.[a-z]{1,5})?@[a-z]{1,8}\\.(com|org|io)"),
        option::of("\\+?[0-9]{3}[ -][0-9]{3}[ -][0-9]{4}"),
        option::of(text()),
        vec((text(), "https://[a-z]{3,10}\\.com/[a-z0-9_~%-]{0,10}"), 0..3),
    )
        .prop_map(|(full_name, email, phone, location, links)| {
            let mut seen = HashSet::new();
            let links = links
                .into_iter()
                .filter(|(label, _)| seen.insert(label.clone()))
                .map(|(label, url)| Link { label, url })
                .collect();
            PersonalDetails {
                full_name,
                email,
                phone,
                location,
                links,
            }
        })
}

fn education() -> impl Strategy<Value = EducationEntry> {
    (
        text(),
        text(),
        option::of(text()),
        prop_oneof![Just(String::new()), text()],
        option::of(text()),
        option::of("[0-4]\\.[0-9]{1,2}"),
        texts(4),
    )
        .prop_map(|(institution, degree, field_of_study, start_date, end_date, gpa, coursework)| EducationEntry {
            institution,
            degree,
            field_of_study,
            start_date,
            end_date,
            gpa,
            coursework,
        })
}

fn experience() -> impl Strategy<Value = ExperienceEntry> {
    (text(), text(), option::of(text()), text(), option::of(text()), nonempty_texts(5)).prop_map(
        |(employer, role, location, start_date, end_date, bullets)| ExperienceEntry {
            employer,
            role,
            location,
            start_date,
            end_date,
            bullets,
        },
    )
}

fn project() -> impl Strategy<Value = ProjectEntry> {
    (text(), option::of(text()), texts(4), option::of(text()), texts(4)).prop_map(
        |(name, link, technologies, date_range, bullets)| ProjectEntry {
            name,
            link,
            technologies,
            date_range,
            bullets,
        },
    )
}

fn skill_group() -> impl Strategy<Value = SkillGroup> {
    (text(), nonempty_texts(6)).prop_map(|(category, skills)| SkillGroup {
        category,
        skills: dedup_ci(skills),
    })
}

fn certification() -> impl Strategy<Value = Certification> {
    (text(), option::of(text()), option::of(text())).prop_map(|(name, issuer, date)| Certification { name, issuer, date })
}

fn extra() -> impl Strategy<Value = ExtraSection> {
    (text(), texts(4)).prop_map(|(title, bullets)| ExtraSection { title, bullets })
}

/// Valid documents; at least the summary or one list section is non-empty.
pub fn resume() -> impl Strategy<Value = ResumeDocument> {
    (
        personal(),
        option::of(text()),
        vec(education(), 0..3),
        vec(experience(), 0..3),
        vec(project(), 0..3),
        vec(skill_group(), 0..3),
        texts(3),
        vec(certification(), 0..3),
        vec(extra(), 0..2),
    )
        .prop_map(
            |(personal, summary, education, work_experience, projects, skill_groups, achievements, certifications, extra_sections)| {
                let mut d = ResumeDocument {
                    personal,
                    summary,
                    education,
                    work_experience,
                    projects,
                    skill_groups,
                    achievements,
                    certifications,
                    extra_sections,
                };
                if SectionKind::ALL.iter().all(|k| d.is_section_empty(*k)) {
                    d.summary = Some("Engineer".into());
                }
                d
            },
        )
}

pub fn job() -> impl Strategy<Value = JobDetails> {
    (text(), texts(8), prop_oneof![Just(String::new()), text()], texts(4), texts(4), texts(4), prop_oneof![Just(String::new()), text()], prop_oneof![Just(String::new()), text()])
        .prop_map(
            |(title, keywords, purpose, responsibilities, required_qualifications, preferred_qualifications, company_name, company_info)| {
                JobDetails {
                    title,
                    keywords: dedup_ci(keywords),
                    purpose,
                    responsibilities,
                    required_qualifications,
                    preferred_qualifications,
                    company_name,
                    company_info,
                }
            },
        )
}
