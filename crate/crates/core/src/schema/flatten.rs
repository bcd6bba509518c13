//! Canonical plain-text flattening of structured documents.
//!
//! One non-empty textual field per line, in schema field order, list items in
//! list order. This is the text the metrics measure for generated resumes.

use super::types::*;

struct Lines(Vec<String>);

impl Lines {
    fn push(&mut self, s: &str) {
        if !s.is_empty() {
            self.0.push(s.to_owned());
        }
    }

    fn opt(&mut self, s: &Option<String>) {
        if let Some(s) = s {
            self.push(s);
        }
    }

    fn all(&mut self, items: &[String]) {
        for s in items {
            self.push(s);
        }
    }
}

pub fn canonical_flatten(doc: &ResumeDocument) -> String {
    let mut out = Lines(Vec::new());
    let p = &doc.personal;
    out.push(&p.full_name);
    out.opt(&p.email);
    out.opt(&p.phone);
    out.opt(&p.location);
    for link in &p.links {
        out.push(&link.label);
        out.push(&link.url);
    }
    out.opt(&doc.summary);
    for e in &doc.education {
        out.push(&e.institution);
        out.push(&e.degree);
        out.opt(&e.field_of_study);
        out.push(&e.start_date);
        out.opt(&e.end_date);
        out.opt(&e.gpa);
        out.all(&e.coursework);
    }
    for e in &doc.work_experience {
        out.push(&e.employer);
        out.push(&e.role);
        out.opt(&e.location);
        out.push(&e.start_date);
        out.opt(&e.end_date);
        out.all(&e.bullets);
    }
    for e in &doc.projects {
        out.push(&e.name);
        out.opt(&e.link);
        out.all(&e.technologies);
        out.opt(&e.date_range);
        out.all(&e.bullets);
    }
    for g in &doc.skill_groups {
        out.push(&g.category);
        out.all(&g.skills);
    }
    out.all(&doc.achievements);
    for c in &doc.certifications {
        out.push(&c.name);
        out.opt(&c.issuer);
        out.opt(&c.date);
    }
    for s in &doc.extra_sections {
        out.push(&s.title);
        out.all(&s.bullets);
    }
    out.0.join("\n")
}

/// Flattening of [`JobDetails`] for display and diagnostics.
pub fn flatten_job(details: &JobDetails) -> String {
    let mut out = Lines(Vec::new());
    out.push(&details.title);
    out.all(&details.keywords);
    out.push(&details.purpose);
    out.all(&details.responsibilities);
    out.all(&details.required_qualifications);
    out.all(&details.preferred_qualifications);
    out.push(&details.company_name);
    out.push(&details.company_info);
    out.0.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let mut doc = ResumeDocument::new(PersonalDetails::named("A B"));
        doc.achievements.push("Won X".into());
        assert_eq!(canonical_flatten(&doc), "A B\nWon X");
    }

    #[test]
    fn permuting_achievements_permutes_lines() {
        let mut doc = ResumeDocument::new(PersonalDetails::named("A B"));
        doc.achievements = vec!["One".into(), "Two".into(), "Three".into()];
        let before: Vec<String> = canonical_flatten(&doc).lines().map(String::from).collect();
        doc.achievements.swap(0, 2);
        let after: Vec<String> = canonical_flatten(&doc).lines().map(String::from).collect();
        assert_eq!(before.len(), after.len());
        let diffs: Vec<usize> = (0..before.len()).filter(|&i| before[i] != after[i]).collect();
        assert_eq!(diffs.len(), 2);
        assert_eq!(before[diffs[0]], after[diffs[1]]);
        assert_eq!(before[diffs[1]], after[diffs[0]]);
    }

    #[test]
    fn job_flatten_order() {
        let mut job = JobDetails::titled("SWE");
        job.keywords = vec!["Rust".into()];
        job.purpose = "Build things".into();
        job.company_name = "ACME".into();
        assert_eq!(flatten_job(&job), "SWE\nRust\nBuild things\nACME");
        let mut swapped = job.clone();
        swapped.keywords = vec!["Go".into(), "Rust".into()];
        assert_eq!(flatten_job(&swapped), "SWE\nGo\nRust\nBuild things\nACME");
    }
}
