//! Rule-based stand-in for a chat model, used by the offline mock provider.
//!
//! It recognizes the prompt by the tagged data blocks the shipped templates
//! carry (`<resume_text>`, `<job_description>`, `<section_json>`,
//! `<user_data_json>`) and answers with JSON:
//!
//! * resume parsing: a line-oriented heuristic parser (see below);
//! * job extraction: heading-based parsing of the posting;
//! * section tailoring: the input section echoed back unchanged;
//! * cover letter: a short letter assembled from the supplied JSON.
//!
//! Plain-text resume conventions understood by the parser:
//!
//! ```text
//! Jane Doe
//! jane@example.com | +1 555 0100 | Tempe, AZ
//! GitHub: https://github.com/jane
//!
//! EDUCATION
//! Arizona State University | M.S. in Computer Science | Aug 2021 - May 2023 | GPA: 3.9
//! Coursework: Machine Learning, Databases
//!
//! WORK EXPERIENCE
//! ACME Inc. | Software Engineer | Phoenix, AZ | Jun 2023 - Present
//! - Built things
//!
//! PROJECTS
//! ResumeBot | Rust, Python | 2022 | https://github.com/jane/resumebot
//! - Did stuff
//!
//! SKILLS
//! Languages: Rust, Python
//!
//! ACHIEVEMENTS / CERTIFICATIONS (Name | Issuer | Date) / SUMMARY / anything else
//! ```

use serde_json::{json, Map, Value};

use super::{ChatRequest, LlmError, MockReply};
use crate::prompts::extract_block;

#[derive(Debug, Clone, Default)]
pub struct OfflineResponder;

impl OfflineResponder {
    pub fn respond(&self, request: &ChatRequest) -> MockReply {
        let user = &request.user_prompt;
        let reply = if let Some(section) = extract_block(user, "section_json") {
            // echo; the corrective suffix of a retry lies outside the block
            Some(section.to_owned())
        } else if let Some(data) = extract_block(user, "user_data_json") {
            let job = extract_block(user, "job_details_json").unwrap_or("{}");
            Some(cover_letter(data, job).to_string())
        } else if let Some(text) = extract_block(user, "resume_text") {
            Some(parse_resume_text(text).to_string())
        } else {
            extract_block(user, "job_description").map(|text| parse_job_text(text).to_string())
        };
        match reply {
            Some(text) => MockReply::Text(text),
            None => MockReply::Fail(LlmError::ProviderRefusal(
                "offline mock does not recognize this prompt".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heading {
    Summary,
    Education,
    Work,
    Projects,
    Skills,
    Achievements,
    Certifications,
}

fn heading_key(line: &str) -> String {
    line.trim()
        .trim_end_matches(':')
        .trim()
        .to_lowercase()
        .replace('&', "and")
}

fn known_heading(line: &str) -> Option<Heading> {
    let key = heading_key(line);
    let h = match key.as_str() {
        "summary" | "professional summary" | "profile" | "objective" | "about me" | "about" => Heading::Summary,
        "education" | "academic background" => Heading::Education,
        "work experience" | "experience" | "professional experience" | "employment" | "employment history"
        | "work history" => Heading::Work,
        "projects" | "personal projects" | "selected projects" | "academic projects" => Heading::Projects,
        "skills" | "technical skills" | "skills and tools" | "core skills" => Heading::Skills,
        "achievements" | "awards" | "honors" | "honors and awards" | "awards and achievements" | "accomplishments" => {
            Heading::Achievements
        }
        "certifications" | "certificates" | "licenses and certifications" => Heading::Certifications,
        _ => return None,
    };
    Some(h)
}

/// ALL-CAPS short lines outside the known set start an extra section.
fn is_generic_heading(line: &str) -> bool {
    let t = line.trim().trim_end_matches(':');
    let letters: Vec<char> = t.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 3
        && letters.iter().all(|c| c.is_uppercase())
        && t.split_whitespace().count() <= 5
        && !t.contains('|')
}

fn bullet_text(line: &str) -> Option<&str> {
    let t = line.trim_start();
    for marker in ["- ", "* ", "• ", "– ", "· "] {
        if let Some(rest) = t.strip_prefix(marker) {
            return Some(rest.trim());
        }
    }
    None
}

fn is_date_like(s: &str) -> bool {
    let lower = s.to_lowercase();
    s.chars().count() <= 40
        && (s.chars().any(|c| c.is_ascii_digit()) || lower.contains("present") || lower.contains("current"))
        && !s.contains("http")
        && !s.contains('@')
}

fn split_dates(s: &str) -> (String, Option<String>) {
    for sep in [" - ", " – ", " — ", " to "] {
        if let Some((a, b)) = s.split_once(sep) {
            let end = b.trim();
            let end = (!matches!(end.to_lowercase().as_str(), "present" | "current" | "now" | ""))
                .then(|| end.to_owned());
            return (a.trim().to_owned(), end);
        }
    }
    (s.trim().to_owned(), None)
}

fn pieces(line: &str) -> Vec<String> {
    line.split('|')
        .map(|p| p.trim().to_owned())
        .filter(|p| !p.is_empty())
        .collect()
}

fn comma_list(s: &str) -> Vec<String> {
    s.split([',', ';'])
        .map(|p| p.trim().to_owned())
        .filter(|p| !p.is_empty())
        .collect()
}

fn looks_like_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.") || s.contains(".com/")
}

fn looks_like_phone(s: &str) -> bool {
    let digits = s.chars().filter(|c| c.is_ascii_digit()).count();
    digits >= 7 && s.chars().all(|c| c.is_ascii_digit() || " +-().".contains(c))
}

fn link_label(url: &str) -> String {
    let host = url
        .trim_start_matches("https://")
        .trim_start_matches("http://")
        .trim_start_matches("www.")
        .split('/')
        .next()
        .unwrap_or(url);
    match host {
        h if h.contains("github") => "GitHub".into(),
        h if h.contains("linkedin") => "LinkedIn".into(),
        h => h.to_owned(),
    }
}

fn header_block(lines: &[&str]) -> Value {
    let mut non_empty = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty());
    let full_name = non_empty.next().unwrap_or_default();
    let mut personal = Map::new();
    personal.insert("full_name".into(), json!(full_name));
    let mut links: Vec<Value> = Vec::new();
    let mut leftovers = Vec::new();
    for line in non_empty {
        for piece in line.split(['|', '•', '·']).map(str::trim).filter(|p| !p.is_empty()) {
            let labelled = piece
                .split_once(": ")
                .filter(|(_, v)| looks_like_url(v.trim()));
            if let Some((label, url)) = labelled {
                links.push(json!({"label": label.trim(), "url": url.trim()}));
            } else if looks_like_url(piece) {
                links.push(json!({"label": link_label(piece), "url": piece}));
            } else if piece.contains('@') && !personal.contains_key("email") {
                personal.insert("email".into(), json!(piece));
            } else if looks_like_phone(piece) && !personal.contains_key("phone") {
                personal.insert("phone".into(), json!(piece));
            } else if !personal.contains_key("location") {
                personal.insert("location".into(), json!(piece));
            } else {
                leftovers.push(piece.to_owned());
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    links.retain(|l| seen.insert(l["label"].as_str().unwrap_or_default().to_owned()));
    personal.insert("links".into(), Value::Array(links));
    if !leftovers.is_empty() {
        personal.insert("location".into(), json!(format!(
            "{} {}",
            personal.get("location").and_then(Value::as_str).unwrap_or_default(),
            leftovers.join(" ")
        ).trim()));
    }
    Value::Object(personal)
}

/// Pipe-separated header fields, `Key: value` lines, bullets.
type Entry<'a> = (Vec<String>, Vec<(&'a str, &'a str)>, Vec<String>);

/// Groups a section's lines into entries: a non-bullet line opens an entry,
/// bullet lines and `Key: value` continuation lines attach to it.
fn entries<'a>(lines: &[&'a str]) -> Vec<Entry<'a>> {
    let mut out: Vec<Entry<'a>> = Vec::new();
    for line in lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty()) {
        if let Some(b) = bullet_text(line) {
            if let Some(last) = out.last_mut() {
                last.2.push(b.to_owned());
            }
            continue;
        }
        let continuation = line
            .split_once(':')
            .filter(|(k, _)| matches!(k.trim().to_lowercase().as_str(), "coursework" | "relevant coursework" | "technologies" | "tech stack" | "gpa" | "link"));
        match (continuation, out.last_mut()) {
            (Some((k, v)), Some(last)) => last.1.push((k.trim(), v.trim())),
            _ => out.push((pieces(line), Vec::new(), Vec::new())),
        }
    }
    out
}

fn education(lines: &[&str]) -> Vec<Value> {
    entries(lines)
        .into_iter()
        .map(|(head, extra, bullets)| {
            let mut e = Map::new();
            let mut rest = head.into_iter();
            e.insert("institution".into(), json!(rest.next().unwrap_or_default()));
            let mut coursework: Vec<String> = Vec::new();
            for p in rest {
                if let Some(gpa) = p.strip_prefix("GPA:").or_else(|| p.strip_prefix("GPA")) {
                    e.insert("gpa".into(), json!(gpa.trim()));
                } else if is_date_like(&p) && !e.contains_key("start_date") {
                    let (start, end) = split_dates(&p);
                    e.insert("start_date".into(), json!(start));
                    if let Some(end) = end {
                        e.insert("end_date".into(), json!(end));
                    }
                } else if !e.contains_key("degree") {
                    match p.split_once(" in ") {
                        Some((deg, field)) => {
                            e.insert("degree".into(), json!(deg.trim()));
                            e.insert("field_of_study".into(), json!(field.trim()));
                        }
                        None => {
                            e.insert("degree".into(), json!(p));
                        }
                    }
                } else {
                    coursework.push(p);
                }
            }
            e.entry("degree").or_insert(json!("Degree"));
            for (k, v) in extra {
                if k.eq_ignore_ascii_case("gpa") {
                    e.insert("gpa".into(), json!(v));
                } else {
                    coursework.extend(comma_list(v));
                }
            }
            coursework.extend(bullets);
            e.insert("coursework".into(), json!(coursework));
            Value::Object(e)
        })
        .collect()
}

fn work(lines: &[&str]) -> Vec<Value> {
    entries(lines)
        .into_iter()
        .map(|(head, _extra, bullets)| {
            let mut e = Map::new();
            let (dates, other): (Vec<String>, Vec<String>) = head.into_iter().partition(|p| is_date_like(p));
            let mut other = other.into_iter();
            e.insert("employer".into(), json!(other.next().unwrap_or_default()));
            e.insert("role".into(), json!(other.next().unwrap_or_default()));
            if let Some(loc) = other.next() {
                e.insert("location".into(), json!(loc));
            }
            let (start, end) = dates.first().map(|d| split_dates(d)).unwrap_or_default();
            e.insert("start_date".into(), json!(start));
            if let Some(end) = end {
                e.insert("end_date".into(), json!(end));
            }
            e.insert("bullets".into(), json!(bullets));
            Value::Object(e)
        })
        .collect()
}

fn projects(lines: &[&str]) -> Vec<Value> {
    entries(lines)
        .into_iter()
        .map(|(head, extra, bullets)| {
            let mut e = Map::new();
            let mut rest = head.into_iter();
            e.insert("name".into(), json!(rest.next().unwrap_or_default()));
            let mut technologies = Vec::new();
            for p in rest {
                if looks_like_url(&p) {
                    e.insert("link".into(), json!(p));
                } else if is_date_like(&p) && !e.contains_key("date_range") {
                    e.insert("date_range".into(), json!(p));
                } else {
                    technologies.extend(comma_list(&p));
                }
            }
            for (k, v) in extra {
                if k.eq_ignore_ascii_case("link") {
                    e.insert("link".into(), json!(v));
                } else {
                    technologies.extend(comma_list(v));
                }
            }
            e.insert("technologies".into(), json!(technologies));
            e.insert("bullets".into(), json!(bullets));
            Value::Object(e)
        })
        .collect()
}

fn skills(lines: &[&str]) -> Vec<Value> {
    lines
        .iter()
        .map(|l| bullet_text(l).unwrap_or(l).trim())
        .filter(|l| !l.is_empty())
        .map(|l| match l.split_once(':') {
            Some((cat, list)) => json!({"category": cat.trim(), "skills": comma_list(list)}),
            None => json!({"category": "Skills", "skills": comma_list(l)}),
        })
        .collect()
}

fn plain_items(lines: &[&str]) -> Vec<String> {
    lines
        .iter()
        .map(|l| bullet_text(l).unwrap_or(l).trim())
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

fn certifications(lines: &[&str]) -> Vec<Value> {
    plain_items(lines)
        .into_iter()
        .map(|l| {
            let mut p = pieces(&l).into_iter();
            let mut e = Map::new();
            e.insert("name".into(), json!(p.next().unwrap_or_default()));
            for piece in p {
                if is_date_like(&piece) {
                    e.insert("date".into(), json!(piece));
                } else {
                    e.insert("issuer".into(), json!(piece));
                }
            }
            Value::Object(e)
        })
        .collect()
}

/// Heuristic parse of a plain-text resume into the resume JSON shape.
pub fn parse_resume_text(text: &str) -> Value {
    let lines: Vec<&str> = text.lines().collect();
    let mut header_end = lines.len();
    for (i, l) in lines.iter().enumerate().skip(1) {
        if known_heading(l).is_some() || is_generic_heading(l) {
            header_end = i;
            break;
        }
    }
    let mut doc = Map::new();
    doc.insert("personal".into(), header_block(&lines[..header_end]));

    let mut sections: Vec<(Result<Heading, String>, Vec<&str>)> = Vec::new();
    for l in &lines[header_end..] {
        if let Some(h) = known_heading(l) {
            sections.push((Ok(h), Vec::new()));
        } else if is_generic_heading(l) {
            sections.push((Err(l.trim().trim_end_matches(':').to_owned()), Vec::new()));
        } else if let Some(last) = sections.last_mut() {
            last.1.push(l);
        }
    }

    let mut extra = Vec::new();
    let push_list = |doc: &mut Map<String, Value>, key: &str, items: Vec<Value>| {
        let slot = doc.entry(key).or_insert_with(|| json!([]));
        slot.as_array_mut().expect("array").extend(items);
    };
    for (heading, body) in sections {
        match heading {
            Ok(Heading::Summary) => {
                let s = plain_items(&body).join(" ");
                if !s.is_empty() {
                    doc.insert("summary".into(), json!(s));
                }
            }
            Ok(Heading::Education) => push_list(&mut doc, "education", education(&body)),
            Ok(Heading::Work) => push_list(&mut doc, "work_experience", work(&body)),
            Ok(Heading::Projects) => push_list(&mut doc, "projects", projects(&body)),
            Ok(Heading::Skills) => push_list(&mut doc, "skill_groups", skills(&body)),
            Ok(Heading::Achievements) => {
                push_list(&mut doc, "achievements", plain_items(&body).into_iter().map(Value::String).collect())
            }
            Ok(Heading::Certifications) => push_list(&mut doc, "certifications", certifications(&body)),
            Err(title) => extra.push(json!({"title": title, "bullets": plain_items(&body)})),
        }
    }
    doc.insert("extra_sections".into(), Value::Array(extra));
    Value::Object(doc)
}

#[derive(Clone, Copy, PartialEq)]
enum JobPart {
    Purpose,
    Responsibilities,
    Required,
    Preferred,
    Company,
    Keywords,
}

fn job_heading(line: &str) -> Option<JobPart> {
    let key = heading_key(line);
    let part = match key.as_str() {
        "about the role" | "overview" | "role overview" | "summary" | "purpose" | "the role" | "position summary" => {
            JobPart::Purpose
        }
        "responsibilities" | "key responsibilities" | "what you'll do" | "what you will do" | "duties" => {
            JobPart::Responsibilities
        }
        "requirements" | "required qualifications" | "qualifications" | "minimum qualifications"
        | "what you bring" | "basic qualifications" => JobPart::Required,
        "preferred qualifications" | "nice to have" | "nice-to-have" | "bonus points" | "preferred" => {
            JobPart::Preferred
        }
        "about us" | "about the company" | "company" | "who we are" => JobPart::Company,
        "keywords" | "skills" => JobPart::Keywords,
        k if k.starts_with("about ") => JobPart::Company,
        _ => return None,
    };
    Some(part)
}

const KEYWORD_STOPWORDS: &[&str] = &[
    "The", "A", "An", "And", "Or", "We", "You", "Our", "Your", "In", "On", "With", "For", "To", "Of", "Experience",
    "Strong", "Excellent", "Ability", "Familiarity", "Knowledge", "Proficiency", "Bachelor's", "Master's", "Degree",
    "Years", "Work", "Build", "Design", "Develop", "Collaborate", "Write", "Own", "Lead", "Help",
];

fn guess_keywords(items: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for item in items {
        let short = item.split_whitespace().count() <= 2;
        for (i, raw) in item.split_whitespace().enumerate() {
            let w = raw.trim_matches(|c: char| !c.is_alphanumeric() && c != '+' && c != '#');
            let distinctive = w.chars().next().is_some_and(|c| c.is_uppercase())
                || w.chars().any(|c| c.is_ascii_digit() || c == '+' || c == '#');
            if w.len() < 2 || !distinctive || (i == 0 && !short && !w.chars().skip(1).any(|c| c.is_uppercase())) {
                continue;
            }
            if KEYWORD_STOPWORDS.contains(&w) || out.iter().any(|k| k.eq_ignore_ascii_case(w)) {
                continue;
            }
            out.push(w.to_owned());
        }
    }
    out.truncate(20);
    out
}

/// Heading-based parse of a pasted job posting into the job-details JSON shape.
pub fn parse_job_text(text: &str) -> Value {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let first = lines.next().unwrap_or_default();
    let title = first
        .split_once(':')
        .filter(|(k, _)| heading_key(k).contains("title"))
        .map(|(_, v)| v.trim())
        .unwrap_or(first);

    let mut company_name = String::new();
    let mut part = JobPart::Purpose;
    let mut purpose = Vec::new();
    let mut responsibilities = Vec::new();
    let mut required = Vec::new();
    let mut preferred = Vec::new();
    let mut company_info = Vec::new();
    let mut keywords = Vec::new();
    for line in lines {
        if let Some((k, v)) = line.split_once(':') {
            if heading_key(k) == "company" && !v.trim().is_empty() {
                company_name = v.trim().to_owned();
                continue;
            }
        }
        if let Some(p) = job_heading(line) {
            if p == JobPart::Company && company_name.is_empty() {
                // "About Globex" names the company
                let heading = line.trim().trim_end_matches(':');
                let named = heading
                    .get(..6)
                    .is_some_and(|h| h.eq_ignore_ascii_case("about "))
                    .then(|| heading[6..].trim())
                    .filter(|n| !matches!(n.to_lowercase().as_str(), "us" | "the company"));
                if let Some(name) = named {
                    company_name = name.to_owned();
                }
            }
            part = p;
            continue;
        }
        let item = bullet_text(line).unwrap_or(line).to_owned();
        match part {
            JobPart::Purpose => purpose.push(item),
            JobPart::Responsibilities => responsibilities.push(item),
            JobPart::Required => required.push(item),
            JobPart::Preferred => preferred.push(item),
            JobPart::Company => company_info.push(item),
            JobPart::Keywords => keywords.extend(comma_list(&item)),
        }
    }
    if keywords.is_empty() {
        let pool: Vec<String> = required.iter().chain(&preferred).chain(&responsibilities).cloned().collect();
        keywords = guess_keywords(&pool);
    }
    json!({
        "title": title,
        "keywords": keywords,
        "purpose": purpose.join(" "),
        "responsibilities": responsibilities,
        "required_qualifications": required,
        "preferred_qualifications": preferred,
        "company_name": company_name,
        "company_info": company_info.join(" "),
    })
}

fn cover_letter(user_data: &str, job: &str) -> Value {
    let user: Value = serde_json::from_str(user_data).unwrap_or(Value::Null);
    let job: Value = serde_json::from_str(job).unwrap_or(Value::Null);
    let s = |v: &Value, p: &str| v.pointer(p).and_then(Value::as_str).unwrap_or_default().to_owned();
    let name = s(&user, "/personal/full_name");
    let title = s(&job, "/title");
    let company = s(&job, "/company_name");
    let team = if company.is_empty() {
        "Hiring Team".to_owned()
    } else {
        format!("{company} Hiring Team")
    };
    let mut body = vec![format!("Dear {team},")];
    body.push(format!(
        "I am writing to apply for the {} position{}.",
        if title.is_empty() { "open" } else { &title },
        if company.is_empty() { String::new() } else { format!(" at {company}") }
    ));
    let role = s(&user, "/work_experience/0/role");
    let employer = s(&user, "/work_experience/0/employer");
    if !role.is_empty() {
        body.push(format!("In my role as {role} at {employer}, {}", s(&user, "/work_experience/0/bullets/0")));
    }
    let skills: Vec<String> = user
        .pointer("/skill_groups")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|g| g.get("skills").and_then(Value::as_array))
        .flatten()
        .filter_map(Value::as_str)
        .take(6)
        .map(str::to_owned)
        .collect();
    if !skills.is_empty() {
        body.push(format!("I bring hands-on experience with {}.", skills.join(", ")));
    }
    body.push("Thank you for your consideration.".into());
    body.push(format!("Sincerely,\n{name}"));
    json!({"cover_letter": body.join("\n\n")})
}
