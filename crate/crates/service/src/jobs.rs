//! Job records and their JSON-lines journal.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use resumeflow_core::schema::{ScoreReport, SectionProvenance};
use resumeflow_core::TailorOptions;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub const INTERRUPTED: &str = "interrupted by service restart";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JobState {
    Queued,
    ExtractingUser,
    ExtractingJob,
    Tailoring,
    Scoring,
    Rendering,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    UserDataJson,
    JobDetailsJson,
    TailoredJson,
    ScoreJson,
    Tex,
    Pdf,
    Md,
    CoverLetterMd,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 8] = [
        ArtifactKind::UserDataJson,
        ArtifactKind::JobDetailsJson,
        ArtifactKind::TailoredJson,
        ArtifactKind::ScoreJson,
        ArtifactKind::Tex,
        ArtifactKind::Pdf,
        ArtifactKind::Md,
        ArtifactKind::CoverLetterMd,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ArtifactKind::UserDataJson => "user_data_json",
            ArtifactKind::JobDetailsJson => "job_details_json",
            ArtifactKind::TailoredJson => "tailored_json",
            ArtifactKind::ScoreJson => "score_json",
            ArtifactKind::Tex => "tex",
            ArtifactKind::Pdf => "pdf",
            ArtifactKind::Md => "md",
            ArtifactKind::CoverLetterMd => "cover_letter_md",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            ArtifactKind::UserDataJson => "user_data.json",
            ArtifactKind::JobDetailsJson => "job_details.json",
            ArtifactKind::TailoredJson => "tailored.json",
            ArtifactKind::ScoreJson => "score.json",
            ArtifactKind::Tex => "resume.tex",
            ArtifactKind::Pdf => "resume.pdf",
            ArtifactKind::Md => "resume.md",
            ArtifactKind::CoverLetterMd => "cover_letter.md",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ArtifactKind::UserDataJson
            | ArtifactKind::JobDetailsJson
            | ArtifactKind::TailoredJson
            | ArtifactKind::ScoreJson => "application/json",
            ArtifactKind::Tex => "application/x-tex",
            ArtifactKind::Pdf => "application/pdf",
            ArtifactKind::Md | ArtifactKind::CoverLetterMd => "text/markdown; charset=utf-8",
        }
    }
}

impl FromStr for ArtifactKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        ArtifactKind::ALL.into_iter().find(|k| k.key() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineJob {
    pub id: Uuid,
    pub state: JobState,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub options: TailorOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub artifacts: BTreeMap<ArtifactKind, PathBuf>,
    /// Why an artifact kind is missing from a finished job, e.g. `pdf` →
    /// `latex_engine_absent`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub missing_artifacts: BTreeMap<ArtifactKind, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<SectionProvenance>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PipelineJob {
    pub fn queued(options: TailorOptions) -> Self {
        let now = Utc::now();
        PipelineJob {
            id: Uuid::new_v4(),
            state: JobState::Queued,
            created_at: now,
            updated_at: now,
            options,
            error: None,
            artifacts: BTreeMap::new(),
            missing_artifacts: BTreeMap::new(),
            score: None,
            provenance: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

/// In-memory job index backed by an append-only journal of job snapshots.
pub struct JobStore {
    jobs: RwLock<HashMap<Uuid, PipelineJob>>,
    journal: Mutex<File>,
    data_dir: PathBuf,
}

const JOURNAL: &str = "jobs.jsonl";

impl JobStore {
    /// Replays the journal in `data_dir`. Jobs that were still running are
    /// marked failed, and the journal is compacted to one line per job.
    pub fn open(data_dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(data_dir.join("artifacts"))?;
        let path = data_dir.join(JOURNAL);
        let mut jobs: HashMap<Uuid, PipelineJob> = HashMap::new();
        if path.exists() {
            for (n, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<PipelineJob>(&line) {
                    Ok(job) => {
                        jobs.insert(job.id, job);
                    }
                    // a torn final write after a crash
                    Err(e) => tracing::warn!(line = n + 1, error = %e, "skipping unreadable journal line"),
                }
            }
        }
        let now = Utc::now();
        for job in jobs.values_mut().filter(|j| !j.state.is_terminal()) {
            job.state = JobState::Failed;
            job.error = Some(INTERRUPTED.to_owned());
            job.updated_at = now;
        }

        let tmp = data_dir.join(format!("{JOURNAL}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            let mut ordered: Vec<&PipelineJob> = jobs.values().collect();
            ordered.sort_by_key(|j| j.created_at);
            for job in ordered {
                writeln!(f, "{}", serde_json::to_string(job)?)?;
            }
            f.sync_all()?;
        }
        std::fs::rename(&tmp, &path)?;
        let journal = OpenOptions::new().append(true).open(&path)?;
        Ok(JobStore {
            jobs: RwLock::new(jobs),
            journal: Mutex::new(journal),
            data_dir: data_dir.to_owned(),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn artifact_dir(&self, id: Uuid) -> PathBuf {
        self.data_dir.join("artifacts").join(id.to_string())
    }

    fn append(&self, job: &PipelineJob) {
        let line = serde_json::to_string(job).expect("job serializes");
        let mut f = self.journal.lock().unwrap();
        if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
            tracing::error!(error = %e, job = %job.id, "journal write failed");
        }
    }

    pub fn insert(&self, job: PipelineJob) {
        self.append(&job);
        self.jobs.write().unwrap().insert(job.id, job);
    }

    pub fn get(&self, id: Uuid) -> Option<PipelineJob> {
        self.jobs.read().unwrap().get(&id).cloned()
    }

    pub fn count(&self, state: JobState) -> usize {
        self.jobs.read().unwrap().values().filter(|j| j.state == state).count()
    }

    /// Applies `f` to a non-terminal job and journals the result. Finished
    /// jobs are immutable; for them this is a no-op returning `None`.
    pub fn update(&self, id: Uuid, f: impl FnOnce(&mut PipelineJob)) -> Option<PipelineJob> {
        let snapshot = {
            let mut jobs = self.jobs.write().unwrap();
            let job = jobs.get_mut(&id)?;
            if job.state.is_terminal() {
                return None;
            }
            let before = job.state;
            f(job);
            // states only move forward
            if job.state < before {
                job.state = before;
            }
            job.updated_at = Utc::now();
            job.clone()
        };
        self.append(&snapshot);
        Some(snapshot)
    }

    pub fn advance(&self, id: Uuid, state: JobState) {
        self.update(id, |j| j.state = state);
    }

    pub fn fail(&self, id: Uuid, error: impl Into<String>) {
        let error = error.into();
        self.update(id, |j| {
            j.state = JobState::Failed;
            j.error = Some(error);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use resumeflow_core::{ModelSpec, Provider};

    fn opts() -> TailorOptions {
        TailorOptions::new(ModelSpec::default_for(Provider::Mock))
    }

    #[test]
    fn states_are_ordered_and_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let store = JobStore::open(dir.path()).unwrap();
        let job = PipelineJob::queued(opts());
        let id = job.id;
        store.insert(job);
        store.advance(id, JobState::Tailoring);
        store.advance(id, JobState::ExtractingUser);
        assert_eq!(store.get(id).unwrap().state, JobState::Tailoring);
        store.advance(id, JobState::Done);
        assert!(store.update(id, |j| j.state = JobState::Failed).is_none());
        assert_eq!(store.get(id).unwrap().state, JobState::Done);
    }

    #[test]
    fn reopen_fails_in_flight_jobs() {
        let dir = tempfile::tempdir().unwrap();
        let (done, running) = {
            let store = JobStore::open(dir.path()).unwrap();
            let a = PipelineJob::queued(opts());
            let b = PipelineJob::queued(opts());
            let ids = (a.id, b.id);
            store.insert(a);
            store.insert(b);
            store.advance(ids.0, JobState::Done);
            store.advance(ids.1, JobState::Tailoring);
            ids
        };
        std::fs::OpenOptions::new()
            .append(true)
            .open(dir.path().join(JOURNAL))
            .unwrap()
            .write_all(b"{\"id\": \"torn")
            .unwrap();
        let store = JobStore::open(dir.path()).unwrap();
        assert_eq!(store.get(done).unwrap().state, JobState::Done);
        let r = store.get(running).unwrap();
        assert_eq!(r.state, JobState::Failed);
        assert_eq!(r.error.as_deref(), Some(INTERRUPTED));
        let lines = std::fs::read_to_string(dir.path().join(JOURNAL)).unwrap();
        assert_eq!(lines.lines().count(), 2);
    }

    #[test]
    fn artifact_kind_keys() {
        for k in ArtifactKind::ALL {
            assert_eq!(k.key().parse::<ArtifactKind>(), Ok(k));
            assert_eq!(serde_json::to_value(k).unwrap(), k.key());
        }
        assert!("docx".parse::<ArtifactKind>().is_err());
    }
}
