//! Turning uploaded resumes (PDF or plain text) into normalized text.

use std::panic;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Default upload ceiling: 10 MiB.
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 10 * 1024 * 1024;

/// Separator placed between page texts.
pub const PAGE_SEPARATOR: char = '\u{000C}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    PdfUpload,
    PlainText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub origin: Origin,
    pub raw_text: String,
    /// Zero for plain text.
    pub page_count: usize,
    pub byte_size: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("input is not a PDF document")]
    NotAPdf,
    #[error("PDF is encrypted; remove the password and upload again")]
    EncryptedPdf,
    #[error("PDF contains no extractable text (image-only scans are not supported, OCR is not performed)")]
    NoExtractableText,
    #[error("PDF could not be read: {0}")]
    MalformedPdf(String),
    #[error("input is empty")]
    EmptyInput,
    #[error("input is not valid UTF-8 text")]
    NotUtf8,
    #[error("input of {size} bytes exceeds the {limit} byte limit")]
    TooLarge { size: usize, limit: usize },
}

pub fn is_pdf(bytes: &[u8]) -> bool {
    bytes.starts_with(b"%PDF-")
}

/// Extracts text page by page; pages are joined with a form feed.
pub fn extract_pdf_text(bytes: &[u8]) -> Result<SourceDocument, IngestError> {
    if !is_pdf(bytes) {
        return Err(IngestError::NotAPdf);
    }
    let doc = lopdf::Document::load_mem(bytes).map_err(|e| IngestError::MalformedPdf(e.to_string()))?;
    let encrypted = doc.is_encrypted();
    drop(doc);

    // pdf-extract panics on some malformed inputs
    let pages = panic::catch_unwind(|| pdf_extract::extract_text_from_mem_by_pages(bytes));
    let pages = match pages {
        Ok(Ok(pages)) => pages,
        Ok(Err(_)) | Err(_) if encrypted => return Err(IngestError::EncryptedPdf),
        Ok(Err(e)) => return Err(IngestError::MalformedPdf(e.to_string())),
        Err(_) => return Err(IngestError::MalformedPdf("text extraction aborted".into())),
    };

    let page_count = pages.len();
    let texts: Vec<String> = pages
        .iter()
        .map(|p| normalize_text(p).trim().to_owned())
        .collect();
    if texts.iter().all(|t| t.is_empty()) {
        return Err(IngestError::NoExtractableText);
    }
    let sep = PAGE_SEPARATOR.to_string();
    Ok(SourceDocument {
        origin: Origin::PdfUpload,
        raw_text: texts.join(&sep),
        page_count,
        byte_size: bytes.len(),
    })
}

/// Wraps plain text input; no extraction step.
pub fn from_plain_text(text: &str) -> Result<SourceDocument, IngestError> {
    let normalized = normalize_text(text);
    if normalized.trim().is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(SourceDocument {
        origin: Origin::PlainText,
        raw_text: normalized,
        page_count: 0,
        byte_size: text.len(),
    })
}

/// Sniffs the payload: PDF magic selects extraction, anything else must be UTF-8 text.
pub fn ingest_bytes(bytes: &[u8], limit: usize) -> Result<SourceDocument, IngestError> {
    if bytes.len() > limit {
        return Err(IngestError::TooLarge {
            size: bytes.len(),
            limit,
        });
    }
    if bytes.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    if is_pdf(bytes) {
        return extract_pdf_text(bytes);
    }
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    from_plain_text(text)
}

/// NFC, CRLF to LF, per-line trailing whitespace removed, and any run of three
/// or more newlines collapsed to exactly two.
pub fn normalize_text(raw: &str) -> String {
    let nfc: String = raw.replace("\r\n", "\n").nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    let mut newlines = 0usize;
    for (i, line) in nfc.split('\n').enumerate() {
        if i > 0 {
            newlines += 1;
        }
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        for _ in 0..newlines.min(2) {
            out.push('\n');
        }
        newlines = 0;
        out.push_str(line);
    }
    for _ in 0..newlines.min(2) {
        out.push('\n');
    }
    out
}
