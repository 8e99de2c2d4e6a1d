//! Append-only recall and prompt-event logs.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use foodprompt::persistence::{event_line, parse_prompt_events, parse_recall_log, recall_line, PersistError};
use foodprompt::{PromptEvent, RecallDay};

pub const RECALL_LOG: &str = "recalls.jsonl";
pub const EVENT_LOG: &str = "events.jsonl";

#[derive(Debug)]
pub struct LogStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl LogStore {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(LogStore {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn recall_path(&self) -> PathBuf {
        self.dir.join(RECALL_LOG)
    }

    pub fn event_path(&self) -> PathBuf {
        self.dir.join(EVENT_LOG)
    }

    /// Appends the events, then the recall, and syncs both files before
    /// returning.
    pub fn append_submission(&self, recall: &RecallDay, events: &[PromptEvent]) -> std::io::Result<()> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        if !events.is_empty() {
            let mut lines = String::new();
            for e in events {
                lines.push_str(&event_line(e));
                lines.push('\n');
            }
            append(&self.event_path(), &lines)?;
        }
        append(&self.recall_path(), &(recall_line(recall) + "\n"))
    }

    pub fn read_recalls(&self) -> Result<Vec<RecallDay>, PersistError> {
        read_or_empty(&self.recall_path(), parse_recall_log)
    }

    pub fn read_events(&self) -> Result<Vec<PromptEvent>, PersistError> {
        read_or_empty(&self.event_path(), parse_prompt_events)
    }
}

fn append(path: &Path, text: &str) -> std::io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(text.as_bytes())?;
    file.sync_data()
}

fn read_or_empty<T>(
    path: &Path,
    parse: impl FnOnce(BufReader<File>) -> Result<Vec<T>, PersistError>,
) -> Result<Vec<T>, PersistError> {
    match File::open(path) {
        Ok(file) => parse(BufReader::new(file)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}
