use std::fs;
use std::path::{Path, PathBuf};

use raremeta::Warning;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

pub type Outcome<T> = Result<T, Failure>;

/// Wraps a library error as a data error attributed to `path`.
pub fn data_at(path: &Path) -> impl Fn(raremeta::Error) -> Failure + '_ {
    move |e| Failure::Data(format!("{}: {e}", path.display()))
}

pub fn data(e: raremeta::Error) -> Failure {
    Failure::Data(e.to_string())
}

pub fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write(path: &Path, contents: &str) -> Outcome<()> {
    fs::write(path, contents).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

/// Collected warnings and notes, written to `<prefix>.log`.
#[derive(Debug, Default)]
pub struct Log {
    lines: Vec<String>,
}

impl Log {
    pub fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn warn(&mut self, w: &Warning) {
        self.lines.push(format!("warning: {w}"));
    }

    pub fn warn_all(&mut self, ws: &[Warning]) {
        for w in ws {
            self.warn(w);
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_appends_to_the_prefix() {
        assert_eq!(with_suffix(Path::new("out/run.v1"), ".log"), PathBuf::from("out/run.v1.log"));
    }

    #[test]
    fn errors_name_the_file() {
        let e = raremeta::Error::Parse { line: 3, message: "bad".into() };
        match data_at(Path::new("a.tsv"))(e) {
            Failure::Data(m) => assert_eq!(m, "a.tsv: line 3: bad"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn log_renders_one_line_per_entry() {
        let mut log = Log::default();
        log.note("started");
        log.warn(&Warning::new("s1", "dropped 2 variants"));
        assert_eq!(log.render(), "started\nwarning: s1: dropped 2 variants\n");
    }
}
