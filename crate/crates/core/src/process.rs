//! Shell command execution for external denoisers and ASR engines.

use std::io::Read;
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::Duration;

use thiserror::Error;
use wait_timeout::ChildExt;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("failed to spawn `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("`{command}` timed out after {seconds}s")]
    Timeout { command: String, seconds: u64 },
    #[error("i/o error while waiting for `{command}`: {source}")]
    Wait {
        command: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug)]
pub struct CommandOutput {
    pub status: ExitStatus,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
}

impl CommandOutput {
    /// Last few lines of stderr, lossily decoded, for error messages.
    pub fn diagnostics(&self) -> String {
        let text = String::from_utf8_lossy(&self.stderr);
        let lines: Vec<&str> = text.lines().collect();
        let start = lines.len().saturating_sub(20);
        lines[start..].join("\n")
    }
}

/// Single-quote a path for `sh`.
pub fn shell_quote(path: &Path) -> String {
    let s = path.to_string_lossy();
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Checks that every placeholder occurs exactly once in `template`.
pub fn check_placeholders(template: &str, placeholders: &[&str]) -> Result<(), String> {
    for p in placeholders {
        let n = template.matches(p).count();
        if n != 1 {
            return Err(format!(
                "command template must contain {p} exactly once, found {n}: {template:?}"
            ));
        }
    }
    Ok(())
}

/// Substitute shell-quoted paths for placeholders.
pub fn render_template(template: &str, substitutions: &[(&str, &Path)]) -> String {
    substitutions
        .iter()
        .fold(template.to_owned(), |acc, (key, path)| acc.replace(key, &shell_quote(path)))
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        buf
    })
}

/// Run `command` through `sh -c` in its own process group, inheriting the
/// environment. On timeout the whole group is killed.
pub fn run_shell(command: &str, timeout: Duration) -> Result<CommandOutput, ProcessError> {
    let mut cmd = Command::new("sh");
    cmd.arg("-c")
        .arg(command)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = cmd.spawn().map_err(|e| ProcessError::Spawn {
        command: command.to_owned(),
        source: e,
    })?;
    let out_handle = drain(child.stdout.take());
    let err_handle = drain(child.stderr.take());

    let waited = child.wait_timeout(timeout).map_err(|e| ProcessError::Wait {
        command: command.to_owned(),
        source: e,
    })?;
    let status = match waited {
        Some(status) => status,
        None => {
            #[cfg(unix)]
            unsafe {
                libc::kill(-(child.id() as i32), libc::SIGKILL);
            }
            let _ = child.kill();
            let _ = child.wait();
            return Err(ProcessError::Timeout {
                command: command.to_owned(),
                seconds: timeout.as_secs(),
            });
        }
    };
    Ok(CommandOutput {
        status,
        stdout: out_handle.join().unwrap_or_default(),
        stderr: err_handle.join().unwrap_or_default(),
    })
}
