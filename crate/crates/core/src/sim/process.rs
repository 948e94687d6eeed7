//! Subprocess handlers: the payload goes to stdin as JSON, the handler result
//! comes back on stdout, and a nonzero exit status is an error.

use std::io::{Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use crate::provider::RequestOutcome;

pub(super) struct HandlerRun<'a> {
    pub argv: &'a [String],
    pub handler: &'a Path,
    pub cwd: &'a Path,
    pub env: Vec<(&'static str, String)>,
    pub stdin: String,
    pub timeout: Duration,
}

/// Runs the handler and returns the outcome with the real time it took.
pub(super) fn run_handler(run: HandlerRun<'_>) -> (RequestOutcome, Duration) {
    let started = Instant::now();
    let Some((program, prefix)) = run.argv.split_first() else {
        return (
            RequestOutcome::Failed("empty interpreter command".into()),
            Duration::ZERO,
        );
    };
    let mut cmd = Command::new(program);
    cmd.args(prefix)
        .arg(run.handler)
        .current_dir(run.cwd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in &run.env {
        cmd.env(k, v);
    }
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => {
            return (
                RequestOutcome::Failed(format!("spawning {program}: {e}")),
                started.elapsed(),
            )
        }
    };

    let mut stdin = child.stdin.take().expect("stdin is piped");
    let payload = run.stdin;
    let writer = thread::spawn(move || {
        // A handler that never reads its input closes the pipe early.
        let _ = stdin.write_all(payload.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let out_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = stdout.read_to_end(&mut s);
        s
    });
    let mut stderr = child.stderr.take().expect("stderr is piped");
    let err_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = stderr.read_to_end(&mut s);
        s
    });

    let status = match child.wait_timeout(run.timeout) {
        Ok(Some(status)) => Some(status),
        Ok(None) => None,
        Err(e) => {
            let _ = child.kill();
            let _ = child.wait();
            return (
                RequestOutcome::Failed(format!("waiting for handler: {e}")),
                started.elapsed(),
            );
        }
    };
    if status.is_none() {
        let _ = child.kill();
        let _ = child.wait();
    }
    let elapsed = started.elapsed();
    let Some(status) = status else {
        // Grandchildren may still hold the pipes; leave the readers detached.
        return (RequestOutcome::TimedOut, elapsed);
    };
    let _ = writer.join();
    let out = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();

    let outcome = match status {
        s if s.success() => RequestOutcome::Body(String::from_utf8_lossy(&out).into_owned()),
        s => {
            let stderr = String::from_utf8_lossy(&err);
            let tail: String = stderr
                .trim()
                .chars()
                .rev()
                .take(2000)
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect();
            RequestOutcome::Failed(format!("handler exited with {s}: {tail}"))
        }
    };
    (outcome, elapsed)
}
