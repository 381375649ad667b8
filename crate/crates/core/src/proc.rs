//! Subprocesses with a wall-clock limit and captured output.

use std::io::{self, Read};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    /// Exit code; `None` when killed by a signal or by the timeout.
    pub code: Option<i32>,
    pub timed_out: bool,
    pub stdout: String,
    pub stderr: String,
    pub wall_time: Duration,
}

impl CommandOutput {
    pub fn success(&self) -> bool {
        !self.timed_out && self.code == Some(0)
    }

    /// Digest over both captured streams.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.stdout.as_bytes());
        h.update([0]);
        h.update(self.stderr.as_bytes());
        format!("sha256:{}", hex::encode(h.finalize()))
    }

    /// Both streams, for error messages.
    pub fn combined(&self) -> String {
        format!("{}{}", self.stdout, self.stderr)
    }
}

/// Splits a command template into argv. A token that is exactly `{test_ids}`
/// expands into one argument per id; `{repo_root}` and embedded `{test_ids}`
/// are substituted inside tokens.
pub fn expand_template(template: &str, repo_root: &Path, test_ids: &[String]) -> Result<Vec<String>, String> {
    let tokens = shlex::split(template).ok_or_else(|| format!("cannot split command template {template:?}"))?;
    let root = repo_root.to_string_lossy();
    let mut argv = Vec::with_capacity(tokens.len() + test_ids.len());
    for t in tokens {
        if t == "{test_ids}" {
            argv.extend(test_ids.iter().cloned());
        } else {
            argv.push(
                t.replace("{repo_root}", &root)
                    .replace("{test_ids}", &test_ids.join(" ")),
            );
        }
    }
    if argv.is_empty() {
        return Err("empty command template".into());
    }
    Ok(argv)
}

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

#[cfg(unix)]
fn kill_group(child: &mut Child) {
    // SAFETY: plain syscall; the child leads its own process group.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_group(child: &mut Child) {
    let _ = child.kill();
}

/// Runs `argv` in `cwd` in its own process group, killing it once `timeout` elapses.
pub fn run_command(argv: &[String], cwd: &Path, env: &[(&str, &str)], timeout: Duration) -> io::Result<CommandOutput> {
    let (prog, args) = argv
        .split_first()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty argv"))?;
    let start = Instant::now();
    let mut cmd = Command::new(prog);
    cmd.args(args)
        .current_dir(cwd)
        .envs(env.iter().copied())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = cmd.spawn()?;
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));

    let mut timed_out = false;
    let status = loop {
        if let Some(s) = child.try_wait()? {
            break s;
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            kill_group(&mut child);
            break child.wait()?;
        }
        thread::sleep(Duration::from_millis(10));
    };
    let wall_time = start.elapsed();
    // Leftover descendants would hold the pipes open.
    kill_group(&mut child);
    Ok(CommandOutput {
        code: if timed_out { None } else { status.code() },
        timed_out,
        stdout: out.join().unwrap_or_default(),
        stderr: err.join().unwrap_or_default(),
        wall_time,
    })
}
