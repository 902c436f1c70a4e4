//! Subprocess line protocol used by the external detector and embedder:
//! one UTF-8 JSON object per line on stdin, one JSON reply per line on
//! stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

struct Pipes {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct LineProcess {
    command: Vec<String>,
    pipes: Mutex<Pipes>,
}

impl std::fmt::Debug for LineProcess {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LineProcess").field("command", &self.command).finish()
    }
}

impl LineProcess {
    pub fn spawn(command: &[String]) -> Result<Self, String> {
        let (program, args) = command.split_first().ok_or("empty adapter command")?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("failed to start {program}: {e}"))?;
        let stdin = child.stdin.take().ok_or("adapter stdin unavailable")?;
        let stdout = BufReader::new(child.stdout.take().ok_or("adapter stdout unavailable")?);
        Ok(LineProcess {
            command: command.to_vec(),
            pipes: Mutex::new(Pipes { child, stdin, stdout }),
        })
    }

    /// Sends one request line and waits for one response line.
    pub fn request<Req: Serialize, Resp: DeserializeOwned>(&self, req: &Req) -> Result<Resp, String> {
        let mut pipes = self.pipes.lock().map_err(|_| "adapter mutex poisoned".to_string())?;
        let mut line = serde_json::to_string(req).map_err(|e| e.to_string())?;
        line.push('\n');
        pipes
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| pipes.stdin.flush())
            .map_err(|e| format!("adapter write failed: {e}"))?;
        let mut reply = String::new();
        let n = pipes
            .stdout
            .read_line(&mut reply)
            .map_err(|e| format!("adapter read failed: {e}"))?;
        if n == 0 {
            return Err("adapter closed its output".into());
        }
        serde_json::from_str(reply.trim_end()).map_err(|e| format!("malformed adapter reply {reply:?}: {e}"))
    }
}

impl Drop for LineProcess {
    fn drop(&mut self) {
        if let Ok(p) = self.pipes.get_mut() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }
}
