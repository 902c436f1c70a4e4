use serde::{Deserialize, Serialize};

use super::{DetectError, Detection, DetectorBackend};
use crate::adapter::LineProcess;
use crate::domain::{BoundingBox, Frame};
use crate::videoio::{frame_file_name, write_ppm_file};

#[derive(Serialize)]
struct Request {
    frame: String,
    region: Option<BoundingBox>,
}

#[derive(Deserialize)]
struct Response {
    detections: Vec<Detection>,
}

/// Detector served by an external process over the line protocol:
/// request `{"frame": <ppm path>, "region": [x,y,w,h]|null}`, response
/// `{"detections": [{"box": [x,y,w,h], "score": s}, ...]}`.
#[derive(Debug)]
pub struct ExternalDetector {
    process: LineProcess,
    scratch: tempfile::TempDir,
}

impl ExternalDetector {
    pub fn spawn(command: &[String]) -> Result<Self, DetectError> {
        let process = LineProcess::spawn(command).map_err(DetectError::BackendFailure)?;
        let scratch = tempfile::tempdir().map_err(|e| DetectError::BackendFailure(e.to_string()))?;
        Ok(ExternalDetector { process, scratch })
    }
}

impl DetectorBackend for ExternalDetector {
    fn name(&self) -> &str {
        "external"
    }

    fn supports_region_restriction(&self) -> bool {
        true
    }

    fn detect(&self, frame: &Frame, region: Option<&BoundingBox>) -> Result<Vec<Detection>, DetectError> {
        let path = self.scratch.path().join(frame_file_name(frame.index));
        write_ppm_file(&path, &frame.image).map_err(|e| DetectError::BackendFailure(e.to_string()))?;
        let req = Request { frame: path.to_string_lossy().into_owned(), region: region.copied() };
        let resp: Response = self.process.request(&req).map_err(DetectError::BackendFailure)?;
        let _ = std::fs::remove_file(&path);
        Ok(resp.detections)
    }
}
