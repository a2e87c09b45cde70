//! Providers of per-frame detections.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use crate::detections::{load_detection_file, payload_file_name, DetectionFrame, LabelSpace};
use crate::error::Result;
use crate::geometry::Frame;

/// Supplies the detections of a frame. `memory` holds the open-set labels
/// measured in recent detection frames, for sources that build the prompt.
pub trait DetectorSource {
    /// `Ok(None)` when the frame has no payload.
    fn fetch(&mut self, frame: &Frame, memory: &BTreeSet<usize>) -> Result<Option<DetectionFrame>>;
}

/// Reads `frame-{t:06}.json` payloads from a directory.
#[derive(Clone, Debug)]
pub struct DirectorySource {
    dir: PathBuf,
    space: LabelSpace,
}

impl DirectorySource {
    pub fn new(dir: impl Into<PathBuf>, space: LabelSpace) -> Self {
        Self { dir: dir.into(), space }
    }
}

impl DetectorSource for DirectorySource {
    fn fetch(&mut self, frame: &Frame, _memory: &BTreeSet<usize>) -> Result<Option<DetectionFrame>> {
        let path = self.dir.join(payload_file_name(frame.index));
        if !path.is_file() {
            return Ok(None);
        }
        let k = &frame.intrinsics;
        load_detection_file(&path, &self.space, k.width, k.height).map(Some)
    }
}

/// Detections held in memory, keyed by frame index.
#[derive(Clone, Debug, Default)]
pub struct MemorySource {
    pub frames: BTreeMap<u64, DetectionFrame>,
}

impl MemorySource {
    pub fn new(frames: impl IntoIterator<Item = DetectionFrame>) -> Self {
        Self {
            frames: frames.into_iter().map(|f| (f.frame, f)).collect(),
        }
    }
}

impl DetectorSource for MemorySource {
    fn fetch(&mut self, frame: &Frame, _memory: &BTreeSet<usize>) -> Result<Option<DetectionFrame>> {
        Ok(self.frames.get(&frame.index).cloned())
    }
}

#[cfg(feature = "remote")]
pub use remote::RemoteSource;

#[cfg(feature = "remote")]
mod remote {
    use std::collections::BTreeSet;
    use std::time::Duration;

    use serde::Serialize;

    use super::DetectorSource;
    use crate::detections::{DetectionFrame, DetectionPayload, LabelSpace};
    use crate::error::{Error, Result};
    use crate::geometry::Frame;

    #[derive(Serialize)]
    struct Request<'a> {
        frame: u64,
        width: usize,
        height: usize,
        memory: Vec<&'a str>,
    }

    /// Posts `{frame, width, height, memory}` to a detector service and
    /// expects a payload with RLE masks back. HTTP 204 or 404 means no
    /// detections for the frame.
    pub struct RemoteSource {
        url: String,
        space: LabelSpace,
        client: reqwest::blocking::Client,
    }

    impl RemoteSource {
        pub fn new(url: impl Into<String>, space: LabelSpace, timeout: Duration) -> Result<Self> {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| Error::Remote(e.to_string()))?;
            Ok(Self {
                url: url.into(),
                space,
                client,
            })
        }
    }

    impl DetectorSource for RemoteSource {
        fn fetch(&mut self, frame: &Frame, memory: &BTreeSet<usize>) -> Result<Option<DetectionFrame>> {
            let k = &frame.intrinsics;
            let body = Request {
                frame: frame.index,
                width: k.width,
                height: k.height,
                memory: memory.iter().map(|i| self.space.open_set.name(*i)).collect(),
            };
            let resp = self
                .client
                .post(&self.url)
                .json(&body)
                .send()
                .map_err(|e| Error::Remote(format!("{}: {e}", self.url)))?;
            let status = resp.status();
            if status == reqwest::StatusCode::NO_CONTENT || status == reqwest::StatusCode::NOT_FOUND {
                return Ok(None);
            }
            if !status.is_success() {
                return Err(Error::Remote(format!("{}: HTTP {status}", self.url)));
            }
            let text = resp.text().map_err(|e| Error::Remote(format!("{}: {e}", self.url)))?;
            let payload = DetectionPayload::from_json(&text)?;
            if payload.detections.iter().any(|d| d.mask_png.is_some()) {
                return Err(Error::Remote(format!("{}: remote payloads must use mask_rle", self.url)));
            }
            payload.resolve(&self.space, k.width, k.height, None).map(Some)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detections::{DetectionPayload, DetectionRecord, LabelList, LabelMeasurement};
    use crate::geometry::{CameraIntrinsics, DepthImage, Mask, Pose};

    fn space() -> LabelSpace {
        LabelSpace::new(
            LabelList::new(["chair", "table"]).unwrap(),
            LabelList::new(["chair", "table"]).unwrap(),
        )
    }

    fn frame(index: u64) -> Frame {
        let k = CameraIntrinsics::new(10.0, 10.0, 4.0, 3.0, 8, 6).unwrap();
        Frame::new(index, DepthImage::new(8, 6, vec![1.0; 48]).unwrap(), None, Pose::identity(), k).unwrap()
    }

    fn detection_frame(index: u64) -> DetectionFrame {
        DetectionFrame {
            frame: index,
            prompt: BTreeSet::from([1]),
            detections: vec![DetectionRecord {
                measurements: vec![LabelMeasurement { label: 1, score: 0.75 }],
                mask: Mask::from_fn(8, 6, |c, r| c < 3 && r < 2),
                bbox: [0.0, 0.0, 3.0, 2.0],
                prompt: BTreeSet::from([1]),
            }],
            skipped: Default::default(),
        }
    }

    #[test]
    fn directory_source_reads_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let df = detection_frame(10);
        std::fs::write(
            dir.path().join(payload_file_name(10)),
            DetectionPayload::from_frame(&df, &space()).to_json(),
        )
        .unwrap();
        let mut src = DirectorySource::new(dir.path(), space());
        assert_eq!(src.fetch(&frame(10), &BTreeSet::new()).unwrap(), Some(df));
        assert_eq!(src.fetch(&frame(20), &BTreeSet::new()).unwrap(), None);
    }

    #[cfg(feature = "remote")]
    #[test]
    fn remote_source_round_trip() {
        use std::io::{BufRead, BufReader, Read, Write};
        use std::net::TcpListener;

        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let body = DetectionPayload::from_frame(&detection_frame(3), &space()).to_json();
        let server = std::thread::spawn(move || {
            let mut requests = Vec::new();
            for status in ["200 OK", "204 No Content"] {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                requests.push(String::from_utf8(buf).unwrap());
                let payload = if status.starts_with("200") { body.as_str() } else { "" };
                let mut s = stream;
                write!(
                    s,
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                )
                .unwrap();
            }
            requests
        });

        let mut src = RemoteSource::new(
            format!("http://{addr}/detect"),
            space(),
            std::time::Duration::from_secs(5),
        )
        .unwrap();
        let got = src.fetch(&frame(3), &BTreeSet::from([0])).unwrap();
        assert_eq!(got, Some(detection_frame(3)));
        assert_eq!(src.fetch(&frame(4), &BTreeSet::new()).unwrap(), None);
        let requests = server.join().unwrap();
        let first: serde_json::Value = serde_json::from_str(&requests[0]).unwrap();
        assert_eq!(first["memory"], serde_json::json!(["chair"]));
        assert_eq!(first["width"], 8);
    }
}
